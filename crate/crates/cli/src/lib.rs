//! The `catsearch` command line.
//!
//! [`run`] does all the work against caller-supplied streams so the whole
//! tool can be driven in-process by tests; `main` only wires it to the
//! real stdin, stdout and stderr.

use std::io::{BufRead, Write};
use std::net::{Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};

use catsearch_core::analysis::measure;
use catsearch_core::harness::{
    dominance_rows, sweep_many, verify, write_dominance_csv, write_sweep_csv,
};
use catsearch_core::{CatError, Outcome, SearchSession, StrategyKind};
use catsearch_service::{ServeConfig, ServiceError};
use clap::{Parser, Subcommand};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PROPERTY_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "catsearch", version, about = "Adaptive difficulty search")]
pub struct Cli {
    /// Seed for stochastic subjects.
    #[arg(long, global = true, env = "CAT_SEED", default_value_t = 0)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one strategy against every threshold 0..=n and write a CSV.
    Sweep {
        #[arg(long)]
        strategy: StrategyKind,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        n: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep several strategies into one CSV and write the per-threshold
    /// Pareto front beside it as `<stem>_dominance.csv`.
    Compare {
        #[arg(long, value_delimiter = ',', required = true)]
        strategies: Vec<StrategyKind>,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        n: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check every property up to n-max; exits 1 if any fails.
    Verify {
        #[arg(long, value_parser = clap::value_parser!(u64).range(16..))]
        n_max: u64,
    },
    /// Interactive session: prints `PROBE <level>`, reads pass, fail or quit.
    Session {
        #[arg(long)]
        strategy: StrategyKind,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        n: u64,
    },
    /// Serve the HTTP session API on 127.0.0.1.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// JSONL event log; sessions in it are restored on start.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Directory served at `/`.
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
}

/// Path of the dominance CSV written next to a compare output.
pub fn dominance_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "compare".into());
    out.with_file_name(format!("{stem}_dominance.csv"))
}

fn exit_code_for(e: &CatError) -> i32 {
    match e {
        CatError::Io { .. } | CatError::Csv { .. } => EXIT_IO,
        _ => EXIT_USAGE,
    }
}

fn usize_arg(v: u64) -> usize {
    // flags are far below usize::MAX on every supported target
    usize::try_from(v).unwrap_or(usize::MAX)
}

/// Parse `args` (including the program name) and run the command.
/// Returns the process exit status.
pub fn run<I, T>(args: I, input: &mut dyn BufRead, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    match execute(cli, input, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code_for(&e)
        }
    }
}

fn execute(
    cli: Cli,
    input: &mut dyn BufRead,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, CatError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CatError::Io { path, source }
    };
    let stdout = Path::new("<stdout>");
    match cli.command {
        Command::Sweep {
            strategy,
            n,
            out: path,
        } => {
            let rows = sweep_many(&[strategy], usize_arg(n))?;
            write_sweep_csv(&rows, &path)?;
            writeln!(out, "wrote {} rows to {}", rows.len(), path.display()).map_err(io(stdout))?;
        }
        Command::Compare {
            mut strategies,
            n,
            out: path,
        } => {
            strategies.sort();
            strategies.dedup();
            let n = usize_arg(n);
            let rows = sweep_many(&strategies, n)?;
            write_sweep_csv(&rows, &path)?;
            let dom_path = dominance_path(&path);
            let dom = dominance_rows(&strategies, n)?;
            write_dominance_csv(&dom, &dom_path)?;
            writeln!(
                out,
                "wrote {} rows to {} and {} rows to {}",
                rows.len(),
                path.display(),
                dom.len(),
                dom_path.display()
            )
            .map_err(io(stdout))?;
        }
        Command::Verify { n_max } => {
            let report = verify(usize_arg(n_max))?;
            write!(out, "{report}").map_err(io(stdout))?;
            if !report.passed {
                return Ok(EXIT_PROPERTY_FAILURE);
            }
        }
        Command::Session { strategy, n } => {
            return session(strategy, usize_arg(n), input, out, err);
        }
        Command::Serve {
            port,
            log,
            static_dir,
        } => {
            let config = ServeConfig {
                addr: SocketAddr::from((Ipv4Addr::LOCALHOST, port)),
                log_path: log,
                static_dir,
                seed: cli.seed,
            };
            let runtime = tokio::runtime::Runtime::new().map_err(io(Path::new("<runtime>")))?;
            if let Err(e) = runtime.block_on(catsearch_service::serve(config)) {
                let _ = writeln!(err, "error: {e}");
                return Ok(match e {
                    ServiceError::BadRequest(_) => EXIT_USAGE,
                    _ => EXIT_IO,
                });
            }
        }
    }
    Ok(EXIT_OK)
}

/// The terminal line protocol. Unrecognised lines are reported on `err`
/// and the same probe is asked again.
fn session(
    strategy: StrategyKind,
    n: usize,
    input: &mut dyn BufRead,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, CatError> {
    let stdio = |source| CatError::Io {
        path: PathBuf::from("<stdio>"),
        source,
    };
    let mut state = SearchSession::start(strategy, n)?;
    let mut line = String::new();
    while !state.is_done() {
        let level = state.next_probe()?;
        writeln!(out, "PROBE {level}").map_err(stdio)?;
        out.flush().map_err(stdio)?;
        let outcome = loop {
            line.clear();
            if input.read_line(&mut line).map_err(stdio)? == 0 {
                writeln!(err, "input ended before the search finished").map_err(stdio)?;
                return Ok(EXIT_IO);
            }
            match line.trim().to_ascii_lowercase().as_str() {
                "quit" => return Ok(EXIT_OK),
                answer => match answer.parse::<Outcome>() {
                    Ok(o) => break o,
                    Err(_) => writeln!(err, "expected pass, fail or quit").map_err(stdio)?,
                },
            }
        };
        state.observe(outcome)?;
    }
    let m = measure(state.trace());
    let p = state.result().expect("search is done");
    writeln!(
        out,
        "RESULT {p} NEGATIVES {} TOTAL {}",
        m.negatives, m.total
    )
    .map_err(stdio)?;
    Ok(EXIT_OK)
}
