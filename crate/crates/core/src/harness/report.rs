use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::sweep::SweepRow;
use crate::analysis::{measure, pareto_front};
use crate::error::{CatError, Result};
use crate::strategy::{run_deterministic, StrategyKind};

pub const SWEEP_HEADER: [&str; 9] = [
    "n",
    "p",
    "strategy",
    "negatives",
    "total",
    "predicted_negatives",
    "predicted_total",
    "lb_negatives",
    "lb_total",
];

const DOMINANCE_HEADER: [&str; 4] = ["n", "p", "strategy", "on_front"];

/// Pareto-front membership of one strategy on one instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DominanceRow {
    pub n: usize,
    pub p: usize,
    pub strategy: StrategyKind,
    pub on_front: bool,
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

fn write_rows<W: Write, R: Serialize>(out: W, header: &[&str], rows: &[R]) -> csv::Result<()> {
    let mut w = csv_writer(out);
    // header goes out explicitly so an empty table still has one
    w.write_record(header)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| CatError::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> CatError + '_ {
    move |source| CatError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_sweep_to<W: Write>(out: W, rows: &[SweepRow]) -> csv::Result<()> {
    write_rows(out, &SWEEP_HEADER, rows)
}

pub fn write_sweep_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    write_sweep_to(create(path)?, rows).map_err(csv_err(path))
}

pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header = reader.headers().map_err(csv_err(path))?.clone();
    if header.iter().ne(SWEEP_HEADER) {
        return Err(CatError::Csv {
            path: path.to_path_buf(),
            source: csv::Error::from(io::Error::new(
                io::ErrorKind::InvalidData,
                format!("unexpected header {header:?}"),
            )),
        });
    }
    reader
        .deserialize()
        .collect::<csv::Result<Vec<SweepRow>>>()
        .map_err(csv_err(path))
}

/// For every `p` in `0..=n`, which of `strategies` sit on the Pareto front.
pub fn dominance_rows(strategies: &[StrategyKind], n: usize) -> Result<Vec<DominanceRow>> {
    if n == 0 {
        return Err(CatError::EmptyDomain);
    }
    let mut kinds = strategies.to_vec();
    kinds.sort();
    kinds.dedup();
    let mut rows = Vec::with_capacity(kinds.len() * (n + 1));
    for p in 0..=n {
        let points = kinds
            .iter()
            .map(|&k| run_deterministic(k, n, p).map(|r| (k, measure(&r.trace))))
            .collect::<Result<Vec<_>>>()?;
        let front = pareto_front(&points);
        rows.extend(kinds.iter().map(|&strategy| DominanceRow {
            n,
            p,
            strategy,
            on_front: front.iter().any(|(k, _)| *k == strategy),
        }));
    }
    Ok(rows)
}

pub fn write_dominance_csv(rows: &[DominanceRow], path: &Path) -> Result<()> {
    write_rows(create(path)?, &DOMINANCE_HEADER, rows).map_err(csv_err(path))
}
