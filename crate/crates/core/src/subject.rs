//! The difficulty axis and the hidden subject that answers probes.
//!
//! Levels run `1..=n`, easiest first. A subject's ability `p` is the number of
//! levels it passes, so `p = 0` means it fails everything and `p = n` means
//! it passes everything. Level `0` is an implicit always-pass sentinel and is
//! never handed out as a probe.

use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CatError, Result};

/// A 1-based index on the difficulty axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DifficultyLevel(usize);

impl DifficultyLevel {
    pub fn new(index: usize, n: usize) -> Result<Self> {
        if index == 0 || index > n {
            return Err(CatError::LevelOutOfRange { level: index, n });
        }
        Ok(Self(index))
    }

    pub fn get(self) -> usize {
        self.0
    }

    /// Caller guarantees `1 <= index <= n`.
    pub(crate) fn new_unchecked(index: usize) -> Self {
        debug_assert!(index >= 1);
        Self(index)
    }
}

impl fmt::Display for DifficultyLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Answer to one probe. `Fail` is a negative test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Pass,
    Fail,
}

impl Outcome {
    pub fn is_pass(self) -> bool {
        matches!(self, Outcome::Pass)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Pass => "pass",
            Outcome::Fail => "fail",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Outcome {
    type Err = CatError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pass" => Ok(Outcome::Pass),
            "fail" => Ok(Outcome::Fail),
            other => Err(CatError::InvalidArgument(format!(
                "outcome must be \"pass\" or \"fail\", got {other:?}"
            ))),
        }
    }
}

/// One answered probe. `seq` counts from 1 within a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub seq: usize,
    pub level: DifficultyLevel,
    pub outcome: Outcome,
}

/// Key of the random stream used for one stochastic probe.
///
/// The stream depends only on the key, never on how many other probes were
/// drawn before, so replays and parallel sweeps see identical answers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamKey<'a> {
    pub seed: u64,
    pub session: &'a str,
    pub seq: usize,
}

impl StreamKey<'_> {
    pub fn rng(&self) -> ChaCha8Rng {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update((self.session.len() as u64).to_le_bytes());
        hasher.update(self.session.as_bytes());
        hasher.update((self.seq as u64).to_le_bytes());
        let digest = hasher.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest[..32]);
        ChaCha8Rng::from_seed(seed)
    }
}

/// Deterministic subject: passes exactly the levels `1..=threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeterministicProfile {
    #[serde(rename = "p")]
    pub threshold: usize,
    pub n: usize,
}

/// Stochastic subject described by one column of a difficulty matrix.
///
/// A probe at level `i` runs `block_size` Bernoulli trials with success
/// probability `success_probs[i - 1]` and passes when the observed success
/// rate reaches `target_rate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticProfile {
    #[serde(rename = "q")]
    pub success_probs: Vec<f64>,
    #[serde(rename = "t")]
    pub target_rate: f64,
    #[serde(rename = "k")]
    pub block_size: u32,
}

/// The hidden subject a search runs against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AbilityProfile {
    Deterministic(DeterministicProfile),
    Stochastic(StochasticProfile),
    /// Answers arrive from outside (a live experimenter); nothing is hidden here.
    #[serde(skip)]
    External,
}

impl AbilityProfile {
    pub fn deterministic(threshold: usize, n: usize) -> Result<Self> {
        let profile = DeterministicProfile { threshold, n };
        profile.validate()?;
        Ok(Self::Deterministic(profile))
    }

    pub fn stochastic(success_probs: Vec<f64>, target_rate: f64, block_size: u32) -> Result<Self> {
        let profile = StochasticProfile {
            success_probs,
            target_rate,
            block_size,
        };
        profile.validate()?;
        Ok(Self::Stochastic(profile))
    }

    /// Number of levels the profile covers. `None` for external subjects.
    pub fn domain_size(&self) -> Option<usize> {
        match self {
            Self::Deterministic(d) => Some(d.n),
            Self::Stochastic(s) => Some(s.success_probs.len()),
            Self::External => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Deterministic(d) => d.validate(),
            Self::Stochastic(s) => s.validate(),
            Self::External => Ok(()),
        }
    }

    /// Answer a probe. Stochastic profiles draw from the stream named by `key`.
    pub fn answer(&self, level: DifficultyLevel, key: &StreamKey<'_>) -> Result<Outcome> {
        match self {
            Self::Deterministic(d) => answer_deterministic(d.threshold, d.n, level.get()),
            Self::Stochastic(s) => s.answer(level.get(), key),
            Self::External => Err(CatError::ExternalProfile),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let profile: Self = serde_json::from_str(text)?;
        profile.validate()?;
        Ok(profile)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CatError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }
}

impl DeterministicProfile {
    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(CatError::EmptyDomain);
        }
        if self.threshold > self.n {
            return Err(CatError::ThresholdOutOfRange {
                threshold: self.threshold,
                n: self.n,
            });
        }
        Ok(())
    }
}

impl StochasticProfile {
    fn validate(&self) -> Result<()> {
        if self.success_probs.is_empty() {
            return Err(CatError::EmptyDomain);
        }
        for &q in &self.success_probs {
            check_probability("success probability", q)?;
        }
        check_probability("target rate", self.target_rate)?;
        if self.block_size == 0 {
            return Err(CatError::ZeroBlockSize);
        }
        Ok(())
    }

    fn answer(&self, level: usize, key: &StreamKey<'_>) -> Result<Outcome> {
        let n = self.success_probs.len();
        if level == 0 || level > n {
            return Err(CatError::LevelOutOfRange { level, n });
        }
        block_probe(
            self.success_probs[level - 1],
            self.target_rate,
            self.block_size,
            key,
        )
    }

    /// Threshold this subject would have with perfectly reliable answers.
    pub fn insertion_rank(&self) -> usize {
        insertion_rank(&self.success_probs, self.target_rate)
    }
}

fn check_probability(what: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(CatError::InvalidProbability { what, value })
    }
}

/// A deterministic subject with threshold `p` passes level `i` iff `i <= p`.
pub fn answer_deterministic(threshold: usize, n: usize, level: usize) -> Result<Outcome> {
    if threshold > n {
        return Err(CatError::ThresholdOutOfRange { threshold, n });
    }
    if level == 0 || level > n {
        return Err(CatError::LevelOutOfRange { level, n });
    }
    Ok(if level <= threshold {
        Outcome::Pass
    } else {
        Outcome::Fail
    })
}

/// Run `block_size` Bernoulli(`success_prob`) trials; pass iff the success
/// rate is at least `target_rate` (ties pass).
pub fn block_probe(
    success_prob: f64,
    target_rate: f64,
    block_size: u32,
    key: &StreamKey<'_>,
) -> Result<Outcome> {
    if block_size == 0 {
        return Err(CatError::ZeroBlockSize);
    }
    check_probability("success probability", success_prob)?;
    check_probability("target rate", target_rate)?;

    let mut rng = key.rng();
    let successes = (0..block_size)
        .filter(|_| rng.random_bool(success_prob))
        .count();
    let rate = successes as f64 / f64::from(block_size);
    Ok(if rate >= target_rate {
        Outcome::Pass
    } else {
        Outcome::Fail
    })
}

/// Length of the longest prefix of `success_probs` whose entries all reach
/// `target_rate`.
///
/// The scan stops at the first level below target even if a harder level
/// rebounds above it; empirical columns are not always monotone.
pub fn insertion_rank(success_probs: &[f64], target_rate: f64) -> usize {
    success_probs
        .iter()
        .take_while(|&&q| q >= target_rate)
        .count()
}
