use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use vaba_core::{Quorum, ValidatorKind};

use crate::SimError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdversaryKind {
    /// Uniformly random delivery order, no corruption.
    #[default]
    Fair,
    /// `f` parties silent from the start.
    Crash,
    /// `f` parties equivocate in their own broadcasts and spray invalid
    /// certificates.
    Equivocate,
    /// `f` parties propose corrupt-origin values; the scheduler starves the
    /// final stage of a guessed set of honest broadcasts until skip fires.
    DelayLeader,
    /// Corrupts each freshly elected honest leader while budget remains.
    Adaptive,
}

impl AdversaryKind {
    pub const ALL: [AdversaryKind; 5] = [
        AdversaryKind::Fair,
        AdversaryKind::Crash,
        AdversaryKind::Equivocate,
        AdversaryKind::DelayLeader,
        AdversaryKind::Adaptive,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AdversaryKind::Fair => "fair",
            AdversaryKind::Crash => "crash",
            AdversaryKind::Equivocate => "equivocate",
            AdversaryKind::DelayLeader => "delay-leader",
            AdversaryKind::Adaptive => "adaptive",
        }
    }
}

impl fmt::Display for AdversaryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AdversaryKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AdversaryKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown adversary `{s}`"))
    }
}

/// When a run stops and how hard fairness is enforced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct HaltPolicy {
    /// Delivered-envelope budget; exhausting it is a run failure.
    pub event_budget: u64,
    /// An envelope pending for more than this many events is delivered
    /// next regardless of strategy. `None` picks `64 * n^2`.
    pub max_age: Option<u64>,
}

impl Default for HaltPolicy {
    fn default() -> Self {
        HaltPolicy { event_budget: 1_000_000, max_age: None }
    }
}

impl HaltPolicy {
    pub fn max_age(&self, n: usize) -> u64 {
        self.max_age.unwrap_or(64 * (n * n) as u64)
    }
}

fn default_runs() -> usize {
    1
}

fn default_validator() -> ValidatorKind {
    ValidatorKind::Always
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n: usize,
    pub f: usize,
    #[serde(default)]
    pub adversary: AdversaryKind,
    #[serde(default = "default_validator")]
    pub validator: ValidatorKind,
    /// Seed of the first run; run `i` uses `seed + i`.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub halt: HaltPolicy,
    /// CSV of per-run metrics.
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// JSON-lines trace of every delivered envelope.
    #[serde(default)]
    pub trace: Option<PathBuf>,
    /// Aggregate summary JSON.
    #[serde(default)]
    pub summary: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(n: usize, f: usize, adversary: AdversaryKind) -> Self {
        ExperimentConfig {
            n,
            f,
            adversary,
            validator: ValidatorKind::Always,
            seed: 0,
            runs: 1,
            halt: HaltPolicy::default(),
            out: None,
            trace: None,
            summary: None,
        }
    }

    pub fn with_validator(mut self, validator: ValidatorKind) -> Self {
        self.validator = validator;
        self
    }

    pub fn with_runs(mut self, seed: u64, runs: usize) -> Self {
        self.seed = seed;
        self.runs = runs;
        self
    }

    pub fn quorum(&self) -> Result<Quorum, SimError> {
        Quorum::new(self.n, self.f).ok_or(SimError::InvalidConfig(format!(
            "need n >= 3f + 1, got n = {}, f = {}",
            self.n, self.f
        )))
    }

    pub fn validate(&self) -> Result<Quorum, SimError> {
        let quorum = self.quorum()?;
        if self.runs == 0 {
            return Err(SimError::InvalidConfig("runs must be positive".into()));
        }
        if self.halt.event_budget == 0 {
            return Err(SimError::InvalidConfig("event budget must be positive".into()));
        }
        Ok(quorum)
    }

    pub fn seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.runs as u64).map(move |i| self.seed.wrapping_add(i))
    }
}
