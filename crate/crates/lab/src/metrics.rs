use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;
use vaba_core::{PartyId, Value};

use crate::SimError;

/// Ground-truth violations observed during one run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Violations {
    pub agreement: u64,
    pub validity: u64,
    pub monotonicity: u64,
    pub view_skipping: u64,
    /// Elections invoked before `2f + 1` broadcasts of the view completed.
    pub pre_election: u64,
    /// Two valid proofs on distinct values of one provable broadcast.
    pub provability: u64,
}

impl Violations {
    pub fn total(&self) -> u64 {
        self.agreement + self.validity + self.monotonicity + self.view_skipping + self.pre_election + self.provability
    }

    pub fn is_clean(&self) -> bool {
        self.total() == 0
    }

    fn add(&mut self, other: &Violations) {
        self.agreement += other.agreement;
        self.validity += other.validity;
        self.monotonicity += other.monotonicity;
        self.view_skipping += other.view_skipping;
        self.pre_election += other.pre_election;
        self.provability += other.provability;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunMetrics {
    pub seed: u64,
    pub n: usize,
    pub f: usize,
    /// Honest-sent words keyed by the view the envelope belongs to.
    pub words_per_view: BTreeMap<u64, u64>,
    /// Decision view of every party honest at the end of the run.
    pub decision_views: BTreeMap<PartyId, u64>,
    /// Latest decision view among honest parties.
    pub views_to_decide: u64,
    pub decided_values: BTreeMap<PartyId, Value>,
    /// The decided value is the input of a party that was honest when it
    /// proposed.
    pub quality: bool,
    /// Time of the last honest decision over the longest delivery delay.
    pub duration: f64,
    pub events: u64,
    pub max_delay: u64,
    /// Views whose first honest election was checked against ground truth.
    pub elections_checked: u64,
    pub corrupted: Vec<PartyId>,
    pub violations: Violations,
}

impl RunMetrics {
    pub fn words_view1(&self) -> u64 {
        self.words_per_view.get(&1).copied().unwrap_or(0)
    }

    pub fn max_words_per_view(&self) -> u64 {
        self.words_per_view.values().copied().max().unwrap_or(0)
    }

    pub fn all_in_first_view(&self) -> bool {
        self.views_to_decide == 1
    }
}

#[derive(Serialize)]
struct CsvRow {
    run_seed: u64,
    views_to_decide: u64,
    words_view1: u64,
    max_words_per_view: u64,
    decided_value_honest: bool,
    duration: f64,
}

pub fn write_csv<W: Write>(out: W, runs: &[RunMetrics]) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(out);
    for m in runs {
        w.serialize(CsvRow {
            run_seed: m.seed,
            views_to_decide: m.views_to_decide,
            words_view1: m.words_view1(),
            max_words_per_view: m.max_words_per_view(),
            decided_value_honest: m.quality,
            duration: m.duration,
        })?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub runs: usize,
    pub n: usize,
    pub f: usize,
    pub mean_views: f64,
    /// Fraction of runs where every honest party decided in view 1.
    pub p_first_view: f64,
    /// Quantiles (min, median, p90, p99, max) of views to decide.
    pub views_quantiles: [u64; 5],
    pub max_words_per_view: u64,
    pub max_words_over_n2: f64,
    pub quality_rate: f64,
    pub mean_duration: f64,
    pub max_duration: f64,
    pub violations: Violations,
}

pub fn aggregate(runs: &[RunMetrics]) -> Result<Summary, SimError> {
    let first = runs.first().ok_or(SimError::EmptyAggregate)?;
    let count = runs.len() as f64;
    let mut views: Vec<u64> = runs.iter().map(|m| m.views_to_decide).collect();
    views.sort_unstable();
    let quantile = |q: f64| views[((views.len() - 1) as f64 * q).round() as usize];
    let max_words = runs.iter().map(RunMetrics::max_words_per_view).max().unwrap_or(0);
    let mut violations = Violations::default();
    for m in runs {
        violations.add(&m.violations);
    }
    Ok(Summary {
        runs: runs.len(),
        n: first.n,
        f: first.f,
        mean_views: views.iter().sum::<u64>() as f64 / count,
        p_first_view: runs.iter().filter(|m| m.all_in_first_view()).count() as f64 / count,
        views_quantiles: [quantile(0.0), quantile(0.5), quantile(0.9), quantile(0.99), quantile(1.0)],
        max_words_per_view: max_words,
        max_words_over_n2: max_words as f64 / (first.n * first.n) as f64,
        quality_rate: runs.iter().filter(|m| m.quality).count() as f64 / count,
        mean_duration: runs.iter().map(|m| m.duration).sum::<f64>() / count,
        max_duration: runs.iter().map(|m| m.duration).fold(0.0, f64::max),
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metrics(seed: u64, views: u64, words: u64, quality: bool) -> RunMetrics {
        RunMetrics {
            seed,
            n: 4,
            f: 1,
            words_per_view: (1..=views).map(|j| (j, words)).collect(),
            decision_views: BTreeMap::new(),
            views_to_decide: views,
            decided_values: BTreeMap::new(),
            quality,
            duration: views as f64,
            events: 0,
            max_delay: 1,
            elections_checked: 0,
            corrupted: Vec::new(),
            violations: Violations::default(),
        }
    }

    #[test]
    fn empty_is_error() {
        assert!(matches!(aggregate(&[]), Err(SimError::EmptyAggregate)));
    }

    #[test]
    fn all_first_view() {
        let runs: Vec<_> = (0..100).map(|s| metrics(s, 1, 150, true)).collect();
        let s = aggregate(&runs).unwrap();
        assert_eq!(s.mean_views, 1.0);
        assert_eq!(s.p_first_view, 1.0);
        assert_eq!(s.views_quantiles, [1; 5]);
        assert_eq!(s.max_words_over_n2, 150.0 / 16.0);
    }

    #[test]
    fn mixed_runs() {
        let runs = vec![metrics(0, 1, 100, true), metrics(1, 3, 120, false), metrics(2, 2, 90, true), metrics(3, 1, 10, false)];
        let s = aggregate(&runs).unwrap();
        assert_eq!(s.mean_views, 7.0 / 4.0);
        assert_eq!(s.p_first_view, 0.5);
        assert_eq!(s.quality_rate, 0.5);
        assert_eq!(s.max_words_per_view, 120);
        assert_eq!(s.views_quantiles[0], 1);
        assert_eq!(s.views_quantiles[4], 3);
    }

    #[test]
    fn csv_columns() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &[metrics(9, 2, 40, true)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "run_seed,views_to_decide,words_view1,max_words_per_view,decided_value_honest,duration\n9,2,40,40,true,2.0\n"
        );
    }
}
