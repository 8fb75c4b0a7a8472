use proptest::prelude::*;
use vaba_core::ValidatorKind;
use vaba_lab::{run_one, AdversaryKind, ExperimentConfig};

fn adversary() -> impl Strategy<Value = AdversaryKind> {
    prop::sample::select(AdversaryKind::ALL.to_vec())
}

fn validator() -> impl Strategy<Value = ValidatorKind> {
    prop::sample::select(vec![ValidatorKind::Always, ValidatorKind::Even, ValidatorKind::Signed])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Every strategy halts with all honest parties decided, within the
    /// corruption budget and without ground-truth violations.
    #[test]
    fn runs_terminate_safely(
        (n, f) in prop_oneof![Just((4usize, 1usize)), Just((7, 2))],
        kind in adversary(),
        validator in validator(),
        seed in any::<u64>(),
    ) {
        let cfg = ExperimentConfig::new(n, f, kind).with_validator(validator);
        let m = run_one(&cfg, seed, false).unwrap().metrics;
        prop_assert!(m.violations.is_clean(), "{:?}", m.violations);
        prop_assert!(m.corrupted.len() <= f);
        prop_assert_eq!(m.decision_views.len(), n - m.corrupted.len());
        prop_assert!(m.max_words_per_view() <= 14 * (n * n) as u64);
        let values: Vec<_> = m.decided_values.values().collect();
        prop_assert!(values.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn tracing_does_not_change_the_run(kind in adversary(), seed in any::<u64>()) {
        let cfg = ExperimentConfig::new(4, 1, kind);
        let quiet = run_one(&cfg, seed, false).unwrap();
        let traced = run_one(&cfg, seed, true).unwrap();
        prop_assert_eq!(quiet.metrics, traced.metrics);
        prop_assert!(quiet.trace.is_empty());
    }
}
