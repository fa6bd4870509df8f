use std::io::Write;

use logpool::calibrated_world::{
    adversary_round, bayesian_independent_structure, run_rng, symmetric_null_structure, Adversary,
    InformationStructure, ScenarioSpec,
};
use logpool::diagnostics::tail_study;
use logpool::pooling::WeightVector;
use logpool::Error;
use proptest::prelude::*;

fn prior_and_accuracies() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..=4, 2usize..=4).prop_flat_map(|(n, m)| {
        (
            prop::collection::vec(0.05f64..1.0, n).prop_map(|p| {
                let t: f64 = p.iter().sum();
                p.into_iter().map(|x| x / t).collect()
            }),
            prop::collection::vec(0.2f64..=1.0, m),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generated_structures_are_calibrated((prior, acc) in prior_and_accuracies()) {
        let s = bayesian_independent_structure(&prior, &acc).unwrap();
        let report = s.verify_calibration();
        prop_assert!(report.max_violation <= 1e-12, "{:?}", report);
        let marginal = s.outcome_marginal();
        for (a, b) in marginal.iter().zip(&prior) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn same_seed_same_rounds(seed in any::<u64>(), run in 0u64..8) {
        let spec = ScenarioSpec::AppendixBAdaptive;
        let mut a = Adversary::new(spec.clone()).unwrap();
        let mut b = Adversary::new(spec).unwrap();
        let (mut ra, mut rb) = (run_rng(seed, run), run_rng(seed, run));
        let w = WeightVector::normalized(vec![0.4, 0.6]).unwrap();
        for t in 1..50 {
            prop_assert_eq!(
                adversary_round(&mut a, &w, t, 50, &mut ra).unwrap(),
                adversary_round(&mut b, &w, t, 50, &mut rb).unwrap()
            );
        }
    }
}

#[test]
fn sampled_outcome_frequencies_match_marginal() {
    let s = bayesian_independent_structure(&[0.2, 0.3, 0.5], &[0.9, 0.6]).unwrap();
    let mut rng = run_rng(42, 0);
    let draws = 1_000_000u64;
    let mut counts = [0u64; 3];
    for _ in 0..draws {
        counts[s.sample_round(&mut rng).outcome] += 1;
    }
    for (c, p) in counts.iter().zip(s.outcome_marginal()) {
        let freq = *c as f64 / draws as f64;
        let se = (p * (1.0 - p) / draws as f64).sqrt();
        assert!((freq - p).abs() <= 3.0 * se, "{freq} vs {p} (se {se})");
    }
}

#[test]
fn calibrated_tails_respect_bounds() {
    let s = bayesian_independent_structure(&[0.2, 0.3, 0.5], &[0.95, 0.9, 0.6]).unwrap();
    let w = WeightVector::normalized(vec![0.5, 0.3, 0.2]).unwrap();
    let study = tail_study(
        &s,
        &w,
        &[0.01, 0.05, 0.1],
        &[1.0, 2.0, 4.0, 8.0],
        200_000,
        &mut run_rng(7, 0),
    )
    .unwrap();
    assert!(
        study.doubt.iter().any(|(_, e)| e.hits > 0),
        "event never occurs: {study:?}"
    );
    assert!(study.within(4.0), "{study:?}");
}

#[test]
fn null_structure_has_no_doubt_events() {
    let s = symmetric_null_structure(&[0.5, 0.5], 3).unwrap();
    let study = tail_study(
        &s,
        &WeightVector::uniform(3),
        &[0.1],
        &[1.0],
        10_000,
        &mut run_rng(0, 0),
    )
    .unwrap();
    assert_eq!(study.doubt[0].1.hits, 0);
    assert_eq!(study.upper.iter().map(|(_, _, e)| e.hits).sum::<u64>(), 0);
}

#[test]
fn table_files_load_and_validate() {
    let mut good = tempfile::NamedTempFile::new().unwrap();
    writeln!(
        good,
        "# two outcomes, two experts\n2 2\n0 0 0 0.3\n1 0 0 0.2\n0 1 1 0.1\n1 1 1 0.4"
    )
    .unwrap();
    let s = InformationStructure::load_table(good.path()).unwrap();
    assert!(s.verify_calibration().passes());
    assert!((s.report(1, 1).unwrap().probs()[1] - (1.0 - 1e-12)).abs() < 1e-15);

    let mut bad = tempfile::NamedTempFile::new().unwrap();
    writeln!(bad, "2 2\n0 0 0 0.3\n1 1 1 0.3").unwrap();
    assert!(matches!(
        InformationStructure::load_table(bad.path()),
        Err(Error::Domain(_))
    ));
    assert!(matches!(
        InformationStructure::load_table(std::path::Path::new("/nonexistent/table.txt")),
        Err(Error::Io(_))
    ));
}
