mod common;

use logpool::hindsight::{
    best_weights, best_weights_golden, cumulative_loss, regret, History, DEFAULT_TOL,
};
use logpool::mirror_descent::{
    run_learner, LearnerConfig, RegularizerParams, RoundSource, StepRule,
};
use logpool::pooling::{ReportSet, WeightVector};
use logpool::Result;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_history(rng: &mut ChaCha8Rng, t: usize, m: usize, n: usize) -> History {
    History::new(
        (0..t)
            .map(|_| {
                let reports =
                    ReportSet::from_vecs(common::random_reports(rng, m, n, 1e-3)).unwrap();
                (reports, rng.gen_range(0..n))
            })
            .collect(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn optimizer_beats_every_candidate(seed in any::<u64>(), m in 2usize..=4, n in 2usize..=4, t in 1usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_history(&mut rng, t, m, n);
        let sol = best_weights(&h, DEFAULT_TOL).unwrap();
        let mut candidates = vec![WeightVector::uniform(m)];
        candidates.extend((0..m).map(|i| WeightVector::vertex(m, i)));
        candidates.extend((0..100).map(|_| WeightVector::normalized(common::random_simplex(&mut rng, m, 0.0)).unwrap()));
        for w in candidates {
            let v = cumulative_loss(&h, &w).unwrap();
            prop_assert!(sol.value <= v + 1e-9 * v.abs().max(1.0), "{} > {} at {:?}", sol.value, v, w);
        }
        let at_star = cumulative_loss(&h, &sol.w_star).unwrap();
        prop_assert!((at_star - sol.value).abs() <= 1e-9 * at_star.abs().max(1.0));
    }

    #[test]
    fn appending_a_round_never_lowers_the_benchmark(seed in any::<u64>(), t in 1usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_history(&mut rng, t + 1, 3, 3);
        let shorter = History::new(h.rounds()[..t].to_vec()).unwrap();
        let a = best_weights(&shorter, DEFAULT_TOL).unwrap().value;
        let b = best_weights(&h, DEFAULT_TOL).unwrap().value;
        prop_assert!(b >= a - 1e-9 * a.abs().max(1.0), "{b} < {a}");
    }

    #[test]
    fn two_methods_agree_for_two_experts(seed in any::<u64>(), n in 2usize..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_history(&mut rng, 50, 2, n);
        let pg = best_weights(&h, DEFAULT_TOL).unwrap();
        let gs = best_weights_golden(&h).unwrap();
        prop_assert!((pg.value - gs.value).abs() <= 1e-6);
    }
}

struct Replay(Vec<(ReportSet, usize)>);

impl RoundSource for Replay {
    fn next_round(&mut self, _: &WeightVector, t: usize, _: usize) -> Result<(ReportSet, usize)> {
        Ok(self.0[t - 1].clone())
    }
}

#[test]
fn single_round_regret_is_nonnegative() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let h = random_history(&mut rng, 1, 3, 4);
        let config = LearnerConfig {
            horizon: 1,
            experts: 3,
            outcomes: 4,
            params: RegularizerParams::new(0.25).unwrap(),
            step: StepRule::Schedule,
        };
        let traj = run_learner(&mut Replay(h.rounds().to_vec()), &config).unwrap();
        let r = regret(&traj, &h).unwrap();
        assert!(r.regret >= -DEFAULT_TOL, "{r:?}");
        assert!(
            (r.realized - cumulative_loss(&h, &WeightVector::uniform(3)).unwrap()).abs() < 1e-12
        );
    }
}

#[test]
fn misaligned_history_is_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let h = random_history(&mut rng, 5, 2, 2);
    let config = LearnerConfig {
        horizon: 4,
        experts: 2,
        outcomes: 2,
        params: RegularizerParams::new(0.25).unwrap(),
        step: StepRule::Schedule,
    };
    let traj = run_learner(&mut Replay(h.rounds().to_vec()), &config).unwrap();
    assert!(regret(&traj, &h).is_err());
}
