//! Best fixed weights in hindsight and regret against them.

use std::collections::hash_map::{Entry, HashMap};

use crate::error::{Error, Result};
use crate::mirror_descent::Trajectory;
use crate::pooling::{
    loss_and_gradient_unchecked, loss_unchecked, pooled_loss, ReportSet, WeightVector,
};

/// Iterates stay at least this far from the simplex boundary.
pub const WEIGHT_SHELL: f64 = 1e-9;
pub const DEFAULT_TOL: f64 = 1e-8;
pub const MAX_ITERATIONS: usize = 100_000;

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 80;

/// The loss sequence `L^1 … L^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct History {
    rounds: Vec<(ReportSet, usize)>,
}

impl History {
    pub fn new(rounds: Vec<(ReportSet, usize)>) -> Result<Self> {
        let Some((first, _)) = rounds.first() else {
            return Err(Error::Structural("history needs at least one round".into()));
        };
        let (m, n) = (first.experts(), first.outcomes());
        for (t, (r, j)) in rounds.iter().enumerate() {
            if r.experts() != m || r.outcomes() != n {
                return Err(Error::Structural(format!(
                    "round {} is {}×{}, history is {m}×{n}",
                    t + 1,
                    r.experts(),
                    r.outcomes()
                )));
            }
            if *j >= n {
                return Err(Error::Structural(format!(
                    "round {}: outcome {j} out of range for {n} outcomes",
                    t + 1
                )));
            }
        }
        Ok(History { rounds })
    }

    pub fn from_trajectory(trajectory: &Trajectory) -> Result<Self> {
        Self::new(
            trajectory
                .rounds
                .iter()
                .map(|r| (r.reports.clone(), r.outcome))
                .collect(),
        )
    }

    pub fn rounds(&self) -> &[(ReportSet, usize)] {
        &self.rounds
    }

    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn experts(&self) -> usize {
        self.rounds[0].0.experts()
    }

    pub fn outcomes(&self) -> usize {
        self.rounds[0].0.outcomes()
    }

    /// Distinct rounds with multiplicities, in order of first appearance.
    fn grouped(&self) -> Vec<(&ReportSet, usize, f64)> {
        let mut index: HashMap<(Vec<u64>, usize), usize> = HashMap::new();
        let mut out: Vec<(&ReportSet, usize, f64)> = Vec::new();
        for (r, j) in &self.rounds {
            let key = r
                .reports()
                .iter()
                .flat_map(|f| f.probs().iter().map(|p| p.to_bits()))
                .collect();
            match index.entry((key, *j)) {
                Entry::Occupied(e) => out[*e.get()].2 += 1.0,
                Entry::Vacant(e) => {
                    e.insert(out.len());
                    out.push((r, *j, 1.0));
                }
            }
        }
        out
    }
}

/// `Σ_t L^t(w)`.
pub fn cumulative_loss(history: &History, w: &WeightVector) -> Result<f64> {
    history
        .rounds
        .iter()
        .map(|(r, j)| pooled_loss(r, w, *j))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HindsightMethod {
    ProjectedGradient,
    GoldenSection,
    /// A floor candidate (uniform or a vertex) beat the optimizer.
    Candidate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HindsightSolution {
    pub w_star: WeightVector,
    /// `min_w Σ_t L^t(w)`.
    pub value: f64,
    pub method: HindsightMethod,
    /// `‖w − P(w − ∇f(w))‖_∞`, zero exactly at a constrained minimizer.
    pub certificate: f64,
    pub iterations: usize,
    pub converged: bool,
}

struct Objective<'a> {
    terms: Vec<(&'a ReportSet, usize, f64)>,
    m: usize,
}

impl<'a> Objective<'a> {
    fn new(history: &'a History) -> Self {
        Objective {
            terms: history.grouped(),
            m: history.experts(),
        }
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(r, j, c)| c * loss_unchecked(r, x, *j))
            .sum()
    }

    fn value_and_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let mut f = 0.0;
        let mut g = vec![0.0; self.m];
        for (r, j, c) in &self.terms {
            let (l, gr) = loss_and_gradient_unchecked(r, x, *j);
            f += c * l;
            for (gi, gri) in g.iter_mut().zip(gr) {
                *gi += c * gri;
            }
        }
        (f, g)
    }

    fn certificate(&self, x: &[f64], g: &[f64], shell: f64) -> f64 {
        let y: Vec<f64> = x.iter().zip(g).map(|(a, b)| a - b).collect();
        project_shell(&y, shell)
            .iter()
            .zip(x)
            .map(|(p, a)| (p - a).abs())
            .fold(0.0, f64::max)
    }
}

/// Euclidean projection onto `{x : Σ x = 1, x_i ≥ shell}`.
pub fn project_shell(y: &[f64], shell: f64) -> Vec<f64> {
    let m = y.len();
    let radius = 1.0 - shell * m as f64;
    let mut sorted: Vec<f64> = y.iter().map(|v| v - shell).collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, v) in sorted.iter().enumerate() {
        cumsum += v;
        let candidate = (cumsum - radius) / (k + 1) as f64;
        if v - candidate > 0.0 {
            theta = candidate;
        }
    }
    y.iter()
        .map(|v| (v - shell - theta).max(0.0) + shell)
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn projected_gradient(obj: &Objective, tol: f64) -> (Vec<f64>, f64, usize, f64) {
    let mut x = vec![1.0 / obj.m as f64; obj.m];
    let (mut f, mut g) = obj.value_and_grad(&x);
    let scale = g.iter().map(|v| v.abs()).fold(1.0, f64::max);
    let mut step = 1.0 / scale;
    let mut iterations = 0;
    let mut residual = obj.certificate(&x, &g, WEIGHT_SHELL);
    while residual > tol && iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut s = step;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - s * b).collect();
            let trial = project_shell(&trial, WEIGHT_SHELL);
            let dx: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
            let ft = obj.value(&trial);
            let slack = 4.0 * f64::EPSILON * f.abs();
            if ft <= f + ARMIJO * dot(&g, &dx) + slack {
                accepted = Some((trial, dx));
                break;
            }
            s *= 0.5;
        }
        let Some((trial, dx)) = accepted else { break };
        let (ft, gt) = obj.value_and_grad(&trial);
        let dg: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
        let curvature = dot(&dx, &dg);
        step = if curvature > 0.0 {
            (dot(&dx, &dx) / curvature).clamp(1e-14, 1e14)
        } else {
            (2.0 * s).min(1e14)
        };
        let stalled = dx.iter().all(|d| *d == 0.0);
        x = trial;
        f = ft;
        g = gt;
        residual = obj.certificate(&x, &g, WEIGHT_SHELL);
        if stalled {
            break;
        }
    }
    (x, f, iterations, residual)
}

/// Minimizes the cumulative pooled log loss over the weight simplex.
///
/// Projected gradient descent from uniform weights, Barzilai–Borwein trial
/// steps with Armijo backtracking, iterates confined to the
/// [`WEIGHT_SHELL`] interior. Stops when the projected-gradient residual is at
/// most `tol` or after [`MAX_ITERATIONS`]; a non-converged run returns its
/// last iterate with `converged = false`. The result is never worse than
/// uniform weights or any vertex.
pub fn best_weights(history: &History, tol: f64) -> Result<HindsightSolution> {
    let obj = Objective::new(history);
    let (x, value, iterations, certificate) = projected_gradient(&obj, tol);
    let solution = HindsightSolution {
        w_star: WeightVector::normalized(x)?,
        value,
        method: HindsightMethod::ProjectedGradient,
        certificate,
        iterations,
        converged: certificate <= tol,
    };
    floor_check(&obj, solution)
}

/// Golden-section search over `w_1 ∈ [ε, 1 − ε]`; two experts only.
pub fn best_weights_golden(history: &History) -> Result<HindsightSolution> {
    if history.experts() != 2 {
        return Err(Error::Structural(format!(
            "golden-section search needs 2 experts, history has {}",
            history.experts()
        )));
    }
    let obj = Objective::new(history);
    let f = |a: f64| obj.value(&[a, 1.0 - a]);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (WEIGHT_SHELL, 1.0 - WEIGHT_SHELL);
    let mut c = hi - ratio * (hi - lo);
    let mut d = lo + ratio * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    let mut iterations = 0;
    while hi - lo > 1e-13 && iterations < 200 {
        iterations += 1;
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - ratio * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + ratio * (hi - lo);
            fd = f(d);
        }
    }
    let mut best = (0.5 * (lo + hi), f(0.5 * (lo + hi)));
    for a in [lo, hi, c, d] {
        let v = f(a);
        if v < best.1 {
            best = (a, v);
        }
    }
    let x = [best.0, 1.0 - best.0];
    let (_, g) = obj.value_and_grad(&x);
    let certificate = obj.certificate(&x, &g, WEIGHT_SHELL);
    let solution = HindsightSolution {
        w_star: WeightVector::normalized(x.to_vec())?,
        value: best.1,
        method: HindsightMethod::GoldenSection,
        certificate,
        iterations,
        converged: hi - lo <= 1e-13,
    };
    floor_check(&obj, solution)
}

fn floor_check(obj: &Objective, mut solution: HindsightSolution) -> Result<HindsightSolution> {
    let m = obj.m;
    let candidates =
        std::iter::once(WeightVector::uniform(m)).chain((0..m).map(|i| WeightVector::vertex(m, i)));
    for w in candidates {
        let v = obj.value(w.as_slice());
        if v < solution.value {
            let (_, g) = obj.value_and_grad(w.as_slice());
            let shell = if w.is_interior() { WEIGHT_SHELL } else { 0.0 };
            solution.certificate = obj.certificate(w.as_slice(), &g, shell);
            solution.value = v;
            solution.w_star = w;
            solution.method = HindsightMethod::Candidate;
        }
    }
    Ok(solution)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Regret {
    /// `Σ_t L^t(w^t)`.
    pub realized: f64,
    pub hindsight: HindsightSolution,
    /// `realized − hindsight.value`.
    pub regret: f64,
}

/// Regret of a trajectory against the best fixed weights for its own history.
pub fn regret(trajectory: &Trajectory, history: &History) -> Result<Regret> {
    if trajectory.rounds.len() != history.len()
        || trajectory
            .rounds
            .iter()
            .zip(history.rounds())
            .any(|(r, (_, j))| r.outcome != *j)
    {
        return Err(Error::Structural(
            "trajectory and history are not aligned".into(),
        ));
    }
    let hindsight = best_weights(history, DEFAULT_TOL)?;
    let realized = trajectory.realized_loss();
    Ok(Regret {
        realized,
        regret: realized - hindsight.value,
        hindsight,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pooling::Forecast;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_history(rng: &mut ChaCha8Rng, t: usize, m: usize, n: usize) -> History {
        let rounds = (0..t)
            .map(|_| {
                let reports = (0..m)
                    .map(|_| {
                        let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..1.0)).collect();
                        Forecast::new(raw).unwrap()
                    })
                    .collect();
                (ReportSet::new(reports).unwrap(), rng.gen_range(0..n))
            })
            .collect();
        History::new(rounds).unwrap()
    }

    /// Evaluates the pool by the raw product formula.
    fn naive_cumulative(history: &History, w: &[f64]) -> f64 {
        history
            .rounds()
            .iter()
            .map(|(r, j)| {
                let n = r.outcomes();
                let unnorm: Vec<f64> = (0..n)
                    .map(|k| {
                        r.reports()
                            .iter()
                            .zip(w)
                            .map(|(f, wi)| f.probs()[k].powf(*wi))
                            .product()
                    })
                    .collect();
                -(unnorm[*j] / unnorm.iter().sum::<f64>()).ln()
            })
            .sum()
    }

    #[test]
    fn cumulative_loss_matches_naive_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let h = random_history(&mut rng, 30, 3, 4);
            let w = WeightVector::normalized(vec![0.2, 0.5, 0.3]).unwrap();
            let a = cumulative_loss(&h, &w).unwrap();
            let b = naive_cumulative(&h, w.as_slice());
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn single_round_equals_pooled_loss() {
        let r = ReportSet::from_vecs(vec![vec![0.2, 0.8], vec![0.6, 0.4]]).unwrap();
        let h = History::new(vec![(r.clone(), 1)]).unwrap();
        let w = WeightVector::uniform(2);
        assert_eq!(
            cumulative_loss(&h, &w).unwrap(),
            pooled_loss(&r, &w, 1).unwrap()
        );
    }

    #[test]
    fn identical_experts_make_loss_flat() {
        let r = ReportSet::from_vecs(vec![vec![0.3, 0.7]; 3]).unwrap();
        let h = History::new(vec![(r.clone(), 0), (r, 1)]).unwrap();
        let a = cumulative_loss(&h, &WeightVector::uniform(3)).unwrap();
        let b =
            cumulative_loss(&h, &WeightVector::normalized(vec![0.7, 0.2, 0.1]).unwrap()).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn shell_projection() {
        let p = project_shell(&[0.9, 0.3, -0.5], 0.0);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((p[0] - 0.8).abs() < 1e-15 && (p[1] - 0.2).abs() < 1e-15 && p[2] == 0.0);
        let q = project_shell(&[5.0, -3.0], 1e-3);
        assert!((q[0] - 0.999).abs() < 1e-15 && (q[1] - 1e-3).abs() < 1e-15);
        let inside = [0.25, 0.35, 0.4];
        for (a, b) in project_shell(&inside, 1e-9).iter().zip(inside) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn dominant_expert_goes_to_its_vertex() {
        let rounds = (0..20)
            .map(|t| {
                let j = t % 2;
                let sharp = Forecast::indicator(2, j, 1e-6).unwrap();
                let reports = ReportSet::new(vec![sharp, Forecast::uniform(2).unwrap()]).unwrap();
                (reports, j)
            })
            .collect();
        let h = History::new(rounds).unwrap();
        let sol = best_weights(&h, DEFAULT_TOL).unwrap();
        assert!(sol.w_star.as_slice()[0] > 1.0 - 1e-6);
        let expected = 20.0 * -(1.0 - 1e-6f64).ln();
        assert!((sol.value - expected).abs() < 1e-6, "{}", sol.value);
    }

    #[test]
    fn exchangeable_experts_give_uniform() {
        let a = vec![0.2, 0.8];
        let b = vec![0.7, 0.3];
        let rounds = vec![
            (ReportSet::from_vecs(vec![a.clone(), b.clone()]).unwrap(), 0),
            (ReportSet::from_vecs(vec![b.clone(), a.clone()]).unwrap(), 0),
            (ReportSet::from_vecs(vec![a.clone(), b.clone()]).unwrap(), 1),
            (ReportSet::from_vecs(vec![b, a]).unwrap(), 1),
        ];
        let h = History::new(rounds).unwrap();
        let sol = best_weights(&h, DEFAULT_TOL).unwrap();
        assert!((sol.w_star.as_slice()[0] - 0.5).abs() < 1e-7, "{:?}", sol);
        assert!(sol.converged);
    }

    #[test]
    fn agrees_with_grid_and_golden_section() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10 {
            let h = random_history(&mut rng, 50, 2, 3);
            let pg = best_weights(&h, DEFAULT_TOL).unwrap();
            let gs = best_weights_golden(&h).unwrap();
            assert!((pg.value - gs.value).abs() < 1e-6);
            let grid = (0..=10_000)
                .map(|k| naive_cumulative(&h, &[k as f64 * 1e-4, 1.0 - k as f64 * 1e-4]))
                .fold(f64::INFINITY, f64::min);
            assert!(pg.value <= grid + 1e-9 && grid - pg.value < 1e-4);
        }
    }

    #[test]
    fn beats_random_points_for_three_experts() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let h = random_history(&mut rng, 40, 3, 3);
        let sol = best_weights(&h, DEFAULT_TOL).unwrap();
        assert!(sol.converged, "{sol:?}");
        for _ in 0..100 {
            let w = WeightVector::normalized((0..3).map(|_| rng.gen::<f64>()).collect()).unwrap();
            assert!(sol.value <= cumulative_loss(&h, &w).unwrap() + 1e-12);
        }
    }

    #[test]
    fn golden_section_rejects_three_experts() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = random_history(&mut rng, 3, 3, 2);
        assert!(best_weights_golden(&h).is_err());
    }

    #[test]
    fn ragged_history_is_rejected() {
        let a = ReportSet::from_vecs(vec![vec![0.5, 0.5]; 2]).unwrap();
        let b = ReportSet::from_vecs(vec![vec![0.2, 0.3, 0.5]; 2]).unwrap();
        assert!(History::new(vec![(a, 0), (b, 0)]).is_err());
        assert!(History::new(vec![]).is_err());
    }
}
