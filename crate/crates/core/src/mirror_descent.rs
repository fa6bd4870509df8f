//! Online mirror descent over expert weights.
//!
//! The regularizer is `R(w) = −(1/α) Σ_i w_i^α` with `α ∈ (0, 1/2)`. Its
//! gradient map sends the open simplex bijectively onto `ℝ^m` modulo the
//! all-ones direction, so every update lands in the interior and no
//! projection step exists. A step solves
//! `∇R(w') = ∇R(w) − η_t ∇L(w)` for `w'` by finding the unique offset `c`
//! that normalizes `w'_i = (c − h_i)^{1/(α−1)}`.

use crate::error::{Error, Result};
use crate::pooling::{loss_and_gradient, ReportSet, WeightVector};

const ROOT_REL_WIDTH: f64 = 1e-14;
const MAX_EXPANSIONS: usize = 200;
const MAX_BISECTIONS: usize = 400;
const RESIDUAL_TOL: f64 = 1e-12;

/// Exponent of the power regularizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizerParams {
    alpha: f64,
}

impl RegularizerParams {
    /// Accepts `α` in the open interval `(0, 1/2)`.
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha > 0.0 && alpha < 0.5 {
            Ok(RegularizerParams { alpha })
        } else {
            Err(Error::Config(format!(
                "alpha must lie in (0, 1/2), got {alpha}"
            )))
        }
    }

    /// Accepts `α ∈ (0, 1)`. Only constant-step experiments use this range;
    /// the mirror step stays well defined but the regret guarantee does not apply.
    pub fn widened(alpha: f64) -> Result<Self> {
        if alpha > 0.0 && alpha < 1.0 {
            Ok(RegularizerParams { alpha })
        } else {
            Err(Error::Config(format!(
                "alpha must lie in (0, 1), got {alpha}"
            )))
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `1/(α−1)`, the exponent inverting `∂_i R`.
    fn inverse_exponent(&self) -> f64 {
        1.0 / (self.alpha - 1.0)
    }
}

fn check_interior(w: &WeightVector) -> Result<()> {
    if w.is_interior() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "regularizer needs strictly positive weights, got {:?}",
            w.as_slice()
        )))
    }
}

/// `R(w) = −(1/α) Σ w_i^α`.
pub fn regularizer_value(w: &WeightVector, params: &RegularizerParams) -> Result<f64> {
    check_interior(w)?;
    let a = params.alpha;
    Ok(-w.as_slice().iter().map(|x| x.powf(a)).sum::<f64>() / a)
}

/// `∂_i R(w) = −w_i^{α−1}`.
pub fn regularizer_gradient(w: &WeightVector, params: &RegularizerParams) -> Result<Vec<f64>> {
    check_interior(w)?;
    let a = params.alpha;
    Ok(w.as_slice().iter().map(|x| -x.powf(a - 1.0)).collect())
}

/// `m^{1−α}/α`, the bound on `max_w R − min_w R` used by the regret bound.
/// The exact range is `(m^{1−α} − 1)/α`.
pub fn regularizer_range_bound(m: usize, params: &RegularizerParams) -> f64 {
    (m as f64).powf(1.0 - params.alpha) / params.alpha
}

/// `η = 1/(√T ln T) · 1/(12 m^{(1+α)/2} n)`.
pub fn base_step_size(
    horizon: usize,
    m: usize,
    n: usize,
    params: &RegularizerParams,
) -> Result<f64> {
    if horizon < 2 {
        return Err(Error::Domain(format!(
            "step-size schedule needs T ≥ 2, got {horizon}"
        )));
    }
    let t = horizon as f64;
    let a = params.alpha;
    Ok(1.0 / (t.sqrt() * t.ln()) / (12.0 * (m as f64).powf((1.0 + a) / 2.0) * n as f64))
}

/// How `η_t` is chosen each round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    /// The adaptive schedule: `η` while every `(w_i)^α ≥ η`, otherwise shrink to `min_i w_i`.
    Schedule,
    /// A fixed step, bypassing the schedule.
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerState {
    /// 1-based index of the current round.
    pub t: usize,
    pub weights: WeightVector,
    pub eta_base: f64,
    /// Step size of the current round; `+∞` before the first round.
    pub eta_t: f64,
    pub params: RegularizerParams,
}

impl LearnerState {
    pub fn new(m: usize, eta_base: f64, params: RegularizerParams) -> Self {
        LearnerState {
            t: 1,
            weights: WeightVector::uniform(m),
            eta_base,
            eta_t: f64::INFINITY,
            params,
        }
    }
}

/// Outcome of one schedule evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepUpdate {
    pub eta_t: f64,
    /// `true` when the edge-case branch (some `(w_i)^α < η`) fired.
    pub edge_case: bool,
}

/// Sets `state.eta_t` for the current round from `state.weights`.
pub fn step_size_update(state: &mut LearnerState) -> StepUpdate {
    let a = state.params.alpha;
    let w = state.weights.as_slice();
    let min_pow = w.iter().map(|x| x.powf(a)).fold(f64::INFINITY, f64::min);
    let edge_case = !(state.eta_base <= min_pow);
    let candidate = if edge_case {
        state.weights.min()
    } else {
        state.eta_base
    };
    state.eta_t = state.eta_t.min(candidate);
    StepUpdate {
        eta_t: state.eta_t,
        edge_case,
    }
}

/// Root-finding certificate of a mirror step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MirrorSolve {
    /// The normalizing constant `c`.
    pub offset: f64,
    pub iterations: usize,
    /// `|Σ_i (c − h_i)^{1/(α−1)} − 1|`.
    pub residual: f64,
}

/// One mirror-descent update.
///
/// Computes `h_i = ∂_i R(w) − η_t g_i` and the unique `c > max_i h_i` with
/// `Σ_i (c − h_i)^{1/(α−1)} = 1`. The search runs in `u = c − max_i h_i`,
/// where the dominant term alone forces `u ≥ 1`: bisection on a bracket grown
/// geometrically from there, then a single Newton step kept only if it stays
/// in the bracket and lowers the residual.
pub fn mirror_step(
    w: &WeightVector,
    grad: &[f64],
    eta_t: f64,
    params: &RegularizerParams,
) -> Result<(WeightVector, MirrorSolve)> {
    if grad.len() != w.len() {
        return Err(Error::Structural(format!(
            "{} gradient components for {} weights",
            grad.len(),
            w.len()
        )));
    }
    if grad.iter().any(|g| !g.is_finite()) || !eta_t.is_finite() || eta_t < 0.0 {
        return Err(Error::Numerical(format!(
            "non-finite mirror step input: eta_t = {eta_t}, grad = {grad:?}"
        )));
    }
    let dual = regularizer_gradient(w, params)?;
    let h: Vec<f64> = dual.iter().zip(grad).map(|(r, g)| r - eta_t * g).collect();
    let h_max = h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let gaps: Vec<f64> = h.iter().map(|hi| h_max - hi).collect();
    let e = params.inverse_exponent();
    let mass = |u: f64| gaps.iter().map(|d| (u + d).powf(e)).sum::<f64>();

    let mut lo = 1.0;
    let mut hi = 2.0;
    let mut iterations = 0;
    let mut expansions = 0;
    while !(mass(hi) < 1.0) {
        lo = hi;
        hi *= 2.0;
        expansions += 1;
        iterations += 1;
        if expansions > MAX_EXPANSIONS {
            return Err(Error::Numerical(format!(
                "mirror step failed to bracket the offset: h = {h:?}"
            )));
        }
    }
    while hi - lo > ROOT_REL_WIDTH * hi && iterations < MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mass(mid) >= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let mut u = 0.5 * (lo + hi);
    let mut residual = (mass(u) - 1.0).abs();
    let slope = e * gaps.iter().map(|d| (u + d).powf(e - 1.0)).sum::<f64>();
    if slope < 0.0 {
        let polished = u - (mass(u) - 1.0) / slope;
        if polished >= lo && polished <= hi {
            let r = (mass(polished) - 1.0).abs();
            if r <= residual {
                u = polished;
                residual = r;
            }
        }
        iterations += 1;
    }

    let weights: Vec<f64> = gaps.iter().map(|d| (u + d).powf(e)).collect();
    if residual > RESIDUAL_TOL || weights.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
        return Err(Error::Numerical(format!(
            "mirror step produced weights {weights:?} with residual {residual:e}"
        )));
    }
    let solve = MirrorSolve {
        offset: h_max + u,
        iterations,
        residual,
    };
    Ok((WeightVector::new(weights)?, solve))
}

/// Adaptive source of rounds: sees the published weights, then yields reports and an outcome.
pub trait RoundSource {
    fn next_round(
        &mut self,
        weights: &WeightVector,
        t: usize,
        horizon: usize,
    ) -> Result<(ReportSet, usize)>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnerConfig {
    pub horizon: usize,
    pub experts: usize,
    pub outcomes: usize,
    pub params: RegularizerParams,
    pub step: StepRule,
}

impl LearnerConfig {
    /// The `η` that enters the step rule and the diagnostics.
    ///
    /// The schedule is undefined at `T = 1` (`ln 1 = 0`); a one-round run
    /// uses the `T = 2` value, which only affects the never-played final step.
    pub fn eta_base(&self) -> Result<f64> {
        match self.step {
            StepRule::Schedule => base_step_size(
                self.horizon.max(2),
                self.experts,
                self.outcomes,
                &self.params,
            ),
            StepRule::Constant(eta) if eta > 0.0 && eta.is_finite() => Ok(eta),
            StepRule::Constant(eta) => Err(Error::Config(format!(
                "constant step size must be positive and finite, got {eta}"
            ))),
        }
    }
}

/// Per-round trace of the learner.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub t: usize,
    pub reports: ReportSet,
    pub outcome: usize,
    /// `L^t(w^t)`.
    pub loss: f64,
    /// `∇L^t(w^t)`.
    pub gradient: Vec<f64>,
    /// `w^t`, as published before the round.
    pub weights: WeightVector,
    /// `w^{t+1}`.
    pub next_weights: WeightVector,
    pub eta_t: f64,
    pub edge_case: bool,
    pub solve: MirrorSolve,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub rounds: Vec<RoundRecord>,
    pub eta_base: f64,
    pub params: RegularizerParams,
    pub experts: usize,
    pub outcomes: usize,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.rounds.len()
    }

    /// `Σ_t L^t(w^t)`.
    pub fn realized_loss(&self) -> f64 {
        self.rounds.iter().map(|r| r.loss).sum()
    }
}

/// Runs the learner for `config.horizon` rounds against `source`.
///
/// Starts from uniform weights. The final mirror step (producing `w^{T+1}`) is
/// performed and recorded even though it is never played.
pub fn run_learner<S: RoundSource + ?Sized>(
    source: &mut S,
    config: &LearnerConfig,
) -> Result<Trajectory> {
    if config.horizon == 0 {
        return Err(Error::Config("horizon must be at least 1".into()));
    }
    let eta_base = config.eta_base()?;
    let mut state = LearnerState::new(config.experts, eta_base, config.params);
    let mut rounds = Vec::with_capacity(config.horizon);
    for t in 1..=config.horizon {
        state.t = t;
        let update = match config.step {
            StepRule::Schedule => step_size_update(&mut state),
            StepRule::Constant(eta) => {
                state.eta_t = eta;
                StepUpdate {
                    eta_t: eta,
                    edge_case: false,
                }
            }
        };
        let (reports, outcome) = source.next_round(&state.weights, t, config.horizon)?;
        if reports.experts() != config.experts || reports.outcomes() != config.outcomes {
            return Err(Error::Structural(format!(
                "round {t}: source produced {}×{} reports, learner expects {}×{}",
                reports.experts(),
                reports.outcomes(),
                config.experts,
                config.outcomes
            )));
        }
        let (loss, gradient) = loss_and_gradient(&reports, &state.weights, outcome)?;
        let (next, solve) = mirror_step(&state.weights, &gradient, update.eta_t, &config.params)
            .map_err(|e| {
                Error::Numerical(format!(
                    "round {t}: {e}; weights {:?}, gradient {gradient:?}, eta_t {}",
                    state.weights.as_slice(),
                    update.eta_t
                ))
            })?;
        rounds.push(RoundRecord {
            t,
            reports,
            outcome,
            loss,
            gradient,
            weights: state.weights.clone(),
            next_weights: next.clone(),
            eta_t: update.eta_t,
            edge_case: update.edge_case,
            solve,
        });
        state.weights = next;
    }
    Ok(Trajectory {
        rounds,
        eta_base,
        params: config.params,
        experts: config.experts,
        outcomes: config.outcomes,
    })
}
