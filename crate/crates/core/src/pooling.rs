//! Weighted logarithmic pooling of probability forecasts.
//!
//! The pool of reports `p^1, …, p^m` under weights `w` is
//! `p*_j(w) ∝ Π_i (p^i_j)^{w_i}`. Everything is computed in the log domain:
//! per-outcome scores `Σ_i w_i ln p^i_j` are shifted by their maximum before
//! exponentiation, so extreme reports never underflow the product.

use crate::error::{Error, Result};

/// Default lower bound applied to every reported probability.
pub const PROB_FLOOR: f64 = 1e-12;

const SUM_TOL: f64 = 1e-12;

/// A probability vector over `n ≥ 2` outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct Forecast {
    probs: Vec<f64>,
}

impl Forecast {
    /// Normalizes `probs`, clips every entry to at least [`PROB_FLOOR`] and renormalizes.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        Self::with_floor(probs, PROB_FLOOR)
    }

    /// Like [`Forecast::new`] with a caller-chosen floor in `(0, 1/n)`.
    pub fn with_floor(mut probs: Vec<f64>, floor: f64) -> Result<Self> {
        let n = probs.len();
        if n < 2 {
            return Err(Error::Structural(format!(
                "forecast needs at least 2 outcomes, got {n}"
            )));
        }
        if !(floor > 0.0 && floor * (n as f64) < 1.0) {
            return Err(Error::Domain(format!(
                "probability floor {floor} invalid for {n} outcomes"
            )));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Domain(format!(
                "forecast entries must be finite and nonnegative: {probs:?}"
            )));
        }
        let total: f64 = probs.iter().sum();
        if total <= 0.0 {
            return Err(Error::Domain("forecast entries sum to zero".into()));
        }
        probs.iter_mut().for_each(|p| *p /= total);

        // Entries pinned at the floor stay there; the free mass is rescaled
        // until no free entry falls below the floor.
        let mut pinned = vec![false; n];
        loop {
            let mut changed = false;
            for (p, pin) in probs.iter_mut().zip(pinned.iter_mut()) {
                if !*pin && *p < floor {
                    *p = floor;
                    *pin = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
            let pinned_mass = floor * pinned.iter().filter(|&&b| b).count() as f64;
            let free_mass: f64 = probs
                .iter()
                .zip(&pinned)
                .filter(|(_, &pin)| !pin)
                .map(|(p, _)| p)
                .sum();
            let scale = (1.0 - pinned_mass) / free_mass;
            for (p, _) in probs.iter_mut().zip(&pinned).filter(|(_, &pin)| !pin) {
                *p *= scale;
            }
        }
        Ok(Forecast { probs })
    }

    /// Point mass on `outcome`, floored.
    pub fn indicator(n: usize, outcome: usize, floor: f64) -> Result<Self> {
        if outcome >= n {
            return Err(Error::Structural(format!(
                "outcome {outcome} out of range for {n} outcomes"
            )));
        }
        let mut probs = vec![0.0; n];
        probs[outcome] = 1.0;
        Self::with_floor(probs, floor)
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(vec![1.0; n])
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Entry `j`, or `None` when out of range.
    pub fn get(&self, j: usize) -> Option<f64> {
        self.probs.get(j).copied()
    }
}

/// Reports from `m ≥ 2` experts over a common set of `n` outcomes.
///
/// The natural logs of all entries are cached; every loss and gradient
/// evaluation reads them.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportSet {
    reports: Vec<Forecast>,
    log_probs: Vec<Vec<f64>>,
}

impl ReportSet {
    pub fn new(reports: Vec<Forecast>) -> Result<Self> {
        if reports.len() < 2 {
            return Err(Error::Structural(format!(
                "need at least 2 experts, got {}",
                reports.len()
            )));
        }
        let n = reports[0].len();
        if let Some(bad) = reports.iter().position(|r| r.len() != n) {
            return Err(Error::Structural(format!(
                "expert {bad} reports {} outcomes, expert 0 reports {n}",
                reports[bad].len()
            )));
        }
        for (i, r) in reports.iter().enumerate() {
            if r.probs().iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
                return Err(Error::Domain(format!(
                    "expert {i} report has a non-positive entry: {:?}",
                    r.probs()
                )));
            }
        }
        let log_probs = reports
            .iter()
            .map(|r| r.probs().iter().map(|p| p.ln()).collect())
            .collect();
        Ok(ReportSet { reports, log_probs })
    }

    /// Builds every report with [`Forecast::new`].
    pub fn from_vecs(reports: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(
            reports
                .into_iter()
                .map(Forecast::new)
                .collect::<Result<Vec<_>>>()?,
        )
    }

    pub fn experts(&self) -> usize {
        self.reports.len()
    }

    pub fn outcomes(&self) -> usize {
        self.reports[0].len()
    }

    pub fn reports(&self) -> &[Forecast] {
        &self.reports
    }

    pub fn log_probs(&self, expert: usize) -> &[f64] {
        &self.log_probs[expert]
    }

    fn check_outcome(&self, outcome: usize) -> Result<()> {
        if outcome >= self.outcomes() {
            return Err(Error::Structural(format!(
                "outcome {outcome} out of range for {} outcomes",
                self.outcomes()
            )));
        }
        Ok(())
    }

    fn check_weights(&self, w: &WeightVector) -> Result<()> {
        if w.len() != self.experts() {
            return Err(Error::Structural(format!(
                "{} weights for {} experts",
                w.len(),
                self.experts()
            )));
        }
        Ok(())
    }
}

/// A point of the probability simplex over experts.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    weights: Vec<f64>,
}

impl WeightVector {
    /// Validates nonnegativity and `|Σ w − 1| ≤ 1e-12`.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Structural("empty weight vector".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Domain(format!(
                "weights must be finite and nonnegative: {weights:?}"
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::Domain(format!("weights sum to {total}, expected 1")));
        }
        Ok(WeightVector { weights })
    }

    /// Rescales nonnegative `weights` onto the simplex.
    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::Domain(format!(
                "cannot normalize weights {weights:?}"
            )));
        }
        Self::new(weights.into_iter().map(|w| w / total).collect())
    }

    pub fn uniform(m: usize) -> Self {
        WeightVector {
            weights: vec![1.0 / m as f64; m],
        }
    }

    /// The indicator vector `e_i`.
    pub fn vertex(m: usize, i: usize) -> Self {
        let mut weights = vec![0.0; m];
        weights[i] = 1.0;
        WeightVector { weights }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn is_interior(&self) -> bool {
        self.weights.iter().all(|&w| w > 0.0)
    }

    pub fn min(&self) -> f64 {
        self.weights.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// The pooled forecast together with `ln c`, the log of its normalizing constant.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledForecast {
    pub probs: Forecast,
    pub log_normalizer: f64,
}

/// Per-outcome scores `Σ_i w_i ln p^i_j` and their log-sum-exp.
fn scores(reports: &ReportSet, w: &[f64]) -> (Vec<f64>, f64) {
    let n = reports.outcomes();
    let mut s = vec![0.0; n];
    for (wi, logs) in w.iter().zip(&reports.log_probs) {
        if *wi == 0.0 {
            continue;
        }
        for (sj, lp) in s.iter_mut().zip(logs) {
            *sj += wi * lp;
        }
    }
    let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + s.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
    (s, lse)
}

/// Weighted logarithmic pool `p*_j(w) = c Π_i (p^i_j)^{w_i}`.
pub fn log_pool(reports: &ReportSet, w: &WeightVector) -> Result<PooledForecast> {
    reports.check_weights(w)?;
    let (s, lse) = scores(reports, w.as_slice());
    let probs = s.iter().map(|x| (x - lse).exp()).collect();
    Ok(PooledForecast {
        probs: Forecast { probs },
        log_normalizer: -lse,
    })
}

/// `−ln f_j`.
pub fn log_loss(f: &Forecast, outcome: usize) -> Result<f64> {
    f.get(outcome).map(|p| -p.ln()).ok_or_else(|| {
        Error::Structural(format!(
            "outcome {outcome} out of range for {} outcomes",
            f.len()
        ))
    })
}

/// `L(w) = −ln p*_j(w)`.
pub fn pooled_loss(reports: &ReportSet, w: &WeightVector, outcome: usize) -> Result<f64> {
    reports.check_weights(w)?;
    reports.check_outcome(outcome)?;
    let (s, lse) = scores(reports, w.as_slice());
    Ok(lse - s[outcome])
}

/// `∂_i L(w) = Σ_ℓ p*_ℓ(w) ln p^i_ℓ − ln p^i_j`.
///
/// The gradient lives naturally in `ℝ^m` modulo the all-ones direction; this
/// returns exactly the representative given by the formula and never re-centers it.
pub fn loss_gradient(reports: &ReportSet, w: &WeightVector, outcome: usize) -> Result<Vec<f64>> {
    loss_and_gradient(reports, w, outcome).map(|(_, g)| g)
}

/// Loss and gradient from a single pool evaluation.
pub fn loss_and_gradient(
    reports: &ReportSet,
    w: &WeightVector,
    outcome: usize,
) -> Result<(f64, Vec<f64>)> {
    reports.check_weights(w)?;
    reports.check_outcome(outcome)?;
    Ok(loss_and_gradient_unchecked(reports, w.as_slice(), outcome))
}

/// Shape checks are the caller's job. Used in the inner loops of the
/// hindsight optimizer, which evaluates off-simplex candidate points too.
pub(crate) fn loss_and_gradient_unchecked(
    reports: &ReportSet,
    w: &[f64],
    outcome: usize,
) -> (f64, Vec<f64>) {
    let (s, lse) = scores(reports, w);
    let pooled: Vec<f64> = s.iter().map(|x| (x - lse).exp()).collect();
    let grad = reports
        .log_probs
        .iter()
        .map(|logs| {
            let expected: f64 = pooled.iter().zip(logs).map(|(p, l)| p * l).sum();
            expected - logs[outcome]
        })
        .collect();
    (lse - s[outcome], grad)
}

pub(crate) fn loss_unchecked(reports: &ReportSet, w: &[f64], outcome: usize) -> f64 {
    let (s, lse) = scores(reports, w);
    lse - s[outcome]
}
