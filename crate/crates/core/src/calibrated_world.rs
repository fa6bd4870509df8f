//! Finite information structures and the adversaries built from them.
//!
//! An [`InformationStructure`] is a joint distribution over signal profiles
//! `(s_1, …, s_m)` and the outcome, together with a table mapping each
//! expert's signal to the forecast that expert reports. When the table holds
//! Bayes posteriors the experts are calibrated; the scenarios that deliberately
//! break calibration supply their own table.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mirror_descent::RoundSource;
use crate::pooling::{Forecast, ReportSet, WeightVector, PROB_FLOOR};

const MASS_TOL: f64 = 1e-12;

/// Structures pass [`InformationStructure::verify_calibration`] at or below this violation.
pub const CALIBRATION_TOL: f64 = 1e-9;

/// Probability floor of the uncalibrated first-round demo. Small enough that
/// `e^{-T}` is represented exactly for `T` up to about 690.
pub const EXTREME_REPORT_FLOOR: f64 = 1e-300;

/// Generator used for every run; one independent stream per run.
pub type SimRng = ChaCha8Rng;

/// Stream for run `run_id` under `master_seed`.
pub fn run_rng(master_seed: u64, run_id: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(master_seed ^ run_id)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupportEntry {
    pub signals: Vec<i64>,
    pub outcome: usize,
    pub mass: f64,
}

#[derive(Debug, Clone)]
pub struct InformationStructure {
    outcomes: usize,
    experts: usize,
    floor: f64,
    support: Vec<SupportEntry>,
    reports: Vec<BTreeMap<i64, Forecast>>,
    entry_reports: Vec<ReportSet>,
    sampler: WeightedIndex<f64>,
}

/// One sampled round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundDraw {
    pub reports: ReportSet,
    pub outcome: usize,
}

fn validate_support(outcomes: usize, experts: usize, support: &[SupportEntry]) -> Result<()> {
    if outcomes < 2 || experts < 2 {
        return Err(Error::Structural(format!(
            "need at least 2 outcomes and 2 experts, got n = {outcomes}, m = {experts}"
        )));
    }
    if support.is_empty() {
        return Err(Error::Structural("empty support".into()));
    }
    for (k, e) in support.iter().enumerate() {
        if e.signals.len() != experts {
            return Err(Error::Structural(format!(
                "support entry {k} has {} signals for {experts} experts",
                e.signals.len()
            )));
        }
        if e.outcome >= outcomes {
            return Err(Error::Structural(format!(
                "support entry {k} has outcome {} but n = {outcomes}",
                e.outcome
            )));
        }
        if !e.mass.is_finite() || e.mass < 0.0 {
            return Err(Error::Domain(format!(
                "support entry {k} has invalid mass {}",
                e.mass
            )));
        }
    }
    let total: f64 = support.iter().map(|e| e.mass).sum();
    if (total - 1.0).abs() > MASS_TOL {
        return Err(Error::Domain(format!("masses sum to {total}, expected 1")));
    }
    Ok(())
}

fn posterior(
    support: &[SupportEntry],
    outcomes: usize,
    expert: usize,
    signal: i64,
    floor: f64,
) -> Result<Forecast> {
    let mut by_outcome = vec![0.0; outcomes];
    for e in support.iter().filter(|e| e.signals[expert] == signal) {
        by_outcome[e.outcome] += e.mass;
    }
    if by_outcome.iter().sum::<f64>() <= 0.0 {
        return Err(Error::Domain(format!(
            "signal {signal} of expert {expert} has zero probability"
        )));
    }
    Forecast::with_floor(by_outcome, floor)
}

impl InformationStructure {
    /// Every expert reports the Bayes posterior of its signal, floored at [`PROB_FLOOR`].
    pub fn from_joint(outcomes: usize, experts: usize, support: Vec<SupportEntry>) -> Result<Self> {
        Self::from_joint_with_floor(outcomes, experts, support, PROB_FLOOR)
    }

    pub fn from_joint_with_floor(
        outcomes: usize,
        experts: usize,
        support: Vec<SupportEntry>,
        floor: f64,
    ) -> Result<Self> {
        validate_support(outcomes, experts, &support)?;
        let mut reports = vec![BTreeMap::new(); experts];
        for (i, table) in reports.iter_mut().enumerate() {
            for e in support.iter().filter(|e| e.mass > 0.0) {
                let s = e.signals[i];
                if let Entry::Vacant(slot) = table.entry(s) {
                    slot.insert(posterior(&support, outcomes, i, s, floor)?);
                }
            }
        }
        Self::assemble(outcomes, experts, floor, support, reports)
    }

    /// Reports are taken from `reports[i][s_i]` as given, calibrated or not.
    pub fn with_reports(
        outcomes: usize,
        experts: usize,
        support: Vec<SupportEntry>,
        reports: Vec<BTreeMap<i64, Forecast>>,
    ) -> Result<Self> {
        validate_support(outcomes, experts, &support)?;
        if reports.len() != experts {
            return Err(Error::Structural(format!(
                "report table for {} experts, structure has {experts}",
                reports.len()
            )));
        }
        let floor = reports
            .iter()
            .flat_map(|t| t.values())
            .flat_map(|f| f.probs().iter().copied())
            .fold(PROB_FLOOR, f64::min);
        Self::assemble(outcomes, experts, floor, support, reports)
    }

    fn assemble(
        outcomes: usize,
        experts: usize,
        floor: f64,
        support: Vec<SupportEntry>,
        reports: Vec<BTreeMap<i64, Forecast>>,
    ) -> Result<Self> {
        let entry_reports = support
            .iter()
            .map(|e| {
                let forecasts = e
                    .signals
                    .iter()
                    .enumerate()
                    .map(|(i, s)| {
                        let f = reports[i].get(s).ok_or_else(|| {
                            Error::Structural(format!("no report for signal {s} of expert {i}"))
                        })?;
                        if f.len() != outcomes {
                            return Err(Error::Structural(format!(
                                "report for signal {s} of expert {i} has {} outcomes",
                                f.len()
                            )));
                        }
                        Ok(f.clone())
                    })
                    .collect::<Result<Vec<_>>>()?;
                ReportSet::new(forecasts)
            })
            .collect::<Result<Vec<_>>>();
        // Zero-mass entries may carry signals with no report; they are never sampled.
        let entry_reports = match entry_reports {
            Ok(r) => r,
            Err(err) => {
                if support.iter().all(|e| e.mass > 0.0) {
                    return Err(err);
                }
                let support: Vec<SupportEntry> =
                    support.into_iter().filter(|e| e.mass > 0.0).collect();
                return Self::assemble(outcomes, experts, floor, support, reports);
            }
        };
        let sampler = WeightedIndex::new(support.iter().map(|e| e.mass))
            .map_err(|e| Error::Domain(format!("cannot sample support: {e}")))?;
        Ok(InformationStructure {
            outcomes,
            experts,
            floor,
            support,
            reports,
            entry_reports,
            sampler,
        })
    }

    pub fn outcomes(&self) -> usize {
        self.outcomes
    }

    pub fn experts(&self) -> usize {
        self.experts
    }

    pub fn support(&self) -> &[SupportEntry] {
        &self.support
    }

    /// The forecast expert `i` reports on signal `s` (from the report table).
    pub fn report(&self, expert: usize, signal: i64) -> Result<&Forecast> {
        self.reports
            .get(expert)
            .ok_or_else(|| Error::Structural(format!("no expert {expert}")))?
            .get(&signal)
            .ok_or_else(|| {
                Error::Domain(format!("signal {signal} of expert {expert} not in support"))
            })
    }

    /// Bayes posterior over outcomes given expert `i`'s signal, from the joint.
    pub fn posterior_report(&self, expert: usize, signal: i64) -> Result<Forecast> {
        if expert >= self.experts {
            return Err(Error::Structural(format!("no expert {expert}")));
        }
        posterior(&self.support, self.outcomes, expert, signal, self.floor)
    }

    /// Marginal distribution of the outcome.
    pub fn outcome_marginal(&self) -> Vec<f64> {
        let mut p = vec![0.0; self.outcomes];
        for e in &self.support {
            p[e.outcome] += e.mass;
        }
        p
    }

    /// Draws a support entry by mass and returns its reports and outcome.
    pub fn sample_round<R: Rng + ?Sized>(&self, rng: &mut R) -> RoundDraw {
        let k = self.sampler.sample(rng);
        RoundDraw {
            reports: self.entry_reports[k].clone(),
            outcome: self.support[k].outcome,
        }
    }

    /// Exact calibration check by enumeration of the support.
    ///
    /// For each expert, support entries are grouped by the reported vector and
    /// `max_j |P(J = j | report) − report_j|` is taken over groups.
    pub fn verify_calibration(&self) -> CalibrationReport {
        let per_expert: Vec<ExpertCalibration> = (0..self.experts)
            .map(|i| {
                let mut groups: BTreeMap<Vec<u64>, (Vec<f64>, &Forecast)> = BTreeMap::new();
                for (e, reports) in self.support.iter().zip(&self.entry_reports) {
                    if e.mass <= 0.0 {
                        continue;
                    }
                    let f = &reports.reports()[i];
                    let key = f.probs().iter().map(|p| p.to_bits()).collect();
                    let slot = groups
                        .entry(key)
                        .or_insert_with(|| (vec![0.0; self.outcomes], f));
                    slot.0[e.outcome] += e.mass;
                }
                let max_violation = groups
                    .values()
                    .map(|(mass, f)| {
                        let total: f64 = mass.iter().sum();
                        mass.iter()
                            .zip(f.probs())
                            .map(|(mj, pj)| (mj / total - pj).abs())
                            .fold(0.0, f64::max)
                    })
                    .fold(0.0, f64::max);
                ExpertCalibration {
                    expert: i,
                    max_violation,
                    groups: groups.len(),
                }
            })
            .collect();
        let max_violation = per_expert
            .iter()
            .map(|e| e.max_violation)
            .fold(0.0, f64::max);
        CalibrationReport {
            max_violation,
            per_expert,
        }
    }

    /// Parses the tabular format: a header `n m`, then rows `s_1 … s_m j mass`.
    ///
    /// Blank lines and lines starting with `#` are skipped. Outcomes are
    /// 0-based. Reports are the Bayes posteriors of the loaded joint.
    pub fn parse_table(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(k, l)| (k + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::Parse("empty structure file".into()))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| {
                t.parse()
                    .map_err(|_| Error::Parse(format!("header: bad integer {t:?}")))
            })
            .collect::<Result<_>>()?;
        let [n, m] = dims[..] else {
            return Err(Error::Parse(format!(
                "header must be `n m`, got {header:?}"
            )));
        };
        let mut support = Vec::new();
        for (lineno, line) in lines {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != m + 2 {
                return Err(Error::Parse(format!(
                    "line {lineno}: expected {} fields, got {}",
                    m + 2,
                    fields.len()
                )));
            }
            let signals = fields[..m]
                .iter()
                .map(|t| {
                    t.parse::<i64>()
                        .map_err(|_| Error::Parse(format!("line {lineno}: bad signal {t:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            let outcome = fields[m]
                .parse::<usize>()
                .map_err(|_| Error::Parse(format!("line {lineno}: bad outcome {:?}", fields[m])))?;
            let mass = fields[m + 1].parse::<f64>().map_err(|_| {
                Error::Parse(format!("line {lineno}: bad mass {:?}", fields[m + 1]))
            })?;
            support.push(SupportEntry {
                signals,
                outcome,
                mass,
            });
        }
        Self::from_joint(n, m, support)
    }

    pub fn load_table(path: &Path) -> Result<Self> {
        Self::parse_table(&fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpertCalibration {
    pub expert: usize,
    pub max_violation: f64,
    /// Number of distinct reports the expert makes.
    pub groups: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationReport {
    pub max_violation: f64,
    pub per_expert: Vec<ExpertCalibration>,
}

impl CalibrationReport {
    pub fn passes(&self) -> bool {
        self.max_violation <= CALIBRATION_TOL
    }
}

/// Conditionally independent symmetric channels: expert `i` observes the
/// outcome with probability `accuracies[i]` and otherwise a uniformly chosen
/// wrong outcome. Signals are outcome labels.
pub fn bayesian_independent_structure(
    prior: &[f64],
    accuracies: &[f64],
) -> Result<InformationStructure> {
    let n = prior.len();
    let m = accuracies.len();
    if n < 2 || m < 2 {
        return Err(Error::Config(format!(
            "bayesian_independent needs n ≥ 2 and m ≥ 2, got n = {n}, m = {m}"
        )));
    }
    if prior.iter().any(|p| !(*p > 0.0)) || (prior.iter().sum::<f64>() - 1.0).abs() > MASS_TOL {
        return Err(Error::Config(format!(
            "prior must be positive and sum to 1: {prior:?}"
        )));
    }
    if accuracies.iter().any(|a| !(*a > 0.0 && *a <= 1.0)) {
        return Err(Error::Config(format!(
            "accuracies must lie in (0, 1]: {accuracies:?}"
        )));
    }
    let channel = |acc: f64, signal: usize, outcome: usize| {
        if signal == outcome {
            acc
        } else {
            (1.0 - acc) / (n - 1) as f64
        }
    };
    let mut support = Vec::new();
    let mut profile = vec![0usize; m];
    for outcome in 0..n {
        profile.iter_mut().for_each(|s| *s = 0);
        loop {
            let mass = prior[outcome]
                * profile
                    .iter()
                    .zip(accuracies)
                    .map(|(&s, &a)| channel(a, s, outcome))
                    .product::<f64>();
            if mass > 0.0 {
                support.push(SupportEntry {
                    signals: profile.iter().map(|&s| s as i64).collect(),
                    outcome,
                    mass,
                });
            }
            // Odometer over signal profiles.
            let mut k = 0;
            while k < m {
                profile[k] += 1;
                if profile[k] < n {
                    break;
                }
                profile[k] = 0;
                k += 1;
            }
            if k == m {
                break;
            }
        }
    }
    // Renormalize away rounding in the products.
    let total: f64 = support.iter().map(|e| e.mass).sum();
    support.iter_mut().for_each(|e| e.mass /= total);
    InformationStructure::from_joint(n, m, support)
}

/// Every expert's signal is independent of the outcome, so all report the prior.
pub fn symmetric_null_structure(prior: &[f64], experts: usize) -> Result<InformationStructure> {
    let support = prior
        .iter()
        .enumerate()
        .map(|(j, &p)| SupportEntry {
            signals: vec![0; experts],
            outcome: j,
            mass: p,
        })
        .collect();
    InformationStructure::from_joint(prior.len(), experts, support)
}

fn two_expert_table(first: Forecast, second: Forecast) -> Vec<BTreeMap<i64, Forecast>> {
    vec![BTreeMap::from([(0, first)]), BTreeMap::from([(0, second)])]
}

/// Expert `informed` reports (0.9, 0.1), the other (0.5, 0.5); outcome 0 w.p. 0.9.
pub fn lower_bound_structure(informed: usize) -> Result<InformationStructure> {
    let sharp = Forecast::new(vec![0.9, 0.1])?;
    let flat = Forecast::new(vec![0.5, 0.5])?;
    let table = if informed == 0 {
        two_expert_table(sharp, flat)
    } else {
        two_expert_table(flat, sharp)
    };
    let support = vec![
        SupportEntry {
            signals: vec![0, 0],
            outcome: 0,
            mass: 0.9,
        },
        SupportEntry {
            signals: vec![0, 0],
            outcome: 1,
            mass: 0.1,
        },
    ];
    InformationStructure::with_reports(2, 2, support, table)
}

/// First round of the unbounded-loss demo: `target` reports `(e^{-T}, 1 − e^{-T})`,
/// the other expert (0.5, 0.5), and outcome 0 happens for sure.
pub fn extreme_first_round_structure(
    target: usize,
    horizon: usize,
) -> Result<InformationStructure> {
    let tiny = (-(horizon as f64)).exp();
    let extreme = Forecast::with_floor(vec![tiny, 1.0 - tiny], EXTREME_REPORT_FLOOR)?;
    let flat = Forecast::new(vec![0.5, 0.5])?;
    let table = if target == 0 {
        two_expert_table(extreme, flat)
    } else {
        two_expert_table(flat, extreme)
    };
    let support = vec![SupportEntry {
        signals: vec![0, 0],
        outcome: 0,
        mass: 1.0,
    }];
    InformationStructure::with_reports(2, 2, support, table)
}

/// Later rounds of the demo: a fair-coin outcome that expert `perfect` observes
/// exactly; the other expert observes nothing.
pub fn perfect_expert_structure(perfect: usize) -> Result<InformationStructure> {
    let support = (0..2)
        .map(|j| {
            let mut signals = vec![0, 0];
            signals[perfect] = j as i64;
            SupportEntry {
                signals,
                outcome: j,
                mass: 0.5,
            }
        })
        .collect();
    InformationStructure::from_joint_with_floor(2, 2, support, EXTREME_REPORT_FLOOR)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioKind {
    BayesianIndependent,
    SymmetricNull,
    AppendixBFixed,
    AppendixBAdaptive,
    Example1Uncalibrated,
    CustomTable,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 6] = [
        ScenarioKind::BayesianIndependent,
        ScenarioKind::SymmetricNull,
        ScenarioKind::AppendixBFixed,
        ScenarioKind::AppendixBAdaptive,
        ScenarioKind::Example1Uncalibrated,
        ScenarioKind::CustomTable,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::BayesianIndependent => "bayesian_independent",
            ScenarioKind::SymmetricNull => "symmetric_null",
            ScenarioKind::AppendixBFixed => "appendix_b_fixed",
            ScenarioKind::AppendixBAdaptive => "appendix_b_adaptive",
            ScenarioKind::Example1Uncalibrated => "example_1_uncalibrated",
            ScenarioKind::CustomTable => "custom_table",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Self::ALL.iter().map(|k| k.name()).collect();
                Error::Config(format!(
                    "unknown scenario {s:?}; expected one of {}",
                    names.join(", ")
                ))
            })
    }
}

/// A scenario with its parameters.
#[derive(Debug, Clone)]
pub enum ScenarioSpec {
    BayesianIndependent {
        prior: Vec<f64>,
        accuracies: Vec<f64>,
    },
    SymmetricNull {
        prior: Vec<f64>,
        experts: usize,
    },
    AppendixBFixed,
    AppendixBAdaptive,
    Example1Uncalibrated,
    CustomTable(Arc<InformationStructure>),
}

impl ScenarioSpec {
    pub fn kind(&self) -> ScenarioKind {
        match self {
            ScenarioSpec::BayesianIndependent { .. } => ScenarioKind::BayesianIndependent,
            ScenarioSpec::SymmetricNull { .. } => ScenarioKind::SymmetricNull,
            ScenarioSpec::AppendixBFixed => ScenarioKind::AppendixBFixed,
            ScenarioSpec::AppendixBAdaptive => ScenarioKind::AppendixBAdaptive,
            ScenarioSpec::Example1Uncalibrated => ScenarioKind::Example1Uncalibrated,
            ScenarioSpec::CustomTable(_) => ScenarioKind::CustomTable,
        }
    }

    /// `(m, n)` the scenario produces.
    pub fn dimensions(&self) -> (usize, usize) {
        match self {
            ScenarioSpec::BayesianIndependent { prior, accuracies } => {
                (accuracies.len(), prior.len())
            }
            ScenarioSpec::SymmetricNull { prior, experts } => (*experts, prior.len()),
            ScenarioSpec::AppendixBFixed
            | ScenarioSpec::AppendixBAdaptive
            | ScenarioSpec::Example1Uncalibrated => (2, 2),
            ScenarioSpec::CustomTable(s) => (s.experts(), s.outcomes()),
        }
    }

    /// The structure the adversary would use in round 1 against uniform weights.
    pub fn initial_structure(&self, horizon: usize) -> Result<Arc<InformationStructure>> {
        let (m, _) = self.dimensions();
        Adversary::new(self.clone())?.structure(&WeightVector::uniform(m), 1, horizon)
    }
}

/// Per-run adversary state. Receives the published weights, the round index
/// and the horizon, and nothing else.
#[derive(Debug, Clone)]
pub struct Adversary {
    spec: ScenarioSpec,
    fixed: Option<Arc<InformationStructure>>,
    demo_target: Option<usize>,
}

impl Adversary {
    pub fn new(spec: ScenarioSpec) -> Result<Self> {
        let fixed = match &spec {
            ScenarioSpec::BayesianIndependent { prior, accuracies } => {
                Some(Arc::new(bayesian_independent_structure(prior, accuracies)?))
            }
            ScenarioSpec::SymmetricNull { prior, experts } => {
                Some(Arc::new(symmetric_null_structure(prior, *experts)?))
            }
            ScenarioSpec::AppendixBFixed => Some(Arc::new(lower_bound_structure(1)?)),
            ScenarioSpec::CustomTable(s) => Some(Arc::clone(s)),
            ScenarioSpec::AppendixBAdaptive | ScenarioSpec::Example1Uncalibrated => None,
        };
        Ok(Adversary {
            spec,
            fixed,
            demo_target: None,
        })
    }

    pub fn spec(&self) -> &ScenarioSpec {
        &self.spec
    }

    /// The structure for round `t` given the published weights.
    pub fn structure(
        &mut self,
        weights: &WeightVector,
        t: usize,
        horizon: usize,
    ) -> Result<Arc<InformationStructure>> {
        if let Some(s) = &self.fixed {
            return Ok(Arc::clone(s));
        }
        let w = weights.as_slice();
        if w.len() != 2 {
            return Err(Error::Structural(format!(
                "{} needs 2 experts, got {}",
                self.spec.kind(),
                w.len()
            )));
        }
        let structure = match self.spec {
            ScenarioSpec::AppendixBAdaptive => {
                let informed = if w[0] <= w[1] { 0 } else { 1 };
                lower_bound_structure(informed)?
            }
            ScenarioSpec::Example1Uncalibrated => {
                let target = match self.demo_target {
                    Some(target) if t > 1 => target,
                    _ => {
                        let target = if w[0] >= 0.5 { 0 } else { 1 };
                        self.demo_target = Some(target);
                        target
                    }
                };
                if t == 1 {
                    extreme_first_round_structure(target, horizon)?
                } else {
                    perfect_expert_structure(1 - target)?
                }
            }
            _ => unreachable!("oblivious scenarios are cached"),
        };
        Ok(Arc::new(structure))
    }
}

/// One adversarial round: build the structure for `(w_t, t, T)`, then sample it.
pub fn adversary_round<R: Rng + ?Sized>(
    adversary: &mut Adversary,
    weights: &WeightVector,
    t: usize,
    horizon: usize,
    rng: &mut R,
) -> Result<RoundDraw> {
    Ok(adversary.structure(weights, t, horizon)?.sample_round(rng))
}

/// Couples an adversary with its run's random stream.
pub struct ScenarioSource<R> {
    pub adversary: Adversary,
    pub rng: R,
}

impl<R: Rng> RoundSource for ScenarioSource<R> {
    fn next_round(
        &mut self,
        weights: &WeightVector,
        t: usize,
        horizon: usize,
    ) -> Result<(ReportSet, usize)> {
        let draw = adversary_round(&mut self.adversary, weights, t, horizon, &mut self.rng)?;
        Ok((draw.reports, draw.outcome))
    }
}
