//! Experiment configuration, Monte Carlo runs and CSV output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;

use crate::calibrated_world::{
    run_rng, Adversary, CalibrationReport, InformationStructure, ScenarioKind, ScenarioSource,
    ScenarioSpec,
};
use crate::diagnostics::{
    self, check_sga_parts, corollary_from_parts, potential_from_parts, run_gamma, CorollaryReport,
    DiagnosticsReport, SgaMonitor, TailEstimate,
};
use crate::error::{Error, Result};
use crate::hindsight::{best_weights, HindsightSolution, History, DEFAULT_TOL};
use crate::mirror_descent::{run_learner, LearnerConfig, RegularizerParams, StepRule, Trajectory};

/// A fixed step size that replaces the schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaOverride {
    Constant(f64),
    /// `c/√T`.
    InverseSqrt(f64),
}

impl EtaOverride {
    pub fn parse(s: &str) -> Result<Self> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let bad = || {
            Error::Config(format!(
                "eta_override must be `c` or `c/sqrt(T)`, got {s:?}"
            ))
        };
        let value = if let Some(c) = compact.strip_suffix("/sqrt(T)") {
            EtaOverride::InverseSqrt(c.parse().map_err(|_| bad())?)
        } else {
            EtaOverride::Constant(compact.parse().map_err(|_| bad())?)
        };
        let c = match value {
            EtaOverride::Constant(c) | EtaOverride::InverseSqrt(c) => c,
        };
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Config(format!(
                "eta_override must be positive, got {s:?}"
            )));
        }
        Ok(value)
    }

    pub fn at(&self, horizon: usize) -> f64 {
        match *self {
            EtaOverride::Constant(c) => c,
            EtaOverride::InverseSqrt(c) => c / (horizon as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub horizon: usize,
    pub experts: usize,
    pub outcomes: usize,
    pub alpha: f64,
    pub scenario: ScenarioKind,
    pub runs: usize,
    pub eta_override: Option<EtaOverride>,
    pub output_dir: PathBuf,
    /// Horizons of a sweep, ascending.
    pub horizons: Vec<usize>,
    /// Outcome prior; uniform when absent.
    pub prior: Option<Vec<f64>>,
    /// Channel accuracies of `bayesian_independent`; `0.8 … 0.7` when absent.
    pub accuracies: Option<Vec<f64>>,
    pub table: Option<PathBuf>,
    /// Write the per-round trace file.
    pub trace: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            horizon: 1000,
            experts: 2,
            outcomes: 2,
            alpha: 0.25,
            scenario: ScenarioKind::BayesianIndependent,
            runs: 1,
            eta_override: None,
            output_dir: PathBuf::from("out"),
            horizons: vec![100, 1000, 10_000],
            prior: None,
            accuracies: None,
            table: None,
            trace: true,
        }
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| Error::Config(format!("{key}: bad list entry {v:?}")))
        })
        .collect()
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: bad value {value:?}")))
}

impl ExperimentConfig {
    /// Sets one field by its config-file name.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "seed" => self.seed = parse_value(key, value)?,
            "T" => self.horizon = parse_value(key, value)?,
            "m" => self.experts = parse_value(key, value)?,
            "n" => self.outcomes = parse_value(key, value)?,
            "alpha" => self.alpha = parse_value(key, value)?,
            "scenario" => self.scenario = value.parse()?,
            "runs" => self.runs = parse_value(key, value)?,
            "eta_override" => {
                self.eta_override = match value {
                    "" | "none" => None,
                    v => Some(EtaOverride::parse(v)?),
                }
            }
            "output_dir" | "out" => self.output_dir = PathBuf::from(value),
            "T_list" => self.horizons = parse_list(key, value)?,
            "prior" => self.prior = Some(parse_list(key, value)?),
            "accuracies" => self.accuracies = Some(parse_list(key, value)?),
            "table" => self.table = Some(PathBuf::from(value)),
            "trace" => self.trace = parse_value(key, value)?,
            _ => return Err(Error::Config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("config line {}: expected `key = value`", k + 1))
            })?;
            self.set(key.trim(), value)
                .map_err(|e| Error::Config(format!("config line {}: {e}", k + 1)))?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let mut config = Self::default();
        config.apply_text(&fs::read_to_string(path)?)?;
        Ok(config)
    }

    pub fn params(&self) -> Result<RegularizerParams> {
        if self.eta_override.is_some() {
            RegularizerParams::widened(self.alpha)
        } else {
            RegularizerParams::new(self.alpha)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Config("T must be at least 1".into()));
        }
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if self.experts < 2 || self.outcomes < 2 {
            return Err(Error::Config(format!(
                "need m ≥ 2 and n ≥ 2, got m = {}, n = {}",
                self.experts, self.outcomes
            )));
        }
        if self.horizons.is_empty()
            || self.horizons.windows(2).any(|w| w[0] >= w[1])
            || self.horizons[0] == 0
        {
            return Err(Error::Config(format!(
                "T_list must be positive and strictly ascending, got {:?}",
                self.horizons
            )));
        }
        self.params().map_err(|e| match e {
            Error::Domain(msg) => Error::Config(msg),
            e => e,
        })?;
        Ok(())
    }

    /// Builds the scenario, checking it against `m` and `n`.
    pub fn scenario_spec(&self) -> Result<ScenarioSpec> {
        let (m, n) = (self.experts, self.outcomes);
        let prior = || -> Result<Vec<f64>> {
            let prior = self
                .prior
                .clone()
                .unwrap_or_else(|| vec![1.0 / n as f64; n]);
            if prior.len() != n {
                return Err(Error::Config(format!(
                    "prior has {} entries, n = {n}",
                    prior.len()
                )));
            }
            Ok(prior)
        };
        let spec = match self.scenario {
            ScenarioKind::BayesianIndependent => {
                let accuracies = self
                    .accuracies
                    .clone()
                    .unwrap_or_else(|| default_accuracies(m));
                if accuracies.len() != m {
                    return Err(Error::Config(format!(
                        "accuracies has {} entries, m = {m}",
                        accuracies.len()
                    )));
                }
                ScenarioSpec::BayesianIndependent {
                    prior: prior()?,
                    accuracies,
                }
            }
            ScenarioKind::SymmetricNull => ScenarioSpec::SymmetricNull {
                prior: prior()?,
                experts: m,
            },
            ScenarioKind::AppendixBFixed => ScenarioSpec::AppendixBFixed,
            ScenarioKind::AppendixBAdaptive => ScenarioSpec::AppendixBAdaptive,
            ScenarioKind::Example1Uncalibrated => ScenarioSpec::Example1Uncalibrated,
            ScenarioKind::CustomTable => {
                let path = self
                    .table
                    .as_ref()
                    .ok_or_else(|| Error::Config("custom_table needs `table`".into()))?;
                ScenarioSpec::CustomTable(Arc::new(InformationStructure::load_table(path)?))
            }
        };
        let dims = spec.dimensions();
        if dims != (m, n) {
            return Err(Error::Config(format!(
                "scenario {} produces m = {}, n = {} but the config has m = {m}, n = {n}",
                self.scenario, dims.0, dims.1
            )));
        }
        Adversary::new(spec.clone()).map_err(|e| match e {
            Error::Domain(msg) | Error::Structural(msg) => Error::Config(msg),
            e => e,
        })?;
        Ok(spec)
    }

    pub fn learner_config(&self, horizon: usize) -> Result<LearnerConfig> {
        Ok(LearnerConfig {
            horizon,
            experts: self.experts,
            outcomes: self.outcomes,
            params: self.params()?,
            step: match self.eta_override {
                Some(e) => StepRule::Constant(e.at(horizon)),
                None => StepRule::Schedule,
            },
        })
    }
}

/// `m` accuracies spaced evenly from 0.8 down to 0.7.
pub fn default_accuracies(m: usize) -> Vec<f64> {
    if m < 2 {
        return vec![0.8; m];
    }
    let k = (m - 1) as f64;
    (0..m)
        .map(|i| (0.8 * (k - i as f64) + 0.7 * i as f64) / k)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub run_id: u64,
    pub realized_cumulative_loss: f64,
    pub hindsight_value: f64,
    pub regret: f64,
    pub sga_violations: usize,
    pub phi_monotone: bool,
    pub zeta_observed: f64,
}

/// Everything produced by one run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub summary: RunSummary,
    pub trajectory: Trajectory,
    pub hindsight: HindsightSolution,
    pub diagnostics: DiagnosticsReport,
}

/// One learner run against the scenario, on stream `seed ⊕ run_id`.
pub fn run_once(
    config: &ExperimentConfig,
    spec: &ScenarioSpec,
    horizon: usize,
    run_id: u64,
) -> Result<RunOutcome> {
    let mut source = ScenarioSource {
        adversary: Adversary::new(spec.clone())?,
        rng: run_rng(config.seed, run_id),
    };
    let trajectory = run_learner(&mut source, &config.learner_config(horizon)?)?;
    let history = History::from_trajectory(&trajectory)?;
    let hindsight = best_weights(&history, DEFAULT_TOL)?;
    let diagnostics = diagnostics::diagnose(&trajectory)?;
    let realized = trajectory.realized_loss();
    let summary = RunSummary {
        run_id,
        realized_cumulative_loss: realized,
        hindsight_value: hindsight.value,
        regret: realized - hindsight.value,
        sga_violations: diagnostics.sga.violations.len(),
        phi_monotone: diagnostics.phi_monotone,
        zeta_observed: diagnostics.sga.zeta_observed,
    };
    Ok(RunOutcome {
        summary,
        trajectory,
        hindsight,
        diagnostics,
    })
}

/// One row of the per-round trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub run_id: u64,
    pub t: usize,
    pub outcome: usize,
    pub loss: f64,
    pub eta_t: f64,
    pub weights: Vec<f64>,
    pub gradient: Vec<f64>,
    pub sga_flag: bool,
    pub phi: f64,
}

pub fn trace_rows(outcome: &RunOutcome) -> Vec<TraceRow> {
    let flags = outcome.diagnostics.sga.round_flags();
    outcome
        .trajectory
        .rounds
        .iter()
        .map(|r| TraceRow {
            run_id: outcome.summary.run_id,
            t: r.t,
            outcome: r.outcome,
            loss: r.loss,
            eta_t: r.eta_t,
            weights: r.weights.as_slice().to_vec(),
            gradient: r.gradient.clone(),
            sga_flag: flags[r.t - 1],
            phi: outcome.diagnostics.potential.phi[r.t],
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub summary: RunSummary,
    pub trace: Option<Vec<TraceRow>>,
}

/// All runs at one horizon, in parallel, ordered by `run_id`.
pub fn simulate(
    config: &ExperimentConfig,
    horizon: usize,
    with_trace: bool,
) -> Result<Vec<RunRecord>> {
    config.validate()?;
    let spec = config.scenario_spec()?;
    let mut records = (0..config.runs as u64)
        .into_par_iter()
        .map(|run_id| {
            let outcome = run_once(config, &spec, horizon, run_id)?;
            Ok(RunRecord {
                trace: with_trace.then(|| trace_rows(&outcome)),
                summary: outcome.summary,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    records.sort_by_key(|r| r.summary.run_id);
    Ok(records)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub horizon: usize,
    pub mean_regret: f64,
    /// Half-width of the normal 95% interval for the mean.
    pub ci_half_width: f64,
    pub bound: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Least-squares slope of `ln(mean regret)` against `ln T`.
    pub exponent: f64,
}

pub fn mean_and_half_width(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, 1.96 * (var / k).sqrt())
}

/// Least-squares slope of `ln y` on `ln x`; NaN when any `y ≤ 0` or fewer than two points.
pub fn fit_exponent(points: &[(f64, f64)]) -> f64 {
    if points.len() < 2 || points.iter().any(|(x, y)| *x <= 0.0 || *y <= 0.0) {
        return f64::NAN;
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|(x, y)| (x.ln(), y.ln())).collect();
    let k = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / k;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = logs.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = logs.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    sxy / sxx
}

pub fn sweep(config: &ExperimentConfig) -> Result<SweepReport> {
    config.validate()?;
    let rows = config
        .horizons
        .iter()
        .map(|&horizon| {
            let records = simulate(config, horizon, false)?;
            let regrets: Vec<f64> = records.iter().map(|r| r.summary.regret).collect();
            let (mean_regret, ci_half_width) = mean_and_half_width(&regrets);
            let bound = diagnostics::theoretical_bound(
                horizon.max(2),
                config.experts,
                config.outcomes,
                config.alpha,
            )?;
            Ok(SweepRow {
                horizon,
                mean_regret,
                ci_half_width,
                bound,
                ratio: mean_regret / bound,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let exponent = fit_exponent(
        &rows
            .iter()
            .map(|r| (r.horizon as f64, r.mean_regret))
            .collect::<Vec<_>>(),
    );
    Ok(SweepReport { rows, exponent })
}

/// 17 significant digits.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

pub const TRACE_FILE: &str = "trace.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const SWEEP_FILE: &str = "sweep.csv";

pub fn write_trace<W: Write>(out: W, experts: usize, rows: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["run_id", "t", "outcome", "loss", "eta_t"]
        .map(String::from)
        .to_vec();
    header.extend((1..=experts).map(|i| format!("w_{i}")));
    header.extend((1..=experts).map(|i| format!("g_{i}")));
    header.extend(["sga_flag", "phi"].map(String::from));
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.run_id.to_string(),
            r.t.to_string(),
            r.outcome.to_string(),
            fmt_real(r.loss),
            fmt_real(r.eta_t),
        ];
        rec.extend(r.weights.iter().map(|x| fmt_real(*x)));
        rec.extend(r.gradient.iter().map(|x| fmt_real(*x)));
        rec.push(r.sga_flag.to_string());
        rec.push(fmt_real(r.phi));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary<W: Write>(out: W, summaries: &[RunSummary]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "run_id",
        "realized_cumulative_loss",
        "hindsight_value",
        "regret",
        "sga_violations",
        "phi_monotone",
        "zeta_observed",
    ])?;
    for s in summaries {
        w.write_record([
            s.run_id.to_string(),
            fmt_real(s.realized_cumulative_loss),
            fmt_real(s.hindsight_value),
            fmt_real(s.regret),
            s.sga_violations.to_string(),
            s.phi_monotone.to_string(),
            fmt_real(s.zeta_observed),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep<W: Write>(out: W, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["T", "mean_regret", "ci_half_width", "bound", "ratio"])?;
    for r in rows {
        w.write_record([
            r.horizon.to_string(),
            fmt_real(r.mean_regret),
            fmt_real(r.ci_half_width),
            fmt_real(r.bound),
            fmt_real(r.ratio),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn create(dir: &Path, name: &str) -> Result<fs::File> {
    fs::create_dir_all(dir)?;
    Ok(fs::File::create(dir.join(name))?)
}

/// Runs the ensemble at `T` and writes the summary (and trace) files.
pub fn cmd_simulate(config: &ExperimentConfig) -> Result<Vec<RunSummary>> {
    let records = simulate(config, config.horizon, config.trace)?;
    if config.trace {
        let rows: Vec<TraceRow> = records
            .iter()
            .flat_map(|r| r.trace.iter().flatten().cloned())
            .collect();
        write_trace(
            create(&config.output_dir, TRACE_FILE)?,
            config.experts,
            &rows,
        )?;
    }
    let summaries: Vec<RunSummary> = records.into_iter().map(|r| r.summary).collect();
    write_summary(create(&config.output_dir, SUMMARY_FILE)?, &summaries)?;
    Ok(summaries)
}

pub fn cmd_sweep(config: &ExperimentConfig) -> Result<SweepReport> {
    let report = sweep(config)?;
    write_sweep(create(&config.output_dir, SWEEP_FILE)?, &report.rows)?;
    Ok(report)
}

/// Calibration report of the scenario's structure (as seen in round 1 against uniform weights).
pub fn cmd_verify(config: &ExperimentConfig) -> Result<CalibrationReport> {
    let spec = config.scenario_spec()?;
    Ok(spec.initial_structure(config.horizon)?.verify_calibration())
}

/// Diagnostics of one run recomputed from a trace file.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceDiagnostics {
    pub run_id: u64,
    pub horizon: usize,
    pub sga: SgaMonitor,
    pub phi_monotone: bool,
    pub corollary: CorollaryReport,
    /// Largest `|φ_trace − φ_recomputed| / max(1, |φ_recomputed|)`.
    pub phi_mismatch: f64,
    /// Per-round gradient tail frequencies, `(ζ, upper, lower)` pooled over experts.
    pub tails: Vec<(f64, TailEstimate, TailEstimate)>,
}

pub const PHI_MATCH_TOL: f64 = 1e-9;
pub const TAIL_ZETAS: [f64; 4] = [1.0, 2.0, 4.0, 8.0];

impl TraceDiagnostics {
    pub fn phi_matches(&self) -> bool {
        self.phi_mismatch <= PHI_MATCH_TOL
    }
}

pub fn read_trace(path: &Path, experts: usize) -> Result<Vec<TraceRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let width = 7 + 2 * experts;
    let real = |s: &str| -> Result<f64> {
        s.parse()
            .map_err(|_| Error::Parse(format!("bad number {s:?} in trace")))
    };
    let int = |s: &str| -> Result<usize> {
        s.parse()
            .map_err(|_| Error::Parse(format!("bad integer {s:?} in trace")))
    };
    let header = reader.headers()?.clone();
    if header.len() != width {
        return Err(Error::Parse(format!(
            "trace has {} columns, expected {width} for m = {experts}",
            header.len()
        )));
    }
    reader
        .records()
        .map(|rec| {
            let rec = rec?;
            let f = |k: usize| &rec[k];
            Ok(TraceRow {
                run_id: int(f(0))? as u64,
                t: int(f(1))?,
                outcome: int(f(2))?,
                loss: real(f(3))?,
                eta_t: real(f(4))?,
                weights: (0..experts)
                    .map(|i| real(f(5 + i)))
                    .collect::<Result<_>>()?,
                gradient: (0..experts)
                    .map(|i| real(f(5 + experts + i)))
                    .collect::<Result<_>>()?,
                sga_flag: f(5 + 2 * experts).parse().map_err(|_| {
                    Error::Parse(format!("bad flag {:?} in trace", f(5 + 2 * experts)))
                })?,
                phi: real(f(6 + 2 * experts))?,
            })
        })
        .collect()
}

/// Recomputes the monitors from a trace. The final weights `w^{T+1}` are not
/// in the trace, so each run is replayed from the config to obtain them.
pub fn cmd_diagnose(config: &ExperimentConfig, trace: &Path) -> Result<Vec<TraceDiagnostics>> {
    config.validate()?;
    let spec = config.scenario_spec()?;
    let rows = read_trace(trace, config.experts)?;
    let mut runs: Vec<(u64, Vec<TraceRow>)> = Vec::new();
    for row in rows {
        match runs.last_mut() {
            Some((id, rs)) if *id == row.run_id => rs.push(row),
            _ => runs.push((row.run_id, vec![row])),
        }
    }
    runs.into_par_iter()
        .map(|(run_id, rows)| {
            let horizon = rows.len();
            if rows.iter().enumerate().any(|(k, r)| r.t != k + 1) {
                return Err(Error::Parse(format!(
                    "run {run_id}: rounds are not 1..T in order"
                )));
            }
            let replay = run_once(config, &spec, horizon, run_id)?;
            let last = replay.trajectory.rounds.last().expect("horizon ≥ 1");
            let final_weights = last.next_weights.as_slice();
            let weights: Vec<&[f64]> = rows
                .iter()
                .map(|r| r.weights.as_slice())
                .chain(std::iter::once(final_weights))
                .collect();
            let grads: Vec<&[f64]> = rows.iter().map(|r| r.gradient.as_slice()).collect();
            let gamma = run_gamma(horizon, config.outcomes);
            let eta = replay.trajectory.eta_base;
            let sga = check_sga_parts(&weights[..horizon], &grads, gamma);
            let potential = potential_from_parts(&weights, &grads, eta, gamma)?;
            let phi_mismatch = rows
                .iter()
                .map(|r| (r.phi - potential.phi[r.t]).abs() / potential.phi[r.t].abs().max(1.0))
                .fold(0.0, f64::max);
            let corollary =
                corollary_from_parts(&weights, config.alpha, eta, gamma, sga.clean_prefix());
            let n = config.outcomes as f64;
            let m = config.experts as f64;
            let trials = (horizon * config.experts) as u64;
            let tails = TAIL_ZETAS
                .iter()
                .map(|&z| {
                    let upper = grads
                        .iter()
                        .flat_map(|g| g.iter())
                        .filter(|g| **g >= z)
                        .count() as u64;
                    let lower = weights[..horizon]
                        .iter()
                        .zip(&grads)
                        .flat_map(|(w, g)| w.iter().zip(g.iter()))
                        .filter(|(w, g)| **g <= -z / **w)
                        .count() as u64;
                    (
                        z,
                        TailEstimate {
                            hits: upper,
                            trials,
                            bound: n * (-z).exp(),
                        },
                        TailEstimate {
                            hits: lower,
                            trials,
                            bound: m * n * n * (-z / n).exp(),
                        },
                    )
                })
                .collect();
            Ok(TraceDiagnostics {
                run_id,
                horizon,
                phi_monotone: potential
                    .first_increase_within(sga.clean_prefix())
                    .is_none(),
                sga,
                corollary,
                phi_mismatch,
                tails,
            })
        })
        .collect()
}

/// Exit status for an error: 1 for invalid input, 2 for runtime failures.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Parse(_) | Error::Structural(_) | Error::Domain(_) => 1,
        Error::Numerical(_) | Error::Io(_) | Error::Csv(_) => 2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eta_override_forms() {
        assert_eq!(
            EtaOverride::parse("0.05").unwrap(),
            EtaOverride::Constant(0.05)
        );
        let e = EtaOverride::parse("0.1 / sqrt(T)").unwrap();
        assert!((e.at(100) - 0.01).abs() < 1e-15);
        for bad in ["", "-1", "abc/sqrt(T)", "0", "inf"] {
            assert!(EtaOverride::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn config_text_and_overrides() {
        let mut c = ExperimentConfig::default();
        c.apply_text("# comment\nseed = 9\nT = 50\nscenario = symmetric_null\nT_list = 10, 20\nprior = 0.3,0.7\n")
            .unwrap();
        assert_eq!(
            (c.seed, c.horizon, c.scenario),
            (9, 50, ScenarioKind::SymmetricNull)
        );
        assert_eq!(c.horizons, vec![10, 20]);
        c.set("T", "70").unwrap();
        assert_eq!(c.horizon, 70);
        assert!(c.apply_text("bogus = 1").is_err());
        assert!(c.apply_text("seed 1").is_err());
        assert!(c.set("scenario", "nope").is_err());
    }

    #[test]
    fn validation() {
        let mut c = ExperimentConfig::default();
        assert!(c.validate().is_ok());
        c.alpha = 0.7;
        assert!(c.validate().is_err());
        c.eta_override = Some(EtaOverride::Constant(0.1));
        assert!(c.validate().is_ok());
        c.horizons = vec![100, 10];
        assert!(c.validate().is_err());
        let c = ExperimentConfig {
            scenario: ScenarioKind::AppendixBFixed,
            experts: 3,
            ..Default::default()
        };
        assert!(matches!(c.scenario_spec(), Err(Error::Config(_))));
        let c = ExperimentConfig {
            scenario: ScenarioKind::CustomTable,
            ..Default::default()
        };
        assert!(matches!(c.scenario_spec(), Err(Error::Config(_))));
    }

    #[test]
    fn accuracy_defaults() {
        assert_eq!(default_accuracies(2), vec![0.8, 0.7]);
        let a = default_accuracies(3);
        assert!((a[1] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn exponent_fit() {
        let pts: Vec<(f64, f64)> = [10.0, 100.0, 1000.0]
            .iter()
            .map(|x: &f64| (*x, 3.0 * x.powf(0.5)))
            .collect();
        assert!((fit_exponent(&pts) - 0.5).abs() < 1e-12);
        assert!(fit_exponent(&[(10.0, -1.0), (100.0, 2.0)]).is_nan());
        let (mean, hw) = mean_and_half_width(&[1.0, 3.0]);
        assert_eq!(mean, 2.0);
        assert!((hw - 1.96).abs() < 1e-12);
    }

    #[test]
    fn reals_have_seventeen_digits() {
        assert_eq!(fmt_real(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_real(0.1).parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn summary_regret_is_difference() {
        let c = ExperimentConfig {
            horizon: 200,
            runs: 2,
            ..Default::default()
        };
        for r in simulate(&c, 200, false).unwrap() {
            let s = r.summary;
            assert!((s.regret - (s.realized_cumulative_loss - s.hindsight_value)).abs() < 1e-9);
        }
    }
}
