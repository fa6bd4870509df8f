use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use logpool::experiment::{self, ExperimentConfig};
use logpool::Result;

#[derive(Parser)]
#[command(
    name = "logpool",
    version,
    about = "Online learning of logarithmic pooling weights"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an ensemble at one horizon; writes trace.csv and summary.csv.
    Simulate(ConfigArgs),
    /// Run ensembles over T_list; writes sweep.csv and prints the fitted exponent.
    Sweep(ConfigArgs),
    /// Check calibration of the scenario's information structure.
    Verify(ConfigArgs),
    /// Recompute the monitors from a trace file.
    Diagnose {
        #[command(flatten)]
        config: ConfigArgs,
        /// Trace produced by `simulate` with the same config.
        #[arg(long)]
        trace_file: PathBuf,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// File of `key = value` lines; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long = "T")]
    horizon: Option<String>,
    #[arg(long)]
    m: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    runs: Option<String>,
    /// `c` or `c/sqrt(T)`.
    #[arg(long)]
    eta_override: Option<String>,
    #[arg(long)]
    out: Option<String>,
    /// Comma-separated outcome prior.
    #[arg(long)]
    prior: Option<String>,
    /// Comma-separated channel accuracies.
    #[arg(long)]
    accuracies: Option<String>,
    /// Structure file for `custom_table`.
    #[arg(long)]
    table: Option<String>,
    /// Comma-separated horizons for `sweep`.
    #[arg(long = "T-list")]
    horizons: Option<String>,
    /// Skip the per-round trace.
    #[arg(long)]
    no_trace: bool,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        let flags = [
            ("seed", &self.seed),
            ("T", &self.horizon),
            ("m", &self.m),
            ("n", &self.n),
            ("alpha", &self.alpha),
            ("scenario", &self.scenario),
            ("runs", &self.runs),
            ("eta_override", &self.eta_override),
            ("output_dir", &self.out),
            ("prior", &self.prior),
            ("accuracies", &self.accuracies),
            ("table", &self.table),
            ("T_list", &self.horizons),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                config.set(key, v)?;
            }
        }
        if self.no_trace {
            config.trace = false;
        }
        config.validate()?;
        Ok(config)
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Simulate(args) => {
            let config = args.resolve()?;
            let summaries = experiment::cmd_simulate(&config)?;
            println!("run_id  realized  hindsight  regret  sga_violations  phi_monotone");
            for s in &summaries {
                println!(
                    "{:>6}  {:.6}  {:.6}  {:.6}  {}  {}",
                    s.run_id,
                    s.realized_cumulative_loss,
                    s.hindsight_value,
                    s.regret,
                    s.sga_violations,
                    s.phi_monotone
                );
            }
            Ok(true)
        }
        Command::Sweep(args) => {
            let config = args.resolve()?;
            let report = experiment::cmd_sweep(&config)?;
            println!("T  mean_regret  ci_half_width  bound  ratio");
            for r in &report.rows {
                println!(
                    "{}  {:.6}  {:.6}  {:.6e}  {:.3e}",
                    r.horizon, r.mean_regret, r.ci_half_width, r.bound, r.ratio
                );
            }
            println!("fitted exponent: {:.4}", report.exponent);
            Ok(true)
        }
        Command::Verify(args) => {
            let config = args.resolve()?;
            let report = experiment::cmd_verify(&config)?;
            for e in &report.per_expert {
                println!(
                    "expert {}: max violation {:.3e} over {} distinct reports",
                    e.expert + 1,
                    e.max_violation,
                    e.groups
                );
            }
            let verdict = if report.passes() {
                "calibrated"
            } else {
                "NOT calibrated"
            };
            println!("max violation {:.3e}: {verdict}", report.max_violation);
            Ok(report.passes())
        }
        Command::Diagnose { config, trace_file } => {
            let config = config.resolve()?;
            let runs = experiment::cmd_diagnose(&config, &trace_file)?;
            let mut ok = true;
            for d in &runs {
                println!("run {} (T = {}):", d.run_id, d.horizon);
                println!(
                    "  gradient condition: gamma {:.4}, {} violations, zeta_observed {:.4}",
                    d.sga.gamma,
                    d.sga.violations.len(),
                    d.sga.zeta_observed
                );
                for v in d.sga.violations.iter().take(5) {
                    println!(
                        "    t = {}, expert {}, {:?} side, gradient {:.6}",
                        v.t,
                        v.expert + 1,
                        v.side,
                        v.gradient
                    );
                }
                println!(
                    "  potential: monotone {}, max mismatch vs trace {:.3e}",
                    d.phi_monotone, d.phi_mismatch
                );
                println!(
                    "  weight bounds over {} clean rounds: power {}, floor {}, step {} violations",
                    d.corollary.rounds.len(),
                    d.corollary.power_violations,
                    d.corollary.floor_violations,
                    d.corollary.step_violations
                );
                println!("  gradient tails (zeta: upper freq / bound, lower freq / bound):");
                for (z, up, lo) in &d.tails {
                    println!(
                        "    {z}: {:.3e} / {:.3e}, {:.3e} / {:.3e}",
                        up.frequency(),
                        up.bound,
                        lo.frequency(),
                        lo.bound
                    );
                }
                ok &= d.phi_matches();
            }
            Ok(ok)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(experiment::exit_code(&e) as u8)
        }
    }
}
