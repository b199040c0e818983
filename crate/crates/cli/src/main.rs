use std::fs;
use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use photonstat_cli::commands::{render_report, run_calibrate, run_reconstruct};
use photonstat_cli::config::{BinKernel, ConfigOverlay, ExperimentConfig, Manifest, Scenario};
use photonstat_cli::experiments::{run_experiment, RunOutcome};

/// Simulate and reconstruct the photon-number distribution of a single light
/// mode measured by an on/off detector with a tunable thermal background.
#[derive(Parser)]
#[command(name = "photonstat", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate click records on a noise grid; writes records and kernels.
    Simulate(RunFlags),
    /// Reconstruct a photon-number distribution from records and kernels.
    Reconstruct(ReconstructFlags),
    /// Infer noise levels from vacuum-input records and write their kernels.
    Calibrate(CalibrateFlags),
    /// Run a preset experiment into an output directory.
    Experiment {
        #[command(subcommand)]
        which: ExperimentCmd,
    },
    /// Summarize a completed run directory.
    Report {
        /// Run directory containing manifest.json.
        dir: PathBuf,
    },
}

#[derive(Subcommand)]
enum ExperimentCmd {
    /// Grid of fixed noise levels.
    Fig1(RunFlags),
    /// Gaussian-fluctuating noise with averaged kernels and an
    /// error-bound sweep.
    Fig2(RunFlags),
    /// Random-walk noise drift, binned into time windows.
    Fig3(RunFlags),
    /// Replay a recorded manifest exactly.
    Rerun {
        /// manifest.json from a previous run.
        #[arg(long)]
        from_manifest: PathBuf,
        /// Output directory for the replayed artifacts.
        #[arg(long)]
        out: PathBuf,
    },
}

/// Flags shared by simulation-backed runs. Precedence: scenario defaults,
/// then the config file, then these flags.
#[derive(Args)]
struct RunFlags {
    /// Output directory for run artifacts.
    #[arg(long)]
    out: PathBuf,
    /// TOML config file overriding the scenario defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Detector efficiency in (0, 1].
    #[arg(long)]
    eta: Option<f64>,
    /// True state: fock:K, thermal:NBAR, coherent:MEAN, or p0,p1,...
    #[arg(long)]
    truth: Option<String>,
    /// Trials per setting (grid runs).
    #[arg(long)]
    shots: Option<u64>,
    /// Total trials of a drifting run.
    #[arg(long)]
    total_shots: Option<u64>,
    /// Iteration budget of the reconstruction.
    #[arg(long)]
    iterations: Option<u64>,
    /// Size of the photon-number search space (entries 0..dim-1).
    #[arg(long)]
    dim: Option<usize>,
    /// First noise level of the grid; also the drift start.
    #[arg(long)]
    noise_start: Option<f64>,
    /// Last noise level of the grid.
    #[arg(long)]
    noise_stop: Option<f64>,
    /// Number of grid points.
    #[arg(long)]
    noise_count: Option<usize>,
    /// Explicit noise levels, comma separated; overrides the grid.
    #[arg(long)]
    nbars: Option<String>,
    /// Gaussian variance of the per-shot noise level; 0 means fixed.
    #[arg(long)]
    variance: Option<f64>,
    /// Drift step size per shot.
    #[arg(long)]
    walk_step: Option<f64>,
    /// Probability that a drift step goes up.
    #[arg(long)]
    walk_p_up: Option<f64>,
    /// Reflecting lower bound of the drift.
    #[arg(long)]
    walk_floor: Option<f64>,
    /// Number of time windows a drifting run is split into.
    #[arg(long)]
    bins: Option<usize>,
    /// Quadrature points for noise-averaged kernels.
    #[arg(long)]
    quad_points: Option<usize>,
    /// Record traces every this many iterations.
    #[arg(long)]
    trace_every: Option<u64>,
    /// Trial counts of the error-bound sweep, comma separated.
    #[arg(long)]
    sweep: Option<String>,
    /// Also write the per-shot log of a drifting run.
    #[arg(long)]
    write_shots: bool,
    /// Kernel construction for drift bins.
    #[arg(long, value_enum)]
    bin_kernel: Option<BinKernel>,
}

impl RunFlags {
    fn to_overlay(&self) -> anyhow::Result<ConfigOverlay> {
        Ok(ConfigOverlay {
            truth: self.truth.clone(),
            eta: self.eta,
            noise_start: self.noise_start,
            noise_stop: self.noise_stop,
            noise_count: self.noise_count,
            nbar_list: self
                .nbars
                .as_deref()
                .map(|s| parse_list::<f64>(s, "--nbars"))
                .transpose()?,
            noise_variance: self.variance,
            walk_step: self.walk_step,
            walk_p_up: self.walk_p_up,
            walk_floor: self.walk_floor,
            bins: self.bins,
            total_shots: self.total_shots,
            shots_per_setting: self.shots,
            iterations: self.iterations,
            search_dim: self.dim,
            seed: self.seed,
            quad_points: self.quad_points,
            trace_every: self.trace_every,
            sweep_trials: self
                .sweep
                .as_deref()
                .map(|s| parse_list::<u64>(s, "--sweep"))
                .transpose()?,
            write_shots: if self.write_shots { Some(true) } else { None },
            bin_kernel: self.bin_kernel,
        })
    }

    fn build_config(&self, scenario: Scenario) -> anyhow::Result<ExperimentConfig> {
        let mut config = ExperimentConfig::defaults(scenario);
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read {}", path.display()))?;
            config.apply(
                &ConfigOverlay::from_toml(&text)
                    .with_context(|| format!("in {}", path.display()))?,
            );
        }
        config.apply(&self.to_overlay()?);
        Ok(config)
    }
}

fn parse_list<T: std::str::FromStr>(text: &str, flag: &str) -> anyhow::Result<Vec<T>>
where
    T::Err: std::error::Error + Send + Sync + 'static,
{
    text.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<T>()
                .with_context(|| format!("invalid {flag} entry {tok:?}"))
        })
        .collect()
}

#[derive(Args)]
struct ReconstructFlags {
    /// records.csv with one row per setting.
    #[arg(long)]
    records: PathBuf,
    /// kernels.csv, row-aligned with the records.
    #[arg(long)]
    kernels: PathBuf,
    /// Output directory for estimate.json and trace.csv.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    iterations: u64,
    /// Size of the photon-number search space.
    #[arg(long, default_value_t = 13)]
    dim: usize,
    /// Record traces every this many iterations (default: budget / 1000).
    #[arg(long)]
    trace_every: Option<u64>,
    /// Optional true state, for a fidelity trace.
    #[arg(long)]
    truth: Option<String>,
}

#[derive(Args)]
struct CalibrateFlags {
    /// records.csv of vacuum-input runs, one row per setting.
    #[arg(long)]
    records: PathBuf,
    /// Detector efficiency in (0, 1].
    #[arg(long)]
    eta: f64,
    /// Size of the photon-number space the kernels should cover.
    #[arg(long, default_value_t = 13)]
    dim: usize,
    /// Output directory for kernels.csv and calibration.json.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate(flags) => {
            let config = flags.build_config(Scenario::Custom)?;
            let outcome = run_experiment(&config, &flags.out)?;
            print_outcome(&config, &outcome, &flags.out);
        }
        Command::Reconstruct(flags) => {
            let trace_every = flags
                .trace_every
                .unwrap_or((flags.iterations / 1000).max(1));
            let report = run_reconstruct(
                &flags.records,
                &flags.kernels,
                flags.iterations,
                flags.dim,
                trace_every,
                flags.truth.as_deref(),
                &flags.out,
            )?;
            println!(
                "reconstructed over {} photon numbers in {} iterations",
                report.estimate.dim(),
                report.iterations_run
            );
            if let Some((_, f)) = report.fidelity_trace.as_ref().and_then(|t| t.last()) {
                println!("fidelity to truth {f:.4}");
            }
            println!("error bound {:.6}", report.error_bound);
            println!(
                "wrote estimate.json and trace.csv to {}",
                flags.out.display()
            );
        }
        Command::Calibrate(flags) => {
            let calibration = run_calibrate(&flags.records, flags.eta, flags.dim, &flags.out)?;
            for row in &calibration {
                println!(
                    "{}: no-click rate {:.6} over {} trials, noise level {:.6}",
                    row.label, row.frequency, row.trials, row.nbar
                );
            }
            println!(
                "wrote kernels.csv and calibration.json to {}",
                flags.out.display()
            );
        }
        Command::Experiment { which } => {
            let (config, out) = match which {
                ExperimentCmd::Fig1(flags) => (flags.build_config(Scenario::Fig1)?, flags.out),
                ExperimentCmd::Fig2(flags) => (flags.build_config(Scenario::Fig2)?, flags.out),
                ExperimentCmd::Fig3(flags) => (flags.build_config(Scenario::Fig3)?, flags.out),
                ExperimentCmd::Rerun { from_manifest, out } => {
                    let manifest: Manifest = serde_json::from_str(
                        &fs::read_to_string(&from_manifest)
                            .with_context(|| format!("cannot read {}", from_manifest.display()))?,
                    )
                    .with_context(|| format!("invalid {}", from_manifest.display()))?;
                    let current = env!("CARGO_PKG_VERSION");
                    if manifest.code_version != current {
                        eprintln!(
                            "note: manifest was written by version {}, replaying with {}",
                            manifest.code_version, current
                        );
                    }
                    (manifest.config, out)
                }
            };
            let outcome = run_experiment(&config, &out)?;
            print_outcome(&config, &outcome, &out);
        }
        Command::Report { dir } => {
            print!("{}", render_report(&dir)?);
        }
    }
    Ok(())
}

fn print_outcome(config: &ExperimentConfig, outcome: &RunOutcome, out: &std::path::Path) {
    println!(
        "{:?} run, seed {}: {} settings simulated",
        config.scenario,
        config.seed,
        outcome.records.len()
    );
    if let Some(walk) = &outcome.walk {
        println!(
            "noise drifted over [{:.4}, {:.4}]",
            walk.realized_min, walk.realized_max
        );
    }
    if let Some(report) = &outcome.report {
        if let Some((_, f)) = report.fidelity_trace.as_ref().and_then(|t| t.last()) {
            println!("fidelity to truth {f:.4}");
        }
        println!(
            "error bound {:.6} after {} iterations",
            report.error_bound, report.iterations_run
        );
    }
    if !outcome.sweep.is_empty() {
        println!(
            "error-bound sweep over {} trial counts",
            outcome.sweep.len()
        );
    }
    println!("artifacts in {}", out.display());
}
