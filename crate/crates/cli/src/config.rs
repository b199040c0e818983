//! Flat run configuration with scenario defaults, config-file overlay, and
//! flag overlay, embedded verbatim in run manifests so any run can be
//! replayed exactly.

use anyhow::{bail, Context};
use photonstat::{PhotonDistribution, RandomWalkSpec};
use serde::{Deserialize, Serialize};

/// Which experiment a run reproduces. `custom` is a plain simulation with no
/// reconstruction attached, as produced by the `simulate` subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Fig1,
    Fig2,
    Fig3,
    Custom,
}

/// How a drifting-noise bin is turned into a measurement kernel: average the
/// per-shot kernels, or use one kernel at the bin's mean noise level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BinKernel {
    Samples,
    Mean,
}

/// Complete description of a run. Every field is serialized, so a manifest
/// plus the code version pins the outputs bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    /// Named state ("fock:2", "thermal:0.5", "coherent:1.3") or explicit
    /// comma-separated probabilities.
    pub truth: String,
    pub eta: f64,
    /// Equidistant noise grid, used when `nbar_list` is empty.
    pub noise_start: f64,
    pub noise_stop: f64,
    pub noise_count: usize,
    /// Explicit noise levels; overrides the grid when non-empty.
    pub nbar_list: Vec<f64>,
    /// Gaussian spread of the noise level; 0 means fixed noise.
    pub noise_variance: f64,
    pub walk_step: f64,
    pub walk_p_up: f64,
    pub walk_floor: f64,
    pub bins: usize,
    pub total_shots: u64,
    pub shots_per_setting: u64,
    pub iterations: u64,
    pub search_dim: usize,
    pub seed: u64,
    pub quad_points: usize,
    pub trace_every: u64,
    /// Per-setting trial counts for the error-bound sweep.
    pub sweep_trials: Vec<u64>,
    pub write_shots: bool,
    pub bin_kernel: BinKernel,
}

impl ExperimentConfig {
    pub fn defaults(scenario: Scenario) -> Self {
        let iterations: u64 = match scenario {
            Scenario::Fig1 => 10_000,
            Scenario::Fig2 | Scenario::Fig3 => 1_000_000,
            Scenario::Custom => 1,
        };
        Self {
            scenario,
            truth: "fock:2".into(),
            eta: 0.8,
            noise_start: 0.1,
            noise_stop: 0.95,
            noise_count: 30,
            nbar_list: Vec::new(),
            noise_variance: if scenario == Scenario::Fig2 { 0.1 } else { 0.0 },
            walk_step: 5e-4,
            walk_p_up: 0.51,
            walk_floor: 0.1,
            bins: 30,
            total_shots: 900_000,
            shots_per_setting: match scenario {
                Scenario::Fig2 => 50_000,
                _ => 10_000,
            },
            iterations,
            search_dim: 13,
            seed: 1,
            quad_points: 513,
            trace_every: (iterations / 1000).max(1),
            sweep_trials: if scenario == Scenario::Fig2 {
                vec![1_000, 2_000, 5_000, 10_000, 20_000, 50_000, 100_000]
            } else {
                Vec::new()
            },
            write_shots: false,
            bin_kernel: BinKernel::Samples,
        }
    }

    /// The noise levels a grid-style run measures at.
    pub fn noise_levels(&self) -> Vec<f64> {
        if !self.nbar_list.is_empty() {
            return self.nbar_list.clone();
        }
        if self.noise_count == 1 {
            return vec![self.noise_start];
        }
        let step = (self.noise_stop - self.noise_start) / (self.noise_count - 1) as f64;
        (0..self.noise_count)
            .map(|j| self.noise_start + j as f64 * step)
            .collect()
    }

    pub fn parse_truth(&self) -> anyhow::Result<PhotonDistribution> {
        parse_state(&self.truth, self.search_dim)
    }

    /// Check everything a run needs before any computation starts.
    pub fn validate(&self) -> anyhow::Result<()> {
        self.parse_truth()?;
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            bail!("eta must lie in (0, 1], got {}", self.eta);
        }
        if self.search_dim < 2 {
            bail!("search_dim must be at least 2, got {}", self.search_dim);
        }
        if self.scenario != Scenario::Custom && self.iterations == 0 {
            bail!("iterations must be at least 1");
        }
        if self.trace_every == 0 {
            bail!("trace_every must be at least 1");
        }
        match self.scenario {
            Scenario::Fig1 | Scenario::Fig2 | Scenario::Custom => {
                if self.noise_levels().is_empty() {
                    bail!("the noise grid is empty");
                }
                if self.shots_per_setting == 0 {
                    bail!("shots_per_setting must be at least 1");
                }
                for &nbar in &self.noise_levels() {
                    if !nbar.is_finite() || nbar < 0.0 {
                        bail!("noise level {nbar} is not a finite non-negative number");
                    }
                }
                if self.noise_variance < 0.0 || !self.noise_variance.is_finite() {
                    bail!("noise_variance must be finite and >= 0");
                }
                if self.scenario == Scenario::Fig2 {
                    if self.quad_points < 16 {
                        bail!("quad_points must be at least 16, got {}", self.quad_points);
                    }
                    if self.sweep_trials.contains(&0) {
                        bail!("sweep_trials entries must be at least 1");
                    }
                }
            }
            Scenario::Fig3 => {
                RandomWalkSpec::new(
                    self.noise_start,
                    self.walk_step,
                    self.walk_p_up,
                    self.walk_floor,
                )
                .context("invalid random walk parameters")?;
                if self.bins == 0 {
                    bail!("bins must be at least 1");
                }
                if self.total_shots < self.bins as u64 {
                    bail!(
                        "total_shots ({}) must cover at least one shot per bin ({})",
                        self.total_shots,
                        self.bins
                    );
                }
            }
        }
        Ok(())
    }

    pub fn apply(&mut self, overlay: &ConfigOverlay) {
        macro_rules! take {
            ($($field:ident),*) => {
                $(if let Some(v) = &overlay.$field { self.$field = v.clone(); })*
            };
        }
        take!(
            truth,
            eta,
            noise_start,
            noise_stop,
            noise_count,
            nbar_list,
            noise_variance,
            walk_step,
            walk_p_up,
            walk_floor,
            bins,
            total_shots,
            shots_per_setting,
            iterations,
            search_dim,
            seed,
            quad_points,
            sweep_trials,
            write_shots,
            bin_kernel
        );
        // Cadence follows the iteration budget unless pinned explicitly.
        self.trace_every = overlay
            .trace_every
            .unwrap_or((self.iterations / 1000).max(1));
    }
}

/// Partial configuration: what a config file or the command line may
/// override. Unknown keys in a file are rejected.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverlay {
    pub truth: Option<String>,
    pub eta: Option<f64>,
    pub noise_start: Option<f64>,
    pub noise_stop: Option<f64>,
    pub noise_count: Option<usize>,
    pub nbar_list: Option<Vec<f64>>,
    pub noise_variance: Option<f64>,
    pub walk_step: Option<f64>,
    pub walk_p_up: Option<f64>,
    pub walk_floor: Option<f64>,
    pub bins: Option<usize>,
    pub total_shots: Option<u64>,
    pub shots_per_setting: Option<u64>,
    pub iterations: Option<u64>,
    pub search_dim: Option<usize>,
    pub seed: Option<u64>,
    pub quad_points: Option<usize>,
    pub trace_every: Option<u64>,
    pub sweep_trials: Option<Vec<u64>>,
    pub write_shots: Option<bool>,
    pub bin_kernel: Option<BinKernel>,
}

impl ConfigOverlay {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        toml::from_str(text).context("invalid config file")
    }
}

/// Run manifest: the code version and the full configuration. Contains no
/// timestamps or absolute paths, so replaying it is deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub code_version: String,
    pub config: ExperimentConfig,
}

impl Manifest {
    pub fn new(config: ExperimentConfig) -> Self {
        Self {
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            config,
        }
    }
}

/// Parse a state description: "fock:K", "thermal:NBAR", "coherent:MEAN", or
/// an explicit comma-separated probability list. Named states are truncated
/// to `dim` entries (fock states use K + 1 when that is larger).
pub fn parse_state(spec: &str, dim: usize) -> anyhow::Result<PhotonDistribution> {
    let spec = spec.trim();
    let state = if let Some((kind, arg)) = spec.split_once(':') {
        let arg: f64 = arg
            .trim()
            .parse()
            .with_context(|| format!("invalid number in state {spec:?}"))?;
        match kind.trim() {
            "fock" => {
                let k = arg as usize;
                if arg < 0.0 || arg.fract() != 0.0 {
                    bail!("fock index must be a non-negative integer, got {arg}");
                }
                PhotonDistribution::fock(k, dim.max(k + 1))
            }
            "thermal" => PhotonDistribution::thermal(arg, dim),
            "coherent" => PhotonDistribution::coherent(arg, dim),
            other => bail!("unknown state kind {other:?} (use fock, thermal, or coherent)"),
        }
    } else {
        let probs: Vec<f64> = spec
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<f64>()
                    .with_context(|| format!("invalid probability {tok:?}"))
            })
            .collect::<anyhow::Result<_>>()?;
        PhotonDistribution::from_probs(probs)
    };
    state.with_context(|| format!("invalid state {spec:?}"))
}
