//! TOML run configuration. Each subcommand reads its own section; a missing
//! section falls back to the documented default shown in the README.

use growth_lab::dataio::{SeriesSource, SynthConfig};
use growth_lab::kinetics::{ClosureMode, DriftMode, MomentFn};
use growth_lab::sim_core::{MapKind, NoiseLaw};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::error::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub simulate: Option<SimulateConfig>,
    pub kinetics: Option<KineticsConfig>,
    pub estimate: Option<EstimateConfig>,
    pub synth: Option<SynthConfig>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("could not read {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::validation(format!("config {}: {e}", path.display())))
    }
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub map: MapKind,
    /// State interval [lo, hi].
    pub state_bounds: [f64; 2],
    pub n_individuals: u32,
    /// Periods discarded before a stationary draw is taken.
    pub burn_in: usize,
    /// Stationary draws per extreme start.
    pub n_samples: usize,
    /// Length of the sample trajectory written to trajectory.csv.
    pub trajectory_horizon: usize,
    /// Two-sample KS distance below which the extreme-start samples are
    /// declared to share one stationary law.
    pub ks_threshold: f64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            map: MapKind::Affine {
                slope: NoiseLaw::Uniform { lo: 0.0, hi: 1.0 },
                intercept: NoiseLaw::Uniform { lo: 0.0, hi: 0.5 },
            },
            state_bounds: [0.0, 2.0],
            n_individuals: 1,
            burn_in: 1000,
            n_samples: 100_000,
            trajectory_horizon: 200,
            ks_threshold: 0.02,
        }
    }
}

// ---------------------------------------------------------------------------
// kinetics
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KineticsMode {
    /// Integrate the master equation and the mean-field system.
    Evolve,
    /// Emit the Gamma density family curves instead of integrating.
    GammaFigure,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaPair {
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeanFieldConfig {
    /// Total first jump moment of the full generator (drift plus jumps).
    pub a1: MomentFn,
    /// Total second jump moment.
    pub a2: MomentFn,
    pub closure: ClosureMode,
    /// Initial mean; defaults to the initial density's mean.
    pub m0: Option<f64>,
    /// Initial variance; defaults to the initial density's variance.
    pub sigma2_0: Option<f64>,
}

impl Default for MeanFieldConfig {
    fn default() -> Self {
        // Total moments of unit-rate exponential jumps with linear-decay
        // release: a1(y) = 1 − y, a2(y) = 2.
        MeanFieldConfig {
            a1: MomentFn::Affine {
                intercept: 1.0,
                slope: -1.0,
            },
            a2: MomentFn::Constant { value: 2.0 },
            closure: ClosureMode::CurvatureCorrected,
            m0: None,
            sigma2_0: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KineticsConfig {
    pub mode: KineticsMode,
    /// Gamma shape/rate of the initial density.
    pub initial: GammaPair,
    pub x_max: f64,
    pub dx: f64,
    /// Rate of the exponential jump kernel.
    pub kernel_beta: f64,
    /// Jump intensity.
    pub alpha: f64,
    pub drift: DriftMode,
    pub dt: f64,
    pub horizon: f64,
    pub n_snapshots: usize,
    pub mean_field: MeanFieldConfig,
    /// (α, β) pairs drawn in gamma_figure mode.
    pub gamma_curves: Vec<GammaPair>,
}

impl Default for KineticsConfig {
    fn default() -> Self {
        KineticsConfig {
            mode: KineticsMode::Evolve,
            initial: GammaPair {
                alpha: 3.0,
                beta: 2.0,
            },
            // Wide enough that the relaxed density's mean (~1) satisfies the
            // 10x-coverage precondition of the stationary residual.
            x_max: 12.0,
            dx: 0.01,
            kernel_beta: 1.0,
            alpha: 1.0,
            drift: DriftMode::LinearDecay,
            dt: 2.5e-4,
            horizon: 15.0,
            n_snapshots: 6,
            mean_field: MeanFieldConfig::default(),
            gamma_curves: vec![
                GammaPair {
                    alpha: 1.8,
                    beta: 0.09,
                },
                GammaPair {
                    alpha: 1.6,
                    beta: 0.04,
                },
            ],
        }
    }
}

// ---------------------------------------------------------------------------
// estimate
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimateConfig {
    /// GDP series source; the --gdp flag overrides it.
    pub gdp: Option<SeriesSource>,
    /// Income histogram source; the --income flag overrides it.
    pub income: Option<SeriesSource>,
    /// Cache directory for remote fetches; defaults to <out>/cache.
    pub cache_dir: Option<PathBuf>,
    pub timeout_secs: u64,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        EstimateConfig {
            gdp: None,
            income: None,
            cache_dir: None,
            timeout_secs: 30,
        }
    }
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

pub fn default_synth_config() -> SynthConfig {
    SynthConfig::default_economy()
}
