use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::covmodel::CovModelConfig;
use crate::error::{Error, Result};
use crate::synthesis::HurstVector;
use crate::wavelet::{make_daubechies, max_octave, octave_box, OctaveVector, WaveletFilter};

pub const DEFAULT_ORDER: usize = 3;
pub const DEFAULT_OCTAVE_LOW: u32 = 3;
/// Automatic upper octaves keep at least this many available coefficients.
pub const MIN_AUTO_COUNT: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Ols,
    TwoStep,
}

impl EstimatorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorKind::Ols => "ols",
            EstimatorKind::TwoStep => "two_step",
        }
    }
}

fn default_order() -> usize {
    DEFAULT_ORDER
}

fn default_estimators() -> Vec<EstimatorKind> {
    vec![EstimatorKind::Ols, EstimatorKind::TwoStep]
}

fn default_depth() -> u32 {
    CovModelConfig::default().cascade_depth
}

fn default_lag_cap() -> usize {
    CovModelConfig::default().lag_cap
}

/// One Monte Carlo experiment. Read from a single JSON document; unknown keys
/// are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dimension: usize,
    pub hurst: Vec<f64>,
    /// Sheet shape `T_1, ..., T_d`.
    pub dims: Vec<usize>,
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_order")]
    pub wavelet_order: usize,
    /// Lower octave corner; 3 per axis when absent.
    #[serde(default)]
    pub octave_low: Option<Vec<u32>>,
    /// Upper octave corner; when absent, the largest octave per axis with at
    /// least four available coefficients.
    #[serde(default)]
    pub octave_high: Option<Vec<u32>>,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<EstimatorKind>,
    #[serde(default = "default_depth")]
    pub cascade_depth: u32,
    #[serde(default = "default_lag_cap")]
    pub lag_cap: usize,
    #[serde(default)]
    pub summary_path: Option<PathBuf>,
    #[serde(default)]
    pub raw_path: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(hurst: Vec<f64>, dims: Vec<usize>, replicates: usize, seed: u64) -> Self {
        Self {
            dimension: hurst.len(),
            hurst,
            dims,
            replicates,
            seed,
            wavelet_order: DEFAULT_ORDER,
            octave_low: None,
            octave_high: None,
            estimators: default_estimators(),
            cascade_depth: default_depth(),
            lag_cap: default_lag_cap(),
            summary_path: None,
            raw_path: None,
        }
    }

    /// Desk-scale 2D preset: 256 x 256, 100 replicates.
    pub fn preset_2d() -> Self {
        Self::new(vec![0.8, 0.8], vec![256, 256], 100, 1)
    }

    /// Desk-scale 3D preset: 64^3, 50 replicates. The lattice is too small for
    /// the default lower octave, so the box starts at octave 1.
    pub fn preset_3d() -> Self {
        let mut c = Self::new(vec![0.6, 0.7, 0.8], vec![64, 64, 64], 50, 1);
        c.octave_low = Some(vec![1, 1, 1]);
        c
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn with_estimators(mut self, estimators: Vec<EstimatorKind>) -> Self {
        self.estimators = estimators;
        self
    }

    pub fn with_octaves(mut self, low: Option<Vec<u32>>, high: Option<Vec<u32>>) -> Self {
        self.octave_low = low;
        self.octave_high = high;
        self
    }

    /// Validate and derive everything a run needs.
    pub fn resolve(&self) -> Result<ResolvedConfig> {
        let cfg = |msg: String| Error::Config(msg);
        let d = self.dimension;
        if d == 0 {
            return Err(cfg("dimension must be at least 1".into()));
        }
        if self.hurst.len() != d || self.dims.len() != d {
            return Err(cfg(format!(
                "dimension {d} but {} Hurst values and {} lattice lengths",
                self.hurst.len(),
                self.dims.len()
            )));
        }
        if self.replicates == 0 {
            return Err(cfg("replicates must be at least 1".into()));
        }
        if self.wavelet_order < 2 {
            return Err(cfg(format!(
                "wavelet_order must be at least 2, got {}",
                self.wavelet_order
            )));
        }
        if self.estimators.is_empty() {
            return Err(cfg("estimator set is empty".into()));
        }
        let hurst = HurstVector::new(self.hurst.clone()).map_err(|e| cfg(e.to_string()))?;
        let filter = make_daubechies(self.wavelet_order).map_err(|e| cfg(e.to_string()))?;
        let cov = CovModelConfig {
            cascade_depth: self.cascade_depth,
            lag_cap: self.lag_cap,
        };
        cov.validate(&filter)?;
        let octaves = resolve_octaves(
            &self.dims,
            &filter,
            self.octave_low.as_deref(),
            self.octave_high.as_deref(),
        )?;
        Ok(ResolvedConfig {
            hurst,
            filter,
            octaves,
            cov,
        })
    }
}

#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub hurst: HurstVector,
    pub filter: WaveletFilter,
    pub octaves: Vec<OctaveVector>,
    pub cov: CovModelConfig,
}

/// The octave box for a lattice, with the defaults filled in. Errors when the
/// box is empty, too small for `d + 1` parameters or not supported by the
/// lattice.
pub fn resolve_octaves(
    dims: &[usize],
    filter: &WaveletFilter,
    low: Option<&[u32]>,
    high: Option<&[u32]>,
) -> Result<Vec<OctaveVector>> {
    let d = dims.len();
    let low = match low {
        Some(l) => l.to_vec(),
        None => vec![DEFAULT_OCTAVE_LOW; d],
    };
    let high = match high {
        Some(h) => h.to_vec(),
        None => dims
            .iter()
            .map(|&t| {
                max_octave(t, filter, MIN_AUTO_COUNT).ok_or_else(|| {
                    Error::Config(format!(
                        "axis of length {t} has no octave with {MIN_AUTO_COUNT} available coefficients"
                    ))
                })
            })
            .collect::<Result<_>>()?,
    };
    if low.len() != d || high.len() != d {
        return Err(Error::Config(format!("octave corners must have {d} entries")));
    }
    let low = OctaveVector::new(low).map_err(|e| Error::Config(e.to_string()))?;
    let high = OctaveVector::new(high).map_err(|e| Error::Config(e.to_string()))?;
    let octaves = octave_box(&low, &high).map_err(|e| Error::Config(e.to_string()))?;
    if octaves.len() < d + 1 {
        return Err(Error::Config(format!(
            "octave box {low}..{high} has {} octaves, need at least {}",
            octaves.len(),
            d + 1
        )));
    }
    // the upper corner bounds every count from below
    high.counts_for(dims, filter)
        .map_err(|e| Error::Config(format!("octave box {low}..{high} does not fit the lattice: {e}")))?;
    Ok(octaves)
}
