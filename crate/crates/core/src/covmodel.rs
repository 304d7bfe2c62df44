//! Model covariance `G(H)` of the log-variance vector and the two-step
//! estimator.
//!
//! For Gaussian coefficients `cov(X^2, Y^2) = 2 cov(X, Y)^2`, so to first
//! order in `1/n`
//!
//! ```text
//! cov(log2 S(J_h), log2 S(J_l))
//!   = (log2 e)^2 sum_{K_h, K_l} 2 cov(d(J_h,K_h), d(J_l,K_l))^2
//!     / (n_{J_h} n_{J_l} E d^2(J_h) E d^2(J_l)).
//! ```
//!
//! The coefficient covariance is a product over axes of one-dimensional
//! fractional Brownian motion terms
//! `c_i = int int psi_{j,k}(t) psi_{j',k'}(s) (-|t - s|^{2H_i} / 2) dt ds`,
//! and the translation sets are boxes, so the double sum over `K` factorizes
//! into a product of per-axis double sums.
//!
//! Writing `j' = j + delta` (`delta >= 0`) and `m = k - 2^delta k'`,
//! `c = 2^{j (2H+1)} kappa_delta(m)` with
//! `kappa_delta(m) = 2^{delta/2} int int psi(u) psi(v) (-|u - 2^delta v + m|^{2H} / 2) du dv`.
//! `kappa` is evaluated by a rectangle rule on the dyadic grid of the cascade
//! table, through the filter-only correlation
//! `R_delta[w] = sum_{a - 2^delta b = w} psi[a] psi[b]`.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::estimator::{self, asymptotic_covariance, fit, EstimatorReport, Method, RegressionSystem, Weight};
use crate::synthesis::HurstVector;
use crate::wavelet::{cascade_table, OctaveVector, PsiTable, WaveletFilter};

pub const DEFAULT_CASCADE_DEPTH: u32 = 10;
pub const DEFAULT_LAG_CAP: usize = 64;

/// Pilot estimates outside `(0, 1)` are projected into this range before `G`
/// is evaluated.
pub const PILOT_CLAMP: (f64, f64) = (0.01, 0.99);

/// Kernel values are cached on a `1e-6` grid in `H`.
const H_QUANTUM: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CovModelConfig {
    /// Dyadic resolution `2^-depth` of the `psi` table.
    pub cascade_depth: u32,
    /// Largest `|m|` kept, in translation steps of the finer of the two
    /// octaves; correlations beyond it are set to zero.
    pub lag_cap: usize,
}

impl Default for CovModelConfig {
    fn default() -> Self {
        Self {
            cascade_depth: DEFAULT_CASCADE_DEPTH,
            lag_cap: DEFAULT_LAG_CAP,
        }
    }
}

impl CovModelConfig {
    pub fn validate(&self, filter: &WaveletFilter) -> Result<()> {
        if !(6..=16).contains(&self.cascade_depth) {
            return Err(Error::Config(format!(
                "cascade_depth must be in 6..=16, got {}",
                self.cascade_depth
            )));
        }
        let min_cap = 2 * filter.support_len();
        if self.lag_cap < min_cap {
            return Err(Error::Config(format!(
                "lag_cap must be at least {min_cap}, got {}",
                self.lag_cap
            )));
        }
        Ok(())
    }
}

/// Anything that can produce the `m x m` covariance model of the
/// log-variances at a given `H`.
pub trait LogVarianceModel: Sync {
    fn g_matrix(&self, hurst: &HurstVector, octaves: &[OctaveVector], axis_counts: &[Vec<usize>])
        -> Result<DMatrix<f64>>;
}

/// Always returns the identity; the two-step fit then reduces to OLS.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityModel;

impl LogVarianceModel for IdentityModel {
    fn g_matrix(&self, _: &HurstVector, octaves: &[OctaveVector], _: &[Vec<usize>]) -> Result<DMatrix<f64>> {
        Ok(DMatrix::identity(octaves.len(), octaves.len()))
    }
}

/// Quadrature model of `G(H)` for one wavelet. Cheap to share: the `psi`
/// table and the correlation tables are built once, kernel values are memoized.
pub struct CovModel {
    config: CovModelConfig,
    psi: PsiTable,
    correlations: RwLock<HashMap<u32, Arc<Vec<f64>>>>,
    kernels: RwLock<HashMap<(i64, u32, i64), f64>>,
}

impl std::fmt::Debug for CovModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CovModel")
            .field("config", &self.config)
            .field("psi_len", &self.psi.values().len())
            .finish()
    }
}

impl CovModel {
    pub fn new(filter: &WaveletFilter, config: CovModelConfig) -> Result<Self> {
        config.validate(filter)?;
        let psi = cascade_table(filter, config.cascade_depth)?;
        Ok(Self {
            config,
            psi,
            correlations: RwLock::new(HashMap::new()),
            kernels: RwLock::new(HashMap::new()),
        })
    }

    pub fn config(&self) -> CovModelConfig {
        self.config
    }

    /// `R_delta`, indexed by `w + 2^delta (len - 1)`.
    fn correlation(&self, delta: u32) -> Arc<Vec<f64>> {
        if let Some(r) = self.correlations.read().unwrap().get(&delta) {
            return Arc::clone(r);
        }
        let psi = self.psi.values();
        let n = psi.len();
        let stride = 1usize << delta;
        let offset = stride * (n - 1);
        let mut r = vec![0.0; offset + n];
        for (b, &pb) in psi.iter().enumerate() {
            if pb == 0.0 {
                continue;
            }
            let base = offset - stride * b;
            for (a, &pa) in psi.iter().enumerate() {
                r[base + a] += pa * pb;
            }
        }
        let r = Arc::new(r);
        self.correlations
            .write()
            .unwrap()
            .entry(delta)
            .or_insert_with(|| Arc::clone(&r))
            .clone()
    }

    /// `kappa_delta(m)` at the quantized exponent.
    fn kappa(&self, h_key: i64, delta: u32, m: i64) -> f64 {
        let key = (h_key, delta, if delta == 0 { m.abs() } else { m });
        if let Some(&v) = self.kernels.read().unwrap().get(&key) {
            return v;
        }
        let h = h_key as f64 * H_QUANTUM;
        let two_h = 2.0 * h;
        let r = self.correlation(delta);
        let step = self.psi.step();
        let stride = 1i64 << delta;
        let offset = stride * (self.psi.values().len() as i64 - 1);
        let shift = key.2 as f64;
        let mut acc = 0.0;
        for (idx, &rw) in r.iter().enumerate() {
            if rw == 0.0 {
                continue;
            }
            let x = (idx as i64 - offset) as f64 * step + shift;
            acc += rw * x.abs().powf(two_h);
        }
        let value = -0.5 * acc * step * step * (delta as f64 * 0.5).exp2();
        self.kernels.write().unwrap().insert(key, value);
        value
    }

    /// Covariance of the fBm wavelet coefficients `d(j, k)` and `d(j2, k2)`
    /// for Hurst exponent `h`; zero beyond the lag cap.
    pub fn kernel_cross_cov_1d(&self, h: f64, j: u32, k: i64, j2: u32, k2: i64) -> f64 {
        let (jf, kf, jc, kc) = if j <= j2 { (j, k, j2, k2) } else { (j2, k2, j, k) };
        let delta = jc - jf;
        let m = kf - (kc << delta);
        if m.unsigned_abs() as usize > self.config.lag_cap {
            return 0.0;
        }
        let h_key = quantize(h);
        let hq = h_key as f64 * H_QUANTUM;
        (jf as f64 * (2.0 * hq + 1.0)).exp2() * self.kappa(h_key, delta, m)
    }

    /// `sum_{k<n1, k'<n2} c(j1,k; j2,k')^2 / (n1 n2 E d^2(j1) E d^2(j2))`
    /// along one axis.
    fn axis_factor(&self, h: f64, j1: u32, n1: usize, j2: u32, n2: usize) -> f64 {
        let (jf, nf, jc, nc) = if j1 <= j2 { (j1, n1, j2, n2) } else { (j2, n2, j1, n1) };
        let delta = jc - jf;
        let h_key = quantize(h);
        let hq = h_key as f64 * H_QUANTUM;
        let cap = self.config.lag_cap as i64;
        let stride = 1i64 << delta;

        let var0 = self.kappa(h_key, 0, 0);
        let lo = -(stride * (nc as i64 - 1));
        let hi = nf as i64 - 1;
        let mut sum = 0.0;
        let mut kappas: Vec<Option<f64>> = vec![None; (hi - lo + 1) as usize];
        for k in 0..nf as i64 {
            for kc in 0..nc as i64 {
                let m = k - stride * kc;
                if m.abs() > cap {
                    continue;
                }
                let slot = &mut kappas[(m - lo) as usize];
                let v = *slot.get_or_insert_with(|| self.kappa(h_key, delta, m));
                sum += v * v;
            }
        }
        sum / (nf as f64 * nc as f64 * var0 * var0) * (-(delta as f64) * (2.0 * hq + 1.0)).exp2()
    }

    /// The `(h, l)` entry of `G(H)` for octaves `oct_h`, `oct_l` with per-axis
    /// available counts `counts_h`, `counts_l`.
    pub fn variance_of_log_s(
        &self,
        hurst: &HurstVector,
        oct_h: &OctaveVector,
        counts_h: &[usize],
        oct_l: &OctaveVector,
        counts_l: &[usize],
    ) -> Result<f64> {
        let d = hurst.ndim();
        if [oct_h.ndim(), oct_l.ndim(), counts_h.len(), counts_l.len()]
            .iter()
            .any(|&n| n != d)
        {
            return Err(Error::DimensionMismatch("octave / count / Hurst dimensions".into()));
        }
        if counts_h.iter().chain(counts_l).any(|&n| n == 0) {
            return Err(Error::InvalidInput("available counts must be positive".into()));
        }
        let prod: f64 = (0..d)
            .map(|i| {
                self.axis_factor(
                    hurst.as_slice()[i],
                    oct_h.as_slice()[i],
                    counts_h[i],
                    oct_l.as_slice()[i],
                    counts_l[i],
                )
            })
            .product();
        Ok(std::f64::consts::LOG2_E.powi(2) * 2.0 * prod)
    }
}

fn quantize(h: f64) -> i64 {
    (h / H_QUANTUM).round() as i64
}

impl LogVarianceModel for CovModel {
    fn g_matrix(
        &self,
        hurst: &HurstVector,
        octaves: &[OctaveVector],
        axis_counts: &[Vec<usize>],
    ) -> Result<DMatrix<f64>> {
        let m = octaves.len();
        if axis_counts.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "{m} octaves but {} count rows",
                axis_counts.len()
            )));
        }
        let d = hurst.ndim();
        // per-axis factors repeat across the box; memoize on the axis data
        let mut factors: HashMap<(usize, u32, usize, u32, usize), f64> = HashMap::new();
        let mut g = DMatrix::zeros(m, m);
        for a in 0..m {
            for b in a..m {
                if octaves[a].ndim() != d || octaves[b].ndim() != d {
                    return Err(Error::DimensionMismatch("octave / Hurst dimensions".into()));
                }
                let mut prod = 1.0;
                for i in 0..d {
                    let (ja, na) = (octaves[a].as_slice()[i], axis_counts[a][i]);
                    let (jb, nb) = (octaves[b].as_slice()[i], axis_counts[b][i]);
                    if na == 0 || nb == 0 {
                        return Err(Error::InvalidInput("available counts must be positive".into()));
                    }
                    let key = if (ja, na) <= (jb, nb) { (i, ja, na, jb, nb) } else { (i, jb, nb, ja, na) };
                    prod *= *factors
                        .entry(key)
                        .or_insert_with(|| self.axis_factor(hurst.as_slice()[i], ja, na, jb, nb));
                }
                let v = std::f64::consts::LOG2_E.powi(2) * 2.0 * prod;
                g[(a, b)] = v;
                g[(b, a)] = v;
            }
        }
        repair_positive_definite(g)
    }
}

/// Symmetrize and lift eigenvalues below `1e-12 * max` to that floor; more
/// than 1% of the eigenmass clipped means the model is unusable.
pub fn repair_positive_definite(g: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let g = estimator::symmetrize(g);
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::ModelDegenerate("non-finite entries".into()));
    }
    let eig = SymmetricEigen::new(g.clone());
    let max = eig.eigenvalues.amax();
    if !(max > 0.0) {
        return Err(Error::ModelDegenerate("no positive eigenvalue".into()));
    }
    let floor = 1e-12 * max;
    let total: f64 = eig.eigenvalues.iter().map(|v| v.abs()).sum();
    let clipped: f64 = eig
        .eigenvalues
        .iter()
        .filter(|&&v| v < floor)
        .map(|&v| floor - v)
        .sum();
    if clipped == 0.0 {
        return Ok(g);
    }
    if clipped > 0.01 * total {
        return Err(Error::ModelDegenerate(format!(
            "{:.3}% of eigenmass below the positivity floor",
            100.0 * clipped / total
        )));
    }
    let lifted = eig.eigenvalues.map(|v| v.max(floor));
    let v = &eig.eigenvectors;
    Ok(estimator::symmetrize(v * DMatrix::from_diagonal(&lifted) * v.transpose()))
}

/// Both stages of the two-step estimator.
#[derive(Debug, Clone)]
pub struct TwoStepOutcome {
    /// Stage one, with the sandwich covariance under `G(H_hat_o)`.
    pub ols: EstimatorReport,
    /// Stage two, weighted by `G(H_hat_o)`.
    pub two_step: EstimatorReport,
    /// `G` evaluated at the (projected) pilot.
    pub g: DMatrix<f64>,
}

/// Fit OLS, evaluate `G` at the pilot (projected into [`PILOT_CLAMP`]) and
/// refit with `G` as the weight. One round, no iteration.
pub fn two_step_fit_detailed(system: &RegressionSystem, model: &dyn LogVarianceModel) -> Result<TwoStepOutcome> {
    let mut ols = fit(system, &Weight::Identity)?;
    let pilot = HurstVector::new(
        ols.hurst
            .iter()
            .map(|h| if h.is_finite() { h.clamp(PILOT_CLAMP.0, PILOT_CLAMP.1) } else { 0.5 })
            .collect(),
    )?;
    let g = model.g_matrix(&pilot, system.octaves(), system.axis_counts())?;
    ols.covariance = asymptotic_covariance(system, &g, &Weight::Identity)?;

    let weight = Weight::Matrix(g.clone());
    let mut two_step = fit(system, &weight)?;
    two_step.method = Method::TwoStep;
    two_step.covariance = asymptotic_covariance(system, &g, &weight)?;
    Ok(TwoStepOutcome { ols, two_step, g })
}

pub fn two_step_fit(system: &RegressionSystem, model: &dyn LogVarianceModel) -> Result<EstimatorReport> {
    two_step_fit_detailed(system, model).map(|o| o.two_step)
}
