//! Log-variance regression on octave vectors.
//!
//! For a fractional Brownian sheet the wavelet coefficient variance at octave
//! vector `J` is `C 2^{sum_i j_i (2 H_i + 1)}`, so regressing
//! `L_l = log2 S(J_l)` on the rows `[j_{l,1}, ..., j_{l,d}, 1]` gives slopes
//! `alpha_i = 2 H_i + 1` and intercept `log2 C`. The weighted fit minimizes
//! `(L - A alpha)' W^{-1} (L - A alpha)`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::wavelet::{analyze_octave, sample_variance, OctaveVector, WaveletFilter};

/// Relative singular-value threshold for the rank test on the design.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct RegressionSystem {
    octaves: Vec<OctaveVector>,
    design: DMatrix<f64>,
    logvars: DVector<f64>,
    axis_counts: Vec<Vec<usize>>,
}

impl RegressionSystem {
    /// Assemble from octaves, log2-variances and per-axis available counts.
    /// Rejects fewer than `d + 1` rows, a rank-deficient design and
    /// non-finite log-variances.
    pub fn from_parts(
        octaves: Vec<OctaveVector>,
        logvars: Vec<f64>,
        axis_counts: Vec<Vec<usize>>,
    ) -> Result<Self> {
        let m = octaves.len();
        if m == 0 {
            return Err(Error::InvalidInput("no octaves".into()));
        }
        let d = octaves[0].ndim();
        if octaves.iter().any(|o| o.ndim() != d) {
            return Err(Error::DimensionMismatch("octaves of mixed dimension".into()));
        }
        if logvars.len() != m || axis_counts.len() != m || axis_counts.iter().any(|c| c.len() != d) {
            return Err(Error::DimensionMismatch(format!(
                "{m} octaves, {} log-variances, {} count rows",
                logvars.len(),
                axis_counts.len()
            )));
        }
        if let Some(v) = logvars.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFiniteLogVariance(*v));
        }
        let design = DMatrix::from_fn(m, d + 1, |r, c| {
            if c < d {
                octaves[r].as_slice()[c] as f64
            } else {
                1.0
            }
        });
        let rank = numerical_rank(&design);
        if m < d + 1 || rank < d + 1 {
            return Err(Error::RankDeficient { rank, needed: d + 1 });
        }
        Ok(Self {
            octaves,
            design,
            logvars: DVector::from_vec(logvars),
            axis_counts,
        })
    }

    pub fn octaves(&self) -> &[OctaveVector] {
        &self.octaves
    }

    /// The `m x (d+1)` design `A`.
    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    pub fn logvars(&self) -> &DVector<f64> {
        &self.logvars
    }

    pub fn axis_counts(&self) -> &[Vec<usize>] {
        &self.axis_counts
    }

    /// `n_J` per octave.
    pub fn counts(&self) -> Vec<usize> {
        self.axis_counts.iter().map(|c| c.iter().product()).collect()
    }

    pub fn ndim(&self) -> usize {
        self.design.ncols() - 1
    }

    pub fn len(&self) -> usize {
        self.octaves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.octaves.is_empty()
    }

    /// Reorder rows by `perm` (row `i` of the result is row `perm[i]`).
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.len() {
            return Err(Error::DimensionMismatch("permutation length".into()));
        }
        Self::from_parts(
            perm.iter().map(|&i| self.octaves[i].clone()).collect(),
            perm.iter().map(|&i| self.logvars[i]).collect(),
            perm.iter().map(|&i| self.axis_counts[i].clone()).collect(),
        )
    }
}

fn numerical_rank(a: &DMatrix<f64>) -> usize {
    let sv = a.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    sv.iter().filter(|&&s| s > RANK_TOL * max.max(f64::MIN_POSITIVE)).count()
}

/// Compute `S(J)` at every octave and assemble the regression.
pub fn build_system(field: &Field, filter: &WaveletFilter, octaves: &[OctaveVector]) -> Result<RegressionSystem> {
    let d = field.ndim();
    if octaves.len() < d + 1 {
        return Err(Error::RankDeficient {
            rank: octaves.len().min(d + 1),
            needed: d + 1,
        });
    }
    let mut logvars = Vec::with_capacity(octaves.len());
    let mut axis_counts = Vec::with_capacity(octaves.len());
    for octave in octaves {
        let grid = analyze_octave(field, filter, octave)?;
        logvars.push(sample_variance(&grid)?.log2());
        axis_counts.push(grid.counts);
    }
    RegressionSystem::from_parts(octaves.to_vec(), logvars, axis_counts)
}

/// Weight matrix `W` of the least-squares criterion.
#[derive(Debug, Clone)]
pub enum Weight {
    Identity,
    Matrix(DMatrix<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Ols,
    Gls,
    TwoStep,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Ols => "ols",
            Method::Gls => "gls",
            Method::TwoStep => "two_step",
        }
    }
}

#[derive(Debug, Clone)]
pub struct EstimatorReport {
    /// `H_hat`, one per axis.
    pub hurst: Vec<f64>,
    /// Estimate of `log2 C`.
    pub intercept: f64,
    /// Covariance of `(H_hat, intercept / 2 - 1/2)`, `(d+1) x (d+1)`.
    pub covariance: DMatrix<f64>,
    pub method: Method,
    /// `A alpha_hat`.
    pub fitted: Vec<f64>,
    /// `L - A alpha_hat`.
    pub residuals: Vec<f64>,
    /// Set when some `H_hat_i` falls outside `(0, 1)`; values are not clamped.
    pub out_of_range: bool,
}

impl EstimatorReport {
    /// `alpha_hat = (2 H_hat + 1, log2 C)`.
    pub fn alpha(&self) -> Vec<f64> {
        self.hurst
            .iter()
            .map(|h| 2.0 * h + 1.0)
            .chain(std::iter::once(self.intercept))
            .collect()
    }
}

/// Whitening of a weight matrix through its Cholesky factor `W = C C'`.
struct Whitener {
    chol: Option<Cholesky<f64, Dyn>>,
}

impl Whitener {
    fn new(weight: &Weight, m: usize) -> Result<Self> {
        match weight {
            Weight::Identity => Ok(Self { chol: None }),
            Weight::Matrix(w) => {
                if w.nrows() != m || w.ncols() != m {
                    return Err(Error::DimensionMismatch(format!(
                        "weight is {}x{}, system has {m} rows",
                        w.nrows(),
                        w.ncols()
                    )));
                }
                check_symmetric(w, 1e-10)?;
                let chol = Cholesky::new(w.clone()).ok_or(Error::NotPositiveDefinite)?;
                let diag = chol.l_dirty().diagonal();
                let max = diag.iter().cloned().fold(0.0, f64::max);
                let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
                // W eigenvalues below ~1e-20 of the largest are not resolvable
                if !(min > 1e-10 * max) {
                    return Err(Error::NotPositiveDefinite);
                }
                Ok(Self { chol: Some(chol) })
            }
        }
    }

    /// `C^{-1} x`
    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        match &self.chol {
            None => x.clone(),
            Some(c) => c
                .l_dirty()
                .solve_lower_triangular(x)
                .expect("Cholesky factor has a positive diagonal"),
        }
    }
}

fn check_symmetric(w: &DMatrix<f64>, tol: f64) -> Result<()> {
    let scale = w.amax().max(f64::MIN_POSITIVE);
    if (w - w.transpose()).amax() > tol * scale {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(())
}

/// Solve the whitened problem by QR; returns `(alpha_hat, (A'W^{-1}A)^{-1})`.
fn solve_weighted(system: &RegressionSystem, white: &Whitener) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let a = white.apply(system.design());
    let l = white.apply(&DMatrix::from_column_slice(system.len(), 1, system.logvars().as_slice()));
    let p = a.ncols();
    let qr = a.qr();
    let r = qr.r();
    let rmax = r.diagonal().amax();
    if r.diagonal().iter().any(|v| v.abs() <= 1e-12 * rmax) {
        return Err(Error::Singular);
    }
    let qtl = qr.q().transpose() * l;
    let alpha = r
        .solve_upper_triangular(&qtl)
        .ok_or(Error::Singular)?
        .column(0)
        .into_owned();
    let rinv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or(Error::Singular)?;
    let normal_inv = &rinv * rinv.transpose();
    Ok((alpha, normal_inv))
}

/// Weighted least-squares fit of the log-variances.
///
/// With [`Weight::Identity`] this is the OLS estimator. The reported
/// covariance is `s^2 / 4 (A'W^{-1}A)^{-1}` where `s^2` is the whitened
/// residual variance (taken as 1 when no residual degrees of freedom remain),
/// i.e. the sandwich formula under the assumption `Var L = s^2 W`.
pub fn fit(system: &RegressionSystem, weight: &Weight) -> Result<EstimatorReport> {
    let m = system.len();
    let white = Whitener::new(weight, m)?;
    let (alpha, normal_inv) = solve_weighted(system, &white)?;
    let method = match weight {
        Weight::Identity => Method::Ols,
        Weight::Matrix(_) => Method::Gls,
    };

    let fitted = system.design() * &alpha;
    let residuals = system.logvars() - &fitted;
    let dof = m - (system.ndim() + 1);
    let s2 = if dof > 0 {
        let wr = white.apply(&DMatrix::from_column_slice(m, 1, residuals.as_slice()));
        wr.norm_squared() / dof as f64
    } else {
        1.0
    };
    let covariance = symmetrize(normal_inv * (0.25 * s2));
    Ok(make_report(system, alpha, covariance, method, fitted, residuals))
}

pub(crate) fn make_report(
    system: &RegressionSystem,
    alpha: DVector<f64>,
    covariance: DMatrix<f64>,
    method: Method,
    fitted: DVector<f64>,
    residuals: DVector<f64>,
) -> EstimatorReport {
    let d = system.ndim();
    let hurst: Vec<f64> = alpha.iter().take(d).map(|a| a / 2.0 - 0.5).collect();
    let out_of_range = hurst.iter().any(|h| !(*h > 0.0 && *h < 1.0));
    EstimatorReport {
        hurst,
        intercept: alpha[d],
        covariance,
        method,
        fitted: fitted.as_slice().to_vec(),
        residuals: residuals.as_slice().to_vec(),
        out_of_range,
    }
}

/// Asymptotic covariance of the estimator fitted with `weight` when the
/// log-variances have covariance `sigma_l`:
/// `1/4 (A'W^{-1}A)^{-1} A'W^{-1} Sigma_L W^{-1} A (A'W^{-1}A)^{-1}`.
pub fn asymptotic_covariance(
    system: &RegressionSystem,
    sigma_l: &DMatrix<f64>,
    weight: &Weight,
) -> Result<DMatrix<f64>> {
    let m = system.len();
    if sigma_l.nrows() != m || sigma_l.ncols() != m {
        return Err(Error::DimensionMismatch(format!(
            "Sigma_L is {}x{}, system has {m} rows",
            sigma_l.nrows(),
            sigma_l.ncols()
        )));
    }
    check_symmetric(sigma_l, 1e-10)
        .map_err(|_| Error::InvalidInput("Sigma_L is not symmetric".into()))?;
    let white = Whitener::new(weight, m)?;
    let (_, normal_inv) = solve_weighted(system, &white)?;
    // B = (A'W^{-1}A)^{-1} A' W^{-1} = normal_inv * (C^{-1}A)' C^{-1}
    let wa = white.apply(system.design());
    let b_white = &normal_inv * wa.transpose();
    // apply C^{-1} from the right: B = b_white * C^{-1}
    let b = match &white.chol {
        None => b_white,
        Some(c) => c
            .l_dirty()
            .tr_solve_lower_triangular(&b_white.transpose())
            .expect("positive diagonal")
            .transpose(),
    };
    Ok(symmetrize(&b * sigma_l * b.transpose() * 0.25))
}

pub(crate) fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ov(j: &[u32]) -> OctaveVector {
        OctaveVector::new(j.to_vec()).unwrap()
    }

    fn noiseless(octaves: &[Vec<u32>], alpha: &[f64]) -> RegressionSystem {
        let octs: Vec<OctaveVector> = octaves.iter().map(|j| ov(j)).collect();
        let d = alpha.len() - 1;
        let l = octs
            .iter()
            .map(|o| {
                o.as_slice()
                    .iter()
                    .zip(alpha)
                    .map(|(&j, a)| j as f64 * a)
                    .sum::<f64>()
                    + alpha[d]
            })
            .collect();
        let counts = octs.iter().map(|_| vec![10; d]).collect();
        RegressionSystem::from_parts(octs, l, counts).unwrap()
    }

    fn box2() -> Vec<Vec<u32>> {
        vec![vec![3, 3], vec![3, 4], vec![4, 3], vec![4, 4]]
    }

    #[test]
    fn design_rows() {
        let s = noiseless(&box2(), &[1.6, 2.4, 0.0]);
        let expect = DMatrix::from_row_slice(4, 3, &[3., 3., 1., 3., 4., 1., 4., 3., 1., 4., 4., 1.]);
        assert_eq!(s.design(), &expect);
        let s1 = noiseless(&[vec![3], vec![4], vec![5], vec![6]], &[2.0, 0.5]);
        assert_eq!(s1.design().shape(), (4, 2));
        assert_eq!(numerical_rank(s1.design()), 2);
    }

    #[test]
    fn collinear_octaves_rejected() {
        let r = RegressionSystem::from_parts(
            vec![ov(&[3, 3]), ov(&[4, 4])],
            vec![1.0, 2.0],
            vec![vec![5, 5], vec![5, 5]],
        );
        assert!(matches!(r, Err(Error::RankDeficient { .. })));
        // enough rows but still collinear
        let r = RegressionSystem::from_parts(
            vec![ov(&[3, 3]), ov(&[4, 4]), ov(&[5, 5])],
            vec![1.0, 2.0, 3.0],
            vec![vec![5, 5]; 3],
        );
        assert!(matches!(r, Err(Error::RankDeficient { rank: 2, needed: 3 })));
    }

    #[test]
    fn non_finite_logvar_rejected() {
        let r = RegressionSystem::from_parts(
            vec![ov(&[3]), ov(&[4])],
            vec![f64::NEG_INFINITY, 2.0],
            vec![vec![5], vec![5]],
        );
        assert!(matches!(r, Err(Error::NonFiniteLogVariance(_))));
    }

    #[test]
    fn exact_recovery() {
        let s = noiseless(&box2(), &[1.6, 2.4, 0.0]);
        let r = fit(&s, &Weight::Identity).unwrap();
        assert!((r.hurst[0] - 0.3).abs() < 1e-12);
        assert!((r.hurst[1] - 0.7).abs() < 1e-12);
        assert!(r.intercept.abs() < 1e-12);
        assert_eq!(r.method, Method::Ols);
        assert!(!r.out_of_range);
    }

    #[test]
    fn scaled_identity_weight_matches_ols() {
        let mut s = noiseless(&box2(), &[1.6, 2.4, 0.3]);
        s.logvars[1] += 0.05;
        s.logvars[2] -= 0.02;
        let ols = fit(&s, &Weight::Identity).unwrap();
        let gls = fit(&s, &Weight::Matrix(DMatrix::identity(4, 4) * 7.5)).unwrap();
        for (a, b) in ols.hurst.iter().zip(&gls.hurst) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(gls.method, Method::Gls);
    }

    #[test]
    fn out_of_range_flagged_not_clamped() {
        let s = noiseless(&[vec![3], vec![4], vec![5]], &[3.4, 0.0]);
        let r = fit(&s, &Weight::Identity).unwrap();
        assert!((r.hurst[0] - 1.2).abs() < 1e-12);
        assert!(r.out_of_range);
    }

    #[test]
    fn bad_weights() {
        let s = noiseless(&box2(), &[1.6, 2.4, 0.0]);
        let mut w = DMatrix::identity(4, 4);
        w[(0, 0)] = -1.0;
        assert!(matches!(fit(&s, &Weight::Matrix(w)), Err(Error::NotPositiveDefinite)));
        assert!(matches!(
            fit(&s, &Weight::Matrix(DMatrix::identity(3, 3))),
            Err(Error::DimensionMismatch(_))
        ));
        let mut asym = DMatrix::identity(4, 4);
        asym[(0, 1)] = 0.5;
        assert!(fit(&s, &Weight::Matrix(asym)).is_err());
    }

    #[test]
    fn covariance_identity_substitution() {
        let s = noiseless(&box2(), &[1.6, 2.4, 0.0]);
        let cov = asymptotic_covariance(&s, &DMatrix::identity(4, 4), &Weight::Identity).unwrap();
        let a = s.design();
        let expect = (a.transpose() * a).try_inverse().unwrap() * 0.25;
        assert!((cov - expect).amax() < 1e-12);
    }
}
