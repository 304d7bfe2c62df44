//! Anisotropic fractional Brownian sheets: exact synthesis, tensor-product
//! wavelet analysis and estimation of the Hurst vector `H = (H_1, ..., H_d)`
//! by regression of log-variances of wavelet coefficients on octave vectors.
//!
//! The pipeline is
//!
//! 1. [`synthesis`]: circulant-embedding generation of the fractional Gaussian
//!    noise sheet, integrated into a fractional Brownian sheet;
//! 2. [`wavelet`]: Daubechies filters and boundary-free tensor-product
//!    detail coefficients at every octave vector of a box;
//! 3. [`estimator`]: ordinary / weighted least squares on `log2 S(J)`;
//! 4. [`covmodel`]: the model covariance `G(H)` of the log-variances, used by
//!    the two-step estimator;
//! 5. [`harness`]: Monte Carlo driver, summaries and file formats.

pub mod covmodel;
pub mod error;
pub mod estimator;
pub mod field;
pub mod harness;
pub mod synthesis;
pub mod wavelet;

pub use covmodel::{two_step_fit, CovModel, CovModelConfig, LogVarianceModel};
pub use error::{Error, FormatError, Result};
pub use estimator::{build_system, fit, EstimatorReport, Method, RegressionSystem, Weight};
pub use field::Field;
pub use synthesis::{FbsSynthesizer, HurstVector};
pub use wavelet::{
    analyze_octave, make_daubechies, octave_box, sample_variance, CoefficientGrid, OctaveVector,
    WaveletFilter,
};
