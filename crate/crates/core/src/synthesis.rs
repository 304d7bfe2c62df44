//! Exact synthesis of fractional Brownian sheets.
//!
//! The increments of a fractional Brownian sheet on the unit lattice form a
//! stationary field whose covariance is the tensor product of per-axis
//! fractional Gaussian noise autocovariances. Each axis factor is embedded in a
//! circulant of length `2(n-1)`; the product of the per-axis spectra is the
//! spectrum of the `d`-dimensional block-circulant embedding, so one complex
//! Gaussian draw per torus mode plus one `d`-dimensional FFT yields two
//! independent noise sheets (real and imaginary parts). Cumulative sums along
//! every axis turn a noise sheet into the sheet itself, pinned to zero on the
//! coordinate hyperplanes.

use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::field::{checked_volume, increment, map_lanes, Field};

/// Relative tolerance below which negative embedding eigenvalues are treated
/// as rounding noise and clipped to zero.
pub const EIGEN_CLIP: f64 = 1e-10;

/// Hurst exponents, one per axis, each strictly inside `(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HurstVector(Vec<f64>);

impl HurstVector {
    pub fn new(h: Vec<f64>) -> Result<Self> {
        if h.is_empty() {
            return Err(Error::InvalidInput("Hurst vector needs at least one axis".into()));
        }
        if let Some(v) = h.iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
            return Err(Error::InvalidInput(format!("Hurst exponent {v} outside (0, 1)")));
        }
        Ok(Self(h))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn ndim(&self) -> usize {
        self.0.len()
    }
}

/// Autocovariance of unit-step fractional Gaussian noise,
/// `(|k+1|^{2h} - 2|k|^{2h} + |k-1|^{2h}) / 2`.
pub fn fgn_autocovariance(h: f64, lag: i64) -> f64 {
    let two_h = 2.0 * h;
    let k = lag.unsigned_abs() as f64;
    0.5 * ((k + 1.0).powf(two_h) - 2.0 * k.powf(two_h) + (k - 1.0).abs().powf(two_h))
}

/// Eigenvalues of the minimal circulant embedding (length `2(n-1)`) of the
/// `n x n` fGn covariance, negatives within [`EIGEN_CLIP`] clipped to zero.
pub fn circulant_eigenvalues_1d(h: f64, n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("embedding needs n >= 2, got {n}")));
    }
    let m = 2 * (n - 1);
    let mut row: Vec<Complex64> = (0..m)
        .map(|k| {
            let lag = if k < n { k } else { m - k };
            Complex64::new(fgn_autocovariance(h, lag as i64), 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(m).process(&mut row);
    let mut eig: Vec<f64> = row.iter().map(|c| c.re).collect();
    let max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < -EIGEN_CLIP * max {
        return Err(Error::EmbeddingNotNonnegative { min, max });
    }
    for v in &mut eig {
        *v = v.max(0.0);
    }
    Ok(eig)
}

/// Per-axis eigenvalue arrays of the block-circulant embedding.
#[derive(Debug, Clone)]
pub struct EmbeddingSpectrum {
    pub axes: Vec<Vec<f64>>,
}

impl EmbeddingSpectrum {
    pub fn new(hurst: &HurstVector, noise_dims: &[usize]) -> Result<Self> {
        if hurst.ndim() != noise_dims.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} Hurst exponents for {} axes",
                hurst.ndim(),
                noise_dims.len()
            )));
        }
        let axes = hurst
            .as_slice()
            .iter()
            .zip(noise_dims)
            .map(|(&h, &n)| circulant_eigenvalues_1d(h, n))
            .collect::<Result<_>>()?;
        Ok(Self { axes })
    }

    pub fn embed_dims(&self) -> Vec<usize> {
        self.axes.iter().map(Vec::len).collect()
    }
}

/// Reusable generator for one `(H, dims)` pair: the spectrum and FFT plans are
/// computed once and shared read-only across replicates.
pub struct FbsSynthesizer {
    hurst: HurstVector,
    noise_dims: Vec<usize>,
    embed_dims: Vec<usize>,
    /// `sqrt(lambda_i / M_i)` per axis; the product over axes is the mode std.
    mode_scale: Vec<Vec<f64>>,
    plans: Vec<Arc<dyn Fft<f64>>>,
}

impl FbsSynthesizer {
    /// Generator for noise sheets of shape `noise_dims` (sheets have one more
    /// sample per axis).
    pub fn for_noise(hurst: HurstVector, noise_dims: Vec<usize>) -> Result<Self> {
        if let Some(&n) = noise_dims.iter().find(|&&n| n < 2) {
            return Err(Error::InvalidInput(format!("noise axis length {n} < 2")));
        }
        let spectrum = EmbeddingSpectrum::new(&hurst, &noise_dims)?;
        let embed_dims = spectrum.embed_dims();
        checked_volume(&embed_dims)
            .ok_or_else(|| Error::InvalidInput("embedding volume overflows".into()))?;
        let mode_scale = spectrum
            .axes
            .iter()
            .map(|eig| {
                let m = eig.len() as f64;
                eig.iter().map(|&l| (l / m).sqrt()).collect()
            })
            .collect();
        let mut planner = FftPlanner::new();
        let plans = embed_dims.iter().map(|&m| planner.plan_fft_forward(m)).collect();
        Ok(Self {
            hurst,
            noise_dims,
            embed_dims,
            mode_scale,
            plans,
        })
    }

    /// Generator for sheets of shape `sheet_dims` (each axis at least 3).
    pub fn for_sheet(hurst: HurstVector, sheet_dims: &[usize]) -> Result<Self> {
        let noise_dims = sheet_dims
            .iter()
            .map(|&t| {
                t.checked_sub(1)
                    .filter(|&n| n >= 2)
                    .ok_or_else(|| Error::InvalidInput(format!("sheet axis length {t} < 3")))
            })
            .collect::<Result<_>>()?;
        Self::for_noise(hurst, noise_dims)
    }

    pub fn hurst(&self) -> &HurstVector {
        &self.hurst
    }

    pub fn noise_dims(&self) -> &[usize] {
        &self.noise_dims
    }

    pub fn sheet_dims(&self) -> Vec<usize> {
        self.noise_dims.iter().map(|n| n + 1).collect()
    }

    /// Two independent fGn sheets from one complex draw, deterministic in `seed`.
    pub fn noise_pair(&self, seed: u64) -> (Field, Field) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let total: usize = self.embed_dims.iter().product();
        let d = self.embed_dims.len();

        let mut buf = Vec::with_capacity(total);
        let mut idx = vec![0usize; d];
        for _ in 0..total {
            let scale: f64 = idx
                .iter()
                .zip(&self.mode_scale)
                .map(|(&i, s)| s[i])
                .product();
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            buf.push(Complex64::new(re * scale, im * scale));
            increment(&mut idx, &self.embed_dims);
        }

        self.fft_truncated(&mut buf);

        let out_len: usize = self.noise_dims.iter().product();
        let mut re = Vec::with_capacity(out_len);
        let mut im = Vec::with_capacity(out_len);
        let mut idx = vec![0usize; d];
        for _ in 0..out_len {
            let flat = idx
                .iter()
                .zip(&self.embed_dims)
                .fold(0, |acc, (&i, &m)| acc * m + i);
            re.push(buf[flat].re);
            im.push(buf[flat].im);
            increment(&mut idx, &self.noise_dims);
        }
        let truth = Some(self.hurst.as_slice().to_vec());
        (
            Field::new(self.noise_dims.clone(), re)
                .expect("noise dims validated")
                .with_hurst_truth(truth.clone()),
            Field::new(self.noise_dims.clone(), im)
                .expect("noise dims validated")
                .with_hurst_truth(truth),
        )
    }

    /// Two independent fractional Brownian sheets, deterministic in `seed`.
    pub fn sample_pair(&self, seed: u64) -> (Field, Field) {
        let (a, b) = self.noise_pair(seed);
        (integrate_to_fbs(&a), integrate_to_fbs(&b))
    }

    /// In-place multi-dimensional DFT that only finishes the lanes whose
    /// indices on already transformed axes fall inside the kept corner.
    fn fft_truncated(&self, buf: &mut [Complex64]) {
        let d = self.embed_dims.len();
        let strides: Vec<usize> = (0..d)
            .map(|a| self.embed_dims[a + 1..].iter().product())
            .collect();
        let mut lane = Vec::new();
        let mut scratch = Vec::new();
        for axis in (0..d).rev() {
            let m = self.embed_dims[axis];
            let plan = &self.plans[axis];
            scratch.resize(plan.get_inplace_scratch_len(), Complex64::new(0.0, 0.0));
            // lane extents: kept corner on finished axes, full elsewhere
            let extents: Vec<usize> = (0..d)
                .map(|a| match a.cmp(&axis) {
                    std::cmp::Ordering::Less => self.embed_dims[a],
                    std::cmp::Ordering::Equal => 1,
                    std::cmp::Ordering::Greater => self.noise_dims[a],
                })
                .collect();
            let count: usize = extents.iter().product();
            let mut idx = vec![0usize; d];
            lane.resize(m, Complex64::new(0.0, 0.0));
            for _ in 0..count {
                let base: usize = idx.iter().zip(&strides).map(|(i, s)| i * s).sum();
                let stride = strides[axis];
                if stride == 1 {
                    plan.process_with_scratch(&mut buf[base..base + m], &mut scratch);
                } else {
                    for (t, v) in lane.iter_mut().enumerate() {
                        *v = buf[base + t * stride];
                    }
                    plan.process_with_scratch(&mut lane, &mut scratch);
                    for (t, v) in lane.iter().enumerate() {
                        buf[base + t * stride] = *v;
                    }
                }
                increment(&mut idx, &extents);
            }
        }
    }
}

/// One stationary fGn sheet of shape `dims` (the real part of a pair).
pub fn synth_fgn_sheet(hurst: &HurstVector, dims: &[usize], seed: u64) -> Result<Field> {
    let synth = FbsSynthesizer::for_noise(hurst.clone(), dims.to_vec())?;
    Ok(synth.noise_pair(seed).0)
}

/// Cumulative sums along every axis with a leading zero layer, so the output
/// vanishes whenever any index is zero; each axis grows by one.
pub fn integrate_to_fbs(noise: &Field) -> Field {
    let mut dims = noise.dims().to_vec();
    let mut data = noise.data().to_vec();
    for axis in 0..dims.len() {
        let n = dims[axis];
        data = map_lanes(&data, &dims, axis, n + 1, |lane, out| {
            out[0] = 0.0;
            for t in 0..n {
                out[t + 1] = out[t] + lane[t];
            }
        });
        dims[axis] = n + 1;
    }
    Field::new(dims, data)
        .expect("integration grows valid dims")
        .with_hurst_truth(noise.hurst_truth().map(<[f64]>::to_vec))
}
