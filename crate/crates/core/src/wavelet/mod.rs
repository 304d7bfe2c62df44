//! Daubechies filters and anisotropic tensor-product wavelet coefficients.
//!
//! Coefficients are produced by the orthonormal filter-and-decimate pyramid
//! applied separably, one axis at a time, each axis at its own octave. Only
//! *available* coefficients are kept: those whose footprint lies entirely
//! inside the lattice, so they coincide with the coefficients of the
//! unbounded sheet. Along an axis of length `T` at octave `j` there are
//! `floor(T / 2^j) - (2N - 1)` of them; coefficient `k` starts at sample
//! `2^j k`.

mod cascade;
mod daubechies;
mod transform;

pub use cascade::{cascade_table, PsiTable};
pub use daubechies::make_daubechies;
pub use transform::{available_count, detail_1d};

use crate::error::{Error, Result};
use crate::field::{map_lanes, Field};

/// Orthonormal compactly supported filter pair.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletFilter {
    n_vanishing: usize,
    lowpass: Vec<f64>,
    highpass: Vec<f64>,
}

impl WaveletFilter {
    /// Build from a lowpass of length `2N`; the highpass follows the
    /// quadrature-mirror relation `g_k = (-1)^k h_{2N-1-k}`.
    pub(crate) fn from_lowpass(n_vanishing: usize, lowpass: Vec<f64>) -> Self {
        let len = lowpass.len();
        let highpass = (0..len)
            .map(|k| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                sign * lowpass[len - 1 - k]
            })
            .collect();
        Self {
            n_vanishing,
            lowpass,
            highpass,
        }
    }

    pub fn n_vanishing(&self) -> usize {
        self.n_vanishing
    }

    pub fn lowpass(&self) -> &[f64] {
        &self.lowpass
    }

    pub fn highpass(&self) -> &[f64] {
        &self.highpass
    }

    /// `2N - 1`, the length of the support `[0, 2N-1]`.
    pub fn support_len(&self) -> usize {
        2 * self.n_vanishing - 1
    }
}

/// Per-axis octaves `J = (j_1, ..., j_d)`, each at least 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OctaveVector(Vec<u32>);

impl OctaveVector {
    pub fn new(j: Vec<u32>) -> Result<Self> {
        if j.is_empty() {
            return Err(Error::InvalidInput("octave vector needs at least one axis".into()));
        }
        if j.iter().any(|&v| v == 0) {
            return Err(Error::InvalidInput(format!("octaves must be >= 1, got {j:?}")));
        }
        Ok(Self(j))
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn ndim(&self) -> usize {
        self.0.len()
    }

    /// Per-axis available counts on a lattice of shape `dims`.
    pub fn counts_for(&self, dims: &[usize], filter: &WaveletFilter) -> Result<Vec<usize>> {
        if dims.len() != self.0.len() {
            return Err(Error::DimensionMismatch(format!(
                "octave {:?} for a {}-dimensional field",
                self.0,
                dims.len()
            )));
        }
        self.0
            .iter()
            .zip(dims)
            .map(|(&j, &t)| {
                available_count(t, j, filter).ok_or_else(|| {
                    Error::InsufficientData(format!(
                        "axis of length {t} has no available coefficient at octave {j}"
                    ))
                })
            })
            .collect()
    }
}

impl std::fmt::Display for OctaveVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (i, j) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{j}")?;
        }
        write!(f, ")")
    }
}

/// Available coefficients `d(J, K)` at one octave vector, row-major in `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientGrid {
    pub octave: OctaveVector,
    pub counts: Vec<usize>,
    pub coeffs: Vec<f64>,
}

impl CoefficientGrid {
    /// `n_J`, the product of the per-axis counts.
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }
}

pub fn analyze_octave(field: &Field, filter: &WaveletFilter, octave: &OctaveVector) -> Result<CoefficientGrid> {
    let order: Vec<usize> = (0..field.ndim()).collect();
    analyze_octave_in_order(field, filter, octave, &order)
}

/// Same as [`analyze_octave`] but visiting the axes in `order`.
pub fn analyze_octave_in_order(
    field: &Field,
    filter: &WaveletFilter,
    octave: &OctaveVector,
    order: &[usize],
) -> Result<CoefficientGrid> {
    let counts = octave.counts_for(field.dims(), filter)?;
    let mut seen = vec![false; field.ndim()];
    for &a in order {
        if a >= seen.len() || std::mem::replace(&mut seen[a], true) {
            return Err(Error::InvalidInput(format!("{order:?} is not an axis permutation")));
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::InvalidInput(format!("{order:?} is not an axis permutation")));
    }

    let mut dims = field.dims().to_vec();
    let mut data = field.data().to_vec();
    let (mut a, mut b) = (Vec::new(), Vec::new());
    let mut out = Vec::new();
    for &axis in order {
        let j = octave.as_slice()[axis];
        let n = counts[axis];
        let mut failure = None;
        data = map_lanes(&data, &dims, axis, n, |lane, res| {
            match transform::detail_1d_into(lane, filter, j, &mut out, &mut a, &mut b) {
                Ok(()) => res.copy_from_slice(&out),
                Err(e) => failure = Some(e),
            }
        });
        if let Some(e) = failure {
            return Err(e);
        }
        dims[axis] = n;
    }
    Ok(CoefficientGrid {
        octave: octave.clone(),
        counts,
        coeffs: data,
    })
}

/// `S(J)`, the mean of squared coefficients.
pub fn sample_variance(grid: &CoefficientGrid) -> Result<f64> {
    if grid.coeffs.is_empty() {
        return Err(Error::InsufficientData("empty coefficient grid".into()));
    }
    Ok(grid.coeffs.iter().map(|c| c * c).sum::<f64>() / grid.coeffs.len() as f64)
}

/// Every octave vector in the box `low <= J <= high`, lexicographically.
pub fn octave_box(low: &OctaveVector, high: &OctaveVector) -> Result<Vec<OctaveVector>> {
    if low.ndim() != high.ndim() {
        return Err(Error::DimensionMismatch(format!("box corners {low} and {high}")));
    }
    if low.0.iter().zip(&high.0).any(|(l, h)| l > h) {
        return Err(Error::InvalidRange(format!("empty octave box {low}..{high}")));
    }
    let mut out = Vec::new();
    let mut cur = low.0.clone();
    loop {
        out.push(OctaveVector(cur.clone()));
        let mut axis = cur.len();
        loop {
            if axis == 0 {
                return Ok(out);
            }
            axis -= 1;
            if cur[axis] < high.0[axis] {
                cur[axis] += 1;
                break;
            }
            cur[axis] = low.0[axis];
        }
    }
}

/// Largest octave along an axis of length `len` that still leaves
/// `min_count` available coefficients.
pub fn max_octave(len: usize, filter: &WaveletFilter, min_count: usize) -> Option<u32> {
    (1..usize::BITS)
        .take_while(|&j| available_count(len, j, filter).is_some_and(|n| n >= min_count))
        .last()
}
