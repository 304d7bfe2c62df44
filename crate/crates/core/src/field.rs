//! Row-major real lattices.

use crate::error::{Error, Result};

/// A `d`-dimensional lattice of real samples stored row-major (last axis
/// fastest). `hurst_truth` travels with synthesized fields for validation.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    dims: Vec<usize>,
    data: Vec<f64>,
    hurst_truth: Option<Vec<f64>>,
}

impl Field {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidInput("field needs at least one axis".into()));
        }
        if let Some(&t) = dims.iter().find(|&&t| t < 2) {
            return Err(Error::InvalidInput(format!(
                "every axis needs at least 2 samples, got {t}"
            )));
        }
        let len = checked_volume(&dims)
            .ok_or_else(|| Error::InvalidInput("lattice volume overflows".into()))?;
        if len != data.len() {
            return Err(Error::DimensionMismatch(format!(
                "dims {dims:?} need {len} samples, got {}",
                data.len()
            )));
        }
        Ok(Self {
            dims,
            data,
            hurst_truth: None,
        })
    }

    pub fn zeros(dims: Vec<usize>) -> Result<Self> {
        let len = checked_volume(&dims)
            .ok_or_else(|| Error::InvalidInput("lattice volume overflows".into()))?;
        Self::new(dims, vec![0.0; len])
    }

    /// Build a field by evaluating `f` at every multi-index.
    pub fn from_fn(dims: Vec<usize>, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let len = checked_volume(&dims)
            .ok_or_else(|| Error::InvalidInput("lattice volume overflows".into()))?;
        let mut data = Vec::with_capacity(len);
        let mut idx = vec![0usize; dims.len()];
        for _ in 0..len {
            data.push(f(&idx));
            increment(&mut idx, &dims);
        }
        Self::new(dims, data)
    }

    pub fn with_hurst_truth(mut self, h: Option<Vec<f64>>) -> Self {
        self.hurst_truth = h;
        self
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn hurst_truth(&self) -> Option<&[f64]> {
        self.hurst_truth.as_deref()
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[flat_index(&self.dims, idx)]
    }

    /// Swap two axes (a transpose for 2D fields).
    pub fn swap_axes(&self, a: usize, b: usize) -> Field {
        let mut dims = self.dims.clone();
        dims.swap(a, b);
        let src_dims = &self.dims;
        let out = Field::from_fn(dims, |idx| {
            let mut src = idx.to_vec();
            src.swap(a, b);
            self.data[flat_index(src_dims, &src)]
        })
        .expect("permuted dims stay valid");
        out.with_hurst_truth(self.hurst_truth.as_ref().map(|h| {
            let mut h = h.clone();
            h.swap(a, b);
            h
        }))
    }
}

pub(crate) fn checked_volume(dims: &[usize]) -> Option<usize> {
    dims.iter().try_fold(1usize, |acc, &t| acc.checked_mul(t))
}

pub(crate) fn flat_index(dims: &[usize], idx: &[usize]) -> usize {
    idx.iter().zip(dims).fold(0, |acc, (&i, &t)| acc * t + i)
}

/// Row-major odometer step.
pub(crate) fn increment(idx: &mut [usize], dims: &[usize]) {
    for axis in (0..dims.len()).rev() {
        idx[axis] += 1;
        if idx[axis] < dims[axis] {
            return;
        }
        idx[axis] = 0;
    }
}

/// Apply a 1D map to every lane of `data` along `axis`. The map turns a lane
/// of length `dims[axis]` into a lane of length `out_len`; returns the new
/// row-major buffer.
pub(crate) fn map_lanes(
    data: &[f64],
    dims: &[usize],
    axis: usize,
    out_len: usize,
    mut f: impl FnMut(&[f64], &mut [f64]),
) -> Vec<f64> {
    let len = dims[axis];
    let inner: usize = dims[axis + 1..].iter().product();
    let outer: usize = dims[..axis].iter().product();
    let mut out = vec![0.0; outer * out_len * inner];
    let mut lane = vec![0.0; len];
    let mut res = vec![0.0; out_len];
    for o in 0..outer {
        let src = &data[o * len * inner..(o + 1) * len * inner];
        let dst = &mut out[o * out_len * inner..(o + 1) * out_len * inner];
        for i in 0..inner {
            for (t, v) in lane.iter_mut().enumerate() {
                *v = src[t * inner + i];
            }
            f(&lane, &mut res);
            for (t, &v) in res.iter().enumerate() {
                dst[t * inner + i] = v;
            }
        }
    }
    out
}
