//! Dyadic samples of the scaling function and mother wavelet.

use nalgebra::{DMatrix, DVector};

use super::WaveletFilter;
use crate::error::{Error, Result};

pub const MAX_DEPTH: u32 = 16;

/// Samples of `psi` at `k * 2^-depth` for `k = 0..=(2N-1) * 2^depth`.
#[derive(Debug, Clone)]
pub struct PsiTable {
    depth: u32,
    values: Vec<f64>,
}

impl PsiTable {
    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// Grid spacing `2^-depth`.
    pub fn step(&self) -> f64 {
        (-(self.depth as f64)).exp2()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `sum psi * step`, the rectangle-rule integral.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.step()
    }

    pub fn squared_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>() * self.step()
    }
}

/// Iterate the two-scale relation from the integer samples of `phi` down to
/// resolution `2^-depth`, then form `psi(x) = sqrt2 sum_k g_k phi(2x - k)`.
pub fn cascade_table(filter: &WaveletFilter, depth: u32) -> Result<PsiTable> {
    if !(1..=MAX_DEPTH).contains(&depth) {
        return Err(Error::InvalidInput(format!(
            "cascade depth must be in 1..={MAX_DEPTH}, got {depth}"
        )));
    }
    let h: Vec<f64> = filter
        .lowpass()
        .iter()
        .map(|v| v * std::f64::consts::SQRT_2)
        .collect();
    let g: Vec<f64> = filter
        .highpass()
        .iter()
        .map(|v| v * std::f64::consts::SQRT_2)
        .collect();
    let support = filter.support_len();

    let mut phi = phi_at_integers(filter)?;
    for level in 1..=depth {
        let half = 1usize << (level - 1);
        let len = support * (1 << level) + 1;
        let next: Vec<f64> = (0..len)
            .map(|k| {
                h.iter()
                    .enumerate()
                    .filter_map(|(n, &hn)| {
                        let shift = n * half;
                        (k >= shift && k - shift < phi.len()).then(|| hn * phi[k - shift])
                    })
                    .sum()
            })
            .collect();
        phi = next;
    }

    let full = 1usize << depth;
    let len = support * full + 1;
    let values = (0..len)
        .map(|k| {
            g.iter()
                .enumerate()
                .filter_map(|(n, &gn)| {
                    let shift = n * full;
                    let idx = 2 * k;
                    (idx >= shift && idx - shift < phi.len()).then(|| gn * phi[idx - shift])
                })
                .sum()
        })
        .collect();
    Ok(PsiTable { depth, values })
}

/// `phi(0), ..., phi(2N-1)` from the eigenvector of the two-scale operator,
/// normalized so the samples sum to one.
fn phi_at_integers(filter: &WaveletFilter) -> Result<Vec<f64>> {
    let support = filter.support_len();
    if support == 1 {
        // Haar, right-continuous box on [0, 1)
        return Ok(vec![1.0, 0.0]);
    }
    // unknowns phi(1..=support-1); phi vanishes at both ends
    let n = support - 1;
    let h = filter.lowpass();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for row in 0..n {
        for col in 0..n {
            let x = row + 1;
            let y = col + 1;
            if 2 * x >= y && 2 * x - y < h.len() {
                m[(row, col)] = std::f64::consts::SQRT_2 * h[2 * x - y];
            }
        }
        m[(row, row)] -= 1.0;
    }
    for col in 0..n {
        m[(n - 1, col)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(n);
    rhs[n - 1] = 1.0;
    let interior = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::InvalidInput("two-scale eigenproblem is singular".into()))?;
    let mut out = vec![0.0; support + 1];
    out[1..=n].copy_from_slice(interior.as_slice());
    Ok(out)
}
