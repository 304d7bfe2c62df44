//! Daubechies minimum-phase filters by spectral factorization.
//!
//! The squared magnitude response of the order-`N` filter is
//! `cos^{2N}(w/2) P(sin^2(w/2))` with `P(y) = sum_{k<N} C(N-1+k, k) y^k`.
//! Each root `y_r` of `P` maps to a reciprocal pair `z, 1/z` through
//! `z + 1/z = 2 - 4 y_r`; keeping the roots inside the unit circle gives the
//! minimum-phase factor.

use std::sync::OnceLock;

use num_complex::Complex64;

use super::WaveletFilter;
use crate::error::{Error, Result};

pub const MAX_ORDER: usize = 10;

static FILTERS: OnceLock<Vec<WaveletFilter>> = OnceLock::new();

/// Orthonormal Daubechies filter with `n` vanishing moments (`1..=10`).
///
/// Filters are built once per process and cloned from the cache afterwards.
pub fn make_daubechies(n: usize) -> Result<WaveletFilter> {
    if !(1..=MAX_ORDER).contains(&n) {
        return Err(Error::UnsupportedOrder(n));
    }
    let table = FILTERS.get_or_init(|| (1..=MAX_ORDER).map(build).collect());
    Ok(table[n - 1].clone())
}

fn build(n: usize) -> WaveletFilter {
    let lowpass = lowpass_coefficients(n);
    WaveletFilter::from_lowpass(n, lowpass)
}

fn lowpass_coefficients(n: usize) -> Vec<f64> {
    // P(y), lowest degree first
    let p: Vec<f64> = (0..n).map(|k| binomial(n - 1 + k, k)).collect();
    let y_roots = polynomial_roots(&p);

    // (1 + w)^N * prod_r (1 - z_r w), coefficients in powers of w
    let mut poly = vec![Complex64::new(1.0, 0.0)];
    for _ in 0..n {
        poly = mul_linear(&poly, Complex64::new(1.0, 0.0));
    }
    for y in y_roots {
        let b = Complex64::new(2.0, 0.0) - 4.0 * y;
        let disc = (b * b - 4.0).sqrt();
        let z1 = (b + disc) * 0.5;
        let z2 = (b - disc) * 0.5;
        let z = if z1.norm() < z2.norm() { z1 } else { z2 };
        poly = mul_linear(&poly, -z);
    }

    let mut h: Vec<f64> = poly.iter().map(|c| c.re).collect();
    let sum: f64 = h.iter().sum();
    let scale = std::f64::consts::SQRT_2 / sum;
    for v in &mut h {
        *v *= scale;
    }
    h
}

/// Multiply `poly(w)` by `(1 + c w)`.
fn mul_linear(poly: &[Complex64], c: Complex64) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); poly.len() + 1];
    for (i, &a) in poly.iter().enumerate() {
        out[i] += a;
        out[i + 1] += a * c;
    }
    out
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn eval(coeffs: &[Complex64], x: Complex64) -> (Complex64, Complex64) {
    // Horner for value and derivative
    let mut v = Complex64::new(0.0, 0.0);
    let mut dv = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        dv = dv * x + v;
        v = v * x + c;
    }
    (v, dv)
}

/// All complex roots of a real polynomial given lowest degree first.
/// Aberth iteration followed by Newton polishing on the original polynomial.
fn polynomial_roots(coeffs: &[f64]) -> Vec<Complex64> {
    let degree = coeffs.len() - 1;
    if degree == 0 {
        return Vec::new();
    }
    let lead = coeffs[degree];
    let c: Vec<Complex64> = coeffs.iter().map(|&a| Complex64::new(a / lead, 0.0)).collect();

    // Cauchy bound for the starting circle
    let radius = 1.0 + c[..degree].iter().map(|a| a.norm()).fold(0.0, f64::max);
    let mut roots: Vec<Complex64> = (0..degree)
        .map(|k| {
            let theta = 2.0 * std::f64::consts::PI * (k as f64 + 0.25) / degree as f64;
            Complex64::from_polar(0.5 * radius, theta)
        })
        .collect();

    for _ in 0..500 {
        let mut max_step: f64 = 0.0;
        for i in 0..degree {
            let (v, dv) = eval(&c, roots[i]);
            if v.norm() == 0.0 {
                continue;
            }
            let ratio = v / dv;
            let repulsion: Complex64 = (0..degree)
                .filter(|&k| k != i)
                .map(|k| Complex64::new(1.0, 0.0) / (roots[i] - roots[k]))
                .sum();
            let step = ratio / (Complex64::new(1.0, 0.0) - ratio * repulsion);
            roots[i] -= step;
            max_step = max_step.max(step.norm() / roots[i].norm().max(1.0));
        }
        if max_step < 1e-15 {
            break;
        }
    }

    for r in &mut roots {
        for _ in 0..4 {
            let (v, dv) = eval(&c, *r);
            if dv.norm() == 0.0 {
                break;
            }
            *r -= v / dv;
        }
    }
    roots
}
