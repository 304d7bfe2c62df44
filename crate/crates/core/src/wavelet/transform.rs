//! Boundary-free pyramid detail coefficients.

use super::WaveletFilter;
use crate::error::{Error, Result};

/// Number of available level-`j` coefficients in a signal of length `len`:
/// `floor(len / 2^j) - (2N - 1)`, or `None` when no coefficient survives.
pub fn available_count(len: usize, j: u32, filter: &WaveletFilter) -> Option<usize> {
    let scaled = len.checked_shr(j)?;
    scaled
        .checked_sub(filter.support_len())
        .filter(|&n| n >= 1)
}

/// Correlate with `taps` and keep every other output, discarding outputs whose
/// footprint leaves the signal: `out[k] = sum_n taps[n] x[2k + n]`.
fn filter_decimate(x: &[f64], taps: &[f64], out: &mut Vec<f64>) {
    out.clear();
    if x.len() < taps.len() {
        return;
    }
    let count = (x.len() - taps.len()) / 2 + 1;
    out.extend((0..count).map(|k| {
        let window = &x[2 * k..2 * k + taps.len()];
        window.iter().zip(taps).map(|(a, b)| a * b).sum::<f64>()
    }));
}

/// Level-`j` detail coefficients: `j - 1` lowpass-and-decimate stages then one
/// highpass-and-decimate stage. Coefficient `k` depends on input samples
/// starting at offset `2^j k` only.
pub fn detail_1d(signal: &[f64], filter: &WaveletFilter, j: u32) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    detail_1d_into(signal, filter, j, &mut out, &mut Vec::new(), &mut Vec::new())?;
    Ok(out)
}

pub(crate) fn detail_1d_into(
    signal: &[f64],
    filter: &WaveletFilter,
    j: u32,
    out: &mut Vec<f64>,
    scratch_a: &mut Vec<f64>,
    scratch_b: &mut Vec<f64>,
) -> Result<()> {
    if j == 0 {
        return Err(Error::InvalidInput("octave must be at least 1".into()));
    }
    let count = available_count(signal.len(), j, filter).ok_or_else(|| {
        Error::InsufficientData(format!(
            "signal of length {} has no available coefficient at octave {j} (need {})",
            signal.len(),
            (1usize << j.min(63)) * (filter.support_len() + 1)
        ))
    })?;

    if j == 1 {
        filter_decimate(signal, filter.highpass(), out);
    } else {
        filter_decimate(signal, filter.lowpass(), scratch_a);
        for _ in 2..j {
            filter_decimate(scratch_a, filter.lowpass(), scratch_b);
            std::mem::swap(scratch_a, scratch_b);
        }
        filter_decimate(scratch_a, filter.highpass(), out);
    }
    debug_assert!(out.len() >= count);
    out.truncate(count);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavelet::make_daubechies;

    #[test]
    fn constant_signal_vanishes() {
        let x = vec![3.5; 300];
        for n in 1..=4 {
            let f = make_daubechies(n).unwrap();
            for j in 1..=3 {
                let d = detail_1d(&x, &f, j).unwrap();
                assert!(!d.is_empty());
                assert!(d.iter().all(|v| v.abs() < 1e-12), "n={n} j={j}");
            }
        }
    }

    #[test]
    fn quadratic_vanishes_for_db3() {
        let x: Vec<f64> = (0..400).map(|t| (t as f64).powi(2)).collect();
        let scale = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let d = detail_1d(&x, &make_daubechies(3).unwrap(), 2).unwrap();
        assert!(d.iter().all(|v| v.abs() < 1e-8 * scale));
    }

    #[test]
    fn counts_follow_availability_rule() {
        let f = make_daubechies(3).unwrap();
        for len in [48usize, 50, 63, 64, 100, 512, 513] {
            for j in 1..=3 {
                let expect = (len >> j) as i64 - 5;
                match detail_1d(&vec![1.0; len], &f, j) {
                    Ok(d) => assert_eq!(d.len() as i64, expect),
                    Err(Error::InsufficientData(_)) => assert!(expect < 1),
                    Err(e) => panic!("{e}"),
                }
            }
        }
    }

    #[test]
    fn too_short_is_insufficient() {
        let f = make_daubechies(3).unwrap();
        // 2^2 * 6 = 24 is the minimum at j = 2
        assert!(detail_1d(&[0.0; 24], &f, 2).is_ok());
        assert!(matches!(detail_1d(&[0.0; 23], &f, 2), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn haar_level_one_is_scaled_difference() {
        let f = make_daubechies(1).unwrap();
        let d = detail_1d(&[1.0, 3.0, 2.0, 2.0, 5.0, 1.0], &f, 1).unwrap();
        // count = 6/2 - 1 = 2
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(d.len(), 2);
        assert!((d[0] - (1.0 - 3.0) * s).abs() < 1e-15);
        assert!((d[1] - 0.0).abs() < 1e-15);
    }

    #[test]
    fn translation_by_dyadic_step_shifts_coefficients() {
        let f = make_daubechies(2).unwrap();
        let x: Vec<f64> = (0..200).map(|t| ((t * 37 % 101) as f64).sin()).collect();
        let j = 2;
        let a = detail_1d(&x, &f, j).unwrap();
        let b = detail_1d(&x[4..], &f, j).unwrap();
        for k in 0..b.len() {
            assert!((a[k + 1] - b[k]).abs() < 1e-12);
        }
    }
}
