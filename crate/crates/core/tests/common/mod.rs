//! Small statistics helpers shared by the integration tests.
#![allow(dead_code)]

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample variance, divisor `n - 1`.
pub fn var(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

pub fn std(x: &[f64]) -> f64 {
    var(x).sqrt()
}

/// Standard error of the mean.
pub fn sem(x: &[f64]) -> f64 {
    (var(x) / x.len() as f64).sqrt()
}

/// Least-squares slope of `y` on `x`.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

pub fn column(rows: &[Vec<f64>], i: usize) -> Vec<f64> {
    rows.iter().map(|r| r[i]).collect()
}

/// Sample skewness `g1` and excess kurtosis `g2` (moment estimators).
pub fn skew_kurt(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = mean(x);
    let m2 = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
    let m3 = x.iter().map(|v| (v - m).powi(3)).sum::<f64>() / n;
    let m4 = x.iter().map(|v| (v - m).powi(4)).sum::<f64>() / n;
    (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
}

/// Large-sample standard errors of skewness and excess kurtosis under
/// normality.
pub fn skew_kurt_se(n: usize) -> (f64, f64) {
    let n = n as f64;
    let ses = (6.0 * (n - 2.0) / ((n + 1.0) * (n + 3.0))).sqrt();
    let sek = (24.0 * n * (n - 2.0) * (n - 3.0) / ((n + 1.0).powi(2) * (n + 3.0) * (n + 5.0))).sqrt();
    (ses, sek)
}

/// D'Agostino-Pearson omnibus statistic `K^2 = Z(g1)^2 + Z(g2)^2`, which is
/// chi-squared with two degrees of freedom under normality.
pub fn dagostino_k2(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (g1, g2) = skew_kurt(x);

    // skewness
    let y = g1 * ((n + 1.0) * (n + 3.0) / (6.0 * (n - 2.0))).sqrt();
    let beta2 = 3.0 * (n * n + 27.0 * n - 70.0) * (n + 1.0) * (n + 3.0)
        / ((n - 2.0) * (n + 5.0) * (n + 7.0) * (n + 9.0));
    let w2 = -1.0 + (2.0 * (beta2 - 1.0)).sqrt();
    let delta = 1.0 / (0.5 * w2.ln()).sqrt();
    let alpha = (2.0 / (w2 - 1.0)).sqrt();
    let z1 = delta * (y / alpha + ((y / alpha).powi(2) + 1.0).sqrt()).ln();

    // kurtosis (g2 is excess; b2 = g2 + 3)
    let b2 = g2 + 3.0;
    let eb2 = 3.0 * (n - 1.0) / (n + 1.0);
    let vb2 = 24.0 * n * (n - 2.0) * (n - 3.0) / ((n + 1.0).powi(2) * (n + 3.0) * (n + 5.0));
    let xk = (b2 - eb2) / vb2.sqrt();
    let sb1 = 6.0 * (n * n - 5.0 * n + 2.0) / ((n + 7.0) * (n + 9.0))
        * (6.0 * (n + 3.0) * (n + 5.0) / (n * (n - 2.0) * (n - 3.0))).sqrt();
    let a = 6.0 + 8.0 / sb1 * (2.0 / sb1 + (1.0 + 4.0 / (sb1 * sb1)).sqrt());
    let t = (1.0 - 2.0 / a) / (1.0 + xk * (2.0 / (a - 4.0)).sqrt());
    let z2 = ((1.0 - 2.0 / (9.0 * a)) - t.cbrt()) / (2.0 / (9.0 * a)).sqrt();
    z1 * z1 + z2 * z2
}

/// Upper tail probability of chi-squared with two degrees of freedom.
pub fn chi2_2_sf(x: f64) -> f64 {
    (-x / 2.0).exp()
}
