use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::memory::MemoryError;

/// GPH estimate of the memory parameter over the first `m` Fourier frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemoryEstimate {
    /// Unclamped slope estimate of `d`.
    pub d_hat: f64,
    pub m: usize,
    /// Asymptotic standard error `pi / sqrt(24 m)`.
    pub std_error: f64,
}

pub fn gph_std_error(m: usize) -> f64 {
    PI / (24.0 * m as f64).sqrt()
}

/// Largest admissible Fourier index `floor((N - 1) / 2)`.
pub fn max_frequency(n: usize) -> usize {
    n.saturating_sub(1) / 2
}

fn centered(x: &[f64]) -> Vec<f64> {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| v - mean).collect()
}

/// True when the series is constant up to rounding noise.
fn is_constant(x: &[f64], centered: &[f64]) -> bool {
    let scale = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let spread = centered.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    scale == 0.0 || spread <= 64.0 * f64::EPSILON * scale
}

/// Periodogram `I(lambda_k) = |sum_t X_t e^{i t lambda_k}|^2 / N` at
/// `lambda_k = 2 pi k / N`, evaluated directly on the mean-centered series.
///
/// Returns one value per requested index, in the order given.
pub fn periodogram(x: &[f64], ks: &[usize]) -> Result<Vec<f64>, MemoryError> {
    let n = x.len();
    let k_max = max_frequency(n);
    if let Some(&bad) = ks.iter().find(|&&k| k == 0 || k > k_max) {
        return Err(MemoryError::FrequencyOutOfRange { k: bad, n });
    }
    if ks.is_empty() {
        return Ok(Vec::new());
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(MemoryError::NonFinite);
    }
    let xc = centered(x);
    // exact phases: (t * k) mod N indexes a table of the N-th roots of unity
    let (cos_table, sin_table): (Vec<f64>, Vec<f64>) = (0..n)
        .map(|j| {
            let angle = 2.0 * PI * j as f64 / n as f64;
            (angle.cos(), angle.sin())
        })
        .unzip();
    Ok(ks
        .iter()
        .map(|&k| {
            let (mut re, mut im) = (0.0, 0.0);
            let mut phase = k % n; // t = 1
            for &v in &xc {
                re += v * cos_table[phase];
                im += v * sin_table[phase];
                phase += k;
                if phase >= n {
                    phase -= n;
                }
            }
            (re * re + im * im) / n as f64
        })
        .collect())
}

/// Regressor `Y_k = -2 log |1 - e^{i lambda_k}| = -2 log(2 sin(lambda_k / 2))`.
pub fn gph_regressor(k: usize, n: usize) -> f64 {
    let lambda = 2.0 * PI * k as f64 / n as f64;
    -2.0 * (2.0 * (lambda / 2.0).sin()).ln()
}

/// Log-periodogram regression estimate of `d` using frequencies `1..=m`.
pub fn gph_estimate(x: &[f64], m: usize) -> Result<MemoryEstimate, MemoryError> {
    let n = x.len();
    if m < 2 || m > max_frequency(n) {
        return Err(MemoryError::TooShort {
            needed: 2 * m.max(2) + 1,
            got: n,
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(MemoryError::NonFinite);
    }
    if is_constant(x, &centered(x)) {
        return Err(MemoryError::DegeneratePeriodogram { k: 1 });
    }
    let ks: Vec<usize> = (1..=m).collect();
    let spectrum = periodogram(x, &ks)?;
    if let Some(pos) = spectrum.iter().position(|&v| !(v > 0.0)) {
        return Err(MemoryError::DegeneratePeriodogram { k: pos + 1 });
    }
    let y: Vec<f64> = ks.iter().map(|&k| gph_regressor(k, n)).collect();
    let y_bar = y.iter().sum::<f64>() / m as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for (yk, ik) in y.iter().zip(&spectrum) {
        let c = yk - y_bar;
        num += c * ik.ln();
        den += c * c;
    }
    Ok(MemoryEstimate {
        d_hat: num / den,
        m,
        std_error: gph_std_error(m),
    })
}
