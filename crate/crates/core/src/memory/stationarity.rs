use nalgebra::{DMatrix, DVector};

use crate::memory::MemoryError;

/// Shortest series the unit-root regression accepts.
pub const MIN_STATIONARITY_LENGTH: usize = 32;

/// Asymptotic Dickey-Fuller critical values, constant-only regression.
const CRITICAL_VALUES: [(f64, f64); 3] = [(0.01, -3.43), (0.05, -2.86), (0.10, -2.57)];

pub fn critical_value(level: f64) -> Result<f64, MemoryError> {
    CRITICAL_VALUES
        .iter()
        .find(|(l, _)| (l - level).abs() < 1e-12)
        .map(|&(_, c)| c)
        .ok_or(MemoryError::InvalidLevel(level))
}

/// Lag order `floor(12 (N / 100)^(1/4))`, capped at `N / 4`.
pub fn lag_order(n: usize) -> usize {
    let p = (12.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize;
    p.min(n / 4)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationarityOutcome {
    pub stationary: bool,
    /// t-statistic of the lagged level; `None` for a degenerate regression.
    pub statistic: Option<f64>,
    pub lags: usize,
    /// The design was collinear (e.g. a constant series). Reported as stationary.
    pub degenerate: bool,
}

/// Augmented Dickey-Fuller test with a constant:
/// `dx_t = a + rho x_{t-1} + sum_j phi_j dx_{t-j} + e_t`.
///
/// The null is a unit root; the series is declared stationary when the
/// t-statistic of `rho` is below the critical value for `level`
/// (0.01, 0.05 or 0.10).
pub fn stationarity_test(x: &[f64], level: f64) -> Result<StationarityOutcome, MemoryError> {
    let n = x.len();
    if n < MIN_STATIONARITY_LENGTH {
        return Err(MemoryError::TooShort {
            needed: MIN_STATIONARITY_LENGTH,
            got: n,
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(MemoryError::NonFinite);
    }
    let crit = critical_value(level)?;
    let p = lag_order(n);
    let dx: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let rows = dx.len() - p;
    let cols = p + 2;

    let design = DMatrix::from_fn(rows, cols, |r, c| {
        let i = r + p;
        match c {
            0 => 1.0,
            1 => x[i],
            j => dx[i - (j - 1)],
        }
    });
    let target = DVector::from_fn(rows, |r, _| dx[r + p]);

    let degenerate = StationarityOutcome {
        stationary: true,
        statistic: None,
        lags: p,
        degenerate: true,
    };

    // scale columns so the rank check is not fooled by units
    let norms: Vec<f64> = (0..cols).map(|c| design.column(c).norm()).collect();
    if norms.iter().any(|&s| s == 0.0) {
        return Ok(degenerate);
    }
    let scaled = DMatrix::from_fn(rows, cols, |r, c| design[(r, c)] / norms[c]);
    let qr = scaled.clone().qr();
    let r = qr.r();
    let diag_max = (0..cols).fold(0.0f64, |a, i| a.max(r[(i, i)].abs()));
    if (0..cols).any(|i| r[(i, i)].abs() <= 1e-10 * diag_max) {
        return Ok(degenerate);
    }
    let qt_y = qr.q().transpose() * &target;
    let Some(beta) = r.solve_upper_triangular(&qt_y) else {
        return Ok(degenerate);
    };
    let resid = &target - &scaled * &beta;
    let dof = rows as f64 - cols as f64;
    let sigma2 = resid.norm_squared() / dof;

    // (R^T R)^{-1}_{11} = |R^{-T} e_1|^2 for the rho column
    let mut e1 = DVector::zeros(cols);
    e1[1] = 1.0;
    let Some(w) = r.transpose().solve_lower_triangular(&e1) else {
        return Ok(degenerate);
    };
    let se = (sigma2 * w.norm_squared()).sqrt();
    // column scaling cancels in the t-ratio
    let t = beta[1] / se;
    if !t.is_finite() {
        return Ok(degenerate);
    }
    Ok(StationarityOutcome {
        stationary: t < crit,
        statistic: Some(t),
        lags: p,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lag_rule() {
        assert_eq!(lag_order(100), 12);
        assert_eq!(lag_order(512), 18);
        assert_eq!(lag_order(32), 8);
        assert_eq!(lag_order(1024), 21);
    }

    #[test]
    fn too_short_and_bad_level() {
        assert!(matches!(
            stationarity_test(&[0.0; 10], 0.05),
            Err(MemoryError::TooShort { needed: 32, got: 10 })
        ));
        let x: Vec<f64> = (0..64).map(|t| (t as f64 * 1.3).sin()).collect();
        assert!(matches!(stationarity_test(&x, 0.2), Err(MemoryError::InvalidLevel(_))));
    }

    #[test]
    fn constant_series_is_degenerate_stationary() {
        let out = stationarity_test(&[2.5; 64], 0.05).unwrap();
        assert!(out.stationary && out.degenerate);
        let trend: Vec<f64> = (0..64).map(|t| t as f64).collect();
        assert!(stationarity_test(&trend, 0.05).unwrap().degenerate);
    }

    #[test]
    fn strongly_mean_reverting_series_rejects_unit_root() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut x = vec![0.0f64; 200];
        for t in 1..200 {
            x[t] = 0.3 * x[t - 1] + rng.random_range(-1.0..1.0);
        }
        let out = stationarity_test(&x, 0.05).unwrap();
        assert!(out.stationary && !out.degenerate, "{out:?}");
        assert!(out.statistic.unwrap() < -2.86);
    }
}
