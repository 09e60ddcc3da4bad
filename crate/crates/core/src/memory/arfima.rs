use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::memory::MemoryError;

/// MA(infinity) weights of `(1 - B)^{-d}`: `psi_0 = 1`, `psi_j = psi_{j-1} (j - 1 + d) / j`.
pub fn arfima_weights(d: f64, len: usize) -> Vec<f64> {
    let mut psi = Vec::with_capacity(len);
    if len == 0 {
        return psi;
    }
    psi.push(1.0);
    for j in 1..len {
        let prev = psi[j - 1];
        psi.push(prev * (j as f64 - 1.0 + d) / j as f64);
    }
    psi
}

/// Burn-in / truncation length `max(1000, n)`.
pub fn truncation(n: usize) -> usize {
    n.max(1000)
}

/// Simulates ARFIMA(0, d, 0) via the MA representation truncated at `J = max(1000, n)` lags:
/// `X_t = sum_{j=0}^{J} psi_j e_{t-j}` with i.i.d. `N(0, sigma^2)` innovations.
pub fn simulate_arfima(n: usize, d: f64, sigma: f64, seed: u64) -> Result<Vec<f64>, MemoryError> {
    if !(d > -0.5 && d < 0.5) {
        return Err(MemoryError::InvalidParameter(format!("d = {d} outside (-0.5, 0.5)")));
    }
    if n == 0 {
        return Err(MemoryError::InvalidParameter("length must be at least 1".into()));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(MemoryError::InvalidParameter(format!("sigma = {sigma}")));
    }
    let j = truncation(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise: Vec<f64> = (0..n + j)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            sigma * z
        })
        .collect();
    if d == 0.0 {
        return Ok(noise[j..].to_vec());
    }
    // reversed weights turn the convolution into a contiguous dot product
    let mut psi_rev = arfima_weights(d, j + 1);
    psi_rev.reverse();
    Ok((0..n)
        .map(|t| {
            noise[t..t + j + 1]
                .iter()
                .zip(&psi_rev)
                .map(|(e, w)| e * w)
                .sum()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn white_noise_collapses_to_innovations() {
        let psi = arfima_weights(0.0, 5);
        assert_eq!(psi, [1.0, 0.0, 0.0, 0.0, 0.0]);
        let x = simulate_arfima(50, 0.0, 1.0, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise: Vec<f64> = (0..1050).map(|_| StandardNormal.sample(&mut rng)).collect();
        assert_eq!(x, noise[1000..]);
    }

    #[test]
    fn weights_follow_recursion() {
        let psi = arfima_weights(0.3, 4);
        assert_eq!(psi[1], 0.3);
        assert!((psi[2] - 0.3 * 1.3 / 2.0).abs() < 1e-15);
        assert!((psi[3] - 0.3 * 1.3 * 2.3 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn deterministic_given_seed() {
        let a = simulate_arfima(300, 0.2, 1.0, 9).unwrap();
        assert_eq!(a, simulate_arfima(300, 0.2, 1.0, 9).unwrap());
        assert_ne!(a, simulate_arfima(300, 0.2, 1.0, 10).unwrap());
    }

    #[test]
    fn parameter_checks() {
        assert!(simulate_arfima(10, 0.5, 1.0, 0).is_err());
        assert!(simulate_arfima(10, -0.5, 1.0, 0).is_err());
        assert!(simulate_arfima(0, 0.1, 1.0, 0).is_err());
        assert!(simulate_arfima(10, 0.1, -1.0, 0).is_err());
    }
}
