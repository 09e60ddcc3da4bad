use std::f64::consts::PI;

use mosaic_core::memory::{gph_std_error, max_frequency, Bandwidth};
use mosaic_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn naive_periodogram(x: &[f64], k: usize) -> f64 {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let lambda = 2.0 * PI * k as f64 / n as f64;
    let (mut re, mut im) = (0.0, 0.0);
    for (t, v) in x.iter().enumerate() {
        let angle = (t + 1) as f64 * lambda;
        re += (v - mean) * angle.cos();
        im += (v - mean) * angle.sin();
    }
    (re * re + im * im) / n as f64
}

#[test]
fn periodogram_matches_direct_dft() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for rep in 0..100 {
        let n = [16, 64, 257][rep % 3];
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let ks: Vec<usize> = (1..=max_frequency(n)).collect();
        for (k, v) in ks.iter().zip(periodogram(&x, &ks).unwrap()) {
            assert!((v - naive_periodogram(&x, *k)).abs() <= 1e-9, "n {n} k {k}");
        }
    }
}

#[test]
fn periodogram_rejects_out_of_range_frequencies() {
    let x = vec![1.0, 2.0, 0.5, 3.0, 1.5, 2.5];
    assert!(periodogram(&x, &[0]).is_err());
    assert!(periodogram(&x, &[3]).is_err());
    assert!(periodogram(&x, &[2]).is_ok());
}

#[test]
fn arfima_lag_one_autocorrelation() {
    for d in [0.2, 0.3] {
        let x = simulate_arfima(1 << 16, d, 1.0, 77).unwrap();
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let c0: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
        let c1: f64 = x.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
        let rho = c1 / c0;
        assert!((rho - d / (1.0 - d)).abs() <= 0.03, "d {d}: rho {rho}");
    }
}

#[test]
fn gph_recovers_memory_on_simulated_series() {
    let (n, m, reps) = (4096, 64, 40);
    for d in [0.0, 0.2, 0.4] {
        let est: Vec<f64> = (0..reps)
            .map(|r| {
                let x = simulate_arfima(n, d, 1.0, 1000 + r).unwrap();
                gph_estimate(&x, m).unwrap().d_hat
            })
            .collect();
        let mean = est.iter().sum::<f64>() / reps as f64;
        let sd = (est.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
        assert!((mean - d).abs() <= 0.05, "d {d}: mean {mean}");
        assert!(sd <= 2.5 * gph_std_error(m), "d {d}: sd {sd}");
    }
}

#[test]
fn gph_is_scale_and_shift_invariant() {
    let x = simulate_arfima(1024, 0.3, 1.0, 5).unwrap();
    let y: Vec<f64> = x.iter().map(|v| 7.5 * v - 3.0).collect();
    let (a, b) = (gph_estimate(&x, 32).unwrap(), gph_estimate(&y, 32).unwrap());
    assert!((a.d_hat - b.d_hat).abs() < 1e-9);
    assert!(matches!(
        gph_estimate(&[4.0; 128], 10),
        Err(MemoryError::DegeneratePeriodogram { .. })
    ));
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

#[test]
fn unit_root_test_separates_noise_from_random_walks() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut iid_ok, mut walk_ok) = (0, 0);
    for _ in 0..100 {
        let e = gaussian(&mut rng, 512);
        iid_ok += usize::from(stationarity_test(&e, 0.05).unwrap().stationary);
        let walk: Vec<f64> = e
            .iter()
            .scan(0.0, |s, v| {
                *s += v;
                Some(*s)
            })
            .collect();
        walk_ok += usize::from(!stationarity_test(&walk, 0.05).unwrap().stationary);
    }
    assert!(iid_ok >= 90, "{iid_ok}");
    assert!(walk_ok >= 90, "{walk_ok}");
}

fn trajectory(user: UserId, components: Vec<Vec<f64>>) -> Trajectory {
    let n = components[0].len();
    Trajectory {
        user,
        dim_k: components.len(),
        snapshots: (0..n).map(|t| components.iter().map(|c| c[t]).collect()).collect(),
        epoch_boundaries: vec![n],
    }
}

fn lrd_count(m_rule: Bandwidth, d: f64, seed: u64) -> usize {
    let cfg = MemoryConfig {
        m_rule,
        ..MemoryConfig::default()
    };
    (0..100u64)
        .filter(|r| {
            let comps = (0..4)
                .map(|c| simulate_arfima(1024, d, 1.0, seed + r * 10 + c).unwrap())
                .collect();
            classify_user(&trajectory(0, comps), &cfg).unwrap().verdict == Verdict::StationaryLRD
        })
        .count()
}

#[test]
fn classification_rates_on_simulated_trajectories() {
    // with m = sqrt(1024) = 32 each component lands above 1/2 about 7% of the
    // time, so four-for-four acceptance tops out near 70%
    let sqrt_rule = lrd_count(Bandwidth::Sqrt, 0.3, 0);
    assert!(sqrt_rule >= 60, "{sqrt_rule}");
    let wider = lrd_count(Bandwidth::Power(0.6), 0.3, 0);
    assert!(wider >= 80, "{wider}");
    for m_rule in [Bandwidth::Sqrt, Bandwidth::Power(0.6)] {
        let noise = lrd_count(m_rule, 0.0, 5000);
        assert!(noise <= 20, "{m_rule:?}: {noise}");
    }
}

#[test]
fn short_and_non_stationary_trajectories() {
    let cfg = MemoryConfig::default();
    let short = trajectory(1, vec![vec![0.0; 20]; 4]);
    let r = classify_user(&short, &cfg).unwrap();
    assert_eq!((r.verdict, r.components.len()), (Verdict::TooShort, 0));

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut comps: Vec<Vec<f64>> = (0..3).map(|c| simulate_arfima(1024, 0.3, 1.0, c).unwrap()).collect();
    comps.push(
        gaussian(&mut rng, 1024)
            .into_iter()
            .scan(0.0, |s, v| {
                *s += v;
                Some(*s)
            })
            .collect(),
    );
    let r = classify_user(&trajectory(2, comps), &cfg).unwrap();
    assert_eq!(r.verdict, Verdict::NonStationary);
    assert!(!r.components[3].stationary && r.components[3].estimate.is_none());
}

#[test]
fn bandwidth_rules() {
    assert_eq!(Bandwidth::Sqrt.frequencies(1024), 32);
    assert_eq!(Bandwidth::Fixed(64).frequencies(4096), 64);
    assert_eq!(Bandwidth::Fixed(5000).frequencies(100), 49);
    assert_eq!("power:0.6".parse::<Bandwidth>().unwrap(), Bandwidth::Power(0.6));
}
