//! Monte Carlo checks of the fBm and observation samplers.

use fbm_seqtest::fbm_sim::{fbm_covariance, sample_fbm, FbmSampler, ObservationSampler, ThetaMode};
use fbm_seqtest::ModelParams;
use rayon::prelude::*;

mod common;
use common::mean_se;

#[test]
fn empirical_covariance_matches_exactly() {
    let n = 16;
    let horizon = 1.0;
    let n_paths = 50_000;
    for h in [0.25, 0.5, 0.8] {
        let s = FbmSampler::new(n, horizon, h).unwrap();
        let paths: Vec<Vec<f64>> = (0..n_paths as u64)
            .into_par_iter()
            .map(|k| s.sample_values(k, false))
            .collect();
        let times = s.times().to_vec();
        for i in 1..=n {
            for j in i..=n {
                let prods: Vec<f64> = paths.iter().map(|p| p[i] * p[j]).collect();
                let (m, se) = mean_se(&prods);
                let want = fbm_covariance(times[i], times[j], h);
                assert!((m - want).abs() <= 4.0 * se, "H={h} ({i},{j}): {m} vs {want} ± {se}");
            }
        }
    }
}

#[test]
fn terminal_variance_is_one() {
    for h in [0.2, 0.5, 0.9] {
        let s = FbmSampler::<f64>::new(2, 1.0, h).unwrap();
        let sq: Vec<f64> = (0..10_000u64).map(|k| s.sample_values(k, false)[2].powi(2)).collect();
        let (m, se) = mean_se(&sq);
        assert!((m - 1.0).abs() <= 3.0 * se, "H={h}: {m} ± {se}");
    }
}

#[test]
fn brownian_increments_are_uncorrelated() {
    let n = 256;
    let s = FbmSampler::new(n, 1.0, 0.5).unwrap();
    let incs: Vec<Vec<f64>> = (0..2000u64)
        .into_par_iter()
        .map(|k| s.sample_values(k, false).windows(2).map(|w| w[1] - w[0]).collect())
        .collect();
    let h = 1.0 / n as f64;
    // Variance and lag-1 correlation at a few positions.
    for i in [0, 1, 100, 254] {
        let sq: Vec<f64> = incs.iter().map(|d| d[i] * d[i]).collect();
        let (m, se) = mean_se(&sq);
        assert!((m - h).abs() <= 3.0 * se, "var at {i}: {m} vs {h}");
        let lag: Vec<f64> = incs.iter().map(|d| d[i] * d[i + 1] / h).collect();
        let (m, se) = mean_se(&lag);
        assert!(m.abs() <= 3.0 * se, "lag-1 corr at {i}: {m} ± {se}");
    }
    // Distant pair.
    let far: Vec<f64> = incs.iter().map(|d| d[3] * d[200] / h).collect();
    let (m, se) = mean_se(&far);
    assert!(m.abs() <= 3.0 * se);
}

#[test]
fn fractional_increments_have_known_correlation() {
    // Lag-1 increment correlation of fGn is 2^{2H−1} − 1.
    for h in [0.3, 0.7] {
        let s = FbmSampler::new(64, 1.0, h).unwrap();
        let step: f64 = 1.0 / 64.0;
        let var = step.powf(2.0 * h);
        let lag: Vec<f64> = (0..5000u64)
            .map(|k| {
                let v = s.sample_values(k, false);
                (v[11] - v[10]) * (v[12] - v[11]) / var
            })
            .collect();
        let (m, se) = mean_se(&lag);
        let want = 2f64.powf(2.0 * h - 1.0) - 1.0;
        assert!((m - want).abs() <= 3.0 * se, "H={h}: {m} vs {want}");
    }
}

#[test]
fn fixed_drift_mean() {
    let p = ModelParams::new(0.0, 1.0, 0.5).unwrap();
    let obs = ObservationSampler::new(p, 1000, 1.0).unwrap();
    let ends: Vec<f64> = (0..1000u64)
        .map(|k| *obs.draw(ThetaMode::Fixed(5.0), k, false).path.values().last().unwrap())
        .collect();
    let (m, se) = mean_se(&ends);
    assert!((m - 5.0).abs() <= 3.0 * se, "{m} ± {se}");
}

#[test]
fn prior_theta_variance() {
    let sigma: f64 = 1.7;
    let p = ModelParams::new(0.4, sigma, 0.3).unwrap();
    let obs = ObservationSampler::new(p, 4, 1.0).unwrap();
    let thetas: Vec<f64> = (0..10_000u64)
        .map(|k| obs.draw_theta(ThetaMode::PriorDraw, k, false))
        .collect();
    let (m, se) = mean_se(&thetas);
    assert!((m - 0.4).abs() <= 3.0 * se);
    let sq: Vec<f64> = thetas.iter().map(|t| (t - 0.4).powi(2)).collect();
    let (v, se) = mean_se(&sq);
    assert!((v - sigma * sigma).abs() <= 3.0 * se, "{v} ± {se}");
}

#[test]
fn fixed_and_prior_share_path_noise() {
    let p = ModelParams::<f64>::new(0.0, 1.0, 0.7).unwrap();
    let obs = ObservationSampler::<f64>::new(p, 32, 2.0).unwrap();
    let a = obs.draw(ThetaMode::PriorDraw, 9, false);
    let b = obs.draw(ThetaMode::Fixed(0.0), 9, false);
    for ((za, zb), t) in a.path.values().iter().zip(b.path.values()).zip(a.path.times()) {
        assert!((za - a.theta * t - zb).abs() < 1e-12);
    }
}

#[test]
fn paths_are_reproducible() {
    let x = sample_fbm(128, 3.0, 0.35, 77).unwrap();
    let y = sample_fbm(128, 3.0, 0.35, 77).unwrap();
    assert_eq!(x, y);
    let z = sample_fbm(128, 3.0, 0.35, 78).unwrap();
    assert_ne!(x, z);
}
