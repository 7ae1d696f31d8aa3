//! Exact simulation of fractional Brownian motion and of the observation
//! Z_t = θt + B^H_t on a uniform grid.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::real::Real;

/// ChaCha stream carrying the path noise.
pub const NOISE_STREAM: u64 = 0;
/// ChaCha stream carrying the prior draw of θ.
pub const THETA_STREAM: u64 = 1;

/// Relative tolerance for treating a grid as uniform.
const UNIFORM_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PathKind {
    Fbm,
    Observation,
    Whitened,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SamplePath<T> {
    times: Vec<T>,
    values: Vec<T>,
    kind: PathKind,
}

impl<T: Real> SamplePath<T> {
    /// Checks: equal lengths, at least two points, times strictly
    /// increasing from 0, and the path starting at 0.
    pub fn new(times: Vec<T>, values: Vec<T>, kind: PathKind) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Contract(format!(
                "path has {} times but {} values",
                times.len(),
                values.len()
            )));
        }
        if times.len() < 2 {
            return Err(Error::Contract("path needs at least two points".into()));
        }
        if times[0] != T::zero() || values[0] != T::zero() {
            return Err(Error::Contract("path must start at (0, 0)".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Contract("path times must be strictly increasing".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Contract("path values must be finite".into()));
        }
        Ok(Self { times, values, kind })
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn kind(&self) -> PathKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Number of increments.
    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn horizon(&self) -> T {
        self.times[self.times.len() - 1]
    }

    /// The common step of a uniform grid, or a contract error.
    pub fn uniform_step(&self) -> Result<T> {
        let h = self.horizon() / T::lit(self.steps() as f64);
        let tol = T::lit(UNIFORM_RTOL) * h;
        for (i, w) in self.times.windows(2).enumerate() {
            if ((w[1] - w[0]) - h).abs() > tol {
                return Err(Error::Contract(format!(
                    "grid is not uniform: step {i} is {} but the mean step is {h}",
                    w[1] - w[0]
                )));
            }
        }
        Ok(h)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,value\n");
        for (t, v) in self.times.iter().zip(&self.values) {
            let _ = writeln!(out, "{t},{v}");
        }
        out
    }
}

/// ½(s^{2H} + t^{2H} − |t−s|^{2H}).
pub fn fbm_covariance<T: Real>(s: T, t: T, hurst: T) -> T {
    let e = T::lit(2.0) * hurst;
    T::lit(0.5) * (s.powf(e) + t.powf(e) - (t - s).abs().powf(e))
}

/// Autocovariance of fractional Gaussian noise with step h at lag k.
fn fgn_autocovariance<T: Real>(k: usize, h: T, hurst: T) -> T {
    let e = T::lit(2.0) * hurst;
    let k = T::lit(k as f64);
    let one = T::one();
    T::lit(0.5) * h.powf(e) * ((k + one).powf(e) + (k - one).abs().powf(e) - T::lit(2.0) * k.powf(e))
}

pub fn uniform_grid<T: Real>(n: usize, horizon: T) -> Vec<T> {
    let nn = T::lit(n as f64);
    (0..=n).map(|i| horizon * (T::lit(i as f64) / nn)).collect()
}

/// Packed lower Cholesky factor of the increment covariance; immutable and
/// shareable across threads.
#[derive(Debug, Clone)]
pub struct FbmSampler<T> {
    n: usize,
    horizon: T,
    hurst: T,
    times: Vec<T>,
    chol: Vec<T>,
}

impl<T: Real> FbmSampler<T> {
    pub fn new(n: usize, horizon: T, hurst: T) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParams(format!("need at least 2 steps, got {n}")));
        }
        if !(horizon > T::zero()) || !horizon.is_finite() {
            return Err(Error::InvalidParams(format!("horizon must be positive, got {horizon}")));
        }
        if !(hurst > T::zero() && hurst < T::one()) {
            return Err(Error::InvalidParams(format!("hurst must lie in (0, 1), got {hurst}")));
        }
        let h = horizon / T::lit(n as f64);
        let acov: Vec<T> = (0..n).map(|k| fgn_autocovariance(k, h, hurst)).collect();
        let chol = cholesky_toeplitz(&acov)?;
        Ok(Self {
            n,
            horizon,
            hurst,
            times: uniform_grid(n, horizon),
            chol,
        })
    }

    pub fn steps(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    pub fn hurst(&self) -> T {
        self.hurst
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    /// Maps n i.i.d. standard normals to fBm values on the grid.
    pub fn path_from_normals(&self, normals: &[T]) -> Result<Vec<T>> {
        if normals.len() != self.n {
            return Err(Error::Contract(format!(
                "expected {} normals, got {}",
                self.n,
                normals.len()
            )));
        }
        let mut values = Vec::with_capacity(self.n + 1);
        values.push(T::zero());
        let mut level = T::zero();
        let mut off = 0;
        for i in 0..self.n {
            let row = &self.chol[off..off + i + 1];
            let inc = row
                .iter()
                .zip(&normals[..=i])
                .fold(T::zero(), |acc, (&l, &z)| acc + l * z);
            level = level + inc;
            values.push(level);
            off += i + 1;
        }
        Ok(values)
    }

    /// fBm path from the noise stream of `seed`; `antithetic` negates every
    /// Gaussian draw.
    pub fn sample_values(&self, seed: u64, antithetic: bool) -> Vec<T> {
        let normals = standard_normals(seed, NOISE_STREAM, self.n, antithetic);
        self.path_from_normals(&normals).expect("normal count matches grid")
    }

    pub fn sample(&self, seed: u64) -> SamplePath<T> {
        SamplePath {
            times: self.times.clone(),
            values: self.sample_values(seed, false),
            kind: PathKind::Fbm,
        }
    }
}

pub(crate) fn standard_normals<T: Real>(seed: u64, stream: u64, n: usize, negate: bool) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    (0..n)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            T::lit(if negate { -z } else { z })
        })
        .collect()
}

/// Cholesky factor of the symmetric Toeplitz matrix with first row `acov`,
/// packed row by row (row i holds i + 1 entries).
fn cholesky_toeplitz<T: Real>(acov: &[T]) -> Result<Vec<T>> {
    let n = acov.len();
    let mut l = vec![T::zero(); n * (n + 1) / 2];
    let row = |i: usize| i * (i + 1) / 2;
    for i in 0..n {
        for j in 0..=i {
            let (ri, rj) = (row(i), row(j));
            let mut s = acov[i - j];
            for k in 0..j {
                s = s - l[ri + k] * l[rj + k];
            }
            if i == j {
                if !(s > T::zero()) {
                    let scale = acov[0].as_f64();
                    let jitter = s.as_f64().abs() + scale * f64::from(n as u32) * T::epsilon().as_f64();
                    return Err(Error::Cholesky {
                        pivot: i,
                        suggested_jitter: jitter,
                    });
                }
                l[ri + i] = s.sqrt();
            } else {
                l[ri + j] = s / l[rj + j];
            }
        }
    }
    Ok(l)
}

pub fn sample_fbm<T: Real>(n: usize, horizon: T, hurst: T, seed: u64) -> Result<SamplePath<T>> {
    Ok(FbmSampler::new(n, horizon, hurst)?.sample(seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", rename_all = "snake_case", tag = "mode", content = "value")]
pub enum ThetaMode<T> {
    PriorDraw,
    Fixed(T),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct DrawnScenario<T> {
    pub theta: T,
    pub path: SamplePath<T>,
    pub seed: u64,
}

/// Observation sampler for repeated Monte Carlo draws on one grid.
#[derive(Debug, Clone)]
pub struct ObservationSampler<T> {
    params: ModelParams<T>,
    fbm: FbmSampler<T>,
}

impl<T: Real> ObservationSampler<T> {
    pub fn new(params: ModelParams<T>, n: usize, horizon: T) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            fbm: FbmSampler::new(n, horizon, params.hurst)?,
        })
    }

    pub fn fbm(&self) -> &FbmSampler<T> {
        &self.fbm
    }

    pub fn draw_theta(&self, mode: ThetaMode<T>, seed: u64, antithetic: bool) -> T {
        match mode {
            ThetaMode::Fixed(v) => v,
            ThetaMode::PriorDraw => {
                let z = standard_normals::<T>(seed, THETA_STREAM, 1, antithetic)[0];
                self.params.mu + self.params.sigma * z
            }
        }
    }

    pub fn draw(&self, mode: ThetaMode<T>, seed: u64, antithetic: bool) -> DrawnScenario<T> {
        let theta = self.draw_theta(mode, seed, antithetic);
        let mut values = self.fbm.sample_values(seed, antithetic);
        for (v, &t) in values.iter_mut().zip(self.fbm.times()) {
            *v = *v + theta * t;
        }
        DrawnScenario {
            theta,
            path: SamplePath {
                times: self.fbm.times().to_vec(),
                values,
                kind: PathKind::Observation,
            },
            seed,
        }
    }
}

pub fn sample_observation<T: Real>(
    params: &ModelParams<T>,
    mode: ThetaMode<T>,
    n: usize,
    horizon: T,
    seed: u64,
) -> Result<DrawnScenario<T>> {
    Ok(ObservationSampler::new(*params, n, horizon)?.draw(mode, seed, false))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covariance_examples() {
        assert!((fbm_covariance(1.0, 1.0, 0.3) - 1.0_f64).abs() < 1e-15);
        assert!((fbm_covariance(1.0, 2.0, 0.5) - 1.0_f64).abs() < 1e-15);
        let t = 2.7_f64;
        assert!((fbm_covariance(t, t, 0.75) - t.powf(1.5)).abs() < 1e-14);
    }

    #[test]
    fn factor_reproduces_covariance() {
        let (n, horizon, h) = (12, 3.0_f64, 0.3);
        let s = FbmSampler::new(n, horizon, h).unwrap();
        let step = horizon / n as f64;
        for i in 0..n {
            for j in 0..=i {
                let ri = i * (i + 1) / 2;
                let rj = j * (j + 1) / 2;
                let v: f64 = (0..=j).map(|k| s.chol[ri + k] * s.chol[rj + k]).sum();
                let want = fgn_autocovariance(i - j, step, h);
                assert!((v - want).abs() < 1e-13, "({i},{j})");
            }
        }
    }

    #[test]
    fn path_starts_at_zero_and_is_deterministic() {
        let a = sample_fbm(64, 1.0_f64, 0.7, 42).unwrap();
        let b = sample_fbm(64, 1.0_f64, 0.7, 42).unwrap();
        let c = sample_fbm(64, 1.0_f64, 0.7, 43).unwrap();
        assert_eq!(a.values()[0], 0.0);
        assert_eq!(a.times()[0], 0.0);
        assert_eq!(a.len(), 65);
        assert_eq!(a, b);
        assert_ne!(a.values(), c.values());
        assert_eq!(a.kind(), PathKind::Fbm);
    }

    #[test]
    fn fixed_zero_drift_gives_pure_fbm() {
        let p = ModelParams::new(0.5, 1.0, 0.3).unwrap();
        let sc = sample_observation(&p, ThetaMode::Fixed(0.0), 32, 2.0, 9).unwrap();
        let fbm = sample_fbm(32, 2.0, 0.3, 9).unwrap();
        assert_eq!(sc.path.values(), fbm.values());
        assert_eq!(sc.theta, 0.0);
        assert_eq!(sc.path.kind(), PathKind::Observation);
    }

    #[test]
    fn prior_and_fixed_share_path_noise() {
        let p = ModelParams::new(0.0, 1.0, 0.6).unwrap();
        let prior = sample_observation(&p, ThetaMode::PriorDraw, 16, 1.0, 5).unwrap();
        let fixed = sample_observation(&p, ThetaMode::Fixed(prior.theta), 16, 1.0, 5).unwrap();
        assert_eq!(prior.path, fixed.path);
    }

    #[test]
    fn antithetic_negates_everything_at_zero_mean() {
        let p = ModelParams::new(0.0, 2.0, 0.4).unwrap();
        let s = ObservationSampler::new(p, 16, 1.0).unwrap();
        let a = s.draw(ThetaMode::PriorDraw, 11, false);
        let b = s.draw(ThetaMode::PriorDraw, 11, true);
        assert_eq!(a.theta, -b.theta);
        for (x, y) in a.path.values().iter().zip(b.path.values()) {
            assert_eq!(*x, -*y);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(sample_fbm(1, 1.0_f64, 0.5, 0).is_err());
        assert!(sample_fbm(4, 0.0_f64, 0.5, 0).is_err());
        assert!(sample_fbm(4, 1.0_f64, 1.0, 0).is_err());
        assert!(SamplePath::new(vec![0.0, 1.0], vec![0.0], PathKind::Fbm).is_err());
        assert!(SamplePath::new(vec![0.0, 0.0], vec![0.0, 1.0], PathKind::Fbm).is_err());
        assert!(SamplePath::new(vec![0.1, 1.0], vec![0.0, 1.0], PathKind::Fbm).is_err());
    }

    #[test]
    fn cholesky_failure_suggests_jitter() {
        // Rank-one Toeplitz matrix: all ones.
        let err = cholesky_toeplitz(&[1.0_f64, 1.0, 1.0]).unwrap_err();
        match err {
            Error::Cholesky {
                pivot,
                suggested_jitter,
            } => {
                assert_eq!(pivot, 1);
                assert!(suggested_jitter > 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn uniform_step_detection() {
        let p = SamplePath::new(vec![0.0, 0.5, 1.0], vec![0.0, 0.1, 0.2], PathKind::Fbm).unwrap();
        assert_eq!(p.uniform_step().unwrap(), 0.5);
        let q = SamplePath::new(vec![0.0, 0.4, 1.0], vec![0.0, 0.1, 0.2], PathKind::Fbm).unwrap();
        assert!(matches!(q.uniform_step(), Err(Error::Contract(_))));
    }

    #[test]
    fn csv_export() {
        let p = SamplePath::new(vec![0.0, 0.5], vec![0.0, -0.25], PathKind::Fbm).unwrap();
        assert_eq!(p.to_csv(), "t,value\n0,0\n0.5,-0.25\n");
    }

    #[test]
    fn single_precision_sampler() {
        let p = sample_fbm(16, 1.0_f32, 0.7, 3).unwrap();
        assert_eq!(p.len(), 17);
        assert!(p.values().iter().all(|v| v.is_finite()));
    }
}
