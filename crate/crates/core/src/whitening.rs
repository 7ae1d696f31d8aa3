//! Observation → whitened process → posterior statistics → Brownian
//! coordinates, on uniform grids.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbm_sim::{PathKind, SamplePath};
use crate::model::Model;
use crate::real::Real;
use crate::specfun::gauss_2f1;

/// K(t, s) = (t−s)^{½−H} ₂F₁(½−H, ½−H; 3/2−H; (s−t)/s) for 0 < s < t.
pub fn kernel<T: Real>(t: T, s: T, hurst: T) -> Result<T> {
    if !(s > T::zero() && s < t) {
        return Err(Error::Contract(format!("kernel needs 0 < s < t, got s = {s}, t = {t}")));
    }
    let a = T::lit(0.5) - hurst;
    let f = gauss_2f1(a, a, T::one() + a, (s - t) / s)?;
    Ok((a * (t - s).ln()).exp() * f)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct PosteriorTrajectory<T> {
    pub times: Vec<T>,
    pub a: Vec<T>,
    pub b: Vec<T>,
    pub r: Vec<T>,
    pub w: Vec<T>,
}

impl<T: Real> PosteriorTrajectory<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Posterior mean a_t/b_t of θ at index i.
    pub fn posterior_mean(&self, i: usize) -> T {
        self.a[i] / self.b[i]
    }

    pub fn posterior_variance(&self, i: usize) -> T {
        self.b[i].recip()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,r,a,b,w\n");
        for i in 0..self.len() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                self.times[i], self.r[i], self.a[i], self.b[i], self.w[i]
            );
        }
        out
    }
}

/// Precomputed midpoint-rule weights for one (model, grid) pair.
#[derive(Debug, Clone)]
pub struct Whitener<T> {
    model: Model<T>,
    n: usize,
    step: T,
    /// Row i (1 ≤ i ≤ n) holds C·K(t_i, m_j) for j < i, packed.
    weights: Vec<T>,
    /// L·m_j^{½−H}.
    drift_weights: Vec<T>,
}

impl<T: Real> Whitener<T> {
    pub fn new(model: &Model<T>, n: usize, step: T) -> Result<Self> {
        if n == 0 || !(step > T::zero()) {
            return Err(Error::InvalidParams(format!(
                "whitening grid needs n >= 1 and a positive step, got n = {n}, step = {step}"
            )));
        }
        let hurst = model.params.hurst;
        let half = T::lit(0.5);
        let expo = half - hurst;
        let c = model.consts.c_h;
        let mut weights = Vec::with_capacity(n * (n + 1) / 2);
        if expo == T::zero() {
            weights.resize(n * (n + 1) / 2, c);
        } else {
            for i in 1..=n {
                let ti = T::lit(i as f64);
                for j in 0..i {
                    // Dimensionless: K(t_i, m_j) = h^{½−H} K(i, j + ½).
                    let mj = T::lit(j as f64) + half;
                    let k = kernel(ti, mj, hurst)?;
                    weights.push(c * k * (expo * step.ln()).exp());
                }
            }
        }
        let l = model.consts.l_h;
        let drift_weights = (0..n)
            .map(|j| {
                let mj = (T::lit(j as f64) + half) * step;
                l * (expo * mj.ln()).exp()
            })
            .collect();
        Ok(Self {
            model: *model,
            n,
            step,
            weights,
            drift_weights,
        })
    }

    /// Whitener matching the grid of `path`.
    pub fn for_path(model: &Model<T>, path: &SamplePath<T>) -> Result<Self> {
        let step = path.uniform_step()?;
        Self::new(model, path.steps(), step)
    }

    pub fn model(&self) -> &Model<T> {
        &self.model
    }

    fn check_grid(&self, path: &SamplePath<T>) -> Result<()> {
        let step = path.uniform_step()?;
        if path.steps() != self.n || (step - self.step).abs() > T::lit(1e-9) * self.step {
            return Err(Error::Contract(format!(
                "path grid ({} steps of {step}) does not match the whitener ({} steps of {})",
                path.steps(),
                self.n,
                self.step
            )));
        }
        Ok(())
    }

    /// X_{t_i} = C Σ_{j<i} K(t_i, m_j) (Z_{t_{j+1}} − Z_{t_j}).
    pub fn whiten(&self, z: &SamplePath<T>) -> Result<SamplePath<T>> {
        self.check_grid(z)?;
        let vals = z.values();
        let dz: Vec<T> = vals.windows(2).map(|w| w[1] - w[0]).collect();
        let mut x = Vec::with_capacity(self.n + 1);
        x.push(T::zero());
        let mut off = 0;
        for i in 1..=self.n {
            let row = &self.weights[off..off + i];
            let v = row.iter().zip(&dz[..i]).fold(T::zero(), |acc, (&w, &d)| acc + w * d);
            x.push(v);
            off += i;
        }
        SamplePath::new(z.times().to_vec(), x, PathKind::Whitened)
    }

    /// Posterior statistics of the whitened path `x`.
    pub fn posterior(&self, x: &SamplePath<T>) -> Result<PosteriorTrajectory<T>> {
        self.check_grid(x)?;
        let m = &self.model;
        let (mu, sigma) = (m.params.mu, m.params.sigma);
        let len = x.len();
        let mut a = Vec::with_capacity(len);
        let mut b = Vec::with_capacity(len);
        let mut r = Vec::with_capacity(len);
        let mut w = Vec::with_capacity(len);
        let mut acc = m.a0();
        let xs = x.values();
        for (i, &t) in x.times().iter().enumerate() {
            if i > 0 {
                acc = acc + self.drift_weights[i - 1] * (xs[i] - xs[i - 1]);
            }
            let bi = m.precision_at(t);
            a.push(acc);
            b.push(bi);
            r.push(m.inverse_time_change(t)?);
            w.push((acc - mu * bi) / (sigma * bi));
        }
        Ok(PosteriorTrajectory {
            times: x.times().to_vec(),
            a,
            b,
            r,
            w,
        })
    }

    /// Whitening followed by the posterior statistics.
    pub fn observe(&self, z: &SamplePath<T>) -> Result<PosteriorTrajectory<T>> {
        self.posterior(&self.whiten(z)?)
    }
}

pub fn whiten<T: Real>(z: &SamplePath<T>, model: &Model<T>) -> Result<SamplePath<T>> {
    Whitener::for_path(model, z)?.whiten(z)
}

pub fn posterior_trajectory<T: Real>(x: &SamplePath<T>, model: &Model<T>) -> Result<PosteriorTrajectory<T>> {
    Whitener::for_path(model, x)?.posterior(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbm_sim::{sample_observation, uniform_grid, ThetaMode};

    fn model(mu: f64, sigma: f64, h: f64) -> Model<f64> {
        Model::from_values(mu, sigma, h).unwrap()
    }

    #[test]
    fn kernel_is_one_for_brownian_motion() {
        assert_eq!(kernel(1.0_f64, 0.3, 0.5).unwrap(), 1.0);
        assert!(kernel(1.0_f64, 1.0, 0.3).is_err());
        assert!(kernel(1.0_f64, 0.0, 0.3).is_err());
    }

    #[test]
    fn kernel_integral_matches_drift_identity() {
        // C ∫₀ᵗ K(t, s) ds = L t^{3/2−H}/(3/2−H); reference values at t = 1.
        for (h, want) in [(0.3, 0.791_791_782_490_363_951), (0.7, 1.137_723_174_594_692_393)] {
            let m = model(0.0, 1.0, h);
            // s = uᵖ/(uᵖ + (1−u)ᵖ) grades the mesh toward both singular ends.
            let n = 4000;
            let p = 3.0;
            let mut sum = 0.0;
            for k in 0..n {
                let u = (k as f64 + 0.5) / n as f64;
                let (up, vp) = (u.powf(p), (1.0 - u).powf(p));
                let s = up / (up + vp);
                let ds = p * (u * (1.0 - u)).powf(p - 1.0) / ((up + vp) * (up + vp)) / n as f64;
                sum += kernel(1.0, s, h).unwrap() * ds;
            }
            assert!((sum - want).abs() < 1e-6, "H={h}: {sum} vs {want}");
            let k = m.consts;
            let closed = k.l_h / (1.5 - h) / k.c_h;
            assert!((closed - want).abs() < 1e-12, "H={h}: closed form {closed}");
        }
    }

    #[test]
    fn brownian_case_is_identity() {
        let p = model(0.3, 1.0, 0.5);
        let sc = sample_observation(&p.params, ThetaMode::PriorDraw, 200, 2.0, 17).unwrap();
        let x = whiten(&sc.path, &p).unwrap();
        for (a, b) in x.values().iter().zip(sc.path.values()) {
            assert!((a - b).abs() < 1e-12);
        }
        let post = posterior_trajectory(&x, &p).unwrap();
        for i in 0..post.len() {
            assert!((post.b[i] - (1.0 + post.times[i])).abs() < 1e-12);
            assert!((post.a[i] - (0.3 + x.values()[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn trajectory_invariants() {
        for h in [0.3, 0.5, 0.7] {
            let m = model(-0.4, 1.7, h);
            let sc = sample_observation(&m.params, ThetaMode::PriorDraw, 64, 3.0, 1).unwrap();
            let w = Whitener::for_path(&m, &sc.path).unwrap();
            let post = w.observe(&sc.path).unwrap();
            assert_eq!(post.a[0], m.a0());
            assert_eq!(post.b[0], m.b0());
            assert_eq!(post.w[0], 0.0);
            assert_eq!(post.r[0], 0.0);
            assert!((post.posterior_mean(0) - -0.4).abs() < 1e-15);
            assert!((post.posterior_variance(0) - 1.7 * 1.7).abs() < 1e-14);
            for i in 1..post.len() {
                assert!(post.b[i] > post.b[i - 1]);
                assert!(post.r[i] > post.r[i - 1] && post.r[i] < 1.0);
                let back = m.time_change(post.r[i]).unwrap();
                assert!((back - post.times[i]).abs() < 1e-10 * post.times[i].max(1.0));
            }
        }
    }

    #[test]
    fn rejects_mismatched_grid() {
        let m = model(0.0, 1.0, 0.3);
        let w = Whitener::new(&m, 8, 0.25).unwrap();
        let times = uniform_grid(8, 1.0);
        let p = SamplePath::new(times, vec![0.0; 9], PathKind::Observation).unwrap();
        assert!(matches!(w.whiten(&p), Err(Error::Contract(_))));
        let uneven = SamplePath::new(vec![0.0, 0.1, 1.0], vec![0.0; 3], PathKind::Observation).unwrap();
        assert!(matches!(whiten(&uneven, &m), Err(Error::Contract(_))));
    }

    #[test]
    fn csv_header() {
        let m = model(0.0, 1.0, 0.5);
        let p = SamplePath::new(vec![0.0, 1.0], vec![0.0, 0.5], PathKind::Whitened).unwrap();
        let post = posterior_trajectory(&p, &m).unwrap();
        let csv = post.to_csv();
        assert!(csv.starts_with("t,r,a,b,w\n0,0,0,1,0\n"));
        assert_eq!(csv.lines().count(), 3);
    }
}
