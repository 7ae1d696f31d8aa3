//! Model parameters, derived constants, the observation cost in transformed
//! time, the time change and the Bayes payoffs.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::real::Real;
use crate::specfun::{beta, ln_gamma, std_normal_cdf, std_normal_pdf};

/// Prior N(μ, σ²) on the drift and the Hurst index of the noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ModelParams<T> {
    pub mu: T,
    pub sigma: T,
    pub hurst: T,
}

impl<T: Real> ModelParams<T> {
    pub fn new(mu: T, sigma: T, hurst: T) -> Result<Self> {
        let p = Self { mu, sigma, hurst };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu.is_finite() {
            return Err(Error::InvalidParams(format!("mu must be finite, got {}", self.mu)));
        }
        if !(self.sigma > T::zero()) || !self.sigma.is_finite() {
            return Err(Error::InvalidParams(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if !(self.hurst > T::zero() && self.hurst < T::one()) {
            return Err(Error::InvalidParams(format!(
                "hurst must lie in (0, 1), got {}",
                self.hurst
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct DerivedConstants<T> {
    /// Normalisation of the whitening kernel.
    pub c_h: T,
    /// Drift factor of the whitened process.
    pub l_h: T,
    /// γ = 1/(2 − 2H).
    pub gamma_exp: T,
    /// Left end of the region where the boundary is known to be monotone.
    pub t0: T,
    /// Scale of the observation cost in transformed time.
    pub m_const: T,
}

pub fn derive_constants<T: Real>(params: &ModelParams<T>) -> Result<DerivedConstants<T>> {
    params.validate()?;
    let h = params.hurst;
    let one = T::one();
    let two = T::lit(2.0);
    let half = T::lit(0.5);
    let three_half = T::lit(1.5);

    let ln_c2 =
        ln_gamma(two - two * h)? - (two * h).ln() - ln_gamma(half + h)? - T::lit(3.0) * ln_gamma(three_half - h)?;
    let c_h = (half * ln_c2).exp();
    let l_h = (two * h * (three_half - h) * beta(half + h, two - two * h)?)
        .sqrt()
        .recip();
    let gamma_exp = (two - two * h).recip();
    let t0 = ((one - two * h) / (T::lit(4.0) * (one - h))).max(T::zero());
    let sigma = params.sigma;
    let m_const = two / sigma * ((two - two * h) / (sigma * sigma * l_h * l_h)).powf(gamma_exp);
    Ok(DerivedConstants {
        c_h,
        l_h,
        gamma_exp,
        t0,
        m_const,
    })
}

/// Parameters plus their derived constants, computed once.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Model<T> {
    pub params: ModelParams<T>,
    pub consts: DerivedConstants<T>,
}

impl<T: Real> Model<T> {
    pub fn new(params: ModelParams<T>) -> Result<Self> {
        let consts = derive_constants(&params)?;
        Ok(Self { params, consts })
    }

    pub fn from_values(mu: T, sigma: T, hurst: T) -> Result<Self> {
        Self::new(ModelParams::new(mu, sigma, hurst)?)
    }

    /// Same (σ, H) with a different prior mean; the constants do not depend on μ.
    pub fn with_mu(&self, mu: T) -> Result<Self> {
        Self::from_values(mu, self.params.sigma, self.params.hurst)
    }

    /// f(t) = M (t/(1−t))^γ on [0, 1).
    pub fn cost(&self, t: T) -> Result<T> {
        if !(t >= T::zero() && t < T::one()) {
            return Err(domain("cost time", t.as_f64(), "0 <= t < 1"));
        }
        if t == T::zero() {
            return Ok(T::zero());
        }
        let k = &self.consts;
        Ok(k.m_const * (k.gamma_exp * (t / (T::one() - t)).ln()).exp())
    }

    /// f'(t) = Mγ t^{γ−1} (1−t)^{−γ−1}. At t = 0 the limit is returned when
    /// finite (γ ≥ 1); for γ < 1 it diverges and a domain error is raised.
    pub fn cost_rate(&self, t: T) -> Result<T> {
        if !(t >= T::zero() && t < T::one()) {
            return Err(domain("cost_rate time", t.as_f64(), "0 <= t < 1"));
        }
        let k = &self.consts;
        let g = k.gamma_exp;
        let one = T::one();
        if t == T::zero() {
            return if g > one {
                Ok(T::zero())
            } else if g == one {
                Ok(k.m_const)
            } else {
                Err(domain("cost_rate time", 0.0, "t > 0 when H < 1/2"))
            };
        }
        Ok(k.m_const * g * ((g - one) * t.ln() - (g + one) * (one - t).ln()).exp())
    }

    /// Observation time t(r) corresponding to transformed time r ∈ [0, 1).
    pub fn time_change(&self, r: T) -> Result<T> {
        if !(r >= T::zero() && r < T::one()) {
            return Err(domain("transformed time r", r.as_f64(), "0 <= r < 1"));
        }
        if r == T::zero() {
            return Ok(T::zero());
        }
        let (two, one) = (T::lit(2.0), T::one());
        let h = self.params.hurst;
        let s2l2 = self.sigma_l_sq();
        let base = (two - two * h) * r / (s2l2 * (one - r));
        Ok((self.consts.gamma_exp * base.ln()).exp())
    }

    /// Transformed time r(t) of observation time t ≥ 0.
    pub fn inverse_time_change(&self, t: T) -> Result<T> {
        if !(t >= T::zero()) || t.is_nan() {
            return Err(domain("observation time t", t.as_f64(), "t >= 0"));
        }
        if t == T::zero() {
            return Ok(T::zero());
        }
        if t.is_infinite() {
            return Ok(T::one());
        }
        let q = self.info_gain(t);
        Ok(q / (T::one() + q))
    }

    /// σ² L² t^{2−2H} / (2−2H): posterior precision gained by time t, in
    /// units of the prior precision.
    fn info_gain(&self, t: T) -> T {
        let two = T::lit(2.0);
        let e = two - two * self.params.hurst;
        self.sigma_l_sq() * (e * t.ln()).exp() / e
    }

    fn sigma_l_sq(&self) -> T {
        let s = self.params.sigma * self.consts.l_h;
        s * s
    }

    /// Prior precision 1/σ².
    pub fn b0(&self) -> T {
        (self.params.sigma * self.params.sigma).recip()
    }

    /// Prior natural parameter μ/σ² (computed as μ·b₀).
    pub fn a0(&self) -> T {
        self.params.mu * self.b0()
    }

    /// Posterior precision b_t = 1/σ² + L² t^{2−2H}/(2−2H).
    pub fn precision_at(&self, t: T) -> T {
        if t <= T::zero() {
            return self.b0();
        }
        let two = T::lit(2.0);
        let e = two - two * self.params.hurst;
        let l = self.consts.l_h;
        self.b0() + l * l * (e * t.ln()).exp() / e
    }

    /// Starting point μ/σ of the transformed process.
    pub fn start_point(&self) -> T {
        self.params.mu / self.params.sigma
    }

    /// Upper bound on the boundary: (1−t)^γ/(2M t^{γ−1}) beyond 2t₀, and the
    /// constant 1/(2f'(t₀)) otherwise (t₀ > 0 only when H < 1/2).
    pub fn boundary_bound(&self, t: T) -> Result<T> {
        let k = &self.consts;
        let two = T::lit(2.0);
        if !(t >= T::zero() && t <= T::one()) {
            return Err(domain("bound time", t.as_f64(), "0 <= t <= 1"));
        }
        if t == T::one() {
            return Ok(T::zero());
        }
        if k.t0 > T::zero() && t <= two * k.t0 {
            return Ok((two * self.cost_rate(k.t0)?).recip());
        }
        if t == T::zero() {
            // γ ≥ 1 here; the bound is finite only for γ = 1.
            return Ok(if k.gamma_exp == T::one() {
                (two * k.m_const).recip()
            } else {
                T::infinity()
            });
        }
        let g = k.gamma_exp;
        let one = T::one();
        Ok((g * (one - t).ln() - (g - one) * t.ln()).exp() / (two * k.m_const))
    }

    /// Risk of stopping immediately: h(μ/σ², 1/σ²).
    pub fn immediate_stop_risk(&self) -> Result<T> {
        bayes_payoff(self.a0(), self.b0())
    }

    /// h̃(a₀, b₀) = σφ(μ/σ) + |μ|(½ − Φ(−|μ|/σ)).
    pub fn initial_regularized_payoff(&self) -> T {
        let (mu, sigma) = (self.params.mu, self.params.sigma);
        sigma * std_normal_pdf(mu / sigma) + mu.abs() * (T::lit(0.5) - std_normal_cdf(-mu.abs() / sigma))
    }
}

/// h(a, b) = φ(a/√b)/√b − (|a|/b) Φ(−|a|/√b): the minimal posterior expected
/// decision loss when θ ~ N(a/b, 1/b).
pub fn bayes_payoff<T: Real>(a: T, b: T) -> Result<T> {
    if !(b > T::zero()) {
        return Err(domain("payoff precision b", b.as_f64(), "b > 0"));
    }
    let sb = b.sqrt();
    let aa = a.abs();
    let v = std_normal_pdf(aa / sb) / sb - aa / b * std_normal_cdf(-aa / sb);
    Ok(v.max(T::zero()))
}

/// h̃(a, b) = h(a, b) + |a|/(2b).
pub fn regularized_payoff<T: Real>(a: T, b: T) -> Result<T> {
    Ok(bayes_payoff(a, b)? + a.abs() / (T::lit(2.0) * b))
}
