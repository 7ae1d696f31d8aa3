//! Gamma/beta, digamma, the standard normal law and Gauss' hypergeometric
//! function on the negative real axis.

use crate::error::{domain, Error, Result};
use crate::real::Real;

// Lanczos approximation, g = 7, n = 9 (the widely published Godfrey set).
const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_6;
const MAX_SERIES_TERMS: usize = 20_000;

fn is_nonpositive_integer<T: Real>(x: T) -> bool {
    x <= T::zero() && x == x.round()
}

/// Lanczos sum for `ln Γ(x)`, valid for `x ≥ 1/2`.
fn ln_gamma_lanczos<T: Real>(x: T) -> T {
    let half = T::lit(0.5);
    let z = x - T::one();
    let mut acc = T::lit(LANCZOS_COEF[0]);
    for (k, &c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc = acc + T::lit(c) / (z + T::lit(k as f64));
    }
    let t = z + T::lit(LANCZOS_G) + half;
    half * (T::TAU()).ln() + (z + half) * t.ln() - t + acc.ln()
}

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma<T: Real>(x: T) -> Result<T> {
    if !(x > T::zero()) || !x.is_finite() {
        return Err(domain("ln_gamma argument", x.as_f64(), "x > 0"));
    }
    if x < T::lit(0.5) {
        // Reflection: Γ(x)Γ(1−x) = π / sin(πx); sin(πx) > 0 on (0, 1/2).
        let pi = T::PI();
        Ok((pi / (pi * x).sin()).ln() - ln_gamma_lanczos(T::one() - x))
    } else {
        Ok(ln_gamma_lanczos(x))
    }
}

/// Signed `Γ(x)` for any real `x` that is not a pole.
pub fn gamma<T: Real>(x: T) -> Result<T> {
    if !x.is_finite() || is_nonpositive_integer(x) {
        return Err(domain("gamma argument", x.as_f64(), "not a non-positive integer"));
    }
    if x > T::zero() {
        return Ok(ln_gamma(x)?.exp());
    }
    let pi = T::PI();
    Ok(pi / ((pi * x).sin() * ln_gamma(T::one() - x)?.exp()))
}

/// `1/Γ(x)`, an entire function: zero at the poles of Γ.
pub fn recip_gamma<T: Real>(x: T) -> Result<T> {
    if !x.is_finite() {
        return Err(domain("recip_gamma argument", x.as_f64(), "finite"));
    }
    if is_nonpositive_integer(x) {
        return Ok(T::zero());
    }
    if x > T::zero() {
        return Ok((-ln_gamma(x)?).exp());
    }
    let pi = T::PI();
    Ok((pi * x).sin() * ln_gamma(T::one() - x)?.exp() / pi)
}

/// `B(x, y)` via log-gamma. The expression is symmetric term by term, so
/// `beta(x, y) == beta(y, x)` holds bit for bit.
pub fn beta<T: Real>(x: T, y: T) -> Result<T> {
    if !(x > T::zero()) || !(y > T::zero()) {
        let bad = if x > T::zero() { y } else { x };
        return Err(domain("beta argument", bad.as_f64(), "x, y > 0"));
    }
    Ok((ln_gamma(x)? + ln_gamma(y)? - ln_gamma(x + y)?).exp())
}

/// Digamma `ψ(x)` for any real `x` that is not a pole.
pub fn digamma<T: Real>(x: T) -> Result<T> {
    if !x.is_finite() || is_nonpositive_integer(x) {
        return Err(domain("digamma argument", x.as_f64(), "not a non-positive integer"));
    }
    if x < T::zero() {
        let pi = T::PI();
        return Ok(digamma(T::one() - x)? - pi / (pi * x).tan());
    }
    let mut x = x;
    let mut acc = T::zero();
    let ten = T::lit(10.0);
    while x < ten {
        acc = acc - x.recip();
        x = x + T::one();
    }
    let x2 = (x * x).recip();
    // Asymptotic series with Bernoulli numbers B2..B12.
    let tail = x2
        * (T::lit(1.0 / 12.0)
            - x2 * (T::lit(1.0 / 120.0)
                - x2 * (T::lit(1.0 / 252.0)
                    - x2 * (T::lit(1.0 / 240.0) - x2 * (T::lit(1.0 / 132.0) - x2 * T::lit(691.0 / 32_760.0))))));
    Ok(acc + x.ln() - T::lit(0.5) / x - tail)
}

/// Standard normal density.
pub fn std_normal_pdf<T: Real>(x: T) -> T {
    (-T::lit(0.5) * x * x).exp() / T::TAU().sqrt()
}

/// Standard normal distribution function, accurate in relative terms in both
/// tails.
pub fn std_normal_cdf<T: Real>(x: T) -> T {
    T::lit(0.5) * erfc(-x / T::SQRT_2())
}

/// Complementary error function.
pub fn erfc<T: Real>(x: T) -> T {
    if x.is_nan() {
        return x;
    }
    if x < T::zero() {
        return T::lit(2.0) - erfc(-x);
    }
    if x < T::lit(2.5) {
        T::one() - erf_series(x)
    } else {
        erfc_continued_fraction(x)
    }
}

/// erf(x) = 2/√π · e^{−x²} Σ 2ⁿ x^{2n+1} / (1·3···(2n+1)); all terms positive.
fn erf_series<T: Real>(x: T) -> T {
    let two_x2 = T::lit(2.0) * x * x;
    let mut term = x;
    let mut sum = x;
    let eps = T::epsilon() * T::lit(0.5);
    let mut n = 0.0;
    while term > eps * sum {
        n += 1.0;
        term = term * two_x2 / T::lit(2.0 * n + 1.0);
        sum = sum + term;
    }
    T::FRAC_2_SQRT_PI() * (-x * x).exp() * sum
}

/// erfc(x) = e^{−x²}/√π · 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + …)))), modified Lentz.
fn erfc_continued_fraction<T: Real>(x: T) -> T {
    let tiny = T::min_positive_value() * T::lit(1e10);
    let eps = T::epsilon();
    let mut f = x;
    let mut c = x;
    let mut d = T::zero();
    for k in 1..500 {
        let a = T::lit(k as f64 * 0.5);
        d = x + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = x + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = d.recip();
        let delta = c * d;
        f = f * delta;
        if (delta - T::one()).abs() < eps {
            break;
        }
    }
    // Split e^{−x²} so it does not underflow before the division for large x.
    let e = (-x * x * T::lit(0.5)).exp();
    e * (e * (T::FRAC_2_SQRT_PI() * T::lit(0.5)) / f)
}

/// Gauss hypergeometric `₂F₁(a, b; c; z)` for real parameters and `z ≤ 0`.
///
/// `|z| ≤ 1/2` uses the power series; `−1 ≤ z < −1/2` the Pfaff transform
/// `z ↦ z/(z−1)`; `z < −1` the Pfaff transform followed by the connection
/// formula around `w = 1` (logarithmic form when the exponent difference is
/// zero). An integer nonzero exponent difference in that last branch is
/// reported as a domain error.
pub fn gauss_2f1<T: Real>(a: T, b: T, c: T, z: T) -> Result<T> {
    if !a.is_finite() || !b.is_finite() || !c.is_finite() {
        return Err(Error::InvalidParams("2F1 parameters must be finite".into()));
    }
    if is_nonpositive_integer(c) {
        return Err(domain("2F1 parameter c", c.as_f64(), "not a non-positive integer"));
    }
    if !(z <= T::zero()) || !z.is_finite() {
        return Err(domain("2F1 argument", z.as_f64(), "finite z <= 0"));
    }
    if z == T::zero() || a == T::zero() || b == T::zero() {
        return Ok(T::one());
    }
    // Terminating series are polynomials and can be summed anywhere.
    if is_nonpositive_integer(a) || is_nonpositive_integer(b) {
        return series_2f1(a, b, c, z);
    }
    let half = T::lit(0.5);
    if z >= -half {
        return series_2f1(a, b, c, z);
    }
    let one = T::one();
    let w = z / (z - one);
    let bp = c - b;
    let prefactor = (-a * (one - z).ln()).exp();
    if z >= -one || is_nonpositive_integer(bp) {
        return Ok(prefactor * series_2f1(a, bp, c, w)?);
    }
    // F(a, b'; c; w) with w ∈ (1/2, 1), expanded in y = 1 − w = 1/(1 − z).
    let y = (one - z).recip();
    Ok(prefactor * connection_near_one(a, bp, c, y)?)
}

fn series_2f1<T: Real>(a: T, b: T, c: T, z: T) -> Result<T> {
    let eps = T::epsilon() * T::lit(0.5);
    let mut term = T::one();
    let mut sum = T::one();
    let mut small_run = 0;
    for n in 0..MAX_SERIES_TERMS {
        let nn = T::lit(n as f64);
        term = term * (a + nn) * (b + nn) / ((c + nn) * (nn + T::one())) * z;
        sum = sum + term;
        if term == T::zero() {
            return Ok(sum);
        }
        if term.abs() <= eps * sum.abs() {
            small_run += 1;
            if small_run >= 2 {
                return Ok(sum);
            }
        } else {
            small_run = 0;
        }
    }
    Err(Error::NoConvergence {
        routine: "2F1 power series",
        terms: MAX_SERIES_TERMS,
    })
}

/// `₂F₁(a, b; c; 1 − y)` for `0 < y < 1/2`.
fn connection_near_one<T: Real>(a: T, b: T, c: T, y: T) -> Result<T> {
    let m = c - a - b;
    let one = T::one();
    if m == T::zero() {
        return log_case(a, b, y);
    }
    if m == m.round() {
        return Err(domain(
            "2F1 exponent difference c-a-b",
            m.as_f64(),
            "non-integer or zero when z < -1",
        ));
    }
    let gc = gamma(c)?;
    let first = gc * gamma(m)? * recip_gamma(c - a)? * recip_gamma(c - b)?;
    let second = gc * gamma(-m)? * recip_gamma(a)? * recip_gamma(b)?;
    let mut value = T::zero();
    if first != T::zero() {
        value = value + first * series_2f1(a, b, one - m, y)?;
    }
    if second != T::zero() {
        value = value + second * (m * y.ln()).exp() * series_2f1(c - a, c - b, one + m, y)?;
    }
    Ok(value)
}

/// `₂F₁(a, b; a + b; 1 − y)`:
/// Γ(a+b)/(Γ(a)Γ(b)) Σ (a)ₙ(b)ₙ/(n!)² [2ψ(n+1) − ψ(a+n) − ψ(b+n) − ln y] yⁿ.
fn log_case<T: Real>(a: T, b: T, y: T) -> Result<T> {
    let one = T::one();
    let eps = T::epsilon() * T::lit(0.5);
    let lny = y.ln();
    let mut psi_n1 = -T::lit(EULER_GAMMA);
    let mut psi_a = digamma(a)?;
    let mut psi_b = digamma(b)?;
    let mut coef = one;
    let mut sum = T::zero();
    let mut small_run = 0;
    for n in 0..MAX_SERIES_TERMS {
        let nn = T::lit(n as f64);
        let term = coef * (T::lit(2.0) * psi_n1 - psi_a - psi_b - lny);
        sum = sum + term;
        if term.abs() <= eps * sum.abs() {
            small_run += 1;
            if small_run >= 2 {
                let norm = gamma(a + b)? * recip_gamma(a)? * recip_gamma(b)?;
                return Ok(norm * sum);
            }
        } else {
            small_run = 0;
        }
        coef = coef * (a + nn) * (b + nn) / ((nn + one) * (nn + one)) * y;
        psi_n1 = psi_n1 + (nn + one).recip();
        psi_a = psi_a + (a + nn).recip();
        psi_b = psi_b + (b + nn).recip();
    }
    Err(Error::NoConvergence {
        routine: "2F1 logarithmic connection series",
        terms: MAX_SERIES_TERMS,
    })
}
