//! The stopping boundary A(t) on [t_min, 1]: solver, residual checker,
//! structural checks and (de)serialization.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::model::Model;
use crate::real::Real;
use crate::specfun::{std_normal_cdf, std_normal_pdf};

/// G(t, x) = E|ζ√(1−t) + x| − x.
pub fn g_func<T: Real>(t: T, x: T) -> Result<T> {
    if !(t >= T::zero() && t <= T::one()) {
        return Err(domain("G time", t.as_f64(), "0 <= t <= 1"));
    }
    if t == T::one() {
        return Ok(x.abs() - x);
    }
    let two = T::lit(2.0);
    let v = (T::one() - t).sqrt();
    Ok(two * v * std_normal_pdf(x / v) - two * x * std_normal_cdf(-x / v))
}

/// F(t, x, s, y) = f'(s) P(|ζ√(s−t) + x| ≤ y).
pub fn f_func<T: Real>(t: T, x: T, s: T, y: T, model: &Model<T>) -> Result<T> {
    if !(s > t && s < T::one()) {
        return Err(domain("F inner time s", s.as_f64(), "t < s < 1"));
    }
    if !(y >= T::zero()) {
        return Err(domain("F level y", y.as_f64(), "y >= 0"));
    }
    Ok(model.cost_rate(s)? * band_probability(x, y, (s - t).sqrt()))
}

/// P(|ζv + x| ≤ y) = Φ((y−x)/v) − Φ((−y−x)/v).
#[inline]
fn band_probability<T: Real>(x: T, y: T, v: T) -> T {
    if y <= T::zero() {
        return T::zero();
    }
    // Evaluate on the side where both arguments are non-positive so the
    // difference of two tail probabilities keeps its relative accuracy.
    let xa = x.abs();
    std_normal_cdf((y - xa) / v) - std_normal_cdf((-y - xa) / v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SolveOptions<T> {
    /// Exponent p of the graded mesh t_k = 1 − (1−t_min)(1−k/N)^p.
    pub grid_power: T,
    /// Offset ε: t_min = t₀ + ε (or ε alone when extending below t₀).
    pub t_min_offset: T,
    /// Absolute tolerance of the bisection in a.
    pub bisection_tol: T,
    /// Nodes whose step h exceeds `resolution`·q² (q the local
    /// constant-cost boundary) cannot resolve the boundary layer and take q.
    pub resolution: T,
    /// Residual level above which a warning is recorded.
    pub residual_tolerance: T,
    /// Also solve on (0, t₀] for H < 1/2; no monotonicity is enforced there.
    pub extend_below_t0: bool,
    /// Compute the residual at the interior nodes after solving.
    pub check_residual: bool,
}

impl<T: Real> Default for SolveOptions<T> {
    fn default() -> Self {
        Self {
            grid_power: T::lit(2.0),
            t_min_offset: T::lit(1e-4),
            bisection_tol: T::lit(1e-10),
            resolution: T::one(),
            residual_tolerance: T::lit(5e-3),
            extend_below_t0: false,
            check_residual: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SolveMeta<T> {
    pub n_grid: usize,
    pub grid_power: T,
    pub t_min: T,
    pub bisection_tol: T,
    pub resolution: T,
    pub resolved_nodes: usize,
    pub asymptotic_nodes: usize,
    pub monotone_clamps: usize,
    pub extended_below_t0: bool,
    pub residual_tolerance: T,
    pub max_residual: Option<T>,
    pub warnings: Vec<String>,
}

/// The (σ, H)-dependent quantities a table was solved for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fingerprint<T> {
    pub sigma: T,
    pub hurst: T,
    pub gamma: T,
    pub m_const: T,
    pub t0: T,
}

impl<T: Real> Fingerprint<T> {
    pub fn of(model: &Model<T>) -> Self {
        Self {
            sigma: model.params.sigma,
            hurst: model.params.hurst,
            gamma: model.consts.gamma_exp,
            m_const: model.consts.m_const,
            t0: model.consts.t0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct BoundaryTable<T> {
    pub sigma: T,
    pub hurst: T,
    pub gamma: T,
    pub m_const: T,
    pub t0: T,
    pub grid: Vec<T>,
    pub a: Vec<T>,
    pub meta: SolveMeta<T>,
}

impl<T: Real> BoundaryTable<T> {
    pub fn fingerprint(&self) -> Fingerprint<T> {
        Fingerprint {
            sigma: self.sigma,
            hurst: self.hurst,
            gamma: self.gamma,
            m_const: self.m_const,
            t0: self.t0,
        }
    }

    /// Contract error unless the table was solved for the (σ, H) of `model`
    /// and its stored constants agree with freshly derived ones.
    pub fn check_fingerprint(&self, model: &Model<T>) -> Result<()> {
        let want = Fingerprint::of(model);
        if self.sigma != want.sigma || self.hurst != want.hurst {
            return Err(Error::Contract(format!(
                "boundary table was solved for sigma = {}, hurst = {} but the model has sigma = {}, hurst = {}",
                self.sigma, self.hurst, want.sigma, want.hurst
            )));
        }
        let tol = T::lit(1e-12);
        let close = |a: T, b: T| (a - b).abs() <= tol * b.abs().max(T::one());
        if !close(self.gamma, want.gamma) || !close(self.m_const, want.m_const) || !close(self.t0, want.t0) {
            return Err(Error::Contract(
                "boundary table constants (gamma, m_const, t0) disagree with the model".into(),
            ));
        }
        Ok(())
    }

    /// Shape checks that any loaded table must pass.
    pub fn validate_shape(&self) -> Result<()> {
        let n = self.grid.len();
        if n < 2 || self.a.len() != n {
            return Err(Error::Parse(format!(
                "grid has {n} nodes and a has {} values",
                self.a.len()
            )));
        }
        if self.grid.windows(2).any(|w| !(w[1] > w[0])) || !(self.grid[0] > T::zero()) {
            return Err(Error::Parse("grid must be strictly increasing in (0, 1]".into()));
        }
        if self.grid[n - 1] != T::one() {
            return Err(Error::Parse("grid must end at t = 1".into()));
        }
        if self.a.iter().any(|v| !(v.is_finite() && *v >= T::zero())) {
            return Err(Error::Parse("boundary values must be finite and non-negative".into()));
        }
        if self.meta.n_grid + 1 != n {
            return Err(Error::Parse(format!(
                "meta.n_grid = {} does not match {} grid nodes",
                self.meta.n_grid, n
            )));
        }
        Ok(())
    }

    pub fn t_min(&self) -> T {
        self.grid[0]
    }

    /// Linear interpolation on [t_min, 1]; exact at nodes.
    pub fn boundary_at(&self, t: T) -> Result<T> {
        let lo = self.grid[0];
        if !(t >= lo && t <= T::one()) {
            return Err(Error::Range {
                t: t.as_f64(),
                lo: lo.as_f64(),
                hi: 1.0,
            });
        }
        Ok(self.interp(t))
    }

    /// Boundary held flat below the first node; used when monitoring from r = 0.
    pub fn boundary_at_clamped(&self, t: T) -> Result<T> {
        if !(t >= T::zero() && t <= T::one()) {
            return Err(Error::Range {
                t: t.as_f64(),
                lo: 0.0,
                hi: 1.0,
            });
        }
        Ok(self.interp(t.max(self.grid[0])))
    }

    fn interp(&self, t: T) -> T {
        let k = self.grid.partition_point(|&g| g <= t);
        if k == 0 {
            return self.a[0];
        }
        let k = k - 1;
        if k + 1 >= self.grid.len() || self.grid[k] == t {
            return self.a[k];
        }
        let (g0, g1) = (self.grid[k], self.grid[k + 1]);
        self.a[k] + (self.a[k + 1] - self.a[k]) * ((t - g0) / (g1 - g0))
    }

    /// Copy with every boundary value multiplied by `c`.
    pub fn scaled(&self, c: T) -> Self {
        let mut out = self.clone();
        for v in &mut out.a {
            *v = *v * c;
        }
        out.meta.max_residual = None;
        out.meta.warnings.push(format!("boundary values scaled by {c}"));
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("boundary table serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let table: Self = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        table.validate_shape()?;
        Ok(table)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,A\n");
        for (t, a) in self.grid.iter().zip(&self.a) {
            let _ = writeln!(out, "{t},{a}");
        }
        out
    }
}

/// Graded mesh t_k = 1 − (1−t_min)(1−k/N)^p, k = 0..N, ending exactly at 1.
pub fn graded_grid<T: Real>(t_min: T, n: usize, power: T) -> Vec<T> {
    let one = T::one();
    let nn = T::lit(n as f64);
    let mut g: Vec<T> = (0..=n)
        .map(|k| one - (one - t_min) * (one - T::lit(k as f64) / nn).powf(power))
        .collect();
    g[0] = t_min;
    g[n] = one;
    g
}

/// Backward induction for the boundary from A(1) = 0.
///
/// At node t_i the trapezoid rule over the later nodes (diagonal value
/// f'(t_i)/2, zero at s = 1) turns the integral equation into a scalar
/// equation in a, solved by bisection on [0, bound(t_i)]. Where the local
/// step is too coarse to resolve the boundary (h_i > κ q_i² with
/// q_i = 1/(2f'(t_i))) the node takes q_i, the boundary of the problem with
/// the cost rate frozen at f'(t_i). Roots are clamped to keep A
/// non-increasing on [t₀, 1].
pub fn solve_boundary<T: Real>(model: &Model<T>, n_grid: usize, opts: &SolveOptions<T>) -> Result<BoundaryTable<T>> {
    if n_grid < 50 {
        return Err(Error::InvalidParams(format!(
            "n_grid must be at least 50, got {n_grid}"
        )));
    }
    if !(opts.grid_power >= T::one()) || !(opts.t_min_offset > T::zero()) || !(opts.bisection_tol > T::zero()) {
        return Err(Error::InvalidParams(
            "solve options need grid_power >= 1 and positive t_min_offset, bisection_tol".into(),
        ));
    }
    if !(opts.resolution > T::zero()) {
        return Err(Error::InvalidParams("resolution must be positive".into()));
    }
    let k = model.consts;
    let extended = opts.extend_below_t0 && k.t0 > T::zero();
    let t_min = if extended {
        opts.t_min_offset
    } else {
        k.t0 + opts.t_min_offset
    };
    if !(t_min < T::one()) {
        return Err(Error::InvalidParams(format!("t_min = {t_min} must be below 1")));
    }
    let grid = graded_grid(t_min, n_grid, opts.grid_power);
    let n = n_grid;
    let fp: Vec<T> = grid[..n].iter().map(|&t| model.cost_rate(t)).collect::<Result<_>>()?;

    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let mut a = vec![T::zero(); n + 1];
    let (mut resolved, mut asymptotic, mut clamps) = (0, 0, 0);

    for i in (0..n).rev() {
        let t = grid[i];
        let step = grid[i + 1] - t;
        let bound = model.boundary_bound(t)?;
        let q = (two * fp[i]).recip().min(bound);
        let monotone_zone = t >= k.t0;

        if step > opts.resolution * q * q {
            a[i] = if monotone_zone { q.max(a[i + 1]) } else { q };
            asymptotic += 1;
            continue;
        }

        let defect = |x: T| -> T {
            // Trapezoid over s_i..s_N with F(s_i) = f'(t_i)/2, F(s_N) = 0.
            let mut prev = fp[i] * half;
            let mut integral = T::zero();
            for j in i + 1..=n {
                let cur = if j == n {
                    T::zero()
                } else {
                    fp[j] * band_probability(x, a[j], (grid[j] - t).sqrt())
                };
                integral = integral + half * (prev + cur) * (grid[j] - grid[j - 1]);
                prev = cur;
            }
            g_func(t, x).unwrap_or(T::nan()) - integral
        };

        let (d_lo, d_hi) = (defect(T::zero()), defect(bound));
        if !(d_lo > T::zero()) || d_hi > T::zero() {
            return Err(Error::Bracket {
                t: t.as_f64(),
                upper: bound.as_f64(),
                d_lo: d_lo.as_f64(),
                d_hi: d_hi.as_f64(),
            });
        }
        let (mut lo, mut hi) = (T::zero(), bound);
        for _ in 0..200 {
            if hi - lo <= opts.bisection_tol {
                break;
            }
            let mid = half * (lo + hi);
            if defect(mid) > T::zero() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let root = half * (lo + hi);
        resolved += 1;
        a[i] = if monotone_zone && root < a[i + 1] {
            clamps += 1;
            a[i + 1]
        } else {
            root
        };
    }

    let mut table = BoundaryTable {
        sigma: model.params.sigma,
        hurst: model.params.hurst,
        gamma: k.gamma_exp,
        m_const: k.m_const,
        t0: k.t0,
        grid,
        a,
        meta: SolveMeta {
            n_grid,
            grid_power: opts.grid_power,
            t_min,
            bisection_tol: opts.bisection_tol,
            resolution: opts.resolution,
            resolved_nodes: resolved,
            asymptotic_nodes: asymptotic,
            monotone_clamps: clamps,
            extended_below_t0: extended,
            residual_tolerance: opts.residual_tolerance,
            max_residual: None,
            warnings: Vec::new(),
        },
    };
    if extended {
        table
            .meta
            .warnings
            .push("values below t0 are not covered by the optimality theory".into());
    }
    if opts.check_residual {
        let res = node_residuals(&table, model)?;
        let max = res.iter().fold(T::zero(), |m, &r| m.max(r));
        table.meta.max_residual = Some(max);
        if max > opts.residual_tolerance {
            table.meta.warnings.push(format!(
                "max residual {max:e} exceeds tolerance {:e}",
                opts.residual_tolerance
            ));
        }
    }
    Ok(table)
}

/// Residuals at the interior nodes (both endpoints excluded).
pub fn node_residuals<T: Real>(table: &BoundaryTable<T>, model: &Model<T>) -> Result<Vec<T>> {
    let n = table.grid.len();
    table.grid[1..n - 1]
        .iter()
        .map(|&t| residual_at(table, model, t))
        .collect()
}

/// Max over `check_points` of |G(t, A(t)) − ∫_t^1 F(t, A(t), s, A(s)) ds|.
pub fn residual<T: Real>(table: &BoundaryTable<T>, model: &Model<T>, check_points: &[T]) -> Result<T> {
    check_points
        .iter()
        .try_fold(T::zero(), |m, &t| Ok(m.max(residual_at(table, model, t)?)))
}

/// Residual at one point, with the integral evaluated independently of the
/// solver: Simpson's rule on the doubled node grid in the variable
/// v = √(s−t), which removes the diagonal singularity, and a geometric
/// refinement of the first panel toward v = 0.
pub fn residual_at<T: Real>(table: &BoundaryTable<T>, model: &Model<T>, t: T) -> Result<T> {
    table.check_fingerprint(model)?;
    let lo = table.grid[0];
    if !(t >= lo && t < T::one()) {
        return Err(Error::Range {
            t: t.as_f64(),
            lo: lo.as_f64(),
            hi: 1.0,
        });
    }
    let x = table.interp(t);
    let one = T::one();
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let integrand = |v: T| -> Result<T> {
        let s = t + v * v;
        if v <= T::zero() || s >= one {
            return Ok(T::zero());
        }
        let y = table.interp(s);
        Ok(two * v * model.cost_rate(s)? * band_probability(x, y, v))
    };
    let simpson = |v0: T, v2: T, f0: T, f2: T, v1: T| -> Result<T> {
        let f1 = integrand(v1)?;
        let (h0, h1) = (v1 - v0, v2 - v1);
        let w = h0 + h1;
        Ok(w / T::lit(6.0) * ((two - h1 / h0) * f0 + w * w / (h0 * h1) * f1 + (two - h0 / h1) * f2))
    };

    let start = table.grid.partition_point(|&g| g <= t);
    let nodes = &table.grid[start..];
    let mut total = T::zero();

    // First panel [t, s_first]: geometric split in v toward 0.
    let v_first = (nodes[0] - t).sqrt();
    let f_first = integrand(v_first)?;
    let scale = if x > T::zero() {
        x
    } else {
        table.interp(nodes[0]).max(T::lit(1e-8))
    };
    let levels = ((v_first / (T::lit(0.01) * scale)).log2().ceil())
        .max(one)
        .min(T::lit(60.0))
        .to_usize()
        .unwrap_or(1);
    let mut right = v_first;
    let mut f_right = f_first;
    for _ in 0..levels {
        let left = right * half;
        let f_left = integrand(left)?;
        total = total + simpson(left, right, f_left, f_right, half * (left + right))?;
        right = left;
        f_right = f_left;
    }
    total = total + simpson(T::zero(), right, T::zero(), f_right, half * right)?;

    // Remaining panels, each with its s-midpoint.
    let mut f_prev = f_first;
    for w in nodes.windows(2) {
        let (s0, s1) = (w[0], w[1]);
        let (v0, v1) = ((s0 - t).sqrt(), (s1 - t).sqrt());
        let f1 = integrand(v1)?;
        let vm = (half * (s0 + s1) - t).sqrt();
        total = total + simpson(v0, v1, f_prev, f1, vm)?;
        f_prev = f1;
    }
    Ok((g_func(t, x)? - total).abs())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    pub monotone: bool,
    pub positive: bool,
    pub terminal_zero: bool,
    pub within_bound: bool,
    pub violations: Vec<String>,
}

impl StructureReport {
    pub fn ok(&self) -> bool {
        self.monotone && self.positive && self.terminal_zero && self.within_bound
    }
}

/// Non-increasing on [t₀, 1], strictly positive before 1, zero at 1, and
/// below the analytic bound at every node beyond 2t₀.
pub fn check_structure<T: Real>(table: &BoundaryTable<T>, model: &Model<T>) -> Result<StructureReport> {
    table.check_fingerprint(model)?;
    let n = table.grid.len();
    let t0 = model.consts.t0;
    let mut violations = Vec::new();
    let mut monotone = true;
    for k in 0..n - 1 {
        if table.grid[k] >= t0 && table.a[k + 1] > table.a[k] {
            monotone = false;
            violations.push(format!(
                "A increases from {} to {} between t = {} and {}",
                table.a[k],
                table.a[k + 1],
                table.grid[k],
                table.grid[k + 1]
            ));
        }
    }
    let mut positive = true;
    for k in 0..n - 1 {
        if !(table.a[k] > T::zero()) {
            positive = false;
            violations.push(format!("A({}) = {} is not positive", table.grid[k], table.a[k]));
        }
    }
    let terminal_zero = table.a[n - 1] == T::zero();
    if !terminal_zero {
        violations.push(format!("A(1) = {} instead of 0", table.a[n - 1]));
    }
    let mut within_bound = true;
    let slack = T::one() + T::lit(1e-12);
    for k in 0..n {
        let t = table.grid[k];
        if t > T::lit(2.0) * t0 {
            let b = model.boundary_bound(t)?;
            if table.a[k] > b * slack {
                within_bound = false;
                violations.push(format!("A({t}) = {} exceeds the bound {b}", table.a[k]));
            }
        }
    }
    Ok(StructureReport {
        monotone,
        positive,
        terminal_zero,
        within_bound,
        violations,
    })
}
