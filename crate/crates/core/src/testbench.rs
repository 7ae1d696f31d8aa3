//! Running the sequential test on simulated observations, and Monte Carlo
//! risk estimates in the original and in the transformed coordinates.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundary::BoundaryTable;
use crate::error::{Error, Result};
use crate::fbm_sim::{standard_normals, DrawnScenario, ObservationSampler, ThetaMode, NOISE_STREAM};
use crate::model::Model;
use crate::real::Real;
use crate::whitening::{PosteriorTrajectory, Whitener};

/// Fraction of horizon-truncated paths above which a report carries a warning.
pub const TRUNCATION_WARN_FRACTION: f64 = 0.01;

/// Sub-intervals per table interval when monitoring in r-time. Crossings are
/// only seen at monitoring points, which biases the risk upward by O(√Δr).
pub const MONITOR_SUBSTEPS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct TestOutcome<T> {
    /// Stopping time in observation time.
    pub tau: T,
    /// Stopping time in transformed time.
    pub rho: T,
    /// +1 accepts θ > 0, −1 accepts θ ≤ 0.
    pub decision: i8,
    pub stopped_by_horizon: bool,
    pub stop_index: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub trajectory: Option<PosteriorTrajectory<T>>,
}

/// sgn with sgn(0) = −1.
pub fn sign<T: Real>(x: T) -> i8 {
    if x > T::zero() {
        1
    } else {
        -1
    }
}

/// Loss τ + |θ|·1{d ≠ sgn θ}.
pub fn loss<T: Real>(theta: T, tau: T, decision: i8) -> T {
    if decision == sign(theta) {
        tau
    } else {
        tau + theta.abs()
    }
}

fn check_horizon<T: Real>(horizon_r: T) -> Result<()> {
    if !(horizon_r > T::zero() && horizon_r < T::one()) {
        return Err(Error::InvalidParams(format!(
            "horizon_r must lie in (0, 1), got {horizon_r}"
        )));
    }
    Ok(())
}

/// Stops at the first grid index with |a/(σb)| ≥ A(r) (the boundary is held
/// flat below its first node); otherwise at the last index within the
/// horizon.
pub fn stop_on_trajectory<T: Real>(
    trajectory: PosteriorTrajectory<T>,
    table: &BoundaryTable<T>,
    model: &Model<T>,
    horizon_r: T,
    keep_trajectory: bool,
) -> Result<TestOutcome<T>> {
    check_horizon(horizon_r)?;
    let t_h = model.time_change(horizon_r)?;
    let n = trajectory.len();
    let t_last = trajectory.times[n - 1];
    if t_last < t_h * (T::one() - T::lit(1e-9)) {
        return Err(Error::Contract(format!(
            "observation grid ends at t = {t_last}, before the horizon t = {t_h}"
        )));
    }
    let limit = t_h * (T::one() + T::lit(1e-12));
    let last = trajectory.times.partition_point(|&t| t <= limit).max(1) - 1;
    let sigma = model.params.sigma;
    let mut stop = None;
    for i in 0..=last {
        let x = trajectory.a[i] / (sigma * trajectory.b[i]);
        if x.abs() >= table.boundary_at_clamped(trajectory.r[i])? {
            stop = Some(i);
            break;
        }
    }
    let (idx, by_horizon) = match stop {
        Some(i) => (i, false),
        None => (last, true),
    };
    Ok(TestOutcome {
        tau: trajectory.times[idx],
        rho: trajectory.r[idx],
        decision: sign(trajectory.a[idx]),
        stopped_by_horizon: by_horizon,
        stop_index: idx,
        trajectory: keep_trajectory.then_some(trajectory),
    })
}

/// Runs the test with a prepared whitener (the grid must match the scenario).
pub fn run_test_with<T: Real>(
    whitener: &Whitener<T>,
    scenario: &DrawnScenario<T>,
    table: &BoundaryTable<T>,
    horizon_r: T,
    keep_trajectory: bool,
) -> Result<TestOutcome<T>> {
    let model = whitener.model();
    table.check_fingerprint(model)?;
    let traj = whitener.observe(&scenario.path)?;
    stop_on_trajectory(traj, table, model, horizon_r, keep_trajectory)
}

pub fn run_test<T: Real>(
    scenario: &DrawnScenario<T>,
    table: &BoundaryTable<T>,
    model: &Model<T>,
    horizon_r: T,
) -> Result<TestOutcome<T>> {
    table.check_fingerprint(model)?;
    let whitener = Whitener::for_path(model, &scenario.path)?;
    run_test_with(&whitener, scenario, table, horizon_r, true)
}

/// Per-path result of a Monte Carlo run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct OutcomeRecord<T> {
    pub seed: u64,
    pub theta: T,
    pub tau: T,
    pub rho: T,
    pub decision: i8,
    pub loss: T,
    pub stopped_by_horizon: bool,
}

pub fn outcomes_to_csv<T: Real>(records: &[OutcomeRecord<T>]) -> String {
    let mut out = String::from("seed,theta,tau,rho,decision,loss\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.seed, r.theta, r.tau, r.rho, r.decision, r.loss
        );
    }
    out
}

/// Observation-side Monte Carlo setup shared by [`simulate_outcomes`] and
/// [`estimate_risk`].
#[derive(Debug, Clone)]
pub struct RiskSimulator<T> {
    model: Model<T>,
    sampler: ObservationSampler<T>,
    whitener: Whitener<T>,
    horizon_r: T,
}

impl<T: Real> RiskSimulator<T> {
    pub fn new(model: &Model<T>, n_steps: usize, horizon_r: T) -> Result<Self> {
        check_horizon(horizon_r)?;
        let t_h = model.time_change(horizon_r)?;
        let sampler = ObservationSampler::new(model.params, n_steps, t_h)?;
        let whitener = Whitener::new(model, n_steps, t_h / T::lit(n_steps as f64))?;
        Ok(Self {
            model: *model,
            sampler,
            whitener,
            horizon_r,
        })
    }

    pub fn sampler(&self) -> &ObservationSampler<T> {
        &self.sampler
    }

    pub fn whitener(&self) -> &Whitener<T> {
        &self.whitener
    }

    pub fn scenario(&self, mode: ThetaMode<T>, seed: u64, antithetic: bool) -> DrawnScenario<T> {
        self.sampler.draw(mode, seed, antithetic)
    }

    pub fn run(&self, scenario: &DrawnScenario<T>, table: &BoundaryTable<T>, keep: bool) -> Result<TestOutcome<T>> {
        run_test_with(&self.whitener, scenario, table, self.horizon_r, keep)
    }

    /// One prior-drawn path, seeded by `seed`.
    pub fn outcome(&self, table: &BoundaryTable<T>, seed: u64) -> Result<OutcomeRecord<T>> {
        let sc = self.scenario(ThetaMode::PriorDraw, seed, false);
        let out = self.run(&sc, table, false)?;
        Ok(OutcomeRecord {
            seed,
            theta: sc.theta,
            tau: out.tau,
            rho: out.rho,
            decision: out.decision,
            loss: loss(sc.theta, out.tau, out.decision),
            stopped_by_horizon: out.stopped_by_horizon,
        })
    }

    /// Paths seeded `seed, seed + 1, …`; the result is ordered by seed and
    /// does not depend on the number of worker threads.
    pub fn outcomes(&self, table: &BoundaryTable<T>, n_paths: usize, seed: u64) -> Result<Vec<OutcomeRecord<T>>> {
        table.check_fingerprint(&self.model)?;
        (0..n_paths as u64)
            .into_par_iter()
            .map(|k| self.outcome(table, seed.wrapping_add(k)))
            .collect()
    }
}

pub fn simulate_outcomes<T: Real>(
    model: &Model<T>,
    table: &BoundaryTable<T>,
    n_paths: usize,
    n_steps: usize,
    horizon_r: T,
    seed: u64,
) -> Result<Vec<OutcomeRecord<T>>> {
    RiskSimulator::new(model, n_steps, horizon_r)?.outcomes(table, n_paths, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct RiskComponents<T> {
    pub mean_observation_cost: T,
    pub mean_decision_loss: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct RiskComparison<T> {
    /// h(μ/σ², 1/σ²): risk of deciding at once.
    pub immediate_stop_risk: T,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub transformed: Option<ValueRiskEstimate<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct RiskReport<T> {
    pub mean_risk: T,
    pub std_error: T,
    pub n_paths: usize,
    pub mean_tau: T,
    pub error_rate: T,
    pub components: RiskComponents<T>,
    pub comparison: Option<RiskComparison<T>>,
    pub truncated_fraction: T,
    pub horizon_r: T,
    pub n_steps: usize,
    pub seed: u64,
    pub warnings: Vec<String>,
}

fn mean_and_se<T: Real>(xs: &[T]) -> (T, T) {
    let n = T::lit(xs.len() as f64);
    let mean = xs.iter().fold(T::zero(), |a, &x| a + x) / n;
    if xs.len() < 2 {
        return (mean, T::zero());
    }
    let ss = xs.iter().fold(T::zero(), |a, &x| a + (x - mean) * (x - mean));
    (mean, (ss / (n - T::one()) / n).sqrt())
}

/// Aggregates per-path records into a report.
pub fn summarize<T: Real>(
    model: &Model<T>,
    records: &[OutcomeRecord<T>],
    n_steps: usize,
    horizon_r: T,
    seed: u64,
) -> Result<RiskReport<T>> {
    if records.is_empty() {
        return Err(Error::InvalidParams("no outcomes to summarize".into()));
    }
    let n = T::lit(records.len() as f64);
    let losses: Vec<T> = records.iter().map(|r| r.loss).collect();
    let (mean_risk, std_error) = mean_and_se(&losses);
    let mean_tau = records.iter().fold(T::zero(), |a, r| a + r.tau) / n;
    let wrong = records.iter().filter(|r| r.decision != sign(r.theta)).count();
    let truncated = records.iter().filter(|r| r.stopped_by_horizon).count();
    let truncated_fraction = T::lit(truncated as f64) / n;
    let mut warnings = Vec::new();
    if truncated_fraction > T::lit(TRUNCATION_WARN_FRACTION) {
        warnings.push(format!(
            "{truncated} of {} paths reached the horizon r = {horizon_r} without stopping; \
             the risk is biased low in the observation cost",
            records.len()
        ));
    }
    Ok(RiskReport {
        mean_risk,
        std_error,
        n_paths: records.len(),
        mean_tau,
        error_rate: T::lit(wrong as f64) / n,
        components: RiskComponents {
            mean_observation_cost: mean_tau,
            mean_decision_loss: mean_risk - mean_tau,
        },
        comparison: Some(RiskComparison {
            immediate_stop_risk: model.immediate_stop_risk()?,
            transformed: None,
        }),
        truncated_fraction,
        horizon_r,
        n_steps,
        seed,
        warnings,
    })
}

/// Monte Carlo Bayes risk E[τ + |θ|·1{d ≠ sgn θ}] with θ drawn from the prior.
pub fn estimate_risk<T: Real>(
    model: &Model<T>,
    table: &BoundaryTable<T>,
    n_paths: usize,
    n_steps: usize,
    horizon_r: T,
    seed: u64,
) -> Result<RiskReport<T>> {
    if n_paths < 100 {
        return Err(Error::InvalidParams(format!(
            "n_paths must be at least 100, got {n_paths}"
        )));
    }
    let records = simulate_outcomes(model, table, n_paths, n_steps, horizon_r, seed)?;
    summarize(model, &records, n_steps, horizon_r, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ValueRiskEstimate<T> {
    pub mean: T,
    pub std_error: T,
    pub n_paths: usize,
    pub mean_rho: T,
    pub truncated_fraction: T,
    pub horizon_r: T,
    pub seed: u64,
    pub warnings: Vec<String>,
}

/// Monitoring grid in transformed time: 0, a uniform fill of (0, t_min)
/// at the table's first spacing, then the table nodes up to the horizon,
/// and the horizon itself, each interval split into [`MONITOR_SUBSTEPS`].
pub fn monitoring_grid<T: Real>(table: &BoundaryTable<T>, horizon_r: T) -> Result<Vec<T>> {
    check_horizon(horizon_r)?;
    let g = &table.grid;
    let mut out = vec![T::zero()];
    let first = g[0].min(horizon_r);
    let spacing = g[1] - g[0];
    let fill = (first / spacing).floor().to_usize().unwrap_or(0);
    for k in 1..fill {
        out.push(first * T::lit(k as f64) / T::lit(fill as f64));
    }
    out.extend(g.iter().copied().filter(|&s| s <= horizon_r));
    if *out.last().expect("non-empty") < horizon_r {
        out.push(horizon_r);
    }
    let mut fine = Vec::with_capacity((out.len() - 1) * MONITOR_SUBSTEPS + 1);
    fine.push(T::zero());
    for w in out.windows(2) {
        let d = (w[1] - w[0]) / T::lit(MONITOR_SUBSTEPS as f64);
        for k in 1..MONITOR_SUBSTEPS {
            fine.push(w[0] + d * T::lit(k as f64));
        }
        fine.push(w[1]);
    }
    Ok(fine)
}

/// Transformed-coordinate path simulator for the value identity
/// R = (σ/2) E[f(ρ) − |W_ρ + μ/σ|] + h̃(a₀, b₀).
#[derive(Debug, Clone)]
struct ValueSimulator<T> {
    model: Model<T>,
    grid: Vec<T>,
    levels: Vec<T>,
    costs: Vec<T>,
    sqrt_dr: Vec<T>,
    base: T,
}

impl<T: Real> ValueSimulator<T> {
    fn new(model: &Model<T>, table: &BoundaryTable<T>, horizon_r: T) -> Result<Self> {
        table.check_fingerprint(model)?;
        let grid = monitoring_grid(table, horizon_r)?;
        let levels = grid
            .iter()
            .map(|&r| table.boundary_at_clamped(r))
            .collect::<Result<_>>()?;
        let costs = grid.iter().map(|&r| model.cost(r)).collect::<Result<_>>()?;
        let sqrt_dr = grid.windows(2).map(|w| (w[1] - w[0]).sqrt()).collect();
        Ok(Self {
            model: *model,
            grid,
            levels,
            costs,
            sqrt_dr,
            base: model.initial_regularized_payoff(),
        })
    }

    /// (value, ρ, truncated) for one Brownian path with boundary scaled by `scale`.
    fn path(&self, scale: T, seed: u64) -> (T, T, bool) {
        let noise: Vec<T> = standard_normals(seed, NOISE_STREAM, self.sqrt_dr.len(), false);
        let mut x = self.model.start_point();
        let last = self.grid.len() - 1;
        let mut idx = last;
        for k in 0..=last {
            if k > 0 {
                x = x + self.sqrt_dr[k - 1] * noise[k - 1];
            }
            if x.abs() >= scale * self.levels[k] {
                idx = k;
                break;
            }
        }
        let truncated = idx == last && x.abs() < scale * self.levels[last];
        let half_sigma = T::lit(0.5) * self.model.params.sigma;
        (
            half_sigma * (self.costs[idx] - x.abs()) + self.base,
            self.grid[idx],
            truncated,
        )
    }

    fn values(&self, scale: T, n_paths: usize, seed: u64) -> Vec<(T, T, bool)> {
        (0..n_paths as u64)
            .into_par_iter()
            .map(|k| self.path(scale, seed.wrapping_add(k)))
            .collect()
    }
}

fn summarize_values<T: Real>(vals: &[(T, T, bool)], horizon_r: T, seed: u64) -> ValueRiskEstimate<T> {
    let xs: Vec<T> = vals.iter().map(|v| v.0).collect();
    let (mean, std_error) = mean_and_se(&xs);
    let n = T::lit(vals.len() as f64);
    let truncated = vals.iter().filter(|v| v.2).count();
    let truncated_fraction = T::lit(truncated as f64) / n;
    let mut warnings = Vec::new();
    if truncated_fraction > T::lit(TRUNCATION_WARN_FRACTION) {
        warnings.push(format!(
            "{truncated} of {} paths reached the horizon r = {horizon_r}",
            vals.len()
        ));
    }
    ValueRiskEstimate {
        mean,
        std_error,
        n_paths: vals.len(),
        mean_rho: vals.iter().fold(T::zero(), |a, v| a + v.1) / n,
        truncated_fraction,
        horizon_r,
        seed,
        warnings,
    }
}

/// Risk through the transformed problem: Brownian paths in r-time started
/// at μ/σ and stopped at the boundary.
pub fn risk_via_value<T: Real>(
    model: &Model<T>,
    table: &BoundaryTable<T>,
    n_paths: usize,
    horizon_r: T,
    seed: u64,
) -> Result<ValueRiskEstimate<T>> {
    if n_paths == 0 {
        return Err(Error::InvalidParams("n_paths must be positive".into()));
    }
    let sim = ValueSimulator::new(model, table, horizon_r)?;
    Ok(summarize_values(&sim.values(T::one(), n_paths, seed), horizon_r, seed))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct PerturbationEntry<T> {
    pub scale: T,
    pub estimate: ValueRiskEstimate<T>,
    /// Paired mean of risk(scale) − risk(1) under common random numbers.
    pub diff_vs_unit: T,
    pub diff_std_error: T,
}

/// Risk of the boundary c·A for each scale c, with common random numbers.
pub fn perturbation_study<T: Real>(
    model: &Model<T>,
    table: &BoundaryTable<T>,
    scales: &[T],
    n_paths: usize,
    horizon_r: T,
    seed: u64,
) -> Result<Vec<PerturbationEntry<T>>> {
    if !scales.contains(&T::one()) {
        return Err(Error::InvalidParams("scales must include 1.0".into()));
    }
    if scales.iter().any(|&c| !(c > T::zero()) || !c.is_finite()) {
        return Err(Error::InvalidParams("scales must be positive".into()));
    }
    if n_paths < 2 {
        return Err(Error::InvalidParams("n_paths must be at least 2".into()));
    }
    let sim = ValueSimulator::new(model, table, horizon_r)?;
    let unit = sim.values(T::one(), n_paths, seed);
    scales
        .iter()
        .map(|&c| {
            let vals = if c == T::one() {
                unit.clone()
            } else {
                sim.values(c, n_paths, seed)
            };
            let diffs: Vec<T> = vals.iter().zip(&unit).map(|(v, u)| v.0 - u.0).collect();
            let (diff_vs_unit, diff_std_error) = mean_and_se(&diffs);
            Ok(PerturbationEntry {
                scale: c,
                estimate: summarize_values(&vals, horizon_r, seed),
                diff_vs_unit,
                diff_std_error,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::{solve_boundary, SolveOptions};

    fn setup(mu: f64, h: f64) -> (Model<f64>, BoundaryTable<f64>) {
        let m = Model::from_values(mu, 1.0, h).unwrap();
        let opts = SolveOptions {
            check_residual: false,
            ..SolveOptions::default()
        };
        let t = solve_boundary(&m, 100, &opts).unwrap();
        (m, t)
    }

    fn zero_table(t: &BoundaryTable<f64>) -> BoundaryTable<f64> {
        let mut z = t.clone();
        z.a.iter_mut().for_each(|v| *v = 0.0);
        z
    }

    #[test]
    fn sign_convention() {
        assert_eq!(sign(0.0), -1);
        assert_eq!(sign(-1.0), -1);
        assert_eq!(sign(1e-300), 1);
        assert_eq!(loss(0.5, 2.0, 1), 2.0);
        assert_eq!(loss(0.5, 2.0, -1), 2.5);
        assert_eq!(loss(0.0, 1.0, -1), 1.0);
    }

    #[test]
    fn zero_boundary_stops_at_once() {
        let (m, t) = setup(0.3, 0.5);
        let z = zero_table(&t);
        let sim = RiskSimulator::new(&m, 64, 0.5).unwrap();
        let sc = sim.scenario(ThetaMode::PriorDraw, 4, false);
        let out = run_test(&sc, &z, &m, 0.5).unwrap();
        assert_eq!(out.tau, 0.0);
        assert_eq!(out.rho, 0.0);
        assert_eq!(out.stop_index, 0);
        assert_eq!(out.decision, 1);
        assert!(!out.stopped_by_horizon);
    }

    #[test]
    fn large_prior_mean_stops_immediately() {
        let (m, t) = setup(5.0, 0.5);
        let sim = RiskSimulator::new(&m, 64, 0.5).unwrap();
        let sc = sim.scenario(ThetaMode::Fixed(-1.0), 1, false);
        let out = sim.run(&sc, &t, false).unwrap();
        assert_eq!(out.stop_index, 0);
        assert_eq!(out.decision, 1);
        let (m, t) = setup(-5.0, 0.7);
        let sim = RiskSimulator::new(&m, 64, 0.5).unwrap();
        let out = sim
            .run(&sim.scenario(ThetaMode::PriorDraw, 1, false), &t, false)
            .unwrap();
        assert_eq!((out.stop_index, out.decision), (0, -1));
    }

    #[test]
    fn outcome_tau_matches_time_change() {
        let (m, t) = setup(0.0, 0.7);
        let sim = RiskSimulator::new(&m, 128, 0.9).unwrap();
        for seed in 0..20 {
            let out = sim
                .run(&sim.scenario(ThetaMode::PriorDraw, seed, false), &t, true)
                .unwrap();
            let back = m.time_change(out.rho).unwrap();
            assert!((back - out.tau).abs() < 1e-10 * out.tau.max(1.0));
            let tr = out.trajectory.unwrap();
            assert_eq!(out.decision, sign(tr.a[out.stop_index]));
        }
    }

    #[test]
    fn horizon_stop_is_flagged() {
        let (m, t) = setup(0.0, 0.5);
        let big = t.scaled(1e6);
        let sim = RiskSimulator::new(&m, 32, 0.3).unwrap();
        let out = sim
            .run(&sim.scenario(ThetaMode::PriorDraw, 2, false), &big, false)
            .unwrap();
        assert!(out.stopped_by_horizon);
        assert_eq!(out.stop_index, 32);
        assert!((out.rho - 0.3).abs() < 1e-12);
    }

    #[test]
    fn short_grid_is_rejected() {
        let (m, t) = setup(0.0, 0.5);
        let sim = RiskSimulator::new(&m, 32, 0.3).unwrap();
        let sc = sim.scenario(ThetaMode::PriorDraw, 0, false);
        assert!(matches!(run_test(&sc, &t, &m, 0.6), Err(Error::Contract(_))));
    }

    #[test]
    fn fingerprint_is_enforced() {
        let (m, t) = setup(0.0, 0.5);
        let other = Model::from_values(0.0, 1.0, 0.6).unwrap();
        let sim = RiskSimulator::new(&other, 32, 0.3).unwrap();
        let sc = sim.scenario(ThetaMode::PriorDraw, 0, false);
        assert!(matches!(run_test(&sc, &t, &other, 0.3), Err(Error::Contract(_))));
        assert!(matches!(
            risk_via_value(&other, &t, 10, 0.3, 0),
            Err(Error::Contract(_))
        ));
        let _ = m;
    }

    #[test]
    fn decision_symmetry() {
        let (m, t) = setup(0.0, 0.3);
        let sim = RiskSimulator::new(&m, 128, 0.9).unwrap();
        for seed in 0..30 {
            let a = sim
                .run(&sim.scenario(ThetaMode::PriorDraw, seed, false), &t, false)
                .unwrap();
            let b = sim
                .run(&sim.scenario(ThetaMode::PriorDraw, seed, true), &t, false)
                .unwrap();
            assert_eq!(a.tau, b.tau);
            assert_eq!(a.decision, -b.decision);
        }
    }

    #[test]
    fn value_route_zero_table_is_exact() {
        let (m, t) = setup(0.0, 0.5);
        let est = risk_via_value(&m, &zero_table(&t), 50, 0.9, 3).unwrap();
        let phi0 = 0.398_942_280_401_432_7_f64;
        assert!((est.mean - phi0).abs() < 1e-15);
        assert!(est.std_error < 1e-15);
        assert_eq!(est.mean_rho, 0.0);
        // Starting inside the stopping set gives the immediate-stop value.
        let (m, t) = setup(3.0, 0.5);
        let est = risk_via_value(&m, &t, 20, 0.9, 3).unwrap();
        assert!((est.mean - m.immediate_stop_risk().unwrap()).abs() < 1e-14);
    }

    #[test]
    fn reports_are_deterministic_and_consistent() {
        let (m, t) = setup(0.0, 0.5);
        let a = estimate_risk(&m, &t, 200, 64, 0.6, 9).unwrap();
        let b = estimate_risk(&m, &t, 200, 64, 0.6, 9).unwrap();
        assert_eq!(a, b);
        let c = &a.components;
        assert!((c.mean_observation_cost + c.mean_decision_loss - a.mean_risk).abs() < 1e-12);
        assert!(a.std_error > 0.0);
        assert!(a.error_rate >= 0.0 && a.error_rate <= 1.0);
        assert!(estimate_risk(&m, &t, 50, 64, 0.6, 9).is_err());
    }

    #[test]
    fn perturbation_unit_scale_matches() {
        let (m, t) = setup(0.0, 0.5);
        let direct = risk_via_value(&m, &t, 300, 0.9, 5).unwrap();
        let study = perturbation_study(&m, &t, &[0.5, 1.0, 2.0], 300, 0.9, 5).unwrap();
        assert_eq!(study[1].estimate, direct);
        assert_eq!(study[1].diff_vs_unit, 0.0);
        assert!(perturbation_study(&m, &t, &[0.5, 2.0], 300, 0.9, 5).is_err());
    }

    #[test]
    fn monitoring_grid_fills_gap_below_first_node() {
        let (_, t) = setup(0.0, 0.3);
        let g = monitoring_grid(&t, 0.9).unwrap();
        assert_eq!(g[0], 0.0);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert!(g[1] < t.grid[0]);
        assert_eq!(*g.last().unwrap(), 0.9);
        let max_gap = g.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        assert!(max_gap <= 2.0 * (t.grid[1] - t.grid[0]) / MONITOR_SUBSTEPS as f64 + 1e-12);
    }

    #[test]
    fn outcome_csv() {
        let rec = OutcomeRecord {
            seed: 3,
            theta: -0.5,
            tau: 1.25,
            rho: 0.5,
            decision: 1,
            loss: 1.75,
            stopped_by_horizon: false,
        };
        assert_eq!(
            outcomes_to_csv(&[rec]),
            "seed,theta,tau,rho,decision,loss\n3,-0.5,1.25,0.5,1,1.75\n"
        );
    }
}
