use std::fmt::Write as _;

use anyhow::{Context, Result};
use fbm_seqtest::boundary::{check_structure, node_residuals, solve_boundary, SolveOptions};
use fbm_seqtest::fbm_sim::{DrawnScenario, ObservationSampler, ThetaMode};
use fbm_seqtest::testbench::{estimate_risk, loss, outcomes_to_csv, risk_via_value, OutcomeRecord, RiskSimulator};
use fbm_seqtest::whitening::PosteriorTrajectory;
use fbm_seqtest::{BoundaryTable64, Model64, ModelParams64, RiskReport64};
use serde::Serialize;

use crate::io::{emit, load_boundary, render_boundary, save_boundary};
use crate::{
    BoundaryArgs, CheckArgs, Format, ModelArgs, PathArgs, RiskArgs, RunArgs, SimulateArgs, SolveArgs, TableArgs,
    UsageError,
};

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn model(args: &ModelArgs) -> Result<Model64> {
    Ok(Model64::from_values(args.mu, args.sigma, args.hurst)?)
}

fn validate_paths(p: &PathArgs, n_paths: usize) -> Result<()> {
    if n_paths == 0 {
        return Err(usage("--n-paths must be positive"));
    }
    if p.n_steps < 2 {
        return Err(usage("--n-steps must be at least 2"));
    }
    if !(p.horizon_r > 0.0 && p.horizon_r < 1.0) {
        return Err(usage(format!("--horizon-r must lie in (0, 1), got {}", p.horizon_r)));
    }
    Ok(())
}

fn seed(p: &PathArgs) -> u64 {
    p.seed.unwrap_or_else(|| {
        let s = rand::random::<u64>();
        eprintln!("using generated seed {s}");
        s
    })
}

fn theta_mode(theta: Option<f64>) -> Result<ThetaMode<f64>> {
    match theta {
        None => Ok(ThetaMode::PriorDraw),
        Some(v) if v.is_finite() => Ok(ThetaMode::Fixed(v)),
        Some(v) => Err(usage(format!("--theta must be finite, got {v}"))),
    }
}

fn solve(m: &Model64, s: &SolveArgs) -> Result<BoundaryTable64> {
    if !(s.tolerance > 0.0) {
        return Err(usage("--tolerance must be positive"));
    }
    let opts = SolveOptions {
        residual_tolerance: s.tolerance,
        extend_below_t0: s.extend_below_t0,
        ..SolveOptions::default()
    };
    let table = solve_boundary(m, s.n_grid, &opts).context("boundary solve failed")?;
    for w in &table.meta.warnings {
        eprintln!("warning: {w}");
    }
    Ok(table)
}

/// The table named by --boundary (fingerprint-checked), or a fresh solve.
fn table(m: &Model64, t: &TableArgs) -> Result<(BoundaryTable64, String)> {
    match &t.boundary {
        Some(path) => {
            let table = load_boundary(path)?;
            table
                .check_fingerprint(m)
                .with_context(|| format!("{} was solved for other parameters", path.display()))?;
            Ok((table, path.display().to_string()))
        }
        None => Ok((solve(m, &t.solve)?, "solved".into())),
    }
}

fn json<S: Serialize>(value: &S) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn boundary(a: &BoundaryArgs) -> Result<()> {
    let m = model(&a.model)?;
    let table = solve(&m, &a.solve)?;
    match &a.out.output {
        Some(path) => save_boundary(&table, path, a.out.format),
        None => emit(None, &render_boundary(&table, a.out.format)),
    }
}

#[derive(Serialize)]
struct SimulateArtifact {
    params: ModelParams64,
    n_steps: usize,
    horizon_r: f64,
    horizon: f64,
    seed: u64,
    theta_mode: ThetaMode<f64>,
    scenarios: Vec<DrawnScenario<f64>>,
}

pub fn simulate(a: &SimulateArgs) -> Result<()> {
    let m = model(&a.model)?;
    validate_paths(&a.path, a.n_paths)?;
    if a.out.format == Format::Csv && a.n_paths != 1 {
        return Err(usage(
            "CSV output holds a single path; use --n-paths 1 or --format json",
        ));
    }
    let mode = theta_mode(a.theta)?;
    let seed = seed(&a.path);
    let horizon = m.time_change(a.path.horizon_r)?;
    let sampler = ObservationSampler::new(m.params, a.path.n_steps, horizon)?;
    let scenarios: Vec<_> = (0..a.n_paths as u64)
        .map(|k| sampler.draw(mode, seed.wrapping_add(k), false))
        .collect();
    let text = match a.out.format {
        Format::Csv => scenarios[0].path.to_csv(),
        Format::Json => json(&SimulateArtifact {
            params: m.params,
            n_steps: a.path.n_steps,
            horizon_r: a.path.horizon_r,
            horizon,
            seed,
            theta_mode: mode,
            scenarios,
        })?,
    };
    emit(a.out.output.as_deref(), &text)
}

#[derive(Serialize)]
struct RunArtifact {
    params: ModelParams64,
    boundary: String,
    n_steps: usize,
    horizon_r: f64,
    horizon: f64,
    seed: u64,
    theta_mode: ThetaMode<f64>,
    outcomes: Vec<OutcomeRecord<f64>>,
    /// Posterior trajectory up to the stop; single-path runs only.
    trajectory: Option<PosteriorTrajectory<f64>>,
}

pub fn run(a: &RunArgs) -> Result<()> {
    let m = model(&a.model)?;
    validate_paths(&a.path, a.n_paths)?;
    let mode = theta_mode(a.theta)?;
    let (table, source) = table(&m, &a.table)?;
    let seed = seed(&a.path);
    let sim = RiskSimulator::new(&m, a.path.n_steps, a.path.horizon_r)?;
    let keep = a.n_paths == 1;
    let mut outcomes = Vec::with_capacity(a.n_paths);
    let mut trajectory = None;
    for k in 0..a.n_paths as u64 {
        let sc = sim.scenario(mode, seed.wrapping_add(k), false);
        let out = sim.run(&sc, &table, keep)?;
        outcomes.push(OutcomeRecord {
            seed: sc.seed,
            theta: sc.theta,
            tau: out.tau,
            rho: out.rho,
            decision: out.decision,
            loss: loss(sc.theta, out.tau, out.decision),
            stopped_by_horizon: out.stopped_by_horizon,
        });
        trajectory = out.trajectory;
    }
    let text = match a.out.format {
        Format::Csv => outcomes_to_csv(&outcomes),
        Format::Json => json(&RunArtifact {
            params: m.params,
            boundary: source,
            n_steps: a.path.n_steps,
            horizon_r: a.path.horizon_r,
            horizon: m.time_change(a.path.horizon_r)?,
            seed,
            theta_mode: mode,
            outcomes,
            trajectory,
        })?,
    };
    emit(a.out.output.as_deref(), &text)
}

#[derive(Serialize)]
struct RiskArtifact {
    params: ModelParams64,
    boundary: String,
    n_grid: usize,
    extended_below_t0: bool,
    report: RiskReport64,
}

fn risk_csv(r: &RiskReport64) -> String {
    let mut out = String::from("metric,value\n");
    let mut row = |k: &str, v: String| {
        let _ = writeln!(out, "{k},{v}");
    };
    row("mean_risk", r.mean_risk.to_string());
    row("std_error", r.std_error.to_string());
    row("n_paths", r.n_paths.to_string());
    row("mean_tau", r.mean_tau.to_string());
    row("error_rate", r.error_rate.to_string());
    row("mean_observation_cost", r.components.mean_observation_cost.to_string());
    row("mean_decision_loss", r.components.mean_decision_loss.to_string());
    row("truncated_fraction", r.truncated_fraction.to_string());
    row("horizon_r", r.horizon_r.to_string());
    row("n_steps", r.n_steps.to_string());
    row("seed", r.seed.to_string());
    if let Some(c) = &r.comparison {
        row("immediate_stop_risk", c.immediate_stop_risk.to_string());
        if let Some(v) = &c.transformed {
            row("transformed_mean_risk", v.mean.to_string());
            row("transformed_std_error", v.std_error.to_string());
            row("transformed_seed", v.seed.to_string());
        }
    }
    out
}

pub fn risk(a: &RiskArgs) -> Result<()> {
    let m = model(&a.model)?;
    validate_paths(&a.path, a.n_paths)?;
    let (table, source) = table(&m, &a.table)?;
    let seed = seed(&a.path);
    let mut report = estimate_risk(&m, &table, a.n_paths, a.path.n_steps, a.path.horizon_r, seed)?;
    // The transformed route takes the next, disjoint block of seeds.
    let value = risk_via_value(
        &m,
        &table,
        a.n_paths,
        a.path.horizon_r,
        seed.wrapping_add(a.n_paths as u64),
    )?;
    if let Some(c) = report.comparison.as_mut() {
        c.transformed = Some(value);
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let text = match a.out.format {
        Format::Csv => risk_csv(&report),
        Format::Json => json(&RiskArtifact {
            params: m.params,
            boundary: source,
            n_grid: table.meta.n_grid,
            extended_below_t0: table.meta.extended_below_t0,
            report,
        })?,
    };
    emit(a.out.output.as_deref(), &text)
}

#[derive(Debug, Serialize)]
struct CheckItem {
    name: &'static str,
    ok: bool,
    detail: String,
}

fn run_checks(m: &Model64, table: &BoundaryTable64, tolerance: f64) -> Result<Vec<CheckItem>> {
    let mut items = Vec::new();
    let mut push = |name, ok, detail: String| items.push(CheckItem { name, ok, detail });

    if let Err(e) = table.check_fingerprint(m) {
        push("fingerprint", false, e.to_string());
        return Ok(items);
    }
    push("fingerprint", true, "matches the requested parameters".into());
    match table.validate_shape() {
        Ok(()) => push("shape", true, format!("{} nodes", table.grid.len())),
        Err(e) => {
            push("shape", false, e.to_string());
            return Ok(items);
        }
    }
    let s = check_structure(table, m)?;
    let detail = if s.ok() {
        "ok".to_string()
    } else {
        s.violations.iter().take(5).cloned().collect::<Vec<_>>().join("; ")
    };
    push("monotone", s.monotone, String::new());
    push("positive", s.positive, String::new());
    push("terminal_zero", s.terminal_zero, String::new());
    push("bound", s.within_bound, detail);

    let max = node_residuals(table, m)?.into_iter().fold(0.0, f64::max);
    push(
        "residual",
        max <= tolerance,
        format!("max {max:.3e} (tolerance {tolerance:e})"),
    );

    let back = BoundaryTable64::from_json(&table.to_json());
    push(
        "json_round_trip",
        back.as_ref() == Ok(table),
        "to_json → from_json reproduces every value".into(),
    );
    let rows = table.to_csv().lines().count();
    push("csv_export", rows == table.grid.len() + 1, format!("{rows} lines"));
    Ok(items)
}

pub fn check(a: &CheckArgs) -> Result<()> {
    let m = model(&a.model)?;
    let tolerance = a.table.solve.tolerance;
    if !(tolerance > 0.0) {
        return Err(usage("--tolerance must be positive"));
    }
    // Load without the fingerprint gate so a mismatch is reported as a check.
    let table = match &a.table.boundary {
        Some(path) => load_boundary(path)?,
        None => solve(&m, &a.table.solve)?,
    };
    let items = run_checks(&m, &table, tolerance)?;
    for it in &items {
        let mark = if it.ok { "ok  " } else { "FAIL" };
        if it.detail.is_empty() {
            println!("{mark} {}", it.name);
        } else {
            println!("{mark} {}: {}", it.name, it.detail);
        }
    }
    if let Some(path) = &a.output {
        emit(Some(path.as_path()), &json(&items)?)?;
    }
    let failed = items.iter().filter(|i| !i.ok).count();
    if failed > 0 {
        anyhow::bail!("{failed} invariant check(s) failed");
    }
    Ok(())
}
