use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use super::scenario::{parse_scenario_value, set_number, Scenario};
use crate::curveflow::{curve_region, radial_flow, run_with_bounds, FlowTrace, RadialTrajectory};
use crate::error::{Error, Result};
use crate::hypothesis::{check_two_potential_corollary, check_existence_hypotheses, CorollaryReport, HypothesisReport, Variant};
use crate::monitors::{
    self, classify, convexity_preservation, radial_samples, trace_samples, verify_sphere_bound, ConvexityReport,
    Outcome, SphereBoundReport, CSV_HEADER,
};
use crate::patch::{
    check_simons_hypersurface, check_structure_identities, estimate_order, evolution_residual_highercodim,
    evolution_residual_hypersurface, with_orders, IdentityEntry, IdentityResidualReport, Immersion,
};
use crate::potential::{PotentialField, Region};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_HYPOTHESES_UNMET: i32 = 2;
pub const EXIT_SINGULAR: i32 = 3;
pub const EXIT_NUMERICAL_FAILURE: i32 = 4;

/// Relative slack on the threshold monitor, max|A|² < (2m − M)(1 + slack).
pub const THRESHOLD_SLACK: f64 = 1e-2;

/// Exit code for a command that ended in an error.
pub fn error_exit_code(err: &Error) -> i32 {
    match err {
        Error::ImmersionFailure { .. } | Error::NumericalFailure { .. } | Error::StencilRoom { .. } => {
            EXIT_NUMERICAL_FAILURE
        }
        _ => EXIT_CHECK_FAILED,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdMonitor {
    pub threshold: f64,
    pub max_a2: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Headline {
    pub terminal_time: f64,
    pub extinction_time: Option<f64>,
    pub blow_up_time: Option<f64>,
    pub max_max_a2: f64,
    /// Smallest scalar curvature over the run (planar curves).
    pub min_convexity_margin: Option<f64>,
    /// Smallest relative margin above the sphere expansion bound.
    pub sphere_bound_margin: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub scenario: Scenario,
    #[serde(flatten)]
    pub outcome: Outcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure_reason: Option<String>,
    pub headline: Headline,
    pub steps: usize,
    pub remesh_count: usize,
    pub region_violation: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hypothesis: Option<HypothesisReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corollary: Option<CorollaryReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold_monitor: Option<ThresholdMonitor>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convexity: Option<ConvexityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sphere_bound: Option<SphereBoundReport>,
    pub exit_code: i32,
}

fn quadratic_coefficients(field: &PotentialField) -> Result<&[f64]> {
    match field {
        PotentialField::QuadraticDiagonal { coefficients } => Ok(coefficients),
        other => Err(Error::Scenario(format!(
            "the threshold check needs a quadratic-diagonal potential, got {}",
            other.kind_name()
        ))),
    }
}

fn region_for(scenario: &Scenario, trace_or_curve: &crate::curveflow::DiscreteCurve) -> Region {
    scenario
        .checks
        .region
        .clone()
        .unwrap_or_else(|| curve_region(trace_or_curve))
}

/// Hypothesis and corollary reports for the armed checks.
pub fn evaluate_hypotheses(scenario: &Scenario) -> Result<(Option<HypothesisReport>, Option<CorollaryReport>)> {
    let curve = scenario.initial_curve()?;
    let hypothesis = if scenario.checks.hypothesis {
        let region = region_for(scenario, &curve);
        Some(check_existence_hypotheses(&scenario.potential, &curve, Variant::for_ambient(curve.dim()), &region)?)
    } else {
        None
    };
    let corollary = if scenario.checks.threshold {
        Some(check_two_potential_corollary(quadratic_coefficients(&scenario.potential)?, &curve)?)
    } else {
        None
    };
    Ok((hypothesis, corollary))
}

fn hypotheses_met(h: &Option<HypothesisReport>, c: &Option<CorollaryReport>) -> bool {
    h.as_ref().is_none_or(|h| h.all_met) && c.as_ref().is_none_or(|c| c.holds())
}

/// Integrates the scenario with every armed monitor; no files are touched.
pub fn run_scenario(scenario: &Scenario) -> Result<(RunReport, FlowTrace)> {
    let curve0 = scenario.initial_curve()?;
    let config = scenario.flow_config()?;
    if scenario.checks.convexity && !scenario.potential.is_polynomial() {
        return Err(Error::Scenario(format!(
            "convexity check needs a constant or quadratic potential, got {}",
            scenario.potential.kind_name()
        )));
    }
    let (hypothesis, corollary) = evaluate_hypotheses(scenario)?;
    let region = region_for(scenario, &curve0);
    let dim = curve0.dim();
    let bounds = scenario
        .potential
        .hessian_eigen_bounds(&region, crate::curveflow::bounds_resolution(dim))?;
    let trace = run_with_bounds(&curve0, &scenario.potential, config, bounds.clone())?;
    let outcome = classify(&trace, config);
    let max_max_a2 = trace.max_max_a2();

    let threshold_monitor = corollary.as_ref().map(|c| ThresholdMonitor {
        threshold: c.threshold,
        max_a2: max_max_a2,
        holds: max_max_a2 < c.threshold * (1.0 + THRESHOLD_SLACK),
    });
    let convexity = if scenario.checks.convexity {
        Some(convexity_preservation(&trace, &scenario.potential)?)
    } else {
        None
    };
    let sphere_bound = if scenario.checks.sphere_bound {
        Some(verify_sphere_bound(&trace_samples(&trace), bounds.lambda_lo, 1)?)
    } else {
        None
    };

    let monitors_pass = threshold_monitor.as_ref().is_none_or(|m| m.holds)
        && convexity.as_ref().is_none_or(|c| !c.initially_convex || c.preserved)
        && sphere_bound.as_ref().is_none_or(|s| !s.hypothesis_met || s.holds);
    let exit_code = match outcome {
        Outcome::NumericalFailure { .. } => EXIT_NUMERICAL_FAILURE,
        Outcome::BlowUp { .. } | Outcome::Extinction { .. } => EXIT_SINGULAR,
        Outcome::ReachedHorizon { .. } if !monitors_pass => EXIT_CHECK_FAILED,
        Outcome::ReachedHorizon { .. } if !hypotheses_met(&hypothesis, &corollary) => EXIT_HYPOTHESES_UNMET,
        Outcome::ReachedHorizon { .. } => EXIT_OK,
    };
    let headline = Headline {
        terminal_time: outcome.time(),
        extinction_time: matches!(outcome, Outcome::Extinction { .. }).then(|| outcome.time()),
        blow_up_time: matches!(outcome, Outcome::BlowUp { .. }).then(|| outcome.time()),
        max_max_a2,
        min_convexity_margin: trace.min_min_kappa(),
        sphere_bound_margin: sphere_bound.as_ref().map(|s| s.min_relative_margin),
    };
    let report = RunReport {
        scenario: scenario.clone(),
        outcome,
        failure_reason: trace.terminal.reason.clone(),
        headline,
        steps: trace.records.len() - 1,
        remesh_count: trace.remesh_count,
        region_violation: trace.records.iter().any(|r| r.region_violation),
        hypothesis,
        corollary,
        threshold_monitor,
        convexity,
        sphere_bound,
        exit_code,
    };
    Ok((report, trace))
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_trace_csv(trace: &FlowTrace, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CSV_HEADER)?;
    for r in &trace.records {
        w.write_record(r.csv_row())?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_snapshots(trace: &FlowTrace, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut index = csv::Writer::from_path(dir.join("index.csv"))?;
    index.write_record(["index", "t"])?;
    for (k, snap) in trace.snapshots.iter().enumerate() {
        index.write_record([k.to_string(), fmt(snap.t)])?;
        let mut w = csv::Writer::from_path(dir.join(format!("{k:04}.csv")))?;
        let header = ["x", "y", "z"];
        let dim = snap.curve.dim();
        w.write_record(&header[..dim])?;
        for p in snap.curve.points() {
            w.write_record(p.iter().map(|v| fmt(*v)))?;
        }
        w.flush()?;
    }
    index.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// `simulate`: trace.csv, report.json and snapshots/ under `out`.
pub fn simulate(scenario: &Scenario, out: &Path) -> Result<RunReport> {
    let (report, trace) = run_scenario(scenario)?;
    fs::create_dir_all(out)?;
    write_trace_csv(&trace, &out.join("trace.csv"))?;
    if !trace.snapshots.is_empty() {
        write_snapshots(&trace, &out.join("snapshots"))?;
    }
    write_json(&report, &out.join("report.json"))?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hypothesis: Option<HypothesisReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corollary: Option<CorollaryReport>,
    pub exit_code: i32,
}

/// `check`: hypothesis evaluation only. With no check armed in the
/// scenario, the existence hypotheses are evaluated.
pub fn check(scenario: &Scenario, out: &Path) -> Result<CheckReport> {
    let mut armed = scenario.clone();
    if !armed.checks.hypothesis && !armed.checks.threshold {
        armed.checks.hypothesis = true;
    }
    let (hypothesis, corollary) = evaluate_hypotheses(&armed)?;
    let exit_code = if hypotheses_met(&hypothesis, &corollary) {
        EXIT_OK
    } else {
        EXIT_HYPOTHESES_UNMET
    };
    let report = CheckReport {
        hypothesis,
        corollary,
        exit_code,
    };
    fs::create_dir_all(out)?;
    write_json(&report, &out.join("hypothesis_report.json"))?;
    Ok(report)
}

fn evolution_entry<I: Immersion>(imm: &I, field: &PotentialField, points: &[Vec<f64>], eps: f64, h: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for u in points {
        let check = if imm.codim() == 1 {
            evolution_residual_hypersurface(imm, field, u, eps, h)?
        } else {
            evolution_residual_highercodim(imm, field, u, eps, h)?
        };
        worst = worst.max(check.relative);
    }
    Ok(worst)
}

/// Identity residuals at stencils h and h/2 with observed orders; with an
/// `eps` the relative residual of the |A|² evolution equation at ε and ε/2
/// is appended.
pub fn identity_report(scenario: &Scenario) -> Result<IdentityResidualReport> {
    let block = scenario
        .identities
        .as_ref()
        .ok_or_else(|| Error::Scenario("scenario has no identities block".into()))?;
    let patch = &block.patch;
    let reports = [block.h, 0.5 * block.h].map(|h| -> Result<IdentityResidualReport> {
        let mut r = check_structure_identities(patch, &block.points, h)?;
        if patch.codim() == 1 {
            r.extend(check_simons_hypersurface(patch, &block.points, h)?);
        }
        Ok(r)
    });
    let [coarse, fine] = reports;
    let mut report = with_orders(&coarse?, &fine?);
    if let Some(eps) = block.eps {
        let h = crate::patch::DEFAULT_STENCIL;
        let a = evolution_entry(patch, &scenario.potential, &block.points, eps, h)?;
        let b = evolution_entry(patch, &scenario.potential, &block.points, 0.5 * eps, h)?;
        report.entries.push(IdentityEntry {
            name: "evolution_a2".into(),
            residual: a,
            stencil: eps,
            order: Some(estimate_order(a, b)),
        });
    }
    Ok(report)
}

/// `verify-identities`: identity_report.json under `out`.
pub fn verify_identities(scenario: &Scenario, out: &Path) -> Result<IdentityResidualReport> {
    let report = identity_report(scenario)?;
    fs::create_dir_all(out)?;
    write_json(&report, &out.join("identity_report.json"))?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    /// Outcome name, or "error" when the run could not be carried out.
    pub outcome: String,
    pub terminal_time: Option<f64>,
    pub max_max_a2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn sweep_one(template: &Value, axis: &str, value: f64) -> SweepRow {
    let attempt = || -> Result<RunReport> {
        let mut doc = template.clone();
        set_number(&mut doc, axis, value)?;
        let scenario = parse_scenario_value(doc)?;
        Ok(run_scenario(&scenario)?.0)
    };
    match attempt() {
        Ok(report) => SweepRow {
            value,
            outcome: report.outcome.name().to_string(),
            terminal_time: Some(report.headline.terminal_time),
            max_max_a2: Some(report.headline.max_max_a2),
            error: None,
        },
        Err(e) => SweepRow {
            value,
            outcome: "error".into(),
            terminal_time: None,
            max_max_a2: None,
            error: Some(e.to_string()),
        },
    }
}

/// One run per value, in parallel; rows come back in the order of `values`.
pub fn sweep(template: &Value, axis: &str, values: &[f64]) -> Result<Vec<SweepRow>> {
    // reject a bad axis once rather than once per row
    let mut probe = template.clone();
    set_number(&mut probe, axis, values.first().copied().unwrap_or(0.0))?;
    Ok(values.par_iter().map(|v| sweep_one(template, axis, *v)).collect())
}

pub fn write_sweep_csv(axis: &str, rows: &[SweepRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([axis, "outcome", "terminal_time", "max_max_a2"])?;
    for row in rows {
        let opt = |v: Option<f64>| v.map(fmt).unwrap_or_default();
        w.write_record([fmt(row.value), row.outcome.clone(), opt(row.terminal_time), opt(row.max_max_a2)])?;
    }
    w.flush()?;
    Ok(())
}

/// `sweep`: sweep.csv under `out`.
pub fn sweep_to_dir(template: &Value, axis: &str, values: &[f64], out: &Path) -> Result<Vec<SweepRow>> {
    let rows = sweep(template, axis, values)?;
    fs::create_dir_all(out)?;
    write_sweep_csv(axis, &rows, &out.join("sweep.csv"))?;
    Ok(rows)
}

pub fn parse_values(list: &str) -> Result<Vec<f64>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| Error::Scenario(format!("sweep value `{s}` is not a number")))
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct RadialReport {
    pub scenario: Scenario,
    pub blow_down: Option<f64>,
    pub samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sphere_bound: Option<SphereBoundReport>,
    pub exit_code: i32,
}

/// The exact round-sphere reduction; radial.csv with t, R, s = ½R², |A|².
pub fn radial(scenario: &Scenario, out: &Path) -> Result<(RadialReport, RadialTrajectory)> {
    let block = scenario
        .radial
        .as_ref()
        .ok_or_else(|| Error::Scenario("scenario has no radial block".into()))?;
    let traj = radial_flow(block.n, &scenario.potential, block.r0, block.t_end, block.samples)?;
    let sphere_bound = if scenario.checks.sphere_bound {
        let bounds = scenario
            .potential
            .hessian_eigen_bounds(&Region::cube(block.n + 1, block.r0.max(1.0)), 3)?;
        Some(verify_sphere_bound(&radial_samples(&traj), bounds.lambda_lo, block.n)?)
    } else {
        None
    };
    let exit_code = match &sphere_bound {
        Some(s) if !s.hypothesis_met => EXIT_HYPOTHESES_UNMET,
        Some(s) if !s.holds => EXIT_CHECK_FAILED,
        _ if traj.blow_down.is_some_and(|t| t <= block.t_end) => EXIT_SINGULAR,
        _ => EXIT_OK,
    };
    fs::create_dir_all(out)?;
    let mut w = csv::Writer::from_path(out.join("radial.csv"))?;
    w.write_record(["t", "r", "s", "a2"])?;
    for s in &traj.states {
        w.write_record([fmt(s.t), fmt(s.r), fmt(s.s()), fmt(s.a2())])?;
    }
    w.flush()?;
    let report = RadialReport {
        scenario: scenario.clone(),
        blow_down: traj.blow_down,
        samples: traj.states.len(),
        sphere_bound,
        exit_code,
    };
    write_json(&report, &out.join("report.json"))?;
    Ok((report, traj))
}

/// Avoidance probe for two scenarios sharing a potential and snapshot grid.
pub fn avoidance_of(a: &Scenario, b: &Scenario) -> Result<monitors::AvoidanceReport> {
    if a.potential != b.potential {
        return Err(Error::Scenario("avoidance needs both curves under the same potential".into()));
    }
    let (_, ta) = run_scenario(a)?;
    let (_, tb) = run_scenario(b)?;
    monitors::avoidance(&ta, &tb)
}
