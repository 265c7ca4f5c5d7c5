//! Per-step diagnostics, outcome classification and the comparison
//! checks run on finished traces.

use nalgebra::Vector3;
use serde::Serialize;

use crate::curveflow::{discrete_geometry, DiscreteCurve, VertexGeometry, FlowConfig, FlowTrace, RadialTrajectory, TerminalKind};
use crate::error::{Error, Result};
use crate::hypothesis::{pinch_poly, Variant};
use crate::potential::{HessianBounds, PotentialField};

/// Scalar curvatures above this count as convex.
pub const CONVEXITY_TOLERANCE: f64 = -1e-8;
/// Relative slack allowed below the comparison bound for spheres.
pub const SPHERE_BOUND_SLACK: f64 = 1e-9;

pub const CSV_HEADER: [&str; 7] = ["t", "max_a2", "min_kappa", "s_min", "length", "min_edge", "dt"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonitorRecord {
    pub t: f64,
    pub max_a2: f64,
    /// Planar curves only.
    pub min_kappa: Option<f64>,
    pub s_min: f64,
    pub length: f64,
    pub min_edge: f64,
    /// Step that produced this record; 0 for the initial curve.
    pub dt: f64,
    pub pinch_margin: f64,
    /// Some vertex left the region the bounds were computed on.
    pub region_violation: bool,
}

impl MonitorRecord {
    /// Row in [`CSV_HEADER`] order; an absent curvature is left empty.
    pub fn csv_row(&self) -> Vec<String> {
        let f = |v: f64| format!("{v:.16e}");
        vec![
            f(self.t),
            f(self.max_a2),
            self.min_kappa.map(f).unwrap_or_default(),
            f(self.s_min),
            f(self.length),
            f(self.min_edge),
            f(self.dt),
        ]
    }
}

/// Right side of the maximum-principle estimate for d|A|²/dt at a = max|A|:
/// twice the pinching polynomial of the matching codimension.
pub fn pinch_margin(a2: f64, bounds: &HessianBounds, variant: Variant) -> f64 {
    2.0 * pinch_poly(a2.sqrt(), bounds.c3, bounds.lambda_hi, bounds.lambda_lo, variant)
}

pub fn record(curve: &DiscreteCurve, field: &PotentialField, bounds: &HessianBounds, t: f64, dt: f64) -> Result<MonitorRecord> {
    if field.dimension() != curve.dim() {
        return Err(Error::DimensionMismatch {
            expected: curve.dim(),
            got: field.dimension(),
        });
    }
    Ok(record_from(curve, &discrete_geometry(curve)?, bounds, t, dt))
}

pub(crate) fn record_from(curve: &DiscreteCurve, geometry: &[VertexGeometry], bounds: &HessianBounds, t: f64, dt: f64) -> MonitorRecord {
    let max_a2 = geometry.iter().map(|g| g.a2).fold(0.0, f64::max);
    let min_kappa = (curve.dim() == 2).then(|| geometry.iter().filter_map(|g| g.kappa).fold(f64::INFINITY, f64::min));
    MonitorRecord {
        t,
        max_a2,
        min_kappa,
        s_min: curve.s_min(),
        length: curve.length(),
        min_edge: curve.min_edge(),
        dt,
        pinch_margin: pinch_margin(max_a2, bounds, Variant::for_ambient(curve.dim())),
        region_violation: !curve.points().all(|p| bounds.region.contains(p)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Outcome {
    ReachedHorizon { t: f64 },
    BlowUp { t: f64 },
    Extinction { t: f64 },
    NumericalFailure { t: f64 },
}

impl Outcome {
    pub fn name(&self) -> &'static str {
        match self {
            Outcome::ReachedHorizon { .. } => "reached_horizon",
            Outcome::BlowUp { .. } => "blow_up",
            Outcome::Extinction { .. } => "extinction",
            Outcome::NumericalFailure { .. } => "numerical_failure",
        }
    }

    pub fn time(&self) -> f64 {
        match *self {
            Outcome::ReachedHorizon { t }
            | Outcome::BlowUp { t }
            | Outcome::Extinction { t }
            | Outcome::NumericalFailure { t } => t,
        }
    }
}

pub fn classify(trace: &FlowTrace, config: &FlowConfig) -> Outcome {
    let t = trace.terminal.t;
    match trace.terminal.kind {
        TerminalKind::ReachedHorizon => Outcome::ReachedHorizon { t },
        TerminalKind::Extinction => Outcome::Extinction { t },
        TerminalKind::NumericalFailure => Outcome::NumericalFailure { t },
        TerminalKind::BlowUp => Outcome::BlowUp {
            t: trace
                .records
                .iter()
                .find(|r| r.max_a2 > config.blowup_a2)
                .map_or(t, |r| r.t),
        },
    }
}

pub fn min_curvature(curve: &DiscreteCurve) -> Result<f64> {
    if curve.dim() != 2 {
        return Err(Error::Unsupported(format!(
            "convexity is defined for planar curves, got ambient dimension {}",
            curve.dim()
        )));
    }
    Ok(discrete_geometry(curve)?.iter().filter_map(|g| g.kappa).fold(f64::INFINITY, f64::min))
}

pub fn convexity(curve: &DiscreteCurve) -> Result<bool> {
    Ok(min_curvature(curve)? >= CONVEXITY_TOLERANCE)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexityReport {
    pub initially_convex: bool,
    pub min_kappa: f64,
    pub preserved: bool,
}

/// Convexity along a planar trace; only meaningful for potentials with
/// vanishing third derivatives.
pub fn convexity_preservation(trace: &FlowTrace, field: &PotentialField) -> Result<ConvexityReport> {
    if !field.is_polynomial() {
        return Err(Error::Unsupported(format!(
            "convexity preservation needs a constant or quadratic potential, got {}",
            field.kind_name()
        )));
    }
    let kappas: Vec<f64> = trace.records.iter().map(|r| r.min_kappa).collect::<Option<_>>().ok_or_else(|| {
        Error::Unsupported("convexity is defined for planar curves only".into())
    })?;
    let min_kappa = kappas.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(ConvexityReport {
        initially_convex: kappas.first().is_some_and(|k| *k >= CONVEXITY_TOLERANCE),
        min_kappa,
        preserved: min_kappa >= CONVEXITY_TOLERANCE,
    })
}

fn point_segment_distance(p: &Vector3<f64>, a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    let e = b - a;
    let len2 = e.norm_squared();
    let s = if len2 > 0.0 { ((p - a).dot(&e) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (p - (a + e * s)).norm()
}

fn one_sided(from: &DiscreteCurve, to: &DiscreteCurve) -> f64 {
    let w = to.vertices();
    let n = w.len();
    from.vertices()
        .iter()
        .map(|p| (0..n).map(|j| point_segment_distance(p, &w[j], &w[(j + 1) % n])).fold(f64::INFINITY, f64::min))
        .fold(f64::INFINITY, f64::min)
}

/// Smallest vertex-to-segment distance between two polygons, both ways.
pub fn curve_distance(a: &DiscreteCurve, b: &DiscreteCurve) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(one_sided(a, b).min(one_sided(b, a)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AvoidanceReport {
    pub min_gap: f64,
    /// (t, gap) per shared snapshot.
    pub gaps: Vec<(f64, f64)>,
}

/// Inter-curve distance on the snapshot grid shared by two traces.
pub fn avoidance(a: &FlowTrace, b: &FlowTrace) -> Result<AvoidanceReport> {
    let n = a.snapshots.len().min(b.snapshots.len());
    if n == 0 {
        return Err(Error::MisalignedGrids("no snapshots to compare".into()));
    }
    let mut gaps = Vec::with_capacity(n);
    for (sa, sb) in a.snapshots.iter().zip(&b.snapshots) {
        if sa.t != sb.t {
            return Err(Error::MisalignedGrids(format!("snapshot times {} and {} differ", sa.t, sb.t)));
        }
        gaps.push((sa.t, curve_distance(&sa.curve, &sb.curve)?));
    }
    let min_gap = gaps.iter().map(|g| g.1).fold(f64::INFINITY, f64::min);
    Ok(AvoidanceReport { min_gap, gaps })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SphereBoundReport {
    pub n: usize,
    pub m: f64,
    /// 2m·s(0) − n.
    pub c0: f64,
    pub hypothesis_met: bool,
    /// s(t) ≥ (n + C₀e^{2mt})/(2m) up to the relative slack at every sample.
    pub holds: bool,
    /// min over samples of (s − bound)/bound.
    pub min_relative_margin: f64,
    /// max over samples of |s − bound|/bound.
    pub max_relative_deviation: f64,
    /// Same comparison against (n + C₀)e^{2mt}/(2m).
    pub printed_bound_holds: bool,
    pub printed_min_relative_margin: f64,
}

pub fn comparison_bound(n: usize, m: f64, c0: f64, t: f64) -> f64 {
    (n as f64 + c0 * (2.0 * m * t).exp()) / (2.0 * m)
}

pub fn printed_bound(n: usize, m: f64, c0: f64, t: f64) -> f64 {
    (n as f64 + c0) / (2.0 * m) * (2.0 * m * t).exp()
}

/// Checks samples (t, s) with s = ½|F|² against the expansion bound for
/// spheres S^n under potentials with Hessian at least m.
pub fn verify_sphere_bound(samples: &[(f64, f64)], m: f64, n: usize) -> Result<SphereBoundReport> {
    if !(m > 0.0) {
        return Err(Error::InvalidParameter(format!("m must be positive, got {m}")));
    }
    let &(t0, s0) = samples
        .first()
        .ok_or_else(|| Error::InvalidParameter("no samples".into()))?;
    if t0 != 0.0 {
        return Err(Error::InvalidParameter(format!("samples must start at t = 0, got {t0}")));
    }
    let c0 = 2.0 * m * s0 - n as f64;
    let hypothesis_met = c0 > 0.0;
    let mut min_rel = f64::INFINITY;
    let mut max_dev: f64 = 0.0;
    let mut printed_min = f64::INFINITY;
    for &(t, s) in samples {
        let g = comparison_bound(n, m, c0, t);
        let p = printed_bound(n, m, c0, t);
        min_rel = min_rel.min((s - g) / g);
        max_dev = max_dev.max(((s - g) / g).abs());
        printed_min = printed_min.min((s - p) / p);
    }
    Ok(SphereBoundReport {
        n,
        m,
        c0,
        hypothesis_met,
        holds: hypothesis_met && min_rel >= -SPHERE_BOUND_SLACK,
        min_relative_margin: min_rel,
        max_relative_deviation: max_dev,
        printed_bound_holds: hypothesis_met && printed_min >= -SPHERE_BOUND_SLACK,
        printed_min_relative_margin: printed_min,
    })
}

pub fn radial_samples(trajectory: &RadialTrajectory) -> Vec<(f64, f64)> {
    trajectory.states.iter().map(|s| (s.t, s.s())).collect()
}

pub fn trace_samples(trace: &FlowTrace) -> Vec<(f64, f64)> {
    trace.records.iter().map(|r| (r.t, r.s_min)).collect()
}
