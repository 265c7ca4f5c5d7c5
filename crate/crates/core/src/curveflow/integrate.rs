use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::curve::{discrete_geometry, DiscreteCurve, VertexGeometry};
use crate::error::{Error, Result};
use crate::monitors::{self, MonitorRecord};
use crate::potential::{HessianBounds, PotentialField, Region, DEFAULT_RESOLUTION};

/// Time steps below this are a numerical failure.
pub const DT_UNDERFLOW: f64 = 1e-14;
/// A curve shorter than this fraction of its initial length is extinct.
pub const EXTINCTION_FRACTION: f64 = 1e-3;
/// Upper bound of max|A|²·L²/(4π²) for a curve to count as shrinking round
/// (exactly 1 on circles).
pub const ROUNDNESS_LIMIT: f64 = 4.0;

fn default_cfl() -> f64 {
    0.4
}
fn default_dt_max() -> f64 {
    1e-2
}
fn default_remesh_ratio() -> f64 {
    3.0
}
fn default_blowup_a2() -> f64 {
    1e6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "default_dt_max")]
    pub dt_max: f64,
    pub t_end: f64,
    #[serde(default = "default_remesh_ratio")]
    pub remesh_ratio: f64,
    #[serde(default = "default_blowup_a2")]
    pub blowup_a2: f64,
    /// Time between curve snapshots; none are kept when absent.
    #[serde(default)]
    pub snapshot_every: Option<f64>,
}

impl FlowConfig {
    pub fn new(t_end: f64) -> Self {
        FlowConfig {
            cfl: default_cfl(),
            dt_max: default_dt_max(),
            t_end,
            remesh_ratio: default_remesh_ratio(),
            blowup_a2: default_blowup_a2(),
            snapshot_every: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{what} must be positive, got {v}")))
            }
        };
        positive(self.cfl, "cfl")?;
        if self.cfl > 1.0 {
            return Err(Error::InvalidParameter(format!("cfl must be at most 1, got {}", self.cfl)));
        }
        positive(self.dt_max, "dt_max")?;
        positive(self.t_end, "t_end")?;
        positive(self.blowup_a2, "blowup_a2")?;
        if !(self.remesh_ratio > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "remesh_ratio must exceed 1, got {}",
                self.remesh_ratio
            )));
        }
        if let Some(s) = self.snapshot_every {
            positive(s, "snapshot_every")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalKind {
    ReachedHorizon,
    BlowUp,
    Extinction,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TerminalStatus {
    pub kind: TerminalKind,
    pub t: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub curve: DiscreteCurve,
}

#[derive(Debug, Clone)]
pub struct FlowTrace {
    pub records: Vec<MonitorRecord>,
    pub snapshots: Vec<Snapshot>,
    pub terminal: TerminalStatus,
    pub final_curve: DiscreteCurve,
    pub initial_length: f64,
    pub bounds: HessianBounds,
    pub remesh_count: usize,
}

impl FlowTrace {
    pub fn max_max_a2(&self) -> f64 {
        self.records.iter().map(|r| r.max_a2).fold(0.0, f64::max)
    }

    /// Smallest scalar curvature over all records (planar curves).
    pub fn min_min_kappa(&self) -> Option<f64> {
        self.records
            .iter()
            .filter_map(|r| r.min_kappa)
            .reduce(f64::min)
    }
}

/// dF/dt = κ⃗ + ∇ω with the tangential part removed.
pub fn velocity(curve: &DiscreteCurve, field: &PotentialField) -> Result<Vec<Vector3<f64>>> {
    if field.dimension() != curve.dim() {
        return Err(Error::DimensionMismatch {
            expected: curve.dim(),
            got: field.dimension(),
        });
    }
    velocity_from(curve, &discrete_geometry(curve)?, field)
}

fn velocity_from(curve: &DiscreteCurve, geometry: &[VertexGeometry], field: &PotentialField) -> Result<Vec<Vector3<f64>>> {
    geometry
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let grad = field.gradient(curve.point(i))?;
            let w = g.kappa_vec + Vector3::new(grad[0], grad[1], grad.get(2).copied().unwrap_or(0.0));
            Ok(w - g.tangent * g.tangent.dot(&w))
        })
        .collect()
}

/// cfl·ℓ²/(2(1 + ℓ·max|v|)) capped at dt_max, ℓ the shortest edge.
pub fn adapt_dt(curve: &DiscreteCurve, velocities: &[Vector3<f64>], config: &FlowConfig) -> f64 {
    let l = curve.min_edge();
    let vmax = velocities.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let w = vmax / l;
    (config.cfl * l * l / (2.0 * (1.0 + l * l * w))).min(config.dt_max)
}

/// One explicit Euler step; the result must satisfy every curve invariant.
pub fn step_explicit(curve: &DiscreteCurve, field: &PotentialField, dt: f64) -> Result<DiscreteCurve> {
    let v = velocity(curve, field)?;
    Ok(advance(curve, &v, dt)?)
}

fn advance(curve: &DiscreteCurve, velocities: &[Vector3<f64>], dt: f64) -> Result<DiscreteCurve> {
    let moved = curve
        .vertices()
        .iter()
        .zip(velocities)
        .map(|(p, v)| p + v * dt)
        .collect();
    let next = DiscreteCurve::from_vectors(curve.dim(), moved);
    next.check_invariants()?;
    Ok(next)
}

/// Redistributes the vertices at equal arclength along the polygon,
/// starting from vertex 0.
pub fn remesh(curve: &DiscreteCurve) -> Result<DiscreteCurve> {
    let v = curve.vertices();
    let n = v.len();
    let edges = curve.edge_lengths();
    let total: f64 = edges.iter().sum();
    let spacing = total / n as f64;
    let mut out = Vec::with_capacity(n);
    out.push(v[0]);
    let mut edge = 0;
    let mut walked = 0.0;
    for k in 1..n {
        let target = spacing * k as f64;
        while edge < n - 1 && walked + edges[edge] < target {
            walked += edges[edge];
            edge += 1;
        }
        let s = ((target - walked) / edges[edge]).clamp(0.0, 1.0);
        out.push(v[edge] + (v[(edge + 1) % n] - v[edge]) * s);
    }
    let next = DiscreteCurve::from_vectors(curve.dim(), out);
    next.check_invariants()?;
    Ok(next)
}

/// Lattice resolution for sampled Hessian bounds in dimension `dim`.
pub fn bounds_resolution(dim: usize) -> usize {
    if dim <= 2 {
        DEFAULT_RESOLUTION
    } else {
        41
    }
}

/// Hessian bounds over the bounding box of `curve` padded by its own size.
pub fn default_bounds(curve: &DiscreteCurve, field: &PotentialField) -> Result<HessianBounds> {
    let region = curve_region(curve);
    field.hessian_eigen_bounds(&region, bounds_resolution(curve.dim()))
}

pub fn curve_region(curve: &DiscreteCurve) -> Region {
    let tight = Region::bounding(curve.dim(), curve.points(), 0.0);
    let size = tight
        .lo
        .iter()
        .zip(&tight.hi)
        .map(|(lo, hi)| hi - lo)
        .fold(0.0, f64::max);
    Region::bounding(curve.dim(), curve.points(), 0.5 * size)
}

/// Integrates the flow from `curve0` until the horizon, extinction,
/// blow-up or a numerical failure.
pub fn run(curve0: &DiscreteCurve, field: &PotentialField, config: &FlowConfig) -> Result<FlowTrace> {
    let bounds = default_bounds(curve0, field)?;
    run_with_bounds(curve0, field, config, bounds)
}

pub fn run_with_bounds(
    curve0: &DiscreteCurve,
    field: &PotentialField,
    config: &FlowConfig,
    bounds: HessianBounds,
) -> Result<FlowTrace> {
    config.validate()?;
    if field.dimension() != curve0.dim() {
        return Err(Error::DimensionMismatch {
            expected: curve0.dim(),
            got: field.dimension(),
        });
    }
    curve0.check_invariants()?;

    let initial_length = curve0.length();
    let mut curve = curve0.clone();
    let mut t = 0.0;
    let mut geometry = discrete_geometry(&curve)?;
    let mut records = vec![monitors::record_from(&curve, &geometry, &bounds, t, 0.0)];
    let mut snapshots = Vec::new();
    let mut next_snapshot = 0usize;
    if config.snapshot_every.is_some() {
        snapshots.push(Snapshot { t, curve: curve.clone() });
        next_snapshot = 1;
    }
    let mut remesh_count = 0;
    // grid times within rounding of the horizon snap onto it
    let snapshot_time = |k: usize| {
        config.snapshot_every.map(|s| {
            let ts = s * k as f64;
            if (ts - config.t_end).abs() <= 1e-9 * s {
                config.t_end
            } else {
                ts
            }
        })
    };

    let terminal = loop {
        if t >= config.t_end {
            break TerminalStatus {
                kind: TerminalKind::ReachedHorizon,
                t,
                reason: None,
            };
        }
        let fail = |t: f64, reason: String| TerminalStatus {
            kind: TerminalKind::NumericalFailure,
            t,
            reason: Some(reason),
        };
        let v = match velocity_from(&curve, &geometry, field) {
            Ok(v) => v,
            Err(e) => break fail(t, e.to_string()),
        };
        let mut dt = adapt_dt(&curve, &v, config);
        if !(dt >= DT_UNDERFLOW) {
            break fail(t, format!("time step {dt:e} underflowed"));
        }
        // land exactly on the horizon and on the snapshot grid
        let mut target = config.t_end;
        if let Some(ts) = snapshot_time(next_snapshot) {
            target = target.min(ts);
        }
        let landing = t + dt >= target;
        if landing {
            dt = target - t;
        }
        curve = match advance(&curve, &v, dt) {
            Ok(c) => c,
            Err(e) => break fail(t + dt, e.to_string()),
        };
        t = if landing { target } else { t + dt };
        if curve.edge_ratio() > config.remesh_ratio {
            curve = match remesh(&curve) {
                Ok(c) => c,
                Err(e) => break fail(t, e.to_string()),
            };
            remesh_count += 1;
        }
        geometry = match discrete_geometry(&curve) {
            Ok(g) => g,
            Err(e) => break fail(t, e.to_string()),
        };
        let rec = monitors::record_from(&curve, &geometry, &bounds, t, dt);
        let (max_a2, length) = (rec.max_a2, rec.length);
        records.push(rec);
        if snapshot_time(next_snapshot) == Some(t) {
            snapshots.push(Snapshot { t, curve: curve.clone() });
            next_snapshot += 1;
        }
        if length < EXTINCTION_FRACTION * initial_length {
            break TerminalStatus {
                kind: TerminalKind::Extinction,
                t,
                reason: None,
            };
        }
        if max_a2 > config.blowup_a2 {
            let roundness = max_a2 * length * length / (4.0 * std::f64::consts::PI.powi(2));
            let kind = if roundness <= ROUNDNESS_LIMIT {
                TerminalKind::Extinction
            } else {
                TerminalKind::BlowUp
            };
            break TerminalStatus { kind, t, reason: None };
        }
    };

    Ok(FlowTrace {
        records,
        snapshots,
        terminal,
        final_curve: curve,
        initial_length,
        bounds,
        remesh_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curveflow::{init_curve, CurveShape};
    use std::f64::consts::PI;

    fn circle(r: f64, n: usize) -> DiscreteCurve {
        init_curve(&CurveShape::Circle { r }, n).unwrap()
    }

    #[test]
    fn unit_circle_shrinks_at_unit_speed() {
        let c = circle(1.0, 256);
        let v = velocity(&c, &PotentialField::constant(2)).unwrap();
        for (p, vi) in c.vertices().iter().zip(&v) {
            assert!((vi.norm() - 1.0).abs() < 1e-10);
            assert!((vi + p).norm() < 1e-10);
        }
    }

    #[test]
    fn radial_field_speed() {
        let (r, cc) = (0.7, 1.3);
        let c = circle(r, 128);
        let v = velocity(&c, &PotentialField::RadialQuadratic { dimension: 2, c: cc }).unwrap();
        for vi in &v {
            assert!((vi.norm() - (-1.0 / r + cc * r).abs()).abs() < 1e-10);
        }
        let eq = circle(1.0 / cc.sqrt(), 128);
        let v = velocity(&eq, &PotentialField::RadialQuadratic { dimension: 2, c: cc }).unwrap();
        assert!(v.iter().all(|vi| vi.norm() < 1e-10));
    }

    #[test]
    fn space_curve_velocity_is_normal() {
        let c = init_curve(&CurveShape::TiltedCircle { r: 1.0, tilt: 0.4 }, 64).unwrap();
        let field = PotentialField::QuadraticDiagonal {
            coefficients: vec![1.0, 2.0, 0.5],
        };
        let v = velocity(&c, &field).unwrap();
        for (g, vi) in discrete_geometry(&c).unwrap().iter().zip(&v) {
            assert!(g.tangent.dot(vi).abs() <= 1e-10);
        }
        assert!(velocity(&c, &PotentialField::constant(2)).is_err());
    }

    #[test]
    fn time_step_formula() {
        let c = circle(1.0, 256);
        let config = FlowConfig::new(1.0);
        let v = velocity(&c, &PotentialField::constant(2)).unwrap();
        let l = 2.0 * (PI / 256.0).sin();
        let dt = adapt_dt(&c, &v, &config);
        assert!(dt <= 0.4 * l * l / 2.0);
        let expected = 0.4 * l * l / (2.0 * (1.0 + l));
        assert!((dt - expected).abs() < 1e-15);
        let zero = vec![Vector3::zeros(); 256];
        assert!((adapt_dt(&c, &zero, &config) - 0.4 * l * l / 2.0).abs() < 1e-15);
    }

    #[test]
    fn euler_step_shrinks_radius() {
        let c = circle(1.0, 256);
        let dt = 1e-4;
        let next = step_explicit(&c, &PotentialField::constant(2), dt).unwrap();
        for p in next.vertices() {
            assert!((p.norm() - (1.0 - dt)).abs() < 1e-12);
        }
    }

    #[test]
    fn equilibrium_circle_stays_put() {
        let c = circle(1.0, 256);
        let field = PotentialField::RadialQuadratic { dimension: 2, c: 1.0 };
        let trace = run(&c, &field, &FlowConfig::new(1.0)).unwrap();
        assert_eq!(trace.terminal.kind, TerminalKind::ReachedHorizon);
        let drift = c
            .vertices()
            .iter()
            .zip(trace.final_curve.vertices())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(drift <= 1e-8, "{drift}");
    }

    #[test]
    fn uniform_circle_is_a_remesh_fixed_point() {
        let c = circle(1.0, 200);
        let r = remesh(&c).unwrap();
        for (a, b) in c.vertices().iter().zip(r.vertices()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn remesh_equalizes_edges() {
        // circle sampled with a parameter density varying by a factor of 5
        let pts: Vec<Vec<f64>> = (0..200)
            .map(|i| {
                let s = i as f64 / 200.0;
                let t = 2.0 * PI * (s + 0.1 * (2.0 * PI * s).sin());
                vec![t.cos(), t.sin()]
            })
            .collect();
        let c = DiscreteCurve::new(2, &pts).unwrap();
        assert!(c.edge_ratio() > 4.0);
        let r = remesh(&c).unwrap();
        assert!(r.edge_ratio() <= 1.01, "{}", r.edge_ratio());
        // interpolation cuts corners, so the length can only drop slightly
        assert!(r.length() <= c.length());
        assert!(((r.length() - c.length()) / c.length()).abs() < 1e-4);
        assert_eq!(r.len(), c.len());
        assert!(r.signed_area() > 0.0);
    }

    #[test]
    fn snapshots_land_on_grid() {
        let c = circle(2.0, 64);
        let mut config = FlowConfig::new(0.3);
        config.snapshot_every = Some(0.1);
        let trace = run(&c, &PotentialField::constant(2), &config).unwrap();
        let times: Vec<f64> = trace.snapshots.iter().map(|s| s.t).collect();
        assert_eq!(times.len(), 4);
        for (k, t) in times.iter().enumerate() {
            assert!((*t - 0.1 * k as f64).abs() < 1e-15);
        }
        assert_eq!(trace.terminal.t, 0.3);
        assert!(trace.records.windows(2).all(|w| w[1].t > w[0].t));
    }

    #[test]
    fn shrinking_circle_goes_extinct() {
        let trace = run(&circle(1.0, 64), &PotentialField::constant(2), &FlowConfig::new(1.0)).unwrap();
        assert_eq!(trace.terminal.kind, TerminalKind::Extinction);
        assert!((trace.terminal.t - 0.5).abs() < 0.01);
    }

    #[test]
    fn invalid_config_rejected() {
        let mut config = FlowConfig::new(1.0);
        config.cfl = 1.5;
        assert!(run(&circle(1.0, 16), &PotentialField::constant(2), &config).is_err());
    }
}
