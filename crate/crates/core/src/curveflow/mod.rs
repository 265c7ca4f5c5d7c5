//! Polygonal curves moved by curvature plus the normal part of ∇ω, and
//! the exact reduction for round spheres under radial potentials.

mod curve;
mod integrate;
mod radial;

pub use curve::{
    circumcircle_curvature, discrete_geometry, init_curve, CurveShape, DiscreteCurve, VertexGeometry,
    DUPLICATE_EDGE_FRACTION, MIN_VERTICES,
};
pub use integrate::{
    adapt_dt, bounds_resolution, curve_region, default_bounds, remesh, run, run_with_bounds, step_explicit, velocity,
    FlowConfig, FlowTrace, Snapshot, TerminalKind, TerminalStatus, DT_UNDERFLOW, EXTINCTION_FRACTION,
    ROUNDNESS_LIMIT,
};
pub use radial::{blow_down_time, radial_flow, radius_sq, RadialState, RadialTrajectory};
