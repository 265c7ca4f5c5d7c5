//! Numerical differential geometry on analytic immersion patches
//! F: U ⊂ R^n → R^(n+k), n ∈ {1, 2}, k ∈ {1, 2}.
//!
//! All tensors are computed by finite differences of F. Quantities that
//! need derivatives of derived tensors (covariant derivatives, Laplacians,
//! curvature of the connection) are obtained by nesting the same stencils.

mod evolution;
mod identities;
pub(crate) mod stencil;
mod tensors;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use evolution::{
    evolution_residual_highercodim, evolution_residual_hypersurface, EvolutionCheck, FlowDeformed,
};
pub use identities::{
    check_simons_hypersurface, check_structure_identities, estimate_order, with_orders,
    ConvergenceOrder, IdentityEntry, IdentityResidualReport,
};
pub use tensors::{covariant_a, shape_tensors, CovariantA, CubicInvariants, ShapeTensors};

/// Default parameter-space stencil spacing.
pub const DEFAULT_STENCIL: f64 = 1e-2;
/// Metric determinants at or below this are treated as a failed immersion.
pub const MIN_METRIC_DET: f64 = 1e-12;

/// Parameter axis of a patch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Axis {
    Periodic,
    Bounded { lo: f64, hi: f64 },
}

/// A smooth map from parameter space into R^N.
pub trait Immersion {
    fn param_dim(&self) -> usize;
    fn ambient_dim(&self) -> usize;
    fn eval(&self, u: &[f64]) -> Result<DVector<f64>>;
    fn axes(&self) -> Vec<Axis>;
    /// A vector the hypersurface normal must point along (positive inner
    /// product). Ignored in codimension 2.
    fn orientation_hint(&self, u: &[f64], h: f64) -> Result<DVector<f64>>;
    /// Fixed rotation angle applied to the codimension-2 normal frame.
    fn frame_rotation(&self) -> f64 {
        0.0
    }
    fn codim(&self) -> usize {
        self.ambient_dim() - self.param_dim()
    }
}

/// Monomial coef · x^px · y^py of a graph height function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Monomial {
    pub coef: f64,
    pub px: u32,
    pub py: u32,
}

/// Closed set of analytic shapes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PatchShape {
    /// (r cos t, r sin t) in R².
    Circle { r: f64 },
    /// (a cos t, b sin t) in R².
    Ellipse { a: f64, b: f64 },
    /// Circle of radius r in the plane obtained by rotating the xy-plane
    /// by `tilt` radians about the x-axis, in R³.
    TiltedCircle { r: f64, tilt: f64 },
    /// (r cos t, r sin t, amplitude · sin 2t) in R³.
    WavyCurve { r: f64, amplitude: f64 },
    /// Round sphere in spherical coordinates (θ, φ).
    Sphere { r: f64 },
    /// (a sinθ cosφ, b sinθ sinφ, c cosθ).
    Ellipsoid { a: f64, b: f64, c: f64 },
    /// Graph z = Σ coef x^px y^py over (x, y) ∈ [−2, 2]².
    Graph { terms: Vec<Monomial> },
    /// The plane z = 0 over (x, y) ∈ [−2, 2]².
    Plane,
}

/// x ↦ R x + b applied after the shape map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RigidMotion {
    /// Row-major orthogonal matrix.
    pub rotation: Vec<Vec<f64>>,
    pub translation: Vec<f64>,
}

impl RigidMotion {
    fn matrix(&self) -> DMatrix<f64> {
        let n = self.rotation.len();
        DMatrix::from_fn(n, n, |i, j| self.rotation[i][j])
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.rotation.len() != dim
            || self.rotation.iter().any(|row| row.len() != dim)
            || self.translation.len() != dim
        {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: self.translation.len(),
            });
        }
        let r = self.matrix();
        let defect = (&r.transpose() * &r - DMatrix::identity(dim, dim)).amax();
        if defect > 1e-10 {
            return Err(Error::InvalidParameter(format!(
                "rotation is not orthogonal (defect {defect:e})"
            )));
        }
        Ok(())
    }

    /// Rotation by `angle` about `axis` (a coordinate axis index) in R³.
    pub fn axis_rotation(axis: usize, angle: f64, translation: [f64; 3]) -> Self {
        let (s, c) = angle.sin_cos();
        let (p, q) = match axis {
            0 => (1, 2),
            1 => (2, 0),
            _ => (0, 1),
        };
        let mut rot = vec![vec![0.0; 3]; 3];
        rot[axis][axis] = 1.0;
        rot[p][p] = c;
        rot[p][q] = -s;
        rot[q][p] = s;
        rot[q][q] = c;
        RigidMotion {
            rotation: rot,
            translation: translation.to_vec(),
        }
    }
}

/// An analytic shape with an optional ambient rigid motion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImmersionPatch {
    pub shape: PatchShape,
    #[serde(default)]
    pub motion: Option<RigidMotion>,
    #[serde(default)]
    pub frame_rotation: f64,
}

impl ImmersionPatch {
    pub fn new(shape: PatchShape) -> Result<Self> {
        let patch = ImmersionPatch {
            shape,
            motion: None,
            frame_rotation: 0.0,
        };
        patch.validate()?;
        Ok(patch)
    }

    pub fn with_motion(mut self, motion: RigidMotion) -> Result<Self> {
        motion.validate(self.ambient_dim())?;
        self.motion = Some(motion);
        Ok(self)
    }

    pub fn with_frame_rotation(mut self, angle: f64) -> Self {
        self.frame_rotation = angle;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{what} must be positive, got {v}")))
            }
        };
        match &self.shape {
            PatchShape::Circle { r } | PatchShape::Sphere { r } => positive(*r, "radius")?,
            PatchShape::TiltedCircle { r, tilt } => {
                positive(*r, "radius")?;
                if !tilt.is_finite() {
                    return Err(Error::InvalidParameter("tilt must be finite".into()));
                }
            }
            PatchShape::WavyCurve { r, amplitude } => {
                positive(*r, "radius")?;
                if !amplitude.is_finite() {
                    return Err(Error::InvalidParameter("amplitude must be finite".into()));
                }
            }
            PatchShape::Ellipse { a, b } => {
                positive(*a, "semi-axis a")?;
                positive(*b, "semi-axis b")?;
            }
            PatchShape::Ellipsoid { a, b, c } => {
                positive(*a, "semi-axis a")?;
                positive(*b, "semi-axis b")?;
                positive(*c, "semi-axis c")?;
            }
            PatchShape::Graph { terms } => {
                if terms.iter().any(|m| !m.coef.is_finite()) {
                    return Err(Error::InvalidParameter("graph coefficients must be finite".into()));
                }
            }
            PatchShape::Plane => {}
        }
        if let Some(m) = &self.motion {
            m.validate(self.ambient_dim())?;
        }
        Ok(())
    }

    fn raw(&self, u: &[f64]) -> Vec<f64> {
        match &self.shape {
            PatchShape::Circle { r } => vec![r * u[0].cos(), r * u[0].sin()],
            PatchShape::Ellipse { a, b } => vec![a * u[0].cos(), b * u[0].sin()],
            PatchShape::TiltedCircle { r, tilt } => {
                let (s, c) = u[0].sin_cos();
                vec![r * c, r * s * tilt.cos(), r * s * tilt.sin()]
            }
            PatchShape::WavyCurve { r, amplitude } => {
                vec![r * u[0].cos(), r * u[0].sin(), amplitude * (2.0 * u[0]).sin()]
            }
            PatchShape::Sphere { r } => {
                let (st, ct) = u[0].sin_cos();
                let (sp, cp) = u[1].sin_cos();
                vec![r * st * cp, r * st * sp, r * ct]
            }
            PatchShape::Ellipsoid { a, b, c } => {
                let (st, ct) = u[0].sin_cos();
                let (sp, cp) = u[1].sin_cos();
                vec![a * st * cp, b * st * sp, c * ct]
            }
            PatchShape::Graph { terms } => {
                let z = terms
                    .iter()
                    .map(|m| m.coef * u[0].powi(m.px as i32) * u[1].powi(m.py as i32))
                    .sum();
                vec![u[0], u[1], z]
            }
            PatchShape::Plane => vec![u[0], u[1], 0.0],
        }
    }

    fn raw_hint(&self, u: &[f64]) -> Vec<f64> {
        match &self.shape {
            // outward from the center of the closed shapes
            PatchShape::Circle { .. }
            | PatchShape::Ellipse { .. }
            | PatchShape::Sphere { .. }
            | PatchShape::Ellipsoid { .. } => self.raw(u),
            // graphs convex from below get H > 0
            PatchShape::Graph { .. } => vec![0.0, 0.0, -1.0],
            PatchShape::Plane => vec![0.0, 0.0, 1.0],
            PatchShape::TiltedCircle { .. } | PatchShape::WavyCurve { .. } => vec![0.0; 3],
        }
    }

    fn rotate(&self, v: Vec<f64>) -> DVector<f64> {
        let v = DVector::from_vec(v);
        match &self.motion {
            Some(m) => m.matrix() * v,
            None => v,
        }
    }
}

impl Immersion for ImmersionPatch {
    fn param_dim(&self) -> usize {
        match self.shape {
            PatchShape::Circle { .. }
            | PatchShape::Ellipse { .. }
            | PatchShape::TiltedCircle { .. }
            | PatchShape::WavyCurve { .. } => 1,
            _ => 2,
        }
    }

    fn ambient_dim(&self) -> usize {
        match self.shape {
            PatchShape::Circle { .. } | PatchShape::Ellipse { .. } => 2,
            _ => 3,
        }
    }

    fn eval(&self, u: &[f64]) -> Result<DVector<f64>> {
        if u.len() != self.param_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.param_dim(),
                got: u.len(),
            });
        }
        let mut x = self.rotate(self.raw(u));
        if let Some(m) = &self.motion {
            x += DVector::from_column_slice(&m.translation);
        }
        Ok(x)
    }

    fn axes(&self) -> Vec<Axis> {
        match self.shape {
            PatchShape::Sphere { .. } | PatchShape::Ellipsoid { .. } => vec![
                Axis::Bounded {
                    lo: 0.0,
                    hi: std::f64::consts::PI,
                },
                Axis::Periodic,
            ],
            PatchShape::Graph { .. } | PatchShape::Plane => {
                vec![Axis::Bounded { lo: -2.0, hi: 2.0 }; 2]
            }
            _ => vec![Axis::Periodic],
        }
    }

    fn orientation_hint(&self, u: &[f64], _h: f64) -> Result<DVector<f64>> {
        Ok(self.rotate(self.raw_hint(u)))
    }

    fn frame_rotation(&self) -> f64 {
        self.frame_rotation
    }
}

/// Fails unless every bounded axis leaves `reach · h` of room around `u`.
pub(crate) fn check_room<I: Immersion + ?Sized>(imm: &I, u: &[f64], h: f64, reach: f64) -> Result<()> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("stencil spacing must be positive, got {h}")));
    }
    if u.len() != imm.param_dim() {
        return Err(Error::DimensionMismatch {
            expected: imm.param_dim(),
            got: u.len(),
        });
    }
    let margin = reach * h;
    for (axis, (spec, &v)) in imm.axes().iter().zip(u).enumerate() {
        if let Axis::Bounded { lo, hi } = *spec {
            if v - margin < lo || v + margin > hi {
                return Err(Error::StencilRoom {
                    u: u.to_vec(),
                    axis,
                    margin,
                });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_report_dimensions() {
        let cases = [
            (PatchShape::Circle { r: 1.0 }, 1, 2),
            (PatchShape::TiltedCircle { r: 1.0, tilt: 0.3 }, 1, 3),
            (PatchShape::Sphere { r: 2.0 }, 2, 3),
            (PatchShape::Plane, 2, 3),
        ];
        for (shape, n, big_n) in cases {
            let p = ImmersionPatch::new(shape).unwrap();
            assert_eq!((p.param_dim(), p.ambient_dim()), (n, big_n));
            assert_eq!(p.codim(), big_n - n);
        }
    }

    #[test]
    fn invalid_shapes_rejected() {
        assert!(ImmersionPatch::new(PatchShape::Circle { r: 0.0 }).is_err());
        assert!(ImmersionPatch::new(PatchShape::Ellipsoid { a: 1.0, b: -1.0, c: 1.0 }).is_err());
        let p = ImmersionPatch::new(PatchShape::Sphere { r: 1.0 }).unwrap();
        let bad = RigidMotion {
            rotation: vec![vec![2.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
            translation: vec![0.0; 3],
        };
        assert!(p.with_motion(bad).is_err());
    }

    #[test]
    fn stencil_room_enforced_on_bounded_axes() {
        let p = ImmersionPatch::new(PatchShape::Sphere { r: 1.0 }).unwrap();
        assert!(check_room(&p, &[0.01, 0.0], 1e-2, 2.0).is_err());
        assert!(check_room(&p, &[1.0, -3.0], 1e-2, 2.0).is_ok());
        assert!(check_room(&p, &[1.0, 0.0], -1.0, 2.0).is_err());
    }
}
