use std::f64::consts::PI;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest vertex count accepted for a closed curve.
pub const MIN_VERTICES: usize = 8;
/// Consecutive vertices closer than this fraction of the mean edge count as duplicates.
pub const DUPLICATE_EDGE_FRACTION: f64 = 1e-12;

/// Initial shapes. Planar shapes live in R², the others in R³.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CurveShape {
    Circle { r: f64 },
    Ellipse { a: f64, b: f64 },
    /// Polar curve r(θ) = r (1 + amplitude · cos(lobes · θ)).
    Star { r: f64, amplitude: f64, lobes: u32 },
    /// Circle of radius r in the xy-plane rotated by `tilt` about the x-axis.
    TiltedCircle { r: f64, tilt: f64 },
    /// (r cos t, r sin t, amplitude · sin 2t).
    WavySpaceCurve { r: f64, amplitude: f64 },
}

impl CurveShape {
    pub fn dimension(&self) -> usize {
        match self {
            CurveShape::Circle { .. } | CurveShape::Ellipse { .. } | CurveShape::Star { .. } => 2,
            _ => 3,
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
        match self {
            CurveShape::Circle { r } => positive(*r, "radius"),
            CurveShape::Ellipse { a, b } => {
                positive(*a, "semi-axis a")?;
                positive(*b, "semi-axis b")
            }
            CurveShape::Star { r, amplitude, lobes } => {
                positive(*r, "radius")?;
                if *lobes == 0 {
                    return Err(Error::InvalidParameter("star needs at least one lobe".into()));
                }
                // r(θ) > 0 everywhere is what keeps a polar curve embedded
                if !(0.0..1.0).contains(amplitude) {
                    return Err(Error::InvalidParameter(format!(
                        "star amplitude {amplitude} outside [0, 1) self-intersects"
                    )));
                }
                Ok(())
            }
            CurveShape::TiltedCircle { r, tilt } => {
                positive(*r, "radius")?;
                if tilt.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter("tilt must be finite".into()))
                }
            }
            CurveShape::WavySpaceCurve { r, amplitude } => {
                positive(*r, "radius")?;
                if amplitude.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter("amplitude must be finite".into()))
                }
            }
        }
    }

    fn point(&self, t: f64) -> Vector3<f64> {
        let (s, c) = t.sin_cos();
        match *self {
            CurveShape::Circle { r } => Vector3::new(r * c, r * s, 0.0),
            CurveShape::Ellipse { a, b } => Vector3::new(a * c, b * s, 0.0),
            CurveShape::Star { r, amplitude, lobes } => {
                let rho = r * (1.0 + amplitude * (lobes as f64 * t).cos());
                Vector3::new(rho * c, rho * s, 0.0)
            }
            CurveShape::TiltedCircle { r, tilt } => {
                Vector3::new(r * c, r * s * tilt.cos(), r * s * tilt.sin())
            }
            CurveShape::WavySpaceCurve { r, amplitude } => {
                Vector3::new(r * c, r * s, amplitude * (2.0 * t).sin())
            }
        }
    }
}

/// Closed polygon in R^d (d = 2 or 3). Planar curves keep z = 0 and are
/// counterclockwise.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteCurve {
    dim: usize,
    vertices: Vec<Vector3<f64>>,
}

/// Per-vertex discrete geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexGeometry {
    /// Curvature vector from the circle through the vertex and its neighbours.
    pub kappa_vec: Vector3<f64>,
    pub tangent: Vector3<f64>,
    /// Outward unit normal (d = 2).
    pub normal: Option<Vector3<f64>>,
    /// Scalar curvature −⟨κ⃗, ν⟩, positive on convex curves (d = 2).
    pub kappa: Option<f64>,
    pub a2: f64,
    pub dual_length: f64,
}

/// Discrete shape of one curve at all vertices.
pub fn discrete_geometry(curve: &DiscreteCurve) -> Result<Vec<VertexGeometry>> {
    curve.check_edges()?;
    let v = &curve.vertices;
    let n = v.len();
    Ok((0..n)
        .map(|i| {
            let prev = v[(i + n - 1) % n];
            let next = v[(i + 1) % n];
            let a = prev - v[i];
            let c = next - v[i];
            let kappa_vec = circumcircle_curvature(&a, &c);
            let tangent = (next - prev).normalize();
            let (normal, kappa) = if curve.dim == 2 {
                let nu = Vector3::new(tangent.y, -tangent.x, 0.0);
                (Some(nu), Some(-kappa_vec.dot(&nu)))
            } else {
                (None, None)
            };
            VertexGeometry {
                kappa_vec,
                tangent,
                normal,
                kappa,
                a2: kappa_vec.norm_squared(),
                dual_length: 0.5 * (a.norm() + c.norm()),
            }
        })
        .collect())
}

/// Vector from the middle point toward the circumcenter of (P + a, P, P + c),
/// with length one over the circumradius; zero for collinear points.
pub fn circumcircle_curvature(a: &Vector3<f64>, c: &Vector3<f64>) -> Vector3<f64> {
    let axc = a.cross(c);
    let cross_sq = axc.norm_squared();
    if cross_sq <= 1e-28 * a.norm_squared() * c.norm_squared() {
        return Vector3::zeros();
    }
    let center = (c * a.norm_squared() - a * c.norm_squared()).cross(&axc) / (2.0 * cross_sq);
    center / center.norm_squared()
}

impl DiscreteCurve {
    /// Validated curve from raw vertices; planar input is reoriented
    /// counterclockwise.
    pub fn new(dim: usize, points: &[Vec<f64>]) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::Unsupported(format!("curves in R^{dim}")));
        }
        let mut vertices = Vec::with_capacity(points.len());
        for p in points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: p.len() });
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::CurveInvariant("non-finite vertex".into()));
            }
            vertices.push(Vector3::new(p[0], p[1], if dim == 3 { p[2] } else { 0.0 }));
        }
        let mut curve = DiscreteCurve { dim, vertices };
        if curve.len() < MIN_VERTICES {
            return Err(Error::InvalidParameter(format!(
                "a closed curve needs at least {MIN_VERTICES} vertices, got {}",
                curve.len()
            )));
        }
        if dim == 2 && curve.signed_area() < 0.0 {
            curve.vertices.reverse();
        }
        curve.check_invariants()?;
        Ok(curve)
    }

    pub(crate) fn from_vectors(dim: usize, vertices: Vec<Vector3<f64>>) -> Self {
        DiscreteCurve { dim, vertices }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> &[Vector3<f64>] {
        &self.vertices
    }

    /// Vertex i as a point of R^d.
    pub fn point(&self, i: usize) -> &[f64] {
        &self.vertices[i].as_slice()[..self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }

    pub fn edge_lengths(&self) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| (self.vertices[(i + 1) % n] - self.vertices[i]).norm())
            .collect()
    }

    pub fn length(&self) -> f64 {
        self.edge_lengths().iter().sum()
    }

    pub fn min_edge(&self) -> f64 {
        self.edge_lengths().into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Longest over shortest edge.
    pub fn edge_ratio(&self) -> f64 {
        let edges = self.edge_lengths();
        let max = edges.iter().copied().fold(0.0, f64::max);
        let min = edges.iter().copied().fold(f64::INFINITY, f64::min);
        max / min
    }

    /// Shoelace area of the xy-projection.
    pub fn signed_area(&self) -> f64 {
        let n = self.len();
        0.5 * (0..n)
            .map(|i| {
                let (p, q) = (self.vertices[i], self.vertices[(i + 1) % n]);
                p.x * q.y - q.x * p.y
            })
            .sum::<f64>()
    }

    /// min ½|F|² over vertices.
    pub fn s_min(&self) -> f64 {
        self.vertices
            .iter()
            .map(|v| 0.5 * v.norm_squared())
            .fold(f64::INFINITY, f64::min)
    }

    fn check_edges(&self) -> Result<()> {
        let edges = self.edge_lengths();
        let mean = edges.iter().sum::<f64>() / edges.len() as f64;
        let min = edges.iter().copied().fold(f64::INFINITY, f64::min);
        if !(min > DUPLICATE_EDGE_FRACTION * mean) {
            return Err(Error::CurveInvariant(format!(
                "duplicate consecutive vertices (edge {min:e}, mean {mean:e})"
            )));
        }
        Ok(())
    }

    /// Vertex count, distinct consecutive vertices and, for planar curves,
    /// positive orientation and simplicity.
    pub fn check_invariants(&self) -> Result<()> {
        if self.len() < MIN_VERTICES {
            return Err(Error::CurveInvariant(format!("only {} vertices", self.len())));
        }
        if self.vertices.iter().any(|v| !v.iter().all(|x| x.is_finite())) {
            return Err(Error::CurveInvariant("non-finite vertex".into()));
        }
        self.check_edges()?;
        if self.dim == 2 {
            let area = self.signed_area();
            if !(area > 0.0) {
                return Err(Error::CurveInvariant(format!("orientation lost (signed area {area:e})")));
            }
            if !self.is_convex() {
                if let Some((i, j)) = self.self_intersection() {
                    return Err(Error::CurveInvariant(format!("edges {i} and {j} intersect")));
                }
            }
        }
        Ok(())
    }

    /// Planar polygon turning monotonically once around; such polygons are
    /// simple.
    fn is_convex(&self) -> bool {
        let v = &self.vertices;
        let n = v.len();
        // left turns only, and the edge direction passes +x exactly once
        let mut wraps = 0;
        for i in 0..n {
            let a = v[i] - v[(i + n - 1) % n];
            let b = v[(i + 1) % n] - v[i];
            if a.x * b.y - a.y * b.x < 0.0 {
                return false;
            }
            if a.y < 0.0 && b.y >= 0.0 {
                wraps += 1;
            }
        }
        wraps == 1
    }

    /// First pair of non-adjacent intersecting edges of a planar polygon,
    /// found through a uniform grid of cells one longest edge wide.
    pub fn self_intersection(&self) -> Option<(usize, usize)> {
        let n = self.len();
        let edges = self.edge_lengths();
        let cell = edges.iter().copied().fold(0.0, f64::max);
        if !(cell > 0.0) {
            return None;
        }
        let key = |v: f64| (v / cell).floor() as i64;
        let mut entries: Vec<(i64, i64, usize)> = Vec::with_capacity(4 * n);
        for i in 0..n {
            let (p, q) = (self.vertices[i], self.vertices[(i + 1) % n]);
            for gx in key(p.x.min(q.x))..=key(p.x.max(q.x)) {
                for gy in key(p.y.min(q.y))..=key(p.y.max(q.y)) {
                    entries.push((gx, gy, i));
                }
            }
        }
        entries.sort_unstable();
        let mut found: Option<(usize, usize)> = None;
        for cell in entries.chunk_by(|a, b| (a.0, a.1) == (b.0, b.1)) {
            for (a, &(_, _, i)) in cell.iter().enumerate() {
                for &(_, _, j) in &cell[a + 1..] {
                    let adjacent = (i + 1) % n == j || (j + 1) % n == i;
                    if adjacent {
                        continue;
                    }
                    let (pi, qi) = (self.vertices[i], self.vertices[(i + 1) % n]);
                    let (pj, qj) = (self.vertices[j], self.vertices[(j + 1) % n]);
                    if segments_intersect(&pi, &qi, &pj, &qj) {
                        let pair = (i.min(j), i.max(j));
                        found = Some(found.map_or(pair, |f| f.min(pair)));
                    }
                }
            }
        }
        found
    }
}

fn orient(a: &Vector3<f64>, b: &Vector3<f64>, c: &Vector3<f64>) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn on_segment(a: &Vector3<f64>, b: &Vector3<f64>, p: &Vector3<f64>) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection test in the xy-plane.
fn segments_intersect(p1: &Vector3<f64>, q1: &Vector3<f64>, p2: &Vector3<f64>, q2: &Vector3<f64>) -> bool {
    let d1 = orient(p2, q2, p1);
    let d2 = orient(p2, q2, q1);
    let d3 = orient(p1, q1, p2);
    let d4 = orient(p1, q1, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(p2, q2, p1))
        || (d2 == 0.0 && on_segment(p2, q2, q1))
        || (d3 == 0.0 && on_segment(p1, q1, p2))
        || (d4 == 0.0 && on_segment(p1, q1, q2))
}

/// Samples `shape` at `n` equally spaced parameter values.
pub fn init_curve(shape: &CurveShape, n: usize) -> Result<DiscreteCurve> {
    shape.validate()?;
    if n < MIN_VERTICES {
        return Err(Error::InvalidParameter(format!(
            "a closed curve needs at least {MIN_VERTICES} vertices, got {n}"
        )));
    }
    let dim = shape.dimension();
    let vertices = (0..n)
        .map(|i| shape.point(2.0 * PI * i as f64 / n as f64))
        .collect();
    let curve = DiscreteCurve { dim, vertices };
    curve.check_invariants()?;
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn too_few_vertices_rejected() {
        assert!(init_curve(&CurveShape::Circle { r: 1.0 }, 4).is_err());
    }

    #[test]
    fn circle_vertices_on_circle() {
        let c = init_curve(&CurveShape::Circle { r: 1.0 }, 256).unwrap();
        assert!(c.vertices().iter().all(|v| (v.norm() - 1.0).abs() < 1e-15));
        assert!(c.signed_area() > 0.0);
    }

    #[test]
    fn ellipse_peak_curvature() {
        let c = init_curve(&CurveShape::Ellipse { a: 2.0, b: 1.0 }, 256).unwrap();
        let max = discrete_geometry(&c).unwrap().iter().map(|g| g.a2).fold(0.0, f64::max);
        assert!((max - 4.0).abs() <= 0.04, "{max}");
    }

    #[test]
    fn regular_polygon_curvature_is_exact() {
        let c = init_curve(&CurveShape::Circle { r: 1.0 }, 256).unwrap();
        for g in discrete_geometry(&c).unwrap() {
            let k = g.kappa_vec.norm();
            assert!((0.9999..=1.0001).contains(&k));
            assert!((g.kappa.unwrap() - 1.0).abs() < 1e-10);
        }
        let t = init_curve(&CurveShape::TiltedCircle { r: 2.0, tilt: 0.8 }, 64).unwrap();
        for g in discrete_geometry(&t).unwrap() {
            assert!((g.a2 - 0.25).abs() < 1e-12);
            assert!(g.kappa.is_none());
        }
    }

    #[test]
    fn collinear_points_have_no_curvature() {
        let a = Vector3::new(-1.0, -2.0, 0.5);
        assert_eq!(circumcircle_curvature(&a, &(-a)), Vector3::zeros());
    }

    #[test]
    fn curvature_points_to_circumcenter() {
        // points on the unit circle around (3, 1, 0)
        let center = Vector3::new(3.0, 1.0, 0.0);
        let p = |t: f64| center + Vector3::new(t.cos(), t.sin(), 0.0);
        let k = circumcircle_curvature(&(p(0.1) - p(0.5)), &(p(1.3) - p(0.5)));
        assert!((k - (center - p(0.5))).norm() < 1e-12);
    }

    #[test]
    fn star_parameters_checked() {
        let bad = CurveShape::Star { r: 1.0, amplitude: 1.2, lobes: 5 };
        assert!(init_curve(&bad, 64).is_err());
        assert!(init_curve(&CurveShape::Star { r: 1.0, amplitude: 0.5, lobes: 5 }, 128).is_ok());
    }

    #[test]
    fn clockwise_input_is_reoriented() {
        let pts: Vec<Vec<f64>> = (0..16)
            .map(|i| {
                let t = -2.0 * PI * i as f64 / 16.0;
                vec![t.cos(), t.sin()]
            })
            .collect();
        let c = DiscreteCurve::new(2, &pts).unwrap();
        assert!(c.signed_area() > 0.0);
    }

    #[test]
    fn figure_eight_is_not_simple() {
        let pts: Vec<Vec<f64>> = (0..32)
            .map(|i| {
                let t = 2.0 * PI * i as f64 / 32.0;
                vec![t.sin(), (2.0 * t).sin() * 0.5 + 0.01 * t.cos()]
            })
            .collect();
        assert!(matches!(DiscreteCurve::new(2, &pts), Err(Error::CurveInvariant(_))));
    }

    #[test]
    fn duplicate_vertices_rejected() {
        let mut pts: Vec<Vec<f64>> = (0..12)
            .map(|i| {
                let t = 2.0 * PI * i as f64 / 12.0;
                vec![t.cos(), t.sin(), 0.0]
            })
            .collect();
        pts[3] = pts[2].clone();
        assert!(matches!(DiscreteCurve::new(3, &pts), Err(Error::CurveInvariant(_))));
    }
}
