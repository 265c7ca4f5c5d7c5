//! External potentials ω on R^N and the derivative bounds consumed by the
//! long-time-existence hypotheses.
//!
//! Every kind has closed-form derivatives up to third order. Hessian
//! eigenvalue bounds and the third-derivative bound are exact for the
//! polynomial kinds and sampled on a deterministic lattice otherwise.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default lattice resolution (points per axis) for sampled bounds.
pub const DEFAULT_RESOLUTION: usize = 101;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PotentialField {
    /// ω ≡ value.
    Constant {
        dimension: usize,
        #[serde(default)]
        value: f64,
    },
    /// ω = ½ Σ c_i x_i².
    QuadraticDiagonal { coefficients: Vec<f64> },
    /// ω = ½ c |x|², so ∇ω = c x.
    RadialQuadratic { dimension: usize, c: f64 },
    /// ω = A exp(−|x − x₀|² / (2σ²)).
    GaussianBump {
        amplitude: f64,
        center: Vec<f64>,
        width: f64,
    },
}

/// Axis-aligned box in R^N.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Region {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let region = Region { lo, hi };
        region.validate()?;
        Ok(region)
    }

    /// Cube [−half, half]^dim.
    pub fn cube(dim: usize, half: f64) -> Self {
        Region {
            lo: vec![-half; dim],
            hi: vec![half; dim],
        }
    }

    pub fn dimension(&self) -> usize {
        self.lo.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.lo.len() != self.hi.len() || self.lo.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "region bounds have lengths {} and {}",
                self.lo.len(),
                self.hi.len()
            )));
        }
        for (axis, (lo, hi)) in self.lo.iter().zip(&self.hi).enumerate() {
            if !(lo <= hi) {
                return Err(Error::InvalidParameter(format!(
                    "region axis {axis} is empty: [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.lo.len()
            && x
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (lo, hi))| *lo <= *v && *v <= *hi)
    }

    /// Bounding box of a point set, enlarged by `pad` on every side.
    pub fn bounding<'a, I>(dim: usize, points: I, pad: f64) -> Self
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for p in points {
            for k in 0..dim {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        for k in 0..dim {
            lo[k] -= pad;
            hi[k] += pad;
        }
        Region { lo, hi }
    }

    fn is_bounded(&self) -> bool {
        self.lo.iter().chain(&self.hi).all(|v| v.is_finite())
    }

    /// Deterministic lattice with `resolution` nodes per axis, in
    /// lexicographic order (last axis fastest).
    pub fn lattice(&self, resolution: usize) -> impl Iterator<Item = Vec<f64>> + '_ {
        let dim = self.dimension();
        let res = resolution.max(1);
        let total = res.pow(dim as u32);
        (0..total).map(move |mut flat| {
            let mut x = vec![0.0; dim];
            for k in (0..dim).rev() {
                let j = flat % res;
                flat /= res;
                x[k] = if res == 1 {
                    0.5 * (self.lo[k] + self.hi[k])
                } else {
                    self.lo[k] + (self.hi[k] - self.lo[k]) * (j as f64) / ((res - 1) as f64)
                };
            }
            x
        })
    }
}

/// Bounds λ̲ ≤ ∇²ω ≤ λ̄ and |∇³ω| ≤ C₃ over a region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HessianBounds {
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub c3: f64,
    pub region: Region,
    /// Exact for the polynomial kinds, lattice-sampled otherwise.
    pub certified: bool,
}

/// Third-derivative tensor ∂³ω/∂x_i∂x_j∂x_k stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ThirdDerivative {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl ThirdDerivative {
    fn zeros(dim: usize) -> Self {
        ThirdDerivative {
            dim,
            data: vec![0.0; dim * dim * dim],
        }
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.dim + j) * self.dim + k]
    }

    /// ∇³ω(a, b, c).
    pub fn contract(&self, a: &[f64], b: &[f64], c: &[f64]) -> f64 {
        let n = self.dim;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    acc += self.get(i, j, k) * a[i] * b[j] * c[k];
                }
            }
        }
        acc
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl PotentialField {
    pub fn constant(dimension: usize) -> Self {
        PotentialField::Constant {
            dimension,
            value: 0.0,
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            PotentialField::Constant { dimension, .. } => *dimension,
            PotentialField::QuadraticDiagonal { coefficients } => coefficients.len(),
            PotentialField::RadialQuadratic { dimension, .. } => *dimension,
            PotentialField::GaussianBump { center, .. } => center.len(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            PotentialField::Constant { .. } => "constant",
            PotentialField::QuadraticDiagonal { .. } => "quadratic-diagonal",
            PotentialField::RadialQuadratic { .. } => "radial-quadratic",
            PotentialField::GaussianBump { .. } => "gaussian-bump",
        }
    }

    /// True when ∇³ω vanishes identically.
    pub fn is_polynomial(&self) -> bool {
        !matches!(self, PotentialField::GaussianBump { .. })
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.dimension();
        if dim < 2 {
            return Err(Error::InvalidParameter(format!(
                "potential dimension must be at least 2, got {dim}"
            )));
        }
        let finite = |v: f64, what: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{what} must be finite")))
            }
        };
        match self {
            PotentialField::Constant { value, .. } => finite(*value, "constant value"),
            PotentialField::QuadraticDiagonal { coefficients } => coefficients
                .iter()
                .try_for_each(|c| finite(*c, "quadratic coefficient")),
            PotentialField::RadialQuadratic { c, .. } => finite(*c, "radial coefficient"),
            PotentialField::GaussianBump {
                amplitude,
                center,
                width,
            } => {
                finite(*amplitude, "amplitude")?;
                center.iter().try_for_each(|c| finite(*c, "center"))?;
                if !(*width > 0.0 && width.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "gaussian width must be positive, got {width}"
                    )));
                }
                Ok(())
            }
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        let expected = self.dimension();
        if x.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// (d = x − x₀, 1/σ², φ(x)) for the gaussian kind.
    fn gaussian_parts(x: &[f64], amplitude: f64, center: &[f64], width: f64) -> (Vec<f64>, f64, f64) {
        let d: Vec<f64> = x.iter().zip(center).map(|(a, b)| a - b).collect();
        let s = 1.0 / (width * width);
        let r2: f64 = d.iter().map(|v| v * v).sum();
        (d, s, amplitude * (-0.5 * s * r2).exp())
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(match self {
            PotentialField::Constant { value, .. } => *value,
            PotentialField::QuadraticDiagonal { coefficients } => {
                0.5 * coefficients
                    .iter()
                    .zip(x)
                    .map(|(c, v)| c * v * v)
                    .sum::<f64>()
            }
            PotentialField::RadialQuadratic { c, .. } => {
                0.5 * c * x.iter().map(|v| v * v).sum::<f64>()
            }
            PotentialField::GaussianBump {
                amplitude,
                center,
                width,
            } => Self::gaussian_parts(x, *amplitude, center, *width).2,
        })
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        Ok(match self {
            PotentialField::Constant { dimension, .. } => vec![0.0; *dimension],
            PotentialField::QuadraticDiagonal { coefficients } => {
                coefficients.iter().zip(x).map(|(c, v)| c * v).collect()
            }
            PotentialField::RadialQuadratic { c, .. } => x.iter().map(|v| c * v).collect(),
            PotentialField::GaussianBump {
                amplitude,
                center,
                width,
            } => {
                let (d, s, phi) = Self::gaussian_parts(x, *amplitude, center, *width);
                d.iter().map(|di| -s * di * phi).collect()
            }
        })
    }

    pub fn hessian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_dim(x)?;
        let n = self.dimension();
        Ok(match self {
            PotentialField::Constant { .. } => DMatrix::zeros(n, n),
            PotentialField::QuadraticDiagonal { coefficients } => {
                DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(coefficients))
            }
            PotentialField::RadialQuadratic { c, .. } => DMatrix::identity(n, n) * *c,
            PotentialField::GaussianBump {
                amplitude,
                center,
                width,
            } => {
                let (d, s, phi) = Self::gaussian_parts(x, *amplitude, center, *width);
                DMatrix::from_fn(n, n, |i, j| {
                    let delta = if i == j { 1.0 } else { 0.0 };
                    (s * s * (d[i] * d[j]) - s * delta) * phi
                })
            }
        })
    }

    pub fn third(&self, x: &[f64]) -> Result<ThirdDerivative> {
        self.check_dim(x)?;
        let n = self.dimension();
        let mut t = ThirdDerivative::zeros(n);
        if let PotentialField::GaussianBump {
            amplitude,
            center,
            width,
        } = self
        {
            let (d, s, phi) = Self::gaussian_parts(x, *amplitude, center, *width);
            let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let sym = delta(i, k) * d[j] + delta(j, k) * d[i] + delta(i, j) * d[k];
                        t.data[(i * n + j) * n + k] =
                            phi * (s * s * sym - s * s * s * d[i] * d[j] * d[k]);
                    }
                }
            }
        }
        Ok(t)
    }

    fn check_region(&self, region: &Region) -> Result<()> {
        region.validate()?;
        if region.dimension() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                got: region.dimension(),
            });
        }
        Ok(())
    }

    /// Extreme Hessian eigenvalues and the third-derivative bound over `region`.
    pub fn hessian_eigen_bounds(&self, region: &Region, resolution: usize) -> Result<HessianBounds> {
        self.check_region(region)?;
        let exact = |lo: f64, hi: f64| HessianBounds {
            lambda_lo: lo,
            lambda_hi: hi,
            c3: 0.0,
            region: region.clone(),
            certified: region.is_bounded(),
        };
        match self {
            PotentialField::Constant { .. } => Ok(exact(0.0, 0.0)),
            PotentialField::QuadraticDiagonal { coefficients } => {
                let lo = coefficients.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = coefficients.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                Ok(exact(lo, hi))
            }
            PotentialField::RadialQuadratic { c, .. } => Ok(exact(*c, *c)),
            PotentialField::GaussianBump { .. } => {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for x in region.lattice(resolution) {
                    let eig = SymmetricEigen::new(self.hessian(&x)?);
                    for &v in eig.eigenvalues.iter() {
                        lo = lo.min(v);
                        hi = hi.max(v);
                    }
                }
                Ok(HessianBounds {
                    lambda_lo: lo,
                    lambda_hi: hi,
                    c3: self.third_deriv_bound(region, resolution)?,
                    region: region.clone(),
                    certified: false,
                })
            }
        }
    }

    /// Supremum of the Frobenius norm of ∇³ω over `region`.
    pub fn third_deriv_bound(&self, region: &Region, resolution: usize) -> Result<f64> {
        self.check_region(region)?;
        if self.is_polynomial() {
            return Ok(0.0);
        }
        let mut sup: f64 = 0.0;
        for x in region.lattice(resolution) {
            sup = sup.max(self.third(&x)?.frobenius());
        }
        Ok(sup)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bump() -> PotentialField {
        PotentialField::GaussianBump {
            amplitude: 1.0,
            center: vec![0.0, 0.0],
            width: 1.0,
        }
    }

    #[test]
    fn eval_examples() {
        let q = PotentialField::QuadraticDiagonal {
            coefficients: vec![1.0, 2.0],
        };
        assert_eq!(q.eval(&[1.0, 1.0]).unwrap(), 1.5);
        let r = PotentialField::RadialQuadratic { dimension: 3, c: 2.0 };
        assert_eq!(r.eval(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
        let g = bump().eval(&[1.0, 0.0]).unwrap();
        assert!((g - (-0.5f64).exp()).abs() < 1e-15);
        let c = PotentialField::Constant {
            dimension: 2,
            value: 3.25,
        };
        assert_eq!(c.eval(&[7.0, -1.0]).unwrap(), 3.25);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let q = PotentialField::QuadraticDiagonal {
            coefficients: vec![1.0, 2.0],
        };
        assert!(matches!(
            q.eval(&[1.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
        assert!(q.gradient(&[1.0, 2.0, 3.0]).is_err());
        assert!(q.hessian(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn gradient_examples() {
        let q = PotentialField::QuadraticDiagonal {
            coefficients: vec![1.0, 1.5, 2.0],
        };
        assert_eq!(q.gradient(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 3.0, 6.0]);
        let c = PotentialField::constant(3);
        assert_eq!(c.gradient(&[1.0, 2.0, 3.0]).unwrap(), vec![0.0; 3]);
        let g = bump().gradient(&[1.0, 0.0]).unwrap();
        assert!((g[0] + (-0.5f64).exp()).abs() < 1e-15);
        assert_eq!(g[1], 0.0);
    }

    #[test]
    fn hessian_examples() {
        let q = PotentialField::QuadraticDiagonal {
            coefficients: vec![1.0, 1.5],
        };
        let hq = q.hessian(&[3.0, -2.0]).unwrap();
        assert_eq!(hq, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.5]));
        assert_eq!(
            PotentialField::constant(2).hessian(&[1.0, 1.0]).unwrap(),
            DMatrix::zeros(2, 2)
        );
        let g = PotentialField::GaussianBump {
            amplitude: 2.0,
            center: vec![0.5, -0.5],
            width: 0.5,
        };
        let hg = g.hessian(&[0.5, -0.5]).unwrap();
        assert_eq!(hg, DMatrix::identity(2, 2) * (-2.0 / 0.25));
    }

    #[test]
    fn quadratic_bounds_exact() {
        let q = PotentialField::QuadraticDiagonal {
            coefficients: vec![1.0, 1.5],
        };
        let b = q
            .hessian_eigen_bounds(&Region::cube(2, 10.0), DEFAULT_RESOLUTION)
            .unwrap();
        assert_eq!((b.lambda_lo, b.lambda_hi, b.c3, b.certified), (1.0, 1.5, 0.0, true));
        let r = PotentialField::RadialQuadratic { dimension: 3, c: 0.7 };
        let b = r.hessian_eigen_bounds(&Region::cube(3, 1.0), 5).unwrap();
        assert_eq!((b.lambda_lo, b.lambda_hi, b.c3), (0.7, 0.7, 0.0));
        assert_eq!(q.third_deriv_bound(&Region::cube(2, 1.0), 11).unwrap(), 0.0);
        assert_eq!(
            PotentialField::constant(2)
                .third_deriv_bound(&Region::cube(2, 1.0), 11)
                .unwrap(),
            0.0
        );
    }

    /// Dense-lattice brute force using the closed-form spectrum of the
    /// gaussian Hessian: φ(s²|d|² − s) along d and −sφ across it.
    #[test]
    fn gaussian_bounds_match_closed_form_spectrum() {
        let g = bump();
        let region = Region::cube(2, 2.0);
        let b = g.hessian_eigen_bounds(&region, DEFAULT_RESOLUTION).unwrap();
        assert!(!b.certified);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for x in region.lattice(DEFAULT_RESOLUTION) {
            let r2 = x[0] * x[0] + x[1] * x[1];
            let phi = (-0.5 * r2).exp();
            for v in [phi * (r2 - 1.0), -phi] {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        assert!((b.lambda_lo - lo).abs() < 1e-12, "{} vs {}", b.lambda_lo, lo);
        assert!((b.lambda_hi - hi).abs() < 1e-12, "{} vs {}", b.lambda_hi, hi);
        assert!((b.lambda_lo + 1.0).abs() < 1e-12);
        assert!(b.lambda_lo <= b.lambda_hi);
    }

    /// Third-difference oracle for the sampled C₃ of the gaussian.
    #[test]
    fn gaussian_third_bound_matches_differences() {
        let g = bump();
        let region = Region::cube(2, 2.0);
        let res = 21;
        let c3 = g.third_deriv_bound(&region, res).unwrap();
        let step = 1e-3;
        let mut sup: f64 = 0.0;
        for x in region.lattice(res) {
            let mut norm2 = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    // differentiate the analytic Hessian entry (i, j) along each axis
                    for k in 0..2 {
                        let mut xp = x.clone();
                        let mut xm = x.clone();
                        xp[k] += step;
                        xm[k] -= step;
                        let d = (g.hessian(&xp).unwrap()[(i, j)] - g.hessian(&xm).unwrap()[(i, j)])
                            / (2.0 * step);
                        norm2 += d * d;
                    }
                }
            }
            sup = sup.max(norm2.sqrt());
        }
        assert!(c3 > 0.0);
        assert!((c3 - sup).abs() < 1e-5 * c3, "{c3} vs {sup}");
    }

    #[test]
    fn lattice_is_deterministic_and_covers_corners() {
        let region = Region::new(vec![-1.0, 0.0], vec![1.0, 2.0]).unwrap();
        let pts: Vec<_> = region.lattice(3).collect();
        assert_eq!(pts.len(), 9);
        assert_eq!(pts[0], vec![-1.0, 0.0]);
        assert_eq!(pts[8], vec![1.0, 2.0]);
        assert_eq!(pts, region.lattice(3).collect::<Vec<_>>());
        assert!(Region::new(vec![1.0], vec![0.0]).is_err());
    }

    fn kinds(dim: usize) -> Vec<PotentialField> {
        vec![
            PotentialField::Constant {
                dimension: dim,
                value: 0.3,
            },
            PotentialField::QuadraticDiagonal {
                coefficients: (0..dim).map(|i| 1.0 + 0.25 * i as f64).collect(),
            },
            PotentialField::RadialQuadratic { dimension: dim, c: -0.8 },
            PotentialField::GaussianBump {
                amplitude: 1.3,
                center: (0..dim).map(|i| 0.1 * i as f64).collect(),
                width: 0.9,
            },
        ]
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-6 * b.abs().max(1e-2)
    }

    proptest! {
        #[test]
        fn derivatives_agree_with_central_differences(
            x in proptest::collection::vec(-1.5f64..1.5, 3),
        ) {
            let step = 1e-5;
            for field in kinds(3) {
                let g = field.gradient(&x).unwrap();
                let hs = field.hessian(&x).unwrap();
                prop_assert_eq!(&hs, &hs.transpose());
                for k in 0..3 {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[k] += step;
                    xm[k] -= step;
                    let fd = (field.eval(&xp).unwrap() - field.eval(&xm).unwrap()) / (2.0 * step);
                    prop_assert!(close(g[k], fd), "{:?} grad {} {} {}", field, k, g[k], fd);
                    let gp = field.gradient(&xp).unwrap();
                    let gm = field.gradient(&xm).unwrap();
                    for j in 0..3 {
                        let fd2 = (gp[j] - gm[j]) / (2.0 * step);
                        prop_assert!(close(hs[(j, k)], fd2), "{:?} hess {} {}", field, hs[(j, k)], fd2);
                    }
                }
            }
        }

        #[test]
        fn quadratic_bounds_ignore_region(
            c in proptest::collection::vec(0.1f64..5.0, 2..4),
            half in 0.01f64..100.0,
        ) {
            let field = PotentialField::QuadraticDiagonal { coefficients: c.clone() };
            let b = field.hessian_eigen_bounds(&Region::cube(c.len(), half), 7).unwrap();
            let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!((b.lambda_lo, b.lambda_hi, b.c3), (lo, hi, 0.0));
        }
    }
}
