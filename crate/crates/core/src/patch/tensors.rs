use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::stencil::{self, REACH};
use super::{check_room, Immersion, MIN_METRIC_DET};
use crate::error::{Error, Result};

/// C = tr(A³) and Z = H·C − |A|⁴ of a hypersurface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CubicInvariants {
    pub c: f64,
    pub z: f64,
}

/// Extrinsic and intrinsic geometry of an immersion at one parameter point.
///
/// Index conventions: `h2f[α][(i, j)]`, `christoffel[m][(i, j)] = Γ^m_ij`,
/// `normconn[i][(β, γ)] = ⟨∂_i e_β, e_γ⟩`.
#[derive(Debug, Clone)]
pub struct ShapeTensors {
    pub point: DVector<f64>,
    pub tangents: Vec<DVector<f64>>,
    /// ∂_i∂_j F.
    pub second: Vec<Vec<DVector<f64>>>,
    pub g: DMatrix<f64>,
    pub ginv: DMatrix<f64>,
    pub frame: Vec<DVector<f64>>,
    pub h2f: Vec<DMatrix<f64>>,
    pub mean_curvature: Vec<f64>,
    pub a2: f64,
    pub christoffel: Vec<DMatrix<f64>>,
    pub normconn: Vec<DMatrix<f64>>,
    pub cubic: Option<CubicInvariants>,
}

impl ShapeTensors {
    pub fn n(&self) -> usize {
        self.tangents.len()
    }

    pub fn k(&self) -> usize {
        self.frame.len()
    }

    /// |H⃗|² = Σ_α H_α².
    pub fn mean_curvature_sq(&self) -> f64 {
        self.mean_curvature.iter().map(|v| v * v).sum()
    }

    /// E with Eᵀ g E = I; the columns give an orthonormal tangent frame
    /// ê_a = Σ_i E_ia ∂_i F.
    pub fn orthonormalizer(&self) -> DMatrix<f64> {
        let l = self
            .g
            .clone()
            .cholesky()
            .expect("metric is positive definite")
            .unpack();
        l.transpose()
            .try_inverse()
            .expect("cholesky factor is invertible")
    }

    pub fn orthonormal_tangents(&self) -> Vec<DVector<f64>> {
        let e = self.orthonormalizer();
        (0..self.n())
            .map(|a| {
                let mut v = DVector::zeros(self.point.len());
                for i in 0..self.n() {
                    v += &self.tangents[i] * e[(i, a)];
                }
                v
            })
            .collect()
    }

    /// Second fundamental form in the orthonormal tangent frame.
    pub fn h_hat(&self) -> Vec<DMatrix<f64>> {
        let e = self.orthonormalizer();
        self.h2f.iter().map(|h| e.transpose() * h * &e).collect()
    }

    /// h_i^l h_lj for one normal direction.
    pub(crate) fn h_squared(&self, alpha: usize) -> DMatrix<f64> {
        &self.h2f[alpha] * &self.ginv * &self.h2f[alpha]
    }

    pub(crate) fn h2f_flat(&self) -> Vec<f64> {
        self.h2f.iter().flat_map(|h| h.iter().copied().collect::<Vec<_>>()).collect()
    }
}

fn cross(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    DVector::from_vec(vec![
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ])
}

fn eval_vec<I: Immersion + ?Sized>(imm: &I, v: &[f64]) -> Result<Vec<f64>> {
    Ok(imm.eval(v)?.as_slice().to_vec())
}

pub(crate) fn tangents_at<I: Immersion + ?Sized>(imm: &I, u: &[f64], h: f64) -> Result<Vec<DVector<f64>>> {
    let f = |v: &[f64]| eval_vec(imm, v);
    Ok(stencil::first(&f, u, h)?
        .into_iter()
        .map(DVector::from_vec)
        .collect())
}

/// Unit normals: oriented along the hint when k = 1; for k = 2 the
/// reference ẑ projected off the tangent (x̂ when that degenerates), its
/// completion t̂ × e₁, then the patch's fixed frame rotation.
pub(crate) fn normal_frame<I: Immersion + ?Sized>(
    imm: &I,
    u: &[f64],
    h: f64,
    tangents: &[DVector<f64>],
) -> Result<Vec<DVector<f64>>> {
    let n = imm.param_dim();
    let big_n = imm.ambient_dim();
    match (n, big_n) {
        (1, 2) | (2, 3) => {
            let raw = if n == 1 {
                let t = &tangents[0];
                DVector::from_vec(vec![t[1], -t[0]])
            } else {
                cross(&tangents[0], &tangents[1])
            };
            let norm = raw.norm();
            if !(norm > 0.0) {
                return Err(Error::ImmersionFailure { u: u.to_vec(), det: 0.0 });
            }
            let mut nu = raw / norm;
            if nu.dot(&imm.orientation_hint(u, h)?) < 0.0 {
                nu = -nu;
            }
            Ok(vec![nu])
        }
        (1, 3) => {
            let t = &tangents[0];
            let tn = t.norm();
            if !(tn > 0.0) {
                return Err(Error::ImmersionFailure { u: u.to_vec(), det: 0.0 });
            }
            let t = t / tn;
            let project = |r: DVector<f64>| {
                let p = &r - &t * t.dot(&r);
                let norm = p.norm();
                (p, norm)
            };
            let (mut p, mut norm) = project(DVector::from_vec(vec![0.0, 0.0, 1.0]));
            if norm < 0.05 {
                (p, norm) = project(DVector::from_vec(vec![1.0, 0.0, 0.0]));
            }
            let e1 = p / norm;
            let e2 = cross(&t, &e1);
            let (s, c) = imm.frame_rotation().sin_cos();
            Ok(vec![&e1 * c + &e2 * s, &e2 * c - &e1 * s])
        }
        _ => Err(Error::Unsupported(format!(
            "immersions of dimension {n} in R^{big_n}"
        ))),
    }
}

/// Tangents and normal frame, using first derivatives only.
pub(crate) fn frame_at<I: Immersion + ?Sized>(
    imm: &I,
    u: &[f64],
    h: f64,
) -> Result<(Vec<DVector<f64>>, Vec<DVector<f64>>)> {
    let tangents = tangents_at(imm, u, h)?;
    let frame = normal_frame(imm, u, h, &tangents)?;
    Ok((tangents, frame))
}

/// Tensors without the normal connection (left zero).
pub(crate) fn local_tensors<I: Immersion + ?Sized>(imm: &I, u: &[f64], h: f64) -> Result<ShapeTensors> {
    let n = imm.param_dim();
    let f = |v: &[f64]| eval_vec(imm, v);
    let point = imm.eval(u)?;
    let tangents: Vec<DVector<f64>> = stencil::first(&f, u, h)?
        .into_iter()
        .map(DVector::from_vec)
        .collect();
    let second: Vec<Vec<DVector<f64>>> = stencil::second(&f, u, h)?
        .into_iter()
        .map(|row| row.into_iter().map(DVector::from_vec).collect())
        .collect();

    let g = DMatrix::from_fn(n, n, |i, j| tangents[i].dot(&tangents[j]));
    let det = g.determinant();
    if !(det > MIN_METRIC_DET) {
        return Err(Error::ImmersionFailure { u: u.to_vec(), det });
    }
    let ginv = g.clone().try_inverse().ok_or(Error::ImmersionFailure {
        u: u.to_vec(),
        det,
    })?;

    let frame = normal_frame(imm, u, h, &tangents)?;
    let h2f: Vec<DMatrix<f64>> = frame
        .iter()
        .map(|e| DMatrix::from_fn(n, n, |i, j| -e.dot(&second[i][j])))
        .collect();
    let mean_curvature: Vec<f64> = h2f.iter().map(|h| (&ginv * h).trace()).collect();
    let a2 = h2f
        .iter()
        .map(|h| {
            let s = &ginv * h;
            (&s * &s).trace()
        })
        .sum();

    // Γ^m_ij = g^{ml} ⟨∂_i∂_j F, ∂_l F⟩
    let christoffel = (0..n)
        .map(|m| {
            DMatrix::from_fn(n, n, |i, j| {
                (0..n)
                    .map(|l| ginv[(m, l)] * second[i][j].dot(&tangents[l]))
                    .sum()
            })
        })
        .collect();

    let k = frame.len();
    let cubic = (k == 1).then(|| {
        let s = &ginv * &h2f[0];
        let c = (&s * &s * &s).trace();
        CubicInvariants {
            c,
            z: mean_curvature[0] * c - a2 * a2,
        }
    });

    Ok(ShapeTensors {
        point,
        tangents,
        second,
        g,
        ginv,
        frame,
        h2f,
        mean_curvature,
        a2,
        christoffel,
        normconn: vec![DMatrix::zeros(k, k); n],
        cubic,
    })
}

/// Reach (in units of h) of [`shape_tensors`] for this immersion.
pub(crate) fn tensor_reach<I: Immersion + ?Sized>(imm: &I) -> f64 {
    if imm.codim() > 1 {
        2.0 * REACH
    } else {
        REACH
    }
}

pub(crate) fn tensors_unchecked<I: Immersion + ?Sized>(imm: &I, u: &[f64], h: f64) -> Result<ShapeTensors> {
    let mut st = local_tensors(imm, u, h)?;
    let k = st.k();
    if k > 1 {
        let big_n = imm.ambient_dim();
        let frame_flat = |v: &[f64]| -> Result<Vec<f64>> {
            let (_, frame) = frame_at(imm, v, h)?;
            Ok(frame.iter().flat_map(|e| e.iter().copied().collect::<Vec<_>>()).collect())
        };
        let dframe = stencil::first(&frame_flat, u, h)?;
        st.normconn = dframe
            .iter()
            .map(|d| {
                DMatrix::from_fn(k, k, |beta, gamma| {
                    (0..big_n).map(|c| d[beta * big_n + c] * st.frame[gamma][c]).sum()
                })
            })
            .collect();
    }
    Ok(st)
}

/// Metric, frame, second fundamental form, mean curvature, |A|²,
/// Christoffel symbols and normal connection at `u`.
pub fn shape_tensors<I: Immersion + ?Sized>(imm: &I, u: &[f64], h: f64) -> Result<ShapeTensors> {
    check_room(imm, u, h, tensor_reach(imm).max(3.0))?;
    tensors_unchecked(imm, u, h)
}

/// Covariant derivative of the second fundamental form (normal connection
/// included): `nabla_h[α][k][(i, j)] = ∇_k h_αij`.
#[derive(Debug, Clone)]
pub struct CovariantA {
    pub nabla_h: Vec<Vec<DMatrix<f64>>>,
    /// |∇A|², fully contracted with the metric.
    pub norm_sq: f64,
}

impl CovariantA {
    /// max over α, i, j, k of the orthonormal-frame size of ∇_k h_αij − ∇_j h_αik.
    pub fn codazzi_defect(&self, st: &ShapeTensors) -> f64 {
        let n = st.n();
        let e = st.orthonormalizer();
        let mut total = 0.0;
        for per_k in &self.nabla_h {
            let t = |k: usize, i: usize, j: usize| per_k[k][(i, j)] - per_k[j][(i, k)];
            total += hat3_norm_sq(&e, n, t);
        }
        total.sqrt()
    }
}

/// Σ (Σ E_ka E_ib E_jc T_kij)² over a, b, c.
pub(crate) fn hat3_norm_sq<T: Fn(usize, usize, usize) -> f64>(e: &DMatrix<f64>, n: usize, t: T) -> f64 {
    let mut total = 0.0;
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let mut v = 0.0;
                for k in 0..n {
                    for i in 0..n {
                        for j in 0..n {
                            v += e[(k, a)] * e[(i, b)] * e[(j, c)] * t(k, i, j);
                        }
                    }
                }
                total += v * v;
            }
        }
    }
    total
}

/// g-norm of a covariant 2-tensor.
pub(crate) fn tensor2_norm(e: &DMatrix<f64>, t: &DMatrix<f64>) -> f64 {
    (e.transpose() * t * e).norm()
}

pub(crate) fn covariant_reach<I: Immersion + ?Sized>(imm: &I) -> f64 {
    REACH + tensor_reach(imm)
}

pub(crate) fn covariant_unchecked<I: Immersion + ?Sized>(
    imm: &I,
    u: &[f64],
    h: f64,
) -> Result<(ShapeTensors, CovariantA)> {
    let st = tensors_unchecked(imm, u, h)?;
    let n = st.n();
    let k = st.k();
    let field = |v: &[f64]| -> Result<Vec<f64>> { Ok(local_tensors(imm, v, h)?.h2f_flat()) };
    let dh = stencil::first(&field, u, h)?;
    // h2f_flat is column-major per α (nalgebra storage): index α n² + j n + i
    let partial = |kk: usize, alpha: usize, i: usize, j: usize| dh[kk][alpha * n * n + j * n + i];

    let nabla_h: Vec<Vec<DMatrix<f64>>> = (0..k)
        .map(|alpha| {
            (0..n)
                .map(|kk| {
                    DMatrix::from_fn(n, n, |i, j| {
                        let mut v = partial(kk, alpha, i, j);
                        for m in 0..n {
                            v -= st.christoffel[m][(kk, i)] * st.h2f[alpha][(m, j)];
                            v -= st.christoffel[m][(kk, j)] * st.h2f[alpha][(i, m)];
                        }
                        for beta in 0..k {
                            v += st.normconn[kk][(beta, alpha)] * st.h2f[beta][(i, j)];
                        }
                        v
                    })
                })
                .collect()
        })
        .collect();

    let e = st.orthonormalizer();
    let norm_sq = nabla_h
        .iter()
        .map(|per_k| hat3_norm_sq(&e, n, |kk, i, j| per_k[kk][(i, j)]))
        .sum();
    Ok((st, CovariantA { nabla_h, norm_sq }))
}

/// ∇_k h_αij and |∇A|² at `u`.
pub fn covariant_a<I: Immersion + ?Sized>(imm: &I, u: &[f64], h: f64) -> Result<(ShapeTensors, CovariantA)> {
    check_room(imm, u, h, covariant_reach(imm).max(4.0))?;
    covariant_unchecked(imm, u, h)
}
