use nalgebra::{DMatrix, DVector};
use serde::{Serialize, Serializer};

use super::stencil::{self, REACH};
use super::tensors::{
    covariant_unchecked, local_tensors, tangents_at, tensor2_norm, tensor_reach,
    tensors_unchecked, ShapeTensors,
};
use super::{check_room, Immersion};
use crate::error::{Error, Result};

/// Residuals below this at both stencil sizes count as exact.
pub const EXACT_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConvergenceOrder {
    Exact,
    Observed(f64),
}

impl Serialize for ConvergenceOrder {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ConvergenceOrder::Exact => s.serialize_str("exact"),
            ConvergenceOrder::Observed(p) => s.serialize_f64(*p),
        }
    }
}

impl ConvergenceOrder {
    /// Observed order, with exact results counting as infinitely fast.
    pub fn at_least(&self, p: f64) -> bool {
        match self {
            ConvergenceOrder::Exact => true,
            ConvergenceOrder::Observed(q) => *q >= p,
        }
    }
}

/// log2(r_h / r_{h/2}), or exact when both residuals are at round-off.
pub fn estimate_order(coarse: f64, fine: f64) -> ConvergenceOrder {
    if coarse < EXACT_FLOOR && fine < EXACT_FLOOR {
        ConvergenceOrder::Exact
    } else {
        ConvergenceOrder::Observed((coarse / fine.max(1e-300)).log2())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityEntry {
    pub name: String,
    pub residual: f64,
    pub stencil: f64,
    pub order: Option<ConvergenceOrder>,
}

#[derive(Debug, Clone, Default, Serialize)]
#[serde(transparent)]
pub struct IdentityResidualReport {
    pub entries: Vec<IdentityEntry>,
}

impl IdentityResidualReport {
    pub fn get(&self, name: &str) -> Option<&IdentityEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn residual(&self, name: &str) -> Option<f64> {
        self.get(name).map(|e| e.residual)
    }

    pub fn extend(&mut self, other: IdentityResidualReport) {
        self.entries.extend(other.entries);
    }

    /// Per-point residuals folded into the running maximum per name.
    fn absorb(&mut self, stencil: f64, residuals: Vec<(&'static str, f64)>) {
        for (name, r) in residuals {
            match self.entries.iter_mut().find(|e| e.name == name) {
                Some(e) => e.residual = e.residual.max(r),
                None => self.entries.push(IdentityEntry {
                    name: name.to_string(),
                    residual: r,
                    stencil,
                    order: None,
                }),
            }
        }
    }
}

/// The coarse report with an order attached to every identity also present
/// in the fine (halved-stencil) report.
pub fn with_orders(coarse: &IdentityResidualReport, fine: &IdentityResidualReport) -> IdentityResidualReport {
    let entries = coarse
        .entries
        .iter()
        .map(|e| {
            let mut e = e.clone();
            e.order = fine.residual(&e.name).map(|f| estimate_order(e.residual, f));
            e
        })
        .collect();
    IdentityResidualReport { entries }
}

fn max_over<I, F>(imm: &I, points: &[Vec<f64>], h: f64, reach: f64, per_point: F) -> Result<IdentityResidualReport>
where
    I: Immersion + ?Sized,
    F: Fn(&I, &[f64], f64) -> Result<Vec<(&'static str, f64)>>,
{
    if points.is_empty() {
        return Err(Error::InvalidParameter("no sample points".into()));
    }
    let mut report = IdentityResidualReport::default();
    for u in points {
        check_room(imm, u, h, reach)?;
        report.absorb(h, per_point(imm, u, h)?);
    }
    Ok(report)
}

fn flatten(ms: &[DMatrix<f64>]) -> Vec<f64> {
    ms.iter().flat_map(|m| m.iter().copied().collect::<Vec<_>>()).collect()
}

/// Column-major entry (i, j) of the `block`-th n×n matrix in a flattened list.
fn at(flat: &[f64], n: usize, block: usize, i: usize, j: usize) -> f64 {
    flat[block * n * n + j * n + i]
}

/// Σ over orthonormal indices of a covariant 4-tensor squared, rooted.
fn tensor4_norm<T: Fn(usize, usize, usize, usize) -> f64>(e: &DMatrix<f64>, n: usize, t: T) -> f64 {
    let mut total = 0.0;
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let mut v = 0.0;
                    for i in 0..n {
                        for j in 0..n {
                            for k in 0..n {
                                for l in 0..n {
                                    v += e[(i, a)] * e[(j, b)] * e[(k, c)] * e[(l, d)] * t(i, j, k, l);
                                }
                            }
                        }
                    }
                    total += v * v;
                }
            }
        }
    }
    total.sqrt()
}

/// Size of a vector-valued covariant 2-tensor r[i][j] in an orthonormal frame.
fn vector2_norm(e: &DMatrix<f64>, r: &[Vec<DVector<f64>>]) -> f64 {
    let n = r.len();
    let mut total = 0.0;
    for a in 0..n {
        for b in 0..n {
            let mut v = DVector::zeros(r[0][0].len());
            for i in 0..n {
                for j in 0..n {
                    v += &r[i][j] * (e[(i, a)] * e[(j, b)]);
                }
            }
            total += v.norm_squared();
        }
    }
    total.sqrt()
}

/// h_αik g^{kl} h_βjl.
fn h_contract(st: &ShapeTensors, alpha: usize, beta: usize) -> DMatrix<f64> {
    &st.h2f[alpha] * &st.ginv * st.h2f[beta].transpose()
}

fn structure_at<I: Immersion + ?Sized>(imm: &I, u: &[f64], h: f64) -> Result<Vec<(&'static str, f64)>> {
    let (st, cov) = covariant_unchecked(imm, u, h)?;
    let n = st.n();
    let k = st.k();
    let e = st.orthonormalizer();
    let mut out = Vec::new();

    // Gauss: curvature of the induced connection against the quadratic in h
    let gamma_field = |v: &[f64]| -> Result<Vec<f64>> { Ok(flatten(&local_tensors(imm, v, h)?.christoffel)) };
    let dgamma = stencil::first(&gamma_field, u, h)?;
    let gam = |m: usize, i: usize, j: usize| st.christoffel[m][(i, j)];
    // R^m_lij
    let riem_up = |m: usize, l: usize, i: usize, j: usize| {
        let mut v = at(&dgamma[i], n, m, j, l) - at(&dgamma[j], n, m, i, l);
        for p in 0..n {
            v += gam(m, i, p) * gam(p, j, l) - gam(m, j, p) * gam(p, i, l);
        }
        v
    };
    let gauss = tensor4_norm(&e, n, |i, j, kk, l| {
        let lhs: f64 = (0..n).map(|m| st.g[(kk, m)] * riem_up(m, l, i, j)).sum();
        let rhs: f64 = (0..k)
            .map(|a| st.h2f[a][(i, kk)] * st.h2f[a][(j, l)] - st.h2f[a][(j, kk)] * st.h2f[a][(i, l)])
            .sum();
        lhs - rhs
    });
    out.push(("gauss", gauss));

    // Weingarten: ∂_i e_β = h_βi^l ∂_l F + C^γ_iβ e_γ
    let big_n = imm.ambient_dim();
    let frame_field = |v: &[f64]| -> Result<Vec<f64>> {
        let t = tangents_at(imm, v, h)?;
        let frame = super::tensors::normal_frame(imm, v, h, &t)?;
        Ok(frame.iter().flat_map(|f| f.iter().copied().collect::<Vec<_>>()).collect())
    };
    let dframe = stencil::first(&frame_field, u, h)?;
    let mut weingarten = 0.0f64;
    for beta in 0..k {
        let mixed = &st.ginv * &st.h2f[beta];
        let mut total = 0.0;
        for a in 0..n {
            let mut r = DVector::zeros(big_n);
            for i in 0..n {
                let mut ri = DVector::from_iterator(big_n, (0..big_n).map(|c| dframe[i][beta * big_n + c]));
                for l in 0..n {
                    ri -= &st.tangents[l] * mixed[(l, i)];
                }
                for gamma in 0..k {
                    ri -= &st.frame[gamma] * st.normconn[i][(beta, gamma)];
                }
                r += ri * e[(i, a)];
            }
            total += r.norm_squared();
        }
        weingarten = weingarten.max(total.sqrt());
    }
    out.push(("weingarten", weingarten));

    out.push(("codazzi", cov.codazzi_defect(&st)));

    // Hessian of the immersion with Christoffels from derivatives of the metric
    let metric_field = |v: &[f64]| -> Result<Vec<f64>> {
        let t = tangents_at(imm, v, h)?;
        Ok((0..n * n).map(|ij| t[ij % n].dot(&t[ij / n])).collect())
    };
    let dg = stencil::first(&metric_field, u, h)?;
    let dgm = |kk: usize, i: usize, j: usize| at(&dg[kk], n, 0, i, j);
    let residual: Vec<Vec<DVector<f64>>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let mut r = st.second[i][j].clone();
                    for m in 0..n {
                        let gamma: f64 = (0..n)
                            .map(|l| 0.5 * st.ginv[(m, l)] * (dgm(i, j, l) + dgm(j, i, l) - dgm(l, i, j)))
                            .sum();
                        r -= &st.tangents[m] * gamma;
                    }
                    for a in 0..k {
                        r += &st.frame[a] * st.h2f[a][(i, j)];
                    }
                    r
                })
                .collect()
        })
        .collect();
    out.push(("hessian_of_immersion", vector2_norm(&e, &residual)));

    if k > 1 {
        // Ricci: curvature of the normal connection
        let conn_field = |v: &[f64]| -> Result<Vec<f64>> { Ok(flatten(&tensors_unchecked(imm, v, h)?.normconn)) };
        let dconn = stencil::first(&conn_field, u, h)?;
        // C^α_iβ = normconn[i](β, α)
        let c = |alpha: usize, i: usize, beta: usize| st.normconn[i][(beta, alpha)];
        let dc = |d: usize, alpha: usize, i: usize, beta: usize| at(&dconn[d], k, i, beta, alpha);
        let mut ricci = 0.0f64;
        for alpha in 0..k {
            for beta in 0..k {
                let quad = h_contract(&st, alpha, beta);
                let t = DMatrix::from_fn(n, n, |i, j| {
                    let mut lhs = dc(i, alpha, j, beta) - dc(j, alpha, i, beta);
                    for g in 0..k {
                        lhs += c(alpha, i, g) * c(g, j, beta) - c(alpha, j, g) * c(g, i, beta);
                    }
                    lhs - (quad[(i, j)] - quad[(j, i)])
                });
                ricci = ricci.max(tensor2_norm(&e, &t));
            }
        }
        out.push(("ricci", ricci));
    }
    Ok(out)
}

/// Gauss, Weingarten, Codazzi, the Hessian of the immersion and (k = 2) the
/// Ricci equation, as maxima over the sample points.
pub fn check_structure_identities<I: Immersion + ?Sized>(
    imm: &I,
    points: &[Vec<f64>],
    h: f64,
) -> Result<IdentityResidualReport> {
    max_over(imm, points, h, REACH + tensor_reach(imm), structure_at)
}

/// ∇_a∇_b h_ij for a hypersurface, from finite differences of ∇h.
pub(crate) fn second_covariant_h<I: Immersion + ?Sized>(
    imm: &I,
    u: &[f64],
    h: f64,
    st: &ShapeTensors,
    nabla: &[DMatrix<f64>],
) -> Result<Vec<Vec<DMatrix<f64>>>> {
    let n = st.n();
    let nn = n * n;
    // h and Γ share one first-difference pass; h also gets a direct second difference
    let field = |v: &[f64]| -> Result<Vec<f64>> {
        let local = local_tensors(imm, v, h)?;
        let mut out = local.h2f_flat();
        out.extend(flatten(&local.christoffel));
        Ok(out)
    };
    let d1 = stencil::first(&field, u, h)?;
    let d2 = stencil::second(&field, u, h)?;
    let hh = &st.h2f[0];
    let gam = |m: usize, i: usize, j: usize| st.christoffel[m][(i, j)];
    let dh = |a: usize, i: usize, j: usize| at(&d1[a], n, 0, i, j);
    let dgam = |a: usize, m: usize, i: usize, j: usize| at(&d1[a][nn..], n, m, i, j);
    Ok((0..n)
        .map(|a| {
            (0..n)
                .map(|b| {
                    DMatrix::from_fn(n, n, |i, j| {
                        // ∂_a of ∇_b h_ij = ∂_b h_ij − Γ^m_bi h_mj − Γ^m_bj h_im
                        let mut v = at(&d2[a][b], n, 0, i, j);
                        for m in 0..n {
                            v -= dgam(a, m, b, i) * hh[(m, j)] + gam(m, b, i) * dh(a, m, j);
                            v -= dgam(a, m, b, j) * hh[(i, m)] + gam(m, b, j) * dh(a, i, m);
                        }
                        for m in 0..n {
                            v -= gam(m, a, b) * nabla[m][(i, j)];
                            v -= gam(m, a, i) * nabla[b][(m, j)];
                            v -= gam(m, a, j) * nabla[b][(i, m)];
                        }
                        v
                    })
                })
                .collect()
        })
        .collect())
}

/// Scalar Hessian ∇_i∇_j φ from finite differences of a scalar field.
pub(crate) fn scalar_hessian<F>(st: &ShapeTensors, f: &F, u: &[f64], h: f64) -> Result<(DMatrix<f64>, DVector<f64>)>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let n = st.n();
    let d1 = stencil::first(f, u, h)?;
    let d2 = stencil::second(f, u, h)?;
    let grad = DVector::from_fn(n, |i, _| d1[i][0]);
    let hess = DMatrix::from_fn(n, n, |i, j| {
        d2[i][j][0] - (0..n).map(|m| st.christoffel[m][(i, j)] * grad[m]).sum::<f64>()
    });
    Ok((hess, grad))
}

fn simons_at<I: Immersion + ?Sized>(imm: &I, u: &[f64], h: f64) -> Result<Vec<(&'static str, f64)>> {
    let (st, cov) = covariant_unchecked(imm, u, h)?;
    let e = st.orthonormalizer();
    let nabla = &cov.nabla_h[0];
    let dd = second_covariant_h(imm, u, h, &st, nabla)?;
    let lap_h = dd
        .iter()
        .enumerate()
        .fold(DMatrix::zeros(st.n(), st.n()), |acc, (a, row)| {
            row.iter()
                .enumerate()
                .fold(acc, |acc, (b, m)| acc + m * st.ginv[(a, b)])
        });

    let h_field = |v: &[f64]| -> Result<Vec<f64>> { Ok(vec![local_tensors(imm, v, h)?.mean_curvature[0]]) };
    let (hess_h, _) = scalar_hessian(&st, &h_field, u, h)?;
    let a2_field = |v: &[f64]| -> Result<Vec<f64>> { Ok(vec![local_tensors(imm, v, h)?.a2]) };
    let (hess_a2, _) = scalar_hessian(&st, &a2_field, u, h)?;
    let lap_a2 = (&st.ginv * &hess_a2).trace();

    let hh = &st.h2f[0];
    let rhs = &lap_h - st.h_squared(0) * st.mean_curvature[0] + hh * st.a2;
    let hessian_residual = tensor2_norm(&e, &(&hess_h - rhs));

    let cubic = st.cubic.expect("hypersurface");
    let h_up = &st.ginv * hh * &st.ginv;
    let lhs = 2.0 * h_up.component_mul(&hess_h).sum();
    let laplacian_residual = (lhs - (lap_a2 - 2.0 * cov.norm_sq - 2.0 * cubic.z)).abs();
    Ok(vec![
        ("simons_hessian_h", hessian_residual),
        ("simons_laplacian_a2", laplacian_residual),
    ])
}

/// Reach of the Simons check: second differences of h.
pub(crate) fn simons_reach() -> f64 {
    2.0 * REACH
}

/// ∇∇H = Δh − H h·h + |A|² h and 2h^{ij}∇_i∇_j H = Δ|A|² − 2|∇A|² − 2Z on
/// a hypersurface.
pub fn check_simons_hypersurface<I: Immersion + ?Sized>(
    imm: &I,
    points: &[Vec<f64>],
    h: f64,
) -> Result<IdentityResidualReport> {
    if imm.codim() != 1 {
        return Err(Error::Unsupported("Simons identity check needs a hypersurface".into()));
    }
    max_over(imm, points, h, simons_reach(), simons_at)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patch::{ImmersionPatch, Monomial, PatchShape};

    fn patch(shape: PatchShape) -> ImmersionPatch {
        ImmersionPatch::new(shape).unwrap()
    }

    #[test]
    fn order_estimates() {
        assert_eq!(estimate_order(1e-15, 0.0), ConvergenceOrder::Exact);
        match estimate_order(1.6e-5, 1e-6) {
            ConvergenceOrder::Observed(p) => assert!((p - 4.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
        let json = serde_json::to_string(&ConvergenceOrder::Exact).unwrap();
        assert_eq!(json, "\"exact\"");
    }

    #[test]
    fn flat_plane_is_exact() {
        // dyadic spacing and points keep every difference exact
        let p = patch(PatchShape::Plane);
        let h = 1.0 / 128.0;
        let pts = vec![vec![0.25, -0.5], vec![1.0, 0.75]];
        let coarse = check_structure_identities(&p, &pts, h).unwrap();
        let fine = check_structure_identities(&p, &pts, h / 2.0).unwrap();
        let report = with_orders(&coarse, &fine);
        for e in &report.entries {
            assert_eq!(e.residual, 0.0, "{}", e.name);
            assert_eq!(e.order, Some(ConvergenceOrder::Exact));
        }
        let simons = check_simons_hypersurface(&p, &pts, h).unwrap();
        assert!(simons.entries.iter().all(|e| e.residual == 0.0));
    }

    #[test]
    fn unit_sphere_gauss() {
        let p = patch(PatchShape::Sphere { r: 1.0 });
        let report = check_structure_identities(&p, &[vec![1.0, 0.4], vec![2.0, 3.0]], 1e-2).unwrap();
        for name in ["gauss", "weingarten", "codazzi", "hessian_of_immersion"] {
            assert!(report.residual(name).unwrap() <= 1e-6, "{name}: {:?}", report.residual(name));
        }
    }

    #[test]
    fn tilted_circle_ricci() {
        let p = patch(PatchShape::TiltedCircle { r: 1.0, tilt: 0.7 });
        let report = check_structure_identities(&p, &[vec![0.3]], 1e-2).unwrap();
        assert!(report.residual("ricci").unwrap() <= 1e-6);
        let wavy = patch(PatchShape::WavyCurve { r: 1.0, amplitude: 0.3 });
        let report = check_structure_identities(&wavy, &[vec![0.3], vec![2.5]], 1e-2).unwrap();
        for e in &report.entries {
            assert!(e.residual <= 1e-6, "{}: {}", e.name, e.residual);
        }
    }

    #[test]
    fn round_sphere_simons() {
        let p = patch(PatchShape::Sphere { r: 1.5 });
        let report = check_simons_hypersurface(&p, &[vec![1.2, 0.5]], 1e-2).unwrap();
        for e in &report.entries {
            assert!(e.residual <= 1e-5, "{}: {}", e.name, e.residual);
        }
    }

    #[test]
    fn paraboloid_simons_at_origin() {
        let p = patch(PatchShape::Graph {
            terms: vec![
                Monomial { coef: 1.0, px: 2, py: 0 },
                Monomial { coef: 1.0, px: 0, py: 2 },
            ],
        });
        let report = check_simons_hypersurface(&p, &[vec![0.0, 0.0]], 1e-2).unwrap();
        for e in &report.entries {
            assert!(e.residual <= 1e-5, "{}: {}", e.name, e.residual);
        }
    }

    #[test]
    fn ellipsoid_convergence() {
        let p = patch(PatchShape::Ellipsoid { a: 1.0, b: 1.0, c: 1.2 });
        let pts = vec![vec![1.0, 0.7]];
        let structure = with_orders(
            &check_structure_identities(&p, &pts, 0.04).unwrap(),
            &check_structure_identities(&p, &pts, 0.02).unwrap(),
        );
        let simons = with_orders(
            &check_simons_hypersurface(&p, &pts, 0.04).unwrap(),
            &check_simons_hypersurface(&p, &pts, 0.02).unwrap(),
        );
        for e in structure.entries.iter().chain(&simons.entries) {
            assert!(e.order.unwrap().at_least(2.0), "{}: {:?}", e.name, e.order);
        }
    }

    #[test]
    fn stencil_room_and_codimension_errors() {
        let p = patch(PatchShape::Sphere { r: 1.0 });
        assert!(matches!(
            check_simons_hypersurface(&p, &[vec![0.03, 1.0]], 1e-2),
            Err(Error::StencilRoom { .. })
        ));
        let c = patch(PatchShape::TiltedCircle { r: 1.0, tilt: 0.1 });
        assert!(matches!(
            check_simons_hypersurface(&c, &[vec![0.0]], 1e-2),
            Err(Error::Unsupported(_))
        ));
    }
}
