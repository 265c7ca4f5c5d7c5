use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::identities::{scalar_hessian, second_covariant_h, simons_reach};
use super::tensors::{covariant_unchecked, local_tensors, tensor2_norm, ShapeTensors};
use super::{check_room, Axis, Immersion};
use crate::error::{Error, Result};
use crate::potential::PotentialField;

/// The immersion F + ε·V after one explicit step of the forced flow, on the
/// same parameter domain.
pub struct FlowDeformed<'a, I: Immersion + ?Sized> {
    pub base: &'a I,
    pub field: &'a PotentialField,
    pub eps: f64,
    pub h: f64,
}

impl<I: Immersion + ?Sized> FlowDeformed<'_, I> {
    /// Normal velocity Σ_α (−H_α + ⟨∇ω, e_α⟩) e_α and the base tensors.
    fn velocity(&self, u: &[f64]) -> Result<(DVector<f64>, ShapeTensors)> {
        let st = local_tensors(self.base, u, self.h)?;
        let grad = DVector::from_vec(self.field.gradient(st.point.as_slice())?);
        let mut v = DVector::zeros(st.point.len());
        for (e, hm) in st.frame.iter().zip(&st.mean_curvature) {
            v += e * (grad.dot(e) - hm);
        }
        Ok((v, st))
    }
}

impl<I: Immersion + ?Sized> Immersion for FlowDeformed<'_, I> {
    fn param_dim(&self) -> usize {
        self.base.param_dim()
    }

    fn ambient_dim(&self) -> usize {
        self.base.ambient_dim()
    }

    fn eval(&self, u: &[f64]) -> Result<DVector<f64>> {
        let (v, st) = self.velocity(u)?;
        Ok(st.point + v * self.eps)
    }

    fn axes(&self) -> Vec<Axis> {
        self.base.axes()
    }

    fn orientation_hint(&self, u: &[f64], h: f64) -> Result<DVector<f64>> {
        let t = super::tensors::tangents_at(self.base, u, h)?;
        let frame = super::tensors::normal_frame(self.base, u, h, &t)?;
        Ok(frame[0].clone())
    }

    fn frame_rotation(&self) -> f64 {
        self.base.frame_rotation()
    }
}

/// Finite-difference d|A|²/dt against the evolution equation's right side.
#[derive(Debug, Clone, Serialize)]
pub struct EvolutionCheck {
    pub rate_fd: f64,
    pub rhs: f64,
    pub residual: f64,
    /// residual / max(|rhs|, |rate_fd|, 1).
    pub relative: f64,
    /// Every term of the right side, individually.
    pub terms: BTreeMap<String, f64>,
    /// Size of the residual of the tensor equation for dh_ij/dt with the
    /// Hessian cross term symmetrized in i, j (hypersurfaces only).
    pub h_residual_symmetrized: Option<f64>,
    /// Same, with the cross term taken twice in the same index order.
    pub h_residual_literal: Option<f64>,
}

impl EvolutionCheck {
    fn from_terms(rate_fd: f64, terms: BTreeMap<String, f64>) -> Self {
        let rhs: f64 = terms.values().sum();
        let residual = (rate_fd - rhs).abs();
        EvolutionCheck {
            rate_fd,
            rhs,
            residual,
            relative: residual / rhs.abs().max(rate_fd.abs()).max(1.0),
            terms,
            h_residual_symmetrized: None,
            h_residual_literal: None,
        }
    }
}

fn check_inputs<I: Immersion + ?Sized>(imm: &I, field: &PotentialField, u: &[f64], eps: f64, h: f64) -> Result<()> {
    if field.dimension() != imm.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: imm.ambient_dim(),
            got: field.dimension(),
        });
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("deformation step must be positive, got {eps}")));
    }
    check_room(imm, u, h, simons_reach())
}

/// Tangential part of ∇ω as a contravariant vector ω^m.
fn tangential_up(st: &ShapeTensors, grad: &DVector<f64>) -> DVector<f64> {
    let lower = DVector::from_fn(st.n(), |i, _| st.tangents[i].dot(grad));
    &st.ginv * lower
}

/// Common scalar pieces: Δ|A|², −2|∇A|², −⟨∇ω, ∇|A|²⟩.
fn laplacian_terms<I: Immersion + ?Sized>(
    imm: &I,
    u: &[f64],
    h: f64,
    st: &ShapeTensors,
    norm_sq: f64,
    omega_up: &DVector<f64>,
    terms: &mut BTreeMap<String, f64>,
) -> Result<()> {
    let a2_field = |v: &[f64]| -> Result<Vec<f64>> { Ok(vec![local_tensors(imm, v, h)?.a2]) };
    let (hess_a2, grad_a2) = scalar_hessian(st, &a2_field, u, h)?;
    terms.insert("laplacian_a2".into(), (&st.ginv * hess_a2).trace());
    terms.insert("gradient_norm_sq".into(), -2.0 * norm_sq);
    terms.insert("drift".into(), -omega_up.dot(&grad_a2));
    Ok(())
}

/// d|A|²/dt of a hypersurface under the forced flow, by an explicit step of
/// size ε, against Δ|A|² − 2|∇A|² + 2|A|⁴ − 2h^{ij}∇³ω(∂_iF, ∂_jF, ν)
/// + 2|A|²∇²ω(ν, ν) − 4h^{ij}h_j^l∇²ω(∂_iF, ∂_lF) − ⟨∇ω, ∇|A|²⟩.
/// The tensor equation for dh_ij/dt is checked alongside.
pub fn evolution_residual_hypersurface<I: Immersion + ?Sized>(
    imm: &I,
    field: &PotentialField,
    u: &[f64],
    eps: f64,
    h: f64,
) -> Result<EvolutionCheck> {
    if imm.codim() != 1 {
        return Err(Error::Unsupported("hypersurface evolution check needs codimension 1".into()));
    }
    check_inputs(imm, field, u, eps, h)?;
    let deformed = FlowDeformed {
        base: imm,
        field,
        eps,
        h,
    };
    let moved = local_tensors(&deformed, u, h)?;
    let (st, cov) = covariant_unchecked(imm, u, h)?;
    let rate_fd = (moved.a2 - st.a2) / eps;

    let x = st.point.as_slice();
    let nu = &st.frame[0];
    let grad = DVector::from_vec(field.gradient(x)?);
    let hess = field.hessian(x)?;
    let third = field.third(x)?;
    let omega_up = tangential_up(&st, &grad);
    let n = st.n();
    let hh = &st.h2f[0];
    let h_up = &st.ginv * hh * &st.ginv;
    // W_ij = ∇²ω(∂_iF, ∂_jF), D_ij = ∇³ω(∂_iF, ∂_jF, ν)
    let w = DMatrix::from_fn(n, n, |i, j| (st.tangents[i].transpose() * &hess * &st.tangents[j])[0]);
    let d3 = DMatrix::from_fn(n, n, |i, j| {
        third.contract(st.tangents[i].as_slice(), st.tangents[j].as_slice(), nu.as_slice())
    });
    let hess_nn = (nu.transpose() * &hess * nu)[0];

    let mut terms = BTreeMap::new();
    laplacian_terms(imm, u, h, &st, cov.norm_sq, &omega_up, &mut terms)?;
    terms.insert("quartic".into(), 2.0 * st.a2 * st.a2);
    terms.insert("third_derivative".into(), -2.0 * h_up.component_mul(&d3).sum());
    terms.insert("hessian_normal".into(), 2.0 * st.a2 * hess_nn);
    let hgh = &h_up * hh * &st.ginv;
    terms.insert("hessian_tangential".into(), -4.0 * hgh.component_mul(&w).sum());
    let mut check = EvolutionCheck::from_terms(rate_fd, terms);

    // dh_ij/dt in the same Lagrangian coordinates
    let dh = (&moved.h2f[0] - hh) / eps;
    let nabla = &cov.nabla_h[0];
    let dd = second_covariant_h(imm, u, h, &st, nabla)?;
    let mut lap_h = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            lap_h += &dd[a][b] * st.ginv[(a, b)];
        }
    }
    let hsq = st.h_squared(0);
    let omega_nu = grad.dot(nu);
    let drift = DMatrix::from_fn(n, n, |i, j| (0..n).map(|m| omega_up[m] * nabla[m][(i, j)]).sum());
    let cross = hh * &st.ginv * &w;
    let common = &lap_h - &hsq * (2.0 * st.mean_curvature[0]) + hh * st.a2 - &d3 + hh * hess_nn - drift
        + &hsq * (2.0 * omega_nu);
    let e = st.orthonormalizer();
    let symmetrized = &common - &cross - cross.transpose();
    let literal = &common - &cross * 2.0;
    check.h_residual_symmetrized = Some(tensor2_norm(&e, &(&dh - symmetrized)));
    check.h_residual_literal = Some(tensor2_norm(&e, &(&dh - literal)));
    Ok(check)
}

/// d|A|²/dt in codimension 2 against Δ|A|² − 2|∇A|² − 2h_αij∇³ω(e_j, e_i, e_α)
/// + 2h_αij h_βij ∇²ω(e_α, e_β) − 4h_αik h_αij ∇²ω(e_j, e_k) − ⟨∇ω, ∇|A|²⟩
/// + 2Σ(h_αik h_γmk − h_αmk h_γik)² + 2Σ(Σ_α h_αij h_αmk)², all in
/// orthonormal frames.
pub fn evolution_residual_highercodim<I: Immersion + ?Sized>(
    imm: &I,
    field: &PotentialField,
    u: &[f64],
    eps: f64,
    h: f64,
) -> Result<EvolutionCheck> {
    if imm.codim() < 2 {
        return Err(Error::Unsupported("higher-codimension evolution check needs codimension ≥ 2".into()));
    }
    check_inputs(imm, field, u, eps, h)?;
    let deformed = FlowDeformed {
        base: imm,
        field,
        eps,
        h,
    };
    let moved = local_tensors(&deformed, u, h)?;
    let (st, cov) = covariant_unchecked(imm, u, h)?;
    let rate_fd = (moved.a2 - st.a2) / eps;

    let x = st.point.as_slice();
    let grad = DVector::from_vec(field.gradient(x)?);
    let hess = field.hessian(x)?;
    let third = field.third(x)?;
    let omega_up = tangential_up(&st, &grad);
    let n = st.n();
    let k = st.k();
    let hat = st.h_hat();
    let et = st.orthonormal_tangents();
    let quad = |a: &DVector<f64>, b: &DVector<f64>| (a.transpose() * &hess * b)[0];

    let mut terms = BTreeMap::new();
    laplacian_terms(imm, u, h, &st, cov.norm_sq, &omega_up, &mut terms)?;

    let mut third_term = 0.0;
    let mut normal_term = 0.0;
    let mut tangential_term = 0.0;
    for alpha in 0..k {
        for i in 0..n {
            for j in 0..n {
                third_term += hat[alpha][(i, j)]
                    * third.contract(et[j].as_slice(), et[i].as_slice(), st.frame[alpha].as_slice());
                for beta in 0..k {
                    normal_term +=
                        hat[alpha][(i, j)] * hat[beta][(i, j)] * quad(&st.frame[alpha], &st.frame[beta]);
                }
                for kk in 0..n {
                    tangential_term += hat[alpha][(i, kk)] * hat[alpha][(i, j)] * quad(&et[j], &et[kk]);
                }
            }
        }
    }
    terms.insert("third_derivative".into(), -2.0 * third_term);
    terms.insert("hessian_normal".into(), 2.0 * normal_term);
    terms.insert("hessian_tangential".into(), -4.0 * tangential_term);

    let mut commutator = 0.0;
    let mut products = 0.0;
    for a in 0..k {
        for g in 0..k {
            let c = &hat[a] * &hat[g] - &hat[g] * &hat[a];
            commutator += c.norm_squared();
            products += hat[a].dot(&hat[g]).powi(2);
        }
    }
    terms.insert("quartic_commutator".into(), 2.0 * commutator);
    terms.insert("quartic_products".into(), 2.0 * products);
    Ok(EvolutionCheck::from_terms(rate_fd, terms))
}
