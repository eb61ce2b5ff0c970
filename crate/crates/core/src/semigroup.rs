//! Fundamental solution semigroups of the difference Riccati equation.
//!
//! Three families of `2n×2n` Hessians are built from a problem and a duality
//! basis `M`:
//!
//! * `Q_k`, the Hessian of the auxiliary value function obtained by
//!   propagating the basis `ψ(·, z)` for `k` steps;
//! * `Θ_k`, the dual-space kernels, propagated by `⊛` from `Θ₁`;
//! * `Λ_k`, the primal-space kernels, propagated by `⊛` from `Λ₁`.
//!
//! A DRE solution `R_k(P₀)` is recovered from `Λ_k` by the Schur-complement
//! map [`psi_p`], or from `Θ_k` through [`upsilon`], [`psi_d`] and
//! [`upsilon_inv`]. The block transforms `Γ`, `Δ`, `Π`, `Ξ` relate the three
//! families to each other.

use std::fmt;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::duality::{upsilon, upsilon_inv};
use crate::error::{DreError, Result};
use crate::grid::{maximize, GridSpec};
use crate::linalg::{congruence, invert, is_negative_definite, is_positive_definite, sym, BlockSymMat, SymMat, Tolerances};
use crate::problem::ProblemData;
use crate::riccati::{riccati_pivot, riccati_step, GridEstimate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Kind {
    Q,
    Theta,
    Lambda,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Q => "Q",
            Kind::Theta => "Theta",
            Kind::Lambda => "Lambda",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strategy {
    Sequential,
    #[default]
    Doubling,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemigroupElement {
    pub kind: Kind,
    pub k: usize,
    pub hessian: BlockSymMat,
}

impl SemigroupElement {
    /// `self ⊛ other`, indexed `self.k + other.k`.
    pub fn compose(&self, other: &SemigroupElement, tol: &Tolerances) -> Result<SemigroupElement> {
        assert_eq!(self.kind, other.kind, "cannot compose elements of different kinds");
        let hessian = star(&self.hessian, &other.hessian, tol).map_err(|e| match e {
            DreError::PivotIndefinite { max_eig, .. } => DreError::PivotIndefinite {
                left_k: self.k,
                right_k: other.k,
                max_eig,
            },
            e => e,
        })?;
        Ok(SemigroupElement {
            kind: self.kind,
            k: self.k + other.k,
            hessian,
        })
    }
}

/// Inner block sum `left.b22 + right.b11` inverted inside `⊛`.
#[derive(Debug, Clone, PartialEq)]
pub struct PivotMatrix {
    pub value: SymMat,
    pub max_eigenvalue: f64,
}

impl PivotMatrix {
    pub fn of(left: &BlockSymMat, right: &BlockSymMat) -> PivotMatrix {
        let value = left.b22.add(&right.b11);
        let max_eigenvalue = value.max_eigenvalue();
        PivotMatrix { value, max_eigenvalue }
    }
}

pub fn q_initial(m: &SymMat) -> BlockSymMat {
    BlockSymMat {
        b11: m.clone(),
        b12: -m.as_matrix(),
        b22: m.clone(),
    }
}

/// One step of the `Q_k` recursion.
pub fn q_step(q: &BlockSymMat, prob: &ProblemData, tol: &Tolerances) -> Result<BlockSymMat> {
    prob.check_dim(&q.b11, "Q block")?;
    let b11 = riccati_step(&q.b11, prob, tol)?;
    let inv = invert(&riccati_pivot(&q.b11, prob), "Q pivot")?;
    // B(γ²I − BᵀQ¹¹B)⁻¹Bᵀ
    let gain = congruence(&inv.value, &prob.b.transpose());
    let at = prob.a.transpose();
    let b12 = &at * &q.b12 + &at * q.b11.as_matrix() * gain.as_matrix() * &q.b12;
    let b22 = q.b22.add(&congruence(&gain, &q.b12));
    Ok(BlockSymMat { b11, b12, b22 })
}

/// `Q_0, …, Q_k`.
pub fn q_sequence(prob: &ProblemData, m: &SymMat, k: usize, tol: &Tolerances) -> Result<Vec<BlockSymMat>> {
    prob.check_dim(m, "M")?;
    let mut seq = Vec::with_capacity(k + 1);
    seq.push(q_initial(m));
    for i in 0..k {
        let next = q_step(&seq[i], prob, tol)?;
        seq.push(next);
    }
    Ok(seq)
}

fn q_one(prob: &ProblemData, m: &SymMat, tol: &Tolerances) -> Result<BlockSymMat> {
    q_step(&q_initial(m), prob, tol)
}

/// `Θ₁` from `Q₁` with pivot `M − Q₁¹¹`.
pub fn theta_initial(prob: &ProblemData, m: &SymMat, tol: &Tolerances) -> Result<BlockSymMat> {
    let q1 = q_one(prob, m, tol)?;
    let d = invert(&m.sub(&q1.b11), "M - Q1^11")?.value;
    let (mm, dm) = (m.as_matrix(), d.as_matrix());
    Ok(BlockSymMat {
        b11: sym(mm * dm * mm).sub(m),
        b12: mm * dm * &q1.b12,
        b22: congruence(&d, &q1.b12).add(&q1.b22),
    })
}

/// `Λ₁` from `Q₁` with pivot `M − Q₁²²`.
pub fn lambda_initial(prob: &ProblemData, m: &SymMat, tol: &Tolerances) -> Result<BlockSymMat> {
    let q1 = q_one(prob, m, tol)?;
    let d = invert(&m.sub(&q1.b22), "M - Q1^22")?.value;
    let (mm, dm) = (m.as_matrix(), d.as_matrix());
    Ok(BlockSymMat {
        b11: congruence(&d, &q1.b12.transpose()).add(&q1.b11),
        b12: &q1.b12 * dm * mm,
        b22: sym(mm * dm * mm).sub(m),
    })
}

/// Max-plus kernel composition `left ⊛ right`.
///
/// The pivot `left.b22 + right.b11` must be negative definite, otherwise the
/// inner supremum over the shared variable is infinite.
pub fn star(left: &BlockSymMat, right: &BlockSymMat, tol: &Tolerances) -> Result<BlockSymMat> {
    if left.block_dim() != right.block_dim() {
        return Err(DreError::DimensionMismatch("star operands differ in block size".into()));
    }
    let pivot = PivotMatrix::of(left, right);
    if !is_negative_definite(&pivot.value, tol) {
        return Err(DreError::PivotIndefinite {
            left_k: 0,
            right_k: 0,
            max_eig: pivot.max_eigenvalue,
        });
    }
    let inv = invert(&pivot.value, "star pivot")?.value;
    let im = inv.as_matrix();
    Ok(BlockSymMat {
        b11: left.b11.sub(&congruence(&inv, &left.b12.transpose())),
        b12: -(&left.b12 * im * &right.b12),
        b22: right.b22.sub(&congruence(&inv, &right.b12)),
    })
}

fn initial_element(kind: Kind, prob: &ProblemData, m: &SymMat, tol: &Tolerances) -> Result<SemigroupElement> {
    let hessian = match kind {
        Kind::Q => q_one(prob, m, tol)?,
        Kind::Theta => theta_initial(prob, m, tol)?,
        Kind::Lambda => lambda_initial(prob, m, tol)?,
    };
    Ok(SemigroupElement { kind, k: 1, hessian })
}

/// `Θ_k` or `Λ_k` by repeated `⊛` with the first element. `Q_k` is built by
/// its own recursion regardless of `strategy`.
pub fn semigroup_element(
    kind: Kind,
    k: usize,
    prob: &ProblemData,
    m: &SymMat,
    strategy: Strategy,
    tol: &Tolerances,
) -> Result<SemigroupElement> {
    if k == 0 {
        return Err(DreError::InvalidProblem("semigroup index must be at least 1".into()));
    }
    prob.check_dim(m, "M")?;
    if kind == Kind::Q {
        let seq = q_sequence(prob, m, k, tol)?;
        return Ok(SemigroupElement {
            kind,
            k,
            hessian: seq.into_iter().last().unwrap(),
        });
    }
    let first = initial_element(kind, prob, m, tol)?;
    match strategy {
        Strategy::Sequential => {
            let mut acc = first.clone();
            for _ in 1..k {
                acc = acc.compose(&first, tol)?;
            }
            Ok(acc)
        }
        Strategy::Doubling => {
            let mut base = first;
            let mut acc: Option<SemigroupElement> = None;
            let mut rest = k;
            loop {
                if rest & 1 == 1 {
                    acc = Some(match acc {
                        None => base.clone(),
                        Some(a) => base.compose(&a, tol)?,
                    });
                }
                rest >>= 1;
                if rest == 0 {
                    break;
                }
                base = base.compose(&base, tol)?;
            }
            Ok(acc.expect("k >= 1"))
        }
    }
}

/// Elements `1..=K` of one semigroup, built once and then shared read-only.
#[derive(Debug, Clone)]
pub struct SemigroupTable {
    pub kind: Kind,
    elements: Vec<SemigroupElement>,
}

impl SemigroupTable {
    /// Builds `1..=horizon` by `⊛` with the first element (or by the `Q`
    /// recursion). Stops at the first failure.
    pub fn build(kind: Kind, horizon: usize, prob: &ProblemData, m: &SymMat, tol: &Tolerances) -> Result<SemigroupTable> {
        let mut elements = Vec::with_capacity(horizon);
        if horizon > 0 {
            if kind == Kind::Q {
                let seq = q_sequence(prob, m, horizon, tol)?;
                elements.extend(seq.into_iter().enumerate().skip(1).map(|(k, hessian)| SemigroupElement {
                    kind,
                    k,
                    hessian,
                }));
            } else {
                let first = initial_element(kind, prob, m, tol)?;
                elements.push(first.clone());
                for _ in 1..horizon {
                    let next = elements.last().unwrap().compose(&first, tol)?;
                    elements.push(next);
                }
            }
        }
        Ok(SemigroupTable { kind, elements })
    }

    pub fn horizon(&self) -> usize {
        self.elements.len()
    }

    pub fn get(&self, k: usize) -> Option<&SemigroupElement> {
        k.checked_sub(1).and_then(|i| self.elements.get(i))
    }

    pub fn iter(&self) -> impl Iterator<Item = &SemigroupElement> {
        self.elements.iter()
    }
}

fn schur_map(h: &BlockSymMat, omega: &SymMat, tol: &Tolerances) -> Result<SymMat> {
    if omega.dim() != h.block_dim() {
        return Err(DreError::DimensionMismatch("initial condition does not match kernel blocks".into()));
    }
    let pivot = omega.add(&h.b22);
    if !is_negative_definite(&pivot, tol) {
        return Err(DreError::ExistenceViolated {
            max_eig: pivot.max_eigenvalue(),
        });
    }
    let inv = invert(&pivot, "representation pivot").map_err(|_| DreError::ExistenceViolated {
        max_eig: pivot.max_eigenvalue(),
    })?;
    Ok(h.b11.sub(&congruence(&inv.value, &h.b12.transpose())))
}

/// `Ψᵖ(P₀) = Λ¹¹ − Λ¹²(P₀ + Λ²²)⁻¹Λ²¹`, equal to `R_k(P₀)` for `Λ = Λ_k`.
pub fn psi_p(lambda: &BlockSymMat, p0: &SymMat, tol: &Tolerances) -> Result<SymMat> {
    schur_map(lambda, p0, tol)
}

/// `Ψᵈ(O₀) = Θ¹¹ − Θ¹²(O₀ + Θ²²)⁻¹Θ²¹` on dual Hessians.
pub fn psi_d(theta: &BlockSymMat, o0: &SymMat, tol: &Tolerances) -> Result<SymMat> {
    schur_map(theta, o0, tol)
}

/// `Υ⁻¹(Ψᵈ(Υ(P₀)))`.
pub fn dual_pipeline(theta: &BlockSymMat, p0: &SymMat, m: &SymMat, tol: &Tolerances) -> Result<SymMat> {
    let o0 = upsilon(p0, m, tol)?;
    let ok = psi_d(theta, &o0, tol)?;
    upsilon_inv(&ok, m, tol)
}

fn stage(e: DreError, name: &str) -> DreError {
    match e {
        DreError::DomainViolation { stage, margin } => DreError::DomainViolation {
            stage: format!("{name}: {stage}"),
            margin,
        },
        e => e,
    }
}

/// `Γ`, defined when `M + Ω¹¹ < 0`.
pub fn gamma_transform(om: &BlockSymMat, m: &SymMat, tol: &Tolerances) -> Result<BlockSymMat> {
    check_blocks(om, m)?;
    let d = m.add(&om.b11);
    if !is_negative_definite(&d, tol) {
        return Err(DreError::DomainViolation {
            stage: "gamma: M + Omega^11".into(),
            margin: d.max_eigenvalue(),
        });
    }
    let inv = invert(&d, "gamma")?.value;
    let (mm, im) = (m.as_matrix(), inv.as_matrix());
    Ok(BlockSymMat {
        b11: m.sub(&sym(mm * im * mm)),
        b12: mm * im * &om.b12,
        b22: om.b22.sub(&congruence(&inv, &om.b12)),
    })
}

/// `Γ⁻¹`, defined when `M − Ω¹¹ < 0`.
pub fn gamma_inv(om: &BlockSymMat, m: &SymMat, tol: &Tolerances) -> Result<BlockSymMat> {
    check_blocks(om, m)?;
    let d = m.sub(&om.b11);
    if !is_negative_definite(&d, tol) {
        return Err(DreError::DomainViolation {
            stage: "gamma_inv: M - Omega^11".into(),
            margin: d.max_eigenvalue(),
        });
    }
    let inv = invert(&d, "gamma_inv")?.value;
    let (mm, im) = (m.as_matrix(), inv.as_matrix());
    Ok(BlockSymMat {
        b11: sym(mm * im * mm).sub(m),
        b12: mm * im * &om.b12,
        b22: congruence(&inv, &om.b12).add(&om.b22),
    })
}

/// Exchanges the roles of the two block variables.
pub fn delta_swap(om: &BlockSymMat) -> BlockSymMat {
    BlockSymMat {
        b11: om.b22.clone(),
        b12: om.b12.transpose(),
        b22: om.b11.clone(),
    }
}

/// `Π = ΔΓΔ`.
pub fn pi_transform(om: &BlockSymMat, m: &SymMat, tol: &Tolerances) -> Result<BlockSymMat> {
    let g = gamma_transform(&delta_swap(om), m, tol).map_err(|e| stage(e, "pi"))?;
    Ok(delta_swap(&g))
}

/// `Π⁻¹ = ΔΓ⁻¹Δ`.
pub fn pi_inv(om: &BlockSymMat, m: &SymMat, tol: &Tolerances) -> Result<BlockSymMat> {
    let g = gamma_inv(&delta_swap(om), m, tol).map_err(|e| stage(e, "pi_inv"))?;
    Ok(delta_swap(&g))
}

/// `Ξ = Π⁻¹Γ`.
pub fn xi_transform(om: &BlockSymMat, m: &SymMat, tol: &Tolerances) -> Result<BlockSymMat> {
    let g = gamma_transform(om, m, tol).map_err(|e| stage(e, "xi"))?;
    pi_inv(&g, m, tol).map_err(|e| stage(e, "xi"))
}

/// `Ξ⁻¹ = Γ⁻¹Π`.
pub fn xi_inv(om: &BlockSymMat, m: &SymMat, tol: &Tolerances) -> Result<BlockSymMat> {
    let p = pi_transform(om, m, tol).map_err(|e| stage(e, "xi_inv"))?;
    gamma_inv(&p, m, tol).map_err(|e| stage(e, "xi_inv"))
}

fn check_blocks(om: &BlockSymMat, m: &SymMat) -> Result<()> {
    if om.block_dim() != m.dim() {
        return Err(DreError::DimensionMismatch(format!(
            "blocks are {0}x{0} but M is {1}x{1}",
            om.block_dim(),
            m.dim()
        )));
    }
    Ok(())
}

/// `½[x; y]ᵀH[x; y]`. For `Λ_k` this is the max-plus Green's function value
/// `(S_k δ_y)(x)`.
pub fn eval_kernel(elem: &SemigroupElement, x: &[f64], y: &[f64]) -> Result<f64> {
    let n = elem.hessian.block_dim();
    if x.len() != n || y.len() != n {
        return Err(DreError::DimensionMismatch(format!("kernel arguments must have length {n}")));
    }
    Ok(elem.hessian.half_quadratic_form(x, y))
}

/// Grid evaluation of `sup_ρ {K_left(x, ρ) + K_right(ρ, y)}`.
pub fn kernel_convolution_bruteforce(
    left: &BlockSymMat,
    right: &BlockSymMat,
    x: &[f64],
    y: &[f64],
    search: &GridSpec,
    tol: &Tolerances,
) -> Result<GridEstimate> {
    let n = left.block_dim();
    if right.block_dim() != n || x.len() != n || y.len() != n {
        return Err(DreError::DimensionMismatch("kernel convolution operands".into()));
    }
    let pivot = PivotMatrix::of(left, right);
    if !is_negative_definite(&pivot.value, tol) {
        return Err(DreError::PivotIndefinite {
            left_k: 0,
            right_k: 0,
            max_eig: pivot.max_eigenvalue,
        });
    }
    let best = maximize(n, search, |rho| {
        left.half_quadratic_form(x, rho) + right.half_quadratic_form(rho, y)
    })?;
    let gap = best.quadratic_gap_bound(-pivot.value.min_eigenvalue());
    Ok(GridEstimate::with_roundoff(best.value, gap, best.value.abs()))
}

/// Stationary point `ρ* = −pivot⁻¹(left.b21·x + right.b12·y)` of the kernel
/// convolution.
pub fn convolution_maximizer(left: &BlockSymMat, right: &BlockSymMat, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    let pivot = PivotMatrix::of(left, right);
    let inv = invert(&pivot.value, "convolution pivot")?.value;
    let xv = DMatrix::from_column_slice(x.len(), 1, x);
    let yv = DMatrix::from_column_slice(y.len(), 1, y);
    let rhs = left.b21() * xv + &right.b12 * yv;
    let rho = -(inv.as_matrix() * rhs);
    Ok(rho.iter().copied().collect())
}

/// Smallest eigenvalue of `Q₁²² − M` and whether it clears the definiteness margin.
pub fn q_lower_margin(q1: &BlockSymMat, m: &SymMat, tol: &Tolerances) -> (f64, bool) {
    let d = q1.b22.sub(m);
    (d.min_eigenvalue(), is_positive_definite(&d, tol))
}
