//! The Riccati operator, its iteration, and the one-step dynamic programming
//! operator on quadratics, with brute-force oracles.

use nalgebra::{DMatrix, DVector};

use crate::error::{DreError, Result};
use crate::grid::{maximize, GridSpec};
use crate::linalg::{congruence, invert, is_positive_definite, SymMat, Tolerances};
use crate::problem::ProblemData;

/// `γ²I − BᵀPB`.
pub fn riccati_pivot(p: &SymMat, prob: &ProblemData) -> SymMat {
    let m = prob.input_dim();
    let g2 = SymMat::identity(m).scale(prob.gamma * prob.gamma);
    g2.sub(&congruence(p, &prob.b))
}

/// `R(P) = Φ + AᵀPA + AᵀPB(γ²I − BᵀPB)⁻¹BᵀPA`.
pub fn riccati_step(p: &SymMat, prob: &ProblemData, tol: &Tolerances) -> Result<SymMat> {
    prob.check_dim(p, "P")?;
    let pivot = riccati_pivot(p, prob);
    if !is_positive_definite(&pivot, tol) {
        return Err(DreError::PivotLost {
            margin: pivot.min_eigenvalue(),
        });
    }
    let inv = invert(&pivot, "Riccati pivot")?;
    let bpa = prob.b.transpose() * p.as_matrix() * &prob.a;
    let correction = congruence(&inv.value, &bpa);
    Ok(prob.phi.add(&congruence(p, &prob.a)).add(&correction))
}

/// `P_0, R(P_0), …` up to `R_k(P_0)` or the first lost pivot.
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiPath {
    pub steps: Vec<SymMat>,
    /// Smallest eigenvalue of `γ²I − BᵀP_iB` for every `P_i` that was stepped
    /// from, including the failing one.
    pub pivot_margins: Vec<f64>,
    /// Index `i` of the first `P_i` whose pivot was not positive definite.
    pub terminated_at: Option<usize>,
}

impl RiccatiPath {
    pub fn last(&self) -> &SymMat {
        self.steps.last().expect("path is never empty")
    }

    /// `R_k(P_0)` when it exists.
    pub fn get(&self, k: usize) -> Option<&SymMat> {
        self.steps.get(k)
    }

    pub fn reached(&self, k: usize) -> bool {
        k < self.steps.len()
    }
}

pub fn riccati_iterate(p0: &SymMat, k: usize, prob: &ProblemData, tol: &Tolerances) -> Result<RiccatiPath> {
    prob.check_dim(p0, "P0")?;
    let mut path = RiccatiPath {
        steps: vec![p0.clone()],
        pivot_margins: Vec::with_capacity(k),
        terminated_at: None,
    };
    for i in 0..k {
        let p = &path.steps[i];
        path.pivot_margins.push(riccati_pivot(p, prob).min_eigenvalue());
        match riccati_step(p, prob, tol) {
            Ok(next) => path.steps.push(next),
            Err(DreError::PivotLost { .. }) | Err(DreError::SingularPivot { .. }) => {
                path.terminated_at = Some(i);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(path)
}

/// `x ↦ ½xᵀΩx`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadFunction {
    pub hessian: SymMat,
}

impl QuadFunction {
    pub fn new(hessian: SymMat) -> QuadFunction {
        QuadFunction { hessian }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.hessian.half_quadratic_form(x)
    }
}

/// Closed form of `sup_w {½xᵀΦx − ½γ²|w|² + φ(Ax + Bw)}` for quadratic `φ`.
pub fn dp_apply_quadratic(phi: &QuadFunction, prob: &ProblemData, tol: &Tolerances) -> Result<QuadFunction> {
    match riccati_step(&phi.hessian, prob, tol) {
        Ok(h) => Ok(QuadFunction::new(h)),
        Err(DreError::PivotLost { margin }) => Err(DreError::ValueExplosion { margin }),
        Err(e) => Err(e),
    }
}

/// Grid estimate of a supremum together with the gap bound certified by the
/// grid resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct GridEstimate {
    pub value: f64,
    pub bound: f64,
}

impl GridEstimate {
    pub(crate) fn with_roundoff(value: f64, gap: f64, scale: f64) -> GridEstimate {
        GridEstimate {
            value,
            bound: gap + 1e-12 * (1.0 + scale),
        }
    }
}

/// Grid maximization of `½xᵀΦx − ½γ²|w|² + φ(Ax + Bw)` over `w`.
pub fn dp_evaluate_bruteforce(
    phi: &QuadFunction,
    x: &[f64],
    prob: &ProblemData,
    search: &GridSpec,
) -> Result<GridEstimate> {
    let n = prob.state_dim();
    let m = prob.input_dim();
    if x.len() != n {
        return Err(DreError::DimensionMismatch(format!("x has length {}, expected {n}", x.len())));
    }
    let ax = &prob.a * DVector::from_column_slice(x);
    let running = prob.phi.half_quadratic_form(x);
    let g2 = prob.gamma * prob.gamma;
    let mut next = vec![0.0; n];
    let objective = |w: &[f64]| {
        for i in 0..n {
            next[i] = ax[i] + (0..m).map(|j| prob.b[(i, j)] * w[j]).sum::<f64>();
        }
        let ww: f64 = w.iter().map(|v| v * v).sum();
        running - 0.5 * g2 * ww + phi.eval(&next)
    };
    let best = maximize(m, search, objective)?;
    // curvature of the objective in w is -(γ²I − BᵀΩB)
    let curvature = riccati_pivot(&phi.hessian, prob).max_eigenvalue();
    let gap = best.quadratic_gap_bound(curvature);
    Ok(GridEstimate::with_roundoff(best.value, gap, best.value.abs()))
}

/// `Σ_{i<k} (½x_iᵀΦx_i − ½γ²|w_i|²) + ½x_kᵀP_0x_k` along `x_{i+1} = Ax_i + Bw_i`.
pub fn payoff_rollout(p0: &SymMat, x0: &[f64], inputs: &[Vec<f64>], prob: &ProblemData) -> Result<f64> {
    let n = prob.state_dim();
    let m = prob.input_dim();
    prob.check_dim(p0, "P0")?;
    if x0.len() != n {
        return Err(DreError::DimensionMismatch(format!("x0 has length {}, expected {n}", x0.len())));
    }
    let g2 = prob.gamma * prob.gamma;
    let mut x = DVector::from_column_slice(x0);
    let mut total = 0.0;
    for w in inputs {
        if w.len() != m {
            return Err(DreError::DimensionMismatch(format!("input has length {}, expected {m}", w.len())));
        }
        let w = DVector::from_column_slice(w);
        total += prob.phi.half_quadratic_form(x.as_slice()) - 0.5 * g2 * w.norm_squared();
        x = &prob.a * &x + &prob.b * &w;
    }
    Ok(total + p0.half_quadratic_form(x.as_slice()))
}

/// Maximizing disturbance sequence `w_i = (γ²I − BᵀP_jB)⁻¹BᵀP_jAx_i`,
/// `j = k−1−i`, for a path that reached step `k`.
pub fn worst_case_inputs(path: &RiccatiPath, k: usize, x0: &[f64], prob: &ProblemData) -> Result<Vec<Vec<f64>>> {
    if !path.reached(k) {
        return Err(DreError::PivotLost {
            margin: path.pivot_margins.last().copied().unwrap_or(f64::NAN),
        });
    }
    let mut x = DVector::from_column_slice(x0);
    let mut inputs = Vec::with_capacity(k);
    for i in 0..k {
        let p = &path.steps[k - 1 - i];
        let inv = invert(&riccati_pivot(p, prob), "feedback pivot")?;
        let gain: DMatrix<f64> = inv.value.as_matrix() * prob.b.transpose() * p.as_matrix() * &prob.a;
        let w = &gain * &x;
        x = &prob.a * &x + &prob.b * &w;
        inputs.push(w.as_slice().to_vec());
    }
    Ok(inputs)
}
