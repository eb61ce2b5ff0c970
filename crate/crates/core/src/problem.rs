//! Problem instances and feasibility of the duality basis `M`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{DreError, Result};
use crate::linalg::{congruence, invert, is_positive_definite, matrix_from_rows, SymMat, Tolerances};
use crate::riccati::{riccati_pivot, riccati_step};

pub const DEFAULT_HORIZON: usize = 64;

/// System `x_{i+1} = A x_i + B w_i` with running payoff `½xᵀΦx − ½γ²|w|²`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemData {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub phi: SymMat,
    pub gamma: f64,
}

impl ProblemData {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, phi: SymMat, gamma: f64) -> Result<ProblemData> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(DreError::InvalidProblem(format!(
                "A must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if b.nrows() != n || b.ncols() == 0 || b.ncols() > n {
            return Err(DreError::InvalidProblem(format!(
                "B must be {n}xm with 1 <= m <= {n}, got {}x{}",
                b.nrows(),
                b.ncols()
            )));
        }
        if phi.dim() != n {
            return Err(DreError::InvalidProblem(format!("Phi must be {n}x{n}")));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(DreError::InvalidProblem("non-finite entry in A or B".into()));
        }
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(DreError::InvalidProblem(format!(
                "gamma must be positive, got {gamma}"
            )));
        }
        if !is_positive_definite(&phi, &Tolerances::default()) {
            return Err(DreError::InvalidProblem(format!(
                "Phi must be positive definite (smallest eigenvalue {})",
                phi.min_eigenvalue()
            )));
        }
        Ok(ProblemData { a, b, phi, gamma })
    }

    /// Scalar instance `x⁺ = a x + b w`.
    pub fn scalar(a: f64, b: f64, phi: f64, gamma: f64) -> Result<ProblemData> {
        ProblemData::new(
            DMatrix::from_element(1, 1, a),
            DMatrix::from_element(1, 1, b),
            SymMat::scalar(phi),
            gamma,
        )
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn check_dim(&self, s: &SymMat, what: &str) -> Result<()> {
        if s.dim() != self.state_dim() {
            return Err(DreError::DimensionMismatch(format!(
                "{what} is {0}x{0}, expected {1}x{1}",
                s.dim(),
                self.state_dim()
            )));
        }
        Ok(())
    }
}

/// The duality basis Hessian `M` and the horizon over which it was checked.
#[derive(Debug, Clone, PartialEq)]
pub struct DualityConfig {
    pub m: SymMat,
    pub horizon: usize,
}

impl DualityConfig {
    pub fn check(&self, prob: &ProblemData, tol: &Tolerances) -> Result<AssumptionReport> {
        check_assumption(prob, &self.m, self.horizon, tol)
    }
}

/// Per-inequality margins of the feasibility conditions on `M`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    /// Smallest eigenvalue of `γ²I − BᵀR_k(M)B` for each checked `k`.
    pub ineq_m2_margins: Vec<f64>,
    /// Smallest eigenvalue of `R(M) − M`; absent when `R(M)` does not exist.
    pub ineq_m_margin: Option<f64>,
    /// Smallest eigenvalue of `MB(γ²I − BᵀMB)⁻¹BᵀM`.
    pub ineq_m3_margin: Option<f64>,
    pub feasible: bool,
    /// `R_k(M)` reached a numerical fixed point before the horizon, so the
    /// remaining pivot checks were extrapolated.
    pub extrapolated: bool,
    pub horizon: usize,
    pub violation: Option<String>,
}

pub fn check_assumption(
    prob: &ProblemData,
    m: &SymMat,
    horizon: usize,
    tol: &Tolerances,
) -> Result<AssumptionReport> {
    prob.check_dim(m, "M")?;
    if horizon == 0 {
        return Err(DreError::InvalidProblem("horizon must be at least 1".into()));
    }
    let mut report = AssumptionReport {
        ineq_m2_margins: Vec::with_capacity(horizon),
        ineq_m_margin: None,
        ineq_m3_margin: None,
        feasible: false,
        extrapolated: false,
        horizon,
        violation: None,
    };

    let pivot0 = riccati_pivot(m, prob);
    let mut ok = true;

    match riccati_step(m, prob, tol) {
        Ok(rm) => {
            let diff = rm.sub(m);
            report.ineq_m_margin = Some(diff.min_eigenvalue());
            if !is_positive_definite(&diff, tol) {
                ok = false;
                report.violation = Some("R(M) - M is not positive definite".into());
            }
        }
        Err(_) => {
            ok = false;
            report.violation = Some("R(M) does not exist".into());
        }
    }

    match invert(&pivot0, "gamma^2 I - B^T M B") {
        Ok(inv) => {
            let mb = m.as_matrix() * &prob.b;
            let term = congruence(&inv.value, &mb.transpose());
            report.ineq_m3_margin = Some(term.min_eigenvalue());
            if !is_positive_definite(&term, tol) && ok {
                ok = false;
                report.violation = Some("M B (gamma^2 I - B^T M B)^-1 B^T M is not positive definite".into());
            }
        }
        Err(_) => {
            if ok {
                ok = false;
                report.violation = Some("gamma^2 I - B^T M B is singular".into());
            }
        }
    }

    let mut p = m.clone();
    for k in 0..horizon {
        let pivot = riccati_pivot(&p, prob);
        report.ineq_m2_margins.push(pivot.min_eigenvalue());
        if !is_positive_definite(&pivot, tol) {
            if ok {
                report.violation = Some(format!(
                    "gamma^2 I - B^T R_{k}(M) B is not positive definite"
                ));
            }
            ok = false;
            break;
        }
        if k + 1 == horizon {
            break;
        }
        let next = riccati_step(&p, prob, tol)?;
        let step = next.sub(&p).norm();
        p = next;
        if step < tol.match_rtol * (1.0 + p.norm()) {
            let pivot = riccati_pivot(&p, prob);
            report.ineq_m2_margins.push(pivot.min_eigenvalue());
            if is_positive_definite(&pivot, tol) {
                report.extrapolated = k + 2 < horizon;
            } else {
                if ok {
                    report.violation = Some(format!(
                        "gamma^2 I - B^T R_{}(M) B is not positive definite",
                        k + 1
                    ));
                }
                ok = false;
            }
            break;
        }
    }

    report.feasible = ok;
    Ok(report)
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct ProblemDocument {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    #[serde(rename = "Phi")]
    phi: Vec<Vec<f64>>,
    gamma: f64,
    #[serde(rename = "M")]
    m: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    horizon: Option<usize>,
}

/// Parses a problem document. Matrices are row-major arrays of rows; `Phi`
/// and `M` are symmetrized.
pub fn load_problem(document: &str) -> Result<(ProblemData, DualityConfig)> {
    let doc: ProblemDocument =
        serde_json::from_str(document).map_err(|e| DreError::Parse(e.to_string()))?;
    let parse = |rows: &[Vec<f64>], name: &str| {
        matrix_from_rows(rows).map_err(|e| DreError::Parse(format!("{name}: {e}")))
    };
    let a = parse(&doc.a, "A")?;
    let b = parse(&doc.b, "B")?;
    let phi = SymMat::symmetrize(&parse(&doc.phi, "Phi")?)
        .map_err(|e| DreError::Parse(format!("Phi: {e}")))?;
    let m = SymMat::symmetrize(&parse(&doc.m, "M")?).map_err(|e| DreError::Parse(format!("M: {e}")))?;
    let prob = ProblemData::new(a, b, phi, doc.gamma)?;
    prob.check_dim(&m, "M")
        .map_err(|e| DreError::InvalidProblem(e.to_string()))?;
    let horizon = doc.horizon.unwrap_or(DEFAULT_HORIZON);
    if horizon == 0 {
        return Err(DreError::InvalidProblem("horizon must be at least 1".into()));
    }
    Ok((prob, DualityConfig { m, horizon }))
}

/// Serializes an instance back into the document format.
pub fn problem_document(prob: &ProblemData, cfg: &DualityConfig) -> String {
    let doc = ProblemDocument {
        a: crate::linalg::matrix_to_rows(&prob.a),
        b: crate::linalg::matrix_to_rows(&prob.b),
        phi: prob.phi.to_rows(),
        gamma: prob.gamma,
        m: cfg.m.to_rows(),
        horizon: Some(cfg.horizon),
    };
    serde_json::to_string(&doc).expect("problem document serializes")
}
