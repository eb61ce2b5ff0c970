//! Distance between the primal and dual semigroups as `M = −m·I` grows.
//!
//! As `m → ∞` the basis `ψ` approaches the max-plus Dirac delta, both duality
//! transforms approach the identity, and `Λ_k` and `Θ_k` coincide.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{DreError, Result};
use crate::linalg::{SymMat, Tolerances};
use crate::problem::{check_assumption, ProblemData};
use crate::semigroup::{semigroup_element, Kind, Strategy};

pub const DEFAULT_SCALES: [f64; 5] = [1.0, 3.16, 10.0, 31.6, 100.0];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitPoint {
    pub m: f64,
    /// `‖Λ_k − Θ_k‖_F / (1 + ‖Θ_k‖_F)`.
    pub distance: Option<f64>,
    pub feasible: bool,
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitSweep {
    pub k: usize,
    pub points: Vec<LimitPoint>,
}

impl LimitSweep {
    pub fn feasible_points(&self) -> impl Iterator<Item = &LimitPoint> {
        self.points.iter().filter(|p| p.feasible)
    }

    /// `d(last) < d(first)` over the feasible scales; `None` with fewer than
    /// two feasible scales.
    pub fn trend_decreasing(&self) -> Option<bool> {
        let pts: Vec<f64> = self.feasible_points().filter_map(|p| p.distance).collect();
        match pts.len() {
            0 => None,
            1 => Some(true),
            _ => Some(pts[pts.len() - 1] < pts[0]),
        }
    }

    /// Rows `m,d(m),feasible` with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,d,feasible\n");
        for p in &self.points {
            let d = p.distance.map(crate::io::fmt_f64).unwrap_or_default();
            out.push_str(&format!("{},{},{}\n", crate::io::fmt_f64(p.m), d, p.feasible));
        }
        out
    }
}

fn distance_at(prob: &ProblemData, k: usize, scale: f64, tol: &Tolerances) -> LimitPoint {
    let n = prob.state_dim();
    let m = SymMat::identity(n).scale(-scale);
    let skipped = |reason: String| LimitPoint {
        m: scale,
        distance: None,
        feasible: false,
        reason: Some(reason),
    };
    match check_assumption(prob, &m, k, tol) {
        Ok(r) if r.feasible => {}
        Ok(r) => return skipped(r.violation.unwrap_or_else(|| "infeasible".into())),
        Err(e) => return skipped(e.to_string()),
    }
    let build = |kind| semigroup_element(kind, k, prob, &m, Strategy::Doubling, tol);
    match (build(Kind::Lambda), build(Kind::Theta)) {
        (Ok(lam), Ok(theta)) => {
            let diff = lam.hessian.rel_distance(&theta.hessian);
            LimitPoint {
                m: scale,
                distance: Some(diff),
                feasible: true,
                reason: None,
            }
        }
        (Err(e), _) | (_, Err(e)) => skipped(e.to_string()),
    }
}

pub fn run_limit_sweep(prob: &ProblemData, k: usize, scales: &[f64], tol: &Tolerances) -> Result<LimitSweep> {
    if k == 0 {
        return Err(DreError::InvalidProblem("horizon must be at least 1".into()));
    }
    if scales.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(DreError::InvalidProblem("scales must be positive".into()));
    }
    if scales.windows(2).any(|w| w[1] <= w[0]) {
        return Err(DreError::InvalidProblem("scales must be strictly increasing".into()));
    }
    let points = scales.par_iter().map(|&s| distance_at(prob, k, s, tol)).collect();
    Ok(LimitSweep { k, points })
}
