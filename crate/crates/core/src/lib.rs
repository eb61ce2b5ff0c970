//! Max-plus fundamental solution semigroups for indefinite difference Riccati
//! equations
//!
//! ```text
//! P_{k+1} = R(P_k),  R(P) = Φ + AᵀPA + AᵀPB(γ²I − BᵀPB)⁻¹BᵀPA.
//! ```
//!
//! Given a duality basis Hessian `M` that passes [`problem::check_assumption`],
//! the primal semigroup `Λ_k` and the dual semigroup `Θ_k` are computed once
//! and then map any admissible initial condition `P₀` to `R_k(P₀)` with a
//! single Schur complement ([`semigroup::psi_p`], [`semigroup::dual_pipeline`]).
//! Every closed form is paired with a brute-force oracle in the same module.

pub mod cli;
pub mod duality;
pub mod error;
pub mod grid;
pub mod instances;
pub mod io;
pub mod limit;
pub mod linalg;
pub mod problem;
pub mod riccati;
pub mod semigroup;

pub use error::{DreError, Result};
pub use linalg::{BlockSymMat, SymMat, Tolerances};
pub use problem::{check_assumption, load_problem, AssumptionReport, DualityConfig, ProblemData};
pub use semigroup::{Kind, SemigroupElement, Strategy};
