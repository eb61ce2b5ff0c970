//! Random problem instances for property checks and the verification suite.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

use crate::linalg::{sym, SymMat, Tolerances};
use crate::problem::{check_assumption, AssumptionReport, ProblemData};

/// A problem together with a basis `M = −s·I` that passed the assumption
/// check at `horizon`.
#[derive(Debug, Clone)]
pub struct FeasibleInstance {
    pub prob: ProblemData,
    pub m: SymMat,
    pub report: AssumptionReport,
}

const BASIS_SCALES: [f64; 6] = [1.0, 2.0, 0.5, 4.0, 0.25, 8.0];
const GAMMAS: [f64; 4] = [1.0, 2.0, 4.0, 8.0];

fn uniform_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    a.complex_eigenvalues().iter().fold(0.0, |r, z| r.max(z.norm()))
}

/// Random orthogonal matrix from the QR factor of a uniform matrix.
pub fn random_orthogonal<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    uniform_matrix(rng, n, n).qr().q()
}

/// Symmetric matrix with eigenvalues drawn uniformly from `[lo, hi]`.
pub fn random_symmetric<R: Rng>(rng: &mut R, n: usize, lo: f64, hi: f64) -> SymMat {
    let q = random_orthogonal(rng, n);
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |_, _| rng.gen_range(lo..=hi)));
    sym(&q * d * q.transpose())
}

/// Principal square root of a positive semidefinite matrix.
pub fn sqrt_psd(s: &SymMat) -> SymMat {
    let eig = SymmetricEigen::new(s.as_matrix().clone());
    let d = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    sym(&eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose())
}

/// Draws `A` with spectral radius at most `max_radius`, a full-rank `B`, and
/// `Φ > 0`, then searches a fixed ladder of `γ` and `M = −s·I` for a feasible
/// pair. Returns `None` if no rung passes.
pub fn random_feasible<R: Rng>(
    rng: &mut R,
    n: usize,
    m: usize,
    max_radius: f64,
    horizon: usize,
    tol: &Tolerances,
) -> Option<FeasibleInstance> {
    let mut a = uniform_matrix(rng, n, n);
    let rho = spectral_radius(&a);
    if rho > 0.0 {
        a *= rng.gen_range(0.3..=max_radius) / rho;
    }
    let b = uniform_matrix(rng, n, m);
    if b.clone().svd(false, false).singular_values.min() < 0.2 {
        return None;
    }
    let phi = random_symmetric(rng, n, 0.1, 1.0);
    for &gamma in &GAMMAS {
        let prob = ProblemData::new(a.clone(), b.clone(), phi.clone(), gamma).ok()?;
        for &s in &BASIS_SCALES {
            let basis = SymMat::identity(n).scale(-s);
            let report = check_assumption(&prob, &basis, horizon, tol).ok()?;
            if report.feasible {
                return Some(FeasibleInstance { prob, m: basis, report });
            }
        }
    }
    None
}

/// Retries [`random_feasible`] until it succeeds or `attempts` run out.
pub fn random_feasible_retry<R: Rng>(
    rng: &mut R,
    n: usize,
    m: usize,
    max_radius: f64,
    horizon: usize,
    tol: &Tolerances,
    attempts: usize,
) -> Option<FeasibleInstance> {
    (0..attempts).find_map(|_| random_feasible(rng, n, m, max_radius, horizon, tol))
}

/// `P₀ = L + G^{½} U G^{½}` with `G = U_bound − L` and `U` having eigenvalues
/// in `[lo, hi] ⊂ (0, 1)`, so that `L < P₀ < U_bound`.
pub fn random_between<R: Rng>(rng: &mut R, lower: &SymMat, upper: &SymMat, lo: f64, hi: f64) -> SymMat {
    let g = sqrt_psd(&upper.sub(lower));
    let u = random_symmetric(rng, lower.dim(), lo, hi);
    lower.add(&sym(g.as_matrix() * u.as_matrix() * g.as_matrix()))
}
