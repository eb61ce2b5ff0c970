//! Max-plus duality between the primal quadratic space `{½xᵀΩx : Ω > M}` and
//! the dual space `{½zᵀΥ(Ω)z : Ω > M}` induced by the basis
//! `ψ(x, z) = ½(x − z)ᵀM(x − z)`.

use crate::error::{DreError, Result};
use crate::grid::{maximize, GridSpec};
use crate::linalg::{invert, is_positive_definite, sym, SymMat, Tolerances};
use crate::riccati::{GridEstimate, QuadFunction};

/// `ψ(x, z) = ½(x − z)ᵀM(x − z)`.
pub fn basis(m: &SymMat, x: &[f64], z: &[f64]) -> f64 {
    let d: Vec<f64> = x.iter().zip(z).map(|(a, b)| a - b).collect();
    m.half_quadratic_form(&d)
}

fn check_same_dim(a: &SymMat, m: &SymMat) -> Result<()> {
    if a.dim() != m.dim() {
        return Err(DreError::DimensionMismatch(format!(
            "operand is {0}x{0} but M is {1}x{1}",
            a.dim(),
            m.dim()
        )));
    }
    Ok(())
}

/// `Υ(Ω) = M(M − Ω)⁻¹M − M`, defined for `Ω > M`.
pub fn upsilon(omega: &SymMat, m: &SymMat, tol: &Tolerances) -> Result<SymMat> {
    check_same_dim(omega, m)?;
    let gap = omega.sub(m);
    if !is_positive_definite(&gap, tol) {
        return Err(DreError::DomainViolation {
            stage: "upsilon: Omega - M".into(),
            margin: gap.min_eigenvalue(),
        });
    }
    let inv = invert(&gap.neg(), "upsilon")?;
    let mm = m.as_matrix();
    Ok(sym(mm * inv.value.as_matrix() * mm).sub(m))
}

/// `Υ⁻¹(Ω) = −M(M + Ω)⁻¹M + M`, defined for `Ω < −M`.
pub fn upsilon_inv(omega: &SymMat, m: &SymMat, tol: &Tolerances) -> Result<SymMat> {
    check_same_dim(omega, m)?;
    let gap = m.add(omega).neg();
    if !is_positive_definite(&gap, tol) {
        return Err(DreError::DomainViolation {
            stage: "upsilon_inv: -M - Omega".into(),
            margin: gap.min_eigenvalue(),
        });
    }
    let inv = invert(&gap, "upsilon_inv")?;
    let mm = m.as_matrix();
    // −M(M+Ω)⁻¹M = M(−M−Ω)⁻¹M
    Ok(sym(mm * inv.value.as_matrix() * mm).add(m))
}

/// Dual-space quadratic `z ↦ ½zᵀOz` with `O ≤ −M`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualQuad {
    pub hessian_dual: SymMat,
}

impl DualQuad {
    pub fn new(hessian_dual: SymMat, m: &SymMat, tol: &Tolerances) -> Result<DualQuad> {
        check_same_dim(&hessian_dual, m)?;
        let slack = m.add(&hessian_dual).neg();
        let min = slack.min_eigenvalue();
        if min < -tol.margin_for(&slack) {
            return Err(DreError::DomainViolation {
                stage: "dual quadratic: -M - O".into(),
                margin: min,
            });
        }
        Ok(DualQuad { hessian_dual })
    }

    /// Dual of a primal quadratic, `Υ(Ω)`.
    pub fn from_primal(phi: &QuadFunction, m: &SymMat, tol: &Tolerances) -> Result<DualQuad> {
        Ok(DualQuad {
            hessian_dual: upsilon(&phi.hessian, m, tol)?,
        })
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        self.hessian_dual.half_quadratic_form(z)
    }
}

/// Grid evaluation of `(D_ψφ)(z) = −sup_x {ψ(x, z) − φ(x)}`.
///
/// The grid supremum underestimates, so the returned value lies in
/// `[exact, exact + bound]`.
pub fn dual_transform_bruteforce(
    phi: &QuadFunction,
    m: &SymMat,
    z: &[f64],
    search: &GridSpec,
    tol: &Tolerances,
) -> Result<GridEstimate> {
    check_same_dim(&phi.hessian, m)?;
    let curvature = phi.hessian.sub(m);
    if !is_positive_definite(&curvature, tol) {
        return Err(DreError::DomainViolation {
            stage: "dual transform: Omega - M".into(),
            margin: curvature.min_eigenvalue(),
        });
    }
    let best = maximize(m.dim(), search, |x| basis(m, x, z) - phi.eval(x))?;
    let gap = best.quadratic_gap_bound(curvature.max_eigenvalue());
    Ok(GridEstimate::with_roundoff(-best.value, gap, best.value.abs()))
}

/// Grid evaluation of `(D_ψ⁻¹φ̂)(x) = sup_z {ψ(x, z) + φ̂(z)}`.
pub fn inverse_dual_transform_bruteforce(
    phat: &DualQuad,
    m: &SymMat,
    x: &[f64],
    search: &GridSpec,
    tol: &Tolerances,
) -> Result<GridEstimate> {
    check_same_dim(&phat.hessian_dual, m)?;
    let curvature = m.add(&phat.hessian_dual).neg();
    if !is_positive_definite(&curvature, tol) {
        return Err(DreError::DomainViolation {
            stage: "inverse dual transform: -M - O".into(),
            margin: curvature.min_eigenvalue(),
        });
    }
    inverse_dual_of(|z| Ok(phat.eval(z)), m, x, search, curvature.max_eigenvalue())
}

/// `sup_z {ψ(x, z) + f(z)}` for an arbitrary dual function `f`, e.g. one that is
/// itself a grid estimate. `curvature` bounds the negated Hessian of the
/// objective in `z` for the gap estimate.
pub fn inverse_dual_of<F>(
    mut f: F,
    m: &SymMat,
    x: &[f64],
    search: &GridSpec,
    curvature: f64,
) -> Result<GridEstimate>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let mut failure = None;
    let best = maximize(m.dim(), search, |z| match f(z) {
        Ok(v) => basis(m, x, z) + v,
        Err(e) => {
            failure.get_or_insert(e);
            f64::NEG_INFINITY
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let gap = best.quadratic_gap_bound(curvature);
    Ok(GridEstimate::with_roundoff(best.value, gap, best.value.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn s(v: f64) -> SymMat {
        SymMat::scalar(v)
    }

    #[test]
    fn upsilon_examples() {
        let m = SymMat::from_rows(&[vec![-2.0, 0.3], vec![0.3, -1.0]]).unwrap();
        let u = upsilon(&SymMat::zeros(2), &m, &tol()).unwrap();
        assert!(u.norm() < 1e-14);

        // (-1)(-2)^-1(-1) + 1
        let u = upsilon(&s(1.0), &s(-1.0), &tol()).unwrap();
        assert!((u.to_rows()[0][0] - 0.5).abs() < 1e-15);

        // M(M-Ω)^-1 M - M with Ω = M + ε: M²/(-ε) - M
        let eps = 1e-6;
        let u = upsilon(&s(-1.0 + eps), &s(-1.0), &tol()).unwrap();
        assert!((u.to_rows()[0][0] / (-1.0 / eps + 1.0) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn upsilon_domain() {
        assert!(matches!(
            upsilon(&s(-1.0), &s(-1.0), &tol()),
            Err(DreError::DomainViolation { .. })
        ));
        assert!(matches!(
            upsilon_inv(&s(1.0), &s(-1.0), &tol()),
            Err(DreError::DomainViolation { .. })
        ));
    }

    #[test]
    fn upsilon_inv_examples() {
        assert!(upsilon_inv(&s(0.0), &s(-3.0), &tol()).unwrap().norm() < 1e-15);
        let p = upsilon_inv(&s(0.5), &s(-1.0), &tol()).unwrap();
        assert!((p.to_rows()[0][0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dual_quad_membership() {
        assert!(DualQuad::new(s(0.5), &s(-1.0), &tol()).is_ok());
        assert!(DualQuad::new(s(1.5), &s(-1.0), &tol()).is_err());
    }

    #[test]
    fn bruteforce_examples() {
        let spec = GridSpec::with_half_width(3.0);
        let m = s(-1.0);
        let zero = QuadFunction::new(s(0.0));
        let est = dual_transform_bruteforce(&zero, &m, &[0.0], &spec, &tol()).unwrap();
        assert_eq!(est.value, 0.0);
        let est = dual_transform_bruteforce(&zero, &m, &[0.7], &spec, &tol()).unwrap();
        assert!(est.value.abs() <= est.bound);

        let one = QuadFunction::new(s(1.0));
        let est = dual_transform_bruteforce(&one, &m, &[1.0], &spec, &tol()).unwrap();
        assert!((est.value - 0.25).abs() <= est.bound, "{est:?}");

        let phat = DualQuad::new(s(0.5), &m, &tol()).unwrap();
        let est = inverse_dual_transform_bruteforce(&phat, &m, &[1.0], &spec, &tol()).unwrap();
        assert!((est.value - 0.5).abs() <= est.bound, "{est:?}");

        let phat = DualQuad::new(s(0.0), &m, &tol()).unwrap();
        let est = inverse_dual_transform_bruteforce(&phat, &m, &[0.0], &spec, &tol()).unwrap();
        assert_eq!(est.value, 0.0);
    }

    #[test]
    fn bruteforce_needs_finite_sup() {
        let spec = GridSpec::with_half_width(3.0);
        let phi = QuadFunction::new(s(-2.0));
        assert!(matches!(
            dual_transform_bruteforce(&phi, &s(-1.0), &[1.0], &spec, &tol()),
            Err(DreError::DomainViolation { .. })
        ));
    }

    #[test]
    fn sampled_round_trip() {
        // D_ψ⁻¹ applied to grid values of D_ψφ recovers φ.
        let m = s(-1.0);
        let phi = QuadFunction::new(s(0.6));
        let inner = GridSpec::with_half_width(4.0);
        let outer = GridSpec::with_half_width(4.0);
        let mut inner_bound = 0.0_f64;
        // curvature in z of ψ(x,z) + φ̂(z) is -(M + Υ(Ω)); bound it by the
        // largest value any dual Hessian in range can produce, |M|.
        let curvature = 1.0;
        for &x in &[-0.9, -0.3, 0.0, 0.45, 1.0] {
            let est = inverse_dual_of(
                |z| {
                    let d = dual_transform_bruteforce(&phi, &m, z, &inner, &tol())?;
                    inner_bound = inner_bound.max(d.bound);
                    Ok(d.value)
                },
                &m,
                &[x],
                &outer,
                curvature,
            )
            .unwrap();
            let exact = phi.eval(&[x]);
            assert!((est.value - exact).abs() <= est.bound + inner_bound, "x={x}: {est:?}");
        }
    }
}
