//! Algebraic Riccati equation, closed-loop generator and the certificates
//! derived from it: observability Gramian, Lyapunov certificate, semigroup
//! decay constants and the convolution-operator norm.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, ComplexSchur};
use crate::linsys::StateSpace;
use crate::ode;
use crate::quadrature;

const CONDITION_LIMIT: f64 = 1e12;
const RESIDUAL_TOL: f64 = 1e-8;

/// Stabilizing solution of `AᵀΠ + ΠA + CᵀC − ΠBR⁻¹BᵀΠ = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiSolution {
    pub system: StateSpace,
    pub r: DMatrix<f64>,
    pub r_inv: DMatrix<f64>,
    pub pi: DMatrix<f64>,
    /// `K = R⁻¹BᵀΠ`.
    pub k: DMatrix<f64>,
    /// `A_m = A − BK`.
    pub a_m: DMatrix<f64>,
    pub residual_norm: f64,
}

impl RiccatiSolution {
    /// The closed-loop input/output map `G_m = (A_m, B, C)`.
    pub fn closed_loop(&self) -> StateSpace {
        StateSpace::new(self.a_m.clone(), self.system.b().clone(), self.system.c().clone())
            .expect("closed loop inherits consistent dimensions")
    }
}

pub fn care_residual(sys: &StateSpace, r_inv: &DMatrix<f64>, pi: &DMatrix<f64>) -> f64 {
    let (a, b, c) = (sys.a(), sys.b(), sys.c());
    (a.transpose() * pi + pi * a + c.transpose() * c - pi * b * r_inv * b.transpose() * pi).norm()
}

pub(crate) fn checked_weight_inverse(r: &DMatrix<f64>, m: usize) -> Result<DMatrix<f64>> {
    if r.shape() != (m, m) {
        return Err(Error::Dimension(format!("R is {:?}, expected {m}x{m}", r.shape())));
    }
    if (r - r.transpose()).norm() > 1e-12 * (1.0 + r.norm()) {
        return Err(Error::Precondition("R must be symmetric".into()));
    }
    let chol = r
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Precondition("R must be positive definite".into()))?;
    Ok(linalg::symmetrize(&chol.inverse()))
}

/// Solves the continuous algebraic Riccati equation with `Q = CᵀC` from the
/// stable invariant subspace of the Hamiltonian
/// `[[A, −BR⁻¹Bᵀ], [−CᵀC, −Aᵀ]]` (ordered complex Schur form).
pub fn solve_care(sys: &StateSpace, r: &DMatrix<f64>) -> Result<RiccatiSolution> {
    let n = sys.n();
    let r_inv = checked_weight_inverse(r, sys.m())?;
    if !sys.is_stabilizable() {
        return Err(Error::Synthesis("(A, B) is not stabilizable".into()));
    }
    if !sys.is_detectable() {
        return Err(Error::Synthesis("(A, C) is not detectable".into()));
    }
    let (a, b, c) = (sys.a(), sys.b(), sys.c());
    let s = b * &r_inv * b.transpose();
    let q = c.transpose() * c;

    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(a);
    h.view_mut((0, n), (n, n)).copy_from(&(-&s));
    h.view_mut((n, 0), (n, n)).copy_from(&(-&q));
    h.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));

    let mut schur = ComplexSchur::new(&linalg::to_complex(&h));
    let stable = schur.reorder(|l: Complex64| l.re < 0.0);
    if stable != n {
        return Err(Error::Synthesis(format!(
            "Hamiltonian has {stable} stable eigenvalues, expected {n} (eigenvalues on the imaginary axis)"
        )));
    }
    let u11: CMatrix = schur.z.view((0, 0), (n, n)).into_owned();
    let u21: CMatrix = schur.z.view((n, 0), (n, n)).into_owned();
    let condition = linalg::complex_condition_number(&u11);
    if !(condition <= CONDITION_LIMIT) {
        return Err(Error::NumericalConditioning {
            what: "stable-subspace basis".into(),
            condition,
        });
    }
    // Π U11 = U21  <=>  U11ᵀ Πᵀ = U21ᵀ
    let pi_t = u11
        .transpose()
        .lu()
        .solve(&u21.transpose())
        .ok_or_else(|| Error::NumericalConditioning {
            what: "stable-subspace basis".into(),
            condition: f64::INFINITY,
        })?;
    let mut pi = linalg::symmetrize(&pi_t.transpose().map(|z| z.re));

    let mut residual = care_residual(sys, &r_inv, &pi);
    // Newton (Kleinman) polish when rounding in the subspace basis leaves
    // the residual above tolerance.
    for _ in 0..3 {
        if residual <= RESIDUAL_TOL * (1.0 + pi.norm()) {
            break;
        }
        let a_m = a - &s * &pi;
        let rhs = &q + &pi * &s * &pi;
        let next = linalg::solve_lyapunov(&a_m, &rhs)?;
        let next_residual = care_residual(sys, &r_inv, &next);
        if next_residual >= residual {
            break;
        }
        pi = next;
        residual = next_residual;
    }

    let k = &r_inv * b.transpose() * &pi;
    let a_m = a - b * &k;
    linalg::ensure_hurwitz(&a_m).map_err(|_| Error::Synthesis("closed-loop generator is not Hurwitz".into()))?;
    Ok(RiccatiSolution {
        system: sys.clone(),
        r: r.clone(),
        r_inv,
        pi,
        k,
        a_m,
        residual_norm: residual,
    })
}

pub fn closed_loop_generator(sol: &RiccatiSolution) -> DMatrix<f64> {
    sol.a_m.clone()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GramianResult {
    pub w: DMatrix<f64>,
    pub residual_norm: f64,
}

/// `A_mᵀW + WA_m + CᵀC = 0`.
pub fn observability_gramian(a_m: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<GramianResult> {
    linalg::ensure_hurwitz(a_m)?;
    let q = c.transpose() * c;
    let w = linalg::solve_lyapunov(a_m, &q)?;
    let residual_norm = linalg::lyapunov_residual(a_m, &w, &q);
    Ok(GramianResult { w, residual_norm })
}

/// `AW + WAᵀ + BBᵀ = 0`.
pub fn controllability_gramian(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<GramianResult> {
    linalg::ensure_hurwitz(a)?;
    let q = b * b.transpose();
    let w = linalg::solve_lyapunov(&a.transpose(), &q)?;
    let residual_norm = linalg::lyapunov_residual(&a.transpose(), &w, &q);
    Ok(GramianResult { w, residual_norm })
}

/// `P ≻ 0` and `λ_P > 0` with `A_mᵀP + PA_m ⪯ −λ_P P`.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovCertificate {
    pub p: DMatrix<f64>,
    pub lambda_p: f64,
}

impl LyapunovCertificate {
    /// Largest eigenvalue of `A_mᵀP + PA_m + λ_P P`; nonpositive when valid.
    pub fn inequality_margin(&self, a_m: &DMatrix<f64>) -> f64 {
        let m = a_m.transpose() * &self.p + &self.p * a_m + &self.p * self.lambda_p;
        linalg::symmetric_extremes(&m).1
    }
}

pub fn lyapunov_certificate(a_m: &DMatrix<f64>) -> Result<LyapunovCertificate> {
    linalg::ensure_hurwitz(a_m)?;
    let n = a_m.nrows();
    let p = linalg::solve_lyapunov(a_m, &DMatrix::identity(n, n))?;
    let (_, max) = linalg::symmetric_extremes(&p);
    Ok(LyapunovCertificate { p, lambda_p: 1.0 / max })
}

/// Constants with `‖e^{A_m t}‖₂ ≤ M e^{−βt}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayCertificate {
    pub m: f64,
    pub beta: f64,
}

const BETA_BACKOFF: f64 = 0.95;
const M_INFLATION: f64 = 1.05;
const DECAY_GRID_POINTS: usize = 2000;

impl DecayCertificate {
    pub fn bound(&self, t: f64) -> f64 {
        self.m * (-self.beta * t).exp()
    }

    /// The verification grid: log-spaced over `[1e-3, 1e2]`.
    pub fn verification_grid() -> Vec<f64> {
        linalg::logspace(1e-3, 1e2, DECAY_GRID_POINTS)
    }

    /// Largest excess `‖e^{A_m t}‖ − M e^{−βt}` over `grid`.
    pub fn max_violation(&self, a_m: &DMatrix<f64>, grid: &[f64]) -> f64 {
        grid.iter()
            .map(|&t| linalg::norm2(&linalg::expm(a_m, t)) - self.bound(t))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Time after which `M e^{−βt}` falls below `level`.
    pub fn truncation_time(&self, level: f64) -> f64 {
        ((self.m / level).ln() / self.beta).max(0.0)
    }
}

pub fn decay_certificate(a_m: &DMatrix<f64>) -> Result<DecayCertificate> {
    let abscissa = linalg::ensure_hurwitz(a_m)?;
    let beta = BETA_BACKOFF * abscissa.abs();
    let upper = (1e2f64).max(50.0 / beta);
    let mut grid = linalg::logspace(1e-3, upper, DECAY_GRID_POINTS);
    grid.push(0.0);
    grid.extend(DecayCertificate::verification_grid());
    let sup = grid
        .iter()
        .map(|&t| linalg::norm2(&linalg::expm(a_m, t)) * (beta * t).exp())
        .fold(1.0, f64::max);
    Ok(DecayCertificate {
        m: M_INFLATION * sup,
        beta,
    })
}

const CONV_TRUNCATION: f64 = 1e-12;

/// Induced norm of the convolution operator, `∫₀^∞ ‖e^{A_m t}‖₂ dt`: adaptive
/// quadrature up to the time where the decay bound drops below 1e-12, plus
/// the analytic tail bound.
pub fn convolution_operator_norm(a_m: &DMatrix<f64>) -> Result<f64> {
    let cert = decay_certificate(a_m)?;
    let t_star = cert.truncation_time(CONV_TRUNCATION);
    let body = quadrature::integrate(|t| linalg::norm2(&linalg::expm(a_m, t)), 0.0, t_star, 64, 1e-11, 1e-12);
    Ok(body + cert.bound(t_star) / cert.beta)
}

/// Integrates the differential Riccati equation
/// `−Π̇ = AᵀΠ + ΠA + CᵀC − ΠBR⁻¹BᵀΠ` backward from `Π(T) = 0` with RK4 and
/// returns `Π(0)`.
pub fn integrate_differential_riccati(sys: &StateSpace, r: &DMatrix<f64>, horizon: f64, step: f64) -> Result<DMatrix<f64>> {
    if !(horizon > 0.0) || !(step > 0.0) {
        return Err(Error::Precondition("horizon and step must be positive".into()));
    }
    let n = sys.n();
    let r_inv = checked_weight_inverse(r, sys.m())?;
    let a = sys.a().clone();
    let s = sys.b() * &r_inv * sys.b().transpose();
    let q = sys.c().transpose() * sys.c();
    let mut rhs = |_t: f64, z: &DVector<f64>| {
        let pi = DMatrix::from_column_slice(n, n, z.as_slice());
        let d = -(a.transpose() * &pi + &pi * &a + &q - &pi * &s * &pi);
        DVector::from_column_slice(d.as_slice())
    };
    let steps = (horizon / step).ceil() as usize;
    let h = horizon / steps as f64;
    let mut z = DVector::zeros(n * n);
    for k in 0..steps {
        let t = horizon - k as f64 * h;
        z = ode::rk4_step(&mut rhs, t, &z, -h);
    }
    Ok(linalg::symmetrize(&DMatrix::from_column_slice(n, n, z.as_slice())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::SQRT_2;

    fn scalar(a: f64, b: f64, c: f64) -> StateSpace {
        StateSpace::new(
            DMatrix::from_element(1, 1, a),
            DMatrix::from_element(1, 1, b),
            DMatrix::from_element(1, 1, c),
        )
        .unwrap()
    }

    fn one() -> DMatrix<f64> {
        DMatrix::from_element(1, 1, 1.0)
    }

    #[test]
    fn scalar_care_root() {
        let sol = solve_care(&scalar(1.0, 1.0, 1.0), &one()).unwrap();
        assert_relative_eq!(sol.pi[(0, 0)], 1.0 + SQRT_2, epsilon = 1e-12);
        assert_relative_eq!(sol.a_m[(0, 0)], -SQRT_2, epsilon = 1e-12);
        assert_relative_eq!(closed_loop_generator(&sol)[(0, 0)], -SQRT_2, epsilon = 1e-12);
    }

    #[test]
    fn zero_state_weight() {
        let sol = solve_care(&scalar(-1.0, 1.0, 0.0), &one()).unwrap();
        assert!(sol.pi[(0, 0)].abs() < 1e-14);
        assert_relative_eq!(sol.a_m[(0, 0)], -1.0, epsilon = 1e-14);
    }

    #[test]
    fn rejects_unstabilizable_and_bad_weights() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let c = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let sys = StateSpace::new(a, b, c).unwrap();
        assert!(matches!(solve_care(&sys, &one()), Err(Error::Synthesis(_))));
        assert!(matches!(
            solve_care(&scalar(1.0, 1.0, 1.0), &DMatrix::from_element(1, 1, -1.0)),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn scalar_gramians_and_certificates() {
        let w = observability_gramian(&DMatrix::from_element(1, 1, -SQRT_2), &one()).unwrap();
        assert_relative_eq!(w.w[(0, 0)], 1.0 / (2.0 * SQRT_2), epsilon = 1e-14);
        let w = observability_gramian(&DMatrix::from_element(1, 1, -1.0), &one()).unwrap();
        assert_relative_eq!(w.w[(0, 0)], 0.5, epsilon = 1e-14);
        let w = observability_gramian(&DMatrix::from_element(1, 1, -1.0), &DMatrix::zeros(1, 1)).unwrap();
        assert_eq!(w.w[(0, 0)], 0.0);

        let cert = lyapunov_certificate(&DMatrix::from_element(1, 1, -1.0)).unwrap();
        assert_relative_eq!(cert.p[(0, 0)], 0.5, epsilon = 1e-14);
        assert_relative_eq!(cert.lambda_p, 2.0, epsilon = 1e-13);
        let cert = lyapunov_certificate(&DMatrix::from_element(1, 1, -SQRT_2)).unwrap();
        assert_relative_eq!(cert.lambda_p, 2.0 * SQRT_2, epsilon = 1e-13);
        assert!(matches!(
            lyapunov_certificate(&DMatrix::from_element(1, 1, 0.1)),
            Err(Error::InvalidGenerator { .. })
        ));
    }

    #[test]
    fn decay_examples() {
        let cert = decay_certificate(&DMatrix::from_element(1, 1, -2.0)).unwrap();
        assert_relative_eq!(cert.beta, 1.9, epsilon = 1e-12);
        assert!(cert.m >= 1.0 && cert.m <= 1.05 + 1e-12);

        let normal = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -3.0]);
        let cert = decay_certificate(&normal).unwrap();
        assert!(cert.m <= 1.05 + 1e-12);

        let jordan = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 0.0, -1.0]);
        let cert = decay_certificate(&jordan).unwrap();
        assert!(cert.m > 1.0);
        assert!(cert.max_violation(&jordan, &DecayCertificate::verification_grid()) <= 1e-9);
    }

    #[test]
    fn convolution_norm_examples() {
        let v = convolution_operator_norm(&DMatrix::from_element(1, 1, -1.0)).unwrap();
        assert!((v - 1.0).abs() < 1e-6);
        let v = convolution_operator_norm(&DMatrix::from_element(1, 1, -SQRT_2)).unwrap();
        assert!((v - 1.0 / SQRT_2).abs() < 1e-6);
        let v = convolution_operator_norm(&DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -2.0])).unwrap();
        assert!((v - 1.0).abs() < 1e-6);
    }
}
