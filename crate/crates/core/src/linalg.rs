//! Dense numerical kernels used across the toolkit: spectra, norms, ordered
//! complex Schur forms and Bartels–Stewart solvers for Sylvester and
//! Lyapunov equations.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Relative threshold for rank decisions made from singular values.
pub const RANK_TOL: f64 = 1e-8;

pub fn to_complex(a: &DMatrix<f64>) -> CMatrix {
    a.map(|x| Complex64::new(x, 0.0))
}

pub fn eigenvalues(a: &DMatrix<f64>) -> Vec<Complex64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    let (_, t) = schur_unpacked(&to_complex(a));
    (0..t.nrows()).map(|i| t[(i, i)]).collect()
}

/// Unitary `Z` and triangular `T` with `A = Z T Z^H`. The QR iteration is
/// capped; when it stalls the input is rotated by a seeded random unitary
/// matrix and the decomposition is retried.
fn schur_unpacked(a: &CMatrix) -> (CMatrix, CMatrix) {
    let n = a.nrows();
    let max_iter = 200 * n.max(10);
    if let Some(s) = a.clone().try_schur(f64::EPSILON, max_iter) {
        return s.unpack();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5c4u64);
    loop {
        let g = CMatrix::from_fn(n, n, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let q = g.qr().q();
        let rotated = q.adjoint() * a * &q;
        if let Some(s) = rotated.try_schur(f64::EPSILON, max_iter) {
            let (z, t) = s.unpack();
            return (q * z, t);
        }
    }
}

/// Largest real part over the spectrum; `-inf` for an empty matrix.
pub fn spectral_abscissa(a: &DMatrix<f64>) -> f64 {
    eigenvalues(a)
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    eigenvalues(a).iter().map(|l| l.norm()).fold(0.0, f64::max)
}

/// Returns the spectral abscissa, or an `InvalidGenerator` error when it is
/// not strictly negative.
pub fn ensure_hurwitz(a: &DMatrix<f64>) -> Result<f64> {
    let abscissa = spectral_abscissa(a);
    if abscissa < 0.0 {
        Ok(abscissa)
    } else {
        Err(Error::InvalidGenerator { abscissa })
    }
}

/// Spectral (induced 2-) norm.
pub fn norm2(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.singular_values().max()
}

pub fn norm2_complex(a: &CMatrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().svd(false, false).singular_values.max()
}

/// Extreme eigenvalues `(min, max)` of the symmetric part of `a`.
pub fn symmetric_extremes(a: &DMatrix<f64>) -> (f64, f64) {
    let sym = symmetrize(a);
    let eig = sym.symmetric_eigenvalues();
    (eig.min(), eig.max())
}

pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Condition number in the 2-norm; infinite for singular input.
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    let sv = a.singular_values();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        sv.max() / min
    }
}

pub fn complex_condition_number(a: &CMatrix) -> f64 {
    let sv = a.clone().svd(false, false).singular_values;
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        sv.max() / min
    }
}

/// Moore–Penrose pseudo-inverse with a relative singular-value cutoff.
pub fn pinv(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (r, c) = a.shape();
    if r == 0 || c == 0 {
        return DMatrix::zeros(c, r);
    }
    let svd = a.clone().svd(true, true);
    let cutoff = RANK_TOL * svd.singular_values.max();
    svd.pseudo_inverse(cutoff.max(f64::MIN_POSITIVE))
        .unwrap_or_else(|_| DMatrix::zeros(c, r))
}

/// Numerical rank from singular values relative to `scale`.
pub fn numerical_rank(a: &CMatrix, scale: f64) -> usize {
    if a.is_empty() {
        return 0;
    }
    let sv = a.clone().svd(false, false).singular_values;
    let cutoff = RANK_TOL * scale.max(1.0);
    sv.iter().filter(|&&s| s > cutoff).count()
}

/// Matrix exponential `e^{A t}`.
pub fn expm(a: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    if a.nrows() == 0 {
        return DMatrix::zeros(0, 0);
    }
    (a * t).exp()
}

/// Popov–Belevitch–Hautus check: every eigenvalue of `a` whose real part is
/// nonnegative must leave `[λI − A, B]` with full row rank.
pub fn pbh_stabilizable(a: &DMatrix<f64>, b: &DMatrix<f64>) -> bool {
    let n = a.nrows();
    let scale = norm2(a).max(norm2(b));
    let ac = to_complex(a);
    let bc = to_complex(b);
    eigenvalues(a)
        .into_iter()
        .filter(|l| l.re >= -RANK_TOL * scale.max(1.0))
        .all(|lambda| {
            let mut pencil = CMatrix::zeros(n, n + b.ncols());
            let shifted = CMatrix::identity(n, n) * lambda - &ac;
            pencil.view_mut((0, 0), (n, n)).copy_from(&shifted);
            pencil.view_mut((0, n), (n, b.ncols())).copy_from(&bc);
            numerical_rank(&pencil, scale) == n
        })
}

/// Detectability of `(A, C)` through the dual PBH test.
pub fn pbh_detectable(a: &DMatrix<f64>, c: &DMatrix<f64>) -> bool {
    pbh_stabilizable(&a.transpose(), &c.transpose())
}

/// Complex Schur form `A = Z T Z^H` with `T` upper triangular.
#[derive(Debug, Clone)]
pub struct ComplexSchur {
    pub z: CMatrix,
    pub t: CMatrix,
}

impl ComplexSchur {
    pub fn new(a: &CMatrix) -> Self {
        let (z, t) = schur_unpacked(a);
        let mut t = t;
        // clear roundoff below the diagonal
        for j in 0..t.ncols() {
            for i in (j + 1)..t.nrows() {
                t[(i, j)] = Complex64::new(0.0, 0.0);
            }
        }
        Self { z, t }
    }

    pub fn eigenvalue(&self, k: usize) -> Complex64 {
        self.t[(k, k)]
    }

    /// Swap the diagonal entries at `k` and `k + 1` with a unitary rotation.
    fn swap_adjacent(&mut self, k: usize) {
        let n = self.t.nrows();
        let t11 = self.t[(k, k)];
        let t22 = self.t[(k + 1, k + 1)];
        let (c, s) = givens(self.t[(k, k + 1)], t22 - t11);
        for j in (k + 2)..n {
            let x = self.t[(k, j)];
            let y = self.t[(k + 1, j)];
            self.t[(k, j)] = x * c + s * y;
            self.t[(k + 1, j)] = y * c - s.conj() * x;
        }
        let sc = s.conj();
        for i in 0..k {
            let x = self.t[(i, k)];
            let y = self.t[(i, k + 1)];
            self.t[(i, k)] = x * c + sc * y;
            self.t[(i, k + 1)] = y * c - sc.conj() * x;
        }
        self.t[(k, k)] = t22;
        self.t[(k + 1, k + 1)] = t11;
        for i in 0..n {
            let x = self.z[(i, k)];
            let y = self.z[(i, k + 1)];
            self.z[(i, k)] = x * c + sc * y;
            self.z[(i, k + 1)] = y * c - sc.conj() * x;
        }
    }

    /// Reorder so that every eigenvalue satisfying `select` comes first.
    /// Returns the number of selected eigenvalues.
    pub fn reorder<F: Fn(Complex64) -> bool>(&mut self, select: F) -> usize {
        let n = self.t.nrows();
        let mut placed = 0;
        for k in 0..n {
            if select(self.t[(k, k)]) {
                let mut j = k;
                while j > placed {
                    self.swap_adjacent(j - 1);
                    j -= 1;
                }
                placed += 1;
            }
        }
        placed
    }
}

/// Complex Givens rotation `(c, s)` with `[c s; -conj(s) c] [f; g] = [r; 0]`.
fn givens(f: Complex64, g: Complex64) -> (f64, Complex64) {
    let fa = f.norm();
    let ga = g.norm();
    if ga == 0.0 {
        return (1.0, Complex64::new(0.0, 0.0));
    }
    if fa == 0.0 {
        return (0.0, g.conj() / ga);
    }
    let norm = fa.hypot(ga);
    let c = fa / norm;
    let s = (f / fa) * g.conj() / norm;
    (c, s)
}

/// Solves `A X + X B = C` by complex Schur back-substitution
/// (Bartels–Stewart). The real part of the solution is returned.
pub fn solve_sylvester(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (m, n) = (a.nrows(), b.nrows());
    if a.ncols() != m || b.ncols() != n || c.shape() != (m, n) {
        return Err(Error::Dimension(format!(
            "sylvester: A {:?}, B {:?}, C {:?}",
            a.shape(),
            b.shape(),
            c.shape()
        )));
    }
    if m == 0 || n == 0 {
        return Ok(DMatrix::zeros(m, n));
    }
    let sa = ComplexSchur::new(&to_complex(a));
    let sb = ComplexSchur::new(&to_complex(b));
    let f = sa.z.adjoint() * to_complex(c) * &sb.z;
    let mut y = CMatrix::zeros(m, n);
    let scale = norm2(a) + norm2(b);
    for j in 0..n {
        for i in (0..m).rev() {
            let mut rhs = f[(i, j)];
            for k in (i + 1)..m {
                rhs -= sa.t[(i, k)] * y[(k, j)];
            }
            for k in 0..j {
                rhs -= y[(i, k)] * sb.t[(k, j)];
            }
            let denom = sa.t[(i, i)] + sb.t[(j, j)];
            if denom.norm() <= f64::EPSILON * scale.max(1.0) {
                return Err(Error::NumericalConditioning {
                    what: "Sylvester operator is singular (A and -B share an eigenvalue)".into(),
                    condition: f64::INFINITY,
                });
            }
            y[(i, j)] = rhs / denom;
        }
    }
    let x = &sa.z * y * sb.z.adjoint();
    Ok(x.map(|z| z.re))
}

/// Solves the continuous Lyapunov equation `Aᵀ X + X A + Q = 0`.
pub fn solve_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let x = solve_sylvester(&a.transpose(), a, &(-q))?;
    Ok(symmetrize(&x))
}

/// Residual `‖Aᵀ X + X A + Q‖_F`.
pub fn lyapunov_residual(a: &DMatrix<f64>, x: &DMatrix<f64>, q: &DMatrix<f64>) -> f64 {
    (a.transpose() * x + x * a + q).norm()
}

/// Frequency response `C (jωI − A)^{-1} B + D`.
pub fn frequency_response(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    d: Option<&DMatrix<f64>>,
    omega: f64,
) -> CMatrix {
    let n = a.nrows();
    let mut out = match d {
        Some(d) => to_complex(d),
        None => CMatrix::zeros(c.nrows(), b.ncols()),
    };
    if n == 0 {
        return out;
    }
    let pencil = CMatrix::identity(n, n) * Complex64::new(0.0, omega) - to_complex(a);
    let x = pencil
        .lu()
        .solve(&to_complex(b))
        .unwrap_or_else(|| CMatrix::from_element(n, b.ncols(), Complex64::new(f64::INFINITY, 0.0)));
    out += to_complex(c) * x;
    out
}

/// `n` logarithmically spaced points on `[lo, hi]`.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

pub fn vector_inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sample_matrix() -> DMatrix<f64> {
        DMatrix::from_row_slice(
            4,
            4,
            &[1.0, 2.0, 0.0, 3.0, -4.0, 1.0, 2.0, 0.0, 0.0, 1.0, -1.0, 5.0, 1.0, 0.0, 0.0, -2.0],
        )
    }

    #[test]
    fn reordering_preserves_similarity() {
        let a = sample_matrix();
        let ac = to_complex(&a);
        let mut schur = ComplexSchur::new(&ac);
        let k = schur.reorder(|l| l.re < 0.0);
        let stable = eigenvalues(&a).iter().filter(|l| l.re < 0.0).count();
        assert_eq!(k, stable);
        for i in 0..k {
            assert!(schur.eigenvalue(i).re < 0.0);
        }
        for i in k..4 {
            assert!(schur.eigenvalue(i).re >= 0.0);
        }
        let recon = &schur.z * &schur.t * schur.z.adjoint();
        assert!((recon - ac).norm() < 1e-12);
        let unitary = schur.z.adjoint() * &schur.z - CMatrix::identity(4, 4);
        assert!(unitary.norm() < 1e-12);
    }

    #[test]
    fn sylvester_matches_kronecker_solve() {
        let a = sample_matrix();
        let b = DMatrix::from_row_slice(2, 2, &[3.0, 1.0, -1.0, 4.0]);
        let c = DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        let x = solve_sylvester(&a, &b, &c).unwrap();
        assert!((&a * &x + &x * &b - &c).norm() < 1e-10);
    }

    #[test]
    fn scalar_lyapunov() {
        let a = DMatrix::from_element(1, 1, -std::f64::consts::SQRT_2);
        let q = DMatrix::from_element(1, 1, 1.0);
        let x = solve_lyapunov(&a, &q).unwrap();
        assert_relative_eq!(x[(0, 0)], 1.0 / (2.0 * std::f64::consts::SQRT_2), epsilon = 1e-14);
    }

    #[test]
    fn pbh_detects_uncontrollable_unstable_mode() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        assert!(!pbh_stabilizable(&a, &b));
        let b = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
        assert!(pbh_stabilizable(&a, &b));
    }
}
