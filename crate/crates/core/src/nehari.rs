//! Causal compensator synthesis: the best stable approximant of the
//! anticausal adjoint of the closed loop, by the Glover all-pass
//! construction at the level of the largest Hankel singular value.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg;
use crate::linsys::StateSpace;
use crate::riccati::{self, checked_weight_inverse};

const HSV_TRUNCATION: f64 = 1e-10;
const DEGENERACY_GAP: f64 = 1e-10;
const GRID_POINTS: usize = 400;
const GOLDEN_ITERATIONS: usize = 80;
const REFINED_PEAKS: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct BalancedRealization {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    /// Hankel singular values, nonincreasing and positive.
    pub hsv: Vec<f64>,
}

fn psd_square_root_factor(w: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = linalg::symmetrize(w).symmetric_eigen();
    let mut f = eig.eigenvectors.clone();
    for (j, &l) in eig.eigenvalues.iter().enumerate() {
        let s = l.max(0.0).sqrt();
        f.column_mut(j).scale_mut(s);
    }
    f
}

/// Square-root balanced realization, truncating states whose Hankel
/// singular value is below 1e-10 of the largest.
pub fn balance(sys: &StateSpace) -> Result<BalancedRealization> {
    let (a, b, c) = (sys.a(), sys.b(), sys.c());
    let wc = riccati::controllability_gramian(a, b)?.w;
    let wo = riccati::observability_gramian(a, c)?.w;
    let lc = psd_square_root_factor(&wc);
    let lo = psd_square_root_factor(&wo);
    let svd = (lo.transpose() * &lc).svd(true, true);
    let (u, vt) = (svd.u.expect("u requested"), svd.v_t.expect("v requested"));
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let sigma1 = order.first().map(|&i| svd.singular_values[i]).unwrap_or(0.0);
    if !(sigma1 > 0.0) {
        return Err(Error::DegenerateRealization(
            "all Hankel singular values vanish".into(),
        ));
    }
    let kept: Vec<usize> = order
        .into_iter()
        .filter(|&i| svd.singular_values[i] >= HSV_TRUNCATION * sigma1)
        .collect();
    let n = a.nrows();
    let k = kept.len();
    let mut t = DMatrix::zeros(n, k);
    let mut t_inv = DMatrix::zeros(k, n);
    let mut hsv = Vec::with_capacity(k);
    for (col, &i) in kept.iter().enumerate() {
        let s = svd.singular_values[i];
        let scale = 1.0 / s.sqrt();
        t.set_column(col, &(&lc * vt.row(i).transpose() * scale));
        t_inv.set_row(col, &(u.column(i).transpose() * lo.transpose() * scale));
        hsv.push(s);
    }
    Ok(BalancedRealization {
        a: &t_inv * a * &t,
        b: &t_inv * b,
        c: c * &t,
        hsv,
    })
}

/// Stable compensator `ṗ = H_A p + H_B σ`, output `H_C p + D_H σ`.
#[derive(Debug, Clone, PartialEq)]
pub struct NehariApproximant {
    pub h_a: DMatrix<f64>,
    pub h_b: DMatrix<f64>,
    pub h_c: DMatrix<f64>,
    pub d_h: Option<DMatrix<f64>>,
    /// Gridded sup of `‖G_m(jω)ᴴ − X(jω)‖₂`.
    pub achieved_error: f64,
    /// Largest Hankel singular value of the closed loop.
    pub optimal_error: f64,
    pub hsv: Vec<f64>,
}

impl NehariApproximant {
    pub fn order(&self) -> usize {
        self.h_a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.h_b.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.h_c.nrows()
    }

    fn check(&self, p: &DVector<f64>, sigma: &DVector<f64>) -> Result<()> {
        if p.len() != self.order() || sigma.len() != self.inputs() {
            return Err(Error::Composition(format!(
                "compensator of order {} with {} inputs given state {} and input {}",
                self.order(),
                self.inputs(),
                p.len(),
                sigma.len()
            )));
        }
        Ok(())
    }

    pub fn output(&self, p: &DVector<f64>, sigma: &DVector<f64>) -> Result<DVector<f64>> {
        self.check(p, sigma)?;
        let mut y = &self.h_c * p;
        if let Some(d) = &self.d_h {
            y += d * sigma;
        }
        Ok(y)
    }

    pub fn derivative(&self, p: &DVector<f64>, sigma: &DVector<f64>) -> Result<DVector<f64>> {
        self.check(p, sigma)?;
        Ok(&self.h_a * p + &self.h_b * sigma)
    }

    pub fn frequency_response(&self, omega: f64) -> linalg::CMatrix {
        linalg::frequency_response(&self.h_a, &self.h_b, &self.h_c, self.d_h.as_ref(), omega)
    }

    /// `X(0) = D_H − H_C H_A⁻¹ H_B`.
    pub fn dc_gain(&self) -> Result<DMatrix<f64>> {
        let mut g = self
            .d_h
            .clone()
            .unwrap_or_else(|| DMatrix::zeros(self.outputs(), self.inputs()));
        if self.order() > 0 {
            let inv = self
                .h_a
                .clone()
                .try_inverse()
                .ok_or(Error::InvalidGenerator { abscissa: 0.0 })?;
            g -= &self.h_c * inv * &self.h_b;
        }
        Ok(g)
    }

    /// Feedthrough, zero when absent.
    pub fn feedthrough(&self) -> DMatrix<f64> {
        self.d_h
            .clone()
            .unwrap_or_else(|| DMatrix::zeros(self.outputs(), self.inputs()))
    }

    pub fn spectral_abscissa(&self) -> f64 {
        if self.order() == 0 {
            f64::NEG_INFINITY
        } else {
            linalg::spectral_abscissa(&self.h_a)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NehariOptions {
    /// Fold the feedthrough through a fast pole.
    pub enforce_strictly_proper: bool,
    /// Balanced truncation of the approximant to this order.
    pub compensator_order: Option<usize>,
}

fn frequency_bounds(generators: &[&DMatrix<f64>]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for a in generators.iter().filter(|a| a.nrows() > 0) {
        lo = lo.min(linalg::spectral_abscissa(a).abs());
        hi = hi.max(linalg::spectral_radius(a));
    }
    if !lo.is_finite() || lo == 0.0 {
        lo = 1.0;
    }
    if hi == 0.0 {
        hi = 1.0;
    }
    (1e-3 * lo, 1e3 * hi)
}

/// Log-spaced frequency grid scaled to the given generators.
pub fn frequency_grid(generators: &[&DMatrix<f64>], points: usize) -> Vec<f64> {
    let (lo, hi) = frequency_bounds(generators);
    linalg::logspace(lo, hi, points)
}

/// Sup over `ω ≥ 0` of `f`: a log grid over `[lo, hi]`, the endpoints
/// `ω = 0` and `ω = ∞` (`f_inf`), and golden-section refinement around the
/// largest local maxima of the grid.
pub fn sup_over_frequency<F>(f: F, lo: f64, hi: f64, f_inf: f64) -> f64
where
    F: Fn(f64) -> f64 + Sync,
{
    let grid = linalg::logspace(lo, hi, GRID_POINTS);
    let values: Vec<f64> = grid.par_iter().map(|&w| f(w)).collect();
    let mut best = f(0.0).max(f_inf);
    let mut peaks: Vec<usize> = (0..grid.len())
        .filter(|&i| {
            let left = if i == 0 { f64::NEG_INFINITY } else { values[i - 1] };
            let right = values.get(i + 1).copied().unwrap_or(f64::NEG_INFINITY);
            values[i] >= left && values[i] >= right
        })
        .collect();
    peaks.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
    peaks.truncate(REFINED_PEAKS);
    for &v in &values {
        best = best.max(v);
    }
    for i in peaks {
        let a = grid[i.saturating_sub(1)].ln();
        let b = grid[(i + 1).min(grid.len() - 1)].ln();
        best = best.max(golden_max(|x| f(x.exp()), a, b));
    }
    best
}

fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    let mut best = f1.max(f2);
    for _ in 0..GOLDEN_ITERATIONS {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        }
        best = best.max(f1).max(f2);
    }
    best
}

/// `‖G‖_∞` of a stable system.
pub fn hinf_norm(sys: &StateSpace) -> Result<f64> {
    linalg::ensure_hurwitz(sys.a())?;
    let (lo, hi) = frequency_bounds(&[sys.a()]);
    Ok(sup_over_frequency(
        |w| linalg::norm2_complex(&linalg::frequency_response(sys.a(), sys.b(), sys.c(), None, w)),
        lo,
        hi,
        0.0,
    ))
}

/// Gridded sup of `‖G_m(jω)ᴴ − X(jω)‖₂`, the error against the adjoint.
pub fn approximation_error(g_m: &StateSpace, x: &NehariApproximant) -> f64 {
    let (lo, hi) = frequency_bounds(&[g_m.a(), &x.h_a]);
    let err = |w: f64| {
        let g = linalg::frequency_response(g_m.a(), g_m.b(), g_m.c(), None, w);
        linalg::norm2_complex(&(g.adjoint() - x.frequency_response(w)))
    };
    let at_inf = linalg::norm2(&x.feedthrough());
    sup_over_frequency(err, lo, hi, at_inf)
}

/// Error magnitude `‖G_m(jω)ᴴ − X(jω)‖₂` at each frequency of `grid`.
pub fn error_profile(g_m: &StateSpace, x: &NehariApproximant, grid: &[f64]) -> Vec<f64> {
    grid.iter()
        .map(|&w| {
            let g = linalg::frequency_response(g_m.a(), g_m.b(), g_m.c(), None, w);
            linalg::norm2_complex(&(g.adjoint() - x.frequency_response(w)))
        })
        .collect()
}

/// Optimal zeroth-order Hankel approximant of a stable system: an
/// antistable `Q` with `‖G − Q‖_∞ = σ₁`, returned as `(Â, B̂, Ĉ, D̂)`.
fn glover_antistable(bal: &BalancedRealization) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let n = bal.hsv.len();
    let sigma = bal.hsv[0];
    if n > 1 && sigma - bal.hsv[1] < DEGENERACY_GAP * sigma {
        return Err(Error::HankelDegeneracy { gap: sigma - bal.hsv[1] });
    }
    let k = n - 1;
    let a11 = bal.a.view((1, 1), (k, k)).into_owned();
    let b1 = bal.b.rows(1, k).into_owned();
    let b2 = bal.b.rows(0, 1).into_owned();
    let c1 = bal.c.columns(1, k).into_owned();
    let c2 = bal.c.columns(0, 1).into_owned();
    let u = -(linalg::pinv(&c2.transpose()) * &b2);
    let s1 = DMatrix::from_diagonal(&DVector::from_iterator(k, bal.hsv[1..].iter().copied()));
    let gamma = &s1 * &s1 - DMatrix::identity(k, k) * (sigma * sigma);
    let gamma_inv = gamma
        .try_inverse()
        .ok_or(Error::HankelDegeneracy { gap: 0.0 })?;
    let a_hat = &gamma_inv * (a11.transpose() * (sigma * sigma) + &s1 * &a11 * &s1 - c1.transpose() * &u * b1.transpose() * sigma);
    let b_hat = &gamma_inv * (&s1 * &b1 + c1.transpose() * &u * sigma);
    let c_hat = &c1 * &s1 + &u * b1.transpose() * sigma;
    let d_hat = -(&u * sigma);
    Ok((a_hat, b_hat, c_hat, d_hat))
}

fn fold_feedthrough(x: &mut NehariApproximant, omega_f: f64) {
    let Some(d) = x.d_h.take() else { return };
    let (n, p, m) = (x.order(), x.inputs(), x.outputs());
    let mut a = DMatrix::zeros(n + p, n + p);
    a.view_mut((0, 0), (n, n)).copy_from(&x.h_a);
    a.view_mut((n, n), (p, p)).fill_with_identity();
    a.view_mut((n, n), (p, p)).scale_mut(-omega_f);
    let mut b = DMatrix::zeros(n + p, p);
    b.view_mut((0, 0), (n, p)).copy_from(&x.h_b);
    b.view_mut((n, 0), (p, p)).fill_with_identity();
    b.view_mut((n, 0), (p, p)).scale_mut(omega_f);
    let mut c = DMatrix::zeros(m, n + p);
    c.view_mut((0, 0), (m, n)).copy_from(&x.h_c);
    c.view_mut((0, n), (m, p)).copy_from(&d);
    x.h_a = a;
    x.h_b = b;
    x.h_c = c;
}

fn truncate(x: &mut NehariApproximant, order: usize) -> Result<()> {
    if order >= x.order() {
        return Ok(());
    }
    let sys = StateSpace::new(x.h_a.clone(), x.h_b.clone(), x.h_c.clone())?;
    let bal = balance(&sys)?;
    let k = order.min(bal.hsv.len());
    x.h_a = bal.a.view((0, 0), (k, k)).into_owned();
    x.h_b = bal.b.rows(0, k).into_owned();
    x.h_c = bal.c.columns(0, k).into_owned();
    Ok(())
}

/// Optimal stable approximant of the anticausal adjoint `G_m(−s)ᵀ`.
///
/// With `G̃ = (A_mᵀ, Cᵀ, Bᵀ)` the adjoint is `G̃(−s)`, so the stable
/// approximant is `X(s) = Q(−s)` for the antistable Hankel approximant `Q`
/// of `G̃`.
pub fn solve_nehari(g_m: &StateSpace, r: &DMatrix<f64>, opts: NehariOptions) -> Result<NehariApproximant> {
    checked_weight_inverse(r, g_m.m())?;
    linalg::ensure_hurwitz(g_m.a())?;
    let bal = balance(&g_m.transposed())?;
    let (a_hat, b_hat, c_hat, d_hat) = glover_antistable(&bal)?;
    let mut x = NehariApproximant {
        h_a: -a_hat,
        h_b: b_hat,
        h_c: -c_hat,
        d_h: Some(d_hat),
        achieved_error: 0.0,
        optimal_error: bal.hsv[0],
        hsv: bal.hsv.clone(),
    };
    if x.order() > 0 && linalg::spectral_abscissa(&x.h_a) >= 0.0 {
        return Err(Error::Synthesis("approximant is not stable".into()));
    }
    if let Some(order) = opts.compensator_order {
        truncate(&mut x, order)?;
    }
    if opts.enforce_strictly_proper {
        fold_feedthrough(&mut x, 1e3 * linalg::spectral_radius(g_m.a()));
    }
    x.achieved_error = approximation_error(g_m, &x);
    Ok(x)
}

/// `G_m(0) = −C A_m⁻¹ B`.
pub fn closed_loop_dc_gain(g_m: &StateSpace) -> Result<DMatrix<f64>> {
    linalg::ensure_hurwitz(g_m.a())?;
    g_m.dc_gain()
}

/// Corner frequency of the DC correction: half the slowest closed-loop
/// decay rate.
pub fn dc_correction_corner(g_m: &StateSpace) -> f64 {
    0.5 * linalg::spectral_abscissa(g_m.a()).abs()
}

/// Unconstrained approximant plus `Δ ω_c/(s + ω_c)` with `Δ` chosen so that
/// `G_m(0) R⁻¹ X(0) = I`.
pub fn solve_constrained_nehari(g_m: &StateSpace, r: &DMatrix<f64>, opts: NehariOptions) -> Result<NehariApproximant> {
    let r_inv = checked_weight_inverse(r, g_m.m())?;
    let g0 = closed_loop_dc_gain(g_m)?;
    let p = g_m.p();
    let map = &g0 * &r_inv;
    let sv = map.singular_values();
    let scale = sv.max();
    if sv.iter().filter(|&&s| s > linalg::RANK_TOL * scale.max(1e-300)).count() < p || scale == 0.0 {
        return Err(Error::ConstraintInfeasible(format!(
            "G_m(0) R⁻¹ does not have full row rank {p}"
        )));
    }
    let mut x = solve_nehari(g_m, r, opts)?;
    let x0 = x.dc_gain()?;
    let residual = DMatrix::identity(p, p) - &map * &x0;
    if residual.amax() <= 1e-14 {
        return Ok(x);
    }
    let delta = linalg::pinv(&map) * residual;
    let omega_c = dc_correction_corner(g_m);
    let (n, m) = (x.order(), x.outputs());
    let mut a = DMatrix::zeros(n + p, n + p);
    a.view_mut((0, 0), (n, n)).copy_from(&x.h_a);
    a.view_mut((n, n), (p, p)).fill_with_identity();
    a.view_mut((n, n), (p, p)).scale_mut(-omega_c);
    let mut b = DMatrix::zeros(n + p, p);
    b.view_mut((0, 0), (n, p)).copy_from(&x.h_b);
    b.view_mut((n, 0), (p, p)).fill_with_identity();
    let mut c = DMatrix::zeros(m, n + p);
    c.view_mut((0, 0), (m, n)).copy_from(&x.h_c);
    c.view_mut((0, n), (m, p)).copy_from(&(delta * omega_c));
    x.h_a = a;
    x.h_b = b;
    x.h_c = c;
    x.achieved_error = approximation_error(g_m, &x);
    Ok(x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuboptimalityBound {
    pub s: f64,
    pub gm_hinf: f64,
    /// `‖R^{−1/2}‖₂ = λ_min(R)^{−1/2}`.
    pub r_inv_sqrt_norm: f64,
    pub hankel_norm: f64,
}

/// `S = (‖G_m‖_∞ + ‖R^{−1/2}‖)·σ₁`.
pub fn suboptimality_constant(g_m: &StateSpace, r: &DMatrix<f64>) -> Result<SuboptimalityBound> {
    checked_weight_inverse(r, g_m.m())?;
    let gm_hinf = hinf_norm(g_m)?;
    let hankel_norm = balance(g_m)?.hsv[0];
    let (lmin, _) = linalg::symmetric_extremes(r);
    let r_inv_sqrt_norm = 1.0 / lmin.sqrt();
    Ok(SuboptimalityBound {
        s: (gm_hinf + r_inv_sqrt_norm) * hankel_norm,
        gm_hinf,
        r_inv_sqrt_norm,
        hankel_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn first_order() -> StateSpace {
        let one = DMatrix::from_element(1, 1, 1.0);
        StateSpace::new(-one.clone(), one.clone(), one).unwrap()
    }

    fn r1() -> DMatrix<f64> {
        DMatrix::identity(1, 1)
    }

    #[test]
    fn scalar_hsv() {
        let bal = balance(&first_order()).unwrap();
        assert_eq!(bal.hsv.len(), 1);
        assert_relative_eq!(bal.hsv[0], 0.5, epsilon = 1e-14);
    }

    #[test]
    fn unobservable_is_degenerate() {
        let sys = StateSpace::new(-DMatrix::identity(1, 1), r1(), DMatrix::zeros(1, 1)).unwrap();
        assert!(matches!(balance(&sys), Err(Error::DegenerateRealization(_))));
    }

    #[test]
    fn decoupled_modes_have_scalar_hsv() {
        // 1/(s+a) has hsv 1/(2a); two decoupled modes with distinct outputs
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -3.0]));
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let sys = StateSpace::new(a, b.clone(), b).unwrap();
        let bal = balance(&sys).unwrap();
        assert_relative_eq!(bal.hsv[0], 0.5, epsilon = 1e-12);
        assert_relative_eq!(bal.hsv[1], 1.0 / 6.0, epsilon = 1e-12);
    }

    #[test]
    fn balanced_gramians_are_diagonal() {
        let a = DMatrix::from_row_slice(3, 3, &[-1.0, 2.0, 0.0, 0.0, -2.0, 1.0, 0.5, 0.0, -3.0]);
        let b = DMatrix::from_row_slice(3, 1, &[1.0, 0.0, 1.0]);
        let c = DMatrix::from_row_slice(1, 3, &[0.0, 1.0, 1.0]);
        let bal = balance(&StateSpace::new(a, b, c).unwrap()).unwrap();
        let wc = riccati::controllability_gramian(&bal.a, &bal.b).unwrap().w;
        let wo = riccati::observability_gramian(&bal.a, &bal.c).unwrap().w;
        let d = DMatrix::from_diagonal(&DVector::from_vec(bal.hsv.clone()));
        assert!((wc - &d).amax() < 1e-8);
        assert!((wo - &d).amax() < 1e-8);
    }

    #[test]
    fn first_order_optimum_is_constant_half() {
        let g = first_order();
        let x = solve_nehari(&g, &r1(), NehariOptions::default()).unwrap();
        assert_eq!(x.order(), 0);
        assert_relative_eq!(x.feedthrough()[(0, 0)], 0.5, epsilon = 1e-14);
        assert_relative_eq!(x.achieved_error, 0.5, epsilon = 1e-12);
        let grid = linalg::logspace(1e-3, 1e3, 100);
        for e in error_profile(&g, &x, &grid) {
            assert_relative_eq!(e, 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn strictly_proper_option_drops_feedthrough() {
        let x = solve_nehari(
            &first_order(),
            &r1(),
            NehariOptions {
                enforce_strictly_proper: true,
                compensator_order: None,
            },
        )
        .unwrap();
        assert!(x.d_h.is_none());
        assert_eq!(x.order(), 1);
        assert!(x.spectral_abscissa() < 0.0);
        assert!(x.achieved_error >= 0.5 - 1e-9);
        assert_relative_eq!(x.dc_gain().unwrap()[(0, 0)], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn scalar_constrained_dc_value() {
        let a_m = DMatrix::from_element(1, 1, -std::f64::consts::SQRT_2);
        let one = DMatrix::from_element(1, 1, 1.0);
        let g = StateSpace::new(a_m, one.clone(), one).unwrap();
        assert_relative_eq!(closed_loop_dc_gain(&g).unwrap()[(0, 0)], 1.0 / std::f64::consts::SQRT_2, epsilon = 1e-15);
        let x = solve_constrained_nehari(&g, &r1(), NehariOptions::default()).unwrap();
        assert_relative_eq!(x.dc_gain().unwrap()[(0, 0)], std::f64::consts::SQRT_2, epsilon = 1e-10);
        let free = solve_nehari(&g, &r1(), NehariOptions::default()).unwrap();
        assert!(x.achieved_error >= free.achieved_error - 1e-12);
        assert!(x.spectral_abscissa() < 0.0);
    }

    #[test]
    fn rank_deficient_constraint() {
        let a = -DMatrix::identity(2, 2);
        let b = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let c = DMatrix::identity(2, 2);
        let g = StateSpace::new(a, b, c).unwrap();
        assert!(matches!(
            solve_constrained_nehari(&g, &r1(), NehariOptions::default()),
            Err(Error::ConstraintInfeasible(_))
        ));
    }

    #[test]
    fn scalar_suboptimality() {
        let s = suboptimality_constant(&first_order(), &r1()).unwrap();
        assert_relative_eq!(s.gm_hinf, 1.0, epsilon = 1e-9);
        assert_relative_eq!(s.hankel_norm, 0.5, epsilon = 1e-12);
        assert_relative_eq!(s.s, 1.0, epsilon = 1e-9);
        let s4 = suboptimality_constant(&first_order(), &(r1() * 4.0)).unwrap();
        assert_relative_eq!(s4.r_inv_sqrt_norm, 0.5, epsilon = 1e-15);
        assert!(s4.s < s.s);
    }

    #[test]
    fn non_hurwitz_rejected() {
        let one = DMatrix::from_element(1, 1, 1.0);
        let g = StateSpace::new(one.clone(), one.clone(), one).unwrap();
        assert!(matches!(
            solve_nehari(&g, &r1(), NehariOptions::default()),
            Err(Error::InvalidGenerator { .. })
        ));
    }
}
