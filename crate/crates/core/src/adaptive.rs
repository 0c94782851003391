//! Dual observers with projection-based adaptation, the control-bound
//! constants and the small-gain check.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::linsys::{LipschitzBounds, SemilinearPlant};
use crate::nehari::NehariApproximant;
use crate::ode;
use crate::quadrature;
use crate::riccati::{self, RiccatiSolution};

/// Tolerance on the projection invariant after a step.
pub const INVARIANT_SLACK: f64 = 1e-9;

fn taper(alpha_hat: f64, y: f64, bound: f64, epsilon: f64) -> f64 {
    let a = alpha_hat.abs();
    if a <= bound || alpha_hat * y <= 0.0 {
        return y;
    }
    let factor = 1.0 - (a - bound) / (bound * epsilon);
    y * factor.clamp(0.0, 1.0)
}

/// Smooth projection with a linear taper in the layer
/// `ν_α < |α̂_j| ≤ ν_α(1+ε)`.
pub fn project(alpha_hat: f64, y: f64, bound: f64, epsilon: f64) -> Result<f64> {
    let limit = bound * (1.0 + epsilon);
    if alpha_hat.abs() > limit {
        return Err(Error::InvariantViolation {
            value: alpha_hat.abs(),
            limit,
        });
    }
    Ok(taper(alpha_hat, y, bound, epsilon))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObserverState {
    pub v_hat_p: DVector<f64>,
    pub v_hat_h: DVector<f64>,
    pub alpha_hat: DVector<f64>,
}

impl ObserverState {
    pub fn zeros(n: usize) -> Self {
        Self {
            v_hat_p: DVector::zeros(n),
            v_hat_h: DVector::zeros(n),
            alpha_hat: DVector::zeros(n),
        }
    }

    pub fn n(&self) -> usize {
        self.v_hat_p.len()
    }

    /// `ṽ = v̂_p + v̂_h − v`.
    pub fn error(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.v_hat_p + &self.v_hat_h - v
    }

    pub fn pack(&self) -> DVector<f64> {
        let n = self.n();
        let mut z = DVector::zeros(3 * n);
        z.rows_mut(0, n).copy_from(&self.v_hat_p);
        z.rows_mut(n, n).copy_from(&self.v_hat_h);
        z.rows_mut(2 * n, n).copy_from(&self.alpha_hat);
        z
    }

    pub fn unpack(z: &DVector<f64>, n: usize) -> Self {
        Self {
            v_hat_p: z.rows(0, n).into_owned(),
            v_hat_h: z.rows(n, n).into_owned(),
            alpha_hat: z.rows(2 * n, n).into_owned(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptationConfig {
    pub gamma: f64,
    pub epsilon: f64,
    /// Lyapunov certificate matrix weighting the observer error.
    pub p: DMatrix<f64>,
}

impl AdaptationConfig {
    pub fn new(gamma: f64, epsilon: f64, p: DMatrix<f64>) -> Result<Self> {
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::Precondition(format!("adaptation gain must be nonnegative, got {gamma}")));
        }
        if !(epsilon > 0.0 && epsilon <= 0.1) {
            return Err(Error::Precondition(format!("projection margin must lie in (0, 0.1], got {epsilon}")));
        }
        if p.nrows() != p.ncols() {
            return Err(Error::Dimension("P must be square".into()));
        }
        Ok(Self { gamma, epsilon, p })
    }

    /// Uses the Lyapunov certificate of `A_m` for `P`.
    pub fn from_solution(gamma: f64, epsilon: f64, sol: &RiccatiSolution) -> Result<Self> {
        let cert = riccati::lyapunov_certificate(&sol.a_m)?;
        Self::new(gamma, epsilon, cert.p)
    }
}

/// Right-hand side of the observers and the adaptation law for fixed plant
/// state `v` and tracking input `u_R`. Estimates that have left the layer
/// are tapered to zero outward speed rather than rejected, so intermediate
/// Runge–Kutta stages stay defined.
pub fn observer_derivative(
    state: &ObserverState,
    v: &DVector<f64>,
    phi: f64,
    u_r: &DVector<f64>,
    cfg: &AdaptationConfig,
    sol: &RiccatiSolution,
    nu_alpha: f64,
) -> ObserverState {
    let a_m = &sol.a_m;
    let b = sol.system.b();
    let err = state.error(v);
    let pe = &cfg.p * err;
    let alpha_dot = DVector::from_iterator(
        state.n(),
        (0..state.n()).map(|j| cfg.gamma * taper(state.alpha_hat[j], -pe[j] * phi, nu_alpha, cfg.epsilon)),
    );
    ObserverState {
        v_hat_p: a_m * &state.v_hat_p + &state.alpha_hat * phi,
        v_hat_h: a_m * &state.v_hat_h + b * u_r,
        alpha_hat: alpha_dot,
    }
}

/// Checks `|α̂_j| ≤ ν_α(1+ε)` up to [`INVARIANT_SLACK`].
pub fn check_invariant(alpha_hat: &DVector<f64>, nu_alpha: f64, epsilon: f64, time: f64) -> Result<()> {
    let limit = nu_alpha * (1.0 + epsilon);
    let worst = linalg::vector_inf_norm(alpha_hat);
    if worst > limit + INVARIANT_SLACK || !worst.is_finite() {
        return Err(Error::StepSize {
            time,
            reason: format!("|alpha_hat| = {worst} left the projection bound {limit}; reduce dt"),
        });
    }
    Ok(())
}

/// One RK4 step of the observers with `v` and `u_R` held over the step.
pub fn observer_step(
    state: &ObserverState,
    v: &DVector<f64>,
    u_r: &DVector<f64>,
    cfg: &AdaptationConfig,
    sol: &RiccatiSolution,
    plant: &SemilinearPlant,
    dt: f64,
) -> Result<ObserverState> {
    if !(dt > 0.0) {
        return Err(Error::Precondition(format!("dt must be positive, got {dt}")));
    }
    let n = state.n();
    if v.len() != n || plant.n() != n || sol.system.n() != n || cfg.p.nrows() != n {
        return Err(Error::Dimension("observer, plant and solution dimensions differ".into()));
    }
    check_invariant(&state.alpha_hat, plant.nu_alpha, cfg.epsilon, 0.0)?;
    let phi = plant.phi(v)?;
    let mut rhs = |_t: f64, z: &DVector<f64>| {
        observer_derivative(&ObserverState::unpack(z, n), v, phi, u_r, cfg, sol, plant.nu_alpha).pack()
    };
    let next = ObserverState::unpack(&ode::rk4_step(&mut rhs, 0.0, &state.pack(), dt), n);
    check_invariant(&next.alpha_hat, plant.nu_alpha, cfg.epsilon, dt)?;
    Ok(next)
}

/// `∫₀^∞ ‖H_C e^{H_A t} H_B‖ dt + ‖D_H‖`, an upper bound on the
/// L∞-induced gain of the compensator.
pub fn compensator_linf_gain(h: &NehariApproximant) -> Result<f64> {
    let mut g = linalg::norm2(&h.feedthrough());
    if h.order() > 0 {
        let cert = riccati::decay_certificate(&h.h_a)?;
        let t_star = cert.truncation_time(1e-13);
        g += quadrature::integrate(
            |t| linalg::norm2(&(&h.h_c * linalg::expm(&h.h_a, t) * &h.h_b)),
            0.0,
            t_star,
            64,
            1e-12,
            1e-12,
        );
    }
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaConstants {
    pub g_h: f64,
    pub conv_norm: f64,
    pub delta_0w: f64,
    pub delta_0r: f64,
    pub delta_0u: f64,
}

/// Constants of `‖u_R‖ ≤ δ_0w‖v‖ + δ_0r‖r‖ + δ_0u`, composed along the path
/// `f → ŷ_p → σ → H → R⁻¹`.
pub fn delta_constants(
    h: &NehariApproximant,
    sol: &RiccatiSolution,
    plant: &SemilinearPlant,
    bounds: &LipschitzBounds,
    epsilon: f64,
) -> Result<DeltaConstants> {
    let parts = DeltaParts {
        g_h: compensator_linf_gain(h)?,
        conv_norm: riccati::convolution_operator_norm(&sol.a_m)?,
        r_inv_norm: linalg::norm2(&sol.r_inv),
        c_norm: linalg::norm2(sol.system.c()),
        nu_alpha: plant.nu_alpha,
        epsilon,
    };
    Ok(parts.compose(bounds))
}

/// Scalar ingredients of [`DeltaConstants`], for callers that hold them
/// already (e.g. read back from a synthesis report).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaParts {
    pub g_h: f64,
    pub conv_norm: f64,
    pub r_inv_norm: f64,
    pub c_norm: f64,
    pub nu_alpha: f64,
    pub epsilon: f64,
}

impl DeltaParts {
    pub fn compose(&self, bounds: &LipschitzBounds) -> DeltaConstants {
        let path = self.r_inv_norm * self.g_h * self.c_norm * self.conv_norm * self.nu_alpha * (1.0 + self.epsilon);
        DeltaConstants {
            g_h: self.g_h,
            conv_norm: self.conv_norm,
            delta_0w: path * bounds.nu1,
            delta_0r: self.r_inv_norm * self.g_h,
            delta_0u: path * bounds.nu2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmallGainInputs {
    pub m: f64,
    pub rho0: f64,
    pub conv_norm: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub b_norm: f64,
    pub delta_0w: f64,
    pub delta_0r: f64,
    pub delta_0u: f64,
    pub r_inf: f64,
    pub rho_w: f64,
    pub epsilon_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmallGainReport {
    pub inputs: SmallGainInputs,
    pub denominator: f64,
    /// `f64::INFINITY` when the denominator is nonpositive.
    pub lhs: f64,
    /// `(ρ_w − ε_s) − lhs`; `f64::NEG_INFINITY` when the denominator is
    /// nonpositive.
    pub margin: f64,
    pub satisfied: bool,
}

/// `lhs = (Mρ₀ + c(ν₂ + δ_0r‖r‖ + δ_0u)) / (1 − c(ν₁ + ‖B‖δ_0w))`.
pub fn small_gain_check(inputs: SmallGainInputs) -> Result<SmallGainReport> {
    let i = inputs;
    let named = [
        ("M", i.m),
        ("rho0", i.rho0),
        ("conv_norm", i.conv_norm),
        ("nu1", i.nu1),
        ("nu2", i.nu2),
        ("b_norm", i.b_norm),
        ("delta_0w", i.delta_0w),
        ("delta_0r", i.delta_0r),
        ("delta_0u", i.delta_0u),
        ("r_inf", i.r_inf),
        ("epsilon_s", i.epsilon_s),
    ];
    if let Some((name, value)) = named.iter().find(|(_, v)| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::Precondition(format!("{name} must be finite and nonnegative, got {value}")));
    }
    if !(i.rho_w > 0.0) {
        return Err(Error::Precondition(format!("rho_w must be positive, got {}", i.rho_w)));
    }
    let denominator = 1.0 - i.conv_norm * (i.nu1 + i.b_norm * i.delta_0w);
    if denominator <= 0.0 {
        return Ok(SmallGainReport {
            inputs,
            denominator,
            lhs: f64::INFINITY,
            margin: f64::NEG_INFINITY,
            satisfied: false,
        });
    }
    let numerator = i.m * i.rho0 + i.conv_norm * (i.nu2 + i.delta_0r * i.r_inf + i.delta_0u);
    let lhs = numerator / denominator;
    let margin = (i.rho_w - i.epsilon_s) - lhs;
    Ok(SmallGainReport {
        inputs,
        denominator,
        lhs,
        margin,
        satisfied: margin >= 0.0,
    })
}
