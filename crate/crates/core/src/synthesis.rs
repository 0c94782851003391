//! Control laws built from one Riccati solution: classic LQR and LQT, the
//! pure-form regulator and tracker (Gramian closed forms), the non-causal
//! adjoint-signal law, the SDRE comparator and the dynamic compensator.
//! Laws are maps from states to inputs; [`law_gap`] compares two of them on
//! shared state samples.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::linsys::SemilinearPlant;
use crate::nehari::NehariApproximant;
use crate::ode;
use crate::quadrature;
use crate::riccati::{self, GramianResult, RiccatiSolution};
use crate::signal::SignalTimeline;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LawKind {
    Lqr,
    Lqt,
    PureFormRegulator,
    PureFormTracker,
    Sdre,
    DynamicCompensator,
}

impl LawKind {
    pub fn name(&self) -> &'static str {
        match self {
            LawKind::Lqr => "LQR",
            LawKind::Lqt => "LQT",
            LawKind::PureFormRegulator => "PureFormRegulator",
            LawKind::PureFormTracker => "PureFormTracker",
            LawKind::Sdre => "SDRE",
            LawKind::DynamicCompensator => "DynamicCompensator",
        }
    }

    /// Laws whose state feedback acts on the homogeneous half only. The
    /// compensator law feeds back the full state, as in the closed loop.
    pub fn is_dyadic(&self) -> bool {
        matches!(self, LawKind::PureFormRegulator | LawKind::PureFormTracker)
    }
}

/// Law-specific feedforward data.
#[derive(Debug, Clone)]
pub enum Feedforward {
    None,
    /// Constant input offset.
    Constant(DVector<f64>),
    /// `−G v_p + offset` with `G = R⁻¹BᵀW_o`.
    Particular { gain: DMatrix<f64>, offset: DVector<f64> },
    /// `−R⁻¹Bᵀ q(t)` from a backward-solved adjoint signal.
    Adjoint { q: SignalTimeline },
    /// `offset + G_f f(v)` with `G_f = R⁻¹Bᵀ(A_mᵀ)⁻¹Π`.
    StateDependent {
        offset: DVector<f64>,
        gain: DMatrix<f64>,
        plant: Arc<SemilinearPlant>,
    },
    /// `R⁻¹(H_C p + D_H σ)` from the causal compensator.
    Compensator(Arc<NehariApproximant>),
}

/// Arguments of a control law.
#[derive(Debug, Clone, Copy)]
pub struct LawInput<'a> {
    pub t: f64,
    pub particular: &'a DVector<f64>,
    pub homogeneous: &'a DVector<f64>,
    /// Compensator state and the signal `σ = r − ŷ_p` feeding it.
    pub compensator: Option<(&'a DVector<f64>, &'a DVector<f64>)>,
}

#[derive(Debug, Clone)]
pub struct ControlLaw {
    pub kind: LawKind,
    pub k: DMatrix<f64>,
    pub feedforward: Feedforward,
    pub solution: Arc<RiccatiSolution>,
    pub gramian: Option<GramianResult>,
}

impl ControlLaw {
    fn new(kind: LawKind, sol: &Arc<RiccatiSolution>, feedforward: Feedforward, gramian: Option<GramianResult>) -> Self {
        Self {
            kind,
            k: sol.k.clone(),
            feedforward,
            solution: Arc::clone(sol),
            gramian,
        }
    }

    /// The state `K` multiplies: `v_h` for dyadic laws, `v = v_p + v_h`
    /// otherwise.
    pub fn feedback_state(&self, input: &LawInput) -> DVector<f64> {
        if self.kind.is_dyadic() {
            input.homogeneous.clone()
        } else {
            input.particular + input.homogeneous
        }
    }

    /// The tracking component `u_R` (the input minus its state feedback).
    pub fn tracking_component(&self, input: &LawInput) -> Result<DVector<f64>> {
        let sol = &self.solution;
        let m = self.k.nrows();
        match &self.feedforward {
            Feedforward::None => Ok(DVector::zeros(m)),
            Feedforward::Constant(c) => Ok(c.clone()),
            Feedforward::Particular { gain, offset } => {
                check_len(input.particular, gain.ncols())?;
                Ok(offset - gain * input.particular)
            }
            Feedforward::Adjoint { q } => Ok(-(&sol.r_inv * sol.system.b().transpose() * q.at(input.t))),
            Feedforward::StateDependent { offset, gain, plant } => {
                let v = input.particular + input.homogeneous;
                Ok(offset + gain * plant.eval_nonlinearity(&v)?)
            }
            Feedforward::Compensator(h) => {
                let (p, sigma) = input.compensator.ok_or_else(|| {
                    Error::Composition("compensator law evaluated without compensator state".into())
                })?;
                Ok(&sol.r_inv * h.output(p, sigma)?)
            }
        }
    }

    /// `u = −K·(feedback state) + u_R`.
    pub fn evaluate(&self, input: &LawInput) -> Result<DVector<f64>> {
        let n = self.k.ncols();
        check_len(input.particular, n)?;
        check_len(input.homogeneous, n)?;
        Ok(-(&self.k * self.feedback_state(input)) + self.tracking_component(input)?)
    }

    /// Second algebraic form of the pure-form laws:
    /// `−Kv + R⁻¹Bᵀ(Π − W_o)v_p + offset`, with `v = v_p + v_h`.
    pub fn evaluate_combined(&self, v: &DVector<f64>, particular: &DVector<f64>) -> Result<DVector<f64>> {
        let sol = &self.solution;
        match (&self.feedforward, &self.gramian) {
            (Feedforward::Particular { offset, .. }, Some(g)) => {
                check_len(v, self.k.ncols())?;
                check_len(particular, self.k.ncols())?;
                let rb = &sol.r_inv * sol.system.b().transpose();
                Ok(-(&self.k * v) + rb * (&sol.pi - &g.w) * particular + offset)
            }
            _ => Err(Error::Composition(format!(
                "combined form is defined for pure-form laws, not {}",
                self.kind.name()
            ))),
        }
    }
}

fn check_len(v: &DVector<f64>, n: usize) -> Result<()> {
    if v.len() == n {
        Ok(())
    } else {
        Err(Error::Composition(format!("vector of length {} where {n} expected", v.len())))
    }
}

fn check_reference(sol: &RiccatiSolution, r: &DVector<f64>) -> Result<()> {
    if r.len() != sol.system.p() {
        return Err(Error::Composition(format!(
            "reference of length {} for {} outputs",
            r.len(),
            sol.system.p()
        )));
    }
    Ok(())
}

/// `(A_mᵀ)⁻¹`.
pub fn adjoint_generator_inverse(sol: &RiccatiSolution) -> Result<DMatrix<f64>> {
    linalg::ensure_hurwitz(&sol.a_m)?;
    sol.a_m
        .transpose()
        .try_inverse()
        .ok_or(Error::InvalidGenerator { abscissa: 0.0 })
}

/// `−R⁻¹Bᵀ(A_mᵀ)⁻¹Cᵀ r`.
fn reference_feedforward(sol: &RiccatiSolution, r: &DVector<f64>) -> Result<DVector<f64>> {
    check_reference(sol, r)?;
    let inv = adjoint_generator_inverse(sol)?;
    Ok(-(&sol.r_inv * sol.system.b().transpose() * inv * sol.system.c().transpose() * r))
}

pub fn lqr_law(sol: &Arc<RiccatiSolution>) -> ControlLaw {
    ControlLaw::new(LawKind::Lqr, sol, Feedforward::None, None)
}

pub fn lqt_law(sol: &Arc<RiccatiSolution>, r: &DVector<f64>) -> Result<ControlLaw> {
    let ff = reference_feedforward(sol, r)?;
    Ok(ControlLaw::new(LawKind::Lqt, sol, Feedforward::Constant(ff), None))
}

fn check_gramian(sol: &RiccatiSolution, w: &GramianResult) -> Result<()> {
    let n = sol.system.n();
    if w.w.shape() != (n, n) {
        return Err(Error::Composition(format!("Gramian is {:?}, expected {n}x{n}", w.w.shape())));
    }
    Ok(())
}

pub fn pure_form_regulator(sol: &Arc<RiccatiSolution>, w: &GramianResult) -> Result<ControlLaw> {
    check_gramian(sol, w)?;
    let gain = &sol.r_inv * sol.system.b().transpose() * &w.w;
    let offset = DVector::zeros(sol.system.m());
    Ok(ControlLaw::new(
        LawKind::PureFormRegulator,
        sol,
        Feedforward::Particular { gain, offset },
        Some(w.clone()),
    ))
}

pub fn pure_form_tracker(sol: &Arc<RiccatiSolution>, w: &GramianResult, r: &DVector<f64>) -> Result<ControlLaw> {
    check_gramian(sol, w)?;
    let gain = &sol.r_inv * sol.system.b().transpose() * &w.w;
    let offset = reference_feedforward(sol, r)?;
    Ok(ControlLaw::new(
        LawKind::PureFormTracker,
        sol,
        Feedforward::Particular { gain, offset },
        Some(w.clone()),
    ))
}

/// The non-causal pure-form tracker: `u = −K v_h − R⁻¹Bᵀ q(t)` with `q`
/// from [`solve_q_backward`].
pub fn pure_form_from_adjoint(sol: &Arc<RiccatiSolution>, q: SignalTimeline) -> Result<ControlLaw> {
    if q.dim() != sol.system.n() {
        return Err(Error::Composition("adjoint signal dimension differs from the state".into()));
    }
    Ok(ControlLaw::new(LawKind::PureFormTracker, sol, Feedforward::Adjoint { q }, None))
}

/// `u = −Kv − R⁻¹Bᵀ(A_mᵀ)⁻¹Cᵀr + R⁻¹Bᵀ(A_mᵀ)⁻¹Π f(v)`.
pub fn sdre_law(sol: &Arc<RiccatiSolution>, plant: &Arc<SemilinearPlant>, r: &DVector<f64>) -> Result<ControlLaw> {
    if plant.n() != sol.system.n() {
        return Err(Error::Composition("plant and Riccati solution differ in state dimension".into()));
    }
    let offset = reference_feedforward(sol, r)?;
    let inv = adjoint_generator_inverse(sol)?;
    let gain = &sol.r_inv * sol.system.b().transpose() * inv * &sol.pi;
    Ok(ControlLaw::new(
        LawKind::Sdre,
        sol,
        Feedforward::StateDependent {
            offset,
            gain,
            plant: Arc::clone(plant),
        },
        None,
    ))
}

/// `u = −K v + R⁻¹(H_C p + D_H σ)`.
pub fn compensator_law(sol: &Arc<RiccatiSolution>, approximant: &Arc<NehariApproximant>) -> Result<ControlLaw> {
    if approximant.inputs() != sol.system.p() || approximant.outputs() != sol.system.m() {
        return Err(Error::Composition(format!(
            "compensator maps {} -> {}, closed loop needs {} -> {}",
            approximant.inputs(),
            approximant.outputs(),
            sol.system.p(),
            sol.system.m()
        )));
    }
    Ok(ControlLaw::new(
        LawKind::DynamicCompensator,
        sol,
        Feedforward::Compensator(Arc::clone(approximant)),
        None,
    ))
}

/// Backward RK4 solve of `q̇ = −A_mᵀq + Cᵀσ`, `q(T) = 0`, on the grid of
/// `sigma`. The first argument is the closed-loop generator.
pub fn adjoint_backward(a_m: &DMatrix<f64>, c: &DMatrix<f64>, sigma: &SignalTimeline, horizon: f64) -> Result<SignalTimeline> {
    if !sigma.covers(horizon) {
        return Err(Error::Domain(format!(
            "sigma ends at {} but the horizon is {horizon}",
            sigma.horizon()
        )));
    }
    if sigma.dim() != c.nrows() {
        return Err(Error::Domain(format!(
            "sigma has dimension {}, output has {}",
            sigma.dim(),
            c.nrows()
        )));
    }
    let n = a_m.nrows();
    let a_t = a_m.transpose();
    let c_t = c.transpose();
    let times = sigma.times().to_vec();
    let values = sigma.values();
    let mut out = vec![DVector::zeros(n); times.len()];
    for k in (0..times.len() - 1).rev() {
        let (t0, t1) = (times[k], times[k + 1]);
        let (s0, s1) = (&values[k], &values[k + 1]);
        let mut rhs = |t: f64, q: &DVector<f64>| {
            let w = (t - t0) / (t1 - t0);
            let s = s0 * (1.0 - w) + s1 * w;
            -(&a_t * q) + &c_t * s
        };
        out[k] = ode::rk4_step(&mut rhs, t1, &out[k + 1], t0 - t1);
    }
    SignalTimeline::new(times, out)
}

/// The non-causal oracle for the adjoint `q(t)` of the tracking problem.
pub fn solve_q_backward(sol: &RiccatiSolution, sigma: &SignalTimeline, horizon: f64) -> Result<SignalTimeline> {
    adjoint_backward(&sol.a_m, sol.system.c(), sigma, horizon)
}

/// How two laws are compared on a shared state sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GapMode {
    /// `u₁ − u₂`.
    FullLaw,
    /// `u_{R,1} − u_{R,2}`: the inputs with each law's own state feedback
    /// removed.
    TrackingComponent,
}

/// Samples of a trajectory on which laws are compared.
#[derive(Debug, Clone, Copy)]
pub struct StateSamples<'a> {
    pub times: &'a [f64],
    pub particular: &'a [DVector<f64>],
    pub homogeneous: &'a [DVector<f64>],
    pub compensator: Option<(&'a [DVector<f64>], &'a [DVector<f64>])>,
}

#[derive(Debug, Clone)]
pub struct LawGapReport {
    pub times: Vec<f64>,
    pub gap: Vec<DVector<f64>>,
    pub gap_norm: Vec<f64>,
    /// `−slope` of a least-squares line through `ln‖gap‖` on `[0.1T, 0.9T]`;
    /// `None` when fewer than two samples exceed the floor.
    pub fitted_decay_rate: Option<f64>,
    pub sup_gap: f64,
}

const GAP_FLOOR: f64 = 1e-12;

impl LawGapReport {
    /// Gap vector at the sample nearest to `t`.
    pub fn gap_at(&self, t: f64) -> &DVector<f64> {
        let k = self
            .times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
            .map(|(k, _)| k)
            .unwrap_or(0);
        &self.gap[k]
    }
}

/// Evaluates both laws on the same state samples and fits an exponential
/// decay rate to the gap.
pub fn law_gap(law1: &ControlLaw, law2: &ControlLaw, samples: &StateSamples, mode: GapMode) -> Result<LawGapReport> {
    let n = samples.times.len();
    if samples.particular.len() != n || samples.homogeneous.len() != n {
        return Err(Error::Composition("state samples of unequal length".into()));
    }
    let mut gap = Vec::with_capacity(n);
    for k in 0..n {
        let input = LawInput {
            t: samples.times[k],
            particular: &samples.particular[k],
            homogeneous: &samples.homogeneous[k],
            compensator: samples.compensator.map(|(p, s)| (&p[k], &s[k])),
        };
        let d = match mode {
            GapMode::FullLaw => law1.evaluate(&input)? - law2.evaluate(&input)?,
            GapMode::TrackingComponent => law1.tracking_component(&input)? - law2.tracking_component(&input)?,
        };
        gap.push(d);
    }
    let gap_norm: Vec<f64> = gap.iter().map(|g| g.norm()).collect();
    let sup_gap = gap_norm.iter().copied().fold(0.0, f64::max);
    let horizon = samples.times.last().copied().unwrap_or(0.0);
    let fitted_decay_rate = fit_decay_rate(samples.times, &gap_norm, 0.1 * horizon, 0.9 * horizon);
    Ok(LawGapReport {
        times: samples.times.to_vec(),
        gap,
        gap_norm,
        fitted_decay_rate,
        sup_gap,
    })
}

/// Ordinary least squares of `ln g` against `t` over `[lo, hi]`, skipping
/// samples at or below the 1e-12 floor. Returns the negated slope.
pub fn fit_decay_rate(times: &[f64], values: &[f64], lo: f64, hi: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(&t, &g)| t >= lo && t <= hi && g > GAP_FLOOR)
        .map(|(&t, &g)| (t, g.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(-sxy / sxx)
}

/// `∫₀^∞ e^{A t} z dt`, truncated where the decay bound of `A` falls below
/// 1e-14 of `‖z‖`.
pub fn semigroup_integral(a: &DMatrix<f64>, z: &DVector<f64>) -> Result<DVector<f64>> {
    let cert = riccati::decay_certificate(a)?;
    let t_star = cert.truncation_time(1e-14);
    Ok(quadrature::integrate(
        |t| linalg::expm(a, t) * z,
        0.0,
        t_star,
        64,
        1e-13 * (1.0 + z.norm()),
        1e-13,
    ))
}

/// Steady-state gap `u_R − u_{R,sdre}` between the pure-form tracking term
/// and the SDRE tracking term for a constant nonlinearity value:
/// `−R⁻¹Bᵀ(L + (A_mᵀ)⁻¹Π) f`, where `L f = ∫₀^∞ e^{A_mᵀs} CᵀC
/// (∫₀^∞ e^{A_mτ} f dτ) ds` is evaluated by quadrature.
pub fn sdre_gap_asymptote(sol: &RiccatiSolution, f_value: &DVector<f64>) -> Result<DVector<f64>> {
    let n = sol.system.n();
    check_len(f_value, n)?;
    linalg::ensure_hurwitz(&sol.a_m)?;
    if f_value.iter().all(|&x| x == 0.0) {
        return Ok(DVector::zeros(sol.system.m()));
    }
    let c = sol.system.c();
    let inner = semigroup_integral(&sol.a_m, f_value)?;
    let l_f = semigroup_integral(&sol.a_m.transpose(), &(c.transpose() * c * inner))?;
    let inv = adjoint_generator_inverse(sol)?;
    Ok(-(&sol.r_inv * sol.system.b().transpose() * (l_f + inv * &sol.pi * f_value)))
}
