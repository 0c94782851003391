//! Closed-loop simulation, trajectory records and cost accounting.

use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adaptive::{self, AdaptationConfig, ObserverState};
use crate::error::{Error, Result};
use crate::linalg;
use crate::linsys::{SemilinearPlant, StateSpace};
use crate::nehari::{self, NehariApproximant};
use crate::ode;
use crate::riccati::{self, RiccatiSolution};
use crate::signal::{trapezoid, uniform_grid, SignalTimeline};
use crate::synthesis::{self, ControlLaw, Feedforward, LawInput, StateSamples};

/// What computes the plant input.
#[derive(Debug, Clone)]
pub enum Controller {
    Law(ControlLaw),
    /// `u = −K' v` for an arbitrary gain.
    StateFeedback(DMatrix<f64>),
}

impl Controller {
    fn compensator(&self) -> Option<&Arc<NehariApproximant>> {
        match self {
            Controller::Law(ControlLaw {
                feedforward: Feedforward::Compensator(h),
                ..
            }) => Some(h),
            _ => None,
        }
    }
}

/// Initial observer states.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum ObserverInit {
    /// `v̂_p(0) = v̂_h(0) = 0`.
    #[default]
    Zero,
    /// `v̂_h(0) = v(0)`, `v̂_p(0) = 0`.
    Homogeneous,
    /// `v̂_p(0) = v(0)`, `v̂_h(0) = 0`.
    Particular,
    Explicit { v_hat_p: DVector<f64>, v_hat_h: DVector<f64> },
}

#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub horizon: f64,
    pub dt: f64,
    pub plant: Arc<SemilinearPlant>,
    pub solution: Arc<RiccatiSolution>,
    pub controller: Controller,
    pub reference: SignalTimeline,
    pub adaptation: Option<AdaptationConfig>,
    pub v0: DVector<f64>,
    pub observer_init: ObserverInit,
    /// Initial parameter estimate; zero when adapting, the true value
    /// otherwise.
    pub alpha_hat0: Option<DVector<f64>>,
    pub seed: u64,
}

/// `T = 50/β` from the decay certificate of `A_m`.
pub fn default_horizon(sol: &RiccatiSolution) -> Result<f64> {
    Ok(50.0 / riccati::decay_certificate(&sol.a_m)?.beta)
}

impl SimulationConfig {
    /// A non-adaptive run from `v0` with zero observers and the default
    /// horizon.
    pub fn new(
        plant: Arc<SemilinearPlant>,
        solution: Arc<RiccatiSolution>,
        controller: Controller,
        r: DVector<f64>,
        v0: DVector<f64>,
        dt: f64,
    ) -> Result<Self> {
        let horizon = default_horizon(&solution)?;
        let reference = SignalTimeline::constant(vec![0.0, horizon], r)?;
        Ok(Self {
            horizon,
            dt,
            plant,
            solution,
            controller,
            reference,
            adaptation: None,
            v0,
            observer_init: ObserverInit::Zero,
            alpha_hat0: None,
            seed: 0,
        })
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Precondition(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.horizon >= 10.0 * self.dt) || !self.horizon.is_finite() {
            return Err(Error::Precondition(format!(
                "horizon {} must be at least 10 steps of {}",
                self.horizon, self.dt
            )));
        }
        if self.reference.horizon() < self.horizon * (1.0 - 1e-9) {
            return Err(Error::Domain(format!(
                "reference ends at {} before the horizon {}",
                self.reference.horizon(),
                self.horizon
            )));
        }
        let (n, p) = (self.plant.n(), self.plant.linear.p());
        if self.solution.system.n() != n || self.solution.system.p() != p || self.solution.system.m() != self.plant.linear.m() {
            return Err(Error::Composition("plant and Riccati solution dimensions differ".into()));
        }
        if self.reference.dim() != p {
            return Err(Error::Composition(format!("reference dimension {} for {p} outputs", self.reference.dim())));
        }
        if self.v0.len() != n {
            return Err(Error::Dimension(format!("initial state of length {} for {n} states", self.v0.len())));
        }
        if let Controller::StateFeedback(k) = &self.controller {
            if k.shape() != (self.plant.linear.m(), n) {
                return Err(Error::Dimension(format!("feedback gain is {:?}", k.shape())));
            }
        }
        if let Some(a) = &self.adaptation {
            if a.p.nrows() != n {
                return Err(Error::Dimension("adaptation weight P has the wrong size".into()));
            }
        }
        if let Some(a0) = &self.alpha_hat0 {
            if a0.len() != n {
                return Err(Error::Dimension("initial estimate has the wrong length".into()));
            }
        }
        Ok(())
    }

    fn initial_observers(&self) -> ObserverState {
        let n = self.plant.n();
        let (v_hat_p, v_hat_h) = match &self.observer_init {
            ObserverInit::Zero => (DVector::zeros(n), DVector::zeros(n)),
            ObserverInit::Homogeneous => (DVector::zeros(n), self.v0.clone()),
            ObserverInit::Particular => (self.v0.clone(), DVector::zeros(n)),
            ObserverInit::Explicit { v_hat_p, v_hat_h } => (v_hat_p.clone(), v_hat_h.clone()),
        };
        let alpha_hat = match (&self.alpha_hat0, &self.adaptation) {
            (Some(a), _) => a.clone(),
            (None, Some(_)) => DVector::zeros(n),
            (None, None) => self.plant.alpha().clone(),
        };
        ObserverState {
            v_hat_p,
            v_hat_h,
            alpha_hat,
        }
    }
}

/// Sampled closed-loop signals on a uniform grid.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub v: Vec<DVector<f64>>,
    pub v_hat_p: Vec<DVector<f64>>,
    pub v_hat_h: Vec<DVector<f64>>,
    pub alpha_hat: Vec<DVector<f64>>,
    pub u: Vec<DVector<f64>>,
    pub u_r: Vec<DVector<f64>>,
    pub y: Vec<DVector<f64>>,
    pub y_hat_p: Vec<DVector<f64>>,
    pub y_hat_h: Vec<DVector<f64>>,
    pub sigma: Vec<DVector<f64>>,
    pub p: Vec<DVector<f64>>,
    pub r: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `ṽ = v̂_p + v̂_h − v` at sample `k`.
    pub fn observer_error(&self, k: usize) -> DVector<f64> {
        &self.v_hat_p[k] + &self.v_hat_h[k] - &self.v[k]
    }

    /// `sup ‖ṽ(t)‖` over samples with `t ∈ [lo, hi]`.
    pub fn sup_observer_error(&self, lo: f64, hi: f64) -> f64 {
        (0..self.len())
            .filter(|&k| self.times[k] >= lo && self.times[k] <= hi)
            .map(|k| self.observer_error(k).norm())
            .fold(0.0, f64::max)
    }

    /// `y − r` at the last sample.
    pub fn final_tracking_error(&self) -> Option<DVector<f64>> {
        Some(self.y.last()? - self.r.last()?)
    }

    /// Largest `|α̂_j|` over the run.
    pub fn sup_alpha_hat(&self) -> f64 {
        self.alpha_hat.iter().map(linalg::vector_inf_norm).fold(0.0, f64::max)
    }

    /// Samples for law comparisons: particular `v̂_p`, homogeneous `v − v̂_p`.
    pub fn law_samples(&self) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
        let hom = self.v.iter().zip(&self.v_hat_p).map(|(v, p)| v - p).collect();
        (self.v_hat_p.clone(), hom)
    }

    pub fn signal(&self, values: &[DVector<f64>]) -> Result<SignalTimeline> {
        SignalTimeline::new(self.times.clone(), values.to_vec())
    }

    /// Delimiter-separated export with a header row and 17 significant
    /// digits per value.
    pub fn to_csv(&self) -> String {
        let e: Vec<DVector<f64>> = self.y.iter().zip(&self.r).map(|(y, r)| y - r).collect();
        let groups: [(&str, &Vec<DVector<f64>>); 13] = [
            ("v", &self.v),
            ("v_hat_p", &self.v_hat_p),
            ("v_hat_h", &self.v_hat_h),
            ("alpha_hat", &self.alpha_hat),
            ("u", &self.u),
            ("u_r", &self.u_r),
            ("y", &self.y),
            ("y_hat_p", &self.y_hat_p),
            ("y_hat_h", &self.y_hat_h),
            ("sigma", &self.sigma),
            ("p", &self.p),
            ("r", &self.r),
            ("e", &e),
        ];
        let mut out = String::from("t");
        for (name, values) in &groups {
            let width = values.first().map_or(0, |v| v.len());
            for i in 0..width {
                let _ = write!(out, ",{name}[{i}]");
            }
        }
        out.push('\n');
        for k in 0..self.len() {
            let _ = write!(out, "{:.16e}", self.times[k]);
            for (_, values) in &groups {
                for x in values[k].iter() {
                    let _ = write!(out, ",{x:.16e}");
                }
            }
            out.push('\n');
        }
        out
    }
}

struct Layout {
    n: usize,
    np: usize,
}

impl Layout {
    fn split(&self, z: &DVector<f64>) -> (DVector<f64>, DVector<f64>, DVector<f64>, DVector<f64>, DVector<f64>) {
        let n = self.n;
        (
            z.rows(0, n).into_owned(),
            z.rows(n, n).into_owned(),
            z.rows(2 * n, n).into_owned(),
            z.rows(3 * n, n).into_owned(),
            z.rows(4 * n, self.np).into_owned(),
        )
    }
}

struct Sample {
    u: DVector<f64>,
    u_r: DVector<f64>,
    sigma: DVector<f64>,
    y_hat_p: DVector<f64>,
    derivative: DVector<f64>,
}

fn evaluate(cfg: &SimulationConfig, layout: &Layout, t: f64, z: &DVector<f64>) -> Result<Sample> {
    let sol = &cfg.solution;
    let plant = &cfg.plant;
    let (v, vhp, vhh, ahat, p) = layout.split(z);
    let c = sol.system.c();
    let y_hat_p = c * &vhp;
    let sigma = cfg.reference.at(t) - &y_hat_p;
    let hom = &v - &vhp;
    let u = match &cfg.controller {
        Controller::Law(law) => law.evaluate(&LawInput {
            t,
            particular: &vhp,
            homogeneous: &hom,
            compensator: Some((&p, &sigma)),
        })?,
        Controller::StateFeedback(k) => -(k * &v),
    };
    let u_r = &u + &sol.k * &v;
    let phi = plant.phi(&v)?;
    let n = layout.n;
    let mut d = DVector::zeros(z.len());
    let a = plant.linear.a();
    let b = plant.linear.b();
    d.rows_mut(0, n).copy_from(&(a * &v + b * &u + plant.alpha() * phi));
    let obs = ObserverState {
        v_hat_p: vhp,
        v_hat_h: vhh,
        alpha_hat: ahat,
    };
    let od = match &cfg.adaptation {
        Some(ad) => adaptive::observer_derivative(&obs, &v, phi, &u_r, ad, sol, plant.nu_alpha),
        None => ObserverState {
            v_hat_p: &sol.a_m * &obs.v_hat_p + &obs.alpha_hat * phi,
            v_hat_h: &sol.a_m * &obs.v_hat_h + b * &u_r,
            alpha_hat: DVector::zeros(n),
        },
    };
    d.rows_mut(n, n).copy_from(&od.v_hat_p);
    d.rows_mut(2 * n, n).copy_from(&od.v_hat_h);
    d.rows_mut(3 * n, n).copy_from(&od.alpha_hat);
    if layout.np > 0 {
        let h = cfg.controller.compensator().expect("compensator state implies a compensator");
        d.rows_mut(4 * n, layout.np).copy_from(&h.derivative(&p, &sigma)?);
    }
    Ok(Sample {
        u,
        u_r,
        sigma,
        y_hat_p,
        derivative: d,
    })
}

fn record(traj: &mut Trajectory, cfg: &SimulationConfig, layout: &Layout, t: f64, z: &DVector<f64>, s: Sample) {
    let (v, vhp, vhh, ahat, p) = layout.split(z);
    let c = cfg.solution.system.c();
    traj.times.push(t);
    traj.r.push(cfg.reference.at(t));
    traj.y.push(c * &v);
    traj.y_hat_h.push(c * &vhh);
    traj.v.push(v);
    traj.v_hat_p.push(vhp);
    traj.v_hat_h.push(vhh);
    traj.alpha_hat.push(ahat);
    traj.p.push(p);
    traj.u.push(s.u);
    traj.u_r.push(s.u_r);
    traj.y_hat_p.push(s.y_hat_p);
    traj.sigma.push(s.sigma);
}

fn divergence_guard(z: &DVector<f64>, t: f64, k: usize) -> Result<()> {
    if z.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Divergence { time: t, sample: k })
    }
}

/// Fixed-step RK4 of the plant, observers, adaptation and compensator.
pub fn integrate_closed_loop(cfg: &SimulationConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let n = cfg.plant.n();
    let np = cfg.controller.compensator().map_or(0, |h| h.order());
    let layout = Layout { n, np };
    let obs = cfg.initial_observers();
    let mut z = DVector::zeros(4 * n + np);
    z.rows_mut(0, n).copy_from(&cfg.v0);
    z.rows_mut(n, 3 * n).copy_from(&obs.pack());
    let grid = uniform_grid(cfg.horizon, cfg.steps());
    let epsilon = cfg.adaptation.as_ref().map(|a| a.epsilon);
    if let Some(eps) = epsilon {
        adaptive::check_invariant(&obs.alpha_hat, cfg.plant.nu_alpha, eps, 0.0)?;
    }
    let mut traj = Trajectory::default();
    let mut rhs = |t: f64, z: &DVector<f64>| evaluate(cfg, &layout, t, z).map(|s| s.derivative);
    for k in 0..grid.len() {
        let t = grid[k];
        let sample = evaluate(cfg, &layout, t, &z).map_err(|e| match e {
            Error::NonlinearityEvaluation { .. } => Error::Divergence { time: t, sample: k },
            other => other,
        })?;
        record(&mut traj, cfg, &layout, t, &z, sample);
        if k + 1 == grid.len() {
            break;
        }
        let h = grid[k + 1] - t;
        z = ode::try_rk4_step(&mut rhs, t, &z, h).map_err(|e| match e {
            Error::NonlinearityEvaluation { .. } => Error::Divergence { time: t, sample: k + 1 },
            other => other,
        })?;
        divergence_guard(&z, grid[k + 1], k + 1)?;
        if let Some(eps) = epsilon {
            adaptive::check_invariant(&z.rows(3 * n, n).into_owned(), cfg.plant.nu_alpha, eps, grid[k + 1])?;
        }
    }
    Ok(traj)
}

/// Quadratic cost and its parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostReport {
    /// `∫ ‖y_h − σ‖² + uᵀRu dt`.
    pub j: f64,
    pub tracking: f64,
    pub control: f64,
    pub sigma_l2: f64,
    /// `‖y_h − σ‖_{L2} + ‖R^{1/2}u‖_{L2}`.
    pub j_norm: f64,
    pub bound: Option<f64>,
}

impl CostReport {
    fn from_parts(tracking: f64, control: f64, sigma_l2: f64) -> Self {
        Self {
            j: tracking + control,
            tracking,
            control,
            sigma_l2,
            j_norm: tracking.sqrt() + control.sqrt(),
            bound: None,
        }
    }
}

/// Trapezoidal cost with `ŷ_h` as the homogeneous output.
pub fn evaluate_cost(traj: &Trajectory, r: &DMatrix<f64>) -> Result<CostReport> {
    if traj.u.first().is_some_and(|u| r.shape() != (u.len(), u.len())) {
        return Err(Error::Dimension(format!("R is {:?}", r.shape())));
    }
    Ok(cost_from_samples(&traj.times, &traj.y_hat_h, &traj.sigma, &traj.u, r))
}

fn cost_from_samples(
    times: &[f64],
    y_h: &[DVector<f64>],
    sigma: &[DVector<f64>],
    u: &[DVector<f64>],
    r: &DMatrix<f64>,
) -> CostReport {
    let tracking = trapezoid(times, |k| (&y_h[k] - &sigma[k]).norm_squared());
    let control = trapezoid(times, |k| u[k].dot(&(r * &u[k])));
    let sigma_l2 = trapezoid(times, |k| sigma[k].norm_squared()).sqrt();
    CostReport::from_parts(tracking, control, sigma_l2)
}

/// Exact response of `ẋ = Ax + Bw` to a piecewise-linear input on its
/// grid (first-order hold).
pub fn foh_response(a: &DMatrix<f64>, b: &DMatrix<f64>, x0: &DVector<f64>, w: &SignalTimeline) -> Result<Vec<DVector<f64>>> {
    let (n, m) = (a.nrows(), b.ncols());
    if w.dim() != m || x0.len() != n {
        return Err(Error::Domain("input or initial state has the wrong dimension".into()));
    }
    let times = w.times();
    let values = w.values();
    let mut out = Vec::with_capacity(times.len());
    out.push(x0.clone());
    let mut cache: Option<(f64, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> = None;
    for k in 0..times.len() - 1 {
        let h = times[k + 1] - times[k];
        let stale = cache.as_ref().is_none_or(|c| c.0 != h);
        if stale {
            let size = n + 2 * m;
            let mut z = DMatrix::zeros(size, size);
            z.view_mut((0, 0), (n, n)).copy_from(a);
            z.view_mut((0, n), (n, m)).copy_from(b);
            z.view_mut((n, n + m), (m, m)).fill_with_identity();
            let e = linalg::expm(&z, h);
            cache = Some((
                h,
                e.view((0, 0), (n, n)).into_owned(),
                e.view((0, n), (n, m)).into_owned(),
                e.view((0, n + m), (n, m)).into_owned(),
            ));
        }
        let (_, phi, g0, g1) = cache.as_ref().expect("filled above");
        let slope = (&values[k + 1] - &values[k]) / h;
        let next = phi * &out[k] + g0 * &values[k] + g1 * slope;
        out.push(next);
    }
    Ok(out)
}

/// `(G_m* σ)(t) = Bᵀ∫_t^T e^{A_mᵀ(s−t)}Cᵀσ(s) ds`, by a reversed-time
/// first-order-hold solve.
pub fn adjoint_convolution(g_m: &StateSpace, sigma: &SignalTimeline) -> Result<Vec<DVector<f64>>> {
    let horizon = sigma.horizon();
    let rev_times: Vec<f64> = sigma.times().iter().rev().map(|t| horizon - t).collect();
    let rev_values: Vec<DVector<f64>> = sigma.values().iter().rev().cloned().collect();
    let rev = SignalTimeline::new(rev_times, rev_values)?;
    let n = g_m.n();
    let x = foh_response(&g_m.a().transpose(), &g_m.c().transpose(), &DVector::zeros(n), &rev)?;
    Ok(x.iter().rev().map(|x| g_m.b().transpose() * x).collect())
}

/// `(G_m w)(t) = C∫₀^t e^{A_m(t−s)}B w(s) ds`.
pub fn forward_convolution(g_m: &StateSpace, w: &SignalTimeline) -> Result<Vec<DVector<f64>>> {
    let x = foh_response(g_m.a(), g_m.b(), &DVector::zeros(g_m.n()), w)?;
    Ok(x.iter().map(|x| g_m.c() * x).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostIdentity {
    pub lhs: f64,
    pub rhs: f64,
    pub diff: f64,
}

fn check_sigma(g_m: &StateSpace, sigma: &SignalTimeline, v_h0: &DVector<f64>) -> Result<()> {
    if sigma.dim() != g_m.p() || v_h0.len() != g_m.n() {
        return Err(Error::Domain(format!(
            "sigma of dimension {} and v_h0 of length {} for a {}-output, {}-state loop",
            sigma.dim(),
            v_h0.len(),
            g_m.p(),
            g_m.n()
        )));
    }
    if sigma.len() < 2 {
        return Err(Error::Domain("sigma needs at least two samples".into()));
    }
    Ok(())
}

/// RK4 run of the homogeneous half `v̇_h = A_m v_h + B u_R` with the given
/// tracking input, returning `(v_h samples, u_R samples)`.
fn homogeneous_run<F>(a_m: &DMatrix<f64>, b: &DMatrix<f64>, times: &[f64], v_h0: &DVector<f64>, mut u_r: F) -> Result<(Vec<DVector<f64>>, Vec<DVector<f64>>)>
where
    F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    let mut vh = vec![v_h0.clone()];
    let mut ur = vec![u_r(times[0], v_h0)?];
    for k in 0..times.len() - 1 {
        let h = times[k + 1] - times[k];
        let mut rhs = |t: f64, x: &DVector<f64>| -> Result<DVector<f64>> { Ok(a_m * x + b * u_r(t, x)?) };
        let next = ode::try_rk4_step(&mut rhs, times[k], &vh[k], h)?;
        divergence_guard(&next, times[k + 1], k + 1)?;
        ur.push(u_r(times[k + 1], &next)?);
        vh.push(next);
    }
    Ok((vh, ur))
}

/// Checks the decomposition of the pure-form tracking cost
/// `∫‖y_h − σ‖² + u_RᵀRu_R` with `u_R = R⁻¹G_m*σ`:
/// `⟨σ,(𝒫*𝒫 + I − 𝒫)σ⟩ + v_h0ᵀW_o v_h0 − 2⟨Ce^{A_m t}v_h0, (I − 𝒫)σ⟩`,
/// `𝒫 = G_m R⁻¹ G_m*`.
pub fn verify_cost_identity(g_m: &StateSpace, r: &DMatrix<f64>, sigma: &SignalTimeline, v_h0: &DVector<f64>) -> Result<CostIdentity> {
    check_sigma(g_m, sigma, v_h0)?;
    let r_inv = riccati::checked_weight_inverse(r, g_m.m())?;
    let times = sigma.times();
    let horizon = sigma.horizon();
    let q = synthesis::adjoint_backward(g_m.a(), g_m.c(), sigma, horizon)?;
    let b = g_m.b();
    let (vh, ur) = homogeneous_run(g_m.a(), b, times, v_h0, |t, _| Ok(-(&r_inv * b.transpose() * q.at(t))))?;
    let lhs = cost_from_samples(
        times,
        &vh.iter().map(|x| g_m.c() * x).collect::<Vec<_>>(),
        sigma.values(),
        &ur,
        r,
    )
    .j;

    let adj = adjoint_convolution(g_m, sigma)?;
    let weighted = SignalTimeline::new(times.to_vec(), adj.iter().map(|w| &r_inv * w).collect())?;
    let p_sigma = SignalTimeline::new(times.to_vec(), forward_convolution(g_m, &weighted)?)?;
    let residual = SignalTimeline::new(
        times.to_vec(),
        sigma.values().iter().zip(p_sigma.values()).map(|(s, ps)| s - ps).collect(),
    )?;
    let psi = SignalTimeline::from_fn(times.to_vec(), |t| g_m.c() * linalg::expm(g_m.a(), t) * v_h0)?;
    let w_o = riccati::observability_gramian(g_m.a(), g_m.c())?.w;
    let rhs = sigma.inner(sigma)? - sigma.inner(&p_sigma)? + p_sigma.inner(&p_sigma)? + v_h0.dot(&(&w_o * v_h0))
        - 2.0 * psi.inner(&residual)?;
    Ok(CostIdentity {
        lhs,
        rhs,
        diff: (lhs - rhs).abs(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostGapReport {
    pub j1: f64,
    pub j2: f64,
    pub gap: f64,
    pub bound: f64,
    pub s: f64,
    pub sigma_l2: f64,
}

/// Norm-form cost `‖y_h − σ‖ + ‖R^{1/2}u‖` of the homogeneous half with
/// `u = u_R − K v_h`.
fn norm_cost(sol: &RiccatiSolution, times: &[f64], sigma: &[DVector<f64>], vh: &[DVector<f64>], ur: &[DVector<f64>]) -> f64 {
    let c = sol.system.c();
    let y: Vec<DVector<f64>> = vh.iter().map(|x| c * x).collect();
    let u: Vec<DVector<f64>> = ur.iter().zip(vh).map(|(ur, x)| ur - &sol.k * x).collect();
    cost_from_samples(times, &y, sigma, &u, &sol.r).j_norm
}

/// Compares the pure-form cost `J₁` (non-causal adjoint) with the cost `J₂`
/// of the causal compensator for an exogenous `σ`, and reports the bound
/// `S‖σ‖_{L2}` next to the gap without judging it.
pub fn cost_gap(sol: &RiccatiSolution, approximant: &NehariApproximant, sigma: &SignalTimeline, v_h0: &DVector<f64>) -> Result<CostGapReport> {
    let g_m = sol.closed_loop();
    check_sigma(&g_m, sigma, v_h0)?;
    if approximant.inputs() != g_m.p() || approximant.outputs() != g_m.m() {
        return Err(Error::Composition("compensator dimensions do not match the loop".into()));
    }
    let times = sigma.times();
    let b = g_m.b();
    let r_inv = &sol.r_inv;

    let q = synthesis::solve_q_backward(sol, sigma, sigma.horizon())?;
    let (vh1, ur1) = homogeneous_run(&sol.a_m, b, times, v_h0, |t, _| Ok(-(r_inv * b.transpose() * q.at(t))))?;
    let j1 = norm_cost(sol, times, sigma.values(), &vh1, &ur1);

    let (n, np) = (g_m.n(), approximant.order());
    let mut z = DVector::zeros(n + np);
    z.rows_mut(0, n).copy_from(v_h0);
    let ur_of = |t: f64, z: &DVector<f64>| -> Result<DVector<f64>> {
        Ok(r_inv * approximant.output(&z.rows(n, np).into_owned(), &sigma.at(t))?)
    };
    let mut vh2 = vec![v_h0.clone()];
    let mut ur2 = vec![ur_of(0.0, &z)?];
    for k in 0..times.len() - 1 {
        let mut rhs = |t: f64, z: &DVector<f64>| -> Result<DVector<f64>> {
            let s = sigma.at(t);
            let p = z.rows(n, np).into_owned();
            let mut d = DVector::zeros(n + np);
            d.rows_mut(0, n).copy_from(&(&sol.a_m * z.rows(0, n) + b * ur_of(t, z)?));
            d.rows_mut(n, np).copy_from(&approximant.derivative(&p, &s)?);
            Ok(d)
        };
        z = ode::try_rk4_step(&mut rhs, times[k], &z, times[k + 1] - times[k])?;
        divergence_guard(&z, times[k + 1], k + 1)?;
        vh2.push(z.rows(0, n).into_owned());
        ur2.push(ur_of(times[k + 1], &z)?);
    }
    let j2 = norm_cost(sol, times, sigma.values(), &vh2, &ur2);

    let s = nehari::suboptimality_constant(&g_m, &sol.r)?.s;
    let sigma_l2 = sigma.l2_norm();
    let bound = s * sigma_l2;
    let gap = (j2 - j1).abs();
    Ok(CostGapReport {
        j1,
        j2,
        gap,
        bound,
        s,
        sigma_l2,
    })
}

impl CostGapReport {
    /// `gap ≤ bound + 1e-6·(1 + bound)`.
    pub fn within_bound(&self) -> bool {
        self.gap <= self.bound + 1e-6 * (1.0 + self.bound)
    }
}

/// [`cost_gap`], failing with a property error when the gap exceeds the
/// bound.
pub fn cost_gap_check(sol: &RiccatiSolution, approximant: &NehariApproximant, sigma: &SignalTimeline, v_h0: &DVector<f64>) -> Result<CostGapReport> {
    let report = cost_gap(sol, approximant, sigma, v_h0)?;
    let CostGapReport { j1, j2, gap, bound, .. } = report;
    if !report.within_bound() {
        return Err(Error::PropertyFailure(format!(
            "cost gap {gap:.6e} exceeds S·‖σ‖ = {bound:.6e} (J1 = {j1:.6e}, J2 = {j2:.6e})"
        )));
    }
    Ok(report)
}

/// A seeded band-limited test signal: per component, a sum of eight
/// sinusoids with frequencies below `omega_max`, unit-scale amplitudes
/// and random phases.
pub fn band_limited_signal(times: Vec<f64>, dim: usize, omega_max: f64, seed: u64) -> Result<SignalTimeline> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tones: Vec<Vec<(f64, f64, f64)>> = (0..dim)
        .map(|_| {
            (0..8)
                .map(|_| {
                    (
                        rng.random_range(-1.0..1.0) / 8f64.sqrt(),
                        rng.random_range(0.0..omega_max),
                        rng.random_range(0.0..std::f64::consts::TAU),
                    )
                })
                .collect()
        })
        .collect();
    SignalTimeline::from_fn(times, |t| {
        DVector::from_iterator(
            dim,
            tones
                .iter()
                .map(|comp| comp.iter().map(|(a, w, ph)| a * (w * t + ph).sin()).sum::<f64>()),
        )
    })
}

/// Compares two laws on the samples of `traj`.
pub fn trajectory_law_gap(
    traj: &Trajectory,
    law1: &ControlLaw,
    law2: &ControlLaw,
    mode: synthesis::GapMode,
) -> Result<synthesis::LawGapReport> {
    let (vp, vh) = traj.law_samples();
    let samples = StateSamples {
        times: &traj.times,
        particular: &vp,
        homogeneous: &vh,
        compensator: Some((&traj.p, &traj.sigma)),
    };
    synthesis::law_gap(law1, law2, &samples, mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linsys::Basis;
    use crate::riccati::solve_care;
    use crate::synthesis::lqr_law;
    use approx::assert_relative_eq;
    use std::f64::consts::SQRT_2;

    fn scalar() -> (Arc<SemilinearPlant>, Arc<RiccatiSolution>) {
        let one = DMatrix::from_element(1, 1, 1.0);
        let sys = StateSpace::new(one.clone(), one.clone(), one.clone()).unwrap();
        let sol = Arc::new(solve_care(&sys, &one).unwrap());
        (Arc::new(SemilinearPlant::linear_only(sys)), sol)
    }

    fn v(x: f64) -> DVector<f64> {
        DVector::from_element(1, x)
    }

    #[test]
    fn equilibrium_stays_at_zero() {
        let (plant, sol) = scalar();
        let cfg = SimulationConfig::new(plant, sol.clone(), Controller::Law(lqr_law(&sol)), v(0.0), v(0.0), 1e-2).unwrap();
        let traj = integrate_closed_loop(&cfg).unwrap();
        assert!(traj.v.iter().chain(&traj.u).chain(&traj.p).all(|x| x.iter().all(|&e| e == 0.0)));
    }

    #[test]
    fn lqr_cost_matches_quadratic_form() {
        let (plant, sol) = scalar();
        let mut cfg = SimulationConfig::new(plant, sol.clone(), Controller::Law(lqr_law(&sol)), v(0.0), v(1.0), 1e-3).unwrap();
        cfg.observer_init = ObserverInit::Homogeneous;
        let traj = integrate_closed_loop(&cfg).unwrap();
        let cost = evaluate_cost(&traj, &sol.r).unwrap();
        assert_relative_eq!(cost.j, 1.0 + SQRT_2, epsilon = 1e-4);
        assert_relative_eq!(cost.tracking + cost.control, cost.j, max_relative = 1e-10);
    }

    #[test]
    fn constant_integrand_cost() {
        let times = uniform_grid(3.0, 30);
        let one = |_: &f64| v(1.0);
        let traj = Trajectory {
            u: times.iter().map(one).collect(),
            y_hat_h: times.iter().map(one).collect(),
            sigma: times.iter().map(one).collect(),
            times,
            ..Default::default()
        };
        let cost = evaluate_cost(&traj, &DMatrix::from_element(1, 1, 2.0)).unwrap();
        assert_relative_eq!(cost.j, 6.0, epsilon = 1e-12);
        assert_eq!(cost.tracking, 0.0);
    }

    #[test]
    fn config_validation() {
        let (plant, sol) = scalar();
        let mut cfg = SimulationConfig::new(plant, sol.clone(), Controller::Law(lqr_law(&sol)), v(0.0), v(0.0), 1e-2).unwrap();
        cfg.dt = 0.0;
        assert!(integrate_closed_loop(&cfg).is_err());
        cfg.dt = cfg.horizon / 5.0;
        assert!(integrate_closed_loop(&cfg).is_err());
        cfg.dt = 1e-2;
        cfg.horizon *= 2.0;
        assert!(matches!(integrate_closed_loop(&cfg), Err(Error::Domain(_))));
    }

    #[test]
    fn divergence_is_reported() {
        let one = DMatrix::from_element(1, 1, 1.0);
        let sys = StateSpace::new(one.clone(), one.clone(), one.clone()).unwrap();
        let sol = Arc::new(solve_care(&sys, &one).unwrap());
        let plant = Arc::new(SemilinearPlant::new(sys, Basis::Norm, v(0.5), 1.0, 1.0).unwrap());
        let mut cfg = SimulationConfig::new(plant, sol, Controller::StateFeedback(DMatrix::from_element(1, 1, -50.0)), v(0.0), v(1.0), 1e-2).unwrap();
        cfg.horizon = 50.0;
        cfg.reference = SignalTimeline::constant(vec![0.0, 50.0], v(0.0)).unwrap();
        assert!(matches!(integrate_closed_loop(&cfg), Err(Error::Divergence { .. })));
    }

    #[test]
    fn foh_is_exact_for_ramps() {
        // ẋ = −x + t, x(0) = 0 → x = t − 1 + e^{−t}
        let w = SignalTimeline::from_fn(uniform_grid(2.0, 4), v).unwrap();
        let x = foh_response(&-DMatrix::identity(1, 1), &DMatrix::identity(1, 1), &v(0.0), &w).unwrap();
        assert_relative_eq!(x[4][0], 1.0 + (-2f64).exp(), epsilon = 1e-13);
    }

    #[test]
    fn transient_cost_identity() {
        let (_, sol) = scalar();
        let g = sol.closed_loop();
        let zero = SignalTimeline::constant(uniform_grid(15.0, 15000), v(0.0)).unwrap();
        let id = verify_cost_identity(&g, &sol.r, &zero, &v(0.0)).unwrap();
        assert_eq!((id.lhs, id.rhs), (0.0, 0.0));
        let id = verify_cost_identity(&g, &sol.r, &zero, &v(1.3)).unwrap();
        assert_relative_eq!(id.rhs, 1.69 / (2.0 * SQRT_2), epsilon = 1e-12);
        assert!(id.diff <= 1e-4 * id.lhs);
    }

    #[test]
    fn signals_are_reproducible() {
        let a = band_limited_signal(uniform_grid(5.0, 50), 2, 3.0, 9).unwrap();
        let b = band_limited_signal(uniform_grid(5.0, 50), 2, 3.0, 9).unwrap();
        let c = band_limited_signal(uniform_grid(5.0, 50), 2, 3.0, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
