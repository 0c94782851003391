//! Plant representations: linear realizations, the scalar-basis
//! nonlinearity `f(v) = α φ(v)`, example plants and Lipschitz-type bounds.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Finite-dimensional realization `(A, B, C)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
}

impl StateSpace {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Dimension(format!("A must be square, got {:?}", a.shape())));
        }
        if b.nrows() != n {
            return Err(Error::Dimension(format!("B has {} rows, expected {n}", b.nrows())));
        }
        if c.ncols() != n {
            return Err(Error::Dimension(format!("C has {} columns, expected {n}", c.ncols())));
        }
        Ok(Self { a, b, c })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    /// State dimension.
    pub fn n(&self) -> usize {
        self.a.nrows()
    }
    /// Input dimension.
    pub fn m(&self) -> usize {
        self.b.ncols()
    }
    /// Output dimension.
    pub fn p(&self) -> usize {
        self.c.nrows()
    }

    pub fn is_stabilizable(&self) -> bool {
        linalg::pbh_stabilizable(&self.a, &self.b)
    }

    pub fn is_detectable(&self) -> bool {
        linalg::pbh_detectable(&self.a, &self.c)
    }

    /// Realization in coordinates `v = T z`: `(T⁻¹AT, T⁻¹B, CT)`.
    pub fn similarity(&self, t: &DMatrix<f64>) -> Result<Self> {
        let t_inv = t
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Precondition("similarity transform is singular".into()))?;
        Self::new(&t_inv * &self.a * t, &t_inv * &self.b, &self.c * t)
    }

    /// Transposed (dual) realization `(Aᵀ, Cᵀ, Bᵀ)`.
    pub fn transposed(&self) -> Self {
        Self {
            a: self.a.transpose(),
            b: self.c.transpose(),
            c: self.b.transpose(),
        }
    }

    /// DC gain `−C A⁻¹ B`.
    pub fn dc_gain(&self) -> Result<DMatrix<f64>> {
        let lu = self.a.clone().lu();
        let x = lu
            .solve(&self.b)
            .ok_or_else(|| Error::Precondition("A is singular; DC gain undefined".into()))?;
        Ok(-(&self.c * x))
    }
}

/// Scalar basis function `φ: ℝⁿ → ℝ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Basis {
    /// `φ ≡ 0`.
    Zero,
    /// `φ ≡ value`: a constant (exogenous) disturbance direction.
    Constant { value: f64 },
    /// `φ(v) = ‖v‖₂`.
    Norm,
    /// `φ(v) = sin(wᵀv)` for a fixed sampling functional `w`.
    Sine { weights: Vec<f64> },
}

impl Basis {
    pub fn eval(&self, v: &DVector<f64>) -> f64 {
        match self {
            Basis::Zero => 0.0,
            Basis::Constant { value } => *value,
            Basis::Norm => v.norm(),
            Basis::Sine { weights } => {
                let s: f64 = weights.iter().zip(v.iter()).map(|(w, x)| w * x).sum();
                s.sin()
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Basis::Zero) || matches!(self, Basis::Constant { value } if *value == 0.0)
    }
}

/// Semilinear plant `v̇ = Av + Bu + α φ(v)`, `y = Cv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SemilinearPlant {
    pub linear: StateSpace,
    pub basis: Basis,
    alpha: DVector<f64>,
    pub nu_alpha: f64,
    pub rho0: f64,
}

impl SemilinearPlant {
    pub fn new(linear: StateSpace, basis: Basis, alpha: DVector<f64>, nu_alpha: f64, rho0: f64) -> Result<Self> {
        if alpha.len() != linear.n() {
            return Err(Error::Dimension(format!(
                "alpha has length {}, plant has {} states",
                alpha.len(),
                linear.n()
            )));
        }
        if !(nu_alpha > 0.0) || !(rho0 > 0.0) {
            return Err(Error::Precondition("nu_alpha and rho0 must be positive".into()));
        }
        let amax = linalg::vector_inf_norm(&alpha);
        if !(amax < nu_alpha) {
            return Err(Error::Precondition(format!(
                "|alpha|_inf = {amax} must be strictly below nu_alpha = {nu_alpha}"
            )));
        }
        if let Basis::Sine { weights } = &basis {
            if weights.len() != linear.n() {
                return Err(Error::Dimension("sine basis weights must match the state dimension".into()));
            }
        }
        Ok(Self {
            linear,
            basis,
            alpha,
            nu_alpha,
            rho0,
        })
    }

    /// A plant with no nonlinearity.
    pub fn linear_only(linear: StateSpace) -> Self {
        let n = linear.n();
        Self {
            linear,
            basis: Basis::Zero,
            alpha: DVector::zeros(n),
            nu_alpha: 1.0,
            rho0: 1.0,
        }
    }

    /// The true parameter; hidden from controllers, exposed for the
    /// simulator and for tests.
    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    pub fn n(&self) -> usize {
        self.linear.n()
    }

    pub fn phi(&self, v: &DVector<f64>) -> Result<f64> {
        let value = self.basis.eval(v);
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::NonlinearityEvaluation { norm: v.norm() })
        }
    }

    /// `f(v) = α φ(v)`.
    pub fn eval_nonlinearity(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        if v.len() != self.n() {
            return Err(Error::Dimension(format!("state of length {} for {} states", v.len(), self.n())));
        }
        Ok(&self.alpha * self.phi(v)?)
    }
}

/// Central-difference discretization of `∂v/∂t = κ ∂²v/∂x²` on `(0, L)`
/// with homogeneous Dirichlet ends, a point actuator at the middle interior
/// node and a spatially averaging output.
pub fn build_heat_plant(grid_points: usize, length: f64, diffusion: f64) -> Result<StateSpace> {
    if grid_points < 2 {
        return Err(Error::InvalidDiscretization(format!(
            "need at least 2 interior nodes, got {grid_points}"
        )));
    }
    if !(length > 0.0) || !(diffusion > 0.0) {
        return Err(Error::InvalidDiscretization(format!(
            "length ({length}) and diffusion ({diffusion}) must be positive"
        )));
    }
    let n = grid_points;
    let h = length / (n as f64 + 1.0);
    let off = diffusion / (h * h);
    let a = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            -2.0 * off
        } else if i.abs_diff(j) == 1 {
            off
        } else {
            0.0
        }
    });
    let mut b = DMatrix::zeros(n, 1);
    b[(n.div_ceil(2) - 1, 0)] = 1.0;
    let c = DMatrix::from_element(1, n, h);
    StateSpace::new(a, b, c)
}

/// Constants `(ν₁, ν₂)` with `‖f(v)‖ ≤ ν₁‖v‖ + ν₂` inside the ball of
/// radius `rho`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzBounds {
    pub rho: f64,
    pub nu1: f64,
    pub nu2: f64,
}

impl LipschitzBounds {
    pub fn holds_at(&self, plant: &SemilinearPlant, v: &DVector<f64>) -> Result<bool> {
        let fv = plant.eval_nonlinearity(v)?.norm();
        Ok(fv <= self.nu1 * v.norm() + self.nu2 + 1e-12 * (1.0 + fv))
    }
}

const LIPSCHITZ_INFLATION: f64 = 1.1;
const RADIUS_FLOOR: f64 = 1e-6;

/// Estimates `(ν₁, ν₂)` by sampling with a 10% safety inflation.
///
/// `ν₂` is taken as `‖f(0)‖`. `ν₁` is the largest excess ratio
/// `(‖f(v)‖ − ν₂)/‖v‖` over `samples` quasi-random directions, each probed on
/// a fixed geometric radius ladder below `rho`. The ladder does not depend on
/// `rho`, so sample sets are nested and the estimate is nondecreasing in
/// `rho`.
pub fn estimate_lipschitz_bounds(plant: &SemilinearPlant, rho: f64, samples: usize) -> Result<LipschitzBounds> {
    estimate_lipschitz_bounds_with_offset(plant, rho, samples, 0)
}

/// As [`estimate_lipschitz_bounds`], drawing directions from a different
/// stretch of the low-discrepancy sequence.
pub fn estimate_lipschitz_bounds_with_offset(
    plant: &SemilinearPlant,
    rho: f64,
    samples: usize,
    offset: usize,
) -> Result<LipschitzBounds> {
    if !(rho > 0.0) {
        return Err(Error::Precondition(format!("rho must be positive, got {rho}")));
    }
    if samples == 0 {
        return Err(Error::Precondition("at least one sample is required".into()));
    }
    let n = plant.n();
    let nu2 = plant.eval_nonlinearity(&DVector::zeros(n))?.norm();
    let radii = radius_ladder(rho);
    let mut nu1: f64 = 0.0;
    for direction in halton_directions(n, samples, offset) {
        for &r in &radii {
            let v = &direction * r;
            let excess = plant.eval_nonlinearity(&v)?.norm() - nu2;
            nu1 = nu1.max(excess / r);
        }
    }
    Ok(LipschitzBounds {
        rho,
        nu1: LIPSCHITZ_INFLATION * nu1,
        nu2: LIPSCHITZ_INFLATION * nu2,
    })
}

fn radius_ladder(rho: f64) -> Vec<f64> {
    let kmin = (RADIUS_FLOOR.log2() * 4.0).floor() as i32;
    let mut ladder: Vec<f64> = (kmin..)
        .map(|k| 2f64.powf(k as f64 / 4.0))
        .take_while(|&r| r < rho)
        .collect();
    if ladder.is_empty() {
        ladder.push(0.5 * rho);
    }
    ladder
}

fn first_primes(count: usize) -> Vec<u64> {
    let mut primes = Vec::with_capacity(count);
    let mut candidate = 2u64;
    while primes.len() < count {
        if primes.iter().take_while(|&&p| p * p <= candidate).all(|&p| candidate % p != 0) {
            primes.push(candidate);
        }
        candidate += 1;
    }
    primes
}

fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let mut result = 0.0;
    let mut f = 1.0 / base as f64;
    while index > 0 {
        result += f * (index % base) as f64;
        index /= base;
        f /= base as f64;
    }
    result
}

/// Unit directions from a Halton sequence mapped onto `[-1, 1]ⁿ`.
pub(crate) fn halton_directions(n: usize, count: usize, offset: usize) -> Vec<DVector<f64>> {
    let primes = first_primes(n);
    let mut out = Vec::with_capacity(count);
    let mut index = offset as u64 + 1;
    while out.len() < count {
        let point = DVector::from_fn(n, |i, _| 2.0 * radical_inverse(index, primes[i]) - 1.0);
        index += 1;
        let norm = point.norm();
        if norm > 1e-3 {
            out.push(point / norm);
        }
    }
    out
}
