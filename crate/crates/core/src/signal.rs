use nalgebra::DVector;

use crate::error::{Error, Result};

/// Vector-valued signal sampled on a strictly increasing grid starting at
/// zero, read back by piecewise-linear interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalTimeline {
    times: Vec<f64>,
    values: Vec<DVector<f64>>,
}

/// `steps + 1` equally spaced instants on `[0, horizon]`.
pub fn uniform_grid(horizon: f64, steps: usize) -> Vec<f64> {
    let h = horizon / steps as f64;
    let mut grid: Vec<f64> = (0..=steps).map(|k| k as f64 * h).collect();
    grid[steps] = horizon;
    grid
}

impl SignalTimeline {
    pub fn new(times: Vec<f64>, values: Vec<DVector<f64>>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::Domain(format!(
                "{} sample times for {} values",
                times.len(),
                values.len()
            )));
        }
        if times[0] != 0.0 {
            return Err(Error::Domain(format!("timeline starts at {} instead of 0", times[0])));
        }
        if let Some(w) = times.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(Error::Domain(format!("sample times not increasing at {}", w[1])));
        }
        let dim = values[0].len();
        if values.iter().any(|v| v.len() != dim) {
            return Err(Error::Domain("samples of differing dimension".into()));
        }
        Ok(Self { times, values })
    }

    pub fn from_fn<F: FnMut(f64) -> DVector<f64>>(times: Vec<f64>, mut f: F) -> Result<Self> {
        let values = times.iter().map(|&t| f(t)).collect();
        Self::new(times, values)
    }

    pub fn constant(times: Vec<f64>, value: DVector<f64>) -> Result<Self> {
        Self::from_fn(times, |_| value.clone())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[DVector<f64>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("non-empty timeline")
    }

    /// True when the grid ends at `horizon` (to a relative 1e-9).
    pub fn covers(&self, horizon: f64) -> bool {
        (self.horizon() - horizon).abs() <= 1e-9 * horizon.abs().max(1.0)
    }

    /// Piecewise-linear interpolation, held constant outside the grid.
    pub fn at(&self, t: f64) -> DVector<f64> {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.values[0].clone();
        }
        if t >= self.times[n - 1] {
            return self.values[n - 1].clone();
        }
        let k = self.times.partition_point(|&s| s <= t) - 1;
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let w = (t - t0) / (t1 - t0);
        &self.values[k] * (1.0 - w) + &self.values[k + 1] * w
    }

    pub fn map<F: FnMut(&DVector<f64>) -> DVector<f64>>(&self, f: F) -> Self {
        Self {
            times: self.times.clone(),
            values: self.values.iter().map(f).collect(),
        }
    }

    pub fn scaled(&self, k: f64) -> Self {
        self.map(|v| v * k)
    }

    /// Trapezoidal `∫ xᵀy dt` against another signal on the same grid.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        if self.times != other.times {
            return Err(Error::Domain("inner product of signals on different grids".into()));
        }
        Ok(trapezoid(&self.times, |k| self.values[k].dot(&other.values[k])))
    }

    /// `‖x‖_{L2} = (∫ xᵀx dt)^{1/2}` by the trapezoidal rule.
    pub fn l2_norm(&self) -> f64 {
        trapezoid(&self.times, |k| self.values[k].norm_squared()).sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.amax()).fold(0.0, f64::max)
    }
}

/// Trapezoidal rule over sampled integrand values `g(k)`.
pub fn trapezoid<G: Fn(usize) -> f64>(times: &[f64], g: G) -> f64 {
    times
        .windows(2)
        .enumerate()
        .map(|(k, w)| 0.5 * (w[1] - w[0]) * (g(k) + g(k + 1)))
        .sum()
}
