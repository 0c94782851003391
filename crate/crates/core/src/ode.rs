//! Classical fixed-step fourth-order Runge–Kutta.

use nalgebra::DVector;

/// One RK4 step of `ż = f(t, z)` from `t` with step `h` (may be negative).
pub fn rk4_step<F>(f: &mut F, t: f64, z: &DVector<f64>, h: f64) -> DVector<f64>
where
    F: FnMut(f64, &DVector<f64>) -> DVector<f64>,
{
    let k1 = f(t, z);
    let k2 = f(t + 0.5 * h, &(z + &k1 * (0.5 * h)));
    let k3 = f(t + 0.5 * h, &(z + &k2 * (0.5 * h)));
    let k4 = f(t + h, &(z + &k3 * h));
    z + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// RK4 step whose right-hand side may fail.
pub fn try_rk4_step<F, E>(f: &mut F, t: f64, z: &DVector<f64>, h: f64) -> Result<DVector<f64>, E>
where
    F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>, E>,
{
    let k1 = f(t, z)?;
    let k2 = f(t + 0.5 * h, &(z + &k1 * (0.5 * h)))?;
    let k3 = f(t + 0.5 * h, &(z + &k2 * (0.5 * h)))?;
    let k4 = f(t + h, &(z + &k3 * h))?;
    Ok(z + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fourth_order_on_linear_decay() {
        let err = |h: f64| {
            let mut z = DVector::from_element(1, 1.0);
            let steps = (1.0 / h).round() as usize;
            let mut f = |_t: f64, z: &DVector<f64>| -z;
            for k in 0..steps {
                z = rk4_step(&mut f, k as f64 * h, &z, h);
            }
            (z[0] - (-1f64).exp()).abs()
        };
        let order = (err(0.1) / err(0.05)).log2();
        assert!(order > 3.8, "observed order {order}");
    }
}
