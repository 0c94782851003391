//! Adaptive Gauss–Kronrod (7/15) quadrature for scalar, vector and matrix
//! integrands.

use nalgebra::{DMatrix, DVector};

/// Values that can be integrated: a real vector space with a norm.
pub trait Quadrable: Clone {
    fn zero_like(&self) -> Self;
    fn axpy(&mut self, alpha: f64, x: &Self);
    fn magnitude(&self) -> f64;
}

impl Quadrable for f64 {
    fn zero_like(&self) -> Self {
        0.0
    }
    fn axpy(&mut self, alpha: f64, x: &Self) {
        *self += alpha * x;
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl Quadrable for DVector<f64> {
    fn zero_like(&self) -> Self {
        DVector::zeros(self.len())
    }
    fn axpy(&mut self, alpha: f64, x: &Self) {
        self.axpy(alpha, x, 1.0);
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

impl Quadrable for DMatrix<f64> {
    fn zero_like(&self) -> Self {
        DMatrix::zeros(self.nrows(), self.ncols())
    }
    fn axpy(&mut self, alpha: f64, x: &Self) {
        *self += x * alpha;
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

const MAX_PIECES: usize = 1 << 13;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Kronrod estimate, Gauss–Kronrod error estimate and `∫|f|`.
fn gk15<T: Quadrable, F: FnMut(f64) -> T>(f: &mut F, a: f64, b: f64) -> (T, f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut abs_sum = WGK[7] * fc.magnitude();
    let mut kronrod = fc.zero_like();
    let mut gauss = fc.zero_like();
    kronrod.axpy(WGK[7], &fc);
    gauss.axpy(WG[3], &fc);
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        kronrod.axpy(WGK[j], &f1);
        kronrod.axpy(WGK[j], &f2);
        abs_sum += WGK[j] * (f1.magnitude() + f2.magnitude());
        if j % 2 == 1 {
            gauss.axpy(WG[j / 2], &f1);
            gauss.axpy(WG[j / 2], &f2);
        }
    }
    let mut kronrod_scaled = kronrod.zero_like();
    kronrod_scaled.axpy(half, &kronrod);
    let mut diff = kronrod.clone();
    diff.axpy(-1.0, &gauss);
    (kronrod_scaled, (half * diff.magnitude()).abs(), (half * abs_sum).abs())
}

struct Piece<T> {
    lo: f64,
    hi: f64,
    value: T,
    err: f64,
    abs_integral: f64,
}

/// Integrates `f` over `[a, b]`, starting from `segments` equal pieces and
/// repeatedly bisecting the piece with the largest Kronrod error estimate
/// until the summed estimate is below `max(abs_tol, rel_tol·|∫f|)` or the
/// noise floor `1e3·ε·∫|f|`. At most `MAX_PIECES` pieces are kept.
pub fn integrate<T: Quadrable, F: FnMut(f64) -> T>(
    mut f: F,
    a: f64,
    b: f64,
    segments: usize,
    abs_tol: f64,
    rel_tol: f64,
) -> T {
    let segments = segments.max(1);
    let width = (b - a) / segments as f64;
    let mut eval = |lo: f64, hi: f64| {
        let (value, err, abs_integral) = gk15(&mut f, lo, hi);
        Piece { lo, hi, value, err, abs_integral }
    };
    let mut pieces: Vec<Piece<T>> = (0..segments)
        .map(|i| eval(a + width * i as f64, if i + 1 == segments { b } else { a + width * (i + 1) as f64 }))
        .collect();
    loop {
        let mut total = pieces[0].value.zero_like();
        let (mut err, mut abs_integral) = (0.0, 0.0);
        let mut worst = 0;
        for (i, p) in pieces.iter().enumerate() {
            total.axpy(1.0, &p.value);
            err += p.err;
            abs_integral += p.abs_integral;
            if p.err > pieces[worst].err {
                worst = i;
            }
        }
        let tol = abs_tol.max(rel_tol * total.magnitude()).max(1e3 * f64::EPSILON * abs_integral);
        let Piece { lo, hi, .. } = pieces[worst];
        let mid = 0.5 * (lo + hi);
        if err <= tol || pieces.len() >= MAX_PIECES || !(lo < mid && mid < hi) {
            return total;
        }
        pieces[worst] = eval(lo, mid);
        pieces.push(eval(mid, hi));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exponential_integral() {
        let v = integrate(|t: f64| (-t).exp(), 0.0, 40.0, 8, 1e-13, 1e-13);
        assert_relative_eq!(v, 1.0 - (-40f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn vector_integrand() {
        let v = integrate(
            |t: f64| DVector::from_vec(vec![t.sin(), t * t]),
            0.0,
            std::f64::consts::PI,
            1,
            1e-12,
            1e-12,
        );
        assert_relative_eq!(v[0], 2.0, epsilon = 1e-11);
        assert_relative_eq!(v[1], std::f64::consts::PI.powi(3) / 3.0, epsilon = 1e-10);
    }
}
