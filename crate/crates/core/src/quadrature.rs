//! Gauss–Legendre quadrature.

use crate::error::{GtmError, Result};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
    pub interval: (T, T),
}

impl<T: Real> QuadratureRule<T> {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, mut f: impl FnMut(T) -> T) -> T {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    /// Natural logs of the weights, for log-space accumulation.
    pub fn log_weights(&self) -> Vec<T> {
        self.weights.iter().map(|w| w.ln()).collect()
    }
}

/// Legendre polynomial `P_n(x)` and its derivative.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// `n`-point Gauss–Legendre rule on `[a, b]`.
///
/// Roots of `P_n` come from Newton iteration started at the Chebyshev-like
/// guesses `cos(π(i - 1/4)/(n + 1/2))`; only the positive half is computed and
/// mirrored, so the rule is exactly symmetric.
pub fn gauss_legendre<T: Real>(n: usize, a: T, b: T) -> Result<QuadratureRule<T>> {
    if n == 0 {
        return Err(GtmError::domain("quadrature needs at least one node"));
    }
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(GtmError::domain(format!("quadrature interval must satisfy a < b, got [{a}, {b}]")));
    }
    let mut x_ref = vec![0.0_f64; n];
    let mut w_ref = vec![0.0_f64; n];
    let half = n.div_ceil(2);
    for i in 0..half {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() <= 1e-14 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        x_ref[i] = -x;
        x_ref[n - 1 - i] = x;
        w_ref[i] = w;
        w_ref[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        x_ref[n / 2] = 0.0;
    }
    let (af, bf) = (a.as_f64(), b.as_f64());
    let half_width = 0.5 * (bf - af);
    let mid = 0.5 * (af + bf);
    Ok(QuadratureRule {
        nodes: x_ref.iter().map(|&x| T::lit(mid + half_width * x)).collect(),
        weights: w_ref.iter().map(|&w| T::lit(half_width * w)).collect(),
        interval: (a, b),
    })
}
