//! Monotone spline marginal transformations (the transformation layer).
//!
//! Each margin is mapped by `h(y) = a(y)ᵀ υ` where the coefficient vector `υ`
//! is the cumulative-exponential image of an unconstrained vector `θ`, which
//! makes `h` strictly increasing. Outside the knot span the map continues
//! linearly with the boundary slope, so it is a bijection of the real line.

use crate::error::{GtmError, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;
use crate::spline::{diff_penalty, diff_penalty_grad, KnotGrid, MAX_DEGREE};
use crate::training::lbfgs::{self, IterControl, LbfgsOptions};
use crate::training::{classify_stop, FitReport};

/// `υ_1 = θ_1`, `υ_p = θ_1 + Σ_{q=2..p} exp(θ_q)`.
pub fn restrict<T: Real>(theta: &[T]) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(theta.len());
    let mut acc = T::zero();
    for (i, &t) in theta.iter().enumerate() {
        if !t.is_finite() {
            return Err(GtmError::Parameter { index: i, msg: format!("non-finite parameter {t}") });
        }
        if i == 0 {
            acc = t;
        } else {
            let inc = t.exp();
            if !inc.is_finite() {
                return Err(GtmError::Parameter { index: i, msg: format!("exp({t}) overflows") });
            }
            acc = acc + inc;
        }
        if !acc.is_finite() {
            return Err(GtmError::Parameter { index: i, msg: "cumulative coefficient overflows".into() });
        }
        out.push(acc);
    }
    Ok(out)
}

/// Inverse of [`restrict`] for a strictly increasing vector.
pub fn unrestrict<T: Real>(upsilon: &[T]) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(upsilon.len());
    for (i, &u) in upsilon.iter().enumerate() {
        if i == 0 {
            out.push(u);
        } else {
            let inc = u - upsilon[i - 1];
            if !(inc > T::zero()) {
                return Err(GtmError::Parameter { index: i, msg: "coefficients are not strictly increasing".into() });
            }
            out.push(inc.ln());
        }
    }
    Ok(out)
}

/// Backpropagates `∂/∂υ` to `∂/∂θ` through [`restrict`], adding into `out`.
pub(crate) fn theta_backprop<T: Real>(theta: &[T], upsilon_bar: &[T], out: &mut [T]) {
    let mut suffix = T::zero();
    for q in (0..theta.len()).rev() {
        suffix = suffix + upsilon_bar[q];
        out[q] = out[q] + if q == 0 { suffix } else { theta[q].exp() * suffix };
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonotoneParams<T> {
    theta: Vec<T>,
    upsilon: Vec<T>,
}

impl<T: Real> MonotoneParams<T> {
    pub fn new(theta: Vec<T>) -> Result<Self> {
        let upsilon = restrict(&theta)?;
        Ok(Self { theta, upsilon })
    }

    pub fn theta(&self) -> &[T] {
        &self.theta
    }

    pub fn upsilon(&self) -> &[T] {
        &self.upsilon
    }
}

/// Coefficients of `υ` in the value and the slope of `h` at one point,
/// including the linear continuation outside the span.
#[derive(Clone, Copy, Debug)]
pub(crate) struct MarginalBasis<T> {
    pub offset: usize,
    pub len: usize,
    pub value: [T; MAX_DEGREE + 1],
    pub slope: [T; MAX_DEGREE + 1],
}

impl<T: Real> MarginalBasis<T> {
    #[inline]
    pub fn dot_value(&self, c: &[T]) -> T {
        (0..self.len).fold(T::zero(), |s, i| s + self.value[i] * c[self.offset + i])
    }

    #[inline]
    pub fn dot_slope(&self, c: &[T]) -> T {
        (0..self.len).fold(T::zero(), |s, i| s + self.slope[i] * c[self.offset + i])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MarginalTransform<T> {
    grid: KnotGrid<T>,
    params: MonotoneParams<T>,
}

impl<T: Real> MarginalTransform<T> {
    pub fn new(grid: KnotGrid<T>, theta: Vec<T>) -> Result<Self> {
        if theta.len() != grid.num_basis() {
            return Err(GtmError::dim(format!(
                "marginal transform has {} basis functions but {} parameters",
                grid.num_basis(),
                theta.len()
            )));
        }
        Ok(Self { params: MonotoneParams::new(theta)?, grid })
    }

    /// `h(y) = slope · y + intercept` on the span, reproduced exactly through
    /// the Greville abscissae.
    pub fn affine(grid: KnotGrid<T>, slope: T, intercept: T) -> Result<Self> {
        if !(slope > T::zero()) {
            return Err(GtmError::domain("affine marginal needs a positive slope"));
        }
        let upsilon: Vec<T> = grid.greville().into_iter().map(|x| slope * x + intercept).collect();
        let theta = unrestrict(&upsilon)?;
        Self::new(grid, theta)
    }

    pub fn identity(grid: KnotGrid<T>) -> Result<Self> {
        Self::affine(grid, T::one(), T::zero())
    }

    pub fn grid(&self) -> &KnotGrid<T> {
        &self.grid
    }

    pub fn params(&self) -> &MonotoneParams<T> {
        &self.params
    }

    pub fn theta(&self) -> &[T] {
        self.params.theta()
    }

    pub fn with_theta(&self, theta: Vec<T>) -> Result<Self> {
        Self::new(self.grid.clone(), theta)
    }

    #[inline]
    pub(crate) fn basis(&self, y: T) -> MarginalBasis<T> {
        let xc = self.grid.clamp(y);
        let b = self.grid.eval_clamped(xc);
        let d = self.grid.deriv_clamped(xc, 1);
        let shift = y - xc;
        let mut value = [T::zero(); MAX_DEGREE + 1];
        let mut slope = [T::zero(); MAX_DEGREE + 1];
        for i in 0..b.len() {
            value[i] = b.values()[i] + shift * d.values()[i];
            slope[i] = d.values()[i];
        }
        MarginalBasis { offset: b.offset, len: b.len(), value, slope }
    }

    /// `(h(y), h'(y))` without input checks.
    #[inline]
    pub fn value_and_slope(&self, y: T) -> (T, T) {
        let b = self.basis(y);
        let u = self.params.upsilon();
        (b.dot_value(u), b.dot_slope(u))
    }

    /// `(h(y), ln h'(y))`.
    pub fn forward(&self, y: T) -> Result<(T, T)> {
        if !y.is_finite() {
            return Err(GtmError::domain(format!("marginal transform evaluated at non-finite {y}")));
        }
        let (z, s) = self.value_and_slope(y);
        Ok((z, s.ln()))
    }

    /// Exact inverse by safeguarded Newton iteration on the monotone map.
    pub fn solve(&self, z: T) -> T {
        let tol = T::lit(1e-13);
        let (mut lo, mut hi) = (self.grid.lower(), self.grid.upper());
        let width = hi - lo;
        let mut step = width;
        while self.value_and_slope(lo).0 > z {
            lo = lo - step;
            step = step * T::lit(2.0);
        }
        step = width;
        while self.value_and_slope(hi).0 < z {
            hi = hi + step;
            step = step * T::lit(2.0);
        }
        let mut y = lo + (hi - lo) * T::lit(0.5);
        for _ in 0..200 {
            let (v, s) = self.value_and_slope(y);
            let r = v - z;
            if r > T::zero() {
                hi = y;
            } else {
                lo = y;
            }
            let mut next = y - r / s;
            if !(next > lo && next < hi) {
                next = lo + (hi - lo) * T::lit(0.5);
            }
            if (next - y).abs() <= tol * (T::one() + y.abs()) {
                return next;
            }
            y = next;
        }
        y
    }
}

/// Per-dimension standardisation record, in raw data units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Standardization<T> {
    pub mean: T,
    pub sd: T,
    /// Observed range, used to place the inverse-transform grid.
    pub min: T,
    pub max: T,
}

impl<T: Real> Standardization<T> {
    pub fn unit() -> Self {
        Self { mean: T::zero(), sd: T::one(), min: T::lit(-5.0), max: T::lit(5.0) }
    }

    pub fn from_column(col: &[T]) -> Result<Self> {
        if col.len() < 2 {
            return Err(GtmError::data("need at least two observations to standardise"));
        }
        if let Some(i) = col.iter().position(|v| !v.is_finite()) {
            return Err(GtmError::data(format!("non-finite value at row {i}")));
        }
        let n = T::from_usize_lossy(col.len());
        let mean = col.iter().copied().sum::<T>() / n;
        let var = col.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
        let sd = var.sqrt();
        if !(sd > T::zero()) {
            return Err(GtmError::data("column is constant"));
        }
        let min = col.iter().copied().fold(T::infinity(), T::min);
        let max = col.iter().copied().fold(T::neg_infinity(), T::max);
        Ok(Self { mean, sd, min, max })
    }

    #[inline]
    pub fn apply(&self, y: T) -> T {
        (y - self.mean) / self.sd
    }

    #[inline]
    pub fn undo(&self, s: T) -> T {
        self.mean + self.sd * s
    }
}

/// The J independent marginal maps together with their standardisation.
#[derive(Clone, Debug, PartialEq)]
pub struct TransformationLayer<T> {
    transforms: Vec<MarginalTransform<T>>,
    standardization: Vec<Standardization<T>>,
}

impl<T: Real> TransformationLayer<T> {
    pub fn new(transforms: Vec<MarginalTransform<T>>, standardization: Vec<Standardization<T>>) -> Result<Self> {
        if transforms.len() < 2 {
            return Err(GtmError::dim(format!("transformation layer needs J >= 2, got {}", transforms.len())));
        }
        if transforms.len() != standardization.len() {
            return Err(GtmError::dim("one standardisation record per dimension is required"));
        }
        if let Some(j) = standardization.iter().position(|s| !(s.sd > T::zero()) || !s.mean.is_finite()) {
            return Err(GtmError::domain(format!("invalid standardisation for dimension {j}")));
        }
        Ok(Self { transforms, standardization })
    }

    /// Identity marginals on a common grid with unit standardisation.
    pub fn identity(dim: usize, grid: KnotGrid<T>) -> Result<Self> {
        let t = MarginalTransform::identity(grid)?;
        Self::new(vec![t; dim], vec![Standardization::unit(); dim])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.transforms.len()
    }

    pub fn transforms(&self) -> &[MarginalTransform<T>] {
        &self.transforms
    }

    pub fn transform(&self, j: usize) -> &MarginalTransform<T> {
        &self.transforms[j]
    }

    pub fn standardization(&self) -> &[Standardization<T>] {
        &self.standardization
    }

    pub(crate) fn set_transform(&mut self, j: usize, t: MarginalTransform<T>) {
        self.transforms[j] = t;
    }

    /// Writes `h(standardised y)` into `z_tilde` and returns `Σ ln h'_j − Σ ln sd_j`.
    #[inline]
    pub fn forward_into(&self, y: &[T], z_tilde: &mut [T]) -> T {
        let mut log_jac = T::zero();
        for (j, (t, st)) in self.transforms.iter().zip(&self.standardization).enumerate() {
            let (z, s) = t.value_and_slope(st.apply(y[j]));
            z_tilde[j] = z;
            log_jac = log_jac + s.ln() - st.sd.ln();
        }
        log_jac
    }

    /// Constant part of the log-Jacobian contributed by standardisation.
    pub fn standardization_log_jacobian(&self) -> T {
        self.standardization.iter().map(|s| -s.sd.ln()).sum()
    }
}

fn pretrain_objective<T: Real>(
    grid: &KnotGrid<T>,
    column: &[T],
    tau4: T,
    theta: &[T],
    grad: &mut [T],
) -> Result<T> {
    let t = MarginalTransform::new(grid.clone(), theta.to_vec())?;
    let u = t.params.upsilon();
    let mut ubar = vec![T::zero(); u.len()];
    let half = T::lit(0.5);
    let mut nll = T::zero();
    for (i, &y) in column.iter().enumerate() {
        let b = t.basis(y);
        let z = b.dot_value(u);
        let s = b.dot_slope(u);
        let term = half * z * z - s.ln() + T::ln_sqrt_2pi();
        if !term.is_finite() {
            return Err(GtmError::NonFiniteObjective { index: i });
        }
        nll = nll + term;
        for k in 0..b.len {
            ubar[b.offset + k] = ubar[b.offset + k] + z * b.value[k] - b.slope[k] / s;
        }
    }
    grad.iter_mut().for_each(|g| *g = T::zero());
    theta_backprop(theta, &ubar, grad);
    let pen = marginal_ridge(theta, tau4);
    marginal_ridge_grad(theta, tau4, grad);
    Ok(nll + pen)
}

/// `τ₄ ‖D₂ θ_{2..P}‖²`: second differences of the log increments.
pub fn marginal_ridge<T: Real>(theta: &[T], tau4: T) -> T {
    if tau4 == T::zero() || theta.len() < 4 {
        return T::zero();
    }
    tau4 * diff_penalty(&theta[1..], 2)
}

pub(crate) fn marginal_ridge_grad<T: Real>(theta: &[T], tau4: T, grad: &mut [T]) {
    if tau4 == T::zero() || theta.len() < 4 {
        return;
    }
    diff_penalty_grad(&theta[1..], 2, tau4, &mut grad[1..]);
}

/// Default optimiser settings for marginal pretraining.
pub fn pretrain_options<T: Real>() -> LbfgsOptions<T> {
    LbfgsOptions { max_iters: 1000, grad_tol: T::lit(1e-7), rel_obj_tol: T::lit(1e-12), ..LbfgsOptions::default() }
}

/// Fits one marginal transform to a (standardised) column by maximising
/// `Σ ln φ(h(y_i)) + ln h'(y_i)` minus the marginal ridge, starting from the
/// identity map.
pub fn pretrain_marginal<T: Real>(column: &[T], grid: KnotGrid<T>, tau4: T) -> Result<(MarginalTransform<T>, FitReport)> {
    pretrain_marginal_with(column, grid, tau4, &pretrain_options())
}

pub fn pretrain_marginal_with<T: Real>(
    column: &[T],
    grid: KnotGrid<T>,
    tau4: T,
    opts: &LbfgsOptions<T>,
) -> Result<(MarginalTransform<T>, FitReport)> {
    if column.len() < 20 {
        return Err(GtmError::data(format!("pretraining needs at least 20 observations, got {}", column.len())));
    }
    if !(tau4 >= T::zero()) || !tau4.is_finite() {
        return Err(GtmError::config("tau4 must be finite and non-negative"));
    }
    let st = Standardization::from_column(column)?;
    let start = std::time::Instant::now();
    let init = MarginalTransform::identity(grid.clone())?;
    let outcome = lbfgs::minimize(
        |th, g| pretrain_objective(&grid, column, tau4, th, g),
        init.theta().to_vec(),
        opts,
        |_, _, _| IterControl::Continue,
    )?;
    let mut report = FitReport {
        objective_trace: outcome.trace.iter().map(|v| v.as_f64()).collect(),
        iterations: outcome.iterations,
        wall_time_secs: start.elapsed().as_secs_f64(),
        final_grad_norm: outcome.grad_norm.as_f64(),
        line_search_restarts: outcome.restarts,
        ..FitReport::default()
    };
    report.stop_reason = Some(classify_stop(outcome.stop, outcome.iterations, &mut report)?);
    let fitted = MarginalTransform::new(grid, outcome.x)?;

    let z: Vec<f64> = column.iter().map(|&y| fitted.value_and_slope(y).0.as_f64()).collect();
    let n = z.len() as f64;
    let mean = z.iter().sum::<f64>() / n;
    let sd = (z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    if mean.abs() > 0.2 || (sd - 1.0).abs() > 0.3 {
        report.warnings.push(format!(
            "transformed column fails the normality sanity check: mean {mean:.3}, sd {sd:.3} (raw sd {})",
            st.sd
        ));
    }
    Ok((fitted, report))
}

/// Jarque–Bera normality score: the asymptotic χ²₂ p-value `exp(-JB/2)`.
pub fn jarque_bera_pvalue(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let m3 = xs.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
    let m4 = xs.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
    let skew = m3 / m2.powf(1.5);
    let kurt = m4 / (m2 * m2) - 3.0;
    let jb = n / 6.0 * (skew * skew + kurt * kurt / 4.0);
    (-jb / 2.0).exp()
}

/// Incremental knot-count search: grow the basis until the transformed
/// column's normality score reaches `threshold` or the cap is hit.
#[derive(Clone, Debug, PartialEq)]
pub struct KnotSearch {
    pub start: usize,
    pub step: usize,
    pub cap: usize,
    pub threshold: f64,
}

impl Default for KnotSearch {
    fn default() -> Self {
        Self { start: 5, step: 5, cap: 60, threshold: 0.01 }
    }
}

pub fn select_marginal_knots<T: Real>(
    column: &[T],
    lower: T,
    upper: T,
    tau4: T,
    search: &KnotSearch,
    score: impl Fn(&[f64]) -> f64,
) -> Result<(usize, MarginalTransform<T>)> {
    if search.step == 0 || search.start < 4 || search.cap < search.start {
        return Err(GtmError::config("knot search needs start >= 4, step >= 1 and cap >= start"));
    }
    let mut p = search.start;
    loop {
        let (t, _) = pretrain_marginal(column, KnotGrid::cubic(lower, upper, p)?, tau4)?;
        let z: Vec<f64> = column.iter().map(|&y| t.value_and_slope(y).0.as_f64()).collect();
        if score(&z) >= search.threshold || p + search.step > search.cap {
            return Ok((p, t));
        }
        p += search.step;
    }
}

/// Least-squares spline approximation of `h⁻¹`, fitted on swapped
/// `(h(y), y)` pairs over a dense regular grid in `y`.
#[derive(Clone, Debug, PartialEq)]
pub struct InverseTransform<T> {
    forward: MarginalTransform<T>,
    grid: KnotGrid<T>,
    coeffs: Vec<T>,
    y_range: (T, T),
    grid_size: usize,
    ridge_fallback: bool,
}

impl<T: Real> InverseTransform<T> {
    /// Approximate `h⁻¹(z)`. Inside the fitted span this is the spline;
    /// beyond it the forward map is solved directly.
    #[inline]
    pub fn eval(&self, z: T) -> T {
        if self.grid.contains(z) {
            self.grid.eval_spline(&self.coeffs, z)
        } else {
            self.forward.solve(z)
        }
    }

    pub fn z_range(&self) -> (T, T) {
        (self.grid.lower(), self.grid.upper())
    }

    pub fn y_range(&self) -> (T, T) {
        self.y_range
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn num_basis(&self) -> usize {
        self.grid.num_basis()
    }

    /// Whether the normal equations were rank deficient and needed ridge.
    pub fn ridge_fallback(&self) -> bool {
        self.ridge_fallback
    }
}

pub fn invert_fit<T: Real>(t: &MarginalTransform<T>, grid_size: usize, y_min: T, y_max: T) -> Result<InverseTransform<T>> {
    if grid_size < 200 {
        return Err(GtmError::domain(format!("inverse fit needs grid_size >= 200, got {grid_size}")));
    }
    if !(y_min < y_max) || !y_min.is_finite() || !y_max.is_finite() {
        return Err(GtmError::domain("inverse fit needs a finite y_min < y_max"));
    }
    let last = T::from_usize_lossy(grid_size - 1);
    let ys: Vec<T> = (0..grid_size)
        .map(|i| y_min + (y_max - y_min) * T::from_usize_lossy(i) / last)
        .collect();
    let zs: Vec<T> = ys.iter().map(|&y| t.value_and_slope(y).0).collect();
    let (z_lo, z_hi) = (zs[0], zs[grid_size - 1]);
    let num_basis = (grid_size / 25).clamp(8, 400);
    let grid = KnotGrid::cubic(z_lo, z_hi, num_basis)?;

    let p = num_basis;
    let mut xtx = Matrix::<T>::zeros(p, p);
    let mut xty = vec![T::zero(); p];
    for (&z, &y) in zs.iter().zip(&ys) {
        let b = grid.eval_clamped(z);
        let v = b.values();
        for a in 0..v.len() {
            xty[b.offset + a] = xty[b.offset + a] + v[a] * y;
            for c in 0..v.len() {
                xtx[(b.offset + a, b.offset + c)] = xtx[(b.offset + a, b.offset + c)] + v[a] * v[c];
            }
        }
    }
    let rel = T::lit(1e-12).max(T::epsilon() * T::lit(100.0));
    let (chol, ridge_fallback) = match xtx.cholesky(rel) {
        Ok(l) => (l, false),
        Err(_) => {
            for i in 0..p {
                xtx[(i, i)] = xtx[(i, i)] + T::lit(1e-10);
            }
            (xtx.cholesky(T::zero())?, true)
        }
    };
    let coeffs = chol.cholesky_solve(&xty);
    Ok(InverseTransform { forward: t.clone(), grid, coeffs, y_range: (y_min, y_max), grid_size, ridge_fallback })
}
