//! Uniform B-spline bases, their derivatives and difference penalties.
//!
//! A [`KnotGrid`] with `num_basis = P` and degree `k` places `P - k` equal
//! intervals on `[lower, upper]` and pads `k` further knots on each side, so
//! that exactly `k + 1` basis functions are non-zero at any point and they sum
//! to one on the bounded interval. Evaluation uses De Boor's triangular scheme
//! and only ever touches the non-zero functions.

use crate::error::{GtmError, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

/// Largest supported spline degree.
pub const MAX_DEGREE: usize = 7;

#[derive(Clone, Debug, PartialEq)]
pub struct KnotGrid<T> {
    lower: T,
    upper: T,
    num_basis: usize,
    degree: usize,
    spacing: T,
    knots: Vec<T>,
}

/// The `degree + 1` non-zero basis values at a point; `values[i]` belongs to
/// basis function `offset + i`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BasisValues<T> {
    pub offset: usize,
    len: usize,
    values: [T; MAX_DEGREE + 1],
}

impl<T: Real> BasisValues<T> {
    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values[..self.len]
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// `Σ values[i] · coeffs[offset + i]`.
    #[inline]
    pub fn dot(&self, coeffs: &[T]) -> T {
        self.values()
            .iter()
            .zip(&coeffs[self.offset..self.offset + self.len])
            .fold(T::zero(), |acc, (&b, &c)| acc + b * c)
    }
}

impl<T: Real> KnotGrid<T> {
    pub fn new(lower: T, upper: T, num_basis: usize, degree: usize) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite()) || !(lower < upper) {
            return Err(GtmError::domain(format!("knot grid needs finite lower < upper, got [{lower}, {upper}]")));
        }
        if degree == 0 || degree > MAX_DEGREE {
            return Err(GtmError::domain(format!("spline degree must lie in 1..={MAX_DEGREE}, got {degree}")));
        }
        if num_basis < degree + 1 {
            return Err(GtmError::domain(format!(
                "num_basis {num_basis} is below degree + 1 = {}",
                degree + 1
            )));
        }
        let intervals = T::from_usize_lossy(num_basis - degree);
        let spacing = (upper - lower) / intervals;
        let knots = (0..num_basis + degree + 1)
            .map(|i| lower + (T::from_usize_lossy(i) - T::from_usize_lossy(degree)) * spacing)
            .collect();
        Ok(Self { lower, upper, num_basis, degree, spacing, knots })
    }

    /// Cubic grid, the default everywhere in the model.
    pub fn cubic(lower: T, upper: T, num_basis: usize) -> Result<Self> {
        Self::new(lower, upper, num_basis, 3)
    }

    #[inline]
    pub fn lower(&self) -> T {
        self.lower
    }

    #[inline]
    pub fn upper(&self) -> T {
        self.upper
    }

    #[inline]
    pub fn num_basis(&self) -> usize {
        self.num_basis
    }

    #[inline]
    pub fn degree(&self) -> usize {
        self.degree
    }

    #[inline]
    pub fn spacing(&self) -> T {
        self.spacing
    }

    /// Extended knot vector of length `num_basis + degree + 1`.
    pub fn knots(&self) -> &[T] {
        &self.knots
    }

    #[inline]
    pub fn contains(&self, x: T) -> bool {
        x >= self.lower && x <= self.upper
    }

    #[inline]
    pub fn clamp(&self, x: T) -> T {
        x.max(self.lower).min(self.upper)
    }

    /// Greville abscissae: the coefficients for which the spline is `x`.
    pub fn greville(&self) -> Vec<T> {
        let k = T::from_usize_lossy(self.degree);
        (0..self.num_basis)
            .map(|p| self.knots[p + 1..=p + self.degree].iter().copied().sum::<T>() / k)
            .collect()
    }

    /// Index of the first non-zero basis function at the (clamped) point.
    #[inline]
    fn interval(&self, x: T) -> usize {
        let last = self.num_basis - self.degree - 1;
        let t = ((x - self.lower) / self.spacing).floor();
        if t <= T::zero() {
            0
        } else {
            t.to_usize().map_or(last, |i| i.min(last))
        }
    }

    /// Non-zero basis values of degree `deg <= self.degree` on the interval
    /// starting at knot span `offset + self.degree`.
    #[inline]
    fn de_boor(&self, offset: usize, x: T, deg: usize) -> [T; MAX_DEGREE + 1] {
        let span = offset + self.degree;
        let mut n = [T::zero(); MAX_DEGREE + 1];
        let mut left = [T::zero(); MAX_DEGREE + 1];
        let mut right = [T::zero(); MAX_DEGREE + 1];
        n[0] = T::one();
        for j in 1..=deg {
            left[j] = x - self.knots[span + 1 - j];
            right[j] = self.knots[span + j] - x;
            let mut saved = T::zero();
            for r in 0..j {
                let temp = n[r] / (right[r + 1] + left[j - r]);
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }
        n
    }

    fn check_finite(x: T) -> Result<()> {
        if x.is_finite() {
            Ok(())
        } else {
            Err(GtmError::domain(format!("basis evaluation at non-finite point {x}")))
        }
    }

    /// Non-zero basis values at `x`; points outside the bounds are clamped.
    pub fn basis_eval(&self, x: T) -> Result<BasisValues<T>> {
        Self::check_finite(x)?;
        Ok(self.eval_clamped(x))
    }

    /// Derivative of order 1 or 2 of the non-zero basis functions at `x`.
    pub fn basis_deriv(&self, x: T, order: usize) -> Result<BasisValues<T>> {
        Self::check_finite(x)?;
        if order == 0 || order > 2 {
            return Err(GtmError::domain(format!("derivative order must be 1 or 2, got {order}")));
        }
        Ok(self.deriv_clamped(x, order))
    }

    /// Unchecked variant of [`KnotGrid::basis_eval`] for hot loops.
    #[inline]
    pub fn eval_clamped(&self, x: T) -> BasisValues<T> {
        let x = self.clamp(x);
        let offset = self.interval(x);
        BasisValues { offset, len: self.degree + 1, values: self.de_boor(offset, x, self.degree) }
    }

    /// Unchecked derivative of any order `< degree + 1`.
    ///
    /// On a uniform grid the m-th derivative of a degree-k basis function is
    /// the m-th forward difference of degree-(k - m) functions over `h^m`.
    #[inline]
    pub fn deriv_clamped(&self, x: T, order: usize) -> BasisValues<T> {
        let k = self.degree;
        let x = self.clamp(x);
        let offset = self.interval(x);
        let mut values = [T::zero(); MAX_DEGREE + 1];
        if order > k {
            return BasisValues { offset, len: k + 1, values };
        }
        let low = self.de_boor(offset, x, k - order);
        // low[q] is B_{offset + order + q, k - order}
        let binom = |m: usize, q: usize| -> T {
            let mut c = 1usize;
            for i in 0..q {
                c = c * (m - i) / (i + 1);
            }
            T::from_usize_lossy(c)
        };
        let scale = self.spacing.powi(order as i32).recip();
        for (s, out) in values.iter_mut().enumerate().take(k + 1) {
            let mut acc = T::zero();
            for q in 0..=order {
                // index of B_{offset + s + q, k - order} inside `low`
                let idx = s as isize + q as isize - order as isize;
                if idx < 0 || idx as usize > k - order {
                    continue;
                }
                let term = binom(order, q) * low[idx as usize];
                acc = if q % 2 == 0 { acc + term } else { acc - term };
            }
            *out = acc * scale;
        }
        BasisValues { offset, len: k + 1, values }
    }

    /// Spline value `a(x)ᵀ coeffs` with clamped evaluation.
    #[inline]
    pub fn eval_spline(&self, coeffs: &[T], x: T) -> T {
        self.eval_clamped(x).dot(coeffs)
    }
}

/// Difference matrix `D` of the given order, shape `(p - order) × p`.
pub fn diff_matrix<T: Real>(p: usize, order: usize) -> Result<Matrix<T>> {
    if order == 0 || p <= order {
        return Err(GtmError::dim(format!("difference matrix needs p > order >= 1, got p={p}, order={order}")));
    }
    let mut d = Matrix::zeros(p - 1, p);
    for i in 0..p - 1 {
        d[(i, i)] = -T::one();
        d[(i, i + 1)] = T::one();
    }
    for q in 2..=order {
        let rows = p - q;
        let mut next = Matrix::zeros(rows, p);
        for i in 0..rows {
            for j in 0..p {
                next[(i, j)] = d[(i + 1, j)] - d[(i, j)];
            }
        }
        d = next;
    }
    Ok(d)
}

/// `‖D_order c‖²` computed without forming `D`.
pub fn diff_penalty<T: Real>(coeffs: &[T], order: usize) -> T {
    let mut d = coeffs.to_vec();
    for _ in 0..order {
        if d.len() < 2 {
            return T::zero();
        }
        d = d.windows(2).map(|w| w[1] - w[0]).collect();
    }
    d.iter().map(|&v| v * v).sum()
}

/// Adds `scale · ∂‖D_order c‖²/∂c = scale · 2 DᵀD c` into `grad`.
pub fn diff_penalty_grad<T: Real>(coeffs: &[T], order: usize, scale: T, grad: &mut [T]) {
    let p = coeffs.len();
    if p <= order {
        return;
    }
    let mut d = coeffs.to_vec();
    for _ in 0..order {
        d = d.windows(2).map(|w| w[1] - w[0]).collect();
    }
    // Apply Dᵀ one first-difference transpose at a time.
    let two = T::lit(2.0);
    for _ in 0..order {
        let n = d.len();
        let mut up = vec![T::zero(); n + 1];
        for (i, &v) in d.iter().enumerate() {
            up[i] = up[i] - v;
            up[i + 1] = up[i + 1] + v;
        }
        d = up;
    }
    for (g, v) in grad.iter_mut().zip(d) {
        *g = *g + scale * two * v;
    }
}
