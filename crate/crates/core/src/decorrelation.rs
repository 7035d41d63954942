//! Spline-conditioned triangular decorrelation layers.
//!
//! A layer maps `x` to `Λ(x) x` where `Λ` is unit lower triangular and the
//! entry `(r, c)` is `λ_rc(x_c)`, a spline of the coordinate it multiplies.
//! Flipped layers conjugate with the exchange matrix `F`, i.e. they act on the
//! reversed vector and reverse the result back.

use crate::error::{GtmError, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;
use crate::spline::KnotGrid;

/// Reverses the coordinate order.
pub fn flip<T: Copy>(v: &[T]) -> Vec<T> {
    v.iter().rev().copied().collect()
}

/// Index of the strictly-lower pair `(r, c)`, `c < r`, in row-major order.
#[inline]
pub fn pair_index(r: usize, c: usize) -> usize {
    debug_assert!(c < r);
    r * (r - 1) / 2 + c
}

/// Pairs `(r, c)` with `c < r` in storage order.
pub fn pairs(dim: usize) -> impl Iterator<Item = (usize, usize)> {
    (1..dim).flat_map(|r| (0..r).map(move |c| (r, c)))
}

/// Default conditioner grid: 40 cubic basis functions on `[-15, 15]`.
pub fn default_conditioner_grid<T: Real>() -> KnotGrid<T> {
    KnotGrid::cubic(T::lit(-15.0), T::lit(15.0), 40).expect("valid default grid")
}

/// A single conditioner `λ(x)`, constant beyond the grid bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionerSpline<T> {
    grid: KnotGrid<T>,
    coeffs: Vec<T>,
}

impl<T: Real> ConditionerSpline<T> {
    pub fn new(grid: KnotGrid<T>, coeffs: Vec<T>) -> Result<Self> {
        check_coeffs(&grid, &coeffs, 1)?;
        Ok(Self { grid, coeffs })
    }

    pub fn constant(grid: KnotGrid<T>, value: T) -> Self {
        let coeffs = vec![value; grid.num_basis()];
        Self { grid, coeffs }
    }

    pub fn grid(&self) -> &KnotGrid<T> {
        &self.grid
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    #[inline]
    pub fn eval(&self, x: T) -> T {
        self.grid.eval_spline(&self.coeffs, x)
    }

    /// `λ'(x)`, zero outside the bounds.
    #[inline]
    pub fn deriv(&self, x: T) -> T {
        lambda_deriv(&self.grid, &self.coeffs, x)
    }
}

#[inline]
pub(crate) fn lambda_deriv<T: Real>(grid: &KnotGrid<T>, coeffs: &[T], x: T) -> T {
    if x < grid.lower() || x > grid.upper() {
        T::zero()
    } else {
        grid.deriv_clamped(x, 1).dot(coeffs)
    }
}

fn check_coeffs<T: Real>(grid: &KnotGrid<T>, coeffs: &[T], count: usize) -> Result<()> {
    let want = grid.num_basis() * count;
    if coeffs.len() != want {
        return Err(GtmError::dim(format!("expected {want} conditioner coefficients, got {}", coeffs.len())));
    }
    if let Some(i) = coeffs.iter().position(|v| !v.is_finite()) {
        return Err(GtmError::Parameter { index: i, msg: "non-finite conditioner coefficient".into() });
    }
    Ok(())
}

fn check_input<T: Real>(x: &[T], dim: usize) -> Result<()> {
    if x.len() != dim {
        return Err(GtmError::dim(format!("expected a vector of length {dim}, got {}", x.len())));
    }
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(GtmError::domain(format!("non-finite input at coordinate {i}")));
    }
    Ok(())
}

/// One coupling layer. All `J(J-1)/2` conditioners share one knot grid and
/// their coefficients are stored contiguously in [`pair_index`] order.
#[derive(Clone, Debug, PartialEq)]
pub struct DecorrelationLayer<T> {
    dim: usize,
    grid: KnotGrid<T>,
    coeffs: Vec<T>,
    flipped: bool,
}

impl<T: Real> DecorrelationLayer<T> {
    /// Layer with every conditioner identically zero (the identity map).
    pub fn zeros(dim: usize, grid: KnotGrid<T>, flipped: bool) -> Self {
        let coeffs = vec![T::zero(); dim * dim.saturating_sub(1) / 2 * grid.num_basis()];
        Self { dim, grid, coeffs, flipped }
    }

    pub fn from_coeffs(dim: usize, grid: KnotGrid<T>, coeffs: Vec<T>, flipped: bool) -> Result<Self> {
        check_coeffs(&grid, &coeffs, dim * dim.saturating_sub(1) / 2)?;
        Ok(Self { dim, grid, coeffs, flipped })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn grid(&self) -> &KnotGrid<T> {
        &self.grid
    }

    #[inline]
    pub fn flipped(&self) -> bool {
        self.flipped
    }

    #[inline]
    pub fn num_pairs(&self) -> usize {
        self.dim * self.dim.saturating_sub(1) / 2
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub(crate) fn coeffs_mut(&mut self) -> &mut [T] {
        &mut self.coeffs
    }

    /// Coefficients of `λ_rc` (`c < r`, working coordinates).
    #[inline]
    pub fn pair_coeffs(&self, r: usize, c: usize) -> &[T] {
        let p = self.grid.num_basis();
        let k = pair_index(r, c);
        &self.coeffs[k * p..(k + 1) * p]
    }

    pub fn set_pair_coeffs(&mut self, r: usize, c: usize, coeffs: &[T]) -> Result<()> {
        if c >= r || r >= self.dim {
            return Err(GtmError::dim(format!("({r}, {c}) is not a strictly lower pair for J = {}", self.dim)));
        }
        check_coeffs(&self.grid, coeffs, 1)?;
        let p = self.grid.num_basis();
        let k = pair_index(r, c);
        self.coeffs[k * p..(k + 1) * p].copy_from_slice(coeffs);
        Ok(())
    }

    /// Makes `λ_rc` the constant `value`.
    pub fn set_constant(&mut self, r: usize, c: usize, value: T) -> Result<()> {
        self.set_pair_coeffs(r, c, &vec![value; self.grid.num_basis()])
    }

    pub fn conditioner(&self, r: usize, c: usize) -> ConditionerSpline<T> {
        ConditionerSpline { grid: self.grid.clone(), coeffs: self.pair_coeffs(r, c).to_vec() }
    }

    #[inline]
    pub fn lambda(&self, r: usize, c: usize, x: T) -> T {
        self.grid.eval_spline(self.pair_coeffs(r, c), x)
    }

    #[inline]
    pub fn lambda_deriv(&self, r: usize, c: usize, x: T) -> T {
        lambda_deriv(&self.grid, self.pair_coeffs(r, c), x)
    }

    /// `out_r = w_r + Σ_{c<r} λ_rc(w_c) w_c` in working coordinates.
    #[inline]
    pub(crate) fn plain_forward(&self, w: &[T], out: &mut [T]) {
        let p = self.grid.num_basis();
        out.copy_from_slice(w);
        for c in 0..self.dim.saturating_sub(1) {
            let b = self.grid.eval_clamped(w[c]);
            for r in c + 1..self.dim {
                let k = pair_index(r, c);
                out[r] = out[r] + b.dot(&self.coeffs[k * p..(k + 1) * p]) * w[c];
            }
        }
    }

    /// Inverse of [`Self::plain_forward`] by forward substitution.
    #[inline]
    pub(crate) fn plain_inverse(&self, z: &[T], out: &mut [T]) {
        for r in 0..self.dim {
            let mut acc = z[r];
            for c in 0..r {
                acc = acc - self.lambda(r, c, out[c]) * out[c];
            }
            out[r] = acc;
        }
    }

    /// Unchecked forward pass in original coordinates.
    #[inline]
    pub fn forward_into(&self, x: &[T], out: &mut [T]) {
        if self.flipped {
            let w = flip(x);
            let mut o = vec![T::zero(); self.dim];
            self.plain_forward(&w, &mut o);
            for (dst, src) in out.iter_mut().zip(o.iter().rev()) {
                *dst = *src;
            }
        } else {
            self.plain_forward(x, out);
        }
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        check_input(x, self.dim)?;
        let mut out = vec![T::zero(); self.dim];
        self.forward_into(x, &mut out);
        Ok(out)
    }

    #[inline]
    pub fn inverse_into(&self, z: &[T], out: &mut [T]) {
        if self.flipped {
            let w = flip(z);
            let mut o = vec![T::zero(); self.dim];
            self.plain_inverse(&w, &mut o);
            for (dst, src) in out.iter_mut().zip(o.iter().rev()) {
                *dst = *src;
            }
        } else {
            self.plain_inverse(z, out);
        }
    }

    pub fn inverse(&self, z: &[T]) -> Result<Vec<T>> {
        check_input(z, self.dim)?;
        let mut out = vec![T::zero(); self.dim];
        self.inverse_into(z, &mut out);
        Ok(out)
    }

    /// The layer matrix at input `x`, in original coordinates: unit lower
    /// triangular, or unit upper triangular when flipped.
    pub fn matrix(&self, x: &[T]) -> Matrix<T> {
        let j = self.dim;
        let mut m = Matrix::identity(j);
        let w = if self.flipped { flip(x) } else { x.to_vec() };
        for (r, c) in pairs(j) {
            let v = self.lambda(r, c, w[c]);
            if self.flipped {
                m[(j - 1 - r, j - 1 - c)] = v;
            } else {
                m[(r, c)] = v;
            }
        }
        m
    }
}

/// Applies the stack in order. Unchecked.
pub fn stack_forward_into<T: Real>(layers: &[DecorrelationLayer<T>], x: &[T], out: &mut [T]) {
    out.copy_from_slice(x);
    let mut buf = x.to_vec();
    for layer in layers {
        buf.copy_from_slice(out);
        layer.forward_into(&buf, out);
    }
}

pub fn stack_forward<T: Real>(layers: &[DecorrelationLayer<T>], x: &[T]) -> Result<Vec<T>> {
    check_stack(layers, x)?;
    let mut out = vec![T::zero(); x.len()];
    stack_forward_into(layers, x, &mut out);
    Ok(out)
}

/// Undoes the stack, last layer first.
pub fn stack_inverse<T: Real>(layers: &[DecorrelationLayer<T>], z: &[T]) -> Result<Vec<T>> {
    check_stack(layers, z)?;
    let mut cur = z.to_vec();
    let mut next = vec![T::zero(); z.len()];
    for layer in layers.iter().rev() {
        layer.inverse_into(&cur, &mut next);
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(cur)
}

fn check_stack<T: Real>(layers: &[DecorrelationLayer<T>], x: &[T]) -> Result<()> {
    if let Some(l) = layers.iter().position(|l| l.dim() != x.len()) {
        return Err(GtmError::dim(format!("layer {l} has dimension {} but input has {}", layers[l].dim(), x.len())));
    }
    check_input(x, x.len())
}

/// Each layer's matrix at its own input, in application order.
pub fn layer_matrices<T: Real>(layers: &[DecorrelationLayer<T>], x: &[T]) -> Vec<Matrix<T>> {
    let mut cur = x.to_vec();
    let mut next = vec![T::zero(); x.len()];
    let mut out = Vec::with_capacity(layers.len());
    for layer in layers {
        out.push(layer.matrix(&cur));
        layer.forward_into(&cur, &mut next);
        std::mem::swap(&mut cur, &mut next);
    }
    out
}

/// `Λ(x) = M_L ⋯ M_1` with every factor evaluated at its actual input, so
/// that `Λ(x) x` equals the sequential forward pass.
pub fn joint_lambda<T: Real>(layers: &[DecorrelationLayer<T>], x: &[T]) -> Result<Matrix<T>> {
    check_stack(layers, x)?;
    Ok(layer_matrices(layers, x)
        .into_iter()
        .fold(Matrix::identity(x.len()), |acc, m| m.matmul(&acc)))
}

/// Local pseudo-precision `P = ΛᵀΛ` at a latent point.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalPrecision<T> {
    pub matrix: Matrix<T>,
    pub at_point: Vec<T>,
}

pub fn local_precision<T: Real>(layers: &[DecorrelationLayer<T>], x: &[T]) -> Result<LocalPrecision<T>> {
    let lambda = joint_lambda(layers, x)?;
    Ok(LocalPrecision { matrix: lambda.transpose().matmul(&lambda), at_point: x.to_vec() })
}

/// `ρ_rc = -p_rc / sqrt(p_rr p_cc)` with unit diagonal.
pub fn local_pseudo_correlation<T: Real>(p: &LocalPrecision<T>) -> Result<Matrix<T>> {
    precision_to_correlation(&p.matrix)
}

pub(crate) fn precision_to_correlation<T: Real>(p: &Matrix<T>) -> Result<Matrix<T>> {
    let j = p.rows();
    if let Some(i) = (0..j).find(|&i| !(p[(i, i)] > T::zero())) {
        return Err(GtmError::numerical(format!("non-positive precision diagonal at {i}")));
    }
    let mut rho = Matrix::identity(j);
    for a in 0..j {
        for b in 0..j {
            if a != b {
                let v = -p[(a, b)] / (p[(a, a)] * p[(b, b)]).sqrt();
                rho[(a, b)] = v.max(-T::one()).min(T::one());
            }
        }
    }
    Ok(rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid() -> KnotGrid<f64> {
        KnotGrid::cubic(-4.0, 4.0, 8).unwrap()
    }

    fn random_layer(rng: &mut ChaCha8Rng, dim: usize, flipped: bool, scale: f64) -> DecorrelationLayer<f64> {
        let g = grid();
        let n = dim * (dim - 1) / 2 * g.num_basis();
        let coeffs = (0..n).map(|_| rng.random_range(-scale..scale)).collect();
        DecorrelationLayer::from_coeffs(dim, g, coeffs, flipped).unwrap()
    }

    fn random_stack(rng: &mut ChaCha8Rng, dim: usize, depth: usize, scale: f64) -> Vec<DecorrelationLayer<f64>> {
        (1..=depth).map(|l| random_layer(rng, dim, l % 2 == 0, scale)).collect()
    }

    fn random_point(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
        (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect()
    }

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    fn half_layer(flipped: bool) -> DecorrelationLayer<f64> {
        let mut l = DecorrelationLayer::zeros(2, grid(), flipped);
        l.set_constant(1, 0, 0.5).unwrap();
        l
    }

    #[test]
    fn flip_examples() {
        assert_eq!(flip(&[1, 2, 3]), vec![3, 2, 1]);
        assert_eq!(flip(&[7.5]), vec![7.5]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = random_point(&mut rng, 9);
        assert_eq!(flip(&flip(&v)), v);
    }

    #[test]
    fn pair_index_is_dense() {
        let idx: Vec<usize> = pairs(6).map(|(r, c)| pair_index(r, c)).collect();
        assert_eq!(idx, (0..15).collect::<Vec<_>>());
    }

    #[test]
    fn zero_layer_is_identity() {
        let l = DecorrelationLayer::zeros(4, grid(), false);
        let x = vec![1.0, -2.0, 3.0, 0.5];
        assert_eq!(l.forward(&x).unwrap(), x);
        assert_eq!(l.inverse(&x).unwrap(), x);
    }

    #[test]
    fn constant_half_example() {
        let l = half_layer(false);
        assert_eq!(l.forward(&[2.0, 1.0]).unwrap(), vec![2.0, 2.0]);
        assert_eq!(l.inverse(&[2.0, 2.0]).unwrap(), vec![2.0, 1.0]);
    }

    #[test]
    fn forward_matches_assembled_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for flipped in [false, true] {
            for _ in 0..50 {
                let l = random_layer(&mut rng, 5, flipped, 1.0);
                let x = random_point(&mut rng, 5);
                let m = l.matrix(&x);
                // Oracle: assemble from the conditioner objects directly.
                let mut oracle = Matrix::identity(5);
                let w = if flipped { flip(&x) } else { x.clone() };
                for (r, c) in pairs(5) {
                    let v = l.conditioner(r, c).eval(w[c]);
                    if flipped {
                        oracle[(4 - r, 4 - c)] = v;
                    } else {
                        oracle[(r, c)] = v;
                    }
                }
                assert_eq!(m, oracle);
                assert!(max_diff(&oracle.matvec(&x), &l.forward(&x).unwrap()) <= 1e-12);
            }
        }
    }

    #[test]
    fn conditioner_is_constant_beyond_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let l = random_layer(&mut rng, 2, false, 1.0);
        let s = l.conditioner(1, 0);
        assert_eq!(s.eval(9.0), s.eval(4.0));
        assert_eq!(s.eval(-40.0), s.eval(-4.0));
        assert_eq!(s.deriv(9.0), 0.0);
        let h = 1e-6;
        let fd = (s.eval(1.3 + h) - s.eval(1.3 - h)) / (2.0 * h);
        assert!((fd - s.deriv(1.3)).abs() < 1e-7);
    }

    #[test]
    fn round_trip_many_layers() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut worst: f64 = 0.0;
        for _ in 0..1000 {
            let dim = rng.random_range(2..=8);
            let flipped = rng.random_bool(0.5);
            let l = random_layer(&mut rng, dim, flipped, 1.0);
            let z = random_point(&mut rng, dim);
            let back = l.forward(&l.inverse(&z).unwrap()).unwrap();
            worst = worst.max(max_diff(&back, &z));
        }
        assert!(worst <= 1e-10, "{worst}");
    }

    #[test]
    fn joint_lambda_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let one = vec![random_layer(&mut rng, 3, false, 1.0)];
        let x = random_point(&mut rng, 3);
        assert_eq!(joint_lambda(&one, &x).unwrap(), one[0].matrix(&x));
        let zeros: Vec<_> = (0..3).map(|l| DecorrelationLayer::zeros(3, grid(), l % 2 == 1)).collect();
        assert_eq!(joint_lambda(&zeros, &x).unwrap(), Matrix::identity(3));
        for _ in 0..100 {
            let stack = random_stack(&mut rng, 3, 3, 1.0);
            let x = random_point(&mut rng, 3);
            let lam = joint_lambda(&stack, &x).unwrap();
            assert!(max_diff(&lam.matvec(&x), &stack_forward(&stack, &x).unwrap()) <= 1e-10);
            assert!((lam.determinant() - 1.0).abs() <= 1e-8);
        }
    }

    #[test]
    fn local_precision_examples() {
        let p = local_precision(&[half_layer(false)], &[0.3, -1.0]).unwrap();
        let want = Matrix::from_rows(&[vec![1.25, 0.5], vec![0.5, 1.0]]).unwrap();
        assert!(p.matrix.max_abs_diff(&want) <= 1e-15);
        let rho = local_pseudo_correlation(&p).unwrap();
        assert!((rho[(0, 1)] + 0.5 / 1.25f64.sqrt()).abs() < 1e-12);
        assert!((rho[(0, 1)] + 0.447_213_595_5).abs() < 1e-9);

        let zero = vec![DecorrelationLayer::zeros(3, grid(), false)];
        let p = local_precision(&zero, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(p.matrix, Matrix::identity(3));
        let rho = local_pseudo_correlation(&p).unwrap();
        assert_eq!(rho, Matrix::identity(3));
    }

    fn constant_stack(rng: &mut ChaCha8Rng, dim: usize, depth: usize) -> Vec<DecorrelationLayer<f64>> {
        (1..=depth)
            .map(|l| {
                let mut layer = DecorrelationLayer::zeros(dim, grid(), l % 2 == 0);
                for (r, c) in pairs(dim) {
                    layer.set_constant(r, c, rng.random_range(-0.8..0.8)).unwrap();
                }
                layer
            })
            .collect()
    }

    #[test]
    fn constant_coefficients_give_constant_precision() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let stack = constant_stack(&mut rng, 4, 3);
        let base = local_precision(&stack, &[0.0; 4]).unwrap().matrix;
        for _ in 0..100 {
            let x = random_point(&mut rng, 4);
            let p = local_precision(&stack, &x).unwrap().matrix;
            assert!(p.max_abs_diff(&base) <= 1e-10);
        }
    }

    #[test]
    fn pseudo_correlation_matches_gaussian_partial_correlation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let stack = constant_stack(&mut rng, 4, 2);
        let x = random_point(&mut rng, 4);
        let lam = joint_lambda(&stack, &x).unwrap();
        // Σ = Λ⁻¹Λ⁻ᵀ; partial correlations come from Σ⁻¹.
        let li = lam.inverse().unwrap();
        let sigma = li.matmul(&li.transpose());
        let prec = sigma.inverse().unwrap();
        let rho = local_pseudo_correlation(&local_precision(&stack, &x).unwrap()).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                if a != b {
                    let want = -prec[(a, b)] / (prec[(a, a)] * prec[(b, b)]).sqrt();
                    assert!((rho[(a, b)] - want).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn non_positive_diagonal_is_rejected() {
        let p = LocalPrecision { matrix: Matrix::from_rows(&[vec![0.0, 0.0], vec![0.0, 1.0]]).unwrap(), at_point: vec![0.0; 2] };
        assert!(local_pseudo_correlation(&p).is_err());
    }

    #[test]
    fn non_finite_input_rejected() {
        let l = DecorrelationLayer::zeros(2, grid(), false);
        assert!(l.forward(&[f64::NAN, 0.0]).is_err());
        assert!(l.inverse(&[0.0, f64::INFINITY]).is_err());
        assert!(l.forward(&[0.0]).is_err());
    }

    #[test]
    fn works_in_f32() {
        let g = KnotGrid::<f32>::cubic(-4.0, 4.0, 8).unwrap();
        let mut l = DecorrelationLayer::zeros(2, g, false);
        l.set_constant(1, 0, 0.5).unwrap();
        assert_eq!(l.forward(&[2.0f32, 1.0]).unwrap(), vec![2.0f32, 2.0]);
    }

    proptest! {
        #[test]
        fn stack_round_trip(seed in any::<u64>(), dim in 2usize..=10, depth in 1usize..=6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let stack = random_stack(&mut rng, dim, depth, 0.5);
            let z = random_point(&mut rng, dim);
            let x = stack_inverse(&stack, &z).unwrap();
            let back = stack_forward(&stack, &x).unwrap();
            prop_assert!(max_diff(&back, &z) <= 1e-10);
        }

        #[test]
        fn flip_conjugation(seed in any::<u64>(), dim in 2usize..=8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let flipped = random_layer(&mut rng, dim, true, 1.0);
            let plain = DecorrelationLayer::from_coeffs(dim, grid(), flipped.coeffs().to_vec(), false).unwrap();
            let x = random_point(&mut rng, dim);
            prop_assert_eq!(flipped.forward(&x).unwrap(), flip(&plain.forward(&flip(&x)).unwrap()));
        }

        #[test]
        fn unit_determinant(seed in any::<u64>(), dim in 2usize..=6, depth in 1usize..=4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let stack = random_stack(&mut rng, dim, depth, 0.5);
            let x = random_point(&mut rng, dim);
            for m in layer_matrices(&stack, &x) {
                prop_assert!((m.determinant() - 1.0).abs() <= 1e-12);
            }
            let p = local_precision(&stack, &x).unwrap();
            prop_assert!((p.matrix.determinant() - 1.0).abs() <= 1e-8 * p.matrix.as_slice().iter().fold(1.0f64, |m, v| m.max(v.abs())).powi(dim as i32));
            prop_assert!(p.matrix.max_abs_diff(&p.matrix.transpose()) <= 1e-10);
        }
    }
}
