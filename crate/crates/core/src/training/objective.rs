//! Penalised negative log-likelihood and its analytic gradient.
//!
//! The gradient is reverse-mode by hand. For one observation the backward
//! sweep runs through the layers in working (post-flip) coordinates:
//! with `out_r = w_r + Σ_{c<r} λ_rc(w_c) w_c`,
//! `w̄_c = ō_c + Σ_{r>c} ō_r (λ_rc(w_c) + λ'_rc(w_c) w_c)` and the
//! coefficient `k` of pair `(r, c)` receives `ō_r B_k(w_c) w_c`.
//!
//! The group-LASSO term depends on `Λ = M_L ⋯ M_1` through `P = ΛᵀΛ`; its
//! adjoint `Λ̄ = Λ(G + Gᵀ)` is split over the factors with prefix products
//! and then enters the same sweep through each factor's entries.

use rayon::prelude::*;

use crate::decorrelation::pairs;
use crate::error::{GtmError, Result};
use crate::linalg::Matrix;
use crate::marginal::{MarginalBasis, marginal_ridge, marginal_ridge_grad, theta_backprop};
use crate::model::GtmModel;
use crate::scalar::Real;
use crate::spline::{diff_penalty, diff_penalty_grad};

use super::penalty::{LassoMode, PenaltyConfig};

/// Observations per reduction chunk. Chunks are summed in index order, so
/// results do not depend on the thread count.
pub const CHUNK: usize = 256;

/// Position of every parameter block in the flat optimisation vector:
/// marginal `θ` blocks first, then each layer's conditioners in pair order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamLayout {
    pub marginal: Vec<(usize, usize)>,
    pub layers: Vec<(usize, usize)>,
    /// One scalar per pair (constant conditioners) instead of full splines.
    pub tied: bool,
    len: usize,
}

impl ParamLayout {
    pub fn new<T: Real>(model: &GtmModel<T>, tied: bool) -> Self {
        let mut off = 0;
        let mut marginal = Vec::new();
        for t in model.transformation().transforms() {
            let n = t.grid().num_basis();
            marginal.push((off, n));
            off += n;
        }
        let mut layers = Vec::new();
        for l in model.layers() {
            let n = if tied { l.num_pairs() } else { l.coeffs().len() };
            layers.push((off, n));
            off += n;
        }
        Self { marginal, layers, tied, len: off }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn pack<T: Real>(&self, model: &GtmModel<T>) -> Vec<T> {
        let mut out = Vec::with_capacity(self.len);
        for t in model.transformation().transforms() {
            out.extend_from_slice(t.theta());
        }
        for l in model.layers() {
            if self.tied {
                let p = l.grid().num_basis();
                out.extend(l.coeffs().chunks(p).map(|c| c.iter().copied().sum::<T>() / T::from_usize_lossy(p)));
            } else {
                out.extend_from_slice(l.coeffs());
            }
        }
        out
    }

    /// Writes `params` into `model` (which fixes grids, flips and scaling).
    pub fn unpack<T: Real>(&self, params: &[T], model: &mut GtmModel<T>) -> Result<()> {
        if params.len() != self.len {
            return Err(GtmError::dim(format!("expected {} parameters, got {}", self.len, params.len())));
        }
        if let Some(i) = params.iter().position(|v| !v.is_finite()) {
            return Err(GtmError::Parameter { index: i, msg: "non-finite parameter".into() });
        }
        let (trans, layers) = model.parts_mut();
        for (j, &(o, n)) in self.marginal.iter().enumerate() {
            let t = trans.transform(j).with_theta(params[o..o + n].to_vec()).map_err(|e| match e {
                GtmError::Parameter { index, msg } => GtmError::Parameter { index: o + index, msg },
                other => other,
            })?;
            trans.set_transform(j, t);
        }
        for (l, &(o, n)) in self.layers.iter().enumerate() {
            let p = layers[l].grid().num_basis();
            let dst = layers[l].coeffs_mut();
            if self.tied {
                for (k, &a) in params[o..o + n].iter().enumerate() {
                    dst[k * p..(k + 1) * p].iter_mut().for_each(|c| *c = a);
                }
            } else {
                dst.copy_from_slice(&params[o..o + n]);
            }
        }
        Ok(())
    }
}

/// Objective split into its additive parts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObjectiveParts<T> {
    pub nll: T,
    pub spline: T,
    pub lasso: T,
    pub marginal: T,
}

impl<T: Real> ObjectiveParts<T> {
    pub fn total(&self) -> T {
        self.nll + self.spline + self.lasso + self.marginal
    }
}

/// `τ₁ Σ ‖D₁c‖² + τ₂ Σ ‖D₂c‖²` over every conditioner of every layer.
pub fn spline_penalty<T: Real>(layers: &[crate::decorrelation::DecorrelationLayer<T>], tau1: T, tau2: T) -> T {
    let mut total = T::zero();
    for l in layers {
        let p = l.grid().num_basis();
        for c in l.coeffs().chunks(p) {
            if tau1 != T::zero() {
                total = total + tau1 * diff_penalty(c, 1);
            }
            if tau2 != T::zero() && p > 2 {
                total = total + tau2 * diff_penalty(c, 2);
            }
        }
    }
    total
}

/// Per-pair multipliers `v_rc` of the group-LASSO norms (lower triangle).
fn lasso_multipliers<T: Real>(pen: &PenaltyConfig<T>, dim: usize) -> Result<Option<Matrix<T>>> {
    if pen.tau3 == T::zero() {
        return Ok(None);
    }
    let mut v = Matrix::zeros(dim, dim);
    match pen.mode {
        LassoMode::None => return Ok(None),
        LassoMode::Lasso => pairs(dim).for_each(|(r, c)| v[(r, c)] = pen.tau3),
        LassoMode::Adaptive => {
            let w = pen
                .adaptive_weights
                .as_ref()
                .ok_or_else(|| GtmError::config("adaptive LASSO requires adaptive weights"))?;
            if w.rows() != dim || w.cols() != dim {
                return Err(GtmError::dim(format!("adaptive weights must be {dim}x{dim}")));
            }
            for (r, c) in pairs(dim) {
                v[(r, c)] = pen.tau3 / w[(r, c)];
            }
        }
    }
    Ok(Some(v))
}

/// Sum over chunks, in order, of a per-chunk reduction.
fn chunked<T: Real, R: Send>(rows: usize, f: impl Fn(std::ops::Range<usize>) -> Result<R> + Sync) -> Result<Vec<R>> {
    let starts: Vec<usize> = (0..rows).step_by(CHUNK).collect();
    starts.into_par_iter().map(|s| f(s..(s + CHUNK).min(rows))).collect()
}

/// `Σ_n p_rc,n²` for every pair, with `p` the local precision at `z̃_n`.
fn precision_sumsq<T: Real>(model: &GtmModel<T>, z_tilde: &Matrix<T>) -> Result<Vec<T>> {
    let j = model.dim();
    let parts = chunked::<T, Vec<T>>(z_tilde.rows(), |range| {
        let mut acc = vec![T::zero(); j * j];
        for i in range {
            let lam = crate::decorrelation::joint_lambda(model.layers(), z_tilde.row(i))?;
            let p = lam.transpose().matmul(&lam);
            for (r, c) in pairs(j) {
                acc[r * j + c] = acc[r * j + c] + p[(r, c)] * p[(r, c)];
            }
        }
        Ok(acc)
    })?;
    Ok(parts.into_iter().fold(vec![T::zero(); j * j], |a, b| a.iter().zip(&b).map(|(x, y)| *x + *y).collect()))
}

/// `z̃ = h(standardised y)` for every row.
pub fn latent_rows<T: Real>(model: &GtmModel<T>, data: &Matrix<T>) -> Matrix<T> {
    let j = model.dim();
    let mut out = Matrix::zeros(data.rows(), j);
    for i in 0..data.rows() {
        model.transformation().forward_into(data.row(i), out.row_mut(i));
    }
    out
}

/// `τ₃ Σ_{r>c} v_rc sqrt(Σ_n p_rc,n² + ε)` on latent points `z̃`.
pub fn group_lasso_penalty<T: Real>(model: &GtmModel<T>, z_tilde: &Matrix<T>, pen: &PenaltyConfig<T>) -> Result<T> {
    if z_tilde.rows() == 0 {
        return Err(GtmError::data("group LASSO needs at least one observation"));
    }
    let j = model.dim();
    let Some(v) = lasso_multipliers(pen, j)? else {
        return Ok(T::zero());
    };
    let ss = precision_sumsq(model, z_tilde)?;
    Ok(pairs(j).map(|(r, c)| v[(r, c)] * (ss[r * j + c] + pen.epsilon_smooth).sqrt()).sum())
}

struct LassoCtx<T> {
    /// `v_rc / norm_rc` on the lower triangle.
    scale: Matrix<T>,
}

/// Evaluates the objective for `model` with parameters laid out by `layout`.
pub struct Objective<'a, T> {
    pub layout: &'a ParamLayout,
    pub template: &'a GtmModel<T>,
    pub data: &'a Matrix<T>,
    pub penalties: &'a PenaltyConfig<T>,
}

impl<'a, T: Real> Objective<'a, T> {
    pub fn model_at(&self, params: &[T]) -> Result<GtmModel<T>> {
        let mut m = self.template.clone();
        self.layout.unpack(params, &mut m)?;
        Ok(m)
    }

    pub fn parts(&self, params: &[T]) -> Result<ObjectiveParts<T>> {
        let model = self.model_at(params)?;
        let nll_parts = chunked::<T, T>(self.data.rows(), |range| {
            let mut s = T::zero();
            for i in range {
                let l = model.log_density_unchecked(self.data.row(i));
                if !l.is_finite() {
                    return Err(GtmError::NonFiniteObjective { index: i });
                }
                s = s - l;
            }
            Ok(s)
        })?;
        let nll = nll_parts.into_iter().fold(T::zero(), |a, b| a + b);
        let lasso = if lasso_multipliers(self.penalties, model.dim())?.is_some() {
            group_lasso_penalty(&model, &latent_rows(&model, self.data), self.penalties)?
        } else {
            T::zero()
        };
        Ok(ObjectiveParts {
            nll,
            spline: spline_penalty(model.layers(), self.penalties.tau1, self.penalties.tau2),
            lasso,
            marginal: model
                .transformation()
                .transforms()
                .iter()
                .map(|t| marginal_ridge(t.theta(), self.penalties.tau4))
                .sum(),
        })
    }

    pub fn value(&self, params: &[T]) -> Result<T> {
        self.parts(params).map(|p| p.total())
    }

    /// Objective value; writes the gradient into `grad`.
    pub fn value_and_grad(&self, params: &[T], grad: &mut [T]) -> Result<T> {
        let model = self.model_at(params)?;
        let j = model.dim();
        let pen = self.penalties;

        let mult = lasso_multipliers(pen, j)?;
        let mut lasso_value = T::zero();
        let lasso = match mult {
            Some(v) => {
                let zt = latent_rows(&model, self.data);
                let ss = precision_sumsq(&model, &zt)?;
                let mut scale = Matrix::zeros(j, j);
                for (r, c) in pairs(j) {
                    let norm = (ss[r * j + c] + pen.epsilon_smooth).sqrt();
                    lasso_value = lasso_value + v[(r, c)] * norm;
                    scale[(r, c)] = v[(r, c)] / norm;
                }
                Some(LassoCtx { scale })
            }
            None => None,
        };

        let coeff_len: usize = model.layers().iter().map(|l| l.coeffs().len()).sum();
        let ubar_len: usize = self.layout.marginal.iter().map(|m| m.1).sum();
        let parts = chunked::<T, (T, Vec<T>)>(self.data.rows(), |range| {
            let mut acc = vec![T::zero(); ubar_len + coeff_len];
            let mut ws = Workspace::new(&model);
            let mut s = T::zero();
            for i in range {
                let v = ws.observation(&model, self.layout, self.data.row(i), lasso.as_ref(), &mut acc);
                if !v.is_finite() {
                    return Err(GtmError::NonFiniteObjective { index: i });
                }
                s = s + v;
            }
            Ok((s, acc))
        })?;
        let mut nll = T::zero();
        let mut acc = vec![T::zero(); ubar_len + coeff_len];
        for (v, a) in parts {
            nll = nll + v;
            acc.iter_mut().zip(&a).for_each(|(x, y)| *x = *x + *y);
        }

        grad.iter_mut().for_each(|g| *g = T::zero());
        let mut u_off = 0;
        let mut marginal_value = T::zero();
        for (jj, &(o, n)) in self.layout.marginal.iter().enumerate() {
            let theta = model.transformation().transform(jj).theta();
            theta_backprop(theta, &acc[u_off..u_off + n], &mut grad[o..o + n]);
            marginal_value = marginal_value + marginal_ridge(theta, pen.tau4);
            marginal_ridge_grad(theta, pen.tau4, &mut grad[o..o + n]);
            u_off += n;
        }
        let mut c_off = ubar_len;
        let mut spline_value = T::zero();
        for (l, &(o, n)) in self.layout.layers.iter().enumerate() {
            let layer = &model.layers()[l];
            let p = layer.grid().num_basis();
            let cg = &acc[c_off..c_off + layer.coeffs().len()];
            if self.layout.tied {
                for k in 0..n {
                    grad[o + k] = cg[k * p..(k + 1) * p].iter().copied().sum();
                }
            } else {
                let g = &mut grad[o..o + n];
                g.copy_from_slice(cg);
                for (k, c) in layer.coeffs().chunks(p).enumerate() {
                    let gk = &mut g[k * p..(k + 1) * p];
                    if pen.tau1 != T::zero() {
                        spline_value = spline_value + pen.tau1 * diff_penalty(c, 1);
                        diff_penalty_grad(c, 1, pen.tau1, gk);
                    }
                    if pen.tau2 != T::zero() && p > 2 {
                        spline_value = spline_value + pen.tau2 * diff_penalty(c, 2);
                        diff_penalty_grad(c, 2, pen.tau2, gk);
                    }
                }
            }
            c_off += layer.coeffs().len();
        }
        Ok(nll + spline_value + lasso_value + marginal_value)
    }
}

/// Per-thread buffers for one observation's forward and backward pass.
struct Workspace<T> {
    j: usize,
    /// Layer inputs in original coordinates; `xs[l]` feeds layer `l`.
    xs: Vec<Vec<T>>,
    w: Vec<T>,
    bar: Vec<T>,
    wbar: Vec<T>,
    mats: Vec<Matrix<T>>,
    prefix: Vec<Matrix<T>>,
    mbar: Vec<Matrix<T>>,
    vbasis: Vec<(MarginalBasis<T>, T)>,
}

impl<T: Real> Workspace<T> {
    fn new(model: &GtmModel<T>) -> Self {
        let j = model.dim();
        let l = model.depth();
        Self {
            j,
            xs: vec![vec![T::zero(); j]; l + 1],
            w: vec![T::zero(); j],
            bar: vec![T::zero(); j],
            wbar: vec![T::zero(); j],
            mats: Vec::with_capacity(l),
            prefix: Vec::with_capacity(l + 1),
            mbar: vec![Matrix::zeros(j, j); l],
            vbasis: Vec::with_capacity(j),
        }
    }

    /// Adds this observation's gradient into `acc` (marginal `ῡ` blocks then
    /// raw conditioner coefficients) and returns its NLL contribution.
    fn observation(
        &mut self,
        model: &GtmModel<T>,
        layout: &ParamLayout,
        y: &[T],
        lasso: Option<&LassoCtx<T>>,
        acc: &mut [T],
    ) -> T {
        let j = self.j;
        let trans = model.transformation();
        let layers = model.layers();
        let nl = layers.len();

        // Marginals.
        let mut nll = T::from_usize_lossy(j) * T::ln_sqrt_2pi();
        self.vbasis.clear();
        for k in 0..j {
            let st = trans.standardization()[k];
            let t = trans.transform(k);
            let b = t.basis(st.apply(y[k]));
            let u = t.params().upsilon();
            let z = b.dot_value(u);
            let s = b.dot_slope(u);
            self.xs[0][k] = z;
            nll = nll - s.ln() + st.sd.ln();
            self.vbasis.push((b, s));
        }

        // Decorrelation stack.
        for l in 0..nl {
            let (head, tail) = self.xs.split_at_mut(l + 1);
            layers[l].forward_into(&head[l], &mut tail[0]);
        }
        let z = &self.xs[nl];
        nll = nll + T::lit(0.5) * z.iter().fold(T::zero(), |a, &v| a + v * v);

        // Group-LASSO adjoints of the layer matrices.
        if let Some(ctx) = lasso {
            self.mats.clear();
            self.prefix.clear();
            self.prefix.push(Matrix::identity(j));
            for l in 0..nl {
                let m = layers[l].matrix(&self.xs[l]);
                let next = m.matmul(&self.prefix[l]);
                self.mats.push(m);
                self.prefix.push(next);
            }
            let lam = &self.prefix[nl];
            let p = lam.transpose().matmul(lam);
            let mut g = Matrix::zeros(j, j);
            for (r, c) in pairs(j) {
                g[(r, c)] = ctx.scale[(r, c)] * p[(r, c)];
            }
            let gs = {
                let mut s = g.clone();
                for (r, c) in pairs(j) {
                    s[(c, r)] = g[(r, c)];
                }
                s
            };
            let mut bbar = lam.matmul(&gs);
            for l in (0..nl).rev() {
                self.mbar[l] = bbar.matmul(&self.prefix[l].transpose());
                bbar = self.mats[l].transpose().matmul(&bbar);
            }
        }

        // Backward sweep.
        self.bar.copy_from_slice(&self.xs[nl]);
        let mut coeff_base: usize = layers.iter().map(|l| l.coeffs().len()).sum();
        let ubar_len: usize = layout.marginal.iter().map(|m| m.1).sum();
        for l in (0..nl).rev() {
            let layer = &layers[l];
            let grid = layer.grid();
            let p = grid.num_basis();
            coeff_base -= layer.coeffs().len();
            let cacc = &mut acc[ubar_len + coeff_base..ubar_len + coeff_base + layer.coeffs().len()];
            let flipped = layer.flipped();
            let x = &self.xs[l];
            for a in 0..j {
                let src = if flipped { j - 1 - a } else { a };
                self.w[a] = x[src];
                self.wbar[a] = self.bar[src];
            }
            // self.wbar now holds ō in working coordinates; build w̄ in bar.
            let obar = self.wbar.clone();
            for c in 0..j {
                let mut wb = obar[c];
                if c + 1 < j {
                    let wc = self.w[c];
                    let b = grid.eval_clamped(wc);
                    let inside = wc >= grid.lower() && wc <= grid.upper();
                    let d = grid.deriv_clamped(wc, 1);
                    for r in c + 1..j {
                        let k = crate::decorrelation::pair_index(r, c);
                        let coeffs = &layer.coeffs()[k * p..(k + 1) * p];
                        let lam = b.dot(coeffs);
                        let dlam = if inside { d.dot(coeffs) } else { T::zero() };
                        let mut a_rc = T::zero();
                        if lasso.is_some() {
                            let (mr, mc) = if flipped { (j - 1 - r, j - 1 - c) } else { (r, c) };
                            a_rc = self.mbar[l][(mr, mc)];
                        }
                        wb = wb + obar[r] * (lam + dlam * wc) + a_rc * dlam;
                        let coef_scale = obar[r] * wc + a_rc;
                        let dst = &mut cacc[k * p + b.offset..k * p + b.offset + b.len()];
                        for (o, &bv) in dst.iter_mut().zip(b.values()) {
                            *o = *o + coef_scale * bv;
                        }
                    }
                }
                self.wbar[c] = wb;
            }
            for a in 0..j {
                let dst = if flipped { j - 1 - a } else { a };
                self.bar[dst] = self.wbar[a];
            }
        }

        // Marginal adjoints onto υ.
        let mut u_off = 0;
        for k in 0..j {
            let n = layout.marginal[k].1;
            let (b, slope) = &self.vbasis[k];
            let zbar = self.bar[k];
            for q in 0..b.len {
                let idx = u_off + b.offset + q;
                acc[idx] = acc[idx] + zbar * b.value[q] - b.slope[q] / *slope;
            }
            u_off += n;
        }
        nll
    }
}
