//! Limited-memory BFGS with a strong-Wolfe line search.
//!
//! The line search is the bracketing/zoom scheme of Nocedal & Wright
//! (Algorithms 3.5 and 3.6) with safeguarded cubic interpolation. Objective
//! failures and non-finite values inside the line search count as `+inf`, so
//! the step simply shrinks.

use std::collections::VecDeque;

use crate::error::Result;
use crate::scalar::Real;

#[derive(Clone, Debug)]
pub struct LbfgsOptions<T> {
    pub max_iters: usize,
    /// Stop once `max |g_i| <= grad_tol`.
    pub grad_tol: T,
    /// Stop once the accepted decrease is below `rel_obj_tol · max(|f|, 1)`.
    pub rel_obj_tol: T,
    pub memory: usize,
    pub max_line_search: usize,
    pub c1: T,
    pub c2: T,
}

impl<T: Real> Default for LbfgsOptions<T> {
    fn default() -> Self {
        Self {
            max_iters: 500,
            grad_tol: T::lit(1e-6),
            rel_obj_tol: T::lit(1e-10),
            memory: 10,
            max_line_search: 30,
            c1: T::lit(1e-4),
            c2: T::lit(0.9),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IterControl {
    Continue,
    Stop,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LbfgsStop {
    GradTol,
    RelObjTol,
    MaxIters,
    Callback,
    LineSearchFailed,
}

#[derive(Clone, Debug)]
pub struct LbfgsOutcome<T> {
    pub x: Vec<T>,
    pub f: T,
    pub grad_norm: T,
    pub iterations: usize,
    pub stop: LbfgsStop,
    /// Objective at the start and after every accepted step.
    pub trace: Vec<T>,
    pub restarts: usize,
}

struct Point<T> {
    alpha: T,
    f: T,
    g: Vec<T>,
    dphi: T,
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + x * y)
}

fn inf_norm<T: Real>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |m, v| m.max(v.abs()))
}

struct LineSearch<'a, T, F> {
    fg: &'a mut F,
    x: &'a [T],
    d: &'a [T],
    f0: T,
    dphi0: T,
    c1: T,
    c2: T,
    budget: usize,
    trial: Vec<T>,
}

impl<T: Real, F: FnMut(&[T], &mut [T]) -> Result<T>> LineSearch<'_, T, F> {
    fn eval(&mut self, alpha: T) -> Point<T> {
        self.budget = self.budget.saturating_sub(1);
        for ((t, &x), &d) in self.trial.iter_mut().zip(self.x).zip(self.d) {
            *t = x + alpha * d;
        }
        let mut g = vec![T::zero(); self.x.len()];
        let f = match (self.fg)(&self.trial, &mut g) {
            Ok(f) if f.is_finite() && g.iter().all(|v| v.is_finite()) => f,
            _ => T::infinity(),
        };
        let dphi = if f.is_finite() { dot(&g, self.d) } else { T::nan() };
        Point { alpha, f, g, dphi }
    }

    fn armijo(&self, p: &Point<T>) -> bool {
        p.f <= self.f0 + self.c1 * p.alpha * self.dphi0
    }

    fn curvature(&self, p: &Point<T>) -> bool {
        p.dphi.abs() <= -self.c2 * self.dphi0
    }

    fn run(&mut self, alpha0: T) -> Option<Point<T>> {
        let zero = Point { alpha: T::zero(), f: self.f0, g: Vec::new(), dphi: self.dphi0 };
        let mut prev = zero;
        let mut alpha = alpha0;
        let mut first = true;
        while self.budget > 0 {
            let cur = self.eval(alpha);
            if !self.armijo(&cur) || (!first && cur.f >= prev.f) {
                return self.zoom(prev, cur);
            }
            if self.curvature(&cur) {
                return Some(cur);
            }
            if cur.dphi >= T::zero() {
                return self.zoom(cur, prev);
            }
            alpha = cur.alpha * T::lit(2.0);
            prev = cur;
            first = false;
        }
        // Budget exhausted while still expanding: the last point satisfied Armijo.
        (prev.alpha > T::zero()).then_some(prev)
    }

    fn interpolate(&self, lo: &Point<T>, hi: &Point<T>) -> T {
        let (a, b) = (lo.alpha, hi.alpha);
        let width = b - a;
        let bisect = a + width * T::lit(0.5);
        if !hi.f.is_finite() || !hi.dphi.is_finite() || !lo.dphi.is_finite() {
            return bisect;
        }
        // Minimiser of the cubic through (a, f_a, g_a), (b, f_b, g_b).
        let d1 = lo.dphi + hi.dphi - T::lit(3.0) * (lo.f - hi.f) / (a - b);
        let disc = d1 * d1 - lo.dphi * hi.dphi;
        if disc < T::zero() {
            return bisect;
        }
        let d2 = disc.sqrt() * (b - a).signum();
        let t = b - (b - a) * (hi.dphi + d2 - d1) / (hi.dphi - lo.dphi + T::lit(2.0) * d2);
        let (mn, mx) = if a < b { (a, b) } else { (b, a) };
        let margin = (mx - mn) * T::lit(0.1);
        if !t.is_finite() || t < mn + margin || t > mx - margin {
            bisect
        } else {
            t
        }
    }

    fn zoom(&mut self, mut lo: Point<T>, mut hi: Point<T>) -> Option<Point<T>> {
        while self.budget > 0 {
            let alpha = self.interpolate(&lo, &hi);
            if (hi.alpha - lo.alpha).abs() <= T::epsilon() * lo.alpha.abs().max(T::one()) {
                break;
            }
            let cur = self.eval(alpha);
            if !self.armijo(&cur) || cur.f >= lo.f {
                hi = cur;
            } else {
                if self.curvature(&cur) {
                    return Some(cur);
                }
                if cur.dphi * (hi.alpha - lo.alpha) >= T::zero() {
                    hi = lo;
                }
                lo = cur;
            }
        }
        // Fall back to the best Armijo point found, if it moved at all.
        (lo.alpha > T::zero() && lo.f < self.f0).then_some(lo)
    }
}

/// Minimises `fg` (value and gradient) from `x0`.
///
/// `on_iter(iteration, x, f)` runs after every accepted step and may request
/// a stop. An error from the very first evaluation is returned as is.
pub fn minimize<T, F, C>(mut fg: F, x0: Vec<T>, opts: &LbfgsOptions<T>, mut on_iter: C) -> Result<LbfgsOutcome<T>>
where
    T: Real,
    F: FnMut(&[T], &mut [T]) -> Result<T>,
    C: FnMut(usize, &[T], T) -> IterControl,
{
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![T::zero(); n];
    let mut f = fg(&x, &mut g)?;
    let mut trace = vec![f];
    let mut history: VecDeque<(Vec<T>, Vec<T>, T)> = VecDeque::with_capacity(opts.memory);
    let mut restarts = 0;
    let mut iterations = 0;

    if inf_norm(&g) <= opts.grad_tol {
        return Ok(LbfgsOutcome { grad_norm: inf_norm(&g), x, f, iterations, stop: LbfgsStop::GradTol, trace, restarts });
    }

    let stop = loop {
        if iterations >= opts.max_iters {
            break LbfgsStop::MaxIters;
        }
        let mut d = two_loop(&g, &history);
        let mut dphi0 = dot(&g, &d);
        if !(dphi0 < T::zero()) {
            history.clear();
            d = g.iter().map(|&v| -v).collect();
            dphi0 = dot(&g, &d);
        }
        let alpha0 = if history.is_empty() { T::one().min(inf_norm(&g).recip()) } else { T::one() };

        let mut ls = LineSearch {
            fg: &mut fg,
            x: &x,
            d: &d,
            f0: f,
            dphi0,
            c1: opts.c1,
            c2: opts.c2,
            budget: opts.max_line_search,
            trial: vec![T::zero(); n],
        };
        let step = match ls.run(alpha0) {
            Some(p) => Some((p, d)),
            None if !history.is_empty() => {
                // One steepest-descent restart with fresh curvature memory.
                restarts += 1;
                history.clear();
                let sd: Vec<T> = g.iter().map(|&v| -v).collect();
                let mut ls = LineSearch {
                    fg: &mut fg,
                    x: &x,
                    d: &sd,
                    f0: f,
                    dphi0: dot(&g, &sd),
                    c1: opts.c1,
                    c2: opts.c2,
                    budget: opts.max_line_search,
                    trial: vec![T::zero(); n],
                };
                ls.run(T::one().min(inf_norm(&g).recip())).map(|p| (p, sd))
            }
            None => None,
        };
        let Some((p, d)) = step else {
            break LbfgsStop::LineSearchFailed;
        };

        let s: Vec<T> = d.iter().map(|&v| p.alpha * v).collect();
        let y: Vec<T> = p.g.iter().zip(&g).map(|(&a, &b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > T::lit(1e-10) * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back((s.clone(), y, sy.recip()));
        }
        for (xi, si) in x.iter_mut().zip(&s) {
            *xi = *xi + *si;
        }
        let f_prev = f;
        f = p.f;
        g = p.g;
        iterations += 1;
        trace.push(f);

        if on_iter(iterations, &x, f) == IterControl::Stop {
            break LbfgsStop::Callback;
        }
        if inf_norm(&g) <= opts.grad_tol {
            break LbfgsStop::GradTol;
        }
        if f_prev - f <= opts.rel_obj_tol * f.abs().max(T::one()) {
            break LbfgsStop::RelObjTol;
        }
    };

    Ok(LbfgsOutcome { grad_norm: inf_norm(&g), x, f, iterations, stop, trace, restarts })
}

/// Two-loop recursion returning the search direction `-H g`.
fn two_loop<T: Real>(g: &[T], history: &VecDeque<(Vec<T>, Vec<T>, T)>) -> Vec<T> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = *rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi = *qi - a * *yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = dot(s, y) / dot(y, y);
        for qi in q.iter_mut() {
            *qi = *qi * gamma;
        }
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
        let b = *rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi = *qi + (a - b) * *si;
        }
    }
    q.iter().map(|&v| -v).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64], g: &mut [f64]) -> Result<f64> {
        let (a, b) = (x[0], x[1]);
        g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
        g[1] = 200.0 * (b - a * a);
        Ok((1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2))
    }

    #[test]
    fn minimises_rosenbrock() {
        let opts = LbfgsOptions { grad_tol: 1e-8, rel_obj_tol: 0.0, ..Default::default() };
        let out = minimize(rosenbrock, vec![-1.2, 1.0], &opts, |_, _, _| IterControl::Continue).unwrap();
        assert_eq!(out.stop, LbfgsStop::GradTol);
        assert!((out.x[0] - 1.0).abs() < 1e-6 && (out.x[1] - 1.0).abs() < 1e-6);
        assert!(out.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn quadratic_in_many_dimensions() {
        let n = 50;
        let fg = |x: &[f64], g: &mut [f64]| -> Result<f64> {
            let mut f = 0.0;
            for i in 0..x.len() {
                let c = (i + 1) as f64;
                f += 0.5 * c * (x[i] - 1.0).powi(2);
                g[i] = c * (x[i] - 1.0);
            }
            Ok(f)
        };
        let out = minimize(fg, vec![0.0; n], &LbfgsOptions::default(), |_, _, _| IterControl::Continue).unwrap();
        assert!(out.x.iter().all(|v| (v - 1.0).abs() < 1e-5));
    }

    #[test]
    fn non_finite_region_is_avoided() {
        // f = x - ln(x) is undefined for x <= 0; minimum at x = 1.
        let fg = |x: &[f64], g: &mut [f64]| -> Result<f64> {
            g[0] = 1.0 - 1.0 / x[0];
            Ok(x[0] - x[0].ln())
        };
        let out = minimize(fg, vec![8.0], &LbfgsOptions::default(), |_, _, _| IterControl::Continue).unwrap();
        assert!((out.x[0] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn callback_can_stop() {
        let opts = LbfgsOptions::default();
        let out = minimize(rosenbrock, vec![-1.2, 1.0], &opts, |it, _, _| {
            if it == 3 { IterControl::Stop } else { IterControl::Continue }
        })
        .unwrap();
        assert_eq!(out.stop, LbfgsStop::Callback);
        assert_eq!(out.iterations, 3);
    }

    #[test]
    fn single_precision_quadratic() {
        let fg = |x: &[f32], g: &mut [f32]| -> Result<f32> {
            g[0] = 2.0 * (x[0] - 3.0);
            g[1] = 8.0 * (x[1] + 1.0);
            Ok((x[0] - 3.0).powi(2) + 4.0 * (x[1] + 1.0).powi(2))
        };
        let opts = LbfgsOptions { grad_tol: 1e-4, ..Default::default() };
        let out = minimize(fg, vec![0.0f32, 0.0], &opts, |_, _, _| IterControl::Continue).unwrap();
        assert!((out.x[0] - 3.0).abs() < 1e-3 && (out.x[1] + 1.0).abs() < 1e-3);
    }
}
