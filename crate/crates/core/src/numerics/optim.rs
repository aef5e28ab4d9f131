//! BFGS quasi-Newton minimization with a strong-Wolfe line search.

use nalgebra::{DMatrix, DVector};

use super::diff::num_gradient;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimizeOptions {
    pub max_iter: usize,
    /// Converged when the gradient infinity-norm falls below this.
    pub grad_tol: f64,
    /// Converged when |f_k - f_{k+1}| <= rel_f_tol * max(|f_k|, 1).
    pub rel_f_tol: f64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            grad_tol: 1e-6,
            rel_f_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub converged: bool,
    pub n_iter: usize,
    pub grad_inf_norm: f64,
}

/// Minimize `f` using central-difference gradients.
pub fn minimize<F>(f: F, x0: &[f64], opts: &MinimizeOptions) -> MinimizeResult
where
    F: Fn(&[f64]) -> f64,
{
    let grad = |x: &[f64]| num_gradient(&f, x, None);
    minimize_with_gradient(&f, grad, x0, opts)
}

/// Minimize `f` given its gradient. Never panics on non-finite values: a
/// non-finite objective is treated as an infeasible trial step.
pub fn minimize_with_gradient<F, G>(
    f: F,
    grad: G,
    x0: &[f64],
    opts: &MinimizeOptions,
) -> MinimizeResult
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> DVector<f64>,
{
    let n = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let mut fx = f(x.as_slice());
    let mut g = grad(x.as_slice());
    let mut h_inv = DMatrix::<f64>::identity(n, n);
    let mut fresh = true;
    let mut iter = 0;

    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return MinimizeResult {
            x: x0.to_vec(),
            f: fx,
            converged: false,
            n_iter: 0,
            grad_inf_norm: f64::INFINITY,
        };
    }

    let converged = loop {
        let gnorm = g.amax();
        if gnorm < opts.grad_tol {
            break true;
        }
        if iter >= opts.max_iter {
            break false;
        }
        iter += 1;

        let mut p = -(&h_inv * &g);
        let mut slope = p.dot(&g);
        if !(slope < 0.0) {
            h_inv = DMatrix::identity(n, n);
            fresh = true;
            p = -g.clone();
            slope = p.dot(&g);
        }
        let alpha0 = if fresh {
            (1.0 / p.amax()).min(1.0)
        } else {
            1.0
        };

        let ls = line_search(&f, &grad, &x, fx, &p, slope, alpha0);
        let Some((alpha, f_new, g_new)) = ls else {
            if fresh {
                break false;
            }
            // discard curvature information and retry along -g
            h_inv = DMatrix::identity(n, n);
            fresh = true;
            continue;
        };

        let s = &p * alpha;
        let y = &g_new - &g;
        let f_old = fx;
        x += &s;
        fx = f_new;
        g = g_new;

        let sy = s.dot(&y);
        if sy > 1e-10 * s.norm() * y.norm() {
            if fresh {
                h_inv *= sy / y.dot(&y);
                fresh = false;
            }
            let rho = 1.0 / sy;
            let hy = &h_inv * &y;
            let yhy = y.dot(&hy);
            // H+ = H - rho (s hy' + hy s') + (rho^2 y'Hy + rho) s s'
            h_inv -= (&s * hy.transpose() + &hy * s.transpose()) * rho;
            h_inv += (&s * s.transpose()) * (rho * rho * yhy + rho);
        }

        if (f_old - fx).abs() <= opts.rel_f_tol * f_old.abs().max(1.0) {
            break true;
        }
    };

    MinimizeResult {
        grad_inf_norm: g.amax(),
        x: x.as_slice().to_vec(),
        f: fx,
        converged,
        n_iter: iter,
    }
}

const C1: f64 = 1e-4;
const C2: f64 = 0.9;

/// Strong-Wolfe line search (bracketing then zoom).
#[allow(clippy::too_many_arguments)]
fn line_search<F, G>(
    f: &F,
    grad: &G,
    x: &DVector<f64>,
    f0: f64,
    p: &DVector<f64>,
    slope0: f64,
    alpha0: f64,
) -> Option<(f64, f64, DVector<f64>)>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> DVector<f64>,
{
    let eval = |a: f64| -> f64 {
        let xt = x + p * a;
        let ft = f(xt.as_slice());
        if ft.is_finite() {
            ft
        } else {
            f64::INFINITY
        }
    };
    let eval_grad = |a: f64| -> DVector<f64> {
        let xt = x + p * a;
        grad(xt.as_slice())
    };

    let mut a_prev = 0.0;
    let mut f_prev = f0;
    let mut d_prev = slope0;
    let mut a = alpha0;
    for i in 0..30 {
        let fa = eval(a);
        if !fa.is_finite() {
            // infeasible: shrink and retry before bracketing
            a = 0.5 * (a_prev + a);
            if a - a_prev < 1e-16 {
                return None;
            }
            continue;
        }
        if fa > f0 + C1 * a * slope0 || (i > 0 && fa >= f_prev) {
            return zoom(
                &eval, &eval_grad, f0, slope0, p, a_prev, f_prev, d_prev, a, fa,
            );
        }
        let ga = eval_grad(a);
        let da = ga.dot(p);
        if da.abs() <= -C2 * slope0 {
            return Some((a, fa, ga));
        }
        if da >= 0.0 {
            return zoom(&eval, &eval_grad, f0, slope0, p, a, fa, da, a_prev, f_prev);
        }
        a_prev = a;
        f_prev = fa;
        d_prev = da;
        a *= 2.0;
    }
    None
}

#[allow(clippy::too_many_arguments)]
fn zoom<E, EG>(
    eval: &E,
    eval_grad: &EG,
    f0: f64,
    slope0: f64,
    p: &DVector<f64>,
    mut a_lo: f64,
    mut f_lo: f64,
    mut d_lo: f64,
    mut a_hi: f64,
    mut f_hi: f64,
) -> Option<(f64, f64, DVector<f64>)>
where
    E: Fn(f64) -> f64,
    EG: Fn(f64) -> DVector<f64>,
{
    for _ in 0..40 {
        let width = (a_hi - a_lo).abs();
        if width < 1e-14 * a_lo.abs().max(a_hi.abs()).max(1e-300) {
            break;
        }
        // quadratic interpolation from (a_lo, f_lo, d_lo) and (a_hi, f_hi),
        // kept inside the middle 80% of the bracket
        let mut a = if f_hi.is_finite() {
            let dx = a_hi - a_lo;
            let denom = 2.0 * (f_hi - f_lo - d_lo * dx);
            if denom > 0.0 {
                a_lo - d_lo * dx * dx / denom
            } else {
                0.5 * (a_lo + a_hi)
            }
        } else {
            0.5 * (a_lo + a_hi)
        };
        let (lo, hi) = if a_lo < a_hi {
            (a_lo, a_hi)
        } else {
            (a_hi, a_lo)
        };
        let margin = 0.1 * (hi - lo);
        if !(a > lo + margin && a < hi - margin) {
            a = 0.5 * (a_lo + a_hi);
        }
        let fa = eval(a);
        if !fa.is_finite() || fa > f0 + C1 * a * slope0 || fa >= f_lo {
            a_hi = a;
            f_hi = fa;
        } else {
            let ga = eval_grad(a);
            let da = ga.dot(p);
            if da.abs() <= -C2 * slope0 {
                return Some((a, fa, ga));
            }
            if da * (a_hi - a_lo) >= 0.0 {
                a_hi = a_lo;
                f_hi = f_lo;
            }
            a_lo = a;
            f_lo = fa;
            d_lo = da;
        }
    }
    // accept the best sufficient-decrease point found, if any
    if a_lo > 0.0 && f_lo < f0 {
        let g = eval_grad(a_lo);
        return Some((a_lo, f_lo, g));
    }
    None
}
