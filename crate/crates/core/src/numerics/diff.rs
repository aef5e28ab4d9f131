//! Central finite differences.

use nalgebra::{DMatrix, DVector};

/// Default step for coordinate `x`.
#[inline]
pub fn default_step(x: f64) -> f64 {
    1e-5_f64.max(1e-5 * x.abs())
}

fn steps(x: &[f64], h: Option<f64>) -> Vec<f64> {
    x.iter()
        .map(|&xi| h.unwrap_or_else(|| default_step(xi)))
        .collect()
}

/// Central-difference gradient. `h = None` uses [`default_step`].
pub fn num_gradient<F>(f: F, x: &[f64], h: Option<f64>) -> DVector<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let hs = steps(x, h);
    let mut xp = x.to_vec();
    DVector::from_iterator(
        x.len(),
        (0..x.len()).map(|i| {
            xp[i] = x[i] + hs[i];
            let fp = f(&xp);
            xp[i] = x[i] - hs[i];
            let fm = f(&xp);
            xp[i] = x[i];
            (fp - fm) / (2.0 * hs[i])
        }),
    )
}

/// Central-difference Hessian, symmetrized.
pub fn num_hessian<F>(f: F, x: &[f64], h: Option<f64>) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let n = x.len();
    let hs = steps(x, h);
    let f0 = f(x);
    let mut hess = DMatrix::zeros(n, n);
    let mut xp = x.to_vec();
    for i in 0..n {
        xp[i] = x[i] + hs[i];
        let fp = f(&xp);
        xp[i] = x[i] - hs[i];
        let fm = f(&xp);
        xp[i] = x[i];
        hess[(i, i)] = (fp - 2.0 * f0 + fm) / (hs[i] * hs[i]);
    }
    for i in 0..n {
        for j in 0..i {
            let mut eval = |si: f64, sj: f64| {
                xp[i] = x[i] + si * hs[i];
                xp[j] = x[j] + sj * hs[j];
                let v = f(&xp);
                xp[i] = x[i];
                xp[j] = x[j];
                v
            };
            let v = (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0))
                / (4.0 * hs[i] * hs[j]);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    (&hess + hess.transpose()) * 0.5
}
