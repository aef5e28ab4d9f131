//! One-dimensional quadrature: adaptive Gauss-Kronrod on (possibly
//! infinite) intervals, and Gauss-Hermite rules for normal expectations.
#![allow(clippy::excessive_precision)]

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7]
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

const MAX_INTERVALS: usize = 2000;

/// Composite 15-point Kronrod rule on `panels` equal panels of [a, b], as
/// (node, Kronrod weight, embedded Gauss weight) triples. The Gauss weight is
/// zero at Kronrod-only nodes.
pub fn kronrod_nodes(a: f64, b: f64, panels: usize, out: &mut Vec<(f64, f64, f64)>) {
    out.clear();
    let h = (b - a) / panels as f64;
    let half = 0.5 * h;
    for p in 0..panels {
        let c = a + h * (p as f64 + 0.5);
        for j in 0..8 {
            let wk = WGK[j] * half;
            let wg = if j % 2 == 1 { WG[j / 2] * half } else { 0.0 };
            if j == 7 {
                out.push((c, wk, wg));
            } else {
                let x = half * XGK[j];
                out.push((c - x, wk, wg));
                out.push((c + x, wk, wg));
            }
        }
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive 15-point Gauss-Kronrod integral of `f` over [a, b]. Either
/// limit may be infinite. Stops when the summed error estimate is at most
/// max(abs_tol, rel_tol * |integral|).
pub fn integrate<F>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if a.is_nan() || b.is_nan() {
        return Err(Error::InvalidParams("NaN integration limit".into()));
    }
    if a == b {
        return Ok(0.0);
    }
    if a > b {
        return integrate(f, b, a, abs_tol, rel_tol).map(|v| -v);
    }
    match (a.is_finite(), b.is_finite()) {
        (true, true) => adapt(&f, a, b, abs_tol, rel_tol),
        // x = a + t / (1 - t), t in [0, 1)
        (true, false) => adapt(
            &|t: f64| {
                let u = 1.0 - t;
                f(a + t / u) / (u * u)
            },
            0.0,
            1.0,
            abs_tol,
            rel_tol,
        ),
        (false, true) => adapt(
            &|t: f64| {
                let u = 1.0 - t;
                f(b - t / u) / (u * u)
            },
            0.0,
            1.0,
            abs_tol,
            rel_tol,
        ),
        // x = t / (1 - t^2), t in (-1, 1)
        (false, false) => adapt(
            &|t: f64| {
                let u = 1.0 - t * t;
                f(t / u) * (1.0 + t * t) / (u * u)
            },
            -1.0,
            1.0,
            abs_tol,
            rel_tol,
        ),
    }
}

fn adapt<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<f64> {
    // guard against evaluating at a singular endpoint of the transforms
    let g = |x: f64| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    let (v, e) = gk15(&g, a, b);
    let mut parts = vec![(a, b, v, e)];
    let mut total = v;
    let mut err = e;
    while err > abs_tol.max(rel_tol * total.abs()) {
        if parts.len() >= MAX_INTERVALS {
            return Err(Error::QuadratureNotConverged {
                tol: abs_tol.max(rel_tol * total.abs()),
                estimate: err,
            });
        }
        let (idx, _) = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, v0, e0) = parts.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&g, lo, mid);
        let (v2, e2) = gk15(&g, mid, hi);
        total += v1 + v2 - v0;
        err += e1 + e2 - e0;
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
        if mid <= lo || mid >= hi {
            break;
        }
    }
    // re-sum to shed accumulated rounding from the running updates
    Ok(parts.iter().map(|p| p.2).sum())
}

/// Gauss-Hermite rule for E[g(Z)], Z ~ N(0, 1): nodes and weights summing
/// to one (Golub-Welsch).
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Hermite rule needs at least one node");
        // Jacobi matrix of the probabilists' Hermite recurrence
        let mut j = DMatrix::<f64>::zeros(n, n);
        for k in 1..n {
            let b = (k as f64).sqrt();
            j[(k - 1, k)] = b;
            j[(k, k - 1)] = b;
        }
        let eig = SymmetricEigen::new(j);
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
            .collect();
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
        // symmetrize to remove eigen-solver asymmetry
        for i in 0..n / 2 {
            let k = n - 1 - i;
            let x = 0.5 * (pairs[k].0 - pairs[i].0);
            let w = 0.5 * (pairs[k].1 + pairs[i].1);
            pairs[i] = (-x, w);
            pairs[k] = (x, w);
        }
        if n % 2 == 1 {
            pairs[n / 2].0 = 0.0;
        }
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        Self {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1 / total).collect(),
        }
    }

    /// E[g(Z)] for standard normal Z.
    pub fn expect<F: Fn(f64) -> f64>(&self, g: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * g(x))
            .sum()
    }
}
