//! Rectangle probabilities P(Y <= upper) for Y ~ N(mu, Sigma) in up to four
//! dimensions.
//!
//! Infinite limits are removed analytically. The remaining variables are
//! reordered most-restrictive first and transformed by sequential
//! conditioning (Genz's separation of variables). All but the last two
//! variables are integrated by a randomized rank-1 lattice rule (Richtmyer
//! generators, baker's transform, antithetic pairs); the last two are
//! integrated exactly with [`phi2`](super::bvn::phi2) at every lattice point.
//! Shifts are drawn from a call-local RNG seeded by the caller, so results are
//! reproducible and repeated evaluations with perturbed parameters share
//! their lattice points.
//!
//! [`Phi4Method::Quadrature`] replaces the lattice by fixed composite
//! Gauss-Kronrod rules over the leading standardized variables. It is
//! deterministic and smooth in the parameters, which suits finite-difference
//! derivatives.

use nalgebra::Matrix4;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::bvn::phi2_unchecked;
use super::normal::{norm_cdf, norm_pdf, norm_quantile};
use super::quad::kronrod_nodes;
use crate::error::{Error, Result};

/// Fractional parts of sqrt(2) and sqrt(3).
const RICHTMYER: [f64; 2] = [0.414_213_562_373_095_1, 0.732_050_807_568_877_2];

/// Smallest lattice size tried before checking the error estimate.
const MIN_POINTS: usize = 64;

/// Standardized variables below this contribute nothing at double precision.
const Z_LIMIT: f64 = 7.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phi4Method {
    /// Randomized lattice rule with an error estimate from the shifts.
    Lattice,
    /// Nested Gauss-Kronrod, `panels` 15-point panels per dimension.
    Quadrature { panels: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Phi4Options {
    /// Lattice points per shift, upper limit.
    pub max_points: usize,
    pub shifts: usize,
    /// Stop refining once the error estimate is at or below this.
    pub abs_tol: f64,
    pub seed: u64,
    /// Evaluate exactly this many points per shift, skipping the adaptive
    /// refinement.
    pub fixed_points: Option<usize>,
    /// Integration order of the four variables, overriding the reordering
    /// heuristic. Paired with `fixed_points` this makes the estimate a
    /// smooth function of `upper`, `mu` and `sigma`.
    pub fixed_order: Option<[usize; 4]>,
    pub method: Phi4Method,
}

impl Default for Phi4Options {
    fn default() -> Self {
        Self {
            max_points: 20_000,
            shifts: 8,
            abs_tol: 1e-7,
            seed: 0x5eed_0f_b1a5,
            fixed_points: None,
            fixed_order: None,
            method: Phi4Method::Lattice,
        }
    }
}

impl Phi4Options {
    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn with_fixed_points(self, n: usize) -> Self {
        Self {
            fixed_points: Some(n),
            ..self
        }
    }

    pub fn quadrature(panels: usize) -> Self {
        Self {
            method: Phi4Method::Quadrature {
                panels: panels.max(1),
            },
            ..Self::default()
        }
    }

    /// Options reproducing the lattice and ordering of an earlier result.
    pub fn replaying(self, r: &Phi4Result) -> Self {
        Self {
            fixed_points: Some(r.points.max(1)),
            fixed_order: Some(r.order),
            ..self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Phi4Result {
    pub value: f64,
    /// Three standard errors across the randomized shifts, or for quadrature
    /// the Kronrod minus embedded Gauss difference.
    pub error: f64,
    /// Lattice points per shift actually used (0 when no lattice was needed,
    /// and the number of integrand evaluations for quadrature).
    pub points: usize,
    /// Variable order used for the sequential conditioning.
    pub order: [usize; 4],
}

impl Phi4Result {
    fn exact(value: f64, order: [usize; 4]) -> Self {
        Self {
            value,
            error: 0.0,
            points: 0,
            order,
        }
    }
}

/// P(Y <= upper) for Y ~ N(mu, sigma). Entries of `upper` may be infinite.
pub fn phi4(
    upper: &[f64; 4],
    mu: &[f64; 4],
    sigma: &Matrix4<f64>,
    opts: &Phi4Options,
) -> Result<Phi4Result> {
    if sigma.iter().any(|v| !v.is_finite()) || sigma.cholesky().is_none() {
        return Err(Error::NotPositiveDefinite);
    }
    if upper.iter().any(|u| u.is_nan()) {
        return Err(Error::InvalidParams("NaN integration limit".into()));
    }
    let lim = |i: usize| upper[i] - mu[i];
    let marginal = |i: usize| norm_cdf(lim(i) / sigma[(i, i)].sqrt());
    let order = match opts.fixed_order {
        Some(o) => {
            let mut seen = [false; 4];
            for &i in &o {
                if i > 3 || seen[i] {
                    return Err(Error::InvalidParams(format!("bad variable order {o:?}")));
                }
                seen[i] = true;
            }
            o
        }
        None => {
            let mut o = [0, 1, 2, 3];
            o.sort_by(|&i, &j| marginal(i).total_cmp(&marginal(j)).then(i.cmp(&j)));
            o
        }
    };
    if upper.contains(&f64::NEG_INFINITY) {
        return Ok(Phi4Result::exact(0.0, order));
    }
    let active: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&i| upper[i].is_finite())
        .collect();

    let d = active.len();
    match d {
        0 => return Ok(Phi4Result::exact(1.0, order)),
        1 => return Ok(Phi4Result::exact(marginal(active[0]), order)),
        2 => {
            let (i, j) = (active[0], active[1]);
            let (si, sj) = (sigma[(i, i)].sqrt(), sigma[(j, j)].sqrt());
            let v = phi2_unchecked(lim(i) / si, lim(j) / sj, sigma[(i, j)] / (si * sj));
            return Ok(Phi4Result::exact(v, order));
        }
        _ => {}
    }

    let mut a = [0.0; 4];
    let mut s = [[0.0; 4]; 4];
    for (r, &i) in active.iter().enumerate() {
        a[r] = lim(i);
        for (c, &j) in active.iter().enumerate() {
            s[r][c] = sigma[(i, j)];
        }
    }
    let l = small_cholesky(&s, d)?;
    let integrand = Integrand::new(a, l, d);
    let (value, error, points) = match opts.method {
        Phi4Method::Lattice => integrand.integrate(opts),
        Phi4Method::Quadrature { panels } => integrand.quadrature(panels.max(1)),
    };
    Ok(Phi4Result {
        value,
        error,
        points,
        order,
    })
}

fn small_cholesky(s: &[[f64; 4]; 4], d: usize) -> Result<[[f64; 4]; 4]> {
    let mut l = [[0.0; 4]; 4];
    for i in 0..d {
        for j in 0..=i {
            let mut acc = s[i][j];
            for k in 0..j {
                acc -= l[i][k] * l[j][k];
            }
            if i == j {
                if !(acc > 0.0) {
                    return Err(Error::NotPositiveDefinite);
                }
                l[i][i] = acc.sqrt();
            } else {
                l[i][j] = acc / l[j][j];
            }
        }
    }
    Ok(l)
}

struct Integrand {
    a: [f64; 4],
    l: [[f64; 4]; 4],
    /// Number of lattice-integrated variables (d - 2).
    m: usize,
    // last two variables: conditional sds and correlation are constant
    sd_x: f64,
    sd_y: f64,
    corr: f64,
}

impl Integrand {
    fn new(a: [f64; 4], l: [[f64; 4]; 4], d: usize) -> Self {
        let m = d - 2;
        let sd_x = l[m][m];
        let sd_y = (l[m + 1][m] * l[m + 1][m] + l[m + 1][m + 1] * l[m + 1][m + 1]).sqrt();
        let corr = (l[m + 1][m] / sd_y).clamp(-1.0 + 1e-15, 1.0 - 1e-15);
        Self {
            a,
            l,
            m,
            sd_x,
            sd_y,
            corr,
        }
    }

    #[inline]
    fn eval(&self, w: &[f64; 2]) -> f64 {
        let mut y = [0.0; 2];
        let mut prod = 1.0;
        for i in 0..self.m {
            let mut c = self.a[i];
            for (j, yj) in y.iter().enumerate().take(i) {
                c -= self.l[i][j] * yj;
            }
            let e = norm_cdf(c / self.l[i][i]);
            prod *= e;
            if prod == 0.0 {
                return 0.0;
            }
            let q = (w[i] * e).clamp(1e-300, 1.0 - 1e-16);
            y[i] = norm_quantile(q);
        }
        let m = self.m;
        let mut cx = self.a[m];
        let mut cy = self.a[m + 1];
        for j in 0..m {
            cx -= self.l[m][j] * y[j];
            cy -= self.l[m + 1][j] * y[j];
        }
        prod * phi2_unchecked(cx / self.sd_x, cy / self.sd_y, self.corr)
    }

    fn integrate(&self, opts: &Phi4Options) -> (f64, f64, usize) {
        let shifts = opts.shifts.max(2);
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let delta: Vec<[f64; 2]> = (0..shifts)
            .map(|_| [rng.random::<f64>(), rng.random::<f64>()])
            .collect();
        let mut sums = vec![0.0; shifts];
        let mut done = 0usize;
        let max_points = opts.max_points.max(1);
        let mut target = match opts.fixed_points {
            Some(n) => n.max(1),
            None => MIN_POINTS.min(max_points),
        };
        loop {
            for (sum, dl) in sums.iter_mut().zip(&delta) {
                for k in (done + 1)..=target {
                    let kf = k as f64;
                    let mut w = [0.0; 2];
                    let mut wa = [0.0; 2];
                    for i in 0..self.m {
                        let x = (kf * RICHTMYER[i] + dl[i]).fract();
                        let t = 1.0 - (2.0 * x - 1.0).abs();
                        w[i] = t;
                        wa[i] = 1.0 - t;
                    }
                    *sum += 0.5 * (self.eval(&w) + self.eval(&wa));
                }
            }
            done = target;
            let (mean, err) = summarize(&sums, done);
            let finished = opts.fixed_points.is_some() || err <= opts.abs_tol || done >= max_points;
            if finished {
                return (mean.clamp(0.0, 1.0), err, done);
            }
            target = (2 * done).min(max_points);
        }
    }
}

impl Integrand {
    /// Last two variables given the leading standardized values `z`.
    #[inline]
    fn tail(&self, z: &[f64; 2]) -> f64 {
        let m = self.m;
        let mut cx = self.a[m];
        let mut cy = self.a[m + 1];
        for j in 0..m {
            cx -= self.l[m][j] * z[j];
            cy -= self.l[m + 1][j] * z[j];
        }
        phi2_unchecked(cx / self.sd_x, cy / self.sd_y, self.corr)
    }

    /// Nodes for z on [-Z_LIMIT, min(b, Z_LIMIT)], empty if the range is.
    fn nodes(b: f64, panels: usize, out: &mut Vec<(f64, f64, f64)>) {
        let hi = b.min(Z_LIMIT);
        if hi > -Z_LIMIT {
            kronrod_nodes(-Z_LIMIT, hi, panels, out);
        } else {
            out.clear();
        }
    }

    fn quadrature(&self, panels: usize) -> (f64, f64, usize) {
        let mut outer = Vec::with_capacity(15 * panels);
        let mut inner = Vec::with_capacity(15 * panels);
        Self::nodes(self.a[0] / self.l[0][0], panels, &mut outer);
        let (mut k, mut g) = (0.0, 0.0);
        let mut evals = 0;
        for &(z1, wk1, wg1) in &outer {
            let f1 = norm_pdf(z1);
            let v = if self.m == 1 {
                evals += 1;
                self.tail(&[z1, 0.0])
            } else {
                Self::nodes((self.a[1] - self.l[1][0] * z1) / self.l[1][1], panels, &mut inner);
                let (mut ik, mut ig) = (0.0, 0.0);
                for &(z2, wk2, wg2) in &inner {
                    let f = norm_pdf(z2) * self.tail(&[z1, z2]);
                    ik += wk2 * f;
                    ig += wg2 * f;
                }
                evals += inner.len();
                // Gauss inner error folded in through the outer Kronrod weights
                k += wk1 * f1 * ik;
                g += wg1 * f1 * ig;
                continue;
            };
            k += wk1 * f1 * v;
            g += wg1 * f1 * v;
        }
        (k.clamp(0.0, 1.0), (k - g).abs().max(1e-15), evals)
    }
}

fn summarize(sums: &[f64], n: usize) -> (f64, f64) {
    let k = sums.len() as f64;
    let means: Vec<f64> = sums.iter().map(|s| s / n as f64).collect();
    let mean = means.iter().sum::<f64>() / k;
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (k - 1.0);
    // floor: the lattice is exact for some integrands and rounding remains
    let err = (3.0 * (var / k).sqrt()).max(1e-14);
    (mean, err)
}
