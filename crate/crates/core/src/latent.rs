//! Observed-data likelihood of the latent variable model and its
//! maximization.
//!
//! Each patient contributes the bivariate normal density of the two
//! continuous outcomes times the probability of the observed
//! (ordinal, binary) cell given them. The cell probability is a rectangle
//! probability of the conditional bivariate normal of the two latent
//! variables, computed by inclusion-exclusion over [`phi2`] terms.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{Dataset, FitResult, LatentParams, UnconstrainedParams, MIN_FIT_RECORDS};
use crate::numerics::bvn::phi2_unchecked;
use crate::numerics::linalg::{invert_spd, nearest_pd, Conditioner};
use crate::numerics::normal::{norm_cdf, norm_quantile};
use crate::numerics::{minimize, num_hessian, CondNormal, MinimizeOptions};

/// Cell probabilities below this are floored before taking logs.
pub const PROB_FLOOR: f64 = 1e-300;

/// Log-likelihood reported for parameter vectors whose covariance is not
/// positive definite.
pub const NON_PD_LOGLIK: f64 = -1e100;

/// P(Y3 = w, Y4 = k | Y1, Y2) for ordinal level `w` in `1..=k3` and binary
/// level `k` in {0, 1}. Y4 = 1 iff the latent binary variable is >= 0.
pub fn cell_probability(p: &LatentParams, w: u8, k: u8, cond: &CondNormal) -> f64 {
    let (s3, s4, r) = cond.sd_corr();
    let (m3, m4) = (cond.mu_cond[0], cond.mu_cond[1]);
    let w = w as usize;
    let u3 = (p.cut(w) - m3) / s3;
    let l3 = (p.cut(w - 1) - m3) / s3;
    let (l4, u4) = if k == 0 {
        (f64::NEG_INFINITY, -m4 / s4)
    } else {
        (-m4 / s4, f64::INFINITY)
    };
    rect2(l3, u3, l4, u4, r)
}

/// P(l1 < Z1 <= u1, l2 < Z2 <= u2) for standard bivariate normal.
#[inline]
fn rect2(l1: f64, u1: f64, l2: f64, u2: f64, r: f64) -> f64 {
    let v = phi2_unchecked(u1, u2, r) - phi2_unchecked(l1, u2, r) - phi2_unchecked(u1, l2, r)
        + phi2_unchecked(l1, l2, r);
    v.clamp(0.0, 1.0)
}

/// Log-likelihood with diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLik {
    pub value: f64,
    /// Some cell probability fell below [`PROB_FLOOR`].
    pub floor_hit: bool,
    /// The implied covariance was not positive definite.
    pub non_pd: bool,
}

pub fn log_likelihood(u: &UnconstrainedParams, data: &Dataset) -> f64 {
    log_likelihood_detail(&LatentParams::from_unconstrained(u), data).value
}

pub fn log_likelihood_detail(p: &LatentParams, data: &Dataset) -> LogLik {
    let non_pd = LogLik {
        value: NON_PD_LOGLIK,
        floor_hit: false,
        non_pd: true,
    };
    let Ok(cond) = Conditioner::new(p) else {
        return non_pd;
    };
    if !cond.is_pd() {
        return non_pd;
    }
    let r12 = p.rho.r12;
    let (s1, s2) = (p.sigma1, p.sigma2);
    let one_m = 1.0 - r12 * r12;
    let log_norm = -(2.0 * std::f64::consts::PI * s1 * s2 * one_m.sqrt()).ln();

    let mut total = 0.0;
    let mut floor_hit = false;
    for rec in data.patients() {
        let mu = p.means(rec.treat, rec.y10, rec.y20);
        let e1 = rec.y1 - mu[0];
        let e2 = rec.y2 - mu[1];
        let (z1, z2) = (e1 / s1, e2 / s2);
        let q = (z1 * z1 - 2.0 * r12 * z1 * z2 + z2 * z2) / one_m;
        let c = cond.apply(e1, e2, mu[2], mu[3]);
        let mut pr = cell_probability(p, rec.y3, rec.y4, &c);
        if pr < PROB_FLOOR {
            pr = PROB_FLOOR;
            floor_hit = true;
        }
        total += log_norm - 0.5 * q + pr.ln();
    }
    LogLik {
        value: total,
        floor_hit,
        non_pd: false,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub minimize: MinimizeOptions,
    /// Seed for the perturbed restart.
    pub seed: u64,
    /// Starting point; `None` uses the default marginal-model starts.
    pub start: Option<LatentParams>,
    /// Skip the Hessian (the covariance is then left as zeros). Used when
    /// only point estimates are needed.
    pub skip_hessian: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            minimize: MinimizeOptions::default(),
            seed: 0x1a7e_47,
            start: None,
            skip_hessian: false,
        }
    }
}

/// Maximum likelihood fit. Non-convergence is reported in-band.
pub fn fit(data: &Dataset, opts: &FitOptions) -> Result<FitResult> {
    data.require_both_arms()?;
    if data.len() < MIN_FIT_RECORDS {
        return Err(Error::InsufficientData(format!(
            "{} usable records, need at least {MIN_FIT_RECORDS}",
            data.len()
        )));
    }
    let start = match &opts.start {
        Some(p) => p.to_unconstrained()?,
        None => starting_values(data)?.to_unconstrained()?,
    };
    let objective = |x: &[f64]| {
        let p = LatentParams::from_unconstrained(&UnconstrainedParams(x.to_vec()));
        -log_likelihood_detail(&p, data).value
    };

    let mut res = minimize(objective, start.as_slice(), &opts.minimize);
    let mut n_iter = res.n_iter;
    if !res.converged {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let x1: Vec<f64> = start
            .as_slice()
            .iter()
            .map(|v| v + rng.random_range(-0.1..0.1))
            .collect();
        let retry = minimize(objective, &x1, &opts.minimize);
        n_iter += retry.n_iter;
        if retry.converged || retry.f < res.f {
            res = retry;
        }
    }

    let u_hat = UnconstrainedParams(res.x.clone());
    let p_hat = LatentParams::from_unconstrained(&u_hat);
    let detail = log_likelihood_detail(&p_hat, data);

    let n = u_hat.len();
    let (cov, repaired) = if opts.skip_hessian {
        (DMatrix::zeros(n, n), false)
    } else {
        let h = num_hessian(objective, &res.x, None);
        covariance_from_hessian(&h)?
    };

    Ok(FitResult {
        params_hat: p_hat,
        unconstrained_hat: u_hat,
        cov_unconstrained: cov,
        loglik: detail.value,
        converged: res.converged && !detail.non_pd,
        n_iter,
        hessian_repaired: repaired,
        floor_hit: detail.floor_hit,
        n_used: data.len(),
    })
}

/// Inverse of the observed information; falls back to the nearest positive
/// definite matrix when the Hessian is indefinite.
pub fn covariance_from_hessian(h: &DMatrix<f64>) -> Result<(DMatrix<f64>, bool)> {
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotPositiveDefinite);
    }
    match invert_spd(h) {
        Ok(c) => Ok((c, false)),
        Err(_) => {
            let fixed = nearest_pd(h)?;
            Ok((invert_spd(&fixed)?, true))
        }
    }
}

/// Starting values from separate marginal models: least squares for the
/// continuous outcomes, an ordered probit for the ordinal outcome and a
/// probit for the binary outcome, with all correlations zero.
pub fn starting_values(data: &Dataset) -> Result<LatentParams> {
    let pts = data.patients();
    let n = pts.len();
    let x1 = DMatrix::from_fn(n, 3, |i, j| match j {
        0 => 1.0,
        1 => f64::from(pts[i].treat),
        _ => pts[i].y10,
    });
    let x2 = DMatrix::from_fn(n, 3, |i, j| match j {
        0 => 1.0,
        1 => f64::from(pts[i].treat),
        _ => pts[i].y20,
    });
    let y1 = DVector::from_iterator(n, pts.iter().map(|p| p.y1));
    let y2 = DVector::from_iterator(n, pts.iter().map(|p| p.y2));
    let (a, s1) = ols(&x1, &y1)?;
    let (b, s2) = ols(&x2, &y2)?;
    let (gamma1, tau3) = ordered_probit_start(data);

    let frac = |arm: u8| {
        let (ones, total) = pts
            .iter()
            .filter(|p| p.treat == arm)
            .fold((0usize, 0usize), |(o, t), p| (o + p.y4 as usize, t + 1));
        clamp_prop(ones as f64, total as f64)
    };
    let psi0 = norm_quantile(frac(0));
    let psi1 = norm_quantile(frac(1)) - psi0;

    Ok(LatentParams {
        alpha0: a[0],
        alpha1: a[1],
        alpha2: a[2],
        beta0: b[0],
        beta1: b[1],
        beta2: b[2],
        gamma1,
        psi0,
        psi1,
        tau3,
        sigma1: s1.max(1e-3),
        sigma2: s2.max(1e-3),
        rho: Default::default(),
    })
}

/// Proportion with a half-count continuity adjustment at 0 and 1.
fn clamp_prop(count: f64, total: f64) -> f64 {
    let half = 0.5 / total.max(1.0);
    (count / total.max(1.0)).clamp(half, 1.0 - half)
}

/// Least-squares coefficients and the ML residual standard deviation.
pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let xtx = x.transpose() * x;
    let chol = xtx
        .cholesky()
        .ok_or_else(|| Error::InsufficientData("singular least-squares design".into()))?;
    let beta = chol.solve(&(x.transpose() * y));
    let resid = y - x * &beta;
    let sigma = (resid.norm_squared() / y.len() as f64).sqrt();
    Ok((beta, sigma))
}

/// Ordered probit of the ordinal outcome on treatment: closed-form starts
/// from the cumulative proportions, refined by maximum likelihood.
fn ordered_probit_start(data: &Dataset) -> (f64, Vec<f64>) {
    let k3 = data.k3() as usize;
    let mut counts = [vec![0.0; k3], vec![0.0; k3]];
    for p in data.patients() {
        counts[p.treat as usize][p.y3 as usize - 1] += 1.0;
    }
    let cumq = |c: &[f64]| -> Vec<f64> {
        let total: f64 = c.iter().sum();
        let mut acc = 0.0;
        c[..k3 - 1]
            .iter()
            .map(|v| {
                acc += v;
                norm_quantile(clamp_prop(acc, total))
            })
            .collect()
    };
    let q0 = cumq(&counts[0]);
    let q1 = cumq(&counts[1]);
    // P(Y3 <= j | T) = Phi(tau_j - gamma1 T)
    let gamma0 = q0.iter().zip(&q1).map(|(a, b)| a - b).sum::<f64>() / (k3 - 1) as f64;
    let mut tau = q0;
    for j in 1..tau.len() {
        if tau[j] < tau[j - 1] + 1e-3 {
            tau[j] = tau[j - 1] + 1e-3;
        }
    }

    let mut x0 = vec![gamma0, tau[0]];
    x0.extend(tau.windows(2).map(|w| (w[1] - w[0]).ln()));
    let unpack = |x: &[f64]| {
        let mut t = Vec::with_capacity(k3 - 1);
        let mut acc = x[1];
        t.push(acc);
        for d in &x[2..] {
            acc += d.exp();
            t.push(acc);
        }
        (x[0], t)
    };
    let nll = |x: &[f64]| {
        let (g, t) = unpack(x);
        let cut = |w: usize| {
            if w == 0 {
                f64::NEG_INFINITY
            } else if w >= k3 {
                f64::INFINITY
            } else {
                t[w - 1]
            }
        };
        let mut s = 0.0;
        for (arm, c) in counts.iter().enumerate() {
            let m = g * arm as f64;
            for (w, &nw) in c.iter().enumerate() {
                if nw > 0.0 {
                    let pr = norm_cdf(cut(w + 1) - m) - norm_cdf(cut(w) - m);
                    s -= nw * pr.max(PROB_FLOOR).ln();
                }
            }
        }
        s
    };
    let res = minimize(nll, &x0, &MinimizeOptions::default());
    let best = if res.f.is_finite() && res.f <= nll(&x0) {
        res.x
    } else {
        std::mem::take(&mut x0)
    };
    unpack(&best)
}
