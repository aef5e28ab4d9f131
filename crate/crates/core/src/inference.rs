//! Response probabilities and treatment effects from a fitted latent
//! variable model.
//!
//! The probability of overall response is a four-dimensional Gaussian
//! rectangle probability. Effects are population averaged: each patient's
//! response probability is computed under both treatment assignments at
//! their own baselines, the two arms are averaged, and the odds (or risks)
//! are compared. Standard errors use the delta method with a
//! central-difference gradient in unconstrained coordinates.

use nalgebra::{DVector, Matrix4};

use crate::error::{Error, Result};
use crate::model::{
    Dataset, EffectEstimate, EffectScale, FitResult, LatentParams, ResponderRule,
    UnconstrainedParams,
};
use crate::numerics::normal::norm_cdf;
use crate::numerics::{phi4, Phi4Options, Phi4Result};

/// Step used for the delta-method gradient.
pub const GRADIENT_STEP: f64 = 1e-5;

/// Upper limits, means and covariance of the response rectangle. When the
/// responder level of the binary outcome is 1 the binary latent variable is
/// negated so that the event is still an upper-orthant one.
fn response_rectangle(
    p: &LatentParams,
    sigma: &Matrix4<f64>,
    treat: u8,
    y10: f64,
    y20: f64,
    rule: &ResponderRule,
) -> ([f64; 4], [f64; 4], Matrix4<f64>) {
    let mut mu = p.means(treat, y10, y20);
    let mut s = *sigma;
    let u4 = match rule.y4_level {
        None => f64::INFINITY,
        Some(0) => 0.0,
        Some(_) => {
            mu[3] = -mu[3];
            for j in 0..4 {
                if j != 3 {
                    s[(3, j)] = -s[(3, j)];
                    s[(j, 3)] = -s[(j, 3)];
                }
            }
            0.0
        }
    };
    let upper = [rule.theta1, rule.theta2, p.cut(rule.w_max as usize), u4];
    (upper, mu, s)
}

/// P(response | treat, y10, y20) under `p`.
pub fn response_prob(
    p: &LatentParams,
    treat: u8,
    y10: f64,
    y20: f64,
    rule: &ResponderRule,
    opts: &Phi4Options,
) -> Result<Phi4Result> {
    rule.validate(p.k3())?;
    let sigma = p.sigma_matrix()?;
    let (upper, mu, s) = response_rectangle(p, &sigma, treat, y10, y20, rule);
    phi4(&upper, &mu, &s, opts)
}

/// As [`response_prob`] with the error covariance replaced by `sigma`,
/// e.g. one inflated by the variance the covariates contribute.
pub fn response_prob_with_sigma(
    p: &LatentParams,
    sigma: &Matrix4<f64>,
    treat: u8,
    y10: f64,
    y20: f64,
    rule: &ResponderRule,
    opts: &Phi4Options,
) -> Result<Phi4Result> {
    rule.validate(p.k3())?;
    let (upper, mu, s) = response_rectangle(p, sigma, treat, y10, y20, rule);
    phi4(&upper, &mu, &s, opts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectOptions {
    pub phi4: Phi4Options,
    /// Skip the delta-method gradient; estimates then carry SE = NaN.
    pub compute_se: bool,
}

impl Default for EffectOptions {
    fn default() -> Self {
        Self {
            phi4: Phi4Options::quadrature(1),
            compute_se: true,
        }
    }
}

/// Effects of one fit on all three scales.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentEffects {
    pub log_or: EffectEstimate,
    pub risk_difference: EffectEstimate,
    pub risk_ratio: EffectEstimate,
}

/// Patient-level phi4 seed, so results do not depend on evaluation order.
/// Shared by both arms of a patient, so that identical arms give identical
/// estimates.
fn patient_seed(base: u64, index: usize) -> u64 {
    let mut z = base ^ index as u64;
    // splitmix64 finalizer
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

struct ArmMeans {
    p1: f64,
    p0: f64,
    /// Per patient, the treated and control phi4 results (for replay).
    runs: Vec<[Phi4Result; 2]>,
}

/// Mean response probability per counterfactual arm. With `replay`, each
/// phi4 call reuses the points and ordering of the matching earlier call.
fn arm_means(
    p: &LatentParams,
    data: &Dataset,
    rule: &ResponderRule,
    opts: &Phi4Options,
    replay: Option<&[[Phi4Result; 2]]>,
) -> Result<ArmMeans> {
    let sigma = p.sigma_matrix()?;
    let mut s1 = 0.0;
    let mut s0 = 0.0;
    let mut runs = Vec::with_capacity(data.len());
    for (i, rec) in data.patients().iter().enumerate() {
        let mut pair = [None, None];
        for (slot, treat) in [(0usize, 1u8), (1, 0)] {
            let mut o = opts.with_seed(patient_seed(opts.seed, i));
            if let Some(prev) = replay {
                o = o.replaying(&prev[i][slot]);
            }
            let (upper, mu, s) = response_rectangle(p, &sigma, treat, rec.y10, rec.y20, rule);
            pair[slot] = Some(phi4(&upper, &mu, &s, &o)?);
        }
        let [Some(r1), Some(r0)] = pair else {
            unreachable!("both arms evaluated")
        };
        s1 += r1.value;
        s0 += r0.value;
        runs.push([r1, r0]);
    }
    let n = data.len() as f64;
    Ok(ArmMeans {
        p1: s1 / n,
        p0: s0 / n,
        runs,
    })
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// [log OR, RD, log RR] from the two arm means.
fn estimands(p1: f64, p0: f64) -> [f64; 3] {
    [logit(p1) - logit(p0), p1 - p0, p1.ln() - p0.ln()]
}

/// Population-averaged treatment effects with delta-method uncertainty.
pub fn latent_effects(
    fit: &FitResult,
    data: &Dataset,
    rule: &ResponderRule,
    opts: &EffectOptions,
) -> Result<LatentEffects> {
    rule.validate(data.k3())?;
    let base = arm_means(&fit.params_hat, data, rule, &opts.phi4, None)?;
    for q in [base.p1, base.p0] {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::DegenerateOdds(q));
        }
    }
    let est = estimands(base.p1, base.p0);

    let se = if opts.compute_se {
        let u = fit.unconstrained_hat.as_slice();
        let k = u.len();
        let mut grads = [DVector::zeros(k), DVector::zeros(k), DVector::zeros(k)];
        let mut x = u.to_vec();
        for j in 0..k {
            let eval = |v: f64, x: &mut Vec<f64>| -> Result<[f64; 3]> {
                x[j] = v;
                let pj = LatentParams::from_unconstrained(&UnconstrainedParams(x.clone()));
                let m = arm_means(&pj, data, rule, &opts.phi4, Some(&base.runs))?;
                Ok(estimands(m.p1, m.p0))
            };
            let fp = eval(u[j] + GRADIENT_STEP, &mut x)?;
            let fm = eval(u[j] - GRADIENT_STEP, &mut x)?;
            x[j] = u[j];
            for s in 0..3 {
                grads[s][j] = (fp[s] - fm[s]) / (2.0 * GRADIENT_STEP);
            }
        }
        let cov = &fit.cov_unconstrained;
        grads.map(|g| (g.dot(&(cov * &g))).max(0.0).sqrt())
    } else {
        [f64::NAN; 3]
    };

    let conv = fit.converged;
    let log_or = EffectEstimate::wald(
        EffectScale::LogOddsRatio,
        est[0],
        se[0],
        base.p1,
        base.p0,
        conv,
    );
    let risk_difference = EffectEstimate::wald(
        EffectScale::RiskDifference,
        est[1],
        se[1],
        base.p1,
        base.p0,
        conv,
    );
    let risk_ratio = ratio_estimate(est[2], se[2], base.p1, base.p0, conv);
    Ok(LatentEffects {
        log_or,
        risk_difference,
        risk_ratio,
    })
}

/// Risk ratio whose interval and test are formed on the log scale; the
/// reported SE is the delta-method SE of the ratio itself.
pub fn ratio_estimate(
    log_rr: f64,
    se_log: f64,
    p_treat: f64,
    p_control: f64,
    converged: bool,
) -> EffectEstimate {
    let on_log = EffectEstimate::wald(
        EffectScale::RiskRatio,
        log_rr,
        se_log,
        p_treat,
        p_control,
        converged,
    );
    let rr = log_rr.exp();
    EffectEstimate {
        estimate: rr,
        se: rr * se_log,
        ci_low: on_log.ci_low.exp(),
        ci_high: on_log.ci_high.exp(),
        ..on_log
    }
}

pub fn odds_ratio_effect(
    fit: &FitResult,
    data: &Dataset,
    rule: &ResponderRule,
    opts: &EffectOptions,
) -> Result<EffectEstimate> {
    Ok(latent_effects(fit, data, rule, opts)?.log_or)
}

/// (risk difference, risk ratio).
pub fn risk_effects(
    fit: &FitResult,
    data: &Dataset,
    rule: &ResponderRule,
    opts: &EffectOptions,
) -> Result<(EffectEstimate, EffectEstimate)> {
    let e = latent_effects(fit, data, rule, opts)?;
    Ok((e.risk_difference, e.risk_ratio))
}

/// Two-sided p-value of a Wald statistic.
pub fn wald_p(z: f64) -> f64 {
    (2.0 * norm_cdf(-z.abs())).min(1.0)
}
