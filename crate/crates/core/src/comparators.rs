//! Reference analyses: the augmented binary method (a linear model for one
//! retained continuous outcome plus a logistic model for failure on the
//! other components) and the standard binary method (logistic regression
//! on the composite responder indicator).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latent::ols;
use crate::model::{observed_response, Dataset, EffectEstimate, EffectScale, ResponderRule};
use crate::numerics::diff::num_gradient;
use crate::numerics::normal::norm_cdf;

const IRLS_TOL: f64 = 1e-8;
const IRLS_MAX_ITER: usize = 50;

/// Fitted probabilities this close to 0 or 1 after a failed fit indicate
/// (quasi-)separation.
const SEPARATION_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlmFit {
    pub coefficients: DVector<f64>,
    /// Inverse Fisher information at the final iterate.
    pub covariance: DMatrix<f64>,
    pub converged: bool,
    pub deviance: f64,
    pub n_iter: usize,
    /// Coefficients diverge because some linear combination of the
    /// covariates predicts the response perfectly.
    pub separation: bool,
}

#[inline]
fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn deviance(y: &[u8], p: &[f64]) -> f64 {
    -2.0 * y
        .iter()
        .zip(p)
        .map(|(&yi, &pi)| {
            let q = if yi == 1 { pi } else { 1.0 - pi };
            q.max(1e-300).ln()
        })
        .sum::<f64>()
}

/// Logistic regression by iteratively reweighted least squares. Stops when
/// every coefficient changes by less than 1e-8.
pub fn logistic_fit(x: &DMatrix<f64>, y: &[u8]) -> Result<GlmFit> {
    let (n, k) = x.shape();
    if y.len() != n {
        return Err(Error::InvalidDataset(format!(
            "{n} design rows but {} responses",
            y.len()
        )));
    }
    if y.iter().any(|&v| v > 1) {
        return Err(Error::InvalidDataset("binary response must be 0 or 1".into()));
    }
    let yv = DVector::from_iterator(n, y.iter().map(|&v| f64::from(v)));
    let mut beta = DVector::<f64>::zeros(k);
    let mut p = vec![0.5; n];
    let mut info = DMatrix::<f64>::zeros(k, k);
    let mut converged = false;
    let mut n_iter = 0;
    while n_iter < IRLS_MAX_ITER {
        n_iter += 1;
        let eta = x * &beta;
        for (pi, e) in p.iter_mut().zip(eta.iter()) {
            *pi = expit(*e);
        }
        let w: Vec<f64> = p.iter().map(|pi| pi * (1.0 - pi)).collect();
        info = DMatrix::from_fn(k, k, |a, b| (0..n).map(|i| w[i] * x[(i, a)] * x[(i, b)]).sum());
        let score = x.transpose() * (&yv - DVector::from_column_slice(&p));
        let Some(chol) = info.clone().cholesky() else {
            break;
        };
        let step = chol.solve(&score);
        beta += &step;
        if step.amax() < IRLS_TOL {
            converged = true;
            break;
        }
    }
    // refresh fitted values and information at the returned coefficients
    let eta = x * &beta;
    for (pi, e) in p.iter_mut().zip(eta.iter()) {
        *pi = expit(*e);
    }
    let w: Vec<f64> = p.iter().map(|pi| pi * (1.0 - pi)).collect();
    if converged {
        info = DMatrix::from_fn(k, k, |a, b| (0..n).map(|i| w[i] * x[(i, a)] * x[(i, b)]).sum());
    }
    let covariance = info
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .unwrap_or_else(|| DMatrix::from_element(k, k, f64::NAN));
    let extreme = p
        .iter()
        .any(|&pi| !(SEPARATION_EPS..=1.0 - SEPARATION_EPS).contains(&pi));
    let separation = !converged && extreme;
    Ok(GlmFit {
        coefficients: beta,
        covariance: (&covariance + covariance.transpose()) * 0.5,
        converged: converged && covariance.iter().all(|v| v.is_finite()),
        deviance: deviance(y, &p),
        n_iter,
        separation,
    })
}

/// An effect estimate with notes on anything that needed flagging.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparatorResult {
    pub effect: EffectEstimate,
    pub notes: Vec<String>,
}

/// Design with columns (1, T, y10, y20).
fn covariate_design(data: &Dataset) -> DMatrix<f64> {
    let pts = data.patients();
    DMatrix::from_fn(pts.len(), 4, |i, j| match j {
        0 => 1.0,
        1 => f64::from(pts[i].treat),
        2 => pts[i].y10,
        _ => pts[i].y20,
    })
}

/// Logistic regression of the composite responder indicator on treatment
/// and both baselines; the effect is the treatment coefficient.
pub fn standard_binary_analysis(data: &Dataset, rule: &ResponderRule) -> Result<ComparatorResult> {
    data.require_both_arms()?;
    rule.validate(data.k3())?;
    let x = covariate_design(data);
    let s: Vec<u8> = data
        .patients()
        .iter()
        .map(|r| observed_response(r, rule))
        .collect();
    let glm = logistic_fit(&x, &s)?;
    let mut notes = Vec::new();
    if glm.separation {
        notes.push(format!(
            "standard binary: separation, coefficients diverging ({:?})",
            glm.coefficients.as_slice()
        ));
    } else if !glm.converged {
        notes.push("standard binary: IRLS did not converge".into());
    }
    let b = &glm.coefficients;
    let arm_mean = |t: f64| {
        let pts = data.patients();
        pts.iter()
            .map(|r| expit(b[0] + b[1] * t + b[2] * r.y10 + b[3] * r.y20))
            .sum::<f64>()
            / pts.len() as f64
    };
    let effect = EffectEstimate::wald(
        EffectScale::LogOddsRatio,
        b[1],
        glm.covariance[(1, 1)].sqrt(),
        arm_mean(1.0),
        arm_mean(0.0),
        glm.converged,
    );
    Ok(ComparatorResult { effect, notes })
}

/// Which continuous outcome the augmented binary method keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Retained {
    #[default]
    Y1,
    Y2,
}

/// Response probability under the augmented binary models:
/// P(F = 0) * Phi((theta - mu) / sigma). The failure model does not involve
/// the retained outcome, so the integral over it is the normal CDF.
pub fn augmented_response_prob(p_no_failure: f64, theta: f64, mu: f64, sigma: f64) -> f64 {
    p_no_failure * norm_cdf((theta - mu) / sigma)
}

/// Augmented binary analysis: population-averaged log odds ratio from the
/// linear model for the retained outcome and the logistic failure model,
/// with a delta-method standard error over both (independent) fits.
pub fn augmented_binary_analysis(
    data: &Dataset,
    rule: &ResponderRule,
    retained: Retained,
) -> Result<ComparatorResult> {
    data.require_both_arms()?;
    rule.validate(data.k3())?;
    let pts = data.patients();
    let n = pts.len();
    let x = covariate_design(data);
    let (y, theta, failed): (DVector<f64>, f64, Vec<u8>) = match retained {
        Retained::Y1 => (
            DVector::from_iterator(n, pts.iter().map(|r| r.y1)),
            rule.theta1,
            pts.iter()
                .map(|r| u8::from(!rule.responds_except_y1(r)))
                .collect(),
        ),
        Retained::Y2 => (
            DVector::from_iterator(n, pts.iter().map(|r| r.y2)),
            rule.theta2,
            pts.iter()
                .map(|r| u8::from(!rule.responds_except_y2(r)))
                .collect(),
        ),
    };
    let (delta, sigma) = ols(&x, &y)?;
    if !(sigma > 0.0) {
        return Err(Error::InsufficientData(
            "retained outcome has zero residual variance".into(),
        ));
    }
    let mut notes = Vec::new();
    let n_failed = failed.iter().filter(|&&f| f == 1).count();

    // stacked parameters: delta (4), log sigma, failure model (4) or none
    let mut theta_vec: Vec<f64> = delta.iter().copied().collect();
    theta_vec.push(sigma.ln());
    let mut cov = DMatrix::<f64>::zeros(9, 9);
    let xtx_inv = (x.transpose() * &x)
        .cholesky()
        .ok_or_else(|| Error::InsufficientData("singular least-squares design".into()))?
        .inverse();
    cov.view_mut((0, 0), (4, 4))
        .copy_from(&(xtx_inv * (sigma * sigma)));
    // ML log sigma has asymptotic variance 1 / (2n)
    cov[(4, 4)] = 1.0 / (2.0 * n as f64);

    let mut converged = true;
    let use_failure_model = n_failed > 0 && n_failed < n;
    if use_failure_model {
        let glm = logistic_fit(&x, &failed)?;
        if glm.separation {
            notes.push(format!(
                "augmented binary: separation in the failure model ({:?})",
                glm.coefficients.as_slice()
            ));
        } else if !glm.converged {
            notes.push("augmented binary: failure model did not converge".into());
        }
        converged = glm.converged;
        theta_vec.extend(glm.coefficients.iter());
        cov.view_mut((5, 5), (4, 4)).copy_from(&glm.covariance);
    } else {
        notes.push(format!(
            "augmented binary: failure indicator constant ({} of {n} failed); \
             using the continuous component alone",
            n_failed
        ));
        theta_vec.extend([0.0; 4]);
    }

    let arm_means = |v: &[f64]| -> (f64, f64) {
        let s = v[4].exp();
        let mut sums = [0.0; 2];
        for r in pts {
            for (t, sum) in sums.iter_mut().enumerate() {
                let t = t as f64;
                let mu = v[0] + v[1] * t + v[2] * r.y10 + v[3] * r.y20;
                let pf0 = if use_failure_model {
                    1.0 - expit(v[5] + v[6] * t + v[7] * r.y10 + v[8] * r.y20)
                } else {
                    1.0
                };
                *sum += augmented_response_prob(pf0, theta, mu, s);
            }
        }
        (sums[1] / n as f64, sums[0] / n as f64)
    };
    let log_or = |v: &[f64]| {
        let (p1, p0) = arm_means(v);
        logit(p1) - logit(p0)
    };

    let (p1, p0) = arm_means(&theta_vec);
    for p in [p1, p0] {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::DegenerateOdds(p));
        }
    }
    let estimate = logit(p1) - logit(p0);
    let grad = num_gradient(log_or, &theta_vec, Some(1e-6));
    let se = (grad.transpose() * &cov * &grad)[0].max(0.0).sqrt();
    let effect = EffectEstimate::wald(EffectScale::LogOddsRatio, estimate, se, p1, p0, converged);
    Ok(ComparatorResult { effect, notes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PatientRecord;
    use crate::numerics::normal::norm_pdf;
    use crate::numerics::quad::integrate;

    fn table_2x2(a: usize, b: usize, c: usize, d: usize) -> (DMatrix<f64>, Vec<u8>) {
        // a responders / b non-responders treated, c / d control
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for (t, r, count) in [(1.0, 1, a), (1.0, 0, b), (0.0, 1, c), (0.0, 0, d)] {
            for _ in 0..count {
                rows.extend([1.0, t]);
                y.push(r);
            }
        }
        (DMatrix::from_row_slice(y.len(), 2, &rows), y)
    }

    #[test]
    fn two_by_two_closed_form() {
        let (x, y) = table_2x2(34, 61, 18, 69);
        let g = logistic_fit(&x, &y).unwrap();
        assert!(g.converged);
        let want = (34.0 * 69.0 / (61.0 * 18.0) as f64).ln();
        assert!((g.coefficients[1] - want).abs() < 1e-8);
        assert!((want - 0.759).abs() < 1e-3);
        let se = (1.0 / 34.0 + 1.0 / 61.0 + 1.0 / 18.0 + 1.0 / 69.0f64).sqrt();
        assert!((g.covariance[(1, 1)].sqrt() - se).abs() < 1e-8);
        assert!((g.coefficients[0] - (18.0 / 69.0f64).ln()).abs() < 1e-8);
    }

    #[test]
    fn balanced_intercept_only() {
        let x = DMatrix::from_element(10, 1, 1.0);
        let y = [0, 1, 0, 1, 0, 1, 0, 1, 0, 1];
        let g = logistic_fit(&x, &y).unwrap();
        assert!(g.converged);
        assert!(g.coefficients[0].abs() < 1e-12);
        assert!((g.covariance[(0, 0)] - 0.4).abs() < 1e-12);
        assert!((g.deviance - 20.0 * 2f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn six_rows_match_scalar_newton() {
        let xs = [-1.2, -0.3, 0.4, 0.9, 1.5, 2.2];
        let y = [0u8, 1, 0, 1, 1, 0];
        let x = DMatrix::from_fn(6, 2, |i, j| if j == 0 { 1.0 } else { xs[i] });
        let fit = logistic_fit(&x, &y).unwrap();
        assert!(fit.converged);
        // Newton-Raphson with the 2x2 system written out
        let (mut b0, mut b1) = (0.0f64, 0.0f64);
        for _ in 0..100 {
            let (mut g0, mut g1, mut h00, mut h01, mut h11) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in 0..6 {
                let p = 1.0 / (1.0 + (-(b0 + b1 * xs[i])).exp());
                let r = f64::from(y[i]) - p;
                let w = p * (1.0 - p);
                g0 += r;
                g1 += r * xs[i];
                h00 += w;
                h01 += w * xs[i];
                h11 += w * xs[i] * xs[i];
            }
            let det = h00 * h11 - h01 * h01;
            b0 += (h11 * g0 - h01 * g1) / det;
            b1 += (h00 * g1 - h01 * g0) / det;
        }
        assert!((fit.coefficients[0] - b0).abs() < 1e-10, "{} vs {b0}", fit.coefficients[0]);
        assert!((fit.coefficients[1] - b1).abs() < 1e-10, "{} vs {b1}", fit.coefficients[1]);
    }

    #[test]
    fn separation_is_flagged() {
        let (x, y) = table_2x2(10, 0, 0, 10);
        let g = logistic_fit(&x, &y).unwrap();
        assert!(!g.converged);
        assert!(g.separation);
    }

    fn rec(i: usize, treat: u8, y1: f64, y2: f64, y3: u8, y4: u8) -> PatientRecord {
        PatientRecord {
            id: i.to_string(),
            treat,
            y10: ((i * 7) % 11) as f64 / 11.0 - 0.5,
            y20: ((i * 5) % 13) as f64 / 13.0 - 0.5,
            y1,
            y2,
            y3,
            y4,
        }
    }

    fn toy_data() -> Dataset {
        let recs = (0..120)
            .map(|i| {
                let t = (i % 2) as u8;
                let u = ((i * 37) % 101) as f64 / 101.0;
                let v = ((i * 53) % 97) as f64 / 97.0;
                rec(
                    i,
                    t,
                    -4.0 + 2.0 * (u - 0.5) - 0.4 * f64::from(t),
                    -0.6 + 2.0 * (v - 0.5) - 0.3 * f64::from(t),
                    1 + (i % 5) as u8,
                    ((i / 3) % 2) as u8,
                )
            })
            .collect();
        Dataset::new(recs, 5).unwrap()
    }

    #[test]
    fn closed_form_matches_integral() {
        let (pf0, theta, mu, s) = (0.62, -4.0, -4.3, 1.3);
        let integral = integrate(
            |y| pf0 * norm_pdf((y - mu) / s) / s,
            f64::NEG_INFINITY,
            theta,
            1e-12,
            0.0,
        )
        .unwrap();
        assert!((augmented_response_prob(pf0, theta, mu, s) - integral).abs() < 1e-10);
        assert!(
            augmented_response_prob(1.0, -3.5, mu, s) > augmented_response_prob(1.0, theta, mu, s)
        );
    }

    #[test]
    fn no_failure_reduces_to_dichotomized_continuous() {
        let data = toy_data();
        let rule = ResponderRule {
            theta2: 1e6,
            w_max: 5,
            y4_level: None,
            ..Default::default()
        };
        let r = augmented_binary_analysis(&data, &rule, Retained::Y1).unwrap();
        assert!(r.notes.iter().any(|n| n.contains("constant")));
        let x = covariate_design(&data);
        let y = DVector::from_iterator(data.len(), data.patients().iter().map(|p| p.y1));
        let (d, s) = ols(&x, &y).unwrap();
        let mean = |t: f64| {
            data.patients()
                .iter()
                .map(|p| norm_cdf((rule.theta1 - d[0] - d[1] * t - d[2] * p.y10 - d[3] * p.y20) / s))
                .sum::<f64>()
                / data.len() as f64
        };
        assert!((r.effect.p_treat - mean(1.0)).abs() < 1e-12);
        assert!((r.effect.p_control - mean(0.0)).abs() < 1e-12);
        assert!((r.effect.estimate - (logit(mean(1.0)) - logit(mean(0.0)))).abs() < 1e-12);
    }

    #[test]
    fn analyses_run_on_toy_data() {
        let data = toy_data();
        let rule = ResponderRule {
            theta1: -3.8,
            theta2: -0.4,
            ..Default::default()
        };
        let a = augmented_binary_analysis(&data, &rule, Retained::Y1).unwrap();
        let b = standard_binary_analysis(&data, &rule).unwrap();
        for e in [&a.effect, &b.effect] {
            assert!(e.estimate.is_finite() && e.se > 0.0);
            assert!(e.ci_low < e.estimate && e.estimate < e.ci_high);
            assert!(e.p_treat > 0.0 && e.p_treat < 1.0);
        }
        let c = augmented_binary_analysis(&data, &rule, Retained::Y2).unwrap();
        assert!(c.effect.estimate.is_finite());
    }

    #[test]
    fn identical_arms_give_zero_effect() {
        // every control record duplicated as a treated one
        let base = toy_data();
        let mut recs = Vec::new();
        for (i, p) in base.patients().iter().filter(|p| p.treat == 0).enumerate() {
            let mut t = p.clone();
            t.treat = 1;
            t.id = format!("t{i}");
            recs.push(p.clone());
            recs.push(t);
        }
        let data = Dataset::new(recs, 5).unwrap();
        let rule = ResponderRule {
            theta1: -3.8,
            theta2: -0.4,
            ..Default::default()
        };
        let a = augmented_binary_analysis(&data, &rule, Retained::Y1).unwrap();
        let b = standard_binary_analysis(&data, &rule).unwrap();
        assert!(a.effect.estimate.abs() < 1e-9, "{}", a.effect.estimate);
        assert!(b.effect.estimate.abs() < 1e-9, "{}", b.effect.estimate);
    }

    mod prop {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn any_two_by_two(a in 1usize..60, b in 1usize..60, c in 1usize..60, d in 1usize..60) {
                let (x, y) = table_2x2(a, b, c, d);
                let g = logistic_fit(&x, &y).unwrap();
                let want = ((a * d) as f64 / (b * c) as f64).ln();
                prop_assert!(g.converged);
                prop_assert!((g.coefficients[1] - want).abs() < 1e-8);
            }

            #[test]
            fn response_prob_in_unit_interval(pf in 0.0f64..=1.0, th in -10.0f64..10.0, mu in -10.0f64..10.0, s in 0.01f64..5.0) {
                let v = augmented_response_prob(pf, th, mu, s);
                prop_assert!((0.0..=1.0).contains(&v));
                prop_assert!(augmented_response_prob(pf, th + 0.5, mu, s) >= v);
            }
        }
    }
}
