//! True population response probabilities and log odds ratio of a
//! scenario, averaged over the baseline covariate distribution.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generate::{draw_baseline, outcomes, replicate_rng, ErrorSampler};
use super::scenario::Scenario;
use crate::error::{Error, Result};
use crate::inference::response_prob_with_sigma;
use crate::model::{observed_response, PatientRecord};
use crate::numerics::Phi4Options;

pub const TRUTH_DRAWS: usize = 10_000_000;
pub const TRUTH_SEED: u64 = 0x7a0e_5eed;
const CHUNK: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TruthSource {
    /// Rectangle probability under the covariate-marginal normal
    /// distribution (normal errors only).
    Exact,
    MonteCarlo { draws: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrueEffect {
    pub p_control: f64,
    pub p_treat: f64,
    pub log_or: f64,
    /// Monte Carlo standard error of `log_or` (0 when exact).
    pub mcse_log_or: f64,
    pub source: TruthSource,
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Monte Carlo truth with common random numbers across arms: every draw
/// of covariates and errors is evaluated under both treatments.
pub fn true_effect_mc(sc: &Scenario, draws: usize, seed: u64) -> Result<TrueEffect> {
    sc.validate()?;
    let sampler = ErrorSampler::new(&sc.params, &sc.skew)?;
    let chunks = draws.div_ceil(CHUNK);
    let sums = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = replicate_rng(seed, c as u64);
            let n = CHUNK.min(draws - c * CHUNK);
            let mut s = [0u64; 3];
            for _ in 0..n {
                let (y10, y20) = draw_baseline(sc, &mut rng);
                let e = sampler.sample(&mut rng);
                let mut r = [0u8; 2];
                for (t, ri) in r.iter_mut().enumerate() {
                    let (y1, y2, y3, y4) = outcomes(&sc.params, t as u8, y10, y20, &e);
                    let rec = PatientRecord {
                        id: String::new(),
                        treat: t as u8,
                        y10,
                        y20,
                        y1,
                        y2,
                        y3,
                        y4,
                    };
                    *ri = observed_response(&rec, &sc.rule);
                }
                s[0] += u64::from(r[0]);
                s[1] += u64::from(r[1]);
                s[2] += u64::from(r[0] & r[1]);
            }
            s
        })
        .reduce(|| [0; 3], |a, b| [a[0] + b[0], a[1] + b[1], a[2] + b[2]]);
    let n = draws as f64;
    let (p0, p1, p01) = (sums[0] as f64 / n, sums[1] as f64 / n, sums[2] as f64 / n);
    if !(p0 > 0.0 && p0 < 1.0 && p1 > 0.0 && p1 < 1.0) {
        return Err(Error::DegenerateOdds(if p0 > 0.0 && p0 < 1.0 { p1 } else { p0 }));
    }
    // influence function of logit(p1) - logit(p0)
    let (a, b) = (1.0 / (p1 * (1.0 - p1)), 1.0 / (p0 * (1.0 - p0)));
    let cov = p01 - p0 * p1;
    let var = a * a * p1 * (1.0 - p1) + b * b * p0 * (1.0 - p0) - 2.0 * a * b * cov;
    Ok(TrueEffect {
        p_control: p0,
        p_treat: p1,
        log_or: logit(p1) - logit(p0),
        mcse_log_or: (var.max(0.0) / n).sqrt(),
        source: TruthSource::MonteCarlo { draws, seed },
    })
}

/// Exact truth for normal errors: the covariates enter the means linearly,
/// so averaging over them inflates the continuous-outcome covariance.
pub fn true_effect_exact(sc: &Scenario) -> Result<TrueEffect> {
    sc.validate()?;
    if !sc.is_normal() {
        return Err(Error::InvalidParams(
            "exact truth needs normal errors".into(),
        ));
    }
    let p = &sc.params;
    let b = &sc.baseline;
    let mut s = p.sigma_matrix()?;
    let (c1, c2) = (p.alpha2 * b.sd[0], p.beta2 * b.sd[1]);
    s[(0, 0)] += c1 * c1;
    s[(1, 1)] += c2 * c2;
    s[(0, 1)] += c1 * c2 * b.corr;
    s[(1, 0)] = s[(0, 1)];
    let opts = Phi4Options::quadrature(4);
    let prob = |t: u8| {
        response_prob_with_sigma(p, &s, t, b.mean[0], b.mean[1], &sc.rule, &opts).map(|r| r.value)
    };
    let (p0, p1) = (prob(0)?, prob(1)?);
    Ok(TrueEffect {
        p_control: p0,
        p_treat: p1,
        log_or: logit(p1) - logit(p0),
        mcse_log_or: 0.0,
        source: TruthSource::Exact,
    })
}

fn cache() -> &'static Mutex<HashMap<String, TrueEffect>> {
    static CACHE: OnceLock<Mutex<HashMap<String, TrueEffect>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// The scenario's true effect from the [`TRUTH_DRAWS`]-draw Monte Carlo
/// oracle, computed once per generating model and cached.
pub fn true_effect(sc: &Scenario) -> Result<TrueEffect> {
    // the sample size does not affect the truth
    let key = format!("{:?}", (&sc.params, &sc.rule, &sc.baseline, &sc.skew));
    if let Some(t) = cache().lock().expect("truth cache").get(&key) {
        return Ok(*t);
    }
    let t = true_effect_mc(sc, TRUTH_DRAWS, TRUTH_SEED)?;
    cache().lock().expect("truth cache").insert(key, t);
    Ok(t)
}
