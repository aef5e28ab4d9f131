//! Nonparametric bootstrap bias correction and percentile intervals.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generate::replicate_rng;
use super::run::{analyze_method, AnalysisOptions, Method};
use crate::error::{Error, Result};
use crate::model::{Dataset, ResponderRule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub method: Method,
    pub original: f64,
    /// Original estimate minus the mean bootstrap estimate.
    pub bias: f64,
    pub mcse_bias: f64,
    pub corrected: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_used: usize,
    pub n_dropped: usize,
}

/// 1-based ranks of the 95% percentile interval among `n` ordered
/// estimates: ceil(0.025 n) and floor(0.975 n).
pub fn percentile_ranks(n: usize) -> (usize, usize) {
    let lo = (0.025 * n as f64).ceil() as usize;
    let hi = (0.975 * n as f64).floor() as usize;
    (lo.max(1), hi.clamp(1, n.max(1)))
}

pub fn percentile_interval(estimates: &[f64]) -> (f64, f64) {
    let mut v = estimates.to_vec();
    v.sort_by(f64::total_cmp);
    let (lo, hi) = percentile_ranks(v.len());
    (v[lo - 1], v[hi - 1])
}

/// Patient indices of resample `b`.
pub fn resample_indices(n: usize, seed: u64, b: usize) -> Vec<usize> {
    let mut rng = replicate_rng(seed, b as u64);
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// Bias summary of a statistic from its original value and its bootstrap
/// replicates (`None` entries are dropped).
pub fn summarize_bootstrap(method: Method, original: f64, boot: &[Option<f64>]) -> Result<BootstrapSummary> {
    let used: Vec<f64> = boot.iter().flatten().copied().collect();
    if used.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} usable bootstrap estimates",
            used.len()
        )));
    }
    let n = used.len() as f64;
    let mean = used.iter().sum::<f64>() / n;
    let sd = (used.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let bias = original - mean;
    let (ci_low, ci_high) = percentile_interval(&used);
    Ok(BootstrapSummary {
        method,
        original,
        bias,
        mcse_bias: sd / n.sqrt(),
        corrected: original - bias,
        ci_low,
        ci_high,
        n_used: used.len(),
        n_dropped: boot.len() - used.len(),
    })
}

/// Resample the pooled patients with replacement `n_boot` times, refit
/// each method and correct its point estimate by the estimated bias.
/// Standard errors are not needed for the resamples and are skipped.
pub fn bootstrap_bias_correct(
    data: &Dataset,
    rule: &ResponderRule,
    n_boot: usize,
    seed: u64,
    opts: &AnalysisOptions,
) -> Result<Vec<BootstrapSummary>> {
    let mut boot_opts = opts.clone();
    boot_opts.effect.compute_se = false;
    boot_opts.fit.skip_hessian = true;
    let n = data.len();
    let boot: Vec<Vec<Option<f64>>> = (0..n_boot)
        .into_par_iter()
        .map(|b| {
            let idx = resample_indices(n, seed, b);
            let Ok(d) = data.resample(&idx) else {
                return vec![None; opts.methods.len()];
            };
            opts.methods
                .iter()
                .map(|&m| {
                    let r = analyze_method(&d, rule, m, &boot_opts);
                    (r.converged && r.estimate.is_finite()).then_some(r.estimate)
                })
                .collect()
        })
        .collect();
    opts.methods
        .iter()
        .enumerate()
        .map(|(k, &m)| {
            let orig = analyze_method(data, rule, m, &boot_opts);
            if !(orig.converged && orig.estimate.is_finite()) {
                return Err(Error::FitFailed(format!(
                    "{m} analysis of the original data: {}",
                    orig.note.unwrap_or_default()
                )));
            }
            let column: Vec<Option<f64>> = boot.iter().map(|row| row[k]).collect();
            summarize_bootstrap(m, orig.estimate, &column)
        })
        .collect()
}
