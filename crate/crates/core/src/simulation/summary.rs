//! Operating characteristics of each method over simulation replicates,
//! with Monte Carlo standard errors.

use serde::{Deserialize, Serialize};
use statrs::statistics::{Data, OrderStatistics};

use super::run::{Method, MethodResult, ReplicateResult};

/// Nominal level of the Wald tests counted as power.
pub const TEST_LEVEL: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measure {
    pub estimate: f64,
    pub mcse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub n_used: usize,
    pub n_excluded: usize,
    pub mean_estimate: f64,
    pub bias: Measure,
    pub coverage: Measure,
    pub bias_corrected_coverage: Measure,
    pub power: Measure,
    pub mse: Measure,
    pub emp_se: Measure,
    pub mod_se: Measure,
    pub mean_p_treat: f64,
    pub mean_p_control: f64,
}

/// Replicate-wise Var_B / Var_A (model variances) of method A against B.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativePrecision {
    pub a: Method,
    pub b: Method,
    pub n: usize,
    pub median: f64,
    pub p10: f64,
    pub p90: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingCharacteristics {
    pub true_log_or: f64,
    pub n_sim: usize,
    pub methods: Vec<MethodSummary>,
    pub relative_precision: Vec<RelativePrecision>,
}

impl OperatingCharacteristics {
    pub fn method(&self, m: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|s| s.method == m)
    }

    pub fn precision(&self, a: Method, b: Method) -> Option<&RelativePrecision> {
        self.relative_precision
            .iter()
            .find(|r| r.a == a && r.b == b)
    }
}

fn proportion(hits: usize, n: usize) -> Measure {
    let p = hits as f64 / n as f64;
    Measure {
        estimate: p,
        mcse: (p * (1.0 - p) / n as f64).sqrt(),
    }
}

/// Performance measures of one method from its usable replicates.
/// Requires at least two replicates.
pub fn summarize_method(
    method: Method,
    results: &[&MethodResult],
    n_excluded: usize,
    truth: f64,
) -> MethodSummary {
    let n = results.len();
    let nf = n as f64;
    let est: Vec<f64> = results.iter().map(|r| r.estimate).collect();
    let mean = est.iter().sum::<f64>() / nf;
    let ss = est.iter().map(|e| (e - mean).powi(2)).sum::<f64>();

    let bias = Measure {
        estimate: mean - truth,
        mcse: (ss / (nf * (nf - 1.0))).sqrt(),
    };
    let coverage = proportion(
        results
            .iter()
            .filter(|r| r.ci_low <= truth && truth <= r.ci_high)
            .count(),
        n,
    );
    let bias_corrected_coverage = proportion(
        results
            .iter()
            .filter(|r| r.ci_low <= mean && mean <= r.ci_high)
            .count(),
        n,
    );
    let power = proportion(results.iter().filter(|r| r.p_value < TEST_LEVEL).count(), n);

    let sq: Vec<f64> = est.iter().map(|e| (e - truth).powi(2)).collect();
    let mse_hat = sq.iter().sum::<f64>() / nf;
    let mse = Measure {
        estimate: mse_hat,
        mcse: (sq.iter().map(|s| (s - mse_hat).powi(2)).sum::<f64>() / (nf * (nf - 1.0))).sqrt(),
    };

    let emp = (ss / (nf - 1.0)).sqrt();
    let emp_se = Measure {
        estimate: emp,
        mcse: emp / (2.0 * (nf - 1.0)).sqrt(),
    };

    let vars: Vec<f64> = results.iter().map(|r| r.se * r.se).collect();
    let var_sum = vars.iter().sum::<f64>();
    let mod_hat = (var_sum / (nf - 1.0)).sqrt();
    let var_mean = var_sum / nf;
    let var_var = vars.iter().map(|v| (v - var_mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let mod_se = Measure {
        estimate: mod_hat,
        mcse: (var_var / (4.0 * nf * mod_hat * mod_hat)).sqrt(),
    };

    MethodSummary {
        method,
        n_used: n,
        n_excluded,
        mean_estimate: mean,
        bias,
        coverage,
        bias_corrected_coverage,
        power,
        mse,
        emp_se,
        mod_se,
        mean_p_treat: results.iter().map(|r| r.p_treat).sum::<f64>() / nf,
        mean_p_control: results.iter().map(|r| r.p_control).sum::<f64>() / nf,
    }
}

fn relative_precision(reps: &[ReplicateResult], a: Method, b: Method) -> Option<RelativePrecision> {
    let ratios: Vec<f64> = reps
        .iter()
        .filter_map(|r| {
            let (ra, rb) = (r.get(a)?, r.get(b)?);
            (ra.usable() && rb.usable() && ra.se > 0.0).then(|| (rb.se * rb.se) / (ra.se * ra.se))
        })
        .collect();
    if ratios.is_empty() {
        return None;
    }
    let n = ratios.len();
    let mut data = Data::new(ratios);
    Some(RelativePrecision {
        a,
        b,
        n,
        median: data.median(),
        p10: data.quantile(0.1),
        p90: data.quantile(0.9),
    })
}

/// Operating characteristics against the true log odds ratio. Methods with
/// fewer than two usable replicates are left out.
pub fn summarize(reps: &[ReplicateResult], true_log_or: f64) -> OperatingCharacteristics {
    let mut methods = Vec::new();
    for m in Method::ALL {
        let ran: Vec<&MethodResult> = reps.iter().filter_map(|r| r.get(m)).collect();
        if ran.is_empty() {
            continue;
        }
        let used: Vec<&MethodResult> = ran.iter().copied().filter(|r| r.usable()).collect();
        if used.len() < 2 {
            continue;
        }
        methods.push(summarize_method(m, &used, ran.len() - used.len(), true_log_or));
    }
    let pairs = [
        (Method::Latent, Method::Binary),
        (Method::Latent, Method::AugmentedBinary),
        (Method::AugmentedBinary, Method::Binary),
    ];
    let relative_precision = pairs
        .iter()
        .filter_map(|&(a, b)| relative_precision(reps, a, b))
        .collect();
    OperatingCharacteristics {
        true_log_or,
        n_sim: reps.len(),
        methods,
        relative_precision,
    }
}
