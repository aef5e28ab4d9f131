//! Modified Pearson residuals for the fitted latent variable model.
//!
//! Each patient's observed vector (y1, y2, y3, y4), with the ordinal outcome
//! on its integer coding, is compared with its fitted mean and standardized
//! by the fitted covariance of the observed (not latent) outcomes.

use nalgebra::{DMatrix, Matrix2, Matrix4, Vector4};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::model::{Dataset, FitResult, LatentParams, PatientRecord};
use crate::numerics::bvn::phi2_unchecked;
use crate::numerics::linalg::{nearest_pd, Conditioner};
use crate::numerics::normal::norm_cdf;
use crate::numerics::quad::GaussHermite;

/// Tolerance on the continuous-discrete covariance block.
pub const SIGMA12_TOL: f64 = 1e-6;

const HERMITE_START: usize = 24;
const HERMITE_MAX: usize = 192;

/// Fitted mean and covariance of the observed outcome vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FittedMoments {
    pub mu: Vector4<f64>,
    pub sigma: Matrix4<f64>,
}

impl FittedMoments {
    /// Standardized residual L^{-1}(y - mu) with L the Cholesky factor of
    /// the covariance.
    pub fn residual(&self, y: &Vector4<f64>) -> Result<Vector4<f64>> {
        self.sigma
            .cholesky()
            .ok_or(Error::NotPositiveDefinite)?
            .l()
            .solve_lower_triangular(&(y - self.mu))
            .ok_or(Error::NotPositiveDefinite)
    }
}

/// P(Y3 = w, Y4 = k) without conditioning on the continuous outcomes,
/// indexed `[w - 1][k]`.
pub fn marginal_cells(p: &LatentParams, treat: u8) -> Vec<[f64; 2]> {
    let m = p.means(treat, 0.0, 0.0);
    let (m3, m4) = (m[2], m[3]);
    let r = p.rho.r34;
    (1..=p.k3() as usize)
        .map(|w| {
            let (l3, u3) = (p.cut(w - 1) - m3, p.cut(w) - m3);
            // Y4 = 0 iff Y4* < 0
            let y4_0 = phi2_unchecked(u3, -m4, r) - phi2_unchecked(l3, -m4, r);
            let both = norm_cdf(u3) - norm_cdf(l3);
            [y4_0, both - y4_0]
        })
        .collect()
}

/// E[Y3] and E[Y4] for one arm, from the cell probabilities.
fn discrete_means(cells: &[[f64; 2]]) -> (f64, f64) {
    let mut e3 = 0.0;
    let mut e4 = 0.0;
    for (i, c) in cells.iter().enumerate() {
        e3 += (i + 1) as f64 * (c[0] + c[1]);
        e4 += c[1];
    }
    (e3, e4)
}

/// Covariance of (Y3, Y4) from the cell probabilities.
fn discrete_covariance(cells: &[[f64; 2]]) -> Matrix2<f64> {
    let (e3, e4) = discrete_means(cells);
    let (mut m33, mut m34) = (0.0, 0.0);
    for (i, c) in cells.iter().enumerate() {
        let w = (i + 1) as f64;
        m33 += w * w * (c[0] + c[1]);
        m34 += w * c[1];
    }
    Matrix2::new(m33 - e3 * e3, m34 - e3 * e4, m34 - e3 * e4, e4 * (1.0 - e4))
}

/// Cov((Y1, Y2), (Y3, Y4)) as E[e_a E(Y_b | e1, e2)] over the centred
/// continuous errors, by a product Gauss-Hermite rule refined until two
/// successive rules agree to [`SIGMA12_TOL`].
fn cross_covariance(p: &LatentParams, treat: u8) -> Result<Matrix2<f64>> {
    let cond = Conditioner::new(p)?;
    if !cond.is_pd() {
        return Err(Error::NotPositiveDefinite);
    }
    let m = p.means(treat, 0.0, 0.0);
    let (s1, s2, r12) = (p.sigma1, p.sigma2, p.rho.r12);
    let c12 = (1.0 - r12 * r12).sqrt();
    let k3 = p.k3() as usize;
    let rule = |n: usize| -> Matrix2<f64> {
        let gh = GaussHermite::new(n);
        let mut acc = Matrix2::zeros();
        for (&z1, &w1) in gh.nodes.iter().zip(&gh.weights) {
            for (&z2, &w2) in gh.nodes.iter().zip(&gh.weights) {
                let e1 = s1 * z1;
                let e2 = s2 * (r12 * z1 + c12 * z2);
                let c = cond.apply(e1, e2, m[2], m[3]);
                let (sd3, sd4, _) = c.sd_corr();
                // E(Y3 | e) = 1 + sum_w P(Y3* > tau_w | e)
                let ey3 = 1.0
                    + (1..k3)
                        .map(|w| norm_cdf((c.mu_cond[0] - p.cut(w)) / sd3))
                        .sum::<f64>();
                let ey4 = norm_cdf(c.mu_cond[1] / sd4);
                let w = w1 * w2;
                acc[(0, 0)] += w * e1 * ey3;
                acc[(0, 1)] += w * e1 * ey4;
                acc[(1, 0)] += w * e2 * ey3;
                acc[(1, 1)] += w * e2 * ey4;
            }
        }
        acc
    };
    let mut n = HERMITE_START;
    let mut prev = rule(n);
    loop {
        let next_n = 2 * n;
        let next = rule(next_n);
        let diff = (next - prev).amax();
        if diff <= SIGMA12_TOL {
            return Ok(next);
        }
        if next_n >= HERMITE_MAX {
            return Err(Error::QuadratureNotConverged {
                tol: SIGMA12_TOL,
                estimate: diff,
            });
        }
        n = next_n;
        prev = next;
    }
}

/// Covariance of the observed outcome vector in one arm. It does not
/// depend on the baseline covariates.
pub fn arm_covariance(p: &LatentParams, treat: u8) -> Result<Matrix4<f64>> {
    let s = p.sigma_matrix()?;
    let cells = marginal_cells(p, treat);
    let s22 = discrete_covariance(&cells);
    let s12 = cross_covariance(p, treat)?;
    let mut out = Matrix4::zeros();
    out.fixed_view_mut::<2, 2>(0, 0)
        .copy_from(&s.fixed_view::<2, 2>(0, 0));
    out.fixed_view_mut::<2, 2>(2, 2).copy_from(&s22);
    out.fixed_view_mut::<2, 2>(0, 2).copy_from(&s12);
    out.fixed_view_mut::<2, 2>(2, 0).copy_from(&s12.transpose());
    Ok(out)
}

fn fitted_mean(p: &LatentParams, rec: &PatientRecord, cells: &[[f64; 2]]) -> Vector4<f64> {
    let m = p.means(rec.treat, rec.y10, rec.y20);
    let (e3, e4) = discrete_means(cells);
    Vector4::new(m[0], m[1], e3, e4)
}

pub fn fitted_moments(p: &LatentParams, rec: &PatientRecord) -> Result<FittedMoments> {
    let cells = marginal_cells(p, rec.treat);
    Ok(FittedMoments {
        mu: fitted_mean(p, rec, &cells),
        sigma: arm_covariance(p, rec.treat)?,
    })
}

/// Per-patient residuals and statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofReport {
    pub ids: Vec<String>,
    pub residuals: Vec<[f64; 4]>,
    pub statistics: Vec<f64>,
    /// 95th percentile of chi-squared with 4 degrees of freedom.
    pub threshold: f64,
    pub n_exceeding: usize,
    pub mean_statistic: f64,
    /// A fitted covariance needed repair before it could be factorized.
    pub repaired: bool,
}

impl GofReport {
    pub fn exceedance_rate(&self) -> f64 {
        self.n_exceeding as f64 / self.statistics.len().max(1) as f64
    }
}

pub fn chi2_4_q95() -> f64 {
    ChiSquared::new(4.0)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.95)
}

/// Modified Pearson residuals r_i = L^{-1}(Y_i - mu_i), with L the
/// Cholesky factor of the fitted covariance in the patient's arm, and the
/// statistics |r_i|^2.
pub fn modified_pearson_residuals(fit: &FitResult, data: &Dataset) -> Result<GofReport> {
    pearson_residuals_at(&fit.params_hat, data)
}

/// As [`modified_pearson_residuals`] at arbitrary parameter values.
pub fn pearson_residuals_at(p: &LatentParams, data: &Dataset) -> Result<GofReport> {
    let mut repaired = false;
    let mut factors = Vec::with_capacity(2);
    let mut cells = Vec::with_capacity(2);
    for treat in 0..2u8 {
        let s = arm_covariance(p, treat)?;
        let l = match s.cholesky() {
            Some(c) => c.l(),
            None => {
                repaired = true;
                let fixed = nearest_pd(&DMatrix::from_iterator(4, 4, s.iter().copied()))?;
                Matrix4::from_iterator(fixed.iter().copied())
                    .cholesky()
                    .ok_or(Error::NotPositiveDefinite)?
                    .l()
            }
        };
        factors.push(l);
        cells.push(marginal_cells(p, treat));
    }
    let threshold = chi2_4_q95();
    let n = data.len();
    let mut ids = Vec::with_capacity(n);
    let mut residuals = Vec::with_capacity(n);
    let mut statistics = Vec::with_capacity(n);
    for rec in data.patients() {
        let t = rec.treat as usize;
        let mu = fitted_mean(p, rec, &cells[t]);
        let y = Vector4::new(rec.y1, rec.y2, f64::from(rec.y3), f64::from(rec.y4));
        let r = factors[t]
            .solve_lower_triangular(&(y - mu))
            .ok_or(Error::NotPositiveDefinite)?;
        ids.push(rec.id.clone());
        statistics.push(r.norm_squared());
        residuals.push([r[0], r[1], r[2], r[3]]);
    }
    let n_exceeding = statistics.iter().filter(|&&s| s > threshold).count();
    let mean_statistic = statistics.iter().sum::<f64>() / n.max(1) as f64;
    Ok(GofReport {
        ids,
        residuals,
        statistics,
        threshold,
        n_exceeding,
        mean_statistic,
        repaired,
    })
}
