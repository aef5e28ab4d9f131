//! Synthetic trial data from a scenario.
//!
//! Errors are multivariate normal with the model covariance, or
//! multivariate skew-normal with the same scale matrix, drawn by the
//! conditioning representation: (X0, X) jointly normal with
//! Cov(X0, X) = delta, and X reflected whenever X0 < 0.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::scenario::Scenario;
use crate::error::Result;
use crate::model::{Dataset, LatentParams, PatientRecord};
use crate::numerics::linalg::cholesky;

/// Draws error vectors (e1, e2, e3*, e4*) on the model scale.
#[derive(Debug, Clone)]
pub struct ErrorSampler {
    /// Lower Cholesky factor of the (augmented) correlation matrix.
    l: [[f64; 5]; 5],
    /// 4 for normal errors, 5 with the skewing variable first.
    dim: usize,
    scale: [f64; 4],
}

impl ErrorSampler {
    pub fn new(p: &LatentParams, skew: &[f64; 4]) -> Result<Self> {
        p.sigma_matrix()?;
        let omega = p.correlation_matrix();
        let normal = skew.iter().all(|&a| a == 0.0);
        let m = if normal {
            DMatrix::from_iterator(4, 4, omega.iter().copied())
        } else {
            let a = nalgebra::Vector4::from_column_slice(skew);
            let oa = omega * a;
            let delta = oa / (1.0 + a.dot(&oa)).sqrt();
            let mut m = DMatrix::identity(5, 5);
            for i in 0..4 {
                m[(0, i + 1)] = delta[i];
                m[(i + 1, 0)] = delta[i];
                for j in 0..4 {
                    m[(i + 1, j + 1)] = omega[(i, j)];
                }
            }
            m
        };
        let c = cholesky(&m)?;
        let dim = m.nrows();
        let mut l = [[0.0; 5]; 5];
        for i in 0..dim {
            for j in 0..=i {
                l[i][j] = c[(i, j)];
            }
        }
        Ok(Self {
            l,
            dim,
            scale: [p.sigma1, p.sigma2, 1.0, 1.0],
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; 4] {
        let mut z = [0.0; 5];
        for v in z.iter_mut().take(self.dim) {
            *v = rng.sample(StandardNormal);
        }
        let mut x = [0.0; 5];
        for i in 0..self.dim {
            x[i] = (0..=i).map(|j| self.l[i][j] * z[j]).sum();
        }
        let (off, sign) = if self.dim == 5 {
            (1, if x[0] < 0.0 { -1.0 } else { 1.0 })
        } else {
            (0, 1.0)
        };
        std::array::from_fn(|i| sign * x[i + off] * self.scale[i])
    }
}

/// Ordinal level (1-based) of a latent value.
pub fn ordinal_level(p: &LatentParams, latent: f64) -> u8 {
    1 + p.tau3.iter().filter(|&&t| latent > t).count() as u8
}

/// Baseline covariates for one patient.
pub fn draw_baseline<R: Rng + ?Sized>(sc: &Scenario, rng: &mut R) -> (f64, f64) {
    let b = &sc.baseline;
    let z1: f64 = rng.sample(StandardNormal);
    let z2: f64 = rng.sample(StandardNormal);
    let c = (1.0 - b.corr * b.corr).sqrt();
    (
        b.mean[0] + b.sd[0] * z1,
        b.mean[1] + b.sd[1] * (b.corr * z1 + c * z2),
    )
}

/// Outcomes of a patient with given covariates, treatment and errors.
pub fn outcomes(
    p: &LatentParams,
    treat: u8,
    y10: f64,
    y20: f64,
    e: &[f64; 4],
) -> (f64, f64, u8, u8) {
    let m = p.means(treat, y10, y20);
    (
        m[0] + e[0],
        m[1] + e[1],
        ordinal_level(p, m[2] + e[2]),
        u8::from(m[3] + e[3] >= 0.0),
    )
}

/// Simulated trial with the first half of patients in the control arm.
pub fn generate_with_rng<R: Rng + ?Sized>(sc: &Scenario, rng: &mut R) -> Result<Dataset> {
    sc.validate()?;
    let sampler = ErrorSampler::new(&sc.params, &sc.skew)?;
    let half = sc.n_total / 2;
    let patients = (0..sc.n_total)
        .map(|i| {
            let treat = u8::from(i >= half);
            let (y10, y20) = draw_baseline(sc, rng);
            let e = sampler.sample(rng);
            let (y1, y2, y3, y4) = outcomes(&sc.params, treat, y10, y20, &e);
            PatientRecord {
                id: format!("{}", i + 1),
                treat,
                y10,
                y20,
                y1,
                y2,
                y3,
                y4,
            }
        })
        .collect();
    Dataset::new(patients, sc.params.k3())
}

/// Deterministic in `seed`.
pub fn generate_dataset(sc: &Scenario, seed: u64) -> Result<Dataset> {
    generate_with_rng(sc, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Random stream for replicate `index` of a run seeded with `seed`.
pub fn replicate_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
