//! Dense linear algebra helpers and Gaussian conditioning.

use nalgebra::{DMatrix, Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::model::LatentParams;

/// Eigenvalue floor used by [`nearest_pd`].
pub const PD_EPS: f64 = 1e-8;

/// Lower-triangular Cholesky factor.
pub fn cholesky(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::NotPositiveDefinite);
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotPositiveDefinite);
    }
    m.clone()
        .cholesky()
        .map(|c| c.l())
        .ok_or(Error::NotPositiveDefinite)
}

/// Inverse of a symmetric positive definite matrix via its Cholesky factor.
pub fn invert_spd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = m.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    let inv = chol.inverse();
    Ok(symmetrize(&inv))
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..i {
            let scale = m[(i, j)].abs().max(m[(j, i)].abs()).max(1.0);
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs() / scale);
        }
    }
    worst
}

/// Frobenius-nearest symmetric matrix whose eigenvalues are all at least
/// [`PD_EPS`]. Inputs already satisfying that bound are returned unchanged.
pub fn nearest_pd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::NotSymmetric(f64::INFINITY));
    }
    let asym = max_asymmetry(m);
    if asym > 1e-10 {
        return Err(Error::NotSymmetric(asym));
    }
    let sym = symmetrize(m);
    let eig = sym.clone().symmetric_eigen();
    if eig.eigenvalues.min() >= PD_EPS {
        return Ok(m.clone());
    }
    let clipped = eig.eigenvalues.map(|l| l.max(PD_EPS));
    let v = &eig.eigenvectors;
    let out = v * DMatrix::from_diagonal(&clipped) * v.transpose();
    Ok(symmetrize(&out))
}

/// Distribution of the two latent discrete-outcome variables given the two
/// observed continuous outcomes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CondNormal {
    pub mu_cond: Vector2<f64>,
    pub sigma_cond: Matrix2<f64>,
}

impl CondNormal {
    pub fn standard() -> Self {
        Self {
            mu_cond: Vector2::zeros(),
            sigma_cond: Matrix2::identity(),
        }
    }

    /// Conditional standard deviations and correlation.
    #[inline]
    pub fn sd_corr(&self) -> (f64, f64, f64) {
        let s3 = self.sigma_cond[(0, 0)].sqrt();
        let s4 = self.sigma_cond[(1, 1)].sqrt();
        (s3, s4, self.sigma_cond[(0, 1)] / (s3 * s4))
    }
}

/// Regression coefficients of the conditioning formulas; they depend only on
/// the scale and correlation parameters, so likelihood code computes them
/// once per parameter vector.
#[derive(Debug, Clone, Copy)]
pub struct Conditioner {
    b31: f64,
    b32: f64,
    b41: f64,
    b42: f64,
    sigma_cond: Matrix2<f64>,
}

impl Conditioner {
    pub fn new(p: &LatentParams) -> Result<Self> {
        let r = &p.rho;
        let one_m = 1.0 - r.r12 * r.r12;
        if !(one_m > 0.0) {
            return Err(Error::InvalidCorrelation(r.r12));
        }
        let (s1, s2) = (p.sigma1, p.sigma2);
        let v33 = 1.0 - (r.r13 * r.r13 - 2.0 * r.r12 * r.r13 * r.r23 + r.r23 * r.r23) / one_m;
        let v44 = 1.0 - (r.r14 * r.r14 - 2.0 * r.r12 * r.r14 * r.r24 + r.r24 * r.r24) / one_m;
        let v34 = r.r34
            - (r.r13 * r.r14 - r.r12 * r.r13 * r.r24 - r.r12 * r.r14 * r.r23 + r.r23 * r.r24)
                / one_m;
        Ok(Self {
            b31: (r.r13 - r.r12 * r.r23) / (s1 * one_m),
            b32: (r.r23 - r.r12 * r.r13) / (s2 * one_m),
            b41: (r.r14 - r.r12 * r.r24) / (s1 * one_m),
            b42: (r.r24 - r.r12 * r.r14) / (s2 * one_m),
            sigma_cond: Matrix2::new(v33, v34, v34, v44),
        })
    }

    /// True when the conditional covariance is a valid covariance, which
    /// holds iff the full 4x4 covariance is positive definite.
    pub fn is_pd(&self) -> bool {
        let s = &self.sigma_cond;
        s[(0, 0)] > 0.0 && s[(1, 1)] > 0.0 && s[(0, 0)] * s[(1, 1)] - s[(0, 1)] * s[(0, 1)] > 0.0
    }

    #[inline]
    pub fn apply(&self, e1: f64, e2: f64, mu3: f64, mu4: f64) -> CondNormal {
        CondNormal {
            mu_cond: Vector2::new(
                mu3 + self.b31 * e1 + self.b32 * e2,
                mu4 + self.b41 * e1 + self.b42 * e2,
            ),
            sigma_cond: self.sigma_cond,
        }
    }
}

/// Mean and covariance of the latent (Y3*, Y4*) given Y1 = y1, Y2 = y2.
#[allow(clippy::too_many_arguments)]
pub fn conditional_34(
    p: &LatentParams,
    y1: f64,
    y2: f64,
    mu1: f64,
    mu2: f64,
    mu3: f64,
    mu4: f64,
) -> Result<CondNormal> {
    let c = Conditioner::new(p)?;
    if !c.is_pd() {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(c.apply(y1 - mu1, y2 - mu2, mu3, mu4))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Correlations;
    use proptest::prelude::*;

    /// Generic Gaussian conditioning by Schur complement.
    fn schur_conditional(
        sigma: &DMatrix<f64>,
        mu: &[f64; 4],
        y: [f64; 2],
    ) -> (Vector2<f64>, Matrix2<f64>) {
        let s11 = sigma.view((0, 0), (2, 2)).into_owned();
        let s21 = sigma.view((2, 0), (2, 2)).into_owned();
        let s22 = sigma.view((2, 2), (2, 2)).into_owned();
        let inv = s11.try_inverse().unwrap();
        let d = DMatrix::from_column_slice(2, 1, &[y[0] - mu[0], y[1] - mu[1]]);
        let m = &s21 * &inv * d;
        let c = s22 - &s21 * inv * s21.transpose();
        (
            Vector2::new(mu[2] + m[0], mu[3] + m[1]),
            Matrix2::new(c[(0, 0)], c[(0, 1)], c[(1, 0)], c[(1, 1)]),
        )
    }

    #[test]
    fn independence_and_centering() {
        let mut p = LatentParams::baseline();
        p.rho = Correlations::default();
        let c = conditional_34(&p, 3.0, -2.0, 0.0, 0.0, 0.4, -0.1).unwrap();
        assert_eq!(c.mu_cond, Vector2::new(0.4, -0.1));
        assert_eq!(c.sigma_cond, Matrix2::identity());

        let p = LatentParams::baseline();
        let c = conditional_34(&p, 1.5, -0.7, 1.5, -0.7, 0.3, 0.2).unwrap();
        assert_eq!(c.mu_cond, Vector2::new(0.3, 0.2));
    }

    #[test]
    fn baseline_hand_value() {
        // (0.35 - 0.5 * 0.4) / (1 * 0.75) = 0.2
        let p = LatentParams::baseline();
        let c = conditional_34(&p, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0).unwrap();
        assert!((c.mu_cond[0] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn rejects_unit_rho12() {
        let mut p = LatentParams::baseline();
        p.rho.r12 = 1.0;
        assert!(conditional_34(&p, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn nearest_pd_examples() {
        let id = DMatrix::<f64>::identity(3, 3);
        assert_eq!(nearest_pd(&id).unwrap(), id);

        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -1e-12]));
        let r = nearest_pd(&m).unwrap();
        assert!(cholesky(&r).is_ok());
        assert!((r[(1, 1)] - PD_EPS).abs() < 1e-12);

        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.2, 1.0]);
        assert!(matches!(nearest_pd(&asym), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert_eq!(cholesky(&m), Err(Error::NotPositiveDefinite));
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 2.0, 2.0, 3.0]);
        let l = cholesky(&m).unwrap();
        assert!((&l * l.transpose() - m).norm() < 1e-14);
    }

    fn random_symmetric(seed: &[f64], n: usize) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |i, j| seed[(i * n + j) % seed.len()]);
        symmetrize(&(&a + a.transpose()))
    }

    proptest! {
        #[test]
        fn conditional_matches_schur(
            r in prop::array::uniform6(-0.6..0.6f64),
            s in prop::array::uniform2(0.3..2.5f64),
            y in prop::array::uniform2(-3.0..3.0f64),
            mu in prop::array::uniform4(-2.0..2.0f64),
        ) {
            let mut p = LatentParams::baseline();
            p.rho = Correlations::from_array(r);
            p.sigma1 = s[0];
            p.sigma2 = s[1];
            prop_assume!(p.sigma_matrix().is_ok());
            let sig = p.sigma_matrix().unwrap();
            let dm = DMatrix::from_iterator(4, 4, sig.iter().copied());
            let (m, c) = schur_conditional(&dm, &mu, y);
            let got = conditional_34(&p, y[0], y[1], mu[0], mu[1], mu[2], mu[3]).unwrap();
            prop_assert!((got.mu_cond - m).abs().max() < 1e-12);
            prop_assert!((got.sigma_cond - c).abs().max() < 1e-12);
        }

        #[test]
        fn nearest_pd_is_pd_and_no_farther_than_clipping(
            vals in prop::collection::vec(-2.0..2.0f64, 25),
            shift in 0.0..3.0f64,
        ) {
            let mut m = random_symmetric(&vals, 5);
            for i in 0..5 { m[(i, i)] -= shift; }
            let out = nearest_pd(&m).unwrap();
            let eig = out.clone().symmetric_eigen();
            prop_assert!(eig.eigenvalues.min() >= PD_EPS / 2.0);
            // eigenvalue clipping oracle
            let e = m.clone().symmetric_eigen();
            let clip = &e.eigenvectors
                * DMatrix::from_diagonal(&e.eigenvalues.map(|l| l.max(PD_EPS)))
                * e.eigenvectors.transpose();
            prop_assert!((&out - &m).norm() <= (&clip - &m).norm() + 1e-9);
            // idempotent
            let again = nearest_pd(&out).unwrap();
            prop_assert!((&again - &out).norm() < 1e-9);
        }
    }

    #[test]
    fn nearest_pd_beats_diagonal_zeroing() {
        // One negative eigenvalue; compare with dropping all off-diagonal
        // entries (and flooring the diagonal).
        let v = DMatrix::from_row_slice(3, 3, &[0.6, 0.8, 0.0, -0.8, 0.6, 0.0, 0.0, 0.0, 1.0]);
        let lam = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 1.0, -0.4]));
        let m = symmetrize(&(&v * lam * v.transpose()));
        let out = nearest_pd(&m).unwrap();
        assert!(cholesky(&out).is_ok());
        let diag = DMatrix::from_diagonal(&m.diagonal().map(|d| d.max(PD_EPS)));
        assert!((&out - &m).norm() < (&diag - &m).norm());
        // eigendecomposition oracle: distance equals |lambda_min - eps|
        assert!(((&out - &m).norm() - (0.4 + PD_EPS)).abs() < 1e-9);
    }
}
