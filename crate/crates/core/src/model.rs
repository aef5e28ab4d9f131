//! Domain data model: patient records, responder rules and the structural
//! parameters of the four-outcome latent variable model.
//!
//! The two continuous outcomes are observed directly. The ordinal outcome
//! (levels `1..=k3`, 1 being the best grade) and the binary outcome are
//! thresholded views of two latent Gaussian variables with unit variance.
//! The ordinal intercept is fixed at 0 and the binary cut-point at 0, so the
//! ordinal cut-points and the binary intercept are free.

use nalgebra::{DMatrix, Matrix4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::linalg;

/// Default number of ordinal levels.
pub const DEFAULT_K3: u8 = 5;

/// Minimum usable records for a latent model fit.
pub const MIN_FIT_RECORDS: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub id: String,
    pub treat: u8,
    pub y10: f64,
    pub y20: f64,
    pub y1: f64,
    pub y2: f64,
    pub y3: u8,
    pub y4: u8,
}

impl PatientRecord {
    pub fn validate(&self, k3: u8) -> Result<()> {
        let fail = |reason: String| {
            Err(Error::InvalidRecord {
                id: self.id.clone(),
                reason,
            })
        };
        if self.treat > 1 {
            return fail(format!("treat must be 0 or 1, got {}", self.treat));
        }
        if self.y4 > 1 {
            return fail(format!("y4 must be 0 or 1, got {}", self.y4));
        }
        if self.y3 < 1 || self.y3 > k3 {
            return fail(format!("y3 must be in 1..={k3}, got {}", self.y3));
        }
        for (name, v) in [
            ("y10", self.y10),
            ("y20", self.y20),
            ("y1", self.y1),
            ("y2", self.y2),
        ] {
            if !v.is_finite() {
                return fail(format!("{name} is not finite"));
            }
        }
        Ok(())
    }
}

/// Complete-case analysis set. All records share the ordinal level count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    patients: Vec<PatientRecord>,
    k3: u8,
}

impl Dataset {
    pub fn new(patients: Vec<PatientRecord>, k3: u8) -> Result<Self> {
        if k3 < 2 {
            return Err(Error::InvalidDataset(format!(
                "ordinal level count must be at least 2, got {k3}"
            )));
        }
        if patients.is_empty() {
            return Err(Error::InvalidDataset("no patients".into()));
        }
        for p in &patients {
            p.validate(k3)?;
        }
        Ok(Self { patients, k3 })
    }

    pub fn patients(&self) -> &[PatientRecord] {
        &self.patients
    }

    pub fn k3(&self) -> u8 {
        self.k3
    }

    pub fn len(&self) -> usize {
        self.patients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patients.is_empty()
    }

    /// (control, treated) counts.
    pub fn arm_counts(&self) -> (usize, usize) {
        let treated = self.patients.iter().filter(|p| p.treat == 1).count();
        (self.patients.len() - treated, treated)
    }

    pub fn require_both_arms(&self) -> Result<()> {
        match self.arm_counts() {
            (0, _) => Err(Error::InsufficientData("no control-arm patients".into())),
            (_, 0) => Err(Error::InsufficientData("no treated-arm patients".into())),
            _ => Ok(()),
        }
    }

    /// New dataset made of the records at `indices` (repeats allowed).
    pub fn resample(&self, indices: &[usize]) -> Result<Self> {
        let patients = indices.iter().map(|&i| self.patients[i].clone()).collect();
        Self::new(patients, self.k3)
    }
}

/// Component thresholds defining an overall responder.
///
/// A patient responds iff `y1 <= theta1`, `y2 <= theta2`, `y3 <= w_max` and
/// the binary outcome equals `y4_level`. `y4_level = None` leaves the binary
/// component non-binding; `w_max = k3` does the same for the ordinal one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponderRule {
    pub theta1: f64,
    pub theta2: f64,
    pub w_max: u8,
    pub y4_level: Option<u8>,
}

impl Default for ResponderRule {
    fn default() -> Self {
        Self {
            theta1: -4.0,
            theta2: -0.6,
            w_max: 3,
            y4_level: Some(0),
        }
    }
}

impl ResponderRule {
    pub fn validate(&self, k3: u8) -> Result<()> {
        if !self.theta1.is_finite() || !self.theta2.is_finite() {
            return Err(Error::InvalidParams(
                "responder thresholds must be finite".into(),
            ));
        }
        if self.w_max < 1 || self.w_max > k3 {
            return Err(Error::InvalidParams(format!(
                "w_max must be in 1..={k3}, got {}",
                self.w_max
            )));
        }
        if let Some(l) = self.y4_level {
            if l > 1 {
                return Err(Error::InvalidParams(format!("y4 responder level {l}")));
            }
        }
        Ok(())
    }

    /// Responder status of the components other than y1 (the augmented
    /// binary method's success indicator is the negation of this).
    pub fn responds_except_y1(&self, rec: &PatientRecord) -> bool {
        rec.y2 <= self.theta2 && rec.y3 <= self.w_max && self.y4_level.is_none_or(|l| rec.y4 == l)
    }

    /// Responder status of the components other than y2.
    pub fn responds_except_y2(&self, rec: &PatientRecord) -> bool {
        rec.y1 <= self.theta1 && rec.y3 <= self.w_max && self.y4_level.is_none_or(|l| rec.y4 == l)
    }
}

/// Overall composite response of one patient: 1 iff every component meets
/// its threshold.
pub fn observed_response(rec: &PatientRecord, rule: &ResponderRule) -> u8 {
    u8::from(rec.y1 <= rule.theta1 && rule.responds_except_y1(rec))
}

/// The six latent correlations, in (1,2), (1,3), (1,4), (2,3), (2,4), (3,4)
/// order.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Correlations {
    pub r12: f64,
    pub r13: f64,
    pub r14: f64,
    pub r23: f64,
    pub r24: f64,
    pub r34: f64,
}

impl Correlations {
    pub fn to_array(self) -> [f64; 6] {
        [self.r12, self.r13, self.r14, self.r23, self.r24, self.r34]
    }

    pub fn from_array(r: [f64; 6]) -> Self {
        Self {
            r12: r[0],
            r13: r[1],
            r14: r[2],
            r23: r[3],
            r24: r[4],
            r34: r[5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentParams {
    pub alpha0: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub gamma1: f64,
    pub psi0: f64,
    pub psi1: f64,
    /// Ordinal cut-points, strictly increasing, `k3 - 1` of them.
    pub tau3: Vec<f64>,
    pub sigma1: f64,
    pub sigma2: f64,
    pub rho: Correlations,
}

impl LatentParams {
    /// Generating values of the baseline simulation scenario.
    pub fn baseline() -> Self {
        Self {
            alpha0: -4.9,
            alpha1: -0.28,
            alpha2: -0.5,
            beta0: -1.2,
            beta1: -0.35,
            beta2: -0.5,
            gamma1: -0.24,
            psi0: -0.2,
            psi1: -0.18,
            tau3: vec![-1.0, -0.1, 0.45, 1.3],
            sigma1: 1.0,
            sigma2: 1.0,
            rho: Correlations {
                r12: 0.5,
                r13: 0.35,
                r14: 0.25,
                r23: 0.4,
                r24: 0.35,
                r34: 0.3,
            },
        }
    }

    pub fn k3(&self) -> u8 {
        (self.tau3.len() + 1) as u8
    }

    /// Componentwise invariants; positive definiteness of the implied
    /// covariance is checked by [`LatentParams::sigma_matrix`].
    pub fn validate(&self) -> Result<()> {
        let coefs = [
            self.alpha0,
            self.alpha1,
            self.alpha2,
            self.beta0,
            self.beta1,
            self.beta2,
            self.gamma1,
            self.psi0,
            self.psi1,
        ];
        if coefs.iter().chain(self.tau3.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams(
                "non-finite coefficient or cut-point".into(),
            ));
        }
        if self.tau3.is_empty() {
            return Err(Error::InvalidParams("need at least one cut-point".into()));
        }
        if self.tau3.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParams(
                "cut-points must be strictly increasing".into(),
            ));
        }
        if !(self.sigma1 > 0.0 && self.sigma1.is_finite())
            || !(self.sigma2 > 0.0 && self.sigma2.is_finite())
        {
            return Err(Error::InvalidParams(
                "standard deviations must be positive".into(),
            ));
        }
        for r in self.rho.to_array() {
            if !(r > -1.0 && r < 1.0) {
                return Err(Error::InvalidCorrelation(r));
            }
        }
        Ok(())
    }

    /// Linear predictors (mu1, mu2, mu3, mu4) for one covariate pattern.
    #[inline]
    pub fn means(&self, treat: u8, y10: f64, y20: f64) -> [f64; 4] {
        let t = f64::from(treat);
        [
            self.alpha0 + self.alpha1 * t + self.alpha2 * y10,
            self.beta0 + self.beta1 * t + self.beta2 * y20,
            self.gamma1 * t,
            self.psi0 + self.psi1 * t,
        ]
    }

    /// Latent boundary below ordinal level `w + 1`: `-inf` for 0, `+inf`
    /// for `k3`.
    #[inline]
    pub fn cut(&self, w: usize) -> f64 {
        if w == 0 {
            f64::NEG_INFINITY
        } else if w > self.tau3.len() {
            f64::INFINITY
        } else {
            self.tau3[w - 1]
        }
    }

    pub fn correlation_matrix(&self) -> Matrix4<f64> {
        let r = &self.rho;
        Matrix4::new(
            1.0, r.r12, r.r13, r.r14, //
            r.r12, 1.0, r.r23, r.r24, //
            r.r13, r.r23, 1.0, r.r34, //
            r.r14, r.r24, r.r34, 1.0,
        )
    }

    /// Error covariance with unit latent variances. Fails with
    /// [`Error::NotPositiveDefinite`] when the correlations are jointly
    /// inconsistent.
    pub fn sigma_matrix(&self) -> Result<Matrix4<f64>> {
        let s = self.sigma_matrix_unchecked();
        let dm = DMatrix::from_iterator(4, 4, s.iter().copied());
        linalg::cholesky(&dm)?;
        Ok(s)
    }

    pub fn sigma_matrix_unchecked(&self) -> Matrix4<f64> {
        let (s1, s2) = (self.sigma1, self.sigma2);
        let r = &self.rho;
        Matrix4::new(
            s1 * s1,
            r.r12 * s1 * s2,
            r.r13 * s1,
            r.r14 * s1,
            r.r12 * s1 * s2,
            s2 * s2,
            r.r23 * s2,
            r.r24 * s2,
            r.r13 * s1,
            r.r23 * s2,
            1.0,
            r.r34,
            r.r14 * s1,
            r.r24 * s2,
            r.r34,
            1.0,
        )
    }

    pub fn to_unconstrained(&self) -> Result<UnconstrainedParams> {
        self.validate()?;
        let mut v = Vec::with_capacity(UnconstrainedParams::len_for(self.k3()));
        v.extend_from_slice(&[
            self.alpha0,
            self.alpha1,
            self.alpha2,
            self.beta0,
            self.beta1,
            self.beta2,
            self.gamma1,
            self.psi0,
            self.psi1,
        ]);
        v.push(self.tau3[0]);
        v.extend(self.tau3.windows(2).map(|w| (w[1] - w[0]).ln()));
        v.push(self.sigma1.ln());
        v.push(self.sigma2.ln());
        v.extend(self.rho.to_array().iter().map(|&r| rho_to_delta(r)));
        Ok(UnconstrainedParams(v))
    }

    pub fn from_unconstrained(u: &UnconstrainedParams) -> Self {
        let v = &u.0;
        let n_tau = v.len() - 17;
        let mut tau3 = Vec::with_capacity(n_tau);
        let mut acc = v[9];
        tau3.push(acc);
        for &d in &v[10..9 + n_tau] {
            // an increment below the spacing of acc would tie two cut-points
            acc = (acc + d.exp()).max(acc.next_up());
            tau3.push(acc);
        }
        let o = 9 + n_tau;
        let rho: [f64; 6] = std::array::from_fn(|j| delta_to_rho(v[o + 2 + j]));
        Self {
            alpha0: v[0],
            alpha1: v[1],
            alpha2: v[2],
            beta0: v[3],
            beta1: v[4],
            beta2: v[5],
            gamma1: v[6],
            psi0: v[7],
            psi1: v[8],
            tau3,
            sigma1: v[o].exp(),
            sigma2: v[o + 1].exp(),
            rho: Correlations::from_array(rho),
        }
    }
}

/// rho = 2 expit(delta) - 1
#[inline]
pub fn delta_to_rho(delta: f64) -> f64 {
    // tanh saturates to exactly +-1 beyond |delta/2| ~ 19
    (0.5 * delta.clamp(-36.0, 36.0)).tanh()
}

#[inline]
pub fn rho_to_delta(rho: f64) -> f64 {
    ((1.0 + rho) / (1.0 - rho)).ln()
}

/// Unconstrained optimization vector. Layout: the nine mean coefficients
/// (alpha0..2, beta0..2, gamma1, psi0, psi1), the first cut-point, log
/// increments of the remaining cut-points, log sigma1, log sigma2, and the
/// six correlation logits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnconstrainedParams(pub Vec<f64>);

impl UnconstrainedParams {
    pub fn len_for(k3: u8) -> usize {
        16 + k3 as usize
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Parameter labels in layout order.
    pub fn labels(k3: u8) -> Vec<String> {
        let mut names: Vec<String> = [
            "alpha0", "alpha1", "alpha2", "beta0", "beta1", "beta2", "gamma1", "psi0", "psi1",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        names.push("tau1".into());
        for j in 2..k3 {
            names.push(format!("log_dtau{j}"));
        }
        names.extend(
            [
                "log_sigma1",
                "log_sigma2",
                "z_rho12",
                "z_rho13",
                "z_rho14",
                "z_rho23",
                "z_rho24",
                "z_rho34",
            ]
            .iter()
            .map(|s| s.to_string()),
        );
        names
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub params_hat: LatentParams,
    pub unconstrained_hat: UnconstrainedParams,
    /// Inverse observed information in unconstrained coordinates.
    pub cov_unconstrained: DMatrix<f64>,
    pub loglik: f64,
    pub converged: bool,
    pub n_iter: usize,
    pub hessian_repaired: bool,
    /// Some cell probability hit the underflow floor at the optimum.
    pub floor_hit: bool,
    pub n_used: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EffectScale {
    LogOddsRatio,
    RiskDifference,
    RiskRatio,
}

impl EffectScale {
    pub fn name(self) -> &'static str {
        match self {
            EffectScale::LogOddsRatio => "log_or",
            EffectScale::RiskDifference => "risk_difference",
            EffectScale::RiskRatio => "risk_ratio",
        }
    }
}

/// Treatment effect with Wald uncertainty. On the risk-ratio scale the
/// interval is formed on the log scale and exponentiated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectEstimate {
    pub scale: EffectScale,
    pub estimate: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub p_value: f64,
    pub p_treat: f64,
    pub p_control: f64,
    pub converged: bool,
}

impl EffectEstimate {
    /// Normal-theory interval and two-sided p-value against `null`.
    pub fn wald(
        scale: EffectScale,
        estimate: f64,
        se: f64,
        p_treat: f64,
        p_control: f64,
        converged: bool,
    ) -> Self {
        use crate::numerics::normal::norm_cdf;
        let z = Z_975;
        let (ci_low, ci_high) = (estimate - z * se, estimate + z * se);
        let p_value = if se > 0.0 {
            (2.0 * norm_cdf(-(estimate / se).abs())).min(1.0)
        } else if estimate == 0.0 {
            1.0
        } else {
            0.0
        };
        Self {
            scale,
            estimate,
            se,
            ci_low,
            ci_high,
            p_value,
            p_treat,
            p_control,
            converged,
        }
    }

    pub fn covers(&self, value: f64) -> bool {
        self.ci_low <= value && value <= self.ci_high
    }
}

/// 97.5th percentile of the standard normal.
pub const Z_975: f64 = 1.959963984540054;

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(y1: f64, y2: f64, y3: u8, y4: u8) -> PatientRecord {
        PatientRecord {
            id: "p".into(),
            treat: 0,
            y10: 0.0,
            y20: 0.0,
            y1,
            y2,
            y3,
            y4,
        }
    }

    #[test]
    fn responder_examples() {
        let rule = ResponderRule::default();
        assert_eq!(observed_response(&rec(-10.0, -1.0, 1, 0), &rule), 1);
        assert_eq!(observed_response(&rec(-10.0, -1.0, 1, 1), &rule), 0);
        assert_eq!(observed_response(&rec(-3.9, -1.0, 1, 0), &rule), 0);
        assert_eq!(observed_response(&rec(-4.0, -0.6, 3, 0), &rule), 1);
        assert_eq!(observed_response(&rec(-4.0, -0.6, 4, 0), &rule), 0);
        let any = ResponderRule {
            y4_level: None,
            ..rule
        };
        assert_eq!(observed_response(&rec(-10.0, -1.0, 1, 1), &any), 1);
    }

    #[test]
    fn record_validation() {
        assert!(rec(0.0, 0.0, 6, 0).validate(5).is_err());
        assert!(rec(0.0, 0.0, 0, 0).validate(5).is_err());
        assert!(rec(0.0, 0.0, 2, 2).validate(5).is_err());
        assert!(rec(f64::NAN, 0.0, 2, 0).validate(5).is_err());
        assert!(rec(0.0, 0.0, 5, 1).validate(5).is_ok());
        assert!(Dataset::new(vec![], 5).is_err());
    }

    #[test]
    fn transform_examples() {
        let mut p = LatentParams::baseline();
        p.sigma1 = 1.0;
        let u = p.to_unconstrained().unwrap();
        assert_eq!(u.len(), 21);
        assert_eq!(u.0[13], 0.0);
        p.rho.r12 = 0.0;
        let u = p.to_unconstrained().unwrap();
        assert_eq!(u.0[15], 0.0);
        assert_eq!(LatentParams::from_unconstrained(&u).rho.r12, 0.0);

        let base = LatentParams::baseline();
        let back = LatentParams::from_unconstrained(&base.to_unconstrained().unwrap());
        for (a, b) in back.tau3.iter().zip(&[-1.0, -0.1, 0.45, 1.3]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((back.sigma1 - 1.0).abs() < 1e-12 && (back.sigma2 - 1.0).abs() < 1e-12);
        assert!((back.rho.r12 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_increasing_cutpoints() {
        let mut p = LatentParams::baseline();
        p.tau3[2] = p.tau3[1];
        assert!(p.to_unconstrained().is_err());
    }

    #[test]
    fn sigma_matrix_examples() {
        let mut p = LatentParams::baseline();
        p.rho = Correlations::default();
        assert_eq!(p.sigma_matrix().unwrap(), Matrix4::identity());

        let s = LatentParams::baseline().sigma_matrix().unwrap();
        assert_eq!(s[(0, 1)], 0.5);
        assert_eq!(s[(2, 3)], 0.3);
        assert_eq!(s, s.transpose());

        let mut bad = LatentParams::baseline();
        bad.rho = Correlations {
            r12: 0.99,
            r13: 0.99,
            r23: -0.99,
            ..Default::default()
        };
        // Eigenvalue oracle: the leading 3x3 block has a negative eigenvalue.
        let eig = bad.sigma_matrix_unchecked().symmetric_eigen();
        assert!(eig.eigenvalues.min() < 0.0);
        assert_eq!(bad.sigma_matrix(), Err(Error::NotPositiveDefinite));
    }

    fn arb_params() -> impl Strategy<Value = LatentParams> {
        (
            prop::array::uniform9(-3.0..3.0f64),
            -2.0..2.0f64,
            prop::array::uniform3(0.05..1.5f64),
            prop::array::uniform2(0.2..3.0f64),
            prop::array::uniform6(-0.95..0.95f64),
        )
            .prop_map(|(c, t0, inc, s, r)| {
                let mut tau = vec![t0];
                for d in inc {
                    tau.push(tau.last().unwrap() + d);
                }
                LatentParams {
                    alpha0: c[0],
                    alpha1: c[1],
                    alpha2: c[2],
                    beta0: c[3],
                    beta1: c[4],
                    beta2: c[5],
                    gamma1: c[6],
                    psi0: c[7],
                    psi1: c[8],
                    tau3: tau,
                    sigma1: s[0],
                    sigma2: s[1],
                    rho: Correlations::from_array(r),
                }
            })
    }

    proptest! {
        #[test]
        fn transform_round_trip(p in arb_params()) {
            let back = LatentParams::from_unconstrained(&p.to_unconstrained().unwrap());
            let a = back.to_unconstrained().unwrap();
            let b = p.to_unconstrained().unwrap();
            for (x, y) in a.0.iter().zip(&b.0) {
                prop_assert!((x - y).abs() < 1e-12);
            }
            for (x, y) in back.tau3.iter().zip(&p.tau3) {
                prop_assert!((x - y).abs() < 1e-12);
            }
            prop_assert!((back.sigma1 - p.sigma1).abs() < 1e-12);
            for (x, y) in back.rho.to_array().iter().zip(p.rho.to_array()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn any_finite_vector_is_valid(v in prop::collection::vec(-30.0..30.0f64, 21)) {
            let p = LatentParams::from_unconstrained(&UnconstrainedParams(v));
            prop_assert!(p.validate().is_ok());
        }

        #[test]
        fn response_monotone_in_continuous(
            y1 in -8.0..0.0f64, y2 in -3.0..1.0f64, y3 in 1u8..=5, y4 in 0u8..=1,
            d1 in 0.0..3.0f64, d2 in 0.0..3.0f64,
        ) {
            let rule = ResponderRule::default();
            let before = observed_response(&rec(y1, y2, y3, y4), &rule);
            let after = observed_response(&rec(y1 - d1, y2 - d2, y3, y4), &rule);
            prop_assert!(after >= before);
        }
    }
}
