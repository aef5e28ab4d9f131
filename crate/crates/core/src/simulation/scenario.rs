//! Data-generating scenarios and the named preset catalog.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{LatentParams, ResponderRule};

/// Bivariate normal distribution of the baseline covariates (y10, y20).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineDist {
    pub mean: [f64; 2],
    pub sd: [f64; 2],
    pub corr: f64,
}

impl Default for BaselineDist {
    fn default() -> Self {
        Self {
            mean: [0.0, 0.0],
            sd: [1.0, 1.0],
            corr: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    /// Total sample size, split evenly between the arms.
    pub n_total: usize,
    pub params: LatentParams,
    pub rule: ResponderRule,
    pub baseline: BaselineDist,
    /// Skew-normal shape vector; all zeros gives normal errors.
    pub skew: [f64; 4],
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.params.sigma_matrix()?;
        self.rule.validate(self.params.k3())?;
        if self.n_total < 2 || self.n_total % 2 != 0 {
            return Err(Error::InvalidParams(format!(
                "total sample size must be even and positive, got {}",
                self.n_total
            )));
        }
        if self.skew.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidParams("skew vector must be finite".into()));
        }
        let b = &self.baseline;
        if b.mean.iter().chain(&b.sd).any(|v| !v.is_finite())
            || b.sd.iter().any(|&s| s < 0.0)
            || !(b.corr > -1.0 && b.corr < 1.0)
        {
            return Err(Error::InvalidParams(
                "invalid baseline covariate distribution".into(),
            ));
        }
        Ok(())
    }

    pub fn is_normal(&self) -> bool {
        self.skew.iter().all(|&a| a == 0.0)
    }

    pub fn with_n(self, n_total: usize) -> Self {
        Self { n_total, ..self }
    }

    fn derive(&self, name: &str) -> Self {
        Self {
            name: name.into(),
            ..self.clone()
        }
    }
}

/// The generating model of the baseline scenario with N = 300.
pub fn baseline() -> Scenario {
    Scenario {
        name: "baseline".into(),
        n_total: 300,
        params: LatentParams::baseline(),
        rule: ResponderRule::default(),
        baseline: BaselineDist::default(),
        skew: [0.0; 4],
    }
}

fn null_params() -> LatentParams {
    LatentParams {
        alpha1: 0.0,
        beta1: 0.0,
        gamma1: 0.0,
        psi1: 0.0,
        ..LatentParams::baseline()
    }
}

/// Treatment coefficients (alpha1, beta1, gamma1, psi1) of the treatment
/// effect cases; intercepts as in the baseline.
const TREAT_CASES: [[f64; 4]; 5] = [
    [-0.09, -0.11, -0.145, -0.07],
    [-0.20, -0.25, -0.2, -0.12],
    [-0.30, -0.50, -0.3, -0.22],
    [-0.32, -0.65, -0.39, -0.27],
    [-0.33, -0.72, -0.45, -0.33],
];

/// Odds ratios quoted for the treatment effect cases.
pub const TREAT_CASE_ODDS_RATIOS: [f64; 5] = [1.217, 1.426, 1.794, 2.007, 2.198];

const PRESETS: &[&str] = &[
    "baseline",
    "null",
    "theta1=-2",
    "theta1=-3",
    "theta1=-4",
    "theta1=-5",
    "theta1=-6",
    "y1y4",
    "y4",
    "y1y2y3",
    "treat1",
    "treat2",
    "treat3",
    "treat4",
    "treat5",
    "skew1",
    "skew2",
    "skew3",
    "skew4",
];

pub fn preset_names() -> &'static [&'static str] {
    PRESETS
}

/// A named preset scenario.
///
/// The ordinal threshold of 2 in the component-driver rows lies above every
/// cut-point, so it maps to `w_max = k3`; a binary threshold of 2 makes the
/// binary component non-binding.
pub fn preset(name: &str) -> Result<Scenario> {
    let base = baseline();
    let k3 = base.params.k3();
    let sc = match name {
        "baseline" => base,
        "null" => Scenario {
            params: null_params(),
            ..base.derive("null")
        },
        "theta1=-2" | "theta1=-3" | "theta1=-4" | "theta1=-5" | "theta1=-6" => {
            let theta1: f64 = name["theta1=".len()..]
                .parse()
                .map_err(|_| Error::UnknownScenario(name.into()))?;
            let mut sc = base.derive(name);
            sc.rule.theta1 = theta1;
            sc
        }
        "y1y4" => {
            let mut sc = base.derive(name);
            sc.rule.theta1 = -5.0;
            sc.rule.theta2 = 2.0;
            sc.rule.w_max = k3;
            sc
        }
        "y4" => {
            let mut sc = base.derive(name);
            sc.rule.theta1 = -2.0;
            sc.rule.theta2 = 2.0;
            sc.rule.w_max = k3;
            sc
        }
        "y1y2y3" => {
            let mut sc = base.derive(name);
            sc.rule.y4_level = None;
            sc
        }
        "treat1" | "treat2" | "treat3" | "treat4" | "treat5" => {
            let i: usize = name[5..].parse().expect("digit suffix");
            let [a1, b1, g1, p1] = TREAT_CASES[i - 1];
            let mut sc = base.derive(name);
            sc.params.alpha1 = a1;
            sc.params.beta1 = b1;
            sc.params.gamma1 = g1;
            sc.params.psi1 = p1;
            sc
        }
        "skew1" => Scenario {
            skew: [0.1; 4],
            ..base.derive(name)
        },
        "skew2" => Scenario {
            skew: [0.0, 0.0, 0.1, 0.1],
            ..base.derive(name)
        },
        "skew3" => Scenario {
            skew: [0.0, 0.0, 0.05, 0.05],
            ..base.derive(name)
        },
        "skew4" => Scenario {
            params: null_params(),
            skew: [0.0, 0.0, 0.05, 0.05],
            ..base.derive(name)
        },
        _ => return Err(Error::UnknownScenario(name.into())),
    };
    Ok(sc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_loads_and_validates() {
        for &name in preset_names() {
            let sc = preset(name).unwrap();
            assert_eq!(sc.name, name);
            sc.validate().unwrap();
        }
        assert!(matches!(preset("nope"), Err(Error::UnknownScenario(_))));
    }

    #[test]
    fn baseline_values() {
        let sc = preset("baseline").unwrap();
        let p = &sc.params;
        assert_eq!((p.alpha0, p.beta0, p.psi0), (-4.9, -1.2, -0.2));
        assert_eq!((p.alpha1, p.beta1, p.gamma1, p.psi1), (-0.28, -0.35, -0.24, -0.18));
        assert_eq!((p.alpha2, p.beta2), (-0.5, -0.5));
        assert_eq!(p.tau3, vec![-1.0, -0.1, 0.45, 1.3]);
        let r = p.rho;
        assert_eq!([r.r12, r.r13, r.r14, r.r23, r.r24, r.r34], [0.5, 0.35, 0.25, 0.4, 0.35, 0.3]);
        assert_eq!(sc.rule, ResponderRule::default());
        assert_eq!(sc.rule.w_max, 3);
        assert_eq!(p.cut(3), 0.45);
        assert_eq!(sc.n_total, 300);
    }

    #[test]
    fn driver_and_treatment_rows() {
        let sc = preset("y4").unwrap();
        assert_eq!((sc.rule.theta1, sc.rule.theta2, sc.rule.w_max), (-2.0, 2.0, 5));
        assert_eq!(preset("y1y2y3").unwrap().rule.y4_level, None);
        let t = preset("treat3").unwrap().params;
        assert_eq!((t.alpha1, t.beta1, t.gamma1, t.psi1), (-0.30, -0.50, -0.3, -0.22));
        let s4 = preset("skew4").unwrap();
        assert_eq!(s4.params.alpha1, 0.0);
        assert_eq!(s4.skew, [0.0, 0.0, 0.05, 0.05]);
        assert_eq!(preset("theta1=-6").unwrap().rule.theta1, -6.0);
    }

    #[test]
    fn odd_sample_size_rejected() {
        assert!(baseline().with_n(301).validate().is_err());
    }
}
