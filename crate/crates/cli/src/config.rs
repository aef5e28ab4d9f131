//! Flat `key = value` configuration files.
//!
//! One setting per line. `#` starts a comment, blank lines are skipped and
//! surrounding whitespace is ignored. Keys are case-sensitive; unknown or
//! repeated keys are errors. List values are comma separated.
//!
//! | key | default | meaning |
//! |---|---|---|
//! | `theta1`, `theta2` | -4, -0.6 | continuous responder thresholds (respond at or below) |
//! | `w_max` | 3 | worst ordinal level that still responds |
//! | `y4_level` | 0 | responding binary level, or `none` |
//! | `k3` | 5 | ordinal level count of the data |
//! | `methods` | `latent,augbin,binary` | analyses to run |
//! | `retained` | `y1` | continuous outcome kept by the augmented binary method |
//! | `seed` | 1 | base seed |
//! | `n_sim` | 5000 | simulation replicates |
//! | `n_boot` | 1000 | bootstrap resamples |
//! | `phi4_method` | `quadrature` | `quadrature` or `lattice` |
//! | `phi4_panels` | 1 | Gauss-Kronrod panels per dimension |
//! | `phi4_max_points` | 20000 | lattice points per shift, upper limit |
//! | `phi4_tol` | 1e-7 | lattice absolute error target |
//! | `max_iter` | 500 | optimizer iterations |
//! | `grad_tol` | 1e-6 | optimizer gradient tolerance |
//! | `scenario` | `baseline` | simulation preset |
//! | `truth_draws` | 10000000 | Monte Carlo draws for the true effect |
//!
//! A simulation scenario can be modified further with `n_total`, the
//! structural parameters `alpha0 alpha1 alpha2 beta0 beta1 beta2 gamma1
//! psi0 psi1 sigma1 sigma2 r12 r13 r14 r23 r24 r34`, `tau3` (list), `skew`
//! (4 values), `baseline_mean`, `baseline_sd` (2 values each) and
//! `baseline_corr`. Responder keys given explicitly override the preset's
//! rule.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

use lvcomp::comparators::Retained;
use lvcomp::inference::EffectOptions;
use lvcomp::latent::FitOptions;
use lvcomp::model::{ResponderRule, DEFAULT_K3};
use lvcomp::numerics::{MinimizeOptions, Phi4Options};
use lvcomp::simulation::truth::TRUTH_DRAWS;
use lvcomp::simulation::{preset, AnalysisOptions, Method, Scenario};

use crate::error::CliError;

const SCENARIO_SCALARS: &[&str] = &[
    "alpha0", "alpha1", "alpha2", "beta0", "beta1", "beta2", "gamma1", "psi0", "psi1", "sigma1",
    "sigma2", "r12", "r13", "r14", "r23", "r24", "r34", "baseline_corr",
];

const KEYS: &[&str] = &[
    "theta1",
    "theta2",
    "w_max",
    "y4_level",
    "k3",
    "methods",
    "retained",
    "seed",
    "n_sim",
    "n_boot",
    "phi4_method",
    "phi4_panels",
    "phi4_max_points",
    "phi4_tol",
    "max_iter",
    "grad_tol",
    "scenario",
    "truth_draws",
    "n_total",
    "tau3",
    "skew",
    "baseline_mean",
    "baseline_sd",
];

#[derive(Debug, Clone, PartialEq)]
pub enum Phi4Choice {
    Quadrature { panels: usize },
    Lattice { max_points: usize, tol: f64 },
}

/// Resolved settings. Responder keys are kept separately so that a
/// scenario's own rule survives unless overridden.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub theta1: Option<f64>,
    pub theta2: Option<f64>,
    pub w_max: Option<u8>,
    pub y4_level: Option<Option<u8>>,
    pub k3: u8,
    pub methods: Vec<Method>,
    pub retained: Retained,
    pub seed: u64,
    pub n_sim: usize,
    pub n_boot: usize,
    pub phi4: Phi4Choice,
    pub max_iter: usize,
    pub grad_tol: f64,
    pub scenario: String,
    pub truth_draws: usize,
    /// Scenario modifications in file order: (line, key, value).
    pub overrides: Vec<(usize, String, String)>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            theta1: None,
            theta2: None,
            w_max: None,
            y4_level: None,
            k3: DEFAULT_K3,
            methods: Method::ALL.to_vec(),
            retained: Retained::Y1,
            seed: 1,
            n_sim: 5000,
            n_boot: 1000,
            phi4: Phi4Choice::Quadrature { panels: 1 },
            max_iter: 500,
            grad_tol: 1e-6,
            scenario: "baseline".into(),
            truth_draws: TRUTH_DRAWS,
            overrides: Vec::new(),
        }
    }
}

fn bad(line: usize, key: &str, msg: impl Display) -> CliError {
    CliError::Input(format!("config line {line}: `{key}`: {msg}"))
}

fn parse_num<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T, CliError> {
    v.parse()
        .map_err(|_| bad(line, key, format!("cannot parse `{v}`")))
}

fn parse_list(line: usize, key: &str, v: &str) -> Result<Vec<f64>, CliError> {
    v.split(',')
        .map(|s| parse_num::<f64>(line, key, s.trim()))
        .collect()
}

fn parse_fixed<const N: usize>(line: usize, key: &str, v: &str) -> Result<[f64; N], CliError> {
    let xs = parse_list(line, key, v)?;
    xs.try_into()
        .map_err(|xs: Vec<f64>| bad(line, key, format!("expected {N} values, got {}", xs.len())))
}

pub fn parse_methods(v: &str) -> Result<Vec<Method>, CliError> {
    let mut out = Vec::new();
    for s in v.split(',') {
        let m: Method = s
            .parse()
            .map_err(|e: lvcomp::error::Error| CliError::Input(e.to_string()))?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    Ok(out)
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut c = Config::default();
        let mut seen: BTreeMap<String, usize> = BTreeMap::new();
        let mut phi4_method = "quadrature".to_string();
        let mut panels = 1usize;
        let mut max_points = 20_000usize;
        let mut tol = 1e-7;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let Some((key, value)) = body.split_once('=') else {
                return Err(CliError::Input(format!(
                    "config line {line}: expected `key = value`"
                )));
            };
            let (key, v) = (key.trim(), value.trim());
            if !KEYS.contains(&key) && !SCENARIO_SCALARS.contains(&key) {
                return Err(bad(line, key, "unknown key"));
            }
            if let Some(first) = seen.insert(key.to_string(), line) {
                return Err(bad(line, key, format!("already set on line {first}")));
            }
            match key {
                "theta1" => c.theta1 = Some(parse_num(line, key, v)?),
                "theta2" => c.theta2 = Some(parse_num(line, key, v)?),
                "w_max" => c.w_max = Some(parse_num(line, key, v)?),
                "y4_level" => {
                    c.y4_level = Some(match v {
                        "none" => None,
                        "0" => Some(0),
                        "1" => Some(1),
                        _ => return Err(bad(line, key, "expected 0, 1 or none")),
                    })
                }
                "k3" => c.k3 = parse_num(line, key, v)?,
                "methods" => c.methods = parse_methods(v).map_err(|e| bad(line, key, e))?,
                "retained" => {
                    c.retained = match v {
                        "y1" => Retained::Y1,
                        "y2" => Retained::Y2,
                        _ => return Err(bad(line, key, "expected y1 or y2")),
                    }
                }
                "seed" => c.seed = parse_num(line, key, v)?,
                "n_sim" => c.n_sim = parse_num(line, key, v)?,
                "n_boot" => c.n_boot = parse_num(line, key, v)?,
                "phi4_method" => {
                    if v != "quadrature" && v != "lattice" {
                        return Err(bad(line, key, "expected quadrature or lattice"));
                    }
                    phi4_method = v.to_string();
                }
                "phi4_panels" => panels = parse_num(line, key, v)?,
                "phi4_max_points" => max_points = parse_num(line, key, v)?,
                "phi4_tol" => tol = parse_num(line, key, v)?,
                "max_iter" => c.max_iter = parse_num(line, key, v)?,
                "grad_tol" => c.grad_tol = parse_num(line, key, v)?,
                "scenario" => c.scenario = v.to_string(),
                "truth_draws" => c.truth_draws = parse_num(line, key, v)?,
                _ => c.overrides.push((line, key.to_string(), v.to_string())),
            }
        }
        c.phi4 = if phi4_method == "lattice" {
            Phi4Choice::Lattice { max_points, tol }
        } else {
            Phi4Choice::Quadrature { panels }
        };
        c.check()?;
        Ok(c)
    }

    fn check(&self) -> Result<(), CliError> {
        let fail = |m: &str| Err(CliError::Input(format!("config: {m}")));
        if self.k3 < 2 {
            return fail("k3 must be at least 2");
        }
        if self.truth_draws == 0 {
            return fail("truth_draws must be positive");
        }
        if self.methods.is_empty() {
            return fail("no methods selected");
        }
        match self.phi4 {
            Phi4Choice::Quadrature { panels } if panels == 0 => fail("phi4_panels must be positive"),
            Phi4Choice::Lattice { max_points, tol } if max_points == 0 || !(tol > 0.0) => {
                fail("phi4_max_points and phi4_tol must be positive")
            }
            _ if self.max_iter == 0 || !(self.grad_tol > 0.0) => {
                fail("max_iter and grad_tol must be positive")
            }
            _ => Ok(()),
        }
    }

    /// Responder rule for analyses of observed data.
    pub fn rule(&self) -> Result<ResponderRule, CliError> {
        let r = self.apply_rule(ResponderRule::default());
        r.validate(self.k3).map_err(CliError::from)?;
        Ok(r)
    }

    fn apply_rule(&self, mut r: ResponderRule) -> ResponderRule {
        if let Some(v) = self.theta1 {
            r.theta1 = v;
        }
        if let Some(v) = self.theta2 {
            r.theta2 = v;
        }
        if let Some(v) = self.w_max {
            r.w_max = v;
        }
        if let Some(v) = self.y4_level {
            r.y4_level = v;
        }
        r
    }

    pub fn phi4_options(&self) -> Phi4Options {
        match self.phi4 {
            Phi4Choice::Quadrature { panels } => Phi4Options::quadrature(panels),
            Phi4Choice::Lattice { max_points, tol } => Phi4Options {
                max_points,
                abs_tol: tol,
                ..Phi4Options::default()
            },
        }
    }

    pub fn analysis_options(&self) -> AnalysisOptions {
        AnalysisOptions {
            methods: self.methods.clone(),
            fit: FitOptions {
                minimize: MinimizeOptions {
                    max_iter: self.max_iter,
                    grad_tol: self.grad_tol,
                    ..MinimizeOptions::default()
                },
                ..FitOptions::default()
            },
            effect: EffectOptions {
                phi4: self.phi4_options(),
                ..EffectOptions::default()
            },
            retained: self.retained,
        }
    }

    /// The configured preset with all modifications applied.
    pub fn scenario(&self) -> Result<Scenario, CliError> {
        let mut sc = preset(&self.scenario).map_err(CliError::from)?;
        for (line, key, v) in &self.overrides {
            let (line, key) = (*line, key.as_str());
            let p = &mut sc.params;
            match key {
                "n_total" => sc.n_total = parse_num(line, key, v)?,
                "tau3" => p.tau3 = parse_list(line, key, v)?,
                "skew" => sc.skew = parse_fixed::<4>(line, key, v)?,
                "baseline_mean" => sc.baseline.mean = parse_fixed::<2>(line, key, v)?,
                "baseline_sd" => sc.baseline.sd = parse_fixed::<2>(line, key, v)?,
                _ => {
                    let x: f64 = parse_num(line, key, v)?;
                    let slot = match key {
                        "alpha0" => &mut p.alpha0,
                        "alpha1" => &mut p.alpha1,
                        "alpha2" => &mut p.alpha2,
                        "beta0" => &mut p.beta0,
                        "beta1" => &mut p.beta1,
                        "beta2" => &mut p.beta2,
                        "gamma1" => &mut p.gamma1,
                        "psi0" => &mut p.psi0,
                        "psi1" => &mut p.psi1,
                        "sigma1" => &mut p.sigma1,
                        "sigma2" => &mut p.sigma2,
                        "r12" => &mut p.rho.r12,
                        "r13" => &mut p.rho.r13,
                        "r14" => &mut p.rho.r14,
                        "r23" => &mut p.rho.r23,
                        "r24" => &mut p.rho.r24,
                        "r34" => &mut p.rho.r34,
                        "baseline_corr" => &mut sc.baseline.corr,
                        _ => unreachable!("key checked while parsing"),
                    };
                    *slot = x;
                }
            }
        }
        sc.rule = self.apply_rule(sc.rule);
        sc.validate().map_err(CliError::from)?;
        Ok(sc)
    }

    /// Every resolved setting as `key = value` text, in key order. Used for
    /// provenance hashing and echoed in JSON summaries.
    pub fn canonical(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let rule = self.apply_rule(ResponderRule::default());
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("theta1", rule.theta1.to_string());
        put("theta2", rule.theta2.to_string());
        put("w_max", rule.w_max.to_string());
        put(
            "y4_level",
            rule.y4_level.map_or("none".into(), |l| l.to_string()),
        );
        put("k3", self.k3.to_string());
        put(
            "methods",
            self.methods
                .iter()
                .map(|m| m.name())
                .collect::<Vec<_>>()
                .join(","),
        );
        put(
            "retained",
            match self.retained {
                Retained::Y1 => "y1".into(),
                Retained::Y2 => "y2".into(),
            },
        );
        put("seed", self.seed.to_string());
        put("n_sim", self.n_sim.to_string());
        put("n_boot", self.n_boot.to_string());
        match self.phi4 {
            Phi4Choice::Quadrature { panels } => {
                put("phi4_method", "quadrature".into());
                put("phi4_panels", panels.to_string());
            }
            Phi4Choice::Lattice { max_points, tol } => {
                put("phi4_method", "lattice".into());
                put("phi4_max_points", max_points.to_string());
                put("phi4_tol", tol.to_string());
            }
        }
        put("max_iter", self.max_iter.to_string());
        put("grad_tol", self.grad_tol.to_string());
        put("scenario", self.scenario.clone());
        put("truth_draws", self.truth_draws.to_string());
        for (_, k, v) in &self.overrides {
            put(k, v.clone());
        }
        m
    }
}
