//! The four subcommands. Each returns its report together with the failure
//! (if any) that should set the exit status once the report is written.

use std::path::Path;

use serde_json::{json, Value};

use lvcomp::gof::{modified_pearson_residuals, GofReport};
use lvcomp::inference::latent_effects;
use lvcomp::latent::fit;
use lvcomp::model::{Dataset, EffectEstimate, FitResult, ResponderRule};
use lvcomp::simulation::run::analyze_method;
use lvcomp::simulation::summary::MethodSummary;
use lvcomp::simulation::truth::{true_effect, true_effect_mc, TRUTH_SEED};
use lvcomp::simulation::{
    bootstrap_bias_correct, run_scenario, summarize, AnalysisOptions, Method, MethodResult,
};

use crate::config::Config;
use crate::data::{read_dataset, Excluded, Loaded};
use crate::error::CliError;
use crate::output::{sha256_hex, sig6, Provenance, Report, Table};

pub struct Outcome {
    pub report: Report,
    pub failure: Option<CliError>,
}

const ESTIMATE_COLUMNS: [&str; 11] = [
    "method",
    "scale",
    "estimate",
    "se",
    "ci_low",
    "ci_high",
    "p_value",
    "p_treat",
    "p_control",
    "converged",
    "note",
];

fn estimate_row(method: Method, scale: &str, e: &MethodResult) -> Vec<String> {
    vec![
        method.name().into(),
        scale.into(),
        sig6(e.estimate),
        sig6(e.se),
        sig6(e.ci_low),
        sig6(e.ci_high),
        sig6(e.p_value),
        sig6(e.p_treat),
        sig6(e.p_control),
        e.converged.to_string(),
        e.note.clone().unwrap_or_default(),
    ]
}

fn from_effect(e: &EffectEstimate, note: Option<String>) -> MethodResult {
    MethodResult {
        estimate: e.estimate,
        se: e.se,
        ci_low: e.ci_low,
        ci_high: e.ci_high,
        p_value: e.p_value,
        p_treat: e.p_treat,
        p_control: e.p_control,
        converged: e.converged,
        note,
    }
}

fn failed(note: String) -> MethodResult {
    MethodResult {
        estimate: f64::NAN,
        se: f64::NAN,
        ci_low: f64::NAN,
        ci_high: f64::NAN,
        p_value: f64::NAN,
        p_treat: f64::NAN,
        p_control: f64::NAN,
        converged: false,
        note: Some(note),
    }
}

fn excluded_json(ex: &[Excluded]) -> Value {
    ex.iter()
        .map(|e| json!({"line": e.line, "id": e.id, "missing": e.missing}))
        .collect()
}

fn data_provenance(command: &str, seed: Option<u64>, cfg: &Config, bytes: &[u8], loaded: &Loaded) -> Provenance {
    let settings = serde_json::to_string(&cfg.canonical()).expect("string map");
    Provenance {
        command: command.into(),
        seed,
        hash: (
            "input_sha256".into(),
            sha256_hex(&[command.as_bytes(), settings.as_bytes(), bytes]),
        ),
        exclusions: vec![("records".into(), loaded.excluded.len())],
    }
}

fn gof_table(g: &GofReport) -> Table {
    let mut t = Table::new(
        "gof_summary",
        &["n", "mean_statistic", "threshold", "n_exceeding", "exceedance_rate", "repaired"],
    );
    t.push(vec![
        g.statistics.len().to_string(),
        sig6(g.mean_statistic),
        sig6(g.threshold),
        g.n_exceeding.to_string(),
        sig6(g.exceedance_rate()),
        g.repaired.to_string(),
    ]);
    t
}

fn gof_json(g: &GofReport) -> Value {
    json!({
        "n": g.statistics.len(),
        "mean_statistic": g.mean_statistic,
        "threshold": g.threshold,
        "n_exceeding": g.n_exceeding,
        "exceedance_rate": g.exceedance_rate(),
        "repaired": g.repaired,
    })
}

fn fit_json(f: &FitResult) -> Value {
    json!({
        "params": f.params_hat,
        "loglik": f.loglik,
        "converged": f.converged,
        "n_iter": f.n_iter,
        "hessian_repaired": f.hessian_repaired,
        "n_used": f.n_used,
    })
}

/// Latent fit that must succeed; a non-converged fit is returned together
/// with the failure it implies.
fn required_fit(data: &Dataset, opts: &AnalysisOptions) -> Result<(FitResult, Option<CliError>), CliError> {
    let f = fit(data, &opts.fit)?;
    let failure = (!f.converged)
        .then(|| CliError::Convergence("latent model optimizer did not converge".into()));
    Ok((f, failure))
}

pub fn analyze(data_path: &Path, cfg: &Config) -> Result<Outcome, CliError> {
    let (loaded, bytes) = read_dataset(data_path, cfg.k3)?;
    let data = &loaded.dataset;
    let rule = cfg.rule()?;
    let opts = cfg.analysis_options();

    let mut table = Table::new("estimates", &ESTIMATE_COLUMNS);
    let mut rows_json = Vec::new();
    let mut failure: Option<CliError> = None;
    let mut extra = serde_json::Map::new();
    let mut gof_report = None;
    let mut record = |m: Method, scale: &str, r: &MethodResult, table: &mut Table| {
        table.push(estimate_row(m, scale, r));
        rows_json.push(json!({"method": m.name(), "scale": scale, "result": r}));
    };

    for &m in &opts.methods {
        if m != Method::Latent {
            let r = analyze_method(data, &rule, m, &opts);
            if !r.usable() && failure.is_none() {
                failure = Some(CliError::Convergence(format!(
                    "{m}: {}",
                    r.note.clone().unwrap_or_default()
                )));
            }
            record(m, "log_or", &r, &mut table);
            continue;
        }
        match required_fit(data, &opts) {
            Err(e) => {
                record(m, "log_or", &failed(e.to_string()), &mut table);
                failure.get_or_insert(e);
            }
            Ok((f, fail)) => {
                if let Some(e) = fail {
                    failure.get_or_insert(e);
                }
                let note = f
                    .hessian_repaired
                    .then(|| "latent: Hessian repaired to positive definite".to_string());
                match latent_effects(&f, data, &rule, &opts.effect) {
                    Ok(e) => {
                        record(m, "log_or", &from_effect(&e.log_or, note.clone()), &mut table);
                        record(m, "risk_difference", &from_effect(&e.risk_difference, note.clone()), &mut table);
                        record(m, "risk_ratio", &from_effect(&e.risk_ratio, note), &mut table);
                    }
                    Err(e) => {
                        record(m, "log_or", &failed(e.to_string()), &mut table);
                        failure.get_or_insert(e.into());
                    }
                }
                extra.insert("latent_fit".into(), fit_json(&f));
                match modified_pearson_residuals(&f, data) {
                    Ok(g) => {
                        extra.insert("gof".into(), gof_json(&g));
                        gof_report = Some(g);
                    }
                    Err(e) => {
                        extra.insert("gof".into(), json!({"error": e.to_string()}));
                    }
                }
            }
        }
    }

    let (n0, n1) = data.arm_counts();
    let mut summary = json!({
        "settings": cfg.canonical(),
        "n_used": data.len(),
        "n_control": n0,
        "n_treated": n1,
        "excluded_records": excluded_json(&loaded.excluded),
        "estimates": rows_json,
    });
    summary.as_object_mut().expect("object").extend(extra);
    Ok(Outcome {
        report: Report {
            provenance: data_provenance("analyze", None, cfg, &bytes, &loaded),
            tables: std::iter::once(table)
                .chain(gof_report.as_ref().map(gof_table))
                .collect(),
            summary,
        },
        failure,
    })
}

const SUMMARY_COLUMNS: [&str; 21] = [
    "method",
    "n_used",
    "n_excluded",
    "true_log_or",
    "mean_estimate",
    "bias",
    "bias_mcse",
    "coverage",
    "coverage_mcse",
    "bc_coverage",
    "bc_coverage_mcse",
    "power",
    "power_mcse",
    "mse",
    "mse_mcse",
    "emp_se",
    "emp_se_mcse",
    "mod_se",
    "mod_se_mcse",
    "mean_p_treat",
    "mean_p_control",
];

fn summary_row(s: &MethodSummary, truth: f64) -> Vec<String> {
    let mut row = vec![
        s.method.name().to_string(),
        s.n_used.to_string(),
        s.n_excluded.to_string(),
        sig6(truth),
        sig6(s.mean_estimate),
    ];
    for m in [s.bias, s.coverage, s.bias_corrected_coverage, s.power, s.mse, s.emp_se, s.mod_se] {
        row.push(sig6(m.estimate));
        row.push(sig6(m.mcse));
    }
    row.push(sig6(s.mean_p_treat));
    row.push(sig6(s.mean_p_control));
    row
}

pub fn simulate(cfg: &Config) -> Result<Outcome, CliError> {
    let sc = cfg.scenario()?;
    if cfg.n_sim < 2 {
        return Err(CliError::Input("n_sim must be at least 2".into()));
    }
    let opts = cfg.analysis_options();
    let truth = if cfg.truth_draws == lvcomp::simulation::truth::TRUTH_DRAWS {
        true_effect(&sc)?
    } else {
        true_effect_mc(&sc, cfg.truth_draws, TRUTH_SEED)?
    };
    let reps = run_scenario(&sc, cfg.n_sim, cfg.seed, &opts)?;
    let oc = summarize(&reps, truth.log_or);

    let mut summary_t = Table::new("summary", &SUMMARY_COLUMNS);
    for s in &oc.methods {
        summary_t.push(summary_row(s, truth.log_or));
    }
    let mut prec = Table::new("precision", &["a", "b", "n", "median", "p10", "p90"]);
    for r in &oc.relative_precision {
        prec.push(vec![
            r.a.name().into(),
            r.b.name().into(),
            r.n.to_string(),
            sig6(r.median),
            sig6(r.p10),
            sig6(r.p90),
        ]);
    }
    let mut cols = vec!["replicate"];
    cols.extend(ESTIMATE_COLUMNS.iter().filter(|c| **c != "scale"));
    let mut rep_t = Table::new("replicates", &cols);
    for r in &reps {
        for &m in &opts.methods {
            if let Some(res) = r.get(m) {
                let mut row = estimate_row(m, "log_or", res);
                row.remove(1);
                row.insert(0, r.index.to_string());
                rep_t.push(row);
            }
        }
    }

    let exclusions: Vec<(String, usize)> = opts
        .methods
        .iter()
        .map(|&m| {
            let n = reps
                .iter()
                .filter(|r| r.get(m).is_some_and(|x| !x.usable()))
                .count();
            (m.name().to_string(), n)
        })
        .collect();
    let scenario_json = serde_json::to_string(&sc).expect("serializable scenario");
    let prov = Provenance {
        command: "simulate".into(),
        seed: Some(cfg.seed),
        hash: ("scenario_sha256".into(), sha256_hex(&[scenario_json.as_bytes()])),
        exclusions,
    };
    let summary = json!({
        "settings": cfg.canonical(),
        "scenario": sc,
        "truth": truth,
        "operating_characteristics": oc,
    });
    Ok(Outcome {
        report: Report {
            provenance: prov,
            tables: vec![summary_t, prec, rep_t],
            summary,
        },
        failure: None,
    })
}

pub fn bootstrap(data_path: &Path, cfg: &Config) -> Result<Outcome, CliError> {
    let (loaded, bytes) = read_dataset(data_path, cfg.k3)?;
    let rule: ResponderRule = cfg.rule()?;
    if cfg.n_boot < 2 {
        return Err(CliError::Input("n_boot must be at least 2".into()));
    }
    let opts = cfg.analysis_options();
    let res = bootstrap_bias_correct(&loaded.dataset, &rule, cfg.n_boot, cfg.seed, &opts)?;
    let mut t = Table::new(
        "bootstrap",
        &[
            "method", "original", "bias", "bias_mcse", "corrected", "ci_low", "ci_high", "n_used",
            "n_dropped",
        ],
    );
    for b in &res {
        t.push(vec![
            b.method.name().into(),
            sig6(b.original),
            sig6(b.bias),
            sig6(b.mcse_bias),
            sig6(b.corrected),
            sig6(b.ci_low),
            sig6(b.ci_high),
            b.n_used.to_string(),
            b.n_dropped.to_string(),
        ]);
    }
    let mut prov = data_provenance("bootstrap", Some(cfg.seed), cfg, &bytes, &loaded);
    prov.exclusions
        .extend(res.iter().map(|b| (format!("{}_resamples", b.method.name()), b.n_dropped)));
    let summary = json!({
        "settings": cfg.canonical(),
        "n_used": loaded.dataset.len(),
        "excluded_records": excluded_json(&loaded.excluded),
        "bootstrap": res,
    });
    Ok(Outcome {
        report: Report {
            provenance: prov,
            tables: vec![t],
            summary,
        },
        failure: None,
    })
}

pub fn gof(data_path: &Path, cfg: &Config) -> Result<Outcome, CliError> {
    let (loaded, bytes) = read_dataset(data_path, cfg.k3)?;
    let data = &loaded.dataset;
    let opts = cfg.analysis_options();
    let (f, failure) = required_fit(data, &opts)?;
    let g = modified_pearson_residuals(&f, data)?;
    let mut t = Table::new(
        "residuals",
        &["id", "treat", "r1", "r2", "r3", "r4", "statistic", "exceeds"],
    );
    for (i, rec) in data.patients().iter().enumerate() {
        let r = g.residuals[i];
        t.push(vec![
            g.ids[i].clone(),
            rec.treat.to_string(),
            sig6(r[0]),
            sig6(r[1]),
            sig6(r[2]),
            sig6(r[3]),
            sig6(g.statistics[i]),
            (g.statistics[i] > g.threshold).to_string(),
        ]);
    }
    let summary = json!({
        "settings": cfg.canonical(),
        "n_used": data.len(),
        "excluded_records": excluded_json(&loaded.excluded),
        "latent_fit": fit_json(&f),
        "gof": gof_json(&g),
    });
    Ok(Outcome {
        report: Report {
            provenance: data_provenance("gof", None, cfg, &bytes, &loaded),
            tables: vec![t, gof_table(&g)],
            summary,
        },
        failure,
    })
}
