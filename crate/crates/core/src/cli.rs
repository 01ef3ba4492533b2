//! Command-line front end: `simulate`, `analyze` and `report`.
//!
//! Every command writes its outputs into `--out` together with a
//! `manifest.json`. Failures map to exit codes through
//! [`Error::exit_code`]; argument errors exit with 2.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{
    csv_io, file_digest, json_f64, json_opt_f64, load_csv, read_json, sha256_hex, write_json,
    ColumnMapping, RunManifest,
};
use crate::par;
use crate::pipeline::{difference_in_means, ipw_ate, run_method, AteSummary, Estimate, Method};
use crate::rng::derive_seed;
use crate::sim::{run_mc, DgpKind, DgpSpec, McReport, McSettings, Missingness, RepResult, Summary};
use crate::{ConformalConfig, LearnerKind, LearnerRoles, PredictionInterval};

/// Environment variable read when `--threads` is absent.
pub const THREADS_ENV: &str = "ATTRITION_CONFORMAL_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "attrition-conformal",
    version,
    about = "Conformal ITE intervals under attrition"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo coverage and length on a synthetic design.
    Simulate(SimulateArgs),
    /// Intervals and group effects for a CSV dataset.
    Analyze(AnalyzeArgs),
    /// Merge several Monte Carlo reports into one table.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// dgp1, dgp2 or appendixE.
    #[arg(long)]
    pub dgp: DgpKind,
    /// Rows per replication
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    /// cise, wcqr_nested_exact or wcqr_nested_inexact.
    #[arg(long, default_value = "cise")]
    pub method: Method,
    /// glm or forest.
    #[arg(long, default_value = "glm")]
    pub learner: LearnerKind,
    #[arg(long, default_value_t = 0.025)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.025)]
    pub gamma: f64,
    /// Covariate equicorrelation; not accepted with appendixE.
    #[arg(long)]
    pub rho: Option<f64>,
    /// mar or mcar (appendixE only).
    #[arg(long)]
    pub missingness: Option<Missingness>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads; overrides ATTRITION_CONFORMAL_THREADS
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    /// Headed CSV file
    #[arg(long)]
    pub data: PathBuf,
    /// JSON column mapping.
    #[arg(long)]
    pub map: PathBuf,
    #[arg(long, default_value = "cise")]
    pub method: Method,
    #[arg(long, default_value = "glm")]
    pub learner: LearnerKind,
    /// Runs over re-randomized splits.
    #[arg(long, default_value_t = 10)]
    pub reps: usize,
    #[arg(long, default_value_t = 0.025)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.025)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads; overrides ATTRITION_CONFORMAL_THREADS
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// One or more `mc_report.json` files.
    #[arg(long = "in", required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    /// Allow reports with different nominal levels.
    #[arg(long)]
    pub allow_mixed: bool,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

/// `--threads`, else the environment override, else the ambient pool.
pub fn resolve_threads(flag: Option<usize>) -> Result<Option<usize>> {
    if let Some(t) = flag {
        return positive_threads(t).map(Some);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => {
            let t: usize = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{THREADS_ENV}='{v}' is not a count")))?;
            positive_threads(t).map(Some)
        }
        _ => Ok(None),
    }
}

fn positive_threads(t: usize) -> Result<usize> {
    if t == 0 {
        Err(Error::Config("thread count must be at least 1".into()))
    } else {
        Ok(t)
    }
}

fn prepare_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn args_vec() -> Vec<String> {
    std::env::args().skip(1).collect()
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => cmd_simulate(&a).map(|_| ()),
        Command::Analyze(a) => cmd_analyze(&a).map(|_| ()),
        Command::Report(a) => cmd_report(&a).map(|_| ()),
    }
}

fn config(alpha: f64, gamma: f64, seed: u64) -> Result<ConformalConfig> {
    let cfg = ConformalConfig {
        alpha,
        gamma,
        seed,
        ..ConformalConfig::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NA".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), fmt_f64)
}

pub fn simulate_settings(a: &SimulateArgs) -> Result<McSettings> {
    if a.dgp == DgpKind::AppendixE && a.rho.is_some() {
        return Err(Error::Config(
            "--rho is not accepted with --dgp appendixE".into(),
        ));
    }
    if a.dgp != DgpKind::AppendixE && a.missingness.is_some() {
        return Err(Error::Config(
            "--missingness applies to --dgp appendixE only".into(),
        ));
    }
    let mut dgp = DgpSpec::new(a.dgp, a.n)
        .with_rho(a.rho.unwrap_or(0.0))
        .with_seed(a.seed);
    if let Some(m) = a.missingness {
        dgp = dgp.with_missingness(m);
    }
    dgp.validate()?;
    Ok(McSettings {
        dgp,
        method: a.method,
        learner: learner_name(a.learner).into(),
        cfg: config(a.alpha, a.gamma, a.seed)?,
        roles: LearnerRoles::from_kind(a.learner),
        reps: a.reps,
    })
}

fn learner_name(kind: LearnerKind) -> &'static str {
    match kind {
        LearnerKind::Glm | LearnerKind::QuantileLinear => "glm",
        LearnerKind::RandomForest => "forest",
    }
}

fn long_rows(settings: &McSettings, rep: &RepResult) -> Vec<(&'static str, String)> {
    let m = rep.metrics;
    vec![
        ("coverage", fmt_opt(m.map(|m| m.coverage))),
        ("avg_length", fmt_opt(m.map(|m| m.avg_length))),
        (
            "avg_finite_length",
            fmt_opt(m.and_then(|m| m.avg_finite_length)),
        ),
        (
            "n_infinite",
            m.map_or_else(|| "NA".into(), |m| m.n_infinite.to_string()),
        ),
        ("n_attrition", rep.n_attrition.to_string()),
        ("ate_r1", fmt_opt(rep.ate_r1)),
        ("ate_r0", fmt_opt(rep.ate_r0)),
        ("true_ate_r0", fmt_opt(rep.true_ate_r0)),
        ("failed", u8::from(rep.error.is_some()).to_string()),
        (
            "oracle_length",
            fmt_f64(crate::sim::oracle_length(
                settings.cfg.alpha + settings.cfg.gamma,
            )),
        ),
    ]
}

fn write_long_csv(report: &McReport, path: &Path) -> Result<()> {
    let s = &report.settings;
    let mut w = csv::Writer::from_path(path).map_err(csv_io)?;
    w.write_record([
        "dgp",
        "n",
        "rho",
        "missingness",
        "method",
        "learner",
        "alpha",
        "gamma",
        "rep",
        "seed",
        "metric",
        "value",
    ])
    .map_err(csv_io)?;
    let missingness = if s.dgp.kind == DgpKind::AppendixE {
        format!("{:?}", s.dgp.missingness).to_ascii_lowercase()
    } else {
        "NA".into()
    };
    for rep in &report.reps {
        for (metric, value) in long_rows(s, rep) {
            w.write_record([
                s.dgp.kind.as_str(),
                &s.dgp.n.to_string(),
                &fmt_f64(s.dgp.rho),
                &missingness,
                s.method.as_str(),
                &s.learner,
                &fmt_f64(s.cfg.alpha),
                &fmt_f64(s.cfg.gamma),
                &rep.rep.to_string(),
                &rep.seed.to_string(),
                metric,
                &value,
            ])
            .map_err(csv_io)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Run the Monte Carlo study and write `mc_report.json`, `mc_long.csv` and
/// `manifest.json`.
pub fn cmd_simulate(a: &SimulateArgs) -> Result<McReport> {
    let settings = simulate_settings(a)?;
    let threads = resolve_threads(a.threads)?;
    prepare_out(&a.out)?;
    let mut manifest = RunManifest::new(
        "simulate",
        args_vec(),
        serde_json::to_value(&settings)?,
        a.seed,
    );
    let report = run_mc(&settings, threads)?;
    let json = a.out.join("mc_report.json");
    write_json(&json, &report)?;
    manifest.add_output(&json)?;
    let long = a.out.join("mc_long.csv");
    write_long_csv(&report, &long)?;
    manifest.add_output(&long)?;
    manifest.finish(&a.out.join("manifest.json"))?;
    Ok(report)
}

/// Mean and spread of a per-run quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcrossReps {
    #[serde(with = "json_f64")]
    pub mean: f64,
    #[serde(with = "json_opt_f64")]
    pub sd: Option<f64>,
    pub reps: usize,
}

impl From<Summary> for AcrossReps {
    fn from(s: Summary) -> Self {
        Self {
            mean: s.mean,
            sd: s.sd,
            reps: s.count,
        }
    }
}

/// Contents of `ate_summary.json`; the first four keys are the table
/// columns in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeSummary {
    #[serde(rename = "ATER1")]
    pub ate_r1: Estimate,
    /// Absent when nobody attrited or every run was unbounded.
    #[serde(rename = "ATER0")]
    pub ate_r0: Option<Estimate>,
    #[serde(rename = "ATEall")]
    pub ate_all: Estimate,
    /// Mean attrition-group interval length.
    #[serde(rename = "Length")]
    pub length: Option<AcrossReps>,
    #[serde(rename = "IPW")]
    pub ipw: Option<Estimate>,
    pub n_r1: usize,
    pub n_r0: usize,
    pub method: Method,
    pub reps: usize,
    pub reps_failed: usize,
    pub reps_unbounded: usize,
    pub notes: Vec<String>,
}

/// Per-unit mean endpoints across runs.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitInterval {
    /// 1-based data row of the CSV file.
    pub row: usize,
    pub interval: PredictionInterval,
    pub runs: usize,
}

struct RunOutcome {
    intervals: Vec<(usize, PredictionInterval)>,
    notes: Vec<String>,
}

pub fn cmd_analyze(a: &AnalyzeArgs) -> Result<(AnalyzeSummary, Vec<UnitInterval>)> {
    if a.reps == 0 {
        return Err(Error::Config("reps must be at least 1".into()));
    }
    let threads = resolve_threads(a.threads)?;
    let base_cfg = config(a.alpha, a.gamma, a.seed)?;
    let roles = LearnerRoles::from_kind(a.learner);
    let mapping = ColumnMapping::load(&a.map)?;
    let ds = load_csv(&a.data, &mapping)?;
    prepare_out(&a.out)?;

    let mut manifest = RunManifest::new(
        "analyze",
        args_vec(),
        serde_json::json!({
            "method": a.method,
            "learner": learner_name(a.learner),
            "reps": a.reps,
            "cfg": base_cfg,
            "roles": roles,
            "mapping": mapping,
        }),
        a.seed,
    );
    manifest.input_digest = Some(sha256_hex(
        format!("{}{}", file_digest(&a.data)?, file_digest(&a.map)?).as_bytes(),
    ));

    let runs: Vec<Result<RunOutcome>> = par::with_threads(threads, || {
        par::map_indexed(a.reps, |rep| {
            let cfg = base_cfg.clone().with_seed(derive_seed(a.seed, rep as u64));
            run_method(a.method, &ds, &cfg, &roles).map(|res| RunOutcome {
                intervals: res.attrition.iter().map(|x| (x.row, x.interval)).collect(),
                notes: res.notes,
            })
        })
    });

    let mut notes: Vec<String> = Vec::new();
    let mut ok = Vec::new();
    let mut first_error = None;
    for r in runs {
        match r {
            Ok(o) => ok.push(o),
            Err(e) => {
                if first_error.is_none() {
                    first_error = Some(e);
                }
            }
        }
    }
    let failed = a.reps - ok.len();
    if ok.is_empty() {
        return Err(first_error.unwrap_or_else(|| Error::Numerical("no run succeeded".into())));
    }
    if let Some(e) = &first_error {
        notes.push(format!(
            "{failed} of {} runs failed; first error: {e}",
            a.reps
        ));
    }
    for o in &ok {
        for n in &o.notes {
            if !notes.contains(n) {
                notes.push(n.clone());
            }
        }
    }

    let n_r0 = ds.attrition_rows().len();
    let n_r1 = ds.n() - n_r0;
    let ate_r1 = difference_in_means(&ds)?;
    let ipw = match ipw_ate(&ds, &roles, base_cfg.propensity_clip) {
        Ok(e) => Some(e),
        Err(e) => {
            notes.push(format!("IPW estimate unavailable: {e}"));
            None
        }
    };

    let mut mids = Vec::new();
    let mut lengths = Vec::new();
    let mut unbounded = 0;
    for o in &ok {
        if o.intervals.is_empty() {
            continue;
        }
        let k = o.intervals.len() as f64;
        lengths.push(o.intervals.iter().map(|(_, iv)| iv.length()).sum::<f64>() / k);
        if o.intervals.iter().all(|(_, iv)| iv.is_finite()) {
            mids.push(o.intervals.iter().map(|(_, iv)| iv.midpoint()).sum::<f64>() / k);
        } else {
            unbounded += 1;
        }
    }
    let ate_r0 = if n_r0 == 0 {
        notes.push("no attrited rows; ATER0 is absent and ATEall equals ATER1".into());
        None
    } else if mids.is_empty() {
        notes.push("every run produced unbounded attrition intervals; ATER0 is absent".into());
        None
    } else {
        let s = Summary::of(&mids);
        Some(Estimate::new(s.mean, s.sd))
    };
    let combined = AteSummary::combine(n_r1, n_r0, ate_r1, ate_r0);

    let summary = AnalyzeSummary {
        ate_r1,
        ate_r0: combined.ate_r0,
        ate_all: combined.ate_all,
        length: (!lengths.is_empty()).then(|| Summary::of(&lengths).into()),
        ipw,
        n_r1,
        n_r0,
        method: a.method,
        reps: a.reps,
        reps_failed: failed,
        reps_unbounded: unbounded,
        notes,
    };

    let mut by_row: BTreeMap<usize, (f64, f64, usize)> = BTreeMap::new();
    for o in &ok {
        for &(row, iv) in &o.intervals {
            let e = by_row.entry(row).or_insert((0.0, 0.0, 0));
            e.0 += iv.lo;
            e.1 += iv.hi;
            e.2 += 1;
        }
    }
    let units: Vec<UnitInterval> = by_row
        .into_iter()
        .map(|(row, (lo, hi, k))| UnitInterval {
            row: row + 1,
            interval: PredictionInterval::new(lo / k as f64, hi / k as f64),
            runs: k,
        })
        .collect();

    let json = a.out.join("ate_summary.json");
    write_json(&json, &summary)?;
    manifest.add_output(&json)?;
    let csv_path = a.out.join("intervals.csv");
    let mut w = csv::Writer::from_path(&csv_path).map_err(csv_io)?;
    w.write_record(["row", "lo", "hi", "length", "runs"])
        .map_err(csv_io)?;
    for u in &units {
        w.write_record([
            u.row.to_string(),
            fmt_f64(u.interval.lo),
            fmt_f64(u.interval.hi),
            fmt_f64(u.interval.length()),
            u.runs.to_string(),
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;
    manifest.add_output(&csv_path)?;
    manifest.finish(&a.out.join("manifest.json"))?;
    Ok((summary, units))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: Method,
    pub dgp: String,
    pub n: usize,
    #[serde(with = "json_f64")]
    pub rho: f64,
    pub learner: String,
    #[serde(with = "json_f64")]
    pub alpha: f64,
    #[serde(with = "json_f64")]
    pub gamma: f64,
    pub reps: usize,
    pub n_failed: usize,
    pub coverage: Summary,
    pub length: Summary,
    pub finite_length: Summary,
    #[serde(with = "json_f64")]
    pub oracle_length: f64,
    pub settings_digest: String,
}

impl ReportRow {
    fn from_report(r: &McReport) -> Self {
        let s = &r.settings;
        Self {
            method: s.method,
            dgp: s.dgp.kind.as_str().into(),
            n: s.dgp.n,
            rho: s.dgp.rho,
            learner: s.learner.clone(),
            alpha: s.cfg.alpha,
            gamma: s.cfg.gamma,
            reps: s.reps,
            n_failed: r.n_failed,
            coverage: r.coverage,
            length: r.length,
            finite_length: r.finite_length,
            oracle_length: r.oracle_length,
            settings_digest: r.settings_digest.clone(),
        }
    }
}

/// Merge reports: one row per distinct settings digest, sorted by
/// `(method, dgp, n, rho, learner, digest)` so that the input order does
/// not matter.
pub fn merge_reports(reports: &[McReport], allow_mixed: bool) -> Result<Vec<ReportRow>> {
    if reports.is_empty() {
        return Err(Error::Config("no reports to merge".into()));
    }
    let mut rows: BTreeMap<String, ReportRow> = BTreeMap::new();
    for r in reports {
        rows.entry(r.settings_digest.clone())
            .or_insert_with(|| ReportRow::from_report(r));
    }
    let mut rows: Vec<ReportRow> = rows.into_values().collect();
    if !allow_mixed {
        let level = |r: &ReportRow| r.alpha + r.gamma;
        let first = level(&rows[0]);
        if let Some(bad) = rows.iter().find(|r| (level(r) - first).abs() > 1e-12) {
            return Err(Error::Config(format!(
                "nominal miscoverage differs ({} vs {}); pass --allow-mixed to merge anyway",
                first,
                level(bad)
            )));
        }
    }
    rows.sort_by(|a, b| {
        (a.method, &a.dgp, a.n, &a.learner)
            .cmp(&(b.method, &b.dgp, b.n, &b.learner))
            .then(a.rho.total_cmp(&b.rho))
            .then_with(|| a.settings_digest.cmp(&b.settings_digest))
    });
    Ok(rows)
}

pub fn cmd_report(a: &ReportArgs) -> Result<Vec<ReportRow>> {
    let reports: Vec<McReport> = a
        .inputs
        .iter()
        .map(|p| read_json(p))
        .collect::<Result<_>>()?;
    let rows = merge_reports(&reports, a.allow_mixed)?;
    prepare_out(&a.out)?;

    let mut digests: Vec<String> = reports.iter().map(|r| r.settings_digest.clone()).collect();
    digests.sort();
    digests.dedup();
    let mut manifest = RunManifest::new(
        "report",
        args_vec(),
        serde_json::json!({ "allow_mixed": a.allow_mixed, "settings_digests": digests }),
        0,
    );
    manifest.input_digest = Some(sha256_hex(digests.concat().as_bytes()));

    let json = a.out.join("report.json");
    write_json(&json, &rows)?;
    manifest.add_output(&json)?;
    let csv_path = a.out.join("report.csv");
    let mut w = csv::Writer::from_path(&csv_path).map_err(csv_io)?;
    w.write_record([
        "method",
        "dgp",
        "n",
        "rho",
        "learner",
        "alpha",
        "gamma",
        "reps",
        "n_failed",
        "coverage_mean",
        "coverage_sd",
        "length_mean",
        "length_sd",
        "finite_length_mean",
        "oracle_length",
        "settings_digest",
    ])
    .map_err(csv_io)?;
    for r in &rows {
        w.write_record([
            r.method.as_str().to_string(),
            r.dgp.clone(),
            r.n.to_string(),
            fmt_f64(r.rho),
            r.learner.clone(),
            fmt_f64(r.alpha),
            fmt_f64(r.gamma),
            r.reps.to_string(),
            r.n_failed.to_string(),
            fmt_f64(r.coverage.mean),
            fmt_opt(r.coverage.sd),
            fmt_f64(r.length.mean),
            fmt_opt(r.length.sd),
            fmt_f64(r.finite_length.mean),
            fmt_f64(r.oracle_length),
            r.settings_digest.clone(),
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;
    manifest.add_output(&csv_path)?;
    manifest.finish(&a.out.join("manifest.json"))?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sim_args(dgp: DgpKind, rho: Option<f64>) -> SimulateArgs {
        SimulateArgs {
            dgp,
            n: 500,
            reps: 2,
            method: Method::Cise,
            learner: LearnerKind::Glm,
            alpha: 0.025,
            gamma: 0.025,
            rho,
            missingness: None,
            seed: 7,
            out: PathBuf::from("unused"),
            threads: None,
        }
    }

    #[test]
    fn rho_with_appendix_e_is_a_usage_error() {
        let err = simulate_settings(&sim_args(DgpKind::AppendixE, Some(0.0))).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(simulate_settings(&sim_args(DgpKind::AppendixE, None)).is_ok());
        assert!(simulate_settings(&sim_args(DgpKind::Dgp1, Some(0.9))).is_ok());
    }

    #[test]
    fn missingness_needs_appendix_e() {
        let mut a = sim_args(DgpKind::Dgp2, None);
        a.missingness = Some(Missingness::Mcar);
        assert!(matches!(simulate_settings(&a), Err(Error::Config(_))));
    }

    #[test]
    fn flags_parse() {
        let cli = Cli::try_parse_from([
            "attrition-conformal",
            "simulate",
            "--dgp",
            "dgp1",
            "--n",
            "500",
            "--reps",
            "5",
            "--method",
            "cise",
            "--learner",
            "glm",
            "--alpha",
            "0.025",
            "--gamma",
            "0.025",
            "--rho",
            "0",
            "--seed",
            "7",
            "--out",
            "x",
        ])
        .unwrap();
        match cli.command {
            Command::Simulate(a) => {
                assert_eq!(a.dgp, DgpKind::Dgp1);
                assert_eq!(a.reps, 5);
                assert_eq!(a.rho, Some(0.0));
            }
            _ => panic!("wrong subcommand"),
        }
        let err = Cli::try_parse_from(["attrition-conformal", "report", "--out", "x"]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(Cli::try_parse_from([
            "attrition-conformal",
            "simulate",
            "--dgp",
            "dgp9",
            "--n",
            "5",
            "--out",
            "x"
        ])
        .is_err());
    }

    #[test]
    fn number_formatting() {
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
        assert_eq!(fmt_f64(f64::NAN), "NA");
        assert_eq!(fmt_f64(0.5), "0.5");
        assert_eq!(fmt_opt(None), "NA");
    }

    #[test]
    fn zero_threads_rejected() {
        assert!(resolve_threads(Some(0)).is_err());
        assert_eq!(resolve_threads(Some(3)).unwrap(), Some(3));
    }
}
