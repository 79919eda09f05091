//! Command-line front end: `fit`, `simulate`, and `tau` subcommands with
//! JSON (full precision) and CSV (3-decimal, presentation) report formats.
//!
//! Exit codes: 0 success, 1 data or runtime failure (including fits that
//! did not converge), 2 usage errors.

use crate::copulas::{self, CopulaFamily};
use crate::datasets::{load_csv, serial_sacrifice, NamedDataset};
use crate::error::{Error, Result};
use crate::inference::{fit, CellWeighting, FitConfig, FitResult, ThetaVector};
use crate::simulation::{
    builtin_scenario, monte_carlo, MCSummary, MarginalFamily, MarginalModel, SimScenario,
    BUILTIN_SCENARIOS,
};
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use std::ffi::OsString;
use std::path::{Path, PathBuf};

/// Seed used when the caller does not pass one; echoed in every report.
pub const DEFAULT_SEED: u64 = 20260819;

const DEFAULT_BETAS: [f64; 4] = [0.0, 0.2, 0.4, 0.6];

#[derive(Parser)]
#[command(
    name = "oneshot-copula",
    version,
    about = "Copula dependence estimation for one-shot devices with two failure modes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a copula dependence model to one-shot device data.
    Fit(FitArgs),
    /// Run a seeded Monte Carlo study and report mean estimates per beta.
    Simulate(SimulateArgs),
    /// Convert between copula parameters and Kendall's tau.
    Tau(TauArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CopulaArg {
    Gh,
    Frank,
}

impl From<CopulaArg> for CopulaFamily {
    fn from(value: CopulaArg) -> Self {
        match value {
            CopulaArg::Gh => CopulaFamily::GumbelHougaard,
            CopulaArg::Frank => CopulaFamily::Frank,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum WeightsArg {
    UnitShare,
    Uniform,
}

impl From<WeightsArg> for CellWeighting {
    fn from(value: WeightsArg) -> Self {
        match value {
            WeightsArg::UnitShare => CellWeighting::UnitShare,
            WeightsArg::Uniform => CellWeighting::Uniform,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Args)]
#[command(group(ArgGroup::new("source").required(true).args(["data", "builtin"])))]
struct FitArgs {
    /// CSV dataset (header: inspection_time,stress,n0,n1,n2,n12).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Embedded dataset name (serial-sacrifice).
    #[arg(long)]
    builtin: Option<String>,
    /// Copula family.
    #[arg(long, value_enum)]
    copula: CopulaArg,
    /// Tuning parameters, comma separated; beta = 0 is the QMLE.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_BETAS)]
    beta: Vec<f64>,
    /// Extra stress levels at which alpha and tau are reported.
    #[arg(long = "eval-stress", value_delimiter = ',', allow_negative_numbers = true)]
    eval_stress: Vec<f64>,
    /// Cell weighting; the default uses unit-share at beta = 0 and
    /// uniform at beta > 0.
    #[arg(long, value_enum)]
    weights: Option<WeightsArg>,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,
    /// Write the report to this file instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Builtin scenario name (gh-weibull, gh-gamma, frank-pos-weibull,
    /// frank-pos-gamma, frank-neg-weibull, frank-neg-gamma) or a path to
    /// a scenario JSON file.
    #[arg(long)]
    scenario: String,
    /// Devices per test condition; overrides the scenario value.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    kstar: Option<u64>,
    /// Monte Carlo replications.
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    reps: u64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Tuning parameters, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_BETAS)]
    beta: Vec<f64>,
    /// Apply the contamination transform to every generated dataset.
    #[arg(long)]
    contaminate: bool,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,
    /// Write the report to this file instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
#[command(group(ArgGroup::new("source").required(true).args(["alpha", "tau"])))]
struct TauArgs {
    #[arg(long, value_enum)]
    copula: CopulaArg,
    /// Copula parameters to convert to tau, comma separated. Negative
    /// values are meaningful for the Frank family.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    alpha: Vec<f64>,
    /// Tau values to convert to copula parameters, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    tau: Vec<f64>,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,
    /// Write the table to this file instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Per-beta fit rows plus everything needed to reproduce the run.
pub struct FitReport {
    pub dataset_name: String,
    pub dataset_cells: usize,
    pub dataset_total_units: u64,
    pub stress_levels: Vec<f64>,
    pub family: CopulaFamily,
    pub tool_version: &'static str,
    pub eval_stresses: Vec<f64>,
    pub weights_requested: Option<CellWeighting>,
    /// Ordered by ascending beta; failed fits are flagged, never dropped.
    pub fits: Vec<FitResult>,
}

/// Entry point used by the binary.
pub fn run() -> i32 {
    run_with_args(std::env::args_os())
}

/// Testable entry point; parses `args` exactly as the binary would.
pub fn run_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    apply_thread_cap();
    let outcome = match cli.command {
        Command::Fit(args) => cmd_fit(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Tau(args) => cmd_tau(&args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn apply_thread_cap() {
    if let Ok(raw) = std::env::var("ONESHOT_COPULA_THREADS") {
        match raw.parse::<usize>() {
            Ok(n) if n >= 1 => {
                // Only the first global-pool build wins; later calls in the
                // same process are no-ops.
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
            _ => eprintln!("warning: ignoring invalid ONESHOT_COPULA_THREADS value '{raw}'"),
        }
    }
}

fn sorted_betas(betas: &[f64]) -> Vec<f64> {
    let mut out = betas.to_vec();
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

fn emit(text: &str, output: Option<&Path>) -> Result<()> {
    match output {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_fit(args: &FitArgs) -> Result<i32> {
    let named: NamedDataset = match (&args.data, &args.builtin) {
        (Some(path), None) => load_csv(path)?,
        (None, Some(name)) => {
            if name == "serial-sacrifice" {
                serial_sacrifice()
            } else {
                return Err(Error::InvalidDataset(format!(
                    "unknown builtin dataset '{name}' (available: serial-sacrifice)"
                )));
            }
        }
        _ => unreachable!("clap enforces exactly one data source"),
    };
    let family: CopulaFamily = args.copula.into();
    let betas = sorted_betas(&args.beta);
    let weights = args.weights.map(CellWeighting::from);

    let mut fits = Vec::with_capacity(betas.len());
    for &beta in &betas {
        let config = FitConfig {
            beta,
            weighting: weights,
            eval_stresses: args.eval_stress.clone(),
            ..FitConfig::default()
        };
        fits.push(fit(&named.dataset, family, &config)?);
    }
    let all_converged = fits.iter().all(|f| f.converged);

    let report = FitReport {
        dataset_name: named.name.clone(),
        dataset_cells: named.dataset.cells().len(),
        dataset_total_units: named.dataset.total_units(),
        stress_levels: named.dataset.stress_levels().to_vec(),
        family,
        tool_version: env!("CARGO_PKG_VERSION"),
        eval_stresses: args.eval_stress.clone(),
        weights_requested: weights,
        fits,
    };
    let text = match args.format {
        FormatArg::Json => fit_report_json(&report),
        FormatArg::Csv => fit_report_csv(&report),
    };
    emit(&text, args.output.as_deref())?;
    Ok(if all_converged { 0 } else { 1 })
}

fn cmd_simulate(args: &SimulateArgs) -> Result<i32> {
    let (name, mut scenario) = resolve_scenario(&args.scenario)?;
    if let Some(k) = args.kstar {
        scenario.k_star = k;
    }
    if args.contaminate {
        scenario.contaminate = true;
    }
    let betas = sorted_betas(&args.beta);
    let summary = monte_carlo(&scenario, &betas, args.reps, args.seed)?;
    let text = match args.format {
        FormatArg::Json => simulate_report_json(&name, &scenario, &summary),
        FormatArg::Csv => simulate_report_csv(&summary),
    };
    emit(&text, args.output.as_deref())?;
    Ok(0)
}

struct TauRow {
    input: f64,
    source: &'static str,
    alpha: f64,
    tau: f64,
}

fn cmd_tau(args: &TauArgs) -> Result<i32> {
    let family: CopulaFamily = args.copula.into();
    let mut rows = Vec::new();
    for &alpha in &args.alpha {
        rows.push(TauRow {
            input: alpha,
            source: "alpha",
            alpha,
            tau: copulas::copula_tau(family, alpha)?,
        });
    }
    for &tau in &args.tau {
        let alpha = match family {
            CopulaFamily::GumbelHougaard => copulas::gh_alpha_from_tau(tau)?,
            CopulaFamily::Frank => copulas::frank_alpha_from_tau(tau)?,
        };
        rows.push(TauRow {
            input: tau,
            source: "tau",
            alpha,
            tau,
        });
    }
    let text = match args.format {
        FormatArg::Json => tau_report_json(family, &rows),
        FormatArg::Csv => tau_report_csv(family, &rows),
    };
    emit(&text, args.output.as_deref())?;
    Ok(0)
}

fn resolve_scenario(spec: &str) -> Result<(String, SimScenario)> {
    if BUILTIN_SCENARIOS.contains(&spec) {
        return Ok((spec.to_string(), builtin_scenario(spec)?));
    }
    let path = Path::new(spec);
    if !path.exists() {
        return Err(Error::InvalidScenario(format!(
            "'{spec}' is neither a builtin scenario ({}) nor an existing file",
            BUILTIN_SCENARIOS.join(", ")
        )));
    }
    let text = std::fs::read_to_string(path)?;
    let file: ScenarioFile = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidScenario(format!("{}: {e}", path.display())))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".to_string());
    let scenario = file.into_scenario()?;
    scenario.validate()?;
    Ok((name, scenario))
}

/// On-disk scenario schema; documented in the README.
#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    stresses: Vec<f64>,
    inspection_times: Vec<f64>,
    k_star: u64,
    marginal: MarginalFile,
    copula: String,
    theta_true: ThetaFile,
    #[serde(default)]
    contaminate: bool,
    #[serde(default = "default_x0")]
    normal_stress_x0: f64,
}

fn default_x0() -> f64 {
    25.0
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct MarginalFile {
    family: String,
    s0: f64,
    s1: f64,
    r0_mode1: f64,
    r0_mode2: f64,
    r1: f64,
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct ThetaFile {
    a0: f64,
    a1: f64,
}

impl ScenarioFile {
    fn into_scenario(self) -> Result<SimScenario> {
        Ok(SimScenario {
            stresses: self.stresses,
            inspection_times: self.inspection_times,
            k_star: self.k_star,
            marginal: MarginalModel {
                family: MarginalFamily::parse(&self.marginal.family)?,
                s0: self.marginal.s0,
                s1: self.marginal.s1,
                r0_mode1: self.marginal.r0_mode1,
                r0_mode2: self.marginal.r0_mode2,
                r1: self.marginal.r1,
            },
            copula: CopulaFamily::parse(&self.copula)?,
            theta_true: ThetaVector::new(self.theta_true.a0, self.theta_true.a1),
            contaminate: self.contaminate,
            normal_stress_x0: self.normal_stress_x0,
        })
    }
}

/// JSON number with 17 significant digits: parses back to the same f64.
fn num(x: f64) -> Value {
    if x.is_finite() {
        let text = format!("{x:.16e}");
        match serde_json::from_str::<serde_json::Number>(&text) {
            Ok(n) => Value::Number(n),
            Err(_) => Value::Null,
        }
    } else {
        Value::Null
    }
}

fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| num(x)).collect())
}

fn tool_value() -> Value {
    json!({"name": "oneshot-copula", "version": env!("CARGO_PKG_VERSION")})
}

fn render(value: &Value) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report values serialize");
    text.push('\n');
    text
}

fn weighting_name(w: Option<CellWeighting>) -> Value {
    match w {
        Some(w) => Value::String(w.name().to_string()),
        None => Value::String("auto".to_string()),
    }
}

fn fit_report_json(report: &FitReport) -> String {
    let fits: Vec<Value> = report
        .fits
        .iter()
        .map(|f| {
            let by_stress: Vec<Value> = f
                .alpha_by_stress
                .iter()
                .zip(&f.tau_by_stress)
                .map(|(&(x, alpha), &(_, tau))| {
                    json!({"stress": num(x), "alpha": num(alpha), "tau": num(tau)})
                })
                .collect();
            json!({
                "beta": num(f.beta),
                "converged": f.converged,
                "a0": num(f.theta_hat.a0),
                "a1": num(f.theta_hat.a1),
                "objective_value": num(f.objective_value),
                "abias_percent": num(f.abias_percent),
                "iterations": f.iterations,
                "floor_events": f.floor_events,
                "weighting": f.weighting.name(),
                "start": {"a0": num(f.start_used.a0), "a1": num(f.start_used.a1)},
                "by_stress": by_stress,
            })
        })
        .collect();
    render(&json!({
        "command": "fit",
        "tool": tool_value(),
        "dataset": {
            "name": report.dataset_name,
            "cells": report.dataset_cells,
            "total_units": report.dataset_total_units,
            "stress_levels": nums(&report.stress_levels),
        },
        "family": report.family.name(),
        "config": {
            "betas": nums(&report.fits.iter().map(|f| f.beta).collect::<Vec<_>>()),
            "eval_stresses": nums(&report.eval_stresses),
            "weights": weighting_name(report.weights_requested),
        },
        "fits": fits,
    }))
}

fn fit_report_csv(report: &FitReport) -> String {
    let mut out = String::new();
    out.push_str(
        "beta,converged,a0,a1,objective_value,abias_percent,iterations,floor_events,weighting,stress,alpha,tau\n",
    );
    for f in &report.fits {
        for (&(x, alpha), &(_, tau)) in f.alpha_by_stress.iter().zip(&f.tau_by_stress) {
            out.push_str(&format!(
                "{},{},{:.3},{:.3},{:.6},{:.3},{},{},{},{},{:.3},{:.3}\n",
                f.beta,
                f.converged,
                f.theta_hat.a0,
                f.theta_hat.a1,
                f.objective_value,
                f.abias_percent,
                f.iterations,
                f.floor_events,
                f.weighting.name(),
                x,
                alpha,
                tau,
            ));
        }
    }
    out
}

fn scenario_value(name: &str, sc: &SimScenario) -> Value {
    json!({
        "name": name,
        "stresses": nums(&sc.stresses),
        "inspection_times": nums(&sc.inspection_times),
        "k_star": sc.k_star,
        "marginal": {
            "family": sc.marginal.family.name(),
            "s0": num(sc.marginal.s0),
            "s1": num(sc.marginal.s1),
            "r0_mode1": num(sc.marginal.r0_mode1),
            "r0_mode2": num(sc.marginal.r0_mode2),
            "r1": num(sc.marginal.r1),
        },
        "copula": sc.copula.name(),
        "theta_true": {"a0": num(sc.theta_true.a0), "a1": num(sc.theta_true.a1)},
        "contaminate": sc.contaminate,
        "normal_stress_x0": num(sc.normal_stress_x0),
    })
}

fn simulate_report_json(name: &str, sc: &SimScenario, summary: &MCSummary) -> String {
    let rows: Vec<Value> = summary
        .rows
        .iter()
        .map(|r| {
            json!({
                "beta": num(r.beta),
                "mean_a0": num(r.mean_a0),
                "mean_a1": num(r.mean_a1),
                "mean_alpha0": num(r.mean_alpha0),
                "mean_tau0": num(r.mean_tau0),
                "converged_replications": r.converged_replications,
                "failed_replications": r.failed_replications,
            })
        })
        .collect();
    render(&json!({
        "command": "simulate",
        "tool": tool_value(),
        "scenario": scenario_value(name, sc),
        "seed": summary.seed,
        "replications": summary.replications,
        "truth": {
            "a0": num(summary.truth.a0),
            "a1": num(summary.truth.a1),
            "alpha0": num(summary.truth.alpha0),
            "tau0": num(summary.truth.tau0),
            "x0": num(summary.truth.x0),
        },
        "rows": rows,
    }))
}

fn simulate_report_csv(summary: &MCSummary) -> String {
    let mut out = String::new();
    out.push_str("parameter,true_value");
    for row in &summary.rows {
        out.push_str(&format!(",beta={}", row.beta));
    }
    out.push('\n');
    let fields: [(&str, f64, fn(&crate::simulation::MCRow) -> f64); 4] = [
        ("a0", summary.truth.a0, |r| r.mean_a0),
        ("a1", summary.truth.a1, |r| r.mean_a1),
        ("alpha0", summary.truth.alpha0, |r| r.mean_alpha0),
        ("tau0", summary.truth.tau0, |r| r.mean_tau0),
    ];
    for (label, truth, pick) in fields {
        out.push_str(&format!("{label},{truth:.3}"));
        for row in &summary.rows {
            out.push_str(&format!(",{:.3}", pick(row)));
        }
        out.push('\n');
    }
    out.push_str("converged_replications,");
    for row in &summary.rows {
        out.push_str(&format!(",{}", row.converged_replications));
    }
    out.push('\n');
    out.push_str("failed_replications,");
    for row in &summary.rows {
        out.push_str(&format!(",{}", row.failed_replications));
    }
    out.push('\n');
    out
}

fn tau_report_json(family: CopulaFamily, rows: &[TauRow]) -> String {
    let rows: Vec<Value> = rows
        .iter()
        .map(|r| {
            let mut row = json!({
                "input": num(r.input),
                "source": r.source,
                "alpha": num(r.alpha),
                "tau": num(r.tau),
            });
            if family == CopulaFamily::Frank {
                let map = row.as_object_mut().expect("row is an object");
                map.insert("tau_approx".to_string(), num(copulas::frank_tau_approx(r.alpha)));
                map.insert("approx_valid".to_string(), Value::Bool(r.alpha.abs() <= 3.0));
            }
            row
        })
        .collect();
    render(&json!({
        "command": "tau",
        "tool": tool_value(),
        "family": family.name(),
        "rows": rows,
    }))
}

fn tau_report_csv(family: CopulaFamily, rows: &[TauRow]) -> String {
    let mut out = String::new();
    out.push_str("family,source,input,alpha,tau,tau_approx,approx_valid\n");
    for r in rows {
        let (approx, valid) = if family == CopulaFamily::Frank {
            (
                format!("{:.6}", copulas::frank_tau_approx(r.alpha)),
                (r.alpha.abs() <= 3.0).to_string(),
            )
        } else {
            (String::new(), String::new())
        };
        out.push_str(&format!(
            "{},{},{},{:.6},{:.6},{},{}\n",
            family.name(),
            r.source,
            r.input,
            r.alpha,
            r.tau,
            approx,
            valid,
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_numbers_round_trip_exactly() {
        for &x in &[
            -2.1349403059591699,
            0.0,
            1.0 / 3.0,
            6.02e23,
            -1.7e-300,
            f64::MIN_POSITIVE,
        ] {
            let v = num(x);
            let text = serde_json::to_string(&v).unwrap();
            let back: f64 = text.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "failed for {x}");
        }
        assert_eq!(num(f64::NAN), Value::Null);
        assert_eq!(num(f64::INFINITY), Value::Null);
    }

    #[test]
    fn beta_lists_are_sorted_and_deduplicated() {
        assert_eq!(sorted_betas(&[0.6, 0.0, 0.2, 0.2]), vec![0.0, 0.2, 0.6]);
    }

    #[test]
    fn builtin_names_resolve_and_files_are_required_otherwise() {
        for name in BUILTIN_SCENARIOS {
            assert!(resolve_scenario(name).is_ok());
        }
        assert!(matches!(
            resolve_scenario("no-such-scenario"),
            Err(Error::InvalidScenario(_))
        ));
    }

    #[test]
    fn scenario_files_parse_with_defaults_and_reject_unknown_keys() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("custom.json");
        std::fs::write(
            &path,
            r#"{
                "stresses": [30.0, 40.0],
                "inspection_times": [5.0, 10.0],
                "k_star": 64,
                "marginal": {"family": "gamma", "s0": -0.3, "s1": 0.04,
                             "r0_mode1": 3.6, "r0_mode2": 3.8, "r1": -0.06},
                "copula": "frank",
                "theta_true": {"a0": 1.0, "a1": 0.02}
            }"#,
        )
        .unwrap();
        let (name, sc) = resolve_scenario(path.to_str().unwrap()).unwrap();
        assert_eq!(name, "custom");
        assert_eq!(sc.k_star, 64);
        assert!(!sc.contaminate);
        assert_eq!(sc.normal_stress_x0, 25.0);
        assert_eq!(sc.marginal.family, MarginalFamily::Gamma);

        let bad = dir.path().join("bad.json");
        std::fs::write(&bad, r#"{"stresses": [1.0], "unknown_key": 1}"#).unwrap();
        assert!(matches!(
            resolve_scenario(bad.to_str().unwrap()),
            Err(Error::InvalidScenario(_))
        ));
    }
}
