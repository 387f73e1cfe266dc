//! Command-line front end.
//!
//! Every command reads a scenario JSON (which names the network case), builds
//! the compact model and writes plot-ready CSV or a JSON summary. Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | solver or I/O failure |
//! | 2 | input file missing or malformed |
//! | 3 | iteration cap reached |
//! | 4 | result came from the bisection fallback |
//! | 5 | inputs parsed but rejected by validation |
//! | 6 | analytical and finite-difference sensitivity disagree |

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::dcgrid::{self, CompactModel, GridError, Scenario};
use crate::inverse::{self, InverseError, InverseResult, InverseSettings, IterationRecord, Termination};
use crate::mpcase::{self, NetworkCase};
use crate::surrogate::{self, SecurityProfile, SurrogateError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_ITERATION_CAP: i32 = 3;
pub const EXIT_FALLBACK: i32 = 4;
pub const EXIT_VALIDATION: i32 = 5;
pub const EXIT_MISMATCH: i32 = 6;

/// Relative tolerance of the sensitivity comparison.
pub const SENSITIVITY_RTOL: f64 = 0.05;
/// Below this slack norm the sensitivity comparison is skipped.
pub const INTERIOR_SNORM: f64 = 1e-4;

#[derive(Debug, Parser)]
#[command(name = "iccopf", version, about = "Maximum feasible security levels of chance-constrained DC-OPF")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and validate a MATPOWER case file.
    Parse {
        /// Path to the case file, or the name of a bundled case.
        case: String,
    },
    /// Find the largest feasible security level along a direction.
    Iccopf(IccopfArgs),
    /// Compare the analytical sensitivity with a finite difference.
    Sensitivity(SensitivityArgs),
    /// Trace the feasibility boundary of a pair of chance constraints.
    Sweep(SweepArgs),
    /// Slack norm and sensitivity over a grid of β.
    Curve(CurveArgs),
}

#[derive(Debug, Args)]
pub struct IccopfArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub direction: PathBuf,
    #[arg(long, default_value_t = 1e-6)]
    pub eps_s: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub eps_d: f64,
    #[arg(long, default_value_t = 50)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1.0 - 1e-6)]
    pub beta_cap: f64,
    /// Check the analytical sensitivity against a finite difference just past β_max.
    #[arg(long)]
    pub fd_check: bool,
    /// Also solve the forward problem at β_max and β_max + delta.
    #[arg(long)]
    pub verify: bool,
    #[arg(long, default_value_t = 1e-5)]
    pub delta: f64,
    /// Write the iteration trace as CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Write the run manifest as JSON.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SensitivityArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub direction: PathBuf,
    #[arg(long)]
    pub beta: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub fd_step: f64,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub spec: PathBuf,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, default_value_t = 1e-6)]
    pub eps_s: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub eps_d: f64,
    #[arg(long, default_value_t = 50)]
    pub max_iter: usize,
    /// CSV destination; standard output when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub direction: PathBuf,
    #[arg(long)]
    pub beta_min: f64,
    #[arg(long)]
    pub beta_max: f64,
    #[arg(long)]
    pub points: usize,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

/// A failed command: exit code plus the message for standard error.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<SurrogateError> for CliError {
    fn from(e: SurrogateError) -> Self {
        let code = match e {
            SurrogateError::Profile(_) | SurrogateError::Domain { .. } | SurrogateError::Step(_) => EXIT_VALIDATION,
            _ => EXIT_FAILURE,
        };
        CliError::new(code, e.to_string())
    }
}

impl From<InverseError> for CliError {
    fn from(e: InverseError) -> Self {
        match e {
            InverseError::Surrogate(s) => s.into(),
            InverseError::Settings(_)
            | InverseError::DegenerateDirection
            | InverseError::OffsetAboveCap { .. }
            | InverseError::Delta(_)
            | InverseError::Levels { .. }
            | InverseError::LevelDomain { .. } => CliError::new(EXIT_VALIDATION, e.to_string()),
            InverseError::OffsetInfeasible { .. } | InverseError::Ccopf { .. } => CliError::new(EXIT_FAILURE, e.to_string()),
        }
    }
}

impl From<GridError> for CliError {
    fn from(e: GridError) -> Self {
        CliError::new(EXIT_VALIDATION, e.to_string())
    }
}

/// What a successful command produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
}

/// Direction file: nonzero entries of `u` by chance-row label and the offsets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectionSpec {
    pub u: BTreeMap<String, f64>,
    /// Offset applied to every row without an override.
    pub beta0: f64,
    #[serde(default)]
    pub beta0_overrides: BTreeMap<String, f64>,
}

impl DirectionSpec {
    pub fn profile(&self, model: &CompactModel) -> Result<SecurityProfile, CliError> {
        let rows = model.chance_rows.len();
        let index = |label: &str| {
            model
                .row_index(label)
                .ok_or_else(|| CliError::new(EXIT_VALIDATION, format!("unknown chance row {label:?}")))
        };
        let mut u = DVector::zeros(rows);
        for (label, v) in &self.u {
            u[index(label)?] = *v;
        }
        let mut beta0 = DVector::from_element(rows, self.beta0);
        for (label, v) in &self.beta0_overrides {
            beta0[index(label)?] = *v;
        }
        let profile = SecurityProfile { u, beta0, beta: 0.0 };
        if profile.u.iter().all(|&v| v == 0.0) {
            return Err(CliError::new(EXIT_VALIDATION, "direction has no positive entry"));
        }
        profile.validate_direction()?;
        Ok(profile)
    }
}

/// Sweep file: the two rows whose boundary is traced and the grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub pair: [String; 2],
    pub tau_grid: Vec<f64>,
    pub beta0_list: Vec<f64>,
}

impl SweepSpec {
    pub fn validate(&self, model: &CompactModel) -> Result<[usize; 2], CliError> {
        let bad = |m: String| Err(CliError::new(EXIT_VALIDATION, m));
        if self.tau_grid.is_empty() || self.beta0_list.is_empty() {
            return bad("tau_grid and beta0_list must be non-empty".into());
        }
        if let Some(t) = self.tau_grid.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
            return bad(format!("tau {t} must be positive"));
        }
        if let Some(b) = self.beta0_list.iter().find(|b| !(0.5..1.0).contains(*b)) {
            return bad(format!("offset {b} must lie in [0.5, 1)"));
        }
        if self.pair[0] == self.pair[1] {
            return bad("pair must name two different rows".into());
        }
        let mut idx = [0; 2];
        for (i, label) in self.pair.iter().enumerate() {
            idx[i] = match model.row_index(label) {
                Some(k) => k,
                None => return bad(format!("unknown chance row {label:?}")),
            };
        }
        Ok(idx)
    }

    /// `u_{k₁} = 1/√(1+τ²)`, `u_{k₂} = τ/√(1+τ²)`.
    pub fn direction(tau: f64) -> (f64, f64) {
        let n = (1.0 + tau * tau).sqrt();
        (1.0 / n, tau / n)
    }
}

/// Provenance of one run. Only the timestamps vary between identical runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// SHA-256 over the scenario, case and auxiliary input files.
    pub digest: String,
    pub seed: u64,
    pub settings: Value,
    pub started_at: String,
    pub finished_at: String,
}

/// A scenario with its case and compact model, plus the bytes that went in.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub case: NetworkCase,
    pub model: CompactModel,
    inputs: Vec<Vec<u8>>,
}

impl LoadedScenario {
    pub fn digest(&self, extra: &[&[u8]]) -> String {
        let mut h = Sha256::new();
        for part in self.inputs.iter().map(Vec::as_slice).chain(extra.iter().copied()) {
            h.update((part.len() as u64).to_le_bytes());
            h.update(part);
        }
        hex::encode(h.finalize())
    }
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::new(EXIT_INPUT, format!("{}: {e}", path.display())))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<(T, Vec<u8>), CliError> {
    let bytes = read(path)?;
    let value = serde_json::from_slice(&bytes).map_err(|e| CliError::new(EXIT_INPUT, format!("{}: {e}", path.display())))?;
    Ok((value, bytes))
}

fn load_case(name_or_path: &str, base: &Path) -> Result<(NetworkCase, Vec<u8>), CliError> {
    let text = match mpcase::bundled(name_or_path) {
        Some(t) => t.to_owned(),
        None => {
            let bytes = read(&base.join(name_or_path))?;
            String::from_utf8(bytes).map_err(|e| CliError::new(EXIT_INPUT, format!("{name_or_path}: {e}")))?
        }
    };
    let case = mpcase::parse_case(&text).map_err(|e| CliError::new(EXIT_INPUT, format!("{name_or_path}: {e}")))?;
    Ok((case, text.into_bytes()))
}

/// Reads a scenario file, its case (bundled name or path relative to the
/// scenario) and builds the compact model.
pub fn load_scenario(path: &Path) -> Result<LoadedScenario, CliError> {
    let (scenario, bytes): (Scenario, _) = read_json(path)?;
    let name = scenario
        .case
        .clone()
        .ok_or_else(|| CliError::new(EXIT_VALIDATION, format!("{}: scenario does not name a case", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let (case, case_bytes) = load_case(&name, base)?;
    let model = dcgrid::build_compact(&case, &scenario)?;
    Ok(LoadedScenario {
        scenario,
        case,
        model,
        inputs: vec![bytes, case_bytes],
    })
}

/// Twelve significant digits.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.11e}")
}

fn write_csv(path: Option<&Path>, body: &str, stdout: &mut String) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, body).map_err(|e| CliError::new(EXIT_FAILURE, format!("{}: {e}", p.display()))),
        None => {
            stdout.push_str(body);
            Ok(())
        }
    }
}

fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory CSV");
    for r in rows {
        w.write_record(&r).expect("in-memory CSV");
    }
    String::from_utf8(w.into_inner().expect("in-memory CSV")).expect("CSV of UTF-8 fields")
}

/// CSV of an iteration trace: `iter, beta, snorm, d_beta, eta, accepted`.
pub fn trace_csv(trace: &[IterationRecord]) -> String {
    csv_text(
        &["iter", "beta", "snorm", "d_beta", "eta", "accepted"],
        trace.iter().map(|r| {
            vec![
                r.index.to_string(),
                fmt_num(r.beta),
                fmt_num(r.snorm),
                fmt_num(r.d_beta),
                fmt_num(r.eta),
                r.accepted.to_string(),
            ]
        }),
    )
}

fn write_manifest(path: Option<&Path>, manifest: &RunManifest) -> Result<(), CliError> {
    if let Some(p) = path {
        let text = serde_json::to_string_pretty(manifest).expect("manifest serialises");
        std::fs::write(p, text + "\n").map_err(|e| CliError::new(EXIT_FAILURE, format!("{}: {e}", p.display())))?;
    }
    Ok(())
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

fn manifest(command: &str, loaded: &LoadedScenario, extra: &[&[u8]], settings: Value, started_at: String) -> RunManifest {
    RunManifest {
        tool: env!("CARGO_PKG_NAME").to_owned(),
        version: env!("CARGO_PKG_VERSION").to_owned(),
        command: command.to_owned(),
        digest: loaded.digest(extra),
        seed: loaded.scenario.sigma_seed,
        settings,
        started_at,
        finished_at: now(),
    }
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("JSON value serialises") + "\n"
}

fn termination_code(t: Termination) -> i32 {
    match t {
        Termination::Converged | Termination::DirectionFeasibleAtCap => EXIT_OK,
        Termination::IterationCap => EXIT_ITERATION_CAP,
        Termination::BisectionFallback => EXIT_FALLBACK,
    }
}

fn levels_by_label(model: &CompactModel, profile: &SecurityProfile, result: &InverseResult) -> Value {
    let map: serde_json::Map<String, Value> = model
        .labels()
        .enumerate()
        .filter(|(k, _)| profile.u[*k] > 0.0)
        .map(|(k, l)| (l.to_owned(), json!(result.beta_levels_at_max[k])))
        .collect();
    Value::Object(map)
}

/// `parse <case>`
pub fn cmd_parse(case: &str) -> Result<Outcome, CliError> {
    let (c, _) = load_case(case, Path::new("."))?;
    let v = json!({
        "buses": c.buses.len(),
        "branches": c.branches.len(),
        "generators": c.generators.len(),
        "valid": true,
    });
    Ok(Outcome {
        code: EXIT_OK,
        stdout: serde_json::to_string(&v).expect("JSON value serialises") + "\n",
    })
}

/// `iccopf --scenario S --direction D`
pub fn cmd_iccopf(args: &IccopfArgs) -> Result<Outcome, CliError> {
    let started = now();
    let loaded = load_scenario(&args.scenario)?;
    let (direction, dir_bytes): (DirectionSpec, _) = read_json(&args.direction)?;
    let profile = direction.profile(&loaded.model)?;
    let settings = InverseSettings {
        eps_s: args.eps_s,
        eps_d: args.eps_d,
        max_iter: args.max_iter,
        beta_cap: args.beta_cap,
        fd_check: args.fd_check,
    };
    settings.validate()?;
    if args.verify && !(args.delta > 0.0 && args.delta.is_finite()) {
        return Err(InverseError::Delta(args.delta).into());
    }
    let result = inverse::solve_inverse(&loaded.model, &profile, &settings)?;
    let verification = if args.verify {
        let check = inverse::verify_boundary(&loaded.model, &profile, result.beta_max, args.delta)?;
        json!({"delta": args.delta, "below_feasible": check.below_feasible, "above_infeasible": check.above_infeasible})
    } else {
        Value::Null
    };
    if let Some(p) = &args.trace {
        write_csv(Some(p), &trace_csv(&result.trace), &mut String::new())?;
    }
    let m = manifest("iccopf", &loaded, &[&dir_bytes], json!(settings), started);
    write_manifest(args.manifest.as_deref(), &m)?;
    let report = json!({
        "beta_max": result.beta_max,
        "termination": result.termination.to_string(),
        "iterations": result.iterations(),
        "snorm_at_max": result.snorm_at_max,
        "beta_levels_at_max": levels_by_label(&loaded.model, &profile, &result),
        "fallback_solves": result.fallback_solves,
        "sensitivity_check": result.sensitivity_check.map(|c| json!({
            "beta": c.beta,
            "step": c.step,
            "analytic": c.analytic,
            "finite_difference": c.finite_difference,
            "relative_error": c.relative_error(),
        })),
        "verification": verification,
        "manifest": m,
    });
    Ok(Outcome {
        code: termination_code(result.termination),
        stdout: pretty(&report),
    })
}

/// `sensitivity --scenario S --direction D --beta B`
pub fn cmd_sensitivity(args: &SensitivityArgs) -> Result<Outcome, CliError> {
    let started = now();
    let loaded = load_scenario(&args.scenario)?;
    let (direction, dir_bytes): (DirectionSpec, _) = read_json(&args.direction)?;
    let profile = direction.profile(&loaded.model)?.with_beta(args.beta);
    surrogate::beta_levels(&profile)?;
    let sol = surrogate::solve_surrogate(&loaded.model, &profile)?;
    let fd = surrogate::fd_sensitivity(&loaded.model, &profile, args.fd_step)?;
    let interior = sol.snorm <= INTERIOR_SNORM;
    let rel = (sol.d_beta - fd).abs() / fd.abs().max(f64::MIN_POSITIVE);
    let passed = interior || rel <= SENSITIVITY_RTOL;
    let m = manifest(
        "sensitivity",
        &loaded,
        &[&dir_bytes],
        json!({"beta": args.beta, "fd_step": args.fd_step}),
        started,
    );
    write_manifest(args.manifest.as_deref(), &m)?;
    let report = json!({
        "beta": args.beta,
        "snorm": sol.snorm,
        "analytic": sol.d_beta,
        "finite_difference": fd,
        "relative_error": if interior { Value::Null } else { json!(rel) },
        "interior": interior,
        "note": if interior { "interior point: slack norm is zero, so both sensitivities vanish" } else { "" },
        "passed": passed,
        "manifest": m,
    });
    if !passed {
        return Err(CliError::new(
            EXIT_MISMATCH,
            format!(
                "analytical sensitivity {} and finite difference {fd} differ by {:.2}% (limit {:.0}%)",
                sol.d_beta,
                100.0 * rel,
                100.0 * SENSITIVITY_RTOL
            ),
        ));
    }
    Ok(Outcome {
        code: EXIT_OK,
        stdout: pretty(&report),
    })
}

/// One `(τ, β₀)` point of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub tau: f64,
    pub beta0: f64,
    pub outcome: Result<InverseResult, String>,
    pub pair: [usize; 2],
}

impl SweepRow {
    fn record(&self) -> Vec<String> {
        let mut r = vec![fmt_num(self.tau), fmt_num(self.beta0)];
        match &self.outcome {
            Ok(res) => r.extend([
                fmt_num(res.beta_max),
                fmt_num(res.beta_levels_at_max[self.pair[0]]),
                fmt_num(res.beta_levels_at_max[self.pair[1]]),
                res.iterations().to_string(),
                res.termination.to_string(),
            ]),
            Err(_) => r.extend([String::new(), String::new(), String::new(), String::new(), "error".into()]),
        }
        r
    }
}

/// Solves every `(β₀, τ)` combination of `spec`, ordered by `β₀` then `τ`.
pub fn run_sweep(model: &CompactModel, spec: &SweepSpec, settings: &InverseSettings, workers: Option<usize>) -> Result<Vec<SweepRow>, CliError> {
    let pair = spec.validate(model)?;
    settings.validate()?;
    let rows = model.chance_rows.len();
    let jobs: Vec<(f64, f64)> = spec
        .beta0_list
        .iter()
        .flat_map(|&b0| spec.tau_grid.iter().map(move |&t| (b0, t)))
        .collect();
    let solve = |&(beta0, tau): &(f64, f64)| {
        let (u1, u2) = SweepSpec::direction(tau);
        let mut u = DVector::zeros(rows);
        u[pair[0]] = u1;
        u[pair[1]] = u2;
        let profile = SecurityProfile {
            u,
            beta0: DVector::from_element(rows, beta0),
            beta: 0.0,
        };
        SweepRow {
            tau,
            beta0,
            outcome: inverse::solve_inverse(model, &profile, settings).map_err(|e| e.to_string()),
            pair,
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        if w == 0 {
            return Err(CliError::new(EXIT_VALIDATION, "workers must be at least 1"));
        }
        builder = builder.num_threads(w);
    }
    let pool = builder.build().map_err(|e| CliError::new(EXIT_FAILURE, e.to_string()))?;
    Ok(pool.install(|| jobs.par_iter().map(solve).collect()))
}

pub const SWEEP_HEADER: [&str; 7] = ["tau", "beta0", "beta_max", "beta_k1_max", "beta_k2_max", "iterations", "termination"];

/// `sweep --scenario S --spec W`
pub fn cmd_sweep(args: &SweepArgs) -> Result<Outcome, CliError> {
    let started = now();
    let loaded = load_scenario(&args.scenario)?;
    let (spec, spec_bytes): (SweepSpec, _) = read_json(&args.spec)?;
    let settings = InverseSettings {
        eps_s: args.eps_s,
        eps_d: args.eps_d,
        max_iter: args.max_iter,
        ..Default::default()
    };
    let rows = run_sweep(&loaded.model, &spec, &settings, args.workers)?;
    let mut out = String::new();
    write_csv(args.output.as_deref(), &csv_text(&SWEEP_HEADER, rows.iter().map(SweepRow::record)), &mut out)?;
    let mut warnings = String::new();
    for r in &rows {
        if let Err(e) = &r.outcome {
            let _ = writeln!(warnings, "tau {} beta0 {}: {e}", r.tau, r.beta0);
        }
    }
    let m = manifest(
        "sweep",
        &loaded,
        &[&spec_bytes],
        json!({"settings": settings, "workers": args.workers}),
        started,
    );
    write_manifest(args.manifest.as_deref(), &m)?;
    if !warnings.is_empty() {
        eprint!("{warnings}");
    }
    Ok(Outcome { code: EXIT_OK, stdout: out })
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// `curve --scenario S --direction D --beta-min A --beta-max B --points N`
pub fn cmd_curve(args: &CurveArgs) -> Result<Outcome, CliError> {
    let started = now();
    let loaded = load_scenario(&args.scenario)?;
    let (direction, dir_bytes): (DirectionSpec, _) = read_json(&args.direction)?;
    let profile = direction.profile(&loaded.model)?;
    if args.points == 0 || args.beta_min.is_nan() || args.beta_max.is_nan() || args.beta_min > args.beta_max {
        return Err(CliError::new(EXIT_VALIDATION, "need points ≥ 1 and beta-min ≤ beta-max"));
    }
    let betas = grid(args.beta_min, args.beta_max, args.points);
    for &b in &betas {
        surrogate::beta_levels(&profile.with_beta(b))?;
    }
    let sols = betas
        .par_iter()
        .map(|&b| surrogate::solve_surrogate(&loaded.model, &profile.with_beta(b)))
        .collect::<Result<Vec<_>, _>>()?;
    let body = csv_text(
        &["beta", "snorm", "d_beta"],
        betas.iter().zip(&sols).map(|(b, s)| vec![fmt_num(*b), fmt_num(s.snorm), fmt_num(s.d_beta)]),
    );
    let mut out = String::new();
    write_csv(args.output.as_deref(), &body, &mut out)?;
    let m = manifest(
        "curve",
        &loaded,
        &[&dir_bytes],
        json!({"beta_min": args.beta_min, "beta_max": args.beta_max, "points": args.points}),
        started,
    );
    write_manifest(args.manifest.as_deref(), &m)?;
    Ok(Outcome { code: EXIT_OK, stdout: out })
}

pub fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::Parse { case } => cmd_parse(case),
        Command::Iccopf(a) => cmd_iccopf(a),
        Command::Sensitivity(a) => cmd_sensitivity(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Curve(a) => cmd_curve(a),
    }
}

/// Parses `args`, runs the command and writes its output. Returns the exit
/// code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(text.as_bytes())
            } else {
                stdout.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match execute(&cli) {
        Ok(o) => {
            if stdout.write_all(o.stdout.as_bytes()).is_err() {
                return EXIT_FAILURE;
            }
            o.code
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message);
            e.code
        }
    }
}
