//! The `demsm` command-line front end.
//!
//! Every subcommand reads an observed law (`--law law.json`) or a unit-level
//! sample (`--sample data.csv` with header `y,t,x`), writes its result to
//! `--out` or standard output, and exits with
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 2 | invalid configuration or parameters |
//! | 3 | unreadable or invalid data |
//! | 4 | a witness audit or oracle cross-check failed |
//!
//! Floating-point output is rounded to 12 significant digits and JSON keys are
//! sorted, so identical inputs give byte-identical files.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use crate::bounds::{
    aggregate_bounds, sensitivity_curve, BoundsReport, CurveMode, CurveRow, Interval, Model, ObservedLaw,
    SensitivitySpec, StratumOverride,
};
use crate::error::{Error, Result};
use crate::estimate::{bootstrap_ci, empirical_observed_law, require_complete, BootstrapReport, Sample};
use crate::oracle::{
    binary_u_grid_oracle, build_witness, greedy_density_ratio_bound, verify_witness, Direction, WitnessAudit,
    WitnessJoint,
};
use crate::params::{
    emsm_implied_lambdas, implied_lambda, implied_lambda_control, matching_gammas, EmsmDelta, GammaPair, ImpliedLambda,
    LambdaPair,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_AUDIT: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "demsm",
    version,
    about = "Sharp sensitivity bounds for causal means and treatment effects"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Bounds on mu1, mu0 and the ATE, optionally with bootstrap intervals.
    Bounds(BoundsArgs),
    /// Bounds along a grid of symmetric sensitivity values (plot-ready table).
    Curve(CurveArgs),
    /// MSM, deMSM and recommended-eMSM bounds side by side.
    Compare(CompareArgs),
    /// Explicit joint law attaining the bounds, with its audit.
    Witness(WitnessArgs),
    /// Closed-form bounds against the greedy and grid-search oracles.
    Check(CheckArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false, id = "input_source")]
pub struct Input {
    /// Observed law as JSON.
    #[arg(long)]
    pub law: Option<PathBuf>,
    /// Unit-level CSV sample with header `y,t,x`.
    #[arg(long)]
    pub sample: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Params {
    /// Treatment sensitivity: `L` for the symmetric box (1/L, L), or `lo,hi`.
    #[arg(long, default_value = "1")]
    pub lambda: String,
    /// Outcome sensitivity for Y^1: `G`, `lo,hi` or `inf`. Defaults to the lambda value.
    #[arg(long)]
    pub gamma: Option<String>,
    /// Outcome sensitivity for Y^0. Defaults to the gamma value.
    #[arg(long)]
    pub gamma0: Option<String>,
    /// eMSM constant in [0, 1], used by the recommended eMSM.
    #[arg(long)]
    pub delta: Option<f64>,
    /// JSON object of per-stratum overrides keyed by stratum id.
    #[arg(long)]
    pub overrides: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Output {
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub input: Input,
    #[command(flatten)]
    pub params: Params,
    /// One of msm, demsm, emsm.
    #[arg(long, default_value = "demsm")]
    pub model: String,
    /// Bootstrap replicates (at least 100); needs --sample.
    #[arg(long)]
    pub boot: Option<usize>,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    #[command(flatten)]
    pub input: Input,
    /// Comma-separated grid values.
    #[arg(long)]
    pub grid: String,
    /// demsm: Lambda = Gamma = value; msm: Lambda = value; emsm: delta = value at fixed --lambda.
    #[arg(long, default_value = "demsm")]
    pub model: String,
    /// Symmetric Lambda held fixed for the emsm curve.
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub input: Input,
    #[command(flatten)]
    pub params: Params,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct WitnessArgs {
    #[command(flatten)]
    pub input: Input,
    #[command(flatten)]
    pub params: Params,
    /// Only this stratum; all strata when absent.
    #[arg(long)]
    pub stratum: Option<String>,
    /// Audit tolerance.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// Perturbs the witness before auditing (for testing the audit).
    #[arg(long, hide = true)]
    pub corrupt_witness: bool,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub input: Input,
    #[command(flatten)]
    pub params: Params,
    /// Grid-oracle step in (0, 0.1].
    #[arg(long, default_value_t = 1e-3)]
    pub resolution: f64,
    #[command(flatten)]
    pub output: Output,
}

/// Failure of a subcommand, carrying its exit code.
#[derive(Debug)]
pub enum CliError {
    Lib(Error),
    /// A check ran but did not pass; the report is still written.
    Audit(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Lib(e) if e.is_data_error() => EXIT_DATA,
            CliError::Lib(_) => EXIT_CONFIG,
            CliError::Audit(_) => EXIT_AUDIT,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Lib(e) => write!(f, "{e}"),
            CliError::Audit(msg) => f.write_str(msg),
        }
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit code. Results go to `--out` or `stdout`; diagnostics to `stderr`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if code == EXIT_OK {
                stdout.write_all(rendered.as_bytes())
            } else {
                stderr.write_all(rendered.as_bytes())
            };
            return code;
        }
    };
    match execute(&cli.command, stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: &Command, stdout: &mut dyn Write) -> std::result::Result<(), CliError> {
    match command {
        Command::Bounds(a) => cmd_bounds(a, stdout),
        Command::Curve(a) => cmd_curve(a, stdout),
        Command::Compare(a) => cmd_compare(a, stdout),
        Command::Witness(a) => cmd_witness(a, stdout),
        Command::Check(a) => cmd_check(a, stdout),
    }
}

// ---------------------------------------------------------------- parsing

fn parse_number(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::InvalidParameter(format!("cannot parse {what} value '{s}'")))
}

/// `L` -> symmetric pair, `lo,hi` -> explicit pair.
pub fn parse_lambda(s: &str) -> Result<LambdaPair> {
    match s.split_once(',') {
        Some((lo, hi)) => LambdaPair::new(parse_number(lo, "lambda")?, parse_number(hi, "lambda")?),
        None => LambdaPair::symmetric(parse_number(s, "lambda")?),
    }
}

/// `G`, `lo,hi` or `inf` (the uninformative pair).
pub fn parse_gamma(s: &str) -> Result<GammaPair> {
    let s = s.trim();
    if s.eq_ignore_ascii_case("inf") {
        return Ok(GammaPair::uninformative());
    }
    match s.split_once(',') {
        Some((lo, hi)) => {
            let lo = parse_number(lo, "gamma")?;
            let hi = hi.trim();
            let hi = if hi.eq_ignore_ascii_case("inf") {
                f64::INFINITY
            } else {
                parse_number(hi, "gamma")?
            };
            GammaPair::new(lo, hi)
        }
        None => GammaPair::symmetric(parse_number(s, "gamma")?),
    }
}

/// Comma-separated grid; an empty list is an error.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let grid = s
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| parse_number(p, "grid"))
        .collect::<Result<Vec<_>>>()?;
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    Ok(grid)
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))
}

fn load_overrides(path: &Path) -> Result<BTreeMap<String, StratumOverride>> {
    let file = open(path)?;
    serde_json::from_reader(file)
        .map_err(|e| Error::InvalidParameter(format!("overrides file {}: {e}", path.display())))
}

/// Builds the sensitivity specification; `--gamma` falls back to the lambda
/// value and `--gamma0` to the gamma value.
pub fn build_spec(p: &Params) -> Result<SensitivitySpec> {
    let lam = parse_lambda(&p.lambda)?;
    let gam_text = p.gamma.clone().unwrap_or_else(|| p.lambda.clone());
    let gam = parse_gamma(&gam_text)?;
    let gam_prime = match &p.gamma0 {
        Some(g) => parse_gamma(g)?,
        None => gam,
    };
    let mut spec = SensitivitySpec::new(lam, gam, gam_prime);
    if let Some(d) = p.delta {
        spec = spec.with_delta(EmsmDelta::new(d)?);
    }
    if let Some(path) = &p.overrides {
        spec.overrides = load_overrides(path)?;
    }
    Ok(spec)
}

enum Loaded {
    Law(ObservedLaw),
    Sample(Sample, ObservedLaw),
}

impl Loaded {
    fn law(&self) -> &ObservedLaw {
        match self {
            Loaded::Law(l) | Loaded::Sample(_, l) => l,
        }
    }
}

fn load(input: &Input) -> Result<Loaded> {
    if let Some(path) = &input.law {
        let law: ObservedLaw =
            serde_json::from_reader(open(path)?).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        return Ok(Loaded::Law(law));
    }
    let path = input.sample.as_ref().expect("clap enforces one input");
    let sample = Sample::from_csv(open(path)?)?;
    let law = empirical_observed_law(&sample)?;
    require_complete(&law)?;
    Ok(Loaded::Sample(sample, law))
}

fn check_overrides(spec: &SensitivitySpec, law: &ObservedLaw) -> Result<()> {
    for id in spec.overrides.keys() {
        if !law.strata().iter().any(|s| &s.id == id) {
            return Err(Error::InvalidParameter(format!("override for unknown stratum '{id}'")));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- output

/// `x` rounded to 12 significant digits.
pub fn round12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) => {
            if let Some(x) = n.as_f64().filter(|_| !n.is_i64() && !n.is_u64()) {
                if let Some(r) = serde_json::Number::from_f64(round12(x)) {
                    *n = r;
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Pretty JSON with sorted keys and 12-significant-digit floats.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value)?;
    round_value(&mut v);
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

fn fmt_num(x: f64) -> String {
    format!("{}", round12(x))
}

fn write_csv(header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn emit(out: &Output, stdout: &mut dyn Write, text: &str) -> Result<()> {
    match &out.out {
        Some(path) => std::fs::write(path, text)?,
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn interval_cells(i: &Interval) -> [String; 2] {
    [fmt_num(i.lo), fmt_num(i.hi)]
}

// ---------------------------------------------------------------- bounds

#[derive(Serialize)]
struct BoundsOutput<'a> {
    #[serde(flatten)]
    report: &'a BoundsReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    sample_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bootstrap: Option<BootstrapReport>,
}

fn bounds_csv(report: &BoundsReport) -> Result<String> {
    let mut rows = Vec::new();
    let r = &report.reference;
    for (name, i, reference) in [
        ("mu1", report.mu1, r.mu1),
        ("mu0", report.mu0, r.mu0),
        ("ate", report.ate, r.ate),
    ] {
        let [lo, hi] = interval_cells(&i);
        rows.push(vec![name.to_string(), String::new(), lo, hi, fmt_num(reference)]);
    }
    for s in &report.strata {
        for (name, i, reference) in [("nu1", s.nu1, s.reference_nu1), ("nu0", s.nu0, s.reference_nu0)] {
            if let (Some(i), Some(reference)) = (i, reference) {
                let [lo, hi] = interval_cells(&i);
                rows.push(vec![name.to_string(), s.id.clone(), lo, hi, fmt_num(reference)]);
            }
        }
    }
    write_csv(&["quantity", "stratum", "lo", "hi", "reference"], &rows)
}

pub fn cmd_bounds(a: &BoundsArgs, stdout: &mut dyn Write) -> std::result::Result<(), CliError> {
    let model: Model = a.model.parse()?;
    let spec = build_spec(&a.params)?;
    if a.boot.is_some() && a.input.sample.is_none() {
        return Err(Error::InvalidParameter("--boot needs --sample".into()).into());
    }
    let loaded = load(&a.input)?;
    check_overrides(&spec, loaded.law())?;
    let report = aggregate_bounds(loaded.law(), &spec, model)?;
    let (sample_size, bootstrap) = match &loaded {
        Loaded::Sample(s, _) => {
            let boot = match a.boot {
                Some(b) => Some(bootstrap_ci(s, &spec, model, b, a.level, a.seed)?),
                None => None,
            };
            (Some(s.len()), boot)
        }
        Loaded::Law(_) => (None, None),
    };
    let text = match a.output.format.unwrap_or(Format::Json) {
        Format::Json => to_canonical_json(&BoundsOutput {
            report: &report,
            sample_size,
            bootstrap,
        })?,
        Format::Csv => bounds_csv(&report)?,
    };
    emit(&a.output, stdout, &text)?;
    Ok(())
}

// ---------------------------------------------------------------- curve

pub const CURVE_HEADER: [&str; 10] = [
    "value", "mu1_lo", "mu1_hi", "mu0_lo", "mu0_hi", "ate_lo", "ate_hi", "mu1_ref", "mu0_ref", "ate_ref",
];

fn curve_csv(rows: &[CurveRow]) -> Result<String> {
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut row = vec![fmt_num(r.value)];
            for i in [r.mu1, r.mu0, r.ate] {
                row.extend(interval_cells(&i));
            }
            row.extend([r.reference.mu1, r.reference.mu0, r.reference.ate].map(fmt_num));
            row
        })
        .collect();
    write_csv(&CURVE_HEADER, &cells)
}

pub fn cmd_curve(a: &CurveArgs, stdout: &mut dyn Write) -> std::result::Result<(), CliError> {
    let grid = parse_grid(&a.grid)?;
    let mode = match a.model.parse::<Model>()? {
        Model::Demsm => CurveMode::Demsm,
        Model::Msm => CurveMode::Msm,
        Model::EmsmRec => CurveMode::EmsmRec { lambda: a.lambda },
    };
    // validate the grid before touching the data
    for &v in &grid {
        match mode {
            CurveMode::EmsmRec { lambda } => {
                LambdaPair::symmetric(lambda)?;
                EmsmDelta::new(v)?;
            }
            _ => {
                LambdaPair::symmetric(v)?;
            }
        }
    }
    let loaded = load(&a.input)?;
    let rows = sensitivity_curve(loaded.law(), &grid, mode)?;
    let text = match a.output.format.unwrap_or(Format::Csv) {
        Format::Csv => curve_csv(&rows)?,
        Format::Json => to_canonical_json(&rows)?,
    };
    emit(&a.output, stdout, &text)?;
    Ok(())
}

// ---------------------------------------------------------------- compare

#[derive(Serialize)]
struct MatchingDiagnostics {
    delta: f64,
    tau: f64,
    /// Outcome box under which deMSM reproduces the recommended eMSM; absent when tau < 1/2.
    matched_gamma: Option<GammaPair>,
    /// Treatment box under which the MSM reproduces the recommended eMSM.
    implied_lambda: LambdaPair,
}

#[derive(Serialize)]
struct CompareOutput {
    lam: LambdaPair,
    gam: GammaPair,
    gam_prime: GammaPair,
    implied_treated: ImpliedLambda,
    implied_control: Option<ImpliedLambda>,
    msm: BoundsReport,
    demsm: BoundsReport,
    emsm_rec: Option<BoundsReport>,
    matching: Option<MatchingDiagnostics>,
    demsm_within_msm: bool,
}

pub fn cmd_compare(a: &CompareArgs, stdout: &mut dyn Write) -> std::result::Result<(), CliError> {
    let spec = build_spec(&a.params)?;
    let loaded = load(&a.input)?;
    let law = loaded.law();
    check_overrides(&spec, law)?;

    let msm = aggregate_bounds(law, &spec, Model::Msm)?;
    let demsm = aggregate_bounds(law, &spec, Model::Demsm)?;
    let (emsm_rec, matching) = match spec.delta {
        Some(delta) => {
            let tau = spec.lam.tau();
            let diag = MatchingDiagnostics {
                delta: delta.value(),
                tau,
                matched_gamma: matching_gammas(delta, tau).ok(),
                implied_lambda: emsm_implied_lambdas(delta, spec.lam),
            };
            (Some(aggregate_bounds(law, &spec, Model::EmsmRec)?), Some(diag))
        }
        None => (None, None),
    };
    let within = msm.ate.contains(&demsm.ate, 1e-12)
        && msm.mu1.contains(&demsm.mu1, 1e-12)
        && msm.mu0.contains(&demsm.mu0, 1e-12);
    let out = CompareOutput {
        lam: spec.lam,
        gam: spec.gam,
        gam_prime: spec.gam_prime,
        implied_treated: implied_lambda(spec.lam, spec.gam)?,
        implied_control: implied_lambda_control(spec.lam, spec.gam_prime).ok(),
        msm,
        demsm,
        emsm_rec,
        matching,
        demsm_within_msm: within,
    };
    let text = match a.output.format.unwrap_or(Format::Json) {
        Format::Json => to_canonical_json(&out)?,
        Format::Csv => {
            let mut rows = Vec::new();
            let reports = [Some(&out.msm), Some(&out.demsm), out.emsm_rec.as_ref()];
            for r in reports.into_iter().flatten() {
                let mut row = vec![r.model.to_string()];
                for i in [r.mu1, r.mu0, r.ate] {
                    row.extend(interval_cells(&i));
                }
                rows.push(row);
            }
            write_csv(
                &["model", "mu1_lo", "mu1_hi", "mu0_lo", "mu0_hi", "ate_lo", "ate_hi"],
                &rows,
            )?
        }
    };
    emit(&a.output, stdout, &text)?;
    Ok(())
}

// ---------------------------------------------------------------- witness

#[derive(Serialize)]
struct StratumWitness {
    id: String,
    witness: WitnessJoint,
    audit: WitnessAudit,
}

#[derive(Serialize)]
struct WitnessOutput {
    all_passed: bool,
    strata: Vec<StratumWitness>,
}

fn corrupt(w: &mut WitnessJoint) {
    // move mass between the extreme support points of Y^1 | U = 1
    let probs = &mut w.y1.given_u1;
    let last = probs.len() - 1;
    if last == 0 {
        probs[0] += 0.1;
    } else {
        let shift = 0.1_f64.min(probs[0]);
        probs[0] -= shift;
        probs[last] += shift + 0.05;
    }
    w.u_given_t0 = (w.u_given_t0 + 0.05).min(1.0);
}

pub fn cmd_witness(a: &WitnessArgs, stdout: &mut dyn Write) -> std::result::Result<(), CliError> {
    let spec = build_spec(&a.params)?;
    if !(a.tol > 0.0 && a.tol.is_finite()) {
        return Err(Error::InvalidParameter(format!("tolerance {} must be positive", a.tol)).into());
    }
    let loaded = load(&a.input)?;
    let law = loaded.law();
    check_overrides(&spec, law)?;
    if let Some(id) = &a.stratum {
        if !law.strata().iter().any(|s| &s.id == id) {
            return Err(Error::InvalidParameter(format!("unknown stratum '{id}'")).into());
        }
    }

    let mut strata = Vec::new();
    for s in law.strata() {
        if a.stratum.as_ref().is_some_and(|id| id != &s.id) {
            continue;
        }
        let missing = || Error::MissingStratumDistribution {
            stratum: s.id.clone(),
            arm: crate::error::Arm::Treated,
        };
        let d1 = s.dist1.as_ref().ok_or_else(missing)?;
        let d0 = s.dist0.as_ref().ok_or_else(|| Error::MissingStratumDistribution {
            stratum: s.id.clone(),
            arm: crate::error::Arm::Control,
        })?;
        let p = spec.for_stratum(&s.id);
        let mut witness = build_witness(d1, d0, s.propensity, p.lam, p.gam, p.gam_prime)?;
        if a.corrupt_witness {
            corrupt(&mut witness);
        }
        let audit = verify_witness(&witness, d1, d0, &p, a.tol)?;
        strata.push(StratumWitness {
            id: s.id.clone(),
            witness,
            audit,
        });
    }
    let all_passed = strata.iter().all(|s| s.audit.all_passed());
    let failures: Vec<String> = strata
        .iter()
        .flat_map(|s| s.audit.failures().map(move |c| format!("{}: {}", s.id, c.name)))
        .collect();
    let text = to_canonical_json(&WitnessOutput { all_passed, strata })?;
    emit(&a.output, stdout, &text)?;
    if all_passed {
        Ok(())
    } else {
        Err(CliError::Audit(format!(
            "witness audit failed: {}",
            failures.join(", ")
        )))
    }
}

// ---------------------------------------------------------------- check

/// Largest acceptable shortfall of the grid oracle at `resolution` for
/// outcomes spanning `range`.
pub fn grid_tolerance(resolution: f64, range: f64) -> f64 {
    2.0 * resolution * range.max(1.0)
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckRow {
    pub stratum: String,
    pub quantity: String,
    pub direction: Direction,
    pub closed_form: f64,
    pub greedy: f64,
    pub grid: Option<f64>,
    /// How far the grid oracle falls short of the closed form (nonnegative when sound).
    pub gap: Option<f64>,
    pub tolerance: f64,
    pub passed: bool,
}

fn check_rows(law: &ObservedLaw, spec: &SensitivitySpec, resolution: f64) -> Result<Vec<CheckRow>> {
    if !(resolution > 0.0 && resolution <= 0.1) {
        return Err(Error::ResolutionOutOfRange(resolution));
    }
    let mut rows = Vec::new();
    for s in law.strata() {
        let p = spec.for_stratum(&s.id);
        let arms = [
            ("nu1", s.dist1.as_ref(), implied_lambda(p.lam, p.gam), p.lam, p.gam),
            (
                "nu0",
                s.dist0.as_ref(),
                implied_lambda_control(p.lam, p.gam_prime),
                p.lam.control()?,
                p.gam_prime,
            ),
        ];
        for (quantity, dist, implied, lam, gam) in arms {
            let Some(d) = dist else { continue };
            let implied = implied?;
            let bounds = match quantity {
                "nu1" => crate::bounds::demsm_nu1_bounds(d, p.lam, p.gam)?,
                _ => crate::bounds::demsm_nu0_bounds(d, p.lam, p.gam_prime)?,
            };
            let tolerance = grid_tolerance(resolution, d.max() - d.min());
            for direction in [Direction::Max, Direction::Min] {
                let closed = match direction {
                    Direction::Max => bounds.hi,
                    Direction::Min => bounds.lo,
                };
                let greedy = greedy_density_ratio_bound(d, implied.as_pair(), direction)?;
                let grid = if gam.is_uninformative() {
                    None
                } else {
                    Some(binary_u_grid_oracle(d, lam, gam, direction, resolution)?)
                };
                let gap = grid.map(|g| match direction {
                    Direction::Max => closed - g,
                    Direction::Min => g - closed,
                });
                let scale = closed.abs().max(1.0);
                let greedy_ok = (closed - greedy).abs() <= 1e-12 * scale;
                let grid_ok = gap.is_none_or(|g| g >= -1e-12 * scale && g <= tolerance);
                rows.push(CheckRow {
                    stratum: s.id.clone(),
                    quantity: quantity.into(),
                    direction,
                    closed_form: closed,
                    greedy,
                    grid,
                    gap,
                    tolerance,
                    passed: greedy_ok && grid_ok,
                });
            }
        }
    }
    Ok(rows)
}

pub fn cmd_check(a: &CheckArgs, stdout: &mut dyn Write) -> std::result::Result<(), CliError> {
    let spec = build_spec(&a.params)?;
    if !(a.resolution > 0.0 && a.resolution <= 0.1) {
        return Err(Error::ResolutionOutOfRange(a.resolution).into());
    }
    let loaded = load(&a.input)?;
    check_overrides(&spec, loaded.law())?;
    let rows = check_rows(loaded.law(), &spec, a.resolution)?;
    let text = match a.output.format.unwrap_or(Format::Csv) {
        Format::Json => to_canonical_json(&rows)?,
        Format::Csv => {
            let opt = |x: Option<f64>| x.map(fmt_num).unwrap_or_default();
            let cells: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.stratum.clone(),
                        r.quantity.clone(),
                        match r.direction {
                            Direction::Max => "max".into(),
                            Direction::Min => "min".into(),
                        },
                        fmt_num(r.closed_form),
                        fmt_num(r.greedy),
                        opt(r.grid),
                        opt(r.gap),
                        fmt_num(r.tolerance),
                        r.passed.to_string(),
                    ]
                })
                .collect();
            write_csv(
                &[
                    "stratum",
                    "quantity",
                    "direction",
                    "closed_form",
                    "greedy",
                    "grid",
                    "gap",
                    "tolerance",
                    "passed",
                ],
                &cells,
            )?
        }
    };
    emit(&a.output, stdout, &text)?;
    let failed: Vec<String> = rows
        .iter()
        .filter(|r| !r.passed)
        .map(|r| format!("{} {} {:?}", r.stratum, r.quantity, r.direction))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Audit(format!("oracle check failed: {}", failed.join(", "))))
    }
}
