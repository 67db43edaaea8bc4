//! `critbif`: bifurcation points, solution counts, linearization checks and
//! radial branch continuation from the command line.

mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use critbif::continuation::{
    continue_from, default_bracket, detect_bifurcation, BranchArm, ContinuationOptions, Detection,
};
use critbif::symmetry::{
    gamma, harmonic_dim, harmonic_dim_oracle, is_bifurcation, kernel_report, solution_table, SolutionTable,
    SymmetryClass,
};
use critbif::systems::{beta_n, SystemFamily};
use critbif::verify::{run_verify, VerifyOptions};
use critbif::Execution;

use config::{parse_range, FamilySpec, FileConfig};
use report::{branch_csv, emit, sidecar_path, write_atomic, ReportEnvelope};

const GOLDEN_TABLE: &str = include_str!("../golden/table.json");

/// Error with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    pub fn check(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        Self { code: 3, message: message.into() }
    }
}

impl From<critbif::Error> for CliError {
    fn from(e: critbif::Error) -> Self {
        use critbif::Error::*;
        match e {
            Domain(_) | Unsupported(_) | Resource(_) => Self::usage(e.to_string()),
            _ => Self::numeric(e.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "critbif", version, about = "Bifurcation from the bubble in critical 2x2 elliptic systems")]
struct Cli {
    /// TOML file with default values; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file (JSON report, or the CSV for `continue`); stdout if absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Omit the timestamp so identical runs give identical bytes.
    #[arg(long, global = true)]
    no_meta: bool,
    /// Run sweeps on a single thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// β_n, α*_n and per-class kernel dimensions for a range of n.
    Bifpoints(BifpointsArgs),
    /// Number of bifurcating solutions over dimensions × levels.
    Table(TableArgs),
    /// Analytic residuals, discrete spectrum, Kelvin parity and oracle dims.
    Verify(VerifyArgs),
    /// Detect α*_n and follow the radial branch; writes CSV plus a JSON sidecar.
    Continue(ContinueArgs),
    /// Kernel of the linearization at β_n, per symmetry class.
    Kernel(KernelArgs),
    /// Dimension of invariant harmonics odd in m variables.
    HarmonicsDim(HarmonicsArgs),
}

#[derive(Args, Debug)]
struct FamilyArgs {
    /// gp, dh or schrodinger.
    #[arg(long)]
    family: Option<String>,
    /// Exponent of the Schrödinger family.
    #[arg(long)]
    p: Option<f64>,
}

#[derive(Args, Debug)]
struct BifpointsArgs {
    #[command(flatten)]
    family: FamilyArgs,
    #[arg(long)]
    dim: Option<usize>,
    /// Inclusive range such as 0..4.
    #[arg(long)]
    n: Option<String>,
}

#[derive(Args, Debug)]
struct TableArgs {
    /// Comma-separated dimensions [default: 3,4,5].
    #[arg(long, value_delimiter = ',')]
    dims: Option<Vec<usize>>,
    /// Inclusive range of levels [default: 2..7].
    #[arg(long)]
    n: Option<String>,
    /// Compare with the stored golden table; exit 1 on mismatch.
    #[arg(long)]
    golden: bool,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long)]
    dim: Option<usize>,
    /// Largest level checked [default: 8, at most 8].
    #[arg(long)]
    n_max: Option<usize>,
    /// Grid size of the discrete spectrum [default: 256].
    #[arg(long)]
    grid: Option<usize>,
}

#[derive(Args, Debug)]
struct ContinueArgs {
    #[command(flatten)]
    family: FamilyArgs,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    /// Steps per direction [default: 20].
    #[arg(long)]
    steps: Option<usize>,
    /// Arclength step [default: 0.02].
    #[arg(long)]
    ds: Option<f64>,
    /// Continuation grid size [default: 128].
    #[arg(long)]
    grid: Option<usize>,
    /// Detection grid size [default: 200].
    #[arg(long)]
    detect_grid: Option<usize>,
    /// Newton tolerance [default: 1e-9].
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args, Debug)]
struct KernelArgs {
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    /// Family for the α*_n column; gp and dh if absent.
    #[command(flatten)]
    family: FamilyArgs,
}

#[derive(Args, Debug)]
struct HarmonicsArgs {
    #[arg(long)]
    dim: Option<usize>,
    /// Number of odd variables.
    #[arg(long)]
    m: Option<usize>,
    /// Degree.
    #[arg(long)]
    k: Option<usize>,
    /// Also compute the exact Laplacian-nullspace dimension; exit 1 on disagreement.
    #[arg(long)]
    oracle: bool,
}

struct Context {
    file: FileConfig,
    out: Option<PathBuf>,
    meta: bool,
    mode: Execution,
}

impl Context {
    fn required<T>(&self, flag: Option<T>, file: Option<T>, name: &str) -> Result<T, CliError> {
        flag.or(file).ok_or_else(|| CliError::usage(format!("missing --{name}")))
    }

    fn family(&self, args: &FamilyArgs) -> Option<FamilySpec> {
        let name = args.family.clone().or_else(|| self.file.family.clone())?;
        Some(FamilySpec { name, p: args.p.or(self.file.p) })
    }

    fn dim(&self, flag: Option<usize>) -> Result<usize, CliError> {
        let dim = self.required(flag, self.file.dim, "dim")?;
        if dim < 3 {
            return Err(CliError::usage(format!("dimension must be at least 3 (got {dim})")));
        }
        Ok(dim)
    }

    fn report<T: Serialize>(&self, command: &str, config: serde_json::Value, payload: T) -> Result<(), CliError> {
        emit(self.out.as_deref(), &ReportEnvelope::new(command, config, payload, self.meta).to_json()?)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ClassVerdict {
    class: SymmetryClass,
    gamma: u64,
    bifurcation: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct BifRow {
    n: usize,
    beta_n: f64,
    alpha_star: f64,
    classes: Vec<ClassVerdict>,
}

fn bifpoints(ctx: &Context, args: &BifpointsArgs) -> Result<(), CliError> {
    let spec = ctx.family(&args.family).ok_or_else(|| CliError::usage("missing --family"))?;
    let dim = ctx.dim(args.dim)?;
    let range = ctx.required(args.n.clone(), ctx.file.n.clone(), "n")?;
    let ns = parse_range(&range)?;
    let fam = spec.build(dim)?;
    let mut rows = Vec::new();
    for &n in &ns {
        let mut classes = vec![SymmetryClass::Radial];
        classes.extend((1..=dim).map(SymmetryClass::SectorOdd));
        if n >= 2 {
            classes.push(SymmetryClass::Periodic(n));
        }
        let verdicts = classes
            .into_iter()
            .map(|class| {
                Ok(ClassVerdict { class, gamma: gamma(dim, n, class)?, bifurcation: is_bifurcation(dim, n, class)? })
            })
            .collect::<Result<Vec<_>, critbif::Error>>()?;
        rows.push(BifRow { n, beta_n: beta_n(dim, n), alpha_star: fam.alpha_star(n), classes: verdicts });
    }
    ctx.report("bifpoints", json!({ "family": spec, "dim": dim, "n": ns }), json!({ "family": fam, "rows": rows }))
}

#[derive(Debug, Serialize, Deserialize)]
struct GoldenCheck {
    compared: usize,
    mismatches: Vec<GoldenCell>,
}

#[derive(Debug, Serialize, Deserialize)]
struct GoldenCell {
    dim: usize,
    n: usize,
    expected: u64,
    found: u64,
}

fn golden_check(table: &SolutionTable) -> Result<GoldenCheck, CliError> {
    let golden: SolutionTable =
        serde_json::from_str(GOLDEN_TABLE).map_err(|e| CliError::numeric(format!("golden table: {e}")))?;
    let mut check = GoldenCheck { compared: 0, mismatches: Vec::new() };
    for &n in &table.ns {
        for &dim in &table.dims {
            if let (Some(expected), Some(found)) = (golden.get(dim, n), table.get(dim, n)) {
                check.compared += 1;
                if expected != found {
                    check.mismatches.push(GoldenCell { dim, n, expected, found });
                }
            }
        }
    }
    Ok(check)
}

fn table(ctx: &Context, args: &TableArgs) -> Result<(), CliError> {
    let dims = args.dims.clone().or_else(|| ctx.file.dims.clone()).unwrap_or_else(|| vec![3, 4, 5]);
    let ns = parse_range(&args.n.clone().or_else(|| ctx.file.n.clone()).unwrap_or_else(|| "2..7".into()))?;
    let golden = args.golden || ctx.file.golden.unwrap_or(false);
    if dims.is_empty() {
        return Err(CliError::usage("empty --dims"));
    }
    if let Some(&d) = dims.iter().find(|&&d| d < 3) {
        return Err(CliError::usage(format!("dimension must be at least 3 (got {d})")));
    }
    let table = solution_table(&dims, &ns, ctx.mode)?;
    let check = if golden { Some(golden_check(&table)?) } else { None };
    let failed = check.as_ref().is_some_and(|c| !c.mismatches.is_empty());
    ctx.report(
        "table",
        json!({ "dims": dims, "n": ns, "golden": golden }),
        json!({ "table": table, "golden": check }),
    )?;
    if failed {
        return Err(CliError::check("solution table differs from the golden table"));
    }
    Ok(())
}

fn verify(ctx: &Context, args: &VerifyArgs) -> Result<(), CliError> {
    let dim = ctx.dim(args.dim)?;
    let mut opts = VerifyOptions::new(dim, args.n_max.or(ctx.file.n_max).unwrap_or(8));
    if let Some(g) = args.grid.or(ctx.file.grid) {
        opts.grid_size = g;
    }
    let report = run_verify(&opts, ctx.mode)?;
    let passed = report.passed();
    ctx.report("verify", json!({ "dim": dim, "n_max": opts.n_max, "grid": opts.grid_size }), &report)?;
    if !passed {
        let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        return Err(CliError::check(format!("verification failed: {}", failed.join(", "))));
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct ArmSummary {
    direction: i32,
    points: usize,
    termination: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ContinuePayload {
    family: String,
    dim: usize,
    n: usize,
    kelvin_sign: Option<i32>,
    options: ContinuationOptions,
    bracket: Option<(f64, f64)>,
    detection: Option<Detection>,
    arms: Vec<ArmSummary>,
    csv: Option<String>,
    error: Option<String>,
}

fn summarize(arms: &[BranchArm]) -> Vec<ArmSummary> {
    arms.iter()
        .map(|a| ArmSummary { direction: a.direction, points: a.points.len(), termination: a.termination.clone() })
        .collect()
}

fn continue_cmd(ctx: &Context, args: &ContinueArgs) -> Result<(), CliError> {
    let spec = ctx.family(&args.family).ok_or_else(|| CliError::usage("missing --family"))?;
    let dim = ctx.dim(args.dim)?;
    let n_text = args.n.map(|n| n.to_string()).or_else(|| ctx.file.n.clone());
    let n: usize = ctx
        .required(n_text, None, "n")?
        .trim()
        .parse()
        .map_err(|_| CliError::usage("--n must be a single non-negative integer"))?;
    let defaults = ContinuationOptions::default();
    let opts = ContinuationOptions {
        steps: args.steps.or(ctx.file.steps).unwrap_or(defaults.steps),
        ds: args.ds.or(ctx.file.ds).unwrap_or(defaults.ds),
        grid_size: args.grid.or(ctx.file.grid).unwrap_or(defaults.grid_size),
        detect_grid_size: args.detect_grid.or(ctx.file.detect_grid).unwrap_or(defaults.detect_grid_size),
        tol: args.tol.or(ctx.file.tol).unwrap_or(defaults.tol),
        ..defaults
    };
    if !(opts.ds > 0.0 && opts.ds.is_finite()) || !(opts.tol > 0.0) || opts.steps == 0 {
        return Err(CliError::usage("--ds and --tol must be positive and --steps at least 1"));
    }
    let fam = spec.build(dim)?;
    let config = json!({ "family": spec, "dim": dim, "n": n, "options": opts });
    let mut payload = ContinuePayload {
        family: fam.to_string(),
        dim,
        n,
        kelvin_sign: None,
        options: opts,
        bracket: None,
        detection: None,
        arms: Vec::new(),
        csv: ctx.out.as_ref().map(|p| p.display().to_string()),
        error: None,
    };

    let outcome = (|| -> Result<critbif::continuation::Branch, critbif::Error> {
        let bracket = default_bracket(&fam, n)?;
        payload.bracket = Some(bracket);
        let detection = detect_bifurcation(&fam, n, bracket, opts.detect_grid_size)?;
        payload.detection = Some(detection.clone());
        continue_from(&fam, n, detection, &opts)
    })();

    let result = match outcome {
        Ok(branch) => {
            payload.kelvin_sign = Some(branch.kelvin_sign);
            payload.arms = summarize(&branch.arms);
            emit(ctx.out.as_deref(), &branch_csv(&branch))?;
            if branch.is_complete() {
                Ok(())
            } else {
                let reasons: Vec<String> = branch.arms.iter().filter_map(|a| a.termination.clone()).collect();
                payload.error = Some(reasons.join("; "));
                Err(CliError::numeric(format!("branch terminated early: {}", reasons.join("; "))))
            }
        }
        Err(e) => {
            payload.error = Some(e.to_string());
            Err(CliError::from(e))
        }
    };
    if let Some(csv) = &ctx.out {
        let env = ReportEnvelope::new("continue", config, &payload, ctx.meta);
        write_atomic(&sidecar_path(csv), &env.to_json()?)?;
    }
    result
}

fn kernel(ctx: &Context, args: &KernelArgs) -> Result<(), CliError> {
    let dim = ctx.dim(args.dim)?;
    let n_text = args.n.map(|n| n.to_string()).or_else(|| ctx.file.n.clone());
    let n: usize = ctx
        .required(n_text, None, "n")?
        .trim()
        .parse()
        .map_err(|_| CliError::usage("--n must be a single non-negative integer"))?;
    let families: Vec<SystemFamily> = match ctx.family(&args.family) {
        Some(spec) => vec![spec.build(dim)?],
        None => vec![SystemFamily::gross_pitaevskii(dim)?, SystemFamily::druet_hebey(dim)?],
    };
    let report = kernel_report(dim, n, &families)?;
    ctx.report("kernel", json!({ "dim": dim, "n": n, "families": families }), &report)
}

#[derive(Debug, Serialize, Deserialize)]
struct HarmonicsPayload {
    dim: usize,
    m: usize,
    k: usize,
    closed_form: u64,
    oracle: Option<u64>,
    agree: Option<bool>,
}

fn harmonics(ctx: &Context, args: &HarmonicsArgs) -> Result<(), CliError> {
    let dim = ctx.dim(args.dim)?;
    let m = ctx.required(args.m, ctx.file.m, "m")?;
    let k = ctx.required(args.k, ctx.file.k, "k")?;
    let with_oracle = args.oracle || ctx.file.oracle.unwrap_or(false);
    let closed_form = harmonic_dim(dim, k, SymmetryClass::SectorOdd(m))?;
    let oracle = if with_oracle { Some(harmonic_dim_oracle(dim, k, m)?) } else { None };
    let agree = oracle.map(|o| o == closed_form);
    ctx.report(
        "harmonics-dim",
        json!({ "dim": dim, "m": m, "k": k, "oracle": with_oracle }),
        HarmonicsPayload { dim, m, k, closed_form, oracle, agree },
    )?;
    if agree == Some(false) {
        return Err(CliError::check(format!("closed form {closed_form} differs from oracle {}", oracle.unwrap())));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let ctx = Context {
        out: cli.out.clone().or_else(|| file.out.clone().map(PathBuf::from)),
        meta: !(cli.no_meta || file.no_meta.unwrap_or(false)),
        mode: if cli.sequential { Execution::Sequential } else { Execution::Parallel },
        file,
    };
    match &cli.command {
        Command::Bifpoints(a) => bifpoints(&ctx, a),
        Command::Table(a) => table(&ctx, a),
        Command::Verify(a) => verify(&ctx, a),
        Command::Continue(a) => continue_cmd(&ctx, a),
        Command::Kernel(a) => kernel(&ctx, a),
        Command::HarmonicsDim(a) => harmonics(&ctx, a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
