//! Command-line front end: `estimate`, `simulate` and `bound`.
//!
//! Result files are written only when `--out` is given. A CSV at `PATH` is
//! accompanied by `PATH.json` (full report) and `PATH.manifest.json`
//! (parameters, seeds, version, constants checksum and timestamps), with
//! the extension of `PATH` replaced.

mod manifest;

pub use manifest::{sidecar_paths, RunManifest};

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::error::{DidError, Result};
use crate::estimators::{estimate, AttResult, Method};
use crate::panel::{build_design, load_csv, overlap_report, ColumnMap, CovariateSpec, DesignMatrix, OverlapReport};
use crate::simulation::{
    constants_checksum, efficiency_bound, run_study, run_study_with_threads, DgpConfig, StandardizationConstants,
    StudyConfig, StudyReport, Z4Form, DEFAULT_CONSTANTS_TOML, X1X4_CONSTANTS_TOML,
};

#[derive(Debug, Parser)]
#[command(name = "did-cbps", version, about = "Difference-in-differences ATT estimation with covariate balancing propensity scores")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the ATT on a two-period panel stored as CSV.
    Estimate(EstimateArgs),
    /// Run a Monte Carlo study of the four estimators under one design.
    Simulate(SimulateArgs),
    /// Monte Carlo estimate of the semiparametric efficiency bound.
    Bound(BoundArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Or,
    Ipw,
    Aipw,
    Cbps,
    All,
}

impl MethodArg {
    fn methods(self) -> Vec<Method> {
        match self {
            MethodArg::Or => vec![Method::Or],
            MethodArg::Ipw => vec![Method::Ipw],
            MethodArg::Aipw => vec![Method::Aipw],
            MethodArg::Cbps => vec![Method::Cbps],
            MethodArg::All => Method::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Z4FormArg {
    #[value(name = "x2+x4")]
    X2X4,
    #[value(name = "x1+x4")]
    X1X4,
}

impl From<Z4FormArg> for Z4Form {
    fn from(a: Z4FormArg) -> Self {
        match a {
            Z4FormArg::X2X4 => Z4Form::X2X4,
            Z4FormArg::X1X4 => Z4Form::X1X4,
        }
    }
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Panel CSV with outcome, treatment and covariate columns.
    #[arg(long)]
    pub data: PathBuf,
    /// Covariate specification file.
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long, value_enum)]
    pub method: MethodArg,
    #[arg(long, default_value = "y0")]
    pub y0: String,
    #[arg(long, default_value = "y1")]
    pub y1: String,
    #[arg(long, default_value = "d")]
    pub d: String,
    /// CSV result path; JSON and manifest sidecars are written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConstantsArgs {
    /// Standardization constants file (defaults to the shipped constants).
    #[arg(long, conflicts_with = "z4_form")]
    pub constants: Option<PathBuf>,
    /// Form of the fourth raw covariate when using shipped constants.
    #[arg(long, value_enum, default_value = "x2+x4")]
    pub z4_form: Z4FormArg,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=5))]
    pub dgp: u8,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (defaults to all cores); results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Oracle draws for the efficiency bound shown in the header; 0 skips it.
    #[arg(long, default_value_t = 1_000_000)]
    pub bound_draws: usize,
    /// DGP5 propensity misspecification magnitude (default n^-1/2).
    #[arg(long)]
    pub xi: Option<f64>,
    /// DGP5 outcome misspecification magnitude (default n^-1/2).
    #[arg(long)]
    pub delta: Option<f64>,
    #[command(flatten)]
    pub constants: ConstantsArgs,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=5))]
    pub dgp: u8,
    #[arg(long, default_value_t = 1_000_000)]
    pub draws: usize,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub constants: ConstantsArgs,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code: 0 success, 2 invalid input, 3 numerical failure,
/// 4 I/O.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match execute(&cli.command, &mut out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = out.flush();
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Runs a parsed command, writing the human-readable report to `out`.
pub fn execute(command: &Command, out: &mut dyn Write) -> Result<()> {
    let text = match command {
        Command::Estimate(a) => cmd_estimate(a)?,
        Command::Simulate(a) => cmd_simulate(a)?,
        Command::Bound(a) => cmd_bound(a)?,
    };
    out.write_all(text.as_bytes()).map_err(|e| DidError::io("<stdout>", e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| DidError::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| DidError::io(path, e))
}

fn resolve_constants(args: &ConstantsArgs) -> Result<(StandardizationConstants, String)> {
    match &args.constants {
        Some(path) => StandardizationConstants::load(path),
        None => {
            let text = match Z4Form::from(args.z4_form) {
                Z4Form::X2X4 => DEFAULT_CONSTANTS_TOML,
                Z4Form::X1X4 => X1X4_CONSTANTS_TOML,
            };
            Ok((StandardizationConstants::from_toml(text)?, text.to_string()))
        }
    }
}

fn constants_argv(args: &ConstantsArgs) -> Vec<String> {
    match &args.constants {
        Some(p) => vec!["--constants".into(), p.display().to_string()],
        None => vec!["--z4-form".into(), args.z4_form.to_possible_value().expect("named").get_name().into()],
    }
}

struct MethodReport {
    fit: AttResult,
    overlap: Option<OverlapReport>,
}

fn overlap_for(fit: &AttResult, x: &DesignMatrix, d: &[bool]) -> Result<Option<OverlapReport>> {
    fit.propensity.as_ref().map(|p| overlap_report(&p.fitted(x), d)).transpose()
}

/// Estimates the ATT with the requested methods on a CSV panel.
pub fn cmd_estimate(a: &EstimateArgs) -> Result<String> {
    let mut manifest = RunManifest::new(
        "estimate",
        vec![],
        json!({
            "data": a.data, "spec": a.spec, "method": format!("{:?}", a.method).to_lowercase(),
            "y0": a.y0, "y1": a.y1, "d": a.d,
        }),
    );
    manifest.argv = [
        "estimate", "--data", &a.data.display().to_string(), "--spec", &a.spec.display().to_string(),
        "--method", &format!("{:?}", a.method).to_lowercase(), "--y0", &a.y0, "--y1", &a.y1, "--d", &a.d,
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();

    let map = ColumnMap { y0: a.y0.clone(), y1: a.y1.clone(), d: a.d.clone() };
    let ds = load_csv(&a.data, &map)?;
    let spec = CovariateSpec::load(&a.spec)?;
    let x = build_design(&ds, &spec)?;
    let dy = ds.delta_y();
    let reports = a
        .method
        .methods()
        .into_iter()
        .map(|m| {
            let fit = estimate(m, &x, &dy, ds.d())?;
            let overlap = overlap_for(&fit, &x, ds.d())?;
            Ok(MethodReport { fit, overlap })
        })
        .collect::<Result<Vec<_>>>()?;

    let table = estimate_table(&reports, ds.n(), ds.n_treated(), x.column_names());
    if let Some(csv_path) = &a.out {
        let (json_path, manifest_path) = sidecar_paths(csv_path);
        write_text(csv_path, &estimate_csv(&reports))?;
        let body = json!({
            "n": ds.n(),
            "n_treated": ds.n_treated(),
            "columns": x.column_names(),
            "results": reports.iter().map(estimate_json).collect::<Vec<_>>(),
        });
        write_text(&json_path, &(serde_json::to_string_pretty(&body).expect("serializes") + "\n"))?;
        manifest.outputs = vec![csv_path.clone(), json_path];
        manifest.write(&manifest_path)?;
    }
    Ok(table)
}

fn estimate_table(reports: &[MethodReport], n: usize, n_treated: usize, columns: &[String]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "n = {n} ({n_treated} treated, {} control), covariates: {}", n - n_treated, columns.join(", "));
    let _ = writeln!(s);
    let _ = writeln!(s, "{:<6}{:>14}{:>12}{:>14}{:>14}{:>16}", "", "ATT", "SE", "CI low", "CI high", "Asy.V");
    for r in reports {
        let f = &r.fit;
        let _ = writeln!(
            s,
            "{:<6}{:>14.3}{:>12.3}{:>14.3}{:>14.3}{:>16.3}",
            f.method.label(),
            f.tau,
            f.se,
            f.ci_low,
            f.ci_high,
            f.asy_var
        );
    }
    for r in reports {
        let (Some(p), Some(o)) = (&r.fit.propensity, &r.overlap) else { continue };
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "{} propensity ({}): {} after {} iterations, max residual {:.2e}{}",
            r.fit.method.label(),
            serde_json::to_value(p.method).expect("serializes").as_str().unwrap_or_default(),
            if p.converged { "converged" } else { "not converged" },
            p.iterations,
            p.residual_norm,
            if p.clamped { ", linear predictor clamped" } else { "" }
        );
        let _ = writeln!(
            s,
            "  fitted propensity in [{:.4}, {:.4}], {} controls above 0.99, max control odds weight {:.3}",
            o.min_pi, o.max_pi, o.extreme_controls, o.max_odds_weight
        );
    }
    s
}

const ESTIMATE_CSV_HEADER: [&str; 16] = [
    "method", "tau", "se", "asy_var", "ci_low", "ci_high", "n", "propensity", "converged", "iterations",
    "residual_norm", "min_pi", "max_pi", "extreme_controls", "max_odds_weight", "outcome",
];

fn estimate_csv(reports: &[MethodReport]) -> String {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(ESTIMATE_CSV_HEADER).expect("in-memory write");
    let opt = |v: Option<String>| v.unwrap_or_default();
    for r in reports {
        let f = &r.fit;
        let p = f.propensity.as_ref();
        let o = r.overlap.as_ref();
        wtr.write_record([
            f.method.label().to_string(),
            f.tau.to_string(),
            f.se.to_string(),
            f.asy_var.to_string(),
            f.ci_low.to_string(),
            f.ci_high.to_string(),
            f.n().to_string(),
            opt(p.map(|p| serde_json::to_value(p.method).expect("serializes").as_str().unwrap_or_default().to_string())),
            opt(p.map(|p| p.converged.to_string())),
            opt(p.map(|p| p.iterations.to_string())),
            opt(p.map(|p| p.residual_norm.to_string())),
            opt(o.map(|o| o.min_pi.to_string())),
            opt(o.map(|o| o.max_pi.to_string())),
            opt(o.map(|o| o.extreme_controls.to_string())),
            opt(o.map(|o| o.max_odds_weight.to_string())),
            opt(f.outcome.as_ref().map(|g| serde_json::to_value(g.kind).expect("serializes").as_str().unwrap_or_default().to_string())),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("utf-8")
}

fn estimate_json(r: &MethodReport) -> serde_json::Value {
    let f = &r.fit;
    json!({
        "method": f.method,
        "tau": f.tau,
        "se": f.se,
        "asy_var": f.asy_var,
        "ci_low": f.ci_low,
        "ci_high": f.ci_high,
        "n": f.n(),
        "propensity": f.propensity.as_ref().map(|p| json!({
            "method": p.method,
            "beta": p.beta.iter().collect::<Vec<_>>(),
            "converged": p.converged,
            "iterations": p.iterations,
            "residual_norm": p.residual_norm,
            "clamped": p.clamped,
        })),
        "outcome": f.outcome.as_ref().map(|g| json!({
            "kind": g.kind,
            "gamma": g.gamma.iter().collect::<Vec<_>>(),
            "normal_residual": g.normal_residual,
        })),
        "overlap": r.overlap,
    })
}

/// Runs a Monte Carlo study and renders it as a table.
pub fn cmd_simulate(a: &SimulateArgs) -> Result<String> {
    let dgp = match (a.xi, a.delta) {
        (None, None) => DgpConfig::new(a.dgp, a.n)?,
        (xi, delta) => {
            let default = DgpConfig::new(a.dgp, a.n)?;
            DgpConfig::with_misspecification(a.dgp, a.n, xi.unwrap_or(default.xi), delta.unwrap_or(default.delta))?
        }
    };
    let (consts, consts_text) = resolve_constants(&a.constants)?;
    let mut cfg = StudyConfig::new(dgp, a.reps, a.seed);
    cfg.bound_draws = (a.bound_draws > 0).then_some(a.bound_draws);

    let mut argv: Vec<String> = vec!["simulate".into()];
    for (flag, value) in [
        ("--dgp", dgp.dgp_id.to_string()),
        ("--n", dgp.n.to_string()),
        ("--reps", a.reps.to_string()),
        ("--seed", a.seed.to_string()),
        ("--bound-draws", a.bound_draws.to_string()),
        ("--xi", dgp.xi.to_string()),
        ("--delta", dgp.delta.to_string()),
    ] {
        if dgp.dgp_id == 5 || !matches!(flag, "--xi" | "--delta") {
            argv.extend([flag.to_string(), value]);
        }
    }
    argv.extend(constants_argv(&a.constants));
    let mut manifest = RunManifest::new(
        "simulate",
        argv,
        json!({
            "dgp": dgp.dgp_id, "n": dgp.n, "reps": a.reps, "seed": a.seed, "xi": dgp.xi, "delta": dgp.delta,
            "bound_draws": a.bound_draws, "threads": a.threads, "constants": a.constants.constants,
            "z4_form": consts.z4_form,
        }),
    );
    manifest.seeds = vec![a.seed];
    manifest.constants_sha256 = Some(constants_checksum(&consts_text));

    let report = match a.threads {
        Some(t) => run_study_with_threads(&cfg, &consts, t)?,
        None => run_study(&cfg, &consts)?,
    };
    let table = study_table(&report);
    if let Some(csv_path) = &a.out {
        let (json_path, manifest_path) = sidecar_paths(csv_path);
        let mut buf = Vec::new();
        report.write_csv(&mut buf).map_err(|e| DidError::io(csv_path, e))?;
        write_text(csv_path, std::str::from_utf8(&buf).expect("utf-8"))?;
        write_text(&json_path, &(serde_json::to_string_pretty(&report).expect("serializes") + "\n"))?;
        manifest.outputs = vec![csv_path.clone(), json_path];
        manifest.write(&manifest_path)?;
    }
    Ok(table)
}

/// Renders a study report with the metric columns of a published
/// simulation table.
pub fn study_table(report: &StudyReport) -> String {
    let c = &report.config;
    let mut s = String::new();
    let _ = writeln!(s, "DGP{}: {}", c.dgp.dgp_id, c.dgp.description());
    let _ = write!(s, "n = {}, {} replications, seed {}", c.dgp.n, c.reps, c.seed);
    if c.dgp.dgp_id == 5 {
        let _ = write!(s, ", xi = {:.4}, delta = {:.4}", c.dgp.xi, c.dgp.delta);
    }
    let _ = writeln!(s);
    if let Some(b) = &report.efficiency_bound {
        let _ = writeln!(s, "Semiparametric efficiency bound: {:.3} (MC se {:.3}, {} draws)", b.value, b.mc_se, b.draws);
    }
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "{:<6}{:>10}{:>10}{:>10}{:>12}{:>8}{:>10}{:>8}",
        "", "Av.Bias", "Med.Bias", "RMSE", "Asy.V", "Cover", "CIL", "Failed"
    );
    for r in &report.rows {
        let _ = writeln!(
            s,
            "{:<6}{:>10.3}{:>10.3}{:>10.3}{:>12.3}{:>8.3}{:>10.3}{:>8}",
            r.method.label(),
            r.av_bias,
            r.med_bias,
            r.rmse,
            r.asy_v,
            r.cover,
            r.cil,
            r.failures
        );
    }
    if report.clamped_propensities > 0 {
        let _ = writeln!(s, "\n{} simulated propensities were clamped to [1e-6, 1 - 1e-6]", report.clamped_propensities);
    }
    s
}

/// Estimates the efficiency bound of one design.
pub fn cmd_bound(a: &BoundArgs) -> Result<String> {
    let (consts, _) = resolve_constants(&a.constants)?;
    let dgp = DgpConfig::new(a.dgp, 1000)?;
    let b = efficiency_bound(&dgp, a.draws, a.seed, &consts)?;
    Ok(format!(
        "DGP{}: {}\nSemiparametric efficiency bound: {:.4} (MC se {:.4}, {} draws, seed {})\n",
        dgp.dgp_id,
        dgp.description(),
        b.value,
        b.mc_se,
        b.draws,
        b.seed
    ))
}
