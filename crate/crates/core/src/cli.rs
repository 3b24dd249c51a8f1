//! Command-line front end: argument parsing, run configuration and reports.
//!
//! Every subcommand prints one report. With `--format json` (the default)
//! the report is a JSON object with keys `command`, `config`, `seed`,
//! `status` and either `result` or `error`/`partial`. Numbers carry 12
//! significant digits; non-finite values are printed as strings.
//!
//! Exit codes: 0 on success, 1 on numeric failure (with a partial report on
//! standard output), 2 on input or usage errors (message on standard error).

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::divergence::{divergence, DivergenceKind};
use crate::error::Error;
use crate::estimate::{maximize_likelihood, solve_estimating_equation_with, Estimator, EstimatorKind, SolveReport};
use crate::family::{FamilyKind, FamilySpec};
use crate::io;
use crate::measures::Alpha;
use crate::oracle::{grid_forward_min, grid_reverse_min, SimplexGrid, ThetaGrid};
use crate::projection::{
    fit_forward_form, forward_b_projection, pythagorean_gap, reverse_b_projection, solve_projection_equation_with,
    ProjectionKind,
};
use crate::sampling::{generate_sample, random_linear_members, Contamination};
use crate::solver::NewtonOptions;
use crate::sufficiency::{factorization_check, sufficient_statistic};

const PYTHAGORAS_LOWER_TOL: f64 = 1e-10;
const PYTHAGORAS_EQUALITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Text,
}

/// Tolerances, iteration cap, seed and output format for one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub residual_tol: f64,
    pub equivalence_tol: f64,
    pub oracle_cell: f64,
    pub max_iterations: usize,
    pub seed: u64,
    pub format: OutputFormat,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            residual_tol: 1e-10,
            equivalence_tol: 1e-6,
            oracle_cell: 0.02,
            max_iterations: 200,
            seed: 0,
            format: OutputFormat::Json,
        }
    }
}

impl RunConfig {
    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_kv(&mut self, text: &str) -> Result<(), Error> {
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Input(format!("config line {}: expected key = value", no + 1)))?;
            let value = value.trim();
            let bad = || Error::Input(format!("config line {}: bad value `{value}`", no + 1));
            match key.trim() {
                "residual_tol" => self.residual_tol = value.parse().map_err(|_| bad())?,
                "equivalence_tol" => self.equivalence_tol = value.parse().map_err(|_| bad())?,
                "oracle_cell" => self.oracle_cell = value.parse().map_err(|_| bad())?,
                "max_iterations" => self.max_iterations = value.parse().map_err(|_| bad())?,
                "seed" => self.seed = value.parse().map_err(|_| bad())?,
                "format" => {
                    self.format = OutputFormat::from_str(value, true)
                        .map_err(|_| Error::Input(format!("config line {}: bad format `{value}`", no + 1)))?
                }
                other => return Err(Error::Input(format!("config line {}: unknown key `{other}`", no + 1))),
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), Error> {
        let positive = [self.residual_tol, self.equivalence_tol, self.oracle_cell];
        if positive.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::Input("tolerances must be finite and positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::Input("max_iterations must be at least 1".into()));
        }
        Ok(())
    }

    fn newton(&self) -> NewtonOptions {
        NewtonOptions { tol: self.residual_tol, max_iter: self.max_iterations, ..NewtonOptions::default() }
    }
}

#[derive(Debug, Parser)]
#[command(name = "mindiv", version, about = "Minimum-divergence estimation and projection on finite alphabets")]
pub struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalOpts {
    /// Report format.
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,
    /// key = value file; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    residual_tol: Option<f64>,
    #[arg(long, global = true)]
    equivalence_tol: Option<f64>,
    /// Default parameter-grid step of the reverse oracle.
    #[arg(long, global = true)]
    oracle_cell: Option<f64>,
    #[arg(long, global = true)]
    max_iterations: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Divergence between two distributions.
    Divergence {
        #[arg(long, value_parser = ["kl", "renyi", "dpd", "rae"])]
        kind: String,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long)]
        p: PathBuf,
        #[arg(long)]
        q: PathBuf,
    },
    /// Parametric family operations.
    #[command(subcommand)]
    Family(FamilyCmd),
    /// Minimum-divergence estimate of a family parameter.
    Estimate {
        #[arg(long, value_parser = ["mle", "hellinger", "basu", "jones"])]
        kind: String,
        /// Defaults to the family's alpha.
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        family: PathBuf,
        #[arg(long)]
        sample: PathBuf,
        #[arg(long, value_enum, default_value_t = RouteArg::Eq)]
        route: RouteArg,
        /// Comma-separated starting parameter (default: zeros).
        #[arg(long)]
        init: Option<String>,
    },
    /// Forward and reverse projections.
    #[command(subcommand)]
    Project(ProjectCmd),
    /// Numerical checks of projection identities.
    #[command(subcommand)]
    Verify(VerifyCmd),
    /// Generalized sufficient statistic of a sample.
    Suffstat {
        #[arg(long, value_parser = ["exp", "bpow", "mpow", "aexp"])]
        model: String,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        family: PathBuf,
        #[arg(long)]
        sample: PathBuf,
    },
    /// Likelihood factorization check for two samples.
    Suffcheck {
        #[arg(long, value_parser = ["exp", "bpow", "mpow", "aexp"])]
        model: String,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        family: PathBuf,
        #[arg(long)]
        sample_a: PathBuf,
        #[arg(long)]
        sample_b: PathBuf,
        /// Per-coordinate parameter grid `lo:hi:points`.
        #[arg(long, default_value = "-1:1:101", allow_hyphen_values = true)]
        grid: String,
    },
    /// Brute-force grid minimizers.
    #[command(subcommand)]
    Oracle(OracleCmd),
    /// Seeded sample from a family member, optionally contaminated.
    Sample {
        #[arg(long)]
        family: PathBuf,
        /// Comma-separated parameter.
        #[arg(long, allow_hyphen_values = true)]
        theta: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.0)]
        contamination_rate: f64,
        /// Label that replaces contaminated draws.
        #[arg(long)]
        outlier: Option<String>,
        /// Write the sample file here instead of embedding it in the report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RouteArg {
    Eq,
    Lik,
    Both,
}

#[derive(Debug, Subcommand)]
enum FamilyCmd {
    /// Member P_theta and its normalizer.
    Eval {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        theta: String,
    },
}

#[derive(Debug, Subcommand)]
enum ProjectCmd {
    /// Forward B_alpha projection of Q onto a linear family.
    Forward {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        q: PathBuf,
        #[arg(long)]
        linear: PathBuf,
    },
    /// Reverse B_alpha projection of a sample onto a non-normalized power-law family.
    Reverse {
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        family: PathBuf,
        #[arg(long)]
        sample: PathBuf,
    },
    /// Solve the projection equation matched to the family.
    Equation {
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        family: PathBuf,
        #[arg(long)]
        sample: PathBuf,
        #[arg(long)]
        init: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
enum VerifyCmd {
    /// Pythagorean relation at random members of the linear family.
    Pythagoras {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        q: PathBuf,
        #[arg(long)]
        linear: PathBuf,
        #[arg(long, default_value_t = 20)]
        trials: usize,
    },
}

#[derive(Debug, Subcommand)]
enum OracleCmd {
    /// Grid minimizer of D(., Q), optionally over a linear family.
    Forward {
        #[arg(long, value_parser = ["kl", "renyi", "dpd", "rae"])]
        kind: String,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long)]
        q: PathBuf,
        #[arg(long)]
        linear: Option<PathBuf>,
        #[arg(long, default_value_t = 60)]
        resolution: usize,
    },
    /// Parameter-grid minimizer of D(P^, P_theta).
    Reverse {
        #[arg(long, value_parser = ["kl", "renyi", "dpd", "rae"])]
        kind: String,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        family: PathBuf,
        #[arg(long)]
        sample: PathBuf,
        /// Per-coordinate box `lo:hi`.
        #[arg(long = "box", default_value = "-3:3", allow_hyphen_values = true)]
        bounds: String,
        /// Grid step (default: the configured oracle cell).
        #[arg(long)]
        step: Option<f64>,
    },
}

/// Exit code and the two output streams of one invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dispatch {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

struct Failure {
    error: Error,
    partial: Map<String, Value>,
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        let mut partial = Map::new();
        if let Error::NoConvergence { iterations, residual, best_theta } = &error {
            partial.insert("iterations".into(), json!(iterations));
            partial.insert("residual".into(), num(*residual));
            partial.insert("best_theta".into(), nums(best_theta));
        }
        Self { error, partial }
    }
}

impl Failure {
    fn with(mut self, key: &str, value: Value) -> Self {
        self.partial.insert(key.into(), value);
        self
    }
}

type Run = Result<Value, Failure>;

/// Parses `argv` (program name first), runs the subcommand and renders its report.
pub fn dispatch<I, T>(argv: I) -> Dispatch
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            let ok = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            return if ok {
                Dispatch { code: 0, stdout: text, stderr: String::new() }
            } else {
                Dispatch { code: 2, stdout: String::new(), stderr: text }
            };
        }
    };
    let config = match resolve_config(&cli.global) {
        Ok(c) => c,
        Err(e) => return input_failure(&e),
    };
    let name = command_name(&cli.command);
    match run(&cli.command, &config) {
        Ok(result) => {
            let mut report = header(name, &config);
            report.insert("status".into(), json!("ok"));
            report.insert("result".into(), result);
            Dispatch { code: 0, stdout: render(Value::Object(report), config.format), stderr: String::new() }
        }
        Err(f) if is_input(&f.error) => input_failure(&f.error),
        Err(f) => {
            let mut report = header(name, &config);
            report.insert("status".into(), json!("failed"));
            report.insert("error".into(), json!(f.error.to_string()));
            report.insert("partial".into(), Value::Object(f.partial));
            Dispatch {
                code: 1,
                stdout: render(Value::Object(report), config.format),
                stderr: format!("error: {}\n", f.error),
            }
        }
    }
}

fn is_input(e: &Error) -> bool {
    e.is_input_error() || matches!(e, Error::Infeasible)
}

fn input_failure(e: &Error) -> Dispatch {
    Dispatch { code: 2, stdout: String::new(), stderr: format!("error: {e}\n") }
}

fn resolve_config(g: &GlobalOpts) -> Result<RunConfig, Error> {
    let mut c = RunConfig::default();
    if let Some(path) = &g.config {
        let text =
            fs::read_to_string(path).map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
        c.apply_kv(&text)?;
    }
    if let Some(v) = g.format {
        c.format = v;
    }
    if let Some(v) = g.seed {
        c.seed = v;
    }
    if let Some(v) = g.residual_tol {
        c.residual_tol = v;
    }
    if let Some(v) = g.equivalence_tol {
        c.equivalence_tol = v;
    }
    if let Some(v) = g.oracle_cell {
        c.oracle_cell = v;
    }
    if let Some(v) = g.max_iterations {
        c.max_iterations = v;
    }
    c.validate()?;
    Ok(c)
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Divergence { .. } => "divergence",
        Command::Family(FamilyCmd::Eval { .. }) => "family eval",
        Command::Estimate { .. } => "estimate",
        Command::Project(ProjectCmd::Forward { .. }) => "project forward",
        Command::Project(ProjectCmd::Reverse { .. }) => "project reverse",
        Command::Project(ProjectCmd::Equation { .. }) => "project equation",
        Command::Verify(VerifyCmd::Pythagoras { .. }) => "verify pythagoras",
        Command::Suffstat { .. } => "suffstat",
        Command::Suffcheck { .. } => "suffcheck",
        Command::Oracle(OracleCmd::Forward { .. }) => "oracle forward",
        Command::Oracle(OracleCmd::Reverse { .. }) => "oracle reverse",
        Command::Sample { .. } => "sample",
    }
}

fn header(name: &str, config: &RunConfig) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("command".into(), json!(name));
    m.insert("seed".into(), json!(config.seed));
    m.insert("config".into(), serde_json::to_value(config).unwrap_or(Value::Null));
    m
}

/// `x` rounded to 12 significant digits.
pub fn round12(x: f64) -> f64 {
    if x.is_finite() {
        let r: f64 = format!("{x:.11e}").parse().unwrap_or(x);
        if r == 0.0 {
            0.0
        } else {
            r
        }
    } else {
        x
    }
}

fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(round12(x))
    } else if x.is_nan() {
        json!("nan")
    } else if x > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| num(x)).collect())
}

fn round_all(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n.as_f64().map(round12).and_then(serde_json::Number::from_f64) {
                *n = r;
            }
        }
        Value::Array(a) => a.iter_mut().for_each(round_all),
        Value::Object(o) => o.values_mut().for_each(round_all),
        _ => {}
    }
}

fn to_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

fn render(mut report: Value, format: OutputFormat) -> String {
    round_all(&mut report);
    match format {
        OutputFormat::Json => serde_json::to_string_pretty(&report).unwrap_or_default() + "\n",
        OutputFormat::Text => {
            let mut out = String::new();
            if let Value::Object(top) = report {
                for (key, value) in top {
                    match value {
                        Value::Object(inner) => {
                            for (k, v) in inner {
                                out.push_str(&format!("{key}.{k}: {}\n", scalar_text(&v)));
                            }
                        }
                        v => out.push_str(&format!("{key}: {}\n", scalar_text(&v))),
                    }
                }
            }
            out
        }
    }
}

fn scalar_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn parse_vector(text: &str, what: &str) -> Result<Vec<f64>, Error> {
    text.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| Error::Input(format!("{what}: `{t}` is not a number"))))
        .collect()
}

fn parse_theta(text: &str, k: usize) -> Result<Vec<f64>, Error> {
    let theta = parse_vector(text, "theta")?;
    if theta.len() != k {
        return Err(Error::Dimension(format!("theta has {} entries, family has {k}", theta.len())));
    }
    Ok(theta)
}

fn parse_range(text: &str, parts: usize, what: &str) -> Result<Vec<f64>, Error> {
    let v: Vec<f64> = text
        .split(':')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| Error::Input(format!("{what}: cannot parse `{text}`")))?;
    if v.len() != parts {
        return Err(Error::Input(format!("{what}: expected {parts} fields separated by `:`")));
    }
    Ok(v)
}

fn model_kind(model: &str) -> Result<FamilyKind, Error> {
    match model {
        "exp" => Ok(FamilyKind::Exponential),
        "bpow" => Ok(FamilyKind::NonNormalizedAlphaPowerLaw),
        "mpow" => Ok(FamilyKind::AlphaPowerLaw),
        "aexp" => Ok(FamilyKind::AlphaExponential),
        other => Err(Error::Input(format!("unknown model `{other}`"))),
    }
}

fn with_alpha(spec: FamilySpec, alpha: Option<f64>) -> Result<FamilySpec, Error> {
    match alpha {
        Some(a) => FamilySpec::new(spec.kind(), spec.q().clone(), spec.f().clone(), Alpha::new(a)?),
        None => Ok(spec),
    }
}

fn load_family_sample(
    family: &Path,
    sample: &Path,
    alpha: Option<f64>,
) -> Result<(FamilySpec, crate::measures::SampleData), Error> {
    let (alphabet, spec) = io::load_family(family)?;
    let spec = with_alpha(spec, alpha)?;
    let sample = io::load_sample(sample, &alphabet)?;
    Ok((spec, sample))
}

fn solve_report(r: &SolveReport) -> Value {
    to_json(r)
}

fn run(command: &Command, cfg: &RunConfig) -> Run {
    match command {
        Command::Divergence { kind, alpha, p, q } => {
            let kind: DivergenceKind = kind.parse()?;
            let (ap, p) = io::load_distribution(p)?;
            let (aq, q) = io::load_distribution(q)?;
            if ap != aq {
                return Err(Error::Input("p and q use different alphabets".into()).into());
            }
            let value = divergence(kind, &p, &q, Alpha::new(*alpha)?)?;
            Ok(json!({ "kind": kind_name(kind), "alpha": num(*alpha), "value": num(value) }))
        }
        Command::Family(FamilyCmd::Eval { spec, theta }) => {
            let (alphabet, spec) = io::load_family(spec)?;
            let theta = parse_theta(theta, spec.k())?;
            let member = spec.eval_member(&theta)?;
            Ok(json!({
                "family": spec.kind().as_str(),
                "alpha": num(spec.alpha().value()),
                "alphabet": alphabet.symbols(),
                "theta": nums(&theta),
                "p": nums(member.dist.probs()),
                "z": num(member.z),
            }))
        }
        Command::Estimate { kind, alpha, family, sample, route, init } => {
            run_estimate(cfg, kind, *alpha, family, sample, *route, init.as_deref())
        }
        Command::Project(ProjectCmd::Forward { alpha, q, linear }) => {
            let alpha = Alpha::new(*alpha)?;
            let (_, q) = io::load_distribution(q)?;
            let l = io::load_linear(linear, q.len())?;
            let r = forward_b_projection(&q, &l, alpha)?;
            let fit = fit_forward_form(&q, &l, alpha, &r.p_star);
            let constraint = l.constraint_residual(r.p_star.probs()).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            Ok(json!({
                "alpha": num(alpha.value()),
                "p_star": nums(r.p_star.probs()),
                "theta": nums(&r.theta),
                "z": num(r.z),
                "support_mask": r.support_mask,
                "kkt": r.kkt.as_ref().map(|k| json!({
                    "lambda": nums(&k.lambda), "nu": num(k.nu), "mu": nums(&k.mu)
                })),
                "slackness": num(r.slackness()),
                "objective": num(r.objective),
                "method": to_json(&r.method),
                "iterations": r.iterations,
                "constraint_residual": num(constraint),
                "form_residual": num(fit.residual),
            }))
        }
        Command::Project(ProjectCmd::Reverse { alpha, family, sample }) => {
            let (spec, sample) = load_family_sample(family, sample, *alpha)?;
            let r = reverse_b_projection(&sample, &spec)?;
            Ok(json!({
                "alpha": num(spec.alpha().value()),
                "attained": r.attained,
                "theta": r.theta.as_deref().map(nums),
                "z": r.z.map(num),
                "membership_residual": num(r.membership_residual),
                "p_star": nums(r.forward.p_star.probs()),
                "report": r.report.as_ref().map(solve_report),
            }))
        }
        Command::Project(ProjectCmd::Equation { alpha, family, sample, init }) => {
            let (spec, sample) = load_family_sample(family, sample, *alpha)?;
            let init = match init {
                Some(t) => parse_theta(t, spec.k())?,
                None => vec![0.0; spec.k()],
            };
            let kind = ProjectionKind::for_family(spec.kind());
            let r = solve_projection_equation_with(kind, &spec, &sample, &init, cfg.newton())?;
            Ok(json!({
                "projection": kind.as_str(),
                "family": spec.kind().as_str(),
                "alpha": num(spec.alpha().value()),
                "report": solve_report(&r),
            }))
        }
        Command::Verify(VerifyCmd::Pythagoras { alpha, q, linear, trials }) => {
            let alpha = Alpha::new(*alpha)?;
            let (_, q) = io::load_distribution(q)?;
            let l = io::load_linear(linear, q.len())?;
            let r = forward_b_projection(&q, &l, alpha)?;
            let members = random_linear_members(&l, *trials, cfg.seed)?;
            let gaps =
                members.iter().map(|p| pythagorean_gap(alpha, p, &r.p_star, &q)).collect::<Result<Vec<_>, _>>()?;
            let min_gap = gaps.iter().cloned().fold(f64::INFINITY, f64::min);
            let max_abs = gaps.iter().fold(0.0f64, |m, g| m.max(g.abs()));
            let full_support = r.p_star.has_full_support();
            let equality_expected = alpha.value() <= 1.0 || full_support;
            let holds = gaps.is_empty()
                || (min_gap >= -PYTHAGORAS_LOWER_TOL && (!equality_expected || max_abs <= PYTHAGORAS_EQUALITY_TOL));
            Ok(json!({
                "alpha": num(alpha.value()),
                "trials": trials,
                "p_star": nums(r.p_star.probs()),
                "full_support": full_support,
                "equality_expected": equality_expected,
                "min_gap": if gaps.is_empty() { Value::Null } else { num(min_gap) },
                "max_abs_gap": num(max_abs),
                "gaps": nums(&gaps),
                "holds": holds,
            }))
        }
        Command::Suffstat { model, alpha, family, sample } => {
            let (spec, sample) = load_family_sample(family, sample, *alpha)?;
            let s = sufficient_statistic(model_kind(model)?, &spec, &sample)?;
            Ok(to_json(&s))
        }
        Command::Suffcheck { model, alpha, family, sample_a, sample_b, grid } => {
            let (alphabet, spec) = io::load_family(family)?;
            let spec = with_alpha(spec, *alpha)?;
            let a = io::load_sample(sample_a, &alphabet)?;
            let b = io::load_sample(sample_b, &alphabet)?;
            let g = parse_range(grid, 3, "grid")?;
            let points = g[2];
            if !(points >= 1.0 && points.fract() == 0.0) || g[1] < g[0] {
                return Err(Error::Input("grid needs lo <= hi and a positive integer point count".into()).into());
            }
            let axis: Vec<f64> = (0..points as usize)
                .map(|i| if points == 1.0 { g[0] } else { g[0] + (g[1] - g[0]) * i as f64 / (points - 1.0) })
                .collect();
            let thetas = product(&axis, spec.k());
            let r = factorization_check(model_kind(model)?, &spec, &a, &b, &thetas)?;
            Ok(to_json(&r))
        }
        Command::Oracle(OracleCmd::Forward { kind, alpha, q, linear, resolution }) => {
            let kind: DivergenceKind = kind.parse()?;
            let (_, q) = io::load_distribution(q)?;
            let l = linear.as_ref().map(|p| io::load_linear(p, q.len())).transpose()?;
            let grid = SimplexGrid::new(q.len(), *resolution)?;
            let r = grid_forward_min(kind, Alpha::new(*alpha)?, &q, l.as_ref(), &grid)?;
            Ok(json!({
                "kind": kind_name(kind),
                "alpha": num(*alpha),
                "resolution": resolution,
                "grid_points": grid.full_count().to_string(),
                "p_best": nums(&r.p_best),
                "value": num(r.value),
                "feasible_points": r.feasible_points,
            }))
        }
        Command::Oracle(OracleCmd::Reverse { kind, alpha, family, sample, bounds, step }) => {
            let kind: DivergenceKind = kind.parse()?;
            let (spec, sample) = load_family_sample(family, sample, None)?;
            let alpha = Alpha::new(alpha.unwrap_or(spec.alpha().value()))?;
            let b = parse_range(bounds, 2, "box")?;
            let step = step.unwrap_or(cfg.oracle_cell);
            let grid = ThetaGrid::new(vec![b[0]; spec.k()], vec![b[1]; spec.k()], step)?;
            let r = grid_reverse_min(kind, alpha, &sample, &spec, &grid)?;
            Ok(json!({
                "kind": kind_name(kind),
                "alpha": num(alpha.value()),
                "step": num(step),
                "grid_points": grid.len(),
                "theta_best": nums(&r.theta_best),
                "value": num(r.value),
                "index": r.index,
                "likelihood_index": r.likelihood_index,
                "consistent": r.consistent(),
                "admissible_points": r.admissible_points,
            }))
        }
        Command::Sample { family, theta, n, contamination_rate, outlier, out } => {
            let (alphabet, spec) = io::load_family(family)?;
            let theta = parse_theta(theta, spec.k())?;
            let member = spec.eval_member(&theta)?;
            let contamination = match outlier {
                Some(label) => Some(Contamination {
                    rate: *contamination_rate,
                    outlier: alphabet
                        .index_of(label)
                        .ok_or_else(|| Error::Input(format!("outlier `{label}` is not in the alphabet")))?,
                }),
                None if *contamination_rate > 0.0 => {
                    return Err(Error::Input("--contamination-rate needs --outlier".into()).into())
                }
                None => None,
            };
            let s = generate_sample(&member.dist, &alphabet, *n, contamination, cfg.seed)?;
            let mut result = json!({
                "n": s.n(),
                "theta": nums(&theta),
                "p_theta": nums(member.dist.probs()),
                "counts": s.counts(),
                "empirical": nums(s.empirical().probs()),
            });
            match out {
                Some(path) => {
                    let text = serde_json::to_string_pretty(&io::sample_json(&s)).unwrap_or_default() + "\n";
                    fs::write(path, text).map_err(|e| Error::Input(format!("cannot write {}: {e}", path.display())))?;
                    result["out"] = json!(path.display().to_string());
                }
                None => result["sample"] = io::sample_json(&s),
            }
            Ok(result)
        }
    }
}

fn run_estimate(
    cfg: &RunConfig,
    kind: &str,
    alpha: Option<f64>,
    family: &Path,
    sample: &Path,
    route: RouteArg,
    init: Option<&str>,
) -> Run {
    let kind: EstimatorKind = kind.parse()?;
    let (spec, sample) = load_family_sample(family, sample, None)?;
    let est = Estimator::new(kind, Alpha::new(alpha.unwrap_or(spec.alpha().value()))?);
    let init = match init {
        Some(t) => parse_theta(t, spec.k())?,
        None => vec![0.0; spec.k()],
    };
    let matched = est.is_matched(spec.kind());
    let mut result = json!({
        "estimator": kind.as_str(),
        "alpha": num(est.alpha.value()),
        "family": spec.kind().as_str(),
        "matched": matched,
    });
    if !matched {
        result["note"] = json!("unmatched pair, no equivalence guarantee");
    }
    let eq = if route != RouteArg::Lik {
        let r = solve_estimating_equation_with(est, &spec, &sample, &init, cfg.newton())
            .map_err(|e| Failure::from(e).with("setup", result.clone()))?;
        result["eq"] = solve_report(&r);
        Some(r)
    } else {
        None
    };
    if route != RouteArg::Eq {
        let r = maximize_likelihood(est, &spec, &sample, &init)
            .map_err(|e| Failure::from(e).with("setup", result.clone()))?;
        result["lik"] = solve_report(&r);
        if let Some(eq) = &eq {
            let gap = eq.theta_star.iter().zip(&r.theta_star).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            result["route_gap"] = num(gap);
            result["routes_agree"] = json!(gap <= cfg.equivalence_tol);
        }
    }
    Ok(result)
}

fn kind_name(kind: DivergenceKind) -> &'static str {
    match kind {
        DivergenceKind::Kl => "kl",
        DivergenceKind::Renyi => "renyi",
        DivergenceKind::DensityPower => "dpd",
        DivergenceKind::RelAlphaEntropy => "rae",
    }
}

/// All `k`-tuples over `axis`, first coordinate slowest.
fn product(axis: &[f64], k: usize) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect();
    }
    out
}
