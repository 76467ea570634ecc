//! Run configuration: a TOML document with fixed sections, validated with
//! line/column-anchored, aggregated errors.
//!
//! ```toml
//! scenario = "time_fractional"   # time_fractional | time_space_fractional | custom
//! seed = 0
//!
//! [orders]
//! alpha = 1.5
//! beta = 2.0                     # space order; forced to 2 for second_derivative
//!
//! [operator]
//! kind = "second_derivative"     # second_derivative | liouville_left | liouville_right | riesz
//! lambda = "1 + 0.5*sech(x)"     # expression in x, or constant | gaussian_bump | tanh_step
//! # lambda_file = "lambda.txt"   # n_points whitespace-separated samples instead
//! mollifier = "bump"             # bump | truncated_gaussian
//!
//! [schedule]
//! scenario = "wave_time"         # custom runs only: theorem | wave_time | wave_time_space
//! kappa = 2.0
//! h_min = 1.0
//! coefficient_ratio = 1.5
//! kappa_cap = 32.0
//! eps_k_min = 4                  # sweep over eps = 2^-k, k = eps_k_min..=eps_k_max
//! eps_k_max = 12
//! eps = 0.00390625               # level used by `run`
//!
//! [grid]
//! half_length = 16.0
//! n_points = 512
//!
//! [time]
//! t_max = 1.0
//! n_steps = 128
//!
//! [initial]
//! u0 = "exp(-x^2)"
//! u1 = "0"
//!
//! [nonlinearity]
//! f = "0"                        # expression in u, or zero | scaled_sine | cubic_saturating
//! a = 0.1                        # amplitude of the named nonlinearities
//!
//! [noise]
//! sigma = 0.0                    # forcing intensity
//! initial_sigma = 0.0            # intensity of the noise added to u0
//! # space_width = 0.5            # kernel radii; default 1/h_eps
//! # time_width = 0.5
//! members = 1
//!
//! [solver]
//! tol = 1e-10
//! max_iter = 50
//! representation = "kernel"      # kernel | rl
//!
//! [output]
//! dir = "out"
//! ```

use std::ops::Range;
use std::path::{Path, PathBuf};

use toml::de::{DeTable, DeValue};
use toml::Spanned;

use crate::duhamel::{Nonlinearity, NonlinearityKind, Representation};
use crate::error::{Error, Result};
use crate::expr::{Expr, Var};
use crate::regularization::{
    MollifierShape, OperatorKind, ScheduleScenario, DEFAULT_COEFFICIENT_RATIO, DEFAULT_H_MIN, DEFAULT_KAPPA,
    DEFAULT_KAPPA_CAP,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scenario {
    /// `λ_ε (∂²ₓU * φ_h)`, wave-time schedule.
    TimeFractional,
    /// `λ_ε (D^β U * φ_h)`, wave-time-space schedule.
    TimeSpaceFractional,
    /// Operator kind and schedule taken from the file.
    Custom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LambdaProfile {
    /// `1`
    Constant,
    /// `1 + 0.5 exp(-x²)`
    GaussianBump,
    /// `1 + 0.5 tanh(x)`
    TanhStep,
}

impl LambdaProfile {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            LambdaProfile::Constant => 1.0,
            LambdaProfile::GaussianBump => 1.0 + 0.5 * (-x * x).exp(),
            LambdaProfile::TanhStep => 1.0 + 0.5 * x.tanh(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LambdaSpec {
    Expression(Expr),
    Profile(LambdaProfile),
    Samples { path: PathBuf, values: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScheduleConfig {
    pub scenario: ScheduleScenario,
    pub kappa: f64,
    pub h_min: f64,
    pub coefficient_ratio: f64,
    pub kappa_cap: f64,
    pub eps_k_min: u32,
    pub eps_k_max: u32,
    pub eps: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseConfig {
    pub sigma: f64,
    pub initial_sigma: f64,
    pub space_width: Option<f64>,
    pub time_width: Option<f64>,
    pub members: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    /// Original text, copied verbatim into run directories.
    pub source: String,
    pub scenario: Scenario,
    pub seed: u64,
    pub alpha: f64,
    pub beta: f64,
    pub kind: OperatorKind,
    pub lambda: LambdaSpec,
    pub mollifier: MollifierShape,
    pub schedule: ScheduleConfig,
    pub half_length: f64,
    pub n_points: usize,
    pub t_max: f64,
    pub n_steps: usize,
    pub u0: Expr,
    pub u1: Expr,
    pub nonlinearity: Nonlinearity,
    pub noise: NoiseConfig,
    pub tol: f64,
    pub max_iter: usize,
    pub representation: Representation,
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    /// All defaults (an empty file).
    pub fn default_config() -> RunConfig {
        parse_config("").expect("the empty configuration is valid")
    }
}

/// One problem found while validating a configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigIssue {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl std::fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}, column {}: {}", self.line, self.column, self.message)
    }
}

struct Ctx<'t> {
    text: &'t str,
    base: Option<&'t Path>,
    issues: Vec<ConfigIssue>,
}

impl Ctx<'_> {
    fn position(&self, offset: usize) -> (usize, usize) {
        let offset = offset.min(self.text.len());
        let before = &self.text[..offset];
        let line = before.matches('\n').count() + 1;
        let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
        (line, column)
    }

    fn issue(&mut self, span: Range<usize>, message: impl Into<String>) {
        let (line, column) = self.position(span.start);
        self.issues.push(ConfigIssue { line, column, message: message.into() });
    }
}

type Table<'i> = DeTable<'i>;

/// A section with its recognized keys; unknown keys are reported once.
struct Section<'a, 'i> {
    name: &'static str,
    table: Option<&'a Table<'i>>,
}

impl<'a, 'i> Section<'a, 'i> {
    fn get(&self, key: &str) -> Option<&'a Spanned<DeValue<'i>>> {
        self.table.and_then(|t| t.iter().find(|(k, _)| k.get_ref() == key).map(|(_, v)| v))
    }

    fn check_keys(&self, ctx: &mut Ctx, allowed: &[&str]) {
        if let Some(t) = self.table {
            for (k, _) in t.iter() {
                if !allowed.contains(&k.get_ref().as_ref()) {
                    let place = if self.name.is_empty() { "at top level".to_string() } else { format!("in [{}]", self.name) };
                    ctx.issue(k.span(), format!("unknown key '{}' {place}; expected one of: {}", k.get_ref(), allowed.join(", ")));
                }
            }
        }
    }

    fn qualified(&self, key: &str) -> String {
        if self.name.is_empty() {
            key.to_string()
        } else {
            format!("{}.{}", self.name, key)
        }
    }

    fn float(&self, ctx: &mut Ctx, key: &str, default: f64) -> f64 {
        self.opt_float(ctx, key).unwrap_or(default)
    }

    fn opt_float(&self, ctx: &mut Ctx, key: &str) -> Option<f64> {
        let v = self.get(key)?;
        let parsed = match v.get_ref() {
            DeValue::Float(f) => f.as_str().replace('_', "").parse::<f64>().ok(),
            DeValue::Integer(i) => i64::from_str_radix(&i.as_str().replace('_', ""), i.radix()).ok().map(|i| i as f64),
            _ => None,
        };
        match parsed {
            Some(x) if x.is_finite() => Some(x),
            _ => {
                ctx.issue(v.span(), format!("{} must be a finite number", self.qualified(key)));
                None
            }
        }
    }

    fn int(&self, ctx: &mut Ctx, key: &str, default: u64) -> u64 {
        let Some(v) = self.get(key) else { return default };
        match v.get_ref() {
            DeValue::Integer(i) => match u64::from_str_radix(&i.as_str().replace('_', ""), i.radix()) {
                Ok(x) => x,
                Err(_) => {
                    ctx.issue(v.span(), format!("{} must be a non-negative integer", self.qualified(key)));
                    default
                }
            },
            _ => {
                ctx.issue(v.span(), format!("{} must be an integer", self.qualified(key)));
                default
            }
        }
    }

    fn string(&self, ctx: &mut Ctx, key: &str) -> Option<(String, Range<usize>)> {
        let v = self.get(key)?;
        match v.get_ref() {
            DeValue::String(s) => Some((s.to_string(), v.span())),
            _ => {
                ctx.issue(v.span(), format!("{} must be a string", self.qualified(key)));
                None
            }
        }
    }

    fn choice<T: Copy>(&self, ctx: &mut Ctx, key: &str, options: &[(&str, T)], default: T) -> T {
        let Some((s, span)) = self.string(ctx, key) else { return default };
        match options.iter().find(|(n, _)| *n == s) {
            Some((_, v)) => *v,
            None => {
                let names: Vec<&str> = options.iter().map(|o| o.0).collect();
                ctx.issue(span, format!("{} = \"{s}\" is not one of: {}", self.qualified(key), names.join(", ")));
                default
            }
        }
    }
}

fn section<'a, 'i>(ctx: &mut Ctx, root: &'a Table<'i>, name: &'static str) -> Section<'a, 'i> {
    let table = root.iter().find(|(k, _)| k.get_ref() == name).and_then(|(_, v)| match v.get_ref() {
        DeValue::Table(t) => Some(t),
        _ => {
            ctx.issue(v.span(), format!("'{name}' must be a table ([{name}])"));
            None
        }
    });
    Section { name, table }
}

/// Parses an expression field, shifting error columns to the file position.
fn expression(ctx: &mut Ctx, text: &str, span: Range<usize>, var: Var, what: &str) -> Option<Expr> {
    match Expr::parse_in(text, var) {
        Ok(e) => Some(e),
        Err(e) => {
            // span covers the quoted literal; +1 skips the opening quote
            let at = span.start + 1 + e.column.saturating_sub(1);
            ctx.issue(at..at, format!("{what}: {}", e.message));
            None
        }
    }
}

fn read_samples(ctx: &mut Ctx, raw: &str, span: Range<usize>) -> Option<LambdaSpec> {
    let path = match ctx.base {
        Some(b) if Path::new(raw).is_relative() => b.join(raw),
        _ => PathBuf::from(raw),
    };
    let text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) => {
            ctx.issue(span, format!("cannot read lambda_file '{}': {e}", path.display()));
            return None;
        }
    };
    let mut values = Vec::new();
    for (i, tok) in text.split_whitespace().enumerate() {
        match tok.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            _ => {
                ctx.issue(span.clone(), format!("lambda_file entry {} ('{tok}') is not a finite number", i + 1));
                return None;
            }
        }
    }
    Some(LambdaSpec::Samples { path, values })
}

/// Parses and validates a configuration; relative file paths resolve
/// against the working directory.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_config_at(text, None)
}

/// Reads a configuration file; relative paths inside it resolve against
/// its directory.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config_at(&text, path.parent())
}

pub fn parse_config_at(text: &str, base: Option<&Path>) -> Result<RunConfig> {
    let root = DeTable::parse(text).map_err(|e| {
        let ctx = Ctx { text, base, issues: Vec::new() };
        let (line, column) = e.span().map_or((1, 1), |s| ctx.position(s.start));
        Error::Config(format!("line {line}, column {column}: {}", e.message().trim()))
    })?;
    let root = root.get_ref();
    let mut ctx = Ctx { text, base, issues: Vec::new() };
    let c = &mut ctx;

    let top = Section { name: "", table: Some(root) };
    const SECTIONS: [&str; 10] =
        ["orders", "operator", "schedule", "grid", "time", "initial", "nonlinearity", "noise", "solver", "output"];
    let mut allowed_top = vec!["scenario", "seed"];
    allowed_top.extend(SECTIONS);
    top.check_keys(c, &allowed_top);
    let scenario = top.choice(
        c,
        "scenario",
        &[
            ("time_fractional", Scenario::TimeFractional),
            ("time_space_fractional", Scenario::TimeSpaceFractional),
            ("custom", Scenario::Custom),
        ],
        Scenario::TimeFractional,
    );
    let seed = top.int(c, "seed", 0);

    let orders = section(c, root, "orders");
    orders.check_keys(c, &["alpha", "beta"]);
    let alpha = orders.float(c, "alpha", 1.5);
    if !(alpha > 1.0 && alpha < 2.0) {
        if let Some(v) = orders.get("alpha") {
            c.issue(v.span(), format!("orders.alpha must lie in (1, 2), got {alpha}"));
        }
    }

    let op = section(c, root, "operator");
    op.check_keys(c, &["kind", "lambda", "lambda_file", "mollifier"]);
    let kinds = [
        ("second_derivative", OperatorKind::SecondDerivative),
        ("liouville_left", OperatorKind::LiouvilleLeft),
        ("liouville_right", OperatorKind::LiouvilleRight),
        ("riesz", OperatorKind::Riesz),
    ];
    let default_kind = match scenario {
        Scenario::TimeSpaceFractional => OperatorKind::LiouvilleLeft,
        _ => OperatorKind::SecondDerivative,
    };
    let kind = op.choice(c, "kind", &kinds, default_kind);
    if scenario == Scenario::TimeFractional && kind != OperatorKind::SecondDerivative {
        if let Some(v) = op.get("kind") {
            c.issue(v.span(), "the time_fractional scenario uses kind = \"second_derivative\"");
        }
    }
    if scenario == Scenario::TimeSpaceFractional && kind == OperatorKind::SecondDerivative {
        if let Some(v) = op.get("kind") {
            c.issue(v.span(), "the time_space_fractional scenario needs a fractional kind");
        }
    }
    let default_beta = if kind == OperatorKind::SecondDerivative { 2.0 } else { 1.5 };
    let beta = orders.float(c, "beta", default_beta);
    if kind == OperatorKind::SecondDerivative {
        if beta != 2.0 {
            if let Some(v) = orders.get("beta") {
                c.issue(v.span(), format!("second_derivative fixes beta = 2, got {beta}"));
            }
        }
    } else if !(beta > 1.0 && beta <= 2.0) {
        if let Some(v) = orders.get("beta") {
            c.issue(v.span(), format!("orders.beta must lie in (1, 2], got {beta}"));
        }
    } else if kind == OperatorKind::Riesz && beta == 1.0 {
        if let Some(v) = orders.get("beta") {
            c.issue(v.span(), "the Riesz derivative is singular at beta = 1");
        }
    }
    let beta = if kind == OperatorKind::SecondDerivative { 2.0 } else { beta };

    let mut lambda = LambdaSpec::Expression(Expr::parse("1 + 0.5*sech(x)").expect("default lambda"));
    match (op.string(c, "lambda"), op.string(c, "lambda_file")) {
        (Some(_), Some((_, span))) => c.issue(span, "give either operator.lambda or operator.lambda_file, not both"),
        (Some((s, span)), None) => {
            let profile = match s.as_str() {
                "constant" => Some(LambdaProfile::Constant),
                "gaussian_bump" => Some(LambdaProfile::GaussianBump),
                "tanh_step" => Some(LambdaProfile::TanhStep),
                _ => None,
            };
            if let Some(p) = profile {
                lambda = LambdaSpec::Profile(p);
            } else if let Some(e) = expression(c, &s, span, Var::X, "operator.lambda") {
                lambda = LambdaSpec::Expression(e);
            }
        }
        (None, Some((s, span))) => {
            if let Some(l) = read_samples(c, &s, span) {
                lambda = l;
            }
        }
        (None, None) => {}
    }
    let mollifier = op.choice(
        c,
        "mollifier",
        &[("bump", MollifierShape::Bump), ("truncated_gaussian", MollifierShape::TruncatedGaussian)],
        MollifierShape::Bump,
    );

    let sch = section(c, root, "schedule");
    sch.check_keys(
        c,
        &["scenario", "kappa", "h_min", "coefficient_ratio", "kappa_cap", "eps_k_min", "eps_k_max", "eps"],
    );
    let default_sched = match scenario {
        Scenario::TimeSpaceFractional => ScheduleScenario::WaveTimeSpace,
        _ => ScheduleScenario::WaveTime,
    };
    let sched_scenario = sch.choice(
        c,
        "scenario",
        &[
            ("theorem", ScheduleScenario::Theorem),
            ("wave_time", ScheduleScenario::WaveTime),
            ("wave_time_space", ScheduleScenario::WaveTimeSpace),
        ],
        default_sched,
    );
    if scenario != Scenario::Custom && sched_scenario != default_sched {
        if let Some(v) = sch.get("scenario") {
            c.issue(v.span(), "schedule.scenario can only be chosen for scenario = \"custom\"");
        }
    }
    let kappa = sch.float(c, "kappa", DEFAULT_KAPPA);
    let h_min = sch.float(c, "h_min", DEFAULT_H_MIN);
    let coefficient_ratio = sch.float(c, "coefficient_ratio", DEFAULT_COEFFICIENT_RATIO);
    let kappa_cap = sch.float(c, "kappa_cap", DEFAULT_KAPPA_CAP);
    let eps_k_min = sch.int(c, "eps_k_min", 4) as u32;
    let eps_k_max = sch.int(c, "eps_k_max", 12) as u32;
    if !(1 <= eps_k_min && eps_k_min <= eps_k_max && eps_k_max <= 52) {
        if let Some(v) = sch.get("eps_k_max").or(sch.get("eps_k_min")) {
            c.issue(v.span(), format!("need 1 <= eps_k_min <= eps_k_max <= 52, got {eps_k_min}..{eps_k_max}"));
        }
    }
    let eps = sch.float(c, "eps", 2f64.powi(-8));
    for (key, v, ok) in [
        ("kappa", kappa, kappa >= 0.0),
        ("h_min", h_min, h_min > 0.0),
        ("coefficient_ratio", coefficient_ratio, coefficient_ratio > 0.0),
        ("kappa_cap", kappa_cap, kappa_cap > 0.0),
        ("eps", eps, eps > 0.0 && eps < 1.0),
    ] {
        if !ok {
            if let Some(s) = sch.get(key) {
                c.issue(s.span(), format!("schedule.{key} = {v} is out of range"));
            }
        }
    }

    let grid = section(c, root, "grid");
    grid.check_keys(c, &["half_length", "n_points"]);
    let half_length = grid.float(c, "half_length", 16.0);
    let n_points = grid.int(c, "n_points", 512) as usize;
    if !(n_points >= 8 && n_points.is_power_of_two()) {
        if let Some(v) = grid.get("n_points") {
            c.issue(v.span(), format!("grid.n_points must be a power of two >= 8, got {n_points}"));
        }
    }
    if !(half_length > 0.0) {
        if let Some(v) = grid.get("half_length") {
            c.issue(v.span(), "grid.half_length must be positive");
        }
    }
    if let LambdaSpec::Samples { values, .. } = &lambda {
        if values.len() != n_points {
            if let Some((_, span)) = op.string(c, "lambda_file") {
                c.issue(span, format!("lambda_file holds {} samples, grid.n_points is {n_points}", values.len()));
            }
        }
    }

    let time = section(c, root, "time");
    time.check_keys(c, &["t_max", "n_steps"]);
    let t_max = time.float(c, "t_max", 1.0);
    let n_steps = time.int(c, "n_steps", 128) as usize;
    if !(t_max > 0.0) {
        if let Some(v) = time.get("t_max") {
            c.issue(v.span(), "time.t_max must be positive");
        }
    }
    if n_steps < 8 {
        if let Some(v) = time.get("n_steps") {
            c.issue(v.span(), "time.n_steps must be at least 8");
        }
    }

    let init = section(c, root, "initial");
    init.check_keys(c, &["u0", "u1"]);
    let profile = |key: &str, default: &str, c: &mut Ctx| {
        let fallback = Expr::parse(default).expect("default profile");
        match init.string(c, key) {
            Some((s, span)) => expression(c, &s, span, Var::X, &format!("initial.{key}")).unwrap_or(fallback),
            None => fallback,
        }
    };
    let u0 = profile("u0", "exp(-x^2)", c);
    let u1 = profile("u1", "0", c);

    let nl = section(c, root, "nonlinearity");
    nl.check_keys(c, &["f", "a"]);
    let a = nl.float(c, "a", 0.1);
    let nonlinearity = match nl.string(c, "f") {
        None => Nonlinearity::zero(),
        Some((s, span)) => {
            let built = match s.as_str() {
                "zero" => Ok(Nonlinearity::zero()),
                "scaled_sine" => Nonlinearity::from_kind(NonlinearityKind::ScaledSine(a)),
                "cubic_saturating" => Nonlinearity::from_kind(NonlinearityKind::CubicSaturating(a)),
                _ => match expression(c, &s, span.clone(), Var::U, "nonlinearity.f") {
                    Some(e) if e.variables().is_empty() && e.eval(0.0) == 0.0 => Ok(Nonlinearity::zero()),
                    Some(e) => Nonlinearity::expression(e),
                    None => Ok(Nonlinearity::zero()),
                },
            };
            built.unwrap_or_else(|e| {
                c.issue(span, format!("nonlinearity.f: {e}"));
                Nonlinearity::zero()
            })
        }
    };

    let noise = section(c, root, "noise");
    noise.check_keys(c, &["sigma", "initial_sigma", "space_width", "time_width", "members"]);
    let sigma = noise.float(c, "sigma", 0.0);
    let initial_sigma = noise.float(c, "initial_sigma", 0.0);
    let space_width = noise.opt_float(c, "space_width");
    let time_width = noise.opt_float(c, "time_width");
    let members = noise.int(c, "members", 1);
    for (key, ok) in [
        ("sigma", sigma >= 0.0),
        ("initial_sigma", initial_sigma >= 0.0),
        ("space_width", space_width.is_none_or(|w| w > 0.0)),
        ("time_width", time_width.is_none_or(|w| w > 0.0)),
        ("members", (1..=u32::MAX as u64).contains(&members)),
    ] {
        if !ok {
            if let Some(v) = noise.get(key) {
                c.issue(v.span(), format!("noise.{key} is out of range"));
            }
        }
    }

    let solver = section(c, root, "solver");
    solver.check_keys(c, &["tol", "max_iter", "representation"]);
    let tol = solver.float(c, "tol", 1e-10);
    let max_iter = solver.int(c, "max_iter", 50) as usize;
    let representation = solver.choice(
        c,
        "representation",
        &[("kernel", Representation::Kernel), ("rl", Representation::RiemannLiouville)],
        Representation::Kernel,
    );
    if !(tol > 0.0) || max_iter == 0 {
        if let Some(v) = solver.get("tol").or(solver.get("max_iter")) {
            c.issue(v.span(), "solver.tol must be positive and solver.max_iter at least 1");
        }
    }

    let out = section(c, root, "output");
    out.check_keys(c, &["dir"]);
    let output_dir = out.string(c, "dir").map(|(s, _)| PathBuf::from(s));

    if !ctx.issues.is_empty() {
        ctx.issues.sort_by_key(|i| (i.line, i.column));
        let lines: Vec<String> = ctx.issues.iter().map(ToString::to_string).collect();
        return Err(Error::Config(lines.join("\n")));
    }
    Ok(RunConfig {
        source: text.to_string(),
        scenario,
        seed,
        alpha,
        beta,
        kind,
        lambda,
        mollifier,
        schedule: ScheduleConfig {
            scenario: sched_scenario,
            kappa,
            h_min,
            coefficient_ratio,
            kappa_cap,
            eps_k_min,
            eps_k_max,
            eps,
        },
        half_length,
        n_points,
        t_max,
        n_steps,
        u0,
        u1,
        nonlinearity,
        noise: NoiseConfig {
            sigma,
            initial_sigma,
            space_width,
            time_width,
            members: members.clamp(1, u32::MAX as u64) as u32,
        },
        tol,
        max_iter,
        representation,
        output_dir,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_an_empty_file() {
        let c = RunConfig::default_config();
        assert_eq!(c.scenario, Scenario::TimeFractional);
        assert_eq!(c.kind, OperatorKind::SecondDerivative);
        assert_eq!(c.beta, 2.0);
        assert_eq!((c.n_points, c.n_steps), (512, 128));
        assert!(c.nonlinearity.is_zero());
        match &c.lambda {
            LambdaSpec::Expression(e) => assert_eq!(e.eval(0.0), 1.5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn issues_are_aggregated_with_positions() {
        let text = "seed = 3\nbogus = 1\n[orders]\nalpha = \"x\"\n[operator]\nlambda = \"1 + foo(x)\"\n";
        let Err(Error::Config(msg)) = parse_config(text) else { panic!() };
        let lines: Vec<&str> = msg.lines().collect();
        assert_eq!(lines.len(), 3, "{msg}");
        assert!(lines[0].starts_with("line 2, column 1: unknown key 'bogus'"));
        assert!(lines[1].starts_with("line 4, column 9"));
        assert!(lines[2].starts_with("line 6, column 15"), "{}", lines[2]);
    }

    #[test]
    fn syntax_errors_are_located() {
        let Err(Error::Config(msg)) = parse_config("[grid]\nn_points = = 3\n") else { panic!() };
        assert!(msg.starts_with("line 2"), "{msg}");
    }

    #[test]
    fn nonlinearity_forms() {
        let c = parse_config("[nonlinearity]\nf = \"0.1*sin(u)\"\n").unwrap();
        assert_eq!(c.nonlinearity.label(), "0.1*sin(u)");
        let c = parse_config("[nonlinearity]\nf = \"cubic_saturating\"\na = 2\n").unwrap();
        assert_eq!(c.nonlinearity.kind(), &NonlinearityKind::CubicSaturating(2.0));
        assert!(parse_config("[nonlinearity]\nf = \"1 + u\"\n").is_err());
        assert!(parse_config("[nonlinearity]\nf = \"sin(x)\"\n").is_err());
    }

    #[test]
    fn scenario_consistency() {
        assert!(parse_config("[operator]\nkind = \"riesz\"\n").is_err());
        let c = parse_config("scenario = \"time_space_fractional\"\n[orders]\nbeta = 1.5\n").unwrap();
        assert_eq!(c.kind, OperatorKind::LiouvilleLeft);
        assert_eq!(c.schedule.scenario, ScheduleScenario::WaveTimeSpace);
        assert!(parse_config("[orders]\nbeta = 1.5\n").is_err());
    }

    #[test]
    fn lambda_samples_file() {
        let dir = tempfile::tempdir().unwrap();
        let vals: Vec<String> = (0..16).map(|i| format!("{}", 1.0 + i as f64 / 16.0)).collect();
        std::fs::write(dir.path().join("lam.txt"), vals.join("\n")).unwrap();
        let cfg = dir.path().join("run.toml");
        std::fs::write(&cfg, "[grid]\nn_points = 16\n[operator]\nlambda_file = \"lam.txt\"\n").unwrap();
        let c = load_config(&cfg).unwrap();
        let LambdaSpec::Samples { values, .. } = c.lambda else { panic!() };
        assert_eq!(values.len(), 16);
        std::fs::write(&cfg, "[grid]\nn_points = 32\n[operator]\nlambda_file = \"lam.txt\"\n").unwrap();
        assert!(load_config(&cfg).is_err());
    }
}
