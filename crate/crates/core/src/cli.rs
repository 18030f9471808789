//! Command-line front end: strict JSON run configurations, CSV density
//! profiles and JSON reports.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{json, Value};

use crate::error::Error;
use crate::field1d::{profile1d, well_metrics, DensityProfile, Field1d, ProtocolConfig, WellMetrics};
use crate::fieldnd::{radial_profile_nd, Field3d};
use crate::lattice_oracle::{convergence_report, oracle_profile, relative_deviation, LatticeSpec, Refinement};
use crate::optimizer::{self, default_delay, default_window, OptimizationProblem, Parameter};
use crate::protocol::{Branch, FieldPieces};
use crate::scaling::{alpha_norm_scaling_check, quantum_interest_exponents, verify_scaling, ScalingTransform};
use crate::smearing::Smearing;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn nodes(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.min];
        }
        let h = (self.max - self.min) / (self.points - 1) as f64;
        (0..self.points).map(|i| self.min + h * i as f64).collect()
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.points < 2 || !(self.max > self.min) || !self.min.is_finite() || !self.max.is_finite() {
            return Err(CliError::Config(format!(
                "grid needs min < max and at least 2 points, got [{}, {}] with {}",
                self.min, self.max, self.points
            )));
        }
        Ok(())
    }
}

/// Side of a one-sided time limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Before,
    After,
}

/// A sampling time, optionally a one-sided limit: `15.29-` is the instant
/// before Bob's kick, `15.29+` the instant after.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeToken {
    pub value: f64,
    pub side: Option<Side>,
}

impl TimeToken {
    pub fn label(&self) -> String {
        match self.side {
            None => format!("{}", self.value),
            Some(Side::Before) => format!("{}-", self.value),
            Some(Side::After) => format!("{}+", self.value),
        }
    }

    fn file_label(&self) -> String {
        match self.side {
            None => format!("{}", self.value),
            Some(Side::Before) => format!("{}minus", self.value),
            Some(Side::After) => format!("{}plus", self.value),
        }
    }

    /// The configuration to evaluate at this instant: at `T-` Bob has not acted yet.
    pub fn effective_config(&self, cfg: &ProtocolConfig) -> ProtocolConfig {
        let mut out = cfg.clone();
        if self.side == Some(Side::Before) && self.value >= cfg.interaction_time {
            out.bob = Smearing::zero();
        }
        out
    }
}

impl std::str::FromStr for TimeToken {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (body, side) = if let Some(b) = s.strip_suffix('-') {
            (b, Some(Side::Before))
        } else if let Some(b) = s.strip_suffix('+') {
            (b, Some(Side::After))
        } else {
            (s, None)
        };
        let value: f64 = body.parse().map_err(|_| format!("invalid time `{s}`"))?;
        if !value.is_finite() || value < 0.0 {
            return Err(format!("time must be finite and >= 0, got `{s}`"));
        }
        Ok(TimeToken { value, side })
    }
}

impl fmt::Display for TimeToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl Serialize for TimeToken {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.side {
            None => s.serialize_f64(self.value),
            Some(_) => s.serialize_str(&self.label()),
        }
    }
}

impl<'de> Deserialize<'de> for TimeToken {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Number(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Number(v) => format!("{v}").parse().map_err(serde::de::Error::custom),
            Repr::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Pass thresholds of the check commands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub oracle: f64,
    pub scaling_1d: f64,
    pub scaling_3d: f64,
    pub equivalence: f64,
    pub composition: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            oracle: 1e-6,
            scaling_1d: 1e-8,
            scaling_3d: 1e-4,
            equivalence: 1e-10,
            composition: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSettings {
    pub free_params: Vec<Parameter>,
    pub bounds: Vec<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restarts: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_evaluations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingSettings {
    #[serde(default = "default_upsilons")]
    pub upsilons: Vec<f64>,
}

fn default_upsilons() -> Vec<f64> {
    vec![0.5, 2.0, 5.0]
}

fn default_precision() -> usize {
    17
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub protocol: ProtocolConfig,
    pub grid: GridSpec,
    #[serde(default)]
    pub times: Vec<TimeToken>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<OptimizerSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaling: Option<ScalingSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Significant digits in CSV output.
    #[serde(default = "default_precision")]
    pub precision: usize,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let rc: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            CliError::Config(if path == "." || path.is_empty() {
                inner.to_string()
            } else {
                format!("field `{path}`: {inner}")
            })
        })?;
        rc.validate()?;
        Ok(rc)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.protocol.validate()?;
        self.grid.validate()?;
        if !(1..=17).contains(&self.precision) {
            return Err(CliError::Config(format!("precision must be in 1..=17, got {}", self.precision)));
        }
        if let Some(s) = &self.scaling {
            if s.upsilons.iter().any(|u| !(*u > 0.0) || !u.is_finite()) {
                return Err(CliError::Config("upsilons must be positive".into()));
            }
        }
        Ok(())
    }

    /// Time at which wells are assessed: the optimizer's evaluation time, or
    /// T + the default delay.
    pub fn well_time(&self) -> f64 {
        self.optimizer
            .as_ref()
            .and_then(|o| o.eval_time)
            .unwrap_or(self.protocol.interaction_time + default_delay(&self.protocol))
    }

    pub fn well_window(&self) -> Result<(f64, f64), CliError> {
        match self.optimizer.as_ref().and_then(|o| o.window) {
            Some(w) => Ok(w),
            None => Ok(default_window(&self.protocol, self.well_time())?),
        }
    }

    pub fn problem(&self) -> Result<OptimizationProblem, CliError> {
        let s = self
            .optimizer
            .as_ref()
            .ok_or_else(|| CliError::Config("missing `optimizer` section".into()))?;
        let mut p = OptimizationProblem::new(self.protocol.clone(), s.free_params.clone(), s.bounds.clone())?;
        p.eval_time = self.well_time();
        p.window = self.well_window()?;
        p.seed = s.seed;
        if let Some(v) = s.restarts {
            p.restarts = v;
        }
        if let Some(v) = s.max_evaluations {
            p.max_evaluations = v;
        }
        if let Some(v) = s.tolerance {
            p.tolerance = v;
        }
        if let Some(v) = s.points {
            p.points = v;
        }
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Config(String),
    Compute(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Compute(e) => match e {
                Error::Config(_)
                | Error::Normalization(_)
                | Error::DimensionUnsupported(..)
                | Error::GeometryMismatch(_)
                | Error::InvalidGeometry(_)
                | Error::Resolution(_)
                | Error::NoFeasiblePoint => 2,
                Error::NonConvergence { .. } | Error::ExtrapolationDivergence(_) => 3,
                _ => 1,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Compute(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Compute(e)
    }
}

#[derive(Debug, Parser)]
#[command(name = "qetlab", version, about = "Energy densities, optimization and cross-checks for quantum energy teleportation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// One CSV profile per time for a 1+1 D configuration.
    Density1d(DensityArgs),
    /// One radial CSV profile per time for a 3+1 D configuration.
    Density3d(DensityArgs),
    /// Search Bob's parameters for the most negative window energy.
    Optimize(CommonArgs),
    /// Scaling-law errors and fitted exponents.
    ScaleCheck(ScaleArgs),
    /// Branch and composition residuals.
    EquivCheck(CommonArgs),
    /// Comparison against the mode-sum oracle (1+1 D).
    OracleCheck(OracleArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Run configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output file (reports) or directory (profiles); defaults to the
    /// configuration's `output`, then stdout / the current directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Significant digits in CSV output.
    #[arg(long)]
    pub precision: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Comma-separated times; `T-`/`T+` select one-sided limits.
    #[arg(long, value_delimiter = ',')]
    pub times: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct ScaleArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Comma-separated scale factors.
    #[arg(long, value_delimiter = ',')]
    pub upsilon: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Number of lattice modes (even).
    #[arg(long)]
    pub modes: Option<usize>,
    /// Periodic box length.
    #[arg(long)]
    pub length: Option<f64>,
}

fn load(common: &CommonArgs) -> Result<RunConfig, CliError> {
    let mut rc = RunConfig::load(&common.config)?;
    if let Some(p) = common.precision {
        rc.precision = p;
        rc.validate()?;
    }
    Ok(rc)
}

fn out_path(common: &CommonArgs, rc: &RunConfig) -> Option<PathBuf> {
    common.out.clone().or_else(|| rc.output.clone())
}

fn fmt_value(v: f64, precision: usize) -> String {
    format!("{:.*e}", precision - 1, v)
}

/// CSV text of a profile with the given abscissa name.
pub fn profile_csv(profile: &DensityProfile, abscissa: &str, precision: usize) -> String {
    let mut s = format!("{abscissa},total,alice,bob,qet\n");
    for i in 0..profile.grid.len() {
        let row = [
            profile.grid[i],
            profile.total[i],
            profile.alice_part[i],
            profile.bob_part[i],
            profile.qet_part[i],
        ];
        let cells: Vec<String> = row.iter().map(|&v| fmt_value(v, precision)).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

fn emit_report(value: &Value, out: Option<PathBuf>) -> Result<Vec<PathBuf>, CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Config(e.to_string()))? + "\n";
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(Error::from)?;
            }
            fs::write(&p, text).map_err(Error::from)?;
            Ok(vec![p])
        }
        None => {
            std::io::stdout().write_all(text.as_bytes()).map_err(Error::from)?;
            Ok(Vec::new())
        }
    }
}

fn resolve_times(cli: &Option<Vec<String>>, rc: &RunConfig) -> Result<Vec<TimeToken>, CliError> {
    let times = match cli {
        Some(list) => list
            .iter()
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.parse::<TimeToken>().map_err(CliError::Usage))
            .collect::<Result<Vec<_>, _>>()?,
        None => rc.times.clone(),
    };
    if times.is_empty() {
        return Err(CliError::Usage("no times given (use --times or the config's `times`)".into()));
    }
    Ok(times)
}

fn density_cmd(args: &DensityArgs, dimension: usize) -> Result<Vec<PathBuf>, CliError> {
    let rc = load(&args.common)?;
    if rc.protocol.dimension != dimension {
        return Err(CliError::Config(format!(
            "this command needs dimension {dimension}, the config has {}",
            rc.protocol.dimension
        )));
    }
    let times = resolve_times(&args.times, &rc)?;
    let dir = out_path(&args.common, &rc).unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).map_err(Error::from)?;
    let grid = rc.grid.nodes();
    let (abscissa, prefix) = if dimension == 2 { ("x", "density1d") } else { ("r", "density3d") };
    let mut written = Vec::new();
    for (i, tok) in times.iter().enumerate() {
        let cfg = tok.effective_config(&rc.protocol);
        let profile = if dimension == 2 {
            profile1d(&cfg, &grid, tok.value)?
        } else {
            radial_profile_nd(&cfg, &grid, tok.value - cfg.interaction_time)?
        };
        let path = dir.join(format!("{prefix}_{i:02}_t{}.csv", tok.file_label()));
        fs::write(&path, profile_csv(&profile, abscissa, rc.precision)).map_err(Error::from)?;
        written.push(path);
    }
    Ok(written)
}

/// Dense profile around a window for well diagnostics.
fn well_profile(cfg: &ProtocolConfig, window: (f64, f64), time: f64) -> Result<DensityProfile, CliError> {
    let c = 0.5 * (window.0 + window.1);
    let reach = 8.0 * cfg.alice.characteristic_halfwidth().max(window.1 - window.0);
    let (lo, points) = if cfg.dimension == 2 { (c - reach, 2001) } else { ((c - reach).max(0.0), 201) };
    let hi = c + reach;
    let grid: Vec<f64> = (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect();
    Ok(match cfg.dimension {
        2 => profile1d(cfg, &grid, time)?,
        _ => radial_profile_nd(cfg, &grid, time - cfg.interaction_time)?,
    })
}

fn metrics_json(m: Result<WellMetrics, Error>) -> Result<Value, CliError> {
    match m {
        Ok(m) => Ok(json!({
            "metrics": m,
            "depth_to_peak_ratio": finite_or_null(m.depth_to_peak_ratio()),
            "flanked": m.flanked(),
        })),
        Err(Error::NoNegativeRegion(..)) => Ok(Value::Null),
        Err(e) => Err(e.into()),
    }
}

fn finite_or_null(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

fn optimize_cmd(args: &CommonArgs) -> Result<Vec<PathBuf>, CliError> {
    let rc = load(args)?;
    let problem = rc.problem()?;
    let result = optimizer::optimize(&problem)?;
    let baseline = optimizer::baseline_objective(&problem)?;
    let profile = well_profile(&result.best_config, problem.window, problem.eval_time)?;
    let metrics = metrics_json(well_metrics(&profile, problem.window))?;
    let params: serde_json::Map<String, Value> = problem
        .free_params
        .iter()
        .zip(&result.best_params)
        .map(|(p, v)| (serde_json::to_value(p).unwrap().as_str().unwrap().to_string(), json!(v)))
        .collect();
    let report = json!({
        "best_params": params,
        "best_objective": result.best_objective,
        "baseline_objective": baseline,
        "window": problem.window,
        "eval_time": problem.eval_time,
        "best_restart": result.best_restart,
        "well": metrics,
        "best_config": result.best_config,
        "trace": result.trace,
    });
    emit_report(&report, out_path(args, &rc))
}

fn scale_check_cmd(args: &ScaleArgs) -> Result<Vec<PathBuf>, CliError> {
    let rc = load(&args.common)?;
    let cfg = &rc.protocol;
    let upsilons = args
        .upsilon
        .clone()
        .or_else(|| rc.scaling.as_ref().map(|s| s.upsilons.clone()))
        .unwrap_or_else(default_upsilons);
    if upsilons.is_empty() || upsilons.iter().any(|u| !(*u > 0.0)) {
        return Err(CliError::Usage("upsilon values must be positive".into()));
    }
    let n = cfg.dimension;
    let time = rc.well_time();
    let grid = rc.grid.nodes();
    let tol = if n == 2 { rc.tolerances.scaling_1d } else { rc.tolerances.scaling_3d };
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for &u in &upsilons {
        let t = ScalingTransform::new(u, n)?;
        let scaled_grid: Vec<f64> = grid.iter().map(|x| x / u).collect();
        let e = verify_scaling(cfg, &t, &scaled_grid, time / u)?;
        worst = worst.max(e);
        rows.push(json!({"upsilon": u, "max_relative_error": e}));
    }
    let mut distinct = upsilons.clone();
    distinct.push(1.0);
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let alpha = alpha_norm_scaling_check(&cfg.alice, n, &distinct)?;

    let window = rc.well_window()?;
    let base = well_profile(cfg, window, time)?;
    let (qi, qi_error) = match quantum_interest_exponents(cfg, &distinct, &base.grid, time, window) {
        Ok(r) => (serde_json::to_value(r).unwrap(), Value::Null),
        Err(e @ (Error::InsufficientWells(_) | Error::NoNegativeRegion(..))) => (Value::Null, json!(e.to_string())),
        Err(e) => return Err(e.into()),
    };
    let report = json!({
        "dimension": n,
        "time": time,
        "window": window,
        "scaling": rows,
        "max_relative_error": worst,
        "tolerance": tol,
        "pass": worst <= tol,
        "alpha_norm_exponent": alpha,
        "expected_alpha_norm_exponent": -(n as f64 - 2.0),
        "quantum_interest": qi,
        "quantum_interest_error": qi_error,
    });
    emit_report(&report, out_path(&args.common, &rc))
}

/// Field pieces at one point for either dimension.
struct Evaluator<'a> {
    one: Option<Field1d<'a>>,
    three: Option<Field3d<'a>>,
}

impl<'a> Evaluator<'a> {
    fn new(cfg: &'a ProtocolConfig) -> Result<Self, Error> {
        Ok(match cfg.dimension {
            2 => Self {
                one: Some(Field1d::new(cfg)?),
                three: None,
            },
            4 => Self {
                one: None,
                three: Some(Field3d::new(cfg)?),
            },
            n => return Err(Error::DimensionUnsupported(n, "only n = 2 and n = 4 are implemented".into())),
        })
    }

    fn pieces(&self, x: f64, t: f64) -> Result<FieldPieces, Error> {
        match (&self.one, &self.three) {
            (Some(f), _) => f.pieces(x, t, true),
            (_, Some(f)) => f.pieces(x, t - f.config().interaction_time),
            _ => unreachable!(),
        }
    }

    fn alpha_norm(&self) -> f64 {
        match (&self.one, &self.three) {
            (Some(f), _) => f.alpha_norm(),
            (_, Some(f)) => f.alpha_norm(),
            _ => unreachable!(),
        }
    }
}

fn equiv_check_cmd(args: &CommonArgs) -> Result<Vec<PathBuf>, CliError> {
    let rc = load(args)?;
    let cfg = &rc.protocol;
    let grid = rc.grid.nodes();
    let mut times: Vec<f64> = rc
        .times
        .iter()
        .filter(|t| t.value > cfg.interaction_time || t.side == Some(Side::After))
        .map(|t| t.value)
        .collect();
    if times.is_empty() {
        times.push(rc.well_time());
    }

    // Bob split into parts (or two halves of a single part) for composition.
    let pieces_of_bob: Vec<Smearing> = if cfg.bob.parts.len() >= 2 {
        cfg.bob.parts.iter().map(|p| Smearing::from(*p)).collect()
    } else {
        cfg.bob
            .parts
            .iter()
            .flat_map(|p| {
                let mut h = *p;
                h.amplitude *= 0.5;
                [Smearing::from(h), Smearing::from(h)]
            })
            .collect()
    };
    let sub_cfgs: Vec<ProtocolConfig> = pieces_of_bob
        .iter()
        .map(|b| {
            let mut c = cfg.clone();
            c.bob = b.clone();
            c
        })
        .collect();
    let composed_cfg = {
        let mut c = cfg.clone();
        c.bob = crate::smearing::compose_bobs(&pieces_of_bob)?;
        c
    };

    let full = Evaluator::new(cfg)?;
    let composed = Evaluator::new(&composed_cfg)?;
    let subs = sub_cfgs.iter().map(Evaluator::new).collect::<Result<Vec<_>, _>>()?;
    let sigma_y = crate::protocol::sigma_y_expectation(&cfg.detector)?;
    let alpha = full.alpha_norm();

    let mut rows = Vec::new();
    let (mut worst_branch, mut worst_loqc, mut worst_comp): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for &t in &times {
        let mut scale: f64 = 0.0;
        let (mut db, mut dl, mut dc): (f64, f64, f64) = (0.0, 0.0, 0.0);
        for &x in &grid {
            let p = full.pieces(x, t)?;
            let loqc = p.loqc(sigma_y, alpha).total();
            let e = p.branch(&cfg.detector, Branch::E, alpha);
            let g = p.branch(&cfg.detector, Branch::G, alpha);
            let pc = composed.pieces(x, t)?;
            let mut summed = FieldPieces { pi_b: 0.0, g_b: 0.0, ..pc };
            for s in &subs {
                let q = s.pieces(x, t)?;
                summed.pi_b += q.pi_b;
                summed.g_b += q.g_b;
            }
            let via_parts = summed.loqc(sigma_y, alpha).total();
            let via_compose = pc.loqc(sigma_y, alpha).total();
            scale = scale.max(loqc.abs()).max(e.abs()).max(g.abs());
            db = db.max((e - g).abs());
            dl = dl.max((e - loqc).abs()).max((g - loqc).abs());
            dc = dc.max((via_parts - via_compose).abs()).max((via_compose - loqc).abs());
        }
        let norm = |d: f64| if scale > 0.0 { d / scale } else { d };
        worst_branch = worst_branch.max(norm(db));
        worst_loqc = worst_loqc.max(norm(dl));
        worst_comp = worst_comp.max(norm(dc));
        rows.push(json!({
            "time": t,
            "branch_residual": norm(db),
            "locc_loqc_residual": norm(dl),
            "composition_residual": norm(dc),
            "max_abs_density": scale,
        }));
    }
    let eigenstate = (sigma_y.abs() - 1.0).abs() <= 1e-12;
    let tol = rc.tolerances;
    let report = json!({
        "sigma_y": sigma_y,
        "sigma_y_eigenstate": eigenstate,
        "times": rows,
        "branch_residual": worst_branch,
        "locc_loqc_residual": worst_loqc,
        "composition_residual": worst_comp,
        "pass": (!eigenstate || (worst_branch <= tol.equivalence && worst_loqc <= tol.equivalence))
            && worst_comp <= tol.composition,
    });
    emit_report(&report, out_path(args, &rc))
}

fn oracle_check_cmd(args: &OracleArgs) -> Result<Vec<PathBuf>, CliError> {
    let rc = load(&args.common)?;
    let cfg = &rc.protocol;
    if cfg.dimension != 2 {
        return Err(CliError::Config("oracle-check supports dimension 2 only".into()));
    }
    let times = if rc.times.is_empty() {
        vec![TimeToken {
            value: rc.well_time(),
            side: None,
        }]
    } else {
        rc.times.clone()
    };
    let t_max = times.iter().map(|t| t.value).fold(0.0, f64::max);
    let grid = rc.grid.nodes();
    let auto = LatticeSpec::for_grid(cfg.clone(), t_max, rc.grid.min, rc.grid.max, rc.grid.points)?;
    let spec_for = |c: ProtocolConfig| -> Result<LatticeSpec, Error> {
        LatticeSpec::new(c, args.length.unwrap_or(auto.box_length), args.modes.unwrap_or(auto.mode_count))
    };
    let spec = spec_for(cfg.clone())?;
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    let mut peak = (grid[0], 0.0f64, times[0].value);
    for tok in &times {
        let c = tok.effective_config(cfg);
        let s = spec_for(c.clone())?;
        let reference = profile1d(&c, &grid, tok.value)?.total;
        let oracle = oracle_profile(&s, &grid, tok.value)?;
        let d = relative_deviation(&reference, &oracle);
        worst = worst.max(d);
        for (x, v) in grid.iter().zip(&reference) {
            if v.abs() > peak.1 && tok.side != Some(Side::Before) {
                peak = (*x, v.abs(), tok.value);
            }
        }
        rows.push(json!({
            "time": tok,
            "max_relative_deviation": d,
            "boundary_echo": s.boundary_echo(tok.value),
        }));
    }
    let convergence = convergence_report(&spec, peak.0, peak.2, 3, Refinement::Modes)?;
    let report = json!({
        "box_length": spec.box_length,
        "mode_count": spec.mode_count,
        "times": rows,
        "max_relative_deviation": worst,
        "tolerance": rc.tolerances.oracle,
        "pass": worst <= rc.tolerances.oracle,
        "convergence_point": {"x": peak.0, "time": peak.2},
        "convergence": convergence,
    });
    emit_report(&report, out_path(&args.common, &rc))
}

/// Runs a parsed command and returns the files it wrote.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    match &cli.command {
        Command::Density1d(a) => density_cmd(a, 2),
        Command::Density3d(a) => density_cmd(a, 4),
        Command::Optimize(a) => optimize_cmd(a),
        Command::ScaleCheck(a) => scale_check_cmd(a),
        Command::EquivCheck(a) => equiv_check_cmd(a),
        Command::OracleCheck(a) => oracle_check_cmd(a),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn time_tokens() {
        let t: TimeToken = "15.29-".parse().unwrap();
        assert_eq!((t.value, t.side), (15.29, Some(Side::Before)));
        let t: TimeToken = "15.29+".parse().unwrap();
        assert_eq!(t.side, Some(Side::After));
        assert_eq!("5".parse::<TimeToken>().unwrap().side, None);
        assert!("abc".parse::<TimeToken>().is_err());
        assert!("-1".parse::<TimeToken>().is_err());
        let v: Vec<TimeToken> = serde_json::from_str(r#"[0, "15.29-", 2.5]"#).unwrap();
        assert_eq!(serde_json::to_string(&v).unwrap(), r#"[0.0,"15.29-",2.5]"#);
    }

    #[test]
    fn csv_values_round_trip() {
        let p = DensityProfile {
            grid: vec![0.1, 1.0 / 3.0],
            time: 0.0,
            total: vec![std::f64::consts::PI, -1e-300],
            alice_part: vec![1.0, 2.0],
            bob_part: vec![f64::MIN_POSITIVE, 0.0],
            qet_part: vec![-0.7, 5e-324],
        };
        let text = profile_csv(&p, "x", 17);
        let rows: Vec<Vec<f64>> = text.lines().skip(1).map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect();
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r, &vec![p.grid[i], p.total[i], p.alice_part[i], p.bob_part[i], p.qet_part[i]]);
        }
    }

    #[test]
    fn unknown_keys_are_rejected_with_path() {
        let text = r#"{"protocol": {"dimension": 2, "alice": {"family": "gaussian", "amplitude": 1, "delta": 1, "colour": 1},
            "bob": [], "interaction_time": 1, "detector": {"amplitude_plus": [1, 0], "amplitude_minus": [0, 0]}},
            "grid": {"min": 0, "max": 1, "points": 3}}"#;
        match RunConfig::from_json(text) {
            Err(CliError::Config(m)) => assert!(m.contains("protocol.alice") && m.contains("colour"), "{m}"),
            other => panic!("{other:?}"),
        }
    }
}
