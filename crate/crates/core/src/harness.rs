//! Experiment driver: configuration, multi-trial runs, CSV traces and an
//! external-objective subprocess protocol.
//!
//! Benchmarks are optimized on the normalized box `[−0.5, 0.5]^D`; the
//! `x_*` columns of the trace hold native coordinates. An external
//! objective is optimized directly on `[lower, upper]^D`.
//!
//! External objectives speak line-delimited JSON over standard streams:
//! the child reads `{"x":[...]}` and answers `{"y":...}`, one request at a
//! time. The child is started once per trial through `sh -c`.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use clap::{CommandFactory, Parser, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::acquisition::AcquisitionConfig;
use crate::benchmarks::{log_regret, Benchmark, BenchmarkKind};
use crate::design::InitScheme;
use crate::error::{Error, Result};
use crate::gpr::DEFAULT_NOISE_STD;
use crate::kernels::{KernelConfig, KernelFamily};
use crate::lsod::{LsodConfig, Strategy};
use crate::optimizer::{run_with, Objective, RunConfig, Trace};
use crate::subspace::Domain;

pub const DEFAULT_TIMEOUT_S: f64 = 3600.0;
const INITIAL_LENGTH_SCALE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum FunctionKind {
    Ackley,
    Rosenbrock,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MethodKind {
    Standard,
    Bold,
    Bolduc,
}

impl MethodKind {
    pub fn name(self) -> &'static str {
        match self {
            MethodKind::Standard => "standard",
            MethodKind::Bold => "bold",
            MethodKind::Bolduc => "bolduc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    None,
    Topm,
    Tau,
    Cumulative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Se,
    Matern52,
}

fn default_methods() -> Vec<MethodKind> {
    vec![MethodKind::Bolduc]
}
fn default_subspace_dim() -> usize {
    1
}
fn default_switch_every() -> usize {
    5
}
fn default_strategy() -> StrategyKind {
    StrategyKind::Topm
}
fn default_m() -> usize {
    200
}
fn default_tau() -> f64 {
    0.3
}
fn default_one() -> f64 {
    1.0
}
fn default_ct() -> f64 {
    0.8
}
fn default_kernel() -> KernelKind {
    KernelKind::Se
}
fn default_kappa() -> f64 {
    2.0
}
fn default_trials() -> usize {
    1
}
fn default_jobs() -> usize {
    1
}
fn default_init_scheme() -> InitScheme {
    InitScheme::Random
}
fn default_true() -> bool {
    true
}
fn default_timeout() -> f64 {
    DEFAULT_TIMEOUT_S
}
fn default_noise() -> f64 {
    DEFAULT_NOISE_STD
}
fn default_out() -> PathBuf {
    PathBuf::from("trace.csv")
}

/// Full description of an experiment. Field names match the long CLI flags
/// with dashes replaced by underscores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub function: FunctionKind,
    pub dim: usize,
    pub budget: usize,
    /// Initial design size; defaults to `dim`.
    #[serde(default)]
    pub init: Option<usize>,
    #[serde(default = "default_methods", alias = "method")]
    pub methods: Vec<MethodKind>,
    #[serde(default = "default_subspace_dim")]
    pub subspace_dim: usize,
    #[serde(default = "default_switch_every")]
    pub switch_every: usize,
    #[serde(default = "default_strategy")]
    pub strategy: StrategyKind,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_one")]
    pub tau_decay: f64,
    #[serde(default = "default_ct")]
    pub ct: f64,
    /// Maximize the contribution over the clipped region instead of using
    /// the projection shortcut.
    #[serde(default)]
    pub exact_contribution: bool,
    #[serde(default = "default_kernel")]
    pub kernel: KernelKind,
    #[serde(default)]
    pub ard: bool,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default = "default_noise")]
    pub noise_std: f64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
    #[serde(default = "default_init_scheme")]
    pub init_scheme: InitScheme,
    /// Give every method the same initial design for a given trial.
    #[serde(default = "default_true")]
    pub shared_init: bool,
    #[serde(default)]
    pub external_cmd: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout: f64,
    /// Box for external objectives.
    #[serde(default)]
    pub lower: Option<f64>,
    #[serde(default)]
    pub upper: Option<f64>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// Write measured wall times; otherwise timing columns are zero so that
    /// repeated runs produce identical files.
    #[serde(default)]
    pub timing: bool,
}

impl ExperimentConfig {
    /// Minimal config with all optional fields at their defaults.
    pub fn new(function: FunctionKind, dim: usize, budget: usize) -> Self {
        let mut v = Map::new();
        v.insert("function".into(), serde_json::to_value(function).expect("enum serializes"));
        v.insert("dim".into(), dim.into());
        v.insert("budget".into(), budget.into());
        serde_json::from_value(Value::Object(v)).expect("defaults deserialize")
    }

    pub fn n_init(&self) -> usize {
        self.init.unwrap_or(self.dim)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.trials < 1 {
            return bad("trials must be >= 1".into());
        }
        if self.jobs < 1 {
            return bad("jobs must be >= 1".into());
        }
        if self.methods.is_empty() {
            return bad("at least one method is required".into());
        }
        match self.function {
            FunctionKind::Rosenbrock if self.dim < 2 => return bad("rosenbrock needs dim >= 2".into()),
            FunctionKind::External if self.external_cmd.is_none() => {
                return bad("function = external needs --external-cmd".into())
            }
            _ if self.dim < 1 => return bad("dim must be >= 1".into()),
            _ => {}
        }
        if !(self.timeout > 0.0) {
            return bad("timeout must be positive".into());
        }
        if self.methods.contains(&MethodKind::Bolduc) && self.strategy == StrategyKind::None {
            return bad("method bolduc needs a strategy other than none".into());
        }
        self.domain()?;
        for &m in &self.methods {
            self.run_config(m, 0)?.validate(self.dim)?;
        }
        Ok(())
    }

    /// Search domain handed to the optimizer.
    pub fn domain(&self) -> Result<Domain> {
        match self.function {
            FunctionKind::External => Domain::new(
                vec![self.lower.unwrap_or(0.0); self.dim],
                vec![self.upper.unwrap_or(1.0); self.dim],
            ),
            _ => Ok(Domain::unit_centered(self.dim)),
        }
    }

    fn benchmark(&self) -> Result<Option<Benchmark>> {
        match self.function {
            FunctionKind::Ackley => Benchmark::new(BenchmarkKind::Ackley, self.dim).map(Some),
            FunctionKind::Rosenbrock => Benchmark::new(BenchmarkKind::Rosenbrock, self.dim).map(Some),
            FunctionKind::External => Ok(None),
        }
    }

    fn kernel_template(&self) -> Result<KernelConfig> {
        let family = match self.kernel {
            KernelKind::Se => KernelFamily::SquaredExponential,
            KernelKind::Matern52 => KernelFamily::Matern52,
        };
        if self.ard {
            KernelConfig::ard(family, 1.0, vec![INITIAL_LENGTH_SCALE; self.dim])
        } else {
            KernelConfig::isotropic(family, 1.0, INITIAL_LENGTH_SCALE)
        }
    }

    fn strategy(&self) -> Strategy {
        match self.strategy {
            StrategyKind::None => Strategy::None,
            StrategyKind::Topm => Strategy::TopM(self.m),
            StrategyKind::Tau => Strategy::Tau {
                tau: self.tau,
                decay: self.tau_decay,
            },
            StrategyKind::Cumulative => Strategy::Cumulative(self.ct),
        }
    }

    /// Seed of trial `trial` for `method`.
    pub fn trial_seed(&self, method: MethodKind, trial: usize) -> u64 {
        let base = self.seed.wrapping_add(trial as u64);
        if self.shared_init {
            base
        } else {
            base.wrapping_add((method as u64 + 1) << 32)
        }
    }

    /// Optimizer settings for one run.
    pub fn run_config(&self, method: MethodKind, trial: usize) -> Result<RunConfig> {
        let mut cfg = RunConfig::new(self.budget, self.n_init());
        cfg.subspace_dim = match method {
            MethodKind::Standard => 0,
            _ => self.subspace_dim,
        };
        cfg.switch_multiplier = self.switch_every;
        cfg.kernel = self.kernel_template()?;
        cfg.noise_std = self.noise_std;
        let mut lsod = LsodConfig::new(match method {
            MethodKind::Bolduc => self.strategy(),
            _ => Strategy::None,
        });
        lsod.use_approximation = !self.exact_contribution;
        cfg.lsod = lsod;
        cfg.acq = AcquisitionConfig {
            kappa: self.kappa,
            ..AcquisitionConfig::default()
        };
        cfg.seed = self.trial_seed(method, trial);
        cfg.init_scheme = self.init_scheme;
        Ok(cfg)
    }
}

#[derive(Parser, Debug, Default)]
#[command(name = "bolduc", version, about = "Bayesian optimization on low-dimensional subspaces with local surrogates")]
struct Cli {
    #[arg(long, value_enum)]
    function: Option<FunctionKind>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    budget: Option<usize>,
    /// Initial design size (default: dim)
    #[arg(long)]
    init: Option<usize>,
    /// Comma-separated list of methods
    #[arg(long, value_enum, value_delimiter = ',')]
    method: Option<Vec<MethodKind>>,
    #[arg(long)]
    subspace_dim: Option<usize>,
    /// Observations per subspace, as a multiple of the subspace dimension
    #[arg(long)]
    switch_every: Option<usize>,
    #[arg(long, value_enum)]
    strategy: Option<StrategyKind>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    /// Per-subspace multiplicative decay of tau
    #[arg(long)]
    tau_decay: Option<f64>,
    /// Cumulative contribution rate
    #[arg(long)]
    ct: Option<f64>,
    #[arg(long)]
    exact_contribution: bool,
    #[arg(long, value_enum)]
    kernel: Option<KernelKind>,
    #[arg(long)]
    ard: bool,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    noise_std: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, value_enum)]
    init_scheme: Option<InitSchemeArg>,
    /// Draw a separate initial design for each method
    #[arg(long)]
    no_shared_init: bool,
    /// Shell command of the external objective
    #[arg(long)]
    external_cmd: Option<String>,
    /// Per-evaluation timeout of the external objective, in seconds
    #[arg(long)]
    timeout: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    lower: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    upper: Option<f64>,
    /// JSON file with defaults; flags given on the command line win
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Record wall-clock times in the trace
    #[arg(long)]
    timing: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum InitSchemeArg {
    Random,
    Sobol,
}

/// The command-line definition, for help and version output.
pub fn cli_command() -> clap::Command {
    Cli::command()
}

/// Parses command-line arguments (including the program name) into a config.
pub fn parse_cli<I, T>(argv: I) -> Result<ExperimentConfig>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let mut obj = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            match serde_json::from_str::<Value>(&text) {
                Ok(Value::Object(m)) => m,
                Ok(_) => return Err(Error::InvalidInput(format!("{}: expected a JSON object", path.display()))),
                Err(e) => return Err(Error::InvalidInput(format!("{}: {e}", path.display()))),
            }
        }
        None => Map::new(),
    };
    let mut set = |key: &str, v: Option<Value>| {
        if let Some(v) = v {
            obj.insert(key.to_string(), v);
        }
    };
    set("function", cli.function.map(|v| to_json(&v)));
    set("dim", cli.dim.map(Value::from));
    set("budget", cli.budget.map(Value::from));
    set("init", cli.init.map(Value::from));
    if let Some(methods) = &cli.method {
        obj.remove("method");
        obj.insert("methods".into(), to_json(methods));
    }
    let mut set = |key: &str, v: Option<Value>| {
        if let Some(v) = v {
            obj.insert(key.to_string(), v);
        }
    };
    set("subspace_dim", cli.subspace_dim.map(Value::from));
    set("switch_every", cli.switch_every.map(Value::from));
    set("strategy", cli.strategy.map(|v| to_json(&v)));
    set("m", cli.m.map(Value::from));
    set("tau", cli.tau.map(Value::from));
    set("tau_decay", cli.tau_decay.map(Value::from));
    set("ct", cli.ct.map(Value::from));
    set("exact_contribution", cli.exact_contribution.then_some(Value::Bool(true)));
    set("kernel", cli.kernel.map(|v| to_json(&v)));
    set("ard", cli.ard.then_some(Value::Bool(true)));
    set("kappa", cli.kappa.map(Value::from));
    set("noise_std", cli.noise_std.map(Value::from));
    set("trials", cli.trials.map(Value::from));
    set("seed", cli.seed.map(Value::from));
    set("jobs", cli.jobs.map(Value::from));
    set(
        "init_scheme",
        cli.init_scheme.map(|s| {
            Value::from(match s {
                InitSchemeArg::Random => "random",
                InitSchemeArg::Sobol => "sobol",
            })
        }),
    );
    set("shared_init", cli.no_shared_init.then_some(Value::Bool(false)));
    set("external_cmd", cli.external_cmd.clone().map(Value::from));
    set("timeout", cli.timeout.map(Value::from));
    set("lower", cli.lower.map(Value::from));
    set("upper", cli.upper.map(Value::from));
    set("out", cli.out.as_ref().map(|p| Value::from(p.to_string_lossy().into_owned())));
    set("timing", cli.timing.then_some(Value::Bool(true)));

    for key in ["function", "dim", "budget"] {
        if !obj.contains_key(key) {
            return Err(Error::InvalidInput(format!(
                "missing required option --{key} (give it on the command line or in --config)"
            )));
        }
    }
    let cfg: ExperimentConfig =
        serde_json::from_value(Value::Object(obj)).map_err(|e| Error::InvalidInput(format!("invalid config: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

fn to_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("config values serialize")
}

/// Objective served by a child process over line-delimited JSON.
pub struct ExternalObjective {
    child: Child,
    stdin: ChildStdin,
    replies: Receiver<std::io::Result<String>>,
    timeout: Duration,
}

#[derive(Serialize)]
struct Request<'a> {
    x: &'a [f64],
}

#[derive(Deserialize)]
struct Reply {
    y: f64,
}

impl ExternalObjective {
    /// Starts `command` through `sh -c`.
    pub fn spawn(command: &str, timeout: Duration) -> Result<Self> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Objective(format!("cannot start `{command}`: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(ExternalObjective {
            child,
            stdin,
            replies: rx,
            timeout,
        })
    }
}

impl Objective for ExternalObjective {
    fn evaluate(&mut self, x: &[f64]) -> Result<f64> {
        let mut line = serde_json::to_string(&Request { x }).map_err(|e| Error::Objective(e.to_string()))?;
        line.push('\n');
        self.stdin
            .write_all(line.as_bytes())
            .and_then(|_| self.stdin.flush())
            .map_err(|e| Error::Objective(format!("cannot write to child: {e}")))?;
        let reply = match self.replies.recv_timeout(self.timeout) {
            Ok(Ok(reply)) => reply,
            Ok(Err(e)) => return Err(Error::Objective(format!("cannot read from child: {e}"))),
            Err(RecvTimeoutError::Timeout) => {
                return Err(Error::Objective(format!("no reply within {:?}", self.timeout)))
            }
            Err(RecvTimeoutError::Disconnected) => return Err(Error::Objective("child closed its output".into())),
        };
        let parsed: Reply = serde_json::from_str(reply.trim())
            .map_err(|e| Error::Objective(format!("malformed reply {reply:?}: {e}")))?;
        Ok(parsed.y)
    }
}

impl Drop for ExternalObjective {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Outcome of one (method, trial) run.
#[derive(Debug, Clone)]
pub struct TrialResult {
    pub trial: usize,
    pub method: MethodKind,
    pub trace: Trace,
    /// Error that ended the run early.
    pub failure: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub results: Vec<TrialResult>,
    pub trace_path: PathBuf,
    pub summary_path: PathBuf,
}

impl ExperimentReport {
    pub fn failed_trials(&self) -> usize {
        self.results.iter().filter(|r| r.failure.is_some()).count()
    }
}

/// Runs one (method, trial) pair.
pub fn run_trial(cfg: &ExperimentConfig, method: MethodKind, trial: usize) -> Result<TrialResult> {
    let run_cfg = run_config_checked(cfg, method, trial)?;
    let domain = cfg.domain()?;
    let local = method == MethodKind::Bolduc;
    let outcome = match cfg.benchmark()? {
        Some(bench) => {
            let mut f = |x: &[f64]| bench.evaluate_normalized(x);
            run_with(&mut f, &domain, &run_cfg, local)
        }
        None => {
            let cmd = cfg.external_cmd.as_deref().expect("validated");
            match ExternalObjective::spawn(cmd, Duration::from_secs_f64(cfg.timeout)) {
                Ok(mut obj) => run_with(&mut obj, &domain, &run_cfg, local),
                Err(e) => Err(e),
            }
        }
    };
    let trace = match outcome {
        Ok(trace) => trace,
        Err(e @ Error::Objective(_)) => {
            return Ok(TrialResult {
                trial,
                method,
                trace: empty_trace(),
                failure: Some(e.to_string()),
            })
        }
        Err(e) => return Err(e),
    };
    let failure = trace.failure.clone();
    Ok(TrialResult {
        trial,
        method,
        trace,
        failure,
    })
}

fn run_config_checked(cfg: &ExperimentConfig, method: MethodKind, trial: usize) -> Result<RunConfig> {
    let rc = cfg.run_config(method, trial)?;
    rc.validate(cfg.dim)?;
    Ok(rc)
}

fn empty_trace() -> Trace {
    Trace {
        records: Vec::new(),
        subspaces: Vec::new(),
        best_index: 0,
        best_point: Vec::new(),
        best_value: f64::NAN,
        failure: None,
    }
}

/// Formats a float with 17 significant digits.
pub fn fmt_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

/// Column names of the trace CSV.
pub fn trace_header(dim: usize) -> Vec<String> {
    let mut h: Vec<String> = [
        "trial",
        "t",
        "method",
        "y",
        "best_y",
        "simple_regret",
        "log_regret",
        "lsod_size",
        "theta_l",
        "theta_sigma",
        "subspace_id",
        "elapsed_ms",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    h.extend((1..=dim).map(|i| format!("x_{i}")));
    h
}

/// Log regret of every record, or NaN when the optimum is unknown.
fn log_regrets(trace: &Trace, bench: Option<&Benchmark>) -> Vec<f64> {
    trace
        .records
        .iter()
        .map(|r| bench.map_or(f64::NAN, |b| log_regret(r.best_y - b.optimum_value)))
        .collect()
}

/// CSV rows of one trial.
pub fn trace_rows(result: &TrialResult, bench: Option<&Benchmark>, timing: bool) -> Result<Vec<Vec<String>>> {
    let mut rows = Vec::with_capacity(result.trace.records.len());
    for r in &result.trace.records {
        let (regret, native) = match bench {
            Some(b) => (r.best_y - b.optimum_value, b.to_native(&r.x)?),
            None => (f64::NAN, r.x.clone()),
        };
        let mut row = vec![
            result.trial.to_string(),
            r.t.to_string(),
            result.method.name().to_string(),
            fmt_float(r.y),
            fmt_float(r.best_y),
            fmt_float(regret),
            fmt_float(if bench.is_some() { log_regret(regret) } else { f64::NAN }),
            r.lsod_size.to_string(),
            fmt_float(r.theta_l.unwrap_or(f64::NAN)),
            fmt_float(r.theta_sigma.unwrap_or(f64::NAN)),
            r.subspace_id.map_or("-1".to_string(), |id| id.to_string()),
            fmt_float(if timing { r.timing.elapsed_ms } else { 0.0 }),
        ];
        row.extend(native.iter().map(|&v| fmt_float(v)));
        rows.push(row);
    }
    Ok(rows)
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Per-method, per-t mean and standard deviation of log regret across the
/// trials that reached `t`.
pub fn summarize(results: &[TrialResult], bench: Option<&Benchmark>) -> Vec<(MethodKind, usize, f64, f64)> {
    let mut by_key: BTreeMap<(MethodKind, usize), Vec<f64>> = BTreeMap::new();
    for r in results {
        for (rec, lr) in r.trace.records.iter().zip(log_regrets(&r.trace, bench)) {
            by_key.entry((r.method, rec.t)).or_default().push(lr);
        }
    }
    by_key
        .into_iter()
        .map(|((m, t), v)| {
            let (mean, std) = mean_std(&v);
            (m, t, mean, std)
        })
        .collect()
}

/// Path of the summary file for trace path `out`.
pub fn summary_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".summary.csv");
    PathBuf::from(s)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Runs every (method, trial) pair, writes the trace CSV and the summary.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let jobs: Vec<(usize, MethodKind)> =
        (0..cfg.trials).flat_map(|t| cfg.methods.iter().map(move |&m| (t, m))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::InvalidState(e.to_string()))?;
    let results: Vec<TrialResult> = pool.install(|| {
        jobs.par_iter()
            .map(|&(trial, method)| {
                let r = run_trial(cfg, method, trial)?;
                if let Some(f) = &r.failure {
                    log::error!("trial {trial} ({}) failed: {f}", method.name());
                } else {
                    log::info!("trial {trial} ({}) done: best {}", method.name(), r.trace.best_value);
                }
                Ok(r)
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let bench = cfg.benchmark()?;
    let mut w = csv::Writer::from_path(&cfg.out).map_err(csv_err)?;
    w.write_record(trace_header(cfg.dim)).map_err(csv_err)?;
    for r in &results {
        for row in trace_rows(r, bench.as_ref(), cfg.timing)? {
            w.write_record(&row).map_err(csv_err)?;
        }
    }
    w.flush()?;

    let summary = summary_path(&cfg.out);
    let mut w = csv::Writer::from_path(&summary).map_err(csv_err)?;
    w.write_record(["method", "t", "mean_log_regret", "std_log_regret"]).map_err(csv_err)?;
    for (m, t, mean, std) in summarize(&results, bench.as_ref()) {
        w.write_record([m.name().to_string(), t.to_string(), fmt_float(mean), fmt_float(std)])
            .map_err(csv_err)?;
    }
    w.flush()?;

    Ok(ExperimentReport {
        results,
        trace_path: cfg.out.clone(),
        summary_path: summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argv(s: &str) -> Vec<String> {
        std::iter::once("bolduc".to_string()).chain(s.split_whitespace().map(String::from)).collect()
    }

    #[test]
    fn parses_full_configuration() {
        let cfg = parse_cli(argv(
            "--function ackley --dim 20 --budget 1000 --init 20 --method bolduc --strategy topm --m 200 \
             --subspace-dim 1 --kappa 2 --trials 30 --seed 7 --out trace.csv",
        ))
        .unwrap();
        assert_eq!(cfg.function, FunctionKind::Ackley);
        assert_eq!((cfg.dim, cfg.budget, cfg.n_init(), cfg.trials, cfg.seed), (20, 1000, 20, 30, 7));
        assert_eq!(cfg.methods, vec![MethodKind::Bolduc]);
        let rc = cfg.run_config(MethodKind::Bolduc, 3).unwrap();
        assert_eq!(rc.lsod.strategy, Strategy::TopM(200));
        assert_eq!(rc.acq.kappa, 2.0);
        assert_eq!(rc.subspace_dim, 1);
        assert_eq!(rc.seed, 10);
        assert_eq!(cfg.out, PathBuf::from("trace.csv"));
    }

    #[test]
    fn parses_strategies() {
        let cfg = parse_cli(argv("--function ackley --dim 5 --budget 20 --strategy tau --tau 0.3")).unwrap();
        assert_eq!(cfg.run_config(MethodKind::Bolduc, 0).unwrap().lsod.strategy, Strategy::Tau { tau: 0.3, decay: 1.0 });
        let cfg = parse_cli(argv("--function ackley --dim 5 --budget 20 --strategy cumulative --ct 0.8")).unwrap();
        assert_eq!(cfg.run_config(MethodKind::Bolduc, 0).unwrap().lsod.strategy, Strategy::Cumulative(0.8));
        // the global method ignores the strategy
        assert_eq!(cfg.run_config(MethodKind::Bold, 0).unwrap().lsod.strategy, Strategy::None);
    }

    #[test]
    fn method_list_and_defaults() {
        let cfg = parse_cli(argv("--function rosenbrock --dim 4 --budget 20 --method standard,bold")).unwrap();
        assert_eq!(cfg.methods, vec![MethodKind::Standard, MethodKind::Bold]);
        assert_eq!(cfg.n_init(), 4);
        assert_eq!(cfg.run_config(MethodKind::Standard, 0).unwrap().subspace_dim, 0);
        assert!(cfg.shared_init);
    }

    #[test]
    fn missing_or_invalid_flags_are_errors() {
        assert!(parse_cli(argv("--dim 4 --budget 10")).is_err());
        assert!(parse_cli(argv("--function ackley --budget 10")).is_err());
        assert!(parse_cli(argv("--function rosenbrock --dim 1 --budget 10")).is_err());
        assert!(parse_cli(argv("--function ackley --dim 3 --budget 10 --trials 0")).is_err());
        assert!(parse_cli(argv("--function external --dim 3 --budget 10")).is_err());
        assert!(parse_cli(argv("--function ackley --dim 3 --budget 10 --bogus 1")).is_err());
        assert!(parse_cli(argv("--function ackley --dim 3 --budget 10 --method bolduc --strategy none")).is_err());
    }

    #[test]
    fn cli_overrides_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.json");
        fs::write(&path, r#"{"function":"rosenbrock","dim":6,"budget":50,"m":32,"method":["bold"]}"#).unwrap();
        let cfg = parse_cli(argv(&format!("--config {} --budget 40", path.display()))).unwrap();
        assert_eq!((cfg.function, cfg.dim, cfg.budget, cfg.m), (FunctionKind::Rosenbrock, 6, 40, 32));
        assert_eq!(cfg.methods, vec![MethodKind::Bold]);
        let cfg = parse_cli(argv(&format!("--config {} --method bolduc", path.display()))).unwrap();
        assert_eq!(cfg.methods, vec![MethodKind::Bolduc]);
        fs::write(&path, r#"{"function":"ackley","dim":2,"budget":5,"unknown":1}"#).unwrap();
        assert!(parse_cli(argv(&format!("--config {}", path.display()))).is_err());
    }

    #[test]
    fn negative_bounds_parse() {
        let cfg = parse_cli(argv("--function external --external-cmd cat --dim 2 --budget 3 --lower -2 --upper 2")).unwrap();
        assert_eq!(cfg.domain().unwrap().lower(), &[-2.0, -2.0]);
    }

    #[test]
    fn mean_std_matches_hand_values() {
        assert_eq!(mean_std(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 12345.678901234567] {
            assert_eq!(fmt_float(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_float(f64::NAN), "NaN");
    }

    #[test]
    fn summary_path_appends_suffix() {
        assert_eq!(summary_path(Path::new("out/trace.csv")), PathBuf::from("out/trace.csv.summary.csv"));
    }

    #[test]
    fn external_objective_round_trip() {
        let mut obj = ExternalObjective::spawn(
            r#"while read line; do echo '{"y": 1.5}'; done"#,
            Duration::from_secs(10),
        )
        .unwrap();
        assert_eq!(obj.evaluate(&[0.0, 1.0]).unwrap(), 1.5);
        assert_eq!(obj.evaluate(&[0.0, 1.0]).unwrap(), 1.5);
    }

    #[test]
    fn external_objective_errors() {
        let mut bad = ExternalObjective::spawn("while read line; do echo 'not json'; done", Duration::from_secs(10)).unwrap();
        assert!(matches!(bad.evaluate(&[0.0]), Err(Error::Objective(_))));
        let mut dead = ExternalObjective::spawn("exit 3", Duration::from_secs(10)).unwrap();
        assert!(matches!(dead.evaluate(&[0.0]), Err(Error::Objective(_))));
        let mut slow = ExternalObjective::spawn("sleep 5", Duration::from_millis(200)).unwrap();
        let err = slow.evaluate(&[0.0]).unwrap_err();
        assert!(err.to_string().contains("no reply"), "{err}");
    }
}
