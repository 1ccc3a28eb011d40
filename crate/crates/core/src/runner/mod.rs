//! Experiment orchestration: config ingestion, the experiment registry,
//! result records and the process exit-code contract.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails, 2 for usage
//! and validation errors, 3 for internal or I/O errors.

mod config;
mod experiments;
mod record;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde_json::Value;

pub use config::ExperimentConfig;
pub use experiments::REGISTRY;
pub use record::{timestamp, Cell, Check, ResultRecord, Table};

use crate::cosmo::CosmoError;
use crate::fielddecomp::FieldError;
use crate::gauge_pt::GaugeError;
use crate::hilbert::HilbertError;
use crate::interferometer::InterferometerError;
use crate::pathint::PathError;

/// Environment variable that overrides the worker count.
pub const THREADS_ENV: &str = "GIE_THREADS";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RunError {
    #[error("config: {0}")]
    Config(String),
    #[error("unknown experiment {0:?} (see `gie list`)")]
    UnknownExperiment(String),
    #[error("validation failed: {field} must satisfy {condition}")]
    Validation { field: String, condition: String },
    #[error("I/O: {0}")]
    Io(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::UnknownExperiment(_) | Self::Validation { .. } => 2,
            Self::Io(_) | Self::Internal(_) => 3,
        }
    }

    fn invalid(field: impl Into<String>, condition: impl Into<String>) -> Self {
        Self::Validation { field: field.into(), condition: condition.into() }
    }
}

impl From<InterferometerError> for RunError {
    fn from(e: InterferometerError) -> Self {
        match e {
            InterferometerError::Invalid { field, condition } => Self::invalid(field, condition),
            InterferometerError::EmptyRange => Self::invalid("steps", "at least one time"),
            InterferometerError::BadTimes(i) => {
                Self::invalid("t_min/t_max", format!("positive ascending times (index {i})"))
            }
            InterferometerError::Hilbert(h) => Self::Internal(h.to_string()),
        }
    }
}

impl From<GaugeError> for RunError {
    fn from(e: GaugeError) -> Self {
        Self::invalid("oscillator pair", e.to_string())
    }
}

impl From<FieldError> for RunError {
    fn from(e: FieldError) -> Self {
        match e {
            FieldError::Io(msg) => Self::Io(msg),
            other => Self::invalid("field", other.to_string()),
        }
    }
}

impl From<PathError> for RunError {
    fn from(e: PathError) -> Self {
        match e {
            PathError::RetardedTime { .. } => Self::Internal(e.to_string()),
            PathError::Invalid { field, condition } => Self::invalid(field, condition),
            other => Self::invalid("protocol", other.to_string()),
        }
    }
}

impl From<CosmoError> for RunError {
    fn from(e: CosmoError) -> Self {
        match e {
            CosmoError::Ode { .. } => Self::Internal(e.to_string()),
            CosmoError::Invalid { field, condition } => Self::invalid(field, condition),
            other => Self::invalid("modes", other.to_string()),
        }
    }
}

impl From<HilbertError> for RunError {
    fn from(e: HilbertError) -> Self {
        Self::Internal(e.to_string())
    }
}

/// A registered experiment.
pub struct Experiment {
    pub name: &'static str,
    pub module: &'static str,
    pub description: &'static str,
    /// Accepted `[params]` keys; anything else is rejected before running.
    pub params: &'static [&'static str],
    pub tolerances: &'static [&'static str],
    run: fn(&mut Context) -> Result<(), RunError>,
}

/// `(name, module, description)` for every registered experiment.
pub fn list_experiments() -> Vec<(&'static str, &'static str, &'static str)> {
    REGISTRY.iter().map(|e| (e.name, e.module, e.description)).collect()
}

pub fn find_experiment(name: &str) -> Option<&'static Experiment> {
    REGISTRY.iter().find(|e| e.name == name)
}

/// Parameter access for a running experiment. Every value read, default or
/// not, is echoed into the record.
pub struct Context<'a> {
    cfg: &'a ExperimentConfig,
    inputs: BTreeMap<String, Value>,
    tolerances: BTreeMap<String, f64>,
    scalars: BTreeMap<String, f64>,
    tables: Vec<Table>,
    checks: Vec<Check>,
}

impl<'a> Context<'a> {
    fn new(cfg: &'a ExperimentConfig) -> Self {
        Self {
            cfg,
            inputs: BTreeMap::new(),
            tolerances: BTreeMap::new(),
            scalars: BTreeMap::new(),
            tables: Vec::new(),
            checks: Vec::new(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.cfg.seed
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.cfg.params.get(key).map(String::as_str)
    }

    pub fn f64(&mut self, key: &str, default: f64) -> Result<f64, RunError> {
        let v = match self.raw(key) {
            Some(s) => s.parse::<f64>().map_err(|_| RunError::invalid(key, format!("a number (got {s:?})")))?,
            None => default,
        };
        if !v.is_finite() {
            return Err(RunError::invalid(key, "a finite number"));
        }
        self.inputs.insert(key.into(), Value::from(v));
        Ok(v)
    }

    pub fn usize(&mut self, key: &str, default: usize) -> Result<usize, RunError> {
        let v = match self.raw(key) {
            Some(s) => {
                s.parse::<usize>().map_err(|_| RunError::invalid(key, format!("a non-negative integer (got {s:?})")))?
            }
            None => default,
        };
        self.inputs.insert(key.into(), Value::from(v as u64));
        Ok(v)
    }

    pub fn string(&mut self, key: &str, default: &str) -> String {
        let v = self.raw(key).unwrap_or(default).to_string();
        self.inputs.insert(key.into(), Value::from(v.clone()));
        v
    }

    pub fn bool(&mut self, key: &str, default: bool) -> Result<bool, RunError> {
        let v = match self.raw(key) {
            Some("true") => true,
            Some("false") => false,
            Some(s) => return Err(RunError::invalid(key, format!("true or false (got {s:?})"))),
            None => default,
        };
        self.inputs.insert(key.into(), Value::from(v));
        Ok(v)
    }

    /// Comma-separated list.
    pub fn list<T: std::str::FromStr + Into<Value> + Clone>(
        &mut self,
        key: &str,
        default: &[T],
    ) -> Result<Vec<T>, RunError> {
        let v: Vec<T> = match self.raw(key) {
            Some(s) => s
                .split(',')
                .map(|p| {
                    p.trim()
                        .parse::<T>()
                        .map_err(|_| RunError::invalid(key, format!("a comma-separated list (got {s:?})")))
                })
                .collect::<Result<_, _>>()?,
            None => default.to_vec(),
        };
        self.inputs.insert(key.into(), Value::Array(v.iter().cloned().map(Into::into).collect()));
        Ok(v)
    }

    pub fn tol(&mut self, key: &str, default: f64) -> Result<f64, RunError> {
        let v = match self.cfg.tolerances.get(key) {
            Some(s) => s.parse::<f64>().map_err(|_| RunError::invalid(key, format!("a number (got {s:?})")))?,
            None => default,
        };
        if !(v >= 0.0 && v.is_finite()) {
            return Err(RunError::invalid(key, "a finite non-negative tolerance"));
        }
        self.tolerances.insert(key.into(), v);
        Ok(v)
    }

    pub fn scalar(&mut self, key: &str, value: f64) {
        self.scalars.insert(key.into(), value);
    }

    pub fn table(&mut self, table: Table) {
        self.tables.push(table);
    }

    pub fn check(
        &mut self,
        name: &str,
        passed: bool,
        measured: Option<f64>,
        tolerance: Option<f64>,
        detail: impl Into<String>,
    ) {
        let measured = measured.filter(|v| v.is_finite());
        self.checks.push(Check { name: name.into(), passed, measured, tolerance, detail: detail.into() });
    }

    /// Passes when `measured ≤ tolerance` (NaN fails).
    pub fn check_le(&mut self, name: &str, measured: f64, tolerance: f64, detail: impl Into<String>) {
        self.check(name, measured <= tolerance, Some(measured), Some(tolerance), detail);
    }
}

/// Runs the configured experiment and writes its outputs.
pub fn execute(cfg: &ExperimentConfig) -> Result<ResultRecord, RunError> {
    let exp = find_experiment(&cfg.experiment).ok_or_else(|| RunError::UnknownExperiment(cfg.experiment.clone()))?;
    let allowed: BTreeSet<&str> = exp.params.iter().copied().collect();
    if let Some(bad) = cfg.params.keys().find(|k| !allowed.contains(k.as_str())) {
        return Err(RunError::Config(format!(
            "unknown parameter {bad:?} for {} (accepted: {})",
            exp.name,
            exp.params.join(", ")
        )));
    }
    if let Some(bad) = cfg.tolerances.keys().find(|k| !exp.tolerances.contains(&k.as_str())) {
        return Err(RunError::Config(format!(
            "unknown tolerance {bad:?} for {} (accepted: {})",
            exp.name,
            exp.tolerances.join(", ")
        )));
    }
    let mut ctx = Context::new(cfg);
    (exp.run)(&mut ctx)?;
    let passed = ctx.checks.iter().all(|c| c.passed);
    let record = ResultRecord {
        experiment: exp.name.into(),
        module: exp.module.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        timestamp: timestamp(),
        seed: cfg.seed,
        inputs: ctx.inputs,
        tolerances: ctx.tolerances,
        scalars: ctx.scalars,
        tables: ctx.tables,
        checks: ctx.checks,
        passed,
    };
    write_outputs(&record, cfg.csv.as_deref(), cfg.json.as_deref())?;
    Ok(record)
}

/// Path for the `index`-th table: the configured path for the first one,
/// `<stem>_<table>.csv` next to it for the rest.
pub fn table_path(csv: &Path, index: usize, table: &Table) -> PathBuf {
    if index == 0 {
        return csv.to_path_buf();
    }
    let stem = csv.file_stem().and_then(|s| s.to_str()).unwrap_or("table");
    csv.with_file_name(format!("{stem}_{}.csv", table.name))
}

pub fn write_outputs(record: &ResultRecord, csv: Option<&Path>, json: Option<&Path>) -> Result<(), RunError> {
    let io = |p: &Path, e: std::io::Error| RunError::Io(format!("{}: {e}", p.display()));
    if let Some(csv) = csv {
        for (i, t) in record.tables.iter().enumerate() {
            let path = table_path(csv, i, t);
            std::fs::write(&path, t.to_csv()).map_err(|e| io(&path, e))?;
        }
    }
    if let Some(json) = json {
        std::fs::write(json, record.to_json()?).map_err(|e| io(json, e))?;
    }
    Ok(())
}

/// Worker count: `GIE_THREADS` if set, else `requested`, else rayon's default.
pub fn resolve_threads(requested: Option<usize>) -> Result<Option<usize>, RunError> {
    match std::env::var(THREADS_ENV) {
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(RunError::Config(format!("{THREADS_ENV} must be a positive integer, got {s:?}"))),
        },
        Err(_) => Ok(requested.filter(|&n| n > 0)),
    }
}

/// Runs `f` inside a dedicated pool of `threads` workers (or the global pool).
pub fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R, RunError> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| RunError::Internal(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Loads a config file, runs it on `threads` workers and returns the record.
pub fn run(path: &Path, threads: Option<usize>) -> Result<ResultRecord, RunError> {
    let cfg = ExperimentConfig::load(path)?;
    let threads = resolve_threads(threads)?;
    with_threads(threads, || execute(&cfg))?
}

/// Exit status for a finished run.
pub fn exit_code(result: &Result<ResultRecord, RunError>) -> i32 {
    match result {
        Ok(r) if r.passed => 0,
        Ok(_) => 1,
        Err(e) => e.exit_code(),
    }
}
