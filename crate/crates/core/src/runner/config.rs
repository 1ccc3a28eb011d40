//! Flat `key = value` config files with `[section]` headers.
//!
//! ```text
//! experiment = gie-scan
//! seed = 7
//!
//! [params]
//! m1 = 1e-14
//!
//! [tolerances]
//! negativity = 1e-10
//!
//! [output]
//! csv = scan.csv
//! json = scan.json
//! ```
//!
//! `#` starts a comment. Keys outside a section are limited to `experiment`
//! and `seed`; the only output keys are `csv` and `json`.

use std::collections::BTreeMap;
use std::path::PathBuf;

use super::RunError;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub seed: u64,
    pub params: BTreeMap<String, String>,
    pub tolerances: BTreeMap<String, String>,
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(experiment: impl Into<String>) -> Self {
        Self { experiment: experiment.into(), ..Self::default() }
    }

    pub fn parse(text: &str) -> Result<Self, RunError> {
        Self::parse_inner(text, None)
    }

    /// Parses a config for a known experiment. The `experiment` line may be
    /// omitted, and top-level keys other than `experiment` and `seed` are
    /// read as parameters, so a plain `key = value` file is accepted.
    pub fn parse_for(text: &str, experiment: &str) -> Result<Self, RunError> {
        let cfg = Self::parse_inner(text, Some(experiment))?;
        if cfg.experiment != experiment {
            return Err(RunError::Config(format!(
                "config names experiment {:?} but was passed to {experiment:?}",
                cfg.experiment
            )));
        }
        Ok(cfg)
    }

    fn parse_inner(text: &str, flat: Option<&str>) -> Result<Self, RunError> {
        let mut cfg = Self::default();
        let mut seen_experiment = false;
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |msg: String| RunError::Config(format!("line {}: {msg}", lineno + 1));
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| at("unterminated section header".into()))?.trim();
                if !matches!(name, "params" | "tolerances" | "output") {
                    return Err(at(format!("unknown section [{name}]")));
                }
                section = name.to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| at(format!("expected key = value, got {line:?}")))?;
            let (key, value) = (key.trim().to_string(), value.trim().to_string());
            if key.is_empty() {
                return Err(at("empty key".into()));
            }
            let duplicate = || at(format!("duplicate key {key:?}"));
            match section.as_str() {
                "" => match key.as_str() {
                    "experiment" => {
                        if seen_experiment {
                            return Err(duplicate());
                        }
                        seen_experiment = true;
                        cfg.experiment = value;
                    }
                    "seed" => {
                        cfg.seed = value
                            .parse()
                            .map_err(|_| at(format!("seed must be a non-negative integer, got {value:?}")))?;
                    }
                    _ if flat.is_some() => {
                        if cfg.params.insert(key.clone(), value).is_some() {
                            return Err(duplicate());
                        }
                    }
                    _ => return Err(at(format!("unknown key {key:?}"))),
                },
                "params" => {
                    if cfg.params.insert(key.clone(), value).is_some() {
                        return Err(duplicate());
                    }
                }
                "tolerances" => {
                    if cfg.tolerances.insert(key.clone(), value).is_some() {
                        return Err(duplicate());
                    }
                }
                _ => match key.as_str() {
                    "csv" => cfg.csv = Some(PathBuf::from(value)),
                    "json" => cfg.json = Some(PathBuf::from(value)),
                    _ => return Err(at(format!("unknown output key {key:?}"))),
                },
            }
        }
        if !seen_experiment {
            if let Some(name) = flat {
                cfg.experiment = name.to_string();
                return Ok(cfg);
            }
            return Err(RunError::Config("missing `experiment = <name>`".into()));
        }
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, RunError> {
        Self::parse(&read(path)?)
    }

    pub fn load_for(path: &std::path::Path, experiment: &str) -> Result<Self, RunError> {
        Self::parse_for(&read(path)?, experiment)
    }

    /// Sets a parameter, replacing any value from the file.
    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.params.insert(key.to_string(), value.to_string());
    }
}

fn read(path: &std::path::Path) -> Result<String, RunError> {
    std::fs::read_to_string(path).map_err(|e| RunError::Config(format!("cannot read {}: {e}", path.display())))
}
