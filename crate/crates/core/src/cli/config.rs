//! TOML experiment files with dotted `--set` overrides.
//!
//! ```toml
//! [model]
//! n = 2000
//! lambdas = [5.0, 4.0, 3.0, 2.0]
//! sigma = 1.0
//! alpha = 0.5
//!
//! [algorithm]
//! name = "grouse"
//! step = { kind = "constant", value = 0.5 }
//! mu = 5.0
//! delta = 10.0
//!
//! [init]
//! q0 = 0.5
//!
//! [run]
//! horizon = 3.0
//! record_times = [0.5, 1.0, 1.5]
//! trials = 100
//! # seed = 42
//! ```
//!
//! Sweeps read their own tables: `[rate]`, `[portrait]`, `[phase_map]` and
//! `[scaling]`. A missing seed resolves to `--seed`, then [`DEFAULT_SEED`].

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::harness::{ExperimentConfig, PortraitConfig};
use crate::schedule::StepSchedule;
use crate::theory::OdeParams;

pub const DEFAULT_SEED: u64 = 42;

/// Parse a config file into a raw table.
pub fn load_table(path: &Path) -> Result<Table> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_table(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

pub fn parse_table(text: &str) -> std::result::Result<Table, String> {
    text.parse::<Table>().map_err(|e| e.to_string())
}

/// Apply `key.path=value`. The value is read as a TOML literal, falling back
/// to a bare string.
pub fn apply_override(table: &mut Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("--set expects key=value, got {assignment:?}")))?;
    let key = key.trim();
    let raw = raw.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(Error::Config(format!("bad override key {key:?}")));
    }
    let value = match parse_table(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => Value::String(raw.to_string()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    let (last, parents) = parts.split_last().expect("non-empty key");
    let mut cur = table;
    for p in parents {
        let entry = cur.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override {key:?}: {p:?} is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Fill `section.seed`: command line first, then the file, then the default.
pub fn resolve_seed(table: &mut Table, section: &str, cli_seed: Option<u64>) -> Result<u64> {
    let sec = table
        .get_mut(section)
        .and_then(Value::as_table_mut)
        .ok_or_else(|| Error::Config(format!("missing [{section}] table")))?;
    let seed = match (cli_seed, sec.get("seed")) {
        (Some(s), _) => s,
        (None, Some(v)) => v
            .as_integer()
            .and_then(|i| u64::try_from(i).ok())
            .ok_or_else(|| Error::Config(format!("{section}.seed must be a non-negative integer")))?,
        (None, None) => DEFAULT_SEED,
    };
    // TOML integers are signed; keep the file representable
    let as_int = i64::try_from(seed).map_err(|_| Error::Config(format!("seed {seed} exceeds the TOML integer range")))?;
    sec.insert("seed".into(), Value::Integer(as_int));
    Ok(seed)
}

pub fn section<T: DeserializeOwned>(table: &Table, name: &str) -> Result<T> {
    let v = table
        .get(name)
        .cloned()
        .ok_or_else(|| Error::Config(format!("missing [{name}] table")))?;
    v.try_into().map_err(|e: toml::de::Error| Error::Config(format!("[{name}]: {}", e.message())))
}

/// The four experiment tables.
pub fn experiment(table: &Table) -> Result<ExperimentConfig> {
    let mut t = Table::new();
    for name in ["model", "algorithm", "init", "run"] {
        let v = table
            .get(name)
            .cloned()
            .ok_or_else(|| Error::Config(format!("missing [{name}] table")))?;
        t.insert(name.into(), v);
    }
    let cfg: ExperimentConfig = Value::Table(t)
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateSection {
    pub n_list: Vec<usize>,
    pub t_star: f64,
}

/// `[portrait]`: the `d = 1` PETRELS parameters plus the plot layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortraitSection {
    pub lambda: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub mu: f64,
    pub starts: Vec<[f64; 2]>,
    pub t_end: f64,
    pub sample_interval: f64,
    pub g_max: f64,
    pub g_points: usize,
}

impl PortraitSection {
    pub fn params(&self) -> OdeParams {
        OdeParams::new(vec![self.lambda], self.sigma, self.alpha, StepSchedule::constant(0.0), self.mu)
    }

    pub fn layout(&self) -> PortraitConfig {
        PortraitConfig {
            starts: self.starts.clone(),
            t_end: self.t_end,
            sample_interval: self.sample_interval,
            g_max: self.g_max,
            g_points: self.g_points,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_nest_and_parse_literals() {
        let mut t = parse_table("[model]\nn = 10\n").unwrap();
        apply_override(&mut t, "model.n=20").unwrap();
        apply_override(&mut t, "model.lambdas=[1.0, 2.0]").unwrap();
        apply_override(&mut t, "algorithm.name=oja").unwrap();
        apply_override(&mut t, "a.b.c = 1.5").unwrap();
        assert_eq!(t["model"]["n"].as_integer(), Some(20));
        assert_eq!(t["model"]["lambdas"].as_array().unwrap().len(), 2);
        assert_eq!(t["algorithm"]["name"].as_str(), Some("oja"));
        assert_eq!(t["a"]["b"]["c"].as_float(), Some(1.5));
    }

    #[test]
    fn malformed_overrides_are_config_errors() {
        let mut t = parse_table("[model]\nn = 10\n").unwrap();
        for bad in ["model.n", "=3", "model..n=1", "model.n.x=1"] {
            assert!(matches!(apply_override(&mut t, bad), Err(Error::Config(_))), "{bad}");
        }
    }

    #[test]
    fn seed_precedence() {
        let mut t = parse_table("[run]\nseed = 7\n").unwrap();
        assert_eq!(resolve_seed(&mut t, "run", Some(9)).unwrap(), 9);
        let mut t = parse_table("[run]\nseed = 7\n").unwrap();
        assert_eq!(resolve_seed(&mut t, "run", None).unwrap(), 7);
        let mut t = parse_table("[run]\n").unwrap();
        assert_eq!(resolve_seed(&mut t, "run", None).unwrap(), DEFAULT_SEED);
        assert_eq!(t["run"]["seed"].as_integer(), Some(42));
    }
}
