//! Experiment specifications: a TOML file or a built-in preset name.
//!
//! A spec names a base preset, optional `[base]` overrides shared by every
//! cell, and a list of `[[cells]]`. Any [`SimConfig`] key may appear in `[base]`
//! or in a cell, with nested tables for `substrate` and `workload`:
//!
//! ```toml
//! name = "ablation"
//! preset = "paper-small"
//! replications = 5
//! seed_base = 1
//!
//! [base]
//! time_limit_s = "none"
//! work_limit = 20000
//!
//! [base.workload]
//! n_arrivals = 200
//!
//! [[cells]]
//! name = "one-round"
//! embedder = "pathgen"
//!
//! [[cells]]
//! name = "three-rounds"
//! embedder = "pathgen"
//! iterations = 3
//!
//! [scaling]
//! sizes = [20, 30, 40]
//! requests = 10
//! ```

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vnembed::sim::{EmbedderKind, SimConfig};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub cells: Vec<Cell>,
    pub replications: usize,
    /// Replication `k` of every cell runs with seed `seed_base + k`.
    pub seed_base: u64,
    pub out: Option<PathBuf>,
    pub scaling: ScalingSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub name: String,
    pub config: SimConfig,
}

/// Substrate sizes and batch size of a timing sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingSpec {
    pub sizes: Vec<usize>,
    /// Requests embedded per substrate and replication.
    pub requests: usize,
}

impl Default for ScalingSpec {
    fn default() -> Self {
        ScalingSpec { sizes: vec![20, 30, 40], requests: 10 }
    }
}

/// Command-line settings applied on top of every cell.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    /// `Some(None)` removes the limit.
    pub time_limit_s: Option<Option<f64>>,
    pub work_limit: Option<Option<usize>>,
    pub iterations: Option<usize>,
    pub arrivals: Option<usize>,
    pub replications: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    name: String,
    #[serde(default)]
    preset: Option<String>,
    #[serde(default = "one")]
    replications: usize,
    #[serde(default)]
    seed_base: u64,
    #[serde(default)]
    out: Option<PathBuf>,
    #[serde(default)]
    base: toml::Table,
    cells: Vec<toml::Table>,
    #[serde(default)]
    scaling: Option<ScalingSpec>,
}

fn one() -> usize {
    1
}

impl ExperimentSpec {
    /// Built-in experiment comparing all three embedders on a preset, 20 replications.
    pub fn preset(name: &str) -> Option<Self> {
        let base = SimConfig::preset(name)?;
        let cells = EmbedderKind::ALL
            .into_iter()
            .map(|k| Cell { name: k.name().to_string(), config: SimConfig { embedder: k, ..base.clone() } })
            .collect();
        Some(ExperimentSpec {
            name: name.to_string(),
            cells,
            replications: 20,
            seed_base: 0,
            out: None,
            scaling: ScalingSpec::default(),
        })
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let raw: RawSpec = toml::from_str(text)?;
        let preset = raw.preset.as_deref().unwrap_or("paper-small");
        let base = SimConfig::preset(preset).ok_or_else(|| CliError::Spec(format!("unknown preset {preset:?}")))?;
        let mut base = toml::Table::try_from(&base).map_err(|e| CliError::Spec(e.to_string()))?;
        merge(&mut base, raw.base);
        let mut cells = Vec::with_capacity(raw.cells.len());
        for mut table in raw.cells {
            let name = match table.remove("name") {
                Some(toml::Value::String(s)) => s,
                _ => return Err(CliError::Spec("every cell needs a string `name`".into())),
            };
            let mut merged = base.clone();
            merge(&mut merged, table);
            // Limits are optional; the string "none" removes an inherited one.
            for key in ["time_limit_s", "work_limit"] {
                if merged.get(key).and_then(|v| v.as_str()) == Some("none") {
                    merged.remove(key);
                }
            }
            let config: SimConfig = toml::Value::Table(merged)
                .try_into()
                .map_err(|e: toml::de::Error| CliError::Spec(format!("cell {name:?}: {}", e.message())))?;
            cells.push(Cell { name, config });
        }
        let spec = ExperimentSpec {
            name: raw.name,
            cells,
            replications: raw.replications,
            seed_base: raw.seed_base,
            out: raw.out,
            scaling: raw.scaling.unwrap_or_default(),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Reads `source` as a spec file, or as a preset name when no such file exists.
    pub fn load(source: &str) -> Result<Self, CliError> {
        let path = Path::new(source);
        if path.is_file() {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            return Self::from_toml(&text);
        }
        Self::preset(source).ok_or_else(|| CliError::Spec(format!("{source:?} is neither a spec file nor a preset")))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.replications == 0 {
            return Err(CliError::Spec("replications must be at least 1".into()));
        }
        if self.cells.is_empty() {
            return Err(CliError::Spec("a spec needs at least one cell".into()));
        }
        let mut names = BTreeSet::new();
        for c in &self.cells {
            if !names.insert(c.name.as_str()) {
                return Err(CliError::Spec(format!("duplicate cell name {:?}", c.name)));
            }
            if c.name.is_empty() || c.name.contains(['/', '\\']) || c.name.starts_with('.') {
                return Err(CliError::Spec(format!("cell name {:?} is not a valid directory name", c.name)));
            }
            if !(c.config.sample_interval > 0.0) {
                return Err(CliError::Spec(format!("cell {:?}: sample interval must be positive", c.name)));
            }
            c.config.substrate.validate().map_err(|e| CliError::Spec(format!("cell {:?}: {e}", c.name)))?;
            c.config.workload.validate().map_err(|e| CliError::Spec(format!("cell {:?}: {e}", c.name)))?;
        }
        if self.scaling.sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CliError::Spec("scaling sizes must be strictly ascending".into()));
        }
        if self.scaling.requests == 0 {
            return Err(CliError::Spec("scaling needs at least one request per batch".into()));
        }
        Ok(())
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), CliError> {
        if let Some(s) = o.seed {
            self.seed_base = s;
        }
        if let Some(out) = &o.out {
            self.out = Some(out.clone());
        }
        if let Some(r) = o.replications {
            self.replications = r;
        }
        for c in &mut self.cells {
            if let Some(t) = o.time_limit_s {
                c.config.time_limit_s = t;
            }
            if let Some(w) = o.work_limit {
                c.config.work_limit = w;
            }
            if let Some(k) = o.iterations {
                c.config.iterations = k;
            }
            if let Some(n) = o.arrivals {
                c.config.workload.n_arrivals = n;
            }
        }
        self.validate()
    }

    /// Config of replication `k` of `cell`.
    pub fn config(&self, cell: &Cell, k: usize) -> SimConfig {
        SimConfig { seed: self.seed_base + k as u64, ..cell.config.clone() }
    }
}

fn merge(into: &mut toml::Table, from: toml::Table) {
    for (k, v) in from {
        match (into.get_mut(&k), v) {
            (Some(toml::Value::Table(a)), toml::Value::Table(b)) => merge(a, b),
            (_, v) => {
                into.insert(k, v);
            }
        }
    }
}
