//! Run configuration: a TOML file plus `--set key=value` overrides.

use std::path::PathBuf;

use antn::antn::AntnMode;
use antn::arnn::SymmetryFlags;
use antn::lattice::{build_lattice, heisenberg_terms, HamiltonianTerms};
use antn::vmc::{LrSchedule, TrainSettings};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Parse(String),
    #[error("override `{0}` is not of the form key=value")]
    Override(String),
    #[error("{field}: {message}")]
    Invalid { field: &'static str, message: String },
}

fn invalid(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field, message: message.into() }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Mps,
    Arnn,
    Elementwise,
    Blockwise,
}

impl ModelKind {
    pub fn antn_mode(self) -> Option<AntnMode> {
        match self {
            ModelKind::Elementwise => Some(AntnMode::Elementwise),
            ModelKind::Blockwise => Some(AntnMode::Blockwise),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    pub lx: usize,
    pub ly: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Couplings {
    pub j1: f64,
    pub j2: f64,
}

impl Default for Couplings {
    fn default() -> Self {
        Self { j1: 1.0, j2: 0.5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub kind: ModelKind,
    /// Bond dimension of the MPS the model starts from.
    pub chi: usize,
    pub depth: usize,
    pub hidden: usize,
    /// Restrict to the sector with this `n_up − n_down`.
    pub magnetization: Option<i64>,
    pub z2: bool,
    pub marshall: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { kind: ModelKind::Elementwise, chi: 8, depth: 3, hidden: 32, magnetization: None, z2: false, marshall: false }
    }
}

impl ModelConfig {
    pub fn symmetry(&self) -> SymmetryFlags {
        SymmetryFlags { u1: self.magnetization, z2_flip: self.z2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DmrgConfig {
    pub chi: usize,
    pub sweeps: usize,
}

impl Default for DmrgConfig {
    fn default() -> Self {
        Self { chi: 8, sweeps: 8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub batch: usize,
    pub steps: u64,
    pub lr: f64,
    pub milestones: Vec<u64>,
    pub seed: u64,
    /// Write a checkpoint every this many steps; 0 keeps only the final one.
    pub checkpoint_every: u64,
    pub control: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let schedule = LrSchedule::default();
        Self {
            batch: 1024,
            steps: 2000,
            lr: schedule.initial,
            milestones: schedule.milestones,
            seed: 0,
            checkpoint_every: 100,
            control: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("runs") }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareConfig {
    /// Rows of the table as `[lx, ly]`.
    pub sizes: Vec<[usize; 2]>,
    pub elementwise_chi: usize,
    pub blockwise_chi: usize,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self { sizes: vec![[4, 4]], elementwise_chi: 8, blockwise_chi: 16 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub lattice: LatticeConfig,
    #[serde(default)]
    pub couplings: Couplings,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub dmrg: DmrgConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub compare: CompareConfig,
}

/// Sets `path` (dotted) in `table`, creating intermediate tables.
fn set_path(table: &mut toml::Table, path: &str, value: toml::Value) -> Result<(), ConfigError> {
    let mut keys = path.split('.').peekable();
    let mut cur = table;
    while let Some(key) = keys.next() {
        if key.is_empty() {
            return Err(ConfigError::Override(path.to_string()));
        }
        if keys.peek().is_none() {
            cur.insert(key.to_string(), value);
            return Ok(());
        }
        let entry = cur.entry(key.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| ConfigError::Parse(format!("{path}: `{key}` is not a table")))?;
    }
    Err(ConfigError::Override(path.to_string()))
}

/// Parses the value as TOML, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

impl RunConfig {
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        for o in overrides {
            let (key, value) = o.split_once('=').ok_or_else(|| ConfigError::Override(o.clone()))?;
            set_path(&mut table, key.trim(), parse_value(value.trim()))?;
        }
        let cfg: RunConfig = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let (lx, ly) = (self.lattice.lx, self.lattice.ly);
        if lx == 0 || ly == 0 {
            return Err(invalid("lattice", format!("dimensions {lx}x{ly} must be positive")));
        }
        if lx * ly > 64 {
            return Err(invalid("lattice", format!("{} sites exceeds the limit of 64", lx * ly)));
        }
        if !self.couplings.j1.is_finite() {
            return Err(invalid("couplings.j1", "must be finite"));
        }
        if !self.couplings.j2.is_finite() {
            return Err(invalid("couplings.j2", "must be finite"));
        }
        let m = &self.model;
        if m.chi == 0 {
            return Err(invalid("model.chi", "must be at least 1"));
        }
        if m.depth == 0 {
            return Err(invalid("model.depth", "must be at least 1"));
        }
        if m.hidden == 0 {
            return Err(invalid("model.hidden", "must be at least 1"));
        }
        if let Err(e) = m.symmetry().validate(lx * ly) {
            return Err(invalid("model.magnetization", e.to_string()));
        }
        if self.dmrg.chi == 0 {
            return Err(invalid("dmrg.chi", "must be at least 1"));
        }
        if self.dmrg.sweeps == 0 {
            return Err(invalid("dmrg.sweeps", "must be at least 1"));
        }
        let t = &self.train;
        if t.batch == 0 {
            return Err(invalid("train.batch", "must be at least 1"));
        }
        if !(t.lr > 0.0 && t.lr.is_finite()) {
            return Err(invalid("train.lr", format!("{} must be positive and finite", t.lr)));
        }
        if t.milestones.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("train.milestones", "must be strictly increasing"));
        }
        let c = &self.compare;
        if c.sizes.iter().any(|&[a, b]| a == 0 || b == 0 || a * b > 64) {
            return Err(invalid("compare.sizes", "every size needs 1 to 64 sites"));
        }
        if c.elementwise_chi == 0 || c.blockwise_chi == 0 {
            return Err(invalid("compare", "bond dimensions must be at least 1"));
        }
        Ok(())
    }

    pub fn n_sites(&self) -> usize {
        self.lattice.lx * self.lattice.ly
    }

    pub fn terms(&self) -> HamiltonianTerms {
        let lattice = build_lattice(self.lattice.lx, self.lattice.ly).expect("validated dimensions");
        heisenberg_terms(&lattice, self.couplings.j1, self.couplings.j2).with_marshall_sign(self.model.marshall)
    }

    pub fn train_settings(&self) -> TrainSettings {
        let t = &self.train;
        TrainSettings {
            batch: t.batch,
            steps: t.steps,
            seed: t.seed,
            schedule: LrSchedule { initial: t.lr, milestones: t.milestones.clone() },
            control: t.control,
        }
    }
}
