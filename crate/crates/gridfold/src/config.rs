//! Flat `key = value` experiment configuration.
//!
//! The file is a TOML document without tables. Values are resolved in the
//! order defaults, then file, then command-line overrides; unknown keys are
//! rejected.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use gridfold_core::engine::Contention;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::RunError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Bounds,
    Simulate,
    Treefold,
    Variance,
    Percolation,
    Smallworld,
    Latency,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Bounds => "bounds",
            Kind::Simulate => "simulate",
            Kind::Treefold => "treefold",
            Kind::Variance => "variance",
            Kind::Percolation => "percolation",
            Kind::Smallworld => "smallworld",
            Kind::Latency => "latency",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
pub enum Format {
    #[serde(rename = "csv")]
    #[value(name = "csv")]
    Csv,
    #[serde(rename = "json-lines")]
    #[value(name = "json-lines")]
    JsonLines,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::JsonLines => "jsonl",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SteinerChoice {
    Exact,
    Heuristic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreefoldValues {
    /// Node `i` in row-major order holds `i + 1`.
    Sequential,
    /// Uniform values drawn from the run seed.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub experiment: Option<Kind>,
    pub seed: u64,
    #[serde(rename = "L")]
    pub side: u32,
    pub k: u32,
    pub graph_file: Option<PathBuf>,
    pub save_graph: Option<PathBuf>,

    /// Atom positions as `[x, y]` pairs.
    pub atoms: Vec<[u32; 2]>,
    /// Atom masses; empty means uniform.
    pub masses: Vec<f64>,
    pub sink: [u32; 2],
    pub steiner: SteinerChoice,

    pub contention: Contention,
    pub t_edge: u64,
    pub t_merge: u64,
    pub t_cycle: f64,
    pub k_arch: u64,

    pub origin: [u32; 2],
    pub monoid: String,
    pub values: TreefoldValues,
    /// Upper bound on per-node local cycles, drawn from the seed; 0 disables.
    pub max_local: u64,
    pub law_samples: u64,
    pub fuzz_trees: u64,

    pub f_act: f64,
    pub n_list: Vec<u32>,
    pub trials: u64,
    /// σ-level for the Monte Carlo variance check.
    pub sigma: f64,

    pub delta: f64,
    pub fields: u64,
    pub pairs_per_field: u64,
    /// σ-level for the size-bias check.
    pub bias_sigma: f64,

    #[serde(rename = "L_list")]
    pub side_list: Vec<u32>,
    pub pairs: u64,

    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub c1: f64,
    pub c2: f64,
    pub c_w: f64,
    pub m0: f64,
    pub merge_coeff: f64,
    /// Participants for the ratio curve.
    pub participants: u64,
    pub log2_n_min: u32,
    pub log2_n_max: u32,
    /// The ratio curve samples `x = 1, 2, 4, …, 2^x_max_log2`.
    pub x_max_log2: u32,

    pub threads: usize,
    pub format: Format,
    pub out: PathBuf,
    pub trace: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: None,
            seed: 0,
            side: 4,
            k: 0,
            graph_file: None,
            save_graph: None,
            atoms: vec![[3, 3], [2, 3], [3, 1]],
            masses: Vec::new(),
            sink: [0, 0],
            steiner: SteinerChoice::Exact,
            contention: Contention::NonCongesting,
            t_edge: 1,
            t_merge: 0,
            t_cycle: 1e-9,
            k_arch: 0,
            origin: [0, 0],
            monoid: "sum".into(),
            values: TreefoldValues::Sequential,
            max_local: 0,
            law_samples: 1000,
            fuzz_trees: 1000,
            f_act: 0.1,
            n_list: vec![8, 16, 32, 64],
            trials: 100_000,
            sigma: 5.0,
            delta: 0.1,
            fields: 100,
            pairs_per_field: 100,
            bias_sigma: 3.0,
            side_list: vec![16, 32, 64, 128],
            pairs: 2000,
            alpha: 1e-6,
            beta: 1e-10,
            gamma: 1e-10,
            c1: 1e-6,
            c2: 1e-6,
            c_w: 1e-9,
            m0: 4096.0,
            merge_coeff: 0.0,
            participants: 1024,
            log2_n_min: 4,
            log2_n_max: 24,
            x_max_log2: 20,
            threads: 0,
            format: Format::Csv,
            out: PathBuf::from("out"),
            trace: None,
        }
    }
}

/// One `key=value` override from the command line.
#[derive(Debug, Clone, PartialEq)]
pub struct Override {
    pub key: String,
    pub value: toml::Value,
}

impl FromStr for Override {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (key, raw) = s
            .split_once('=')
            .ok_or_else(|| format!("expected key=value, got `{s}`"))?;
        let key = key.trim().to_string();
        let raw = raw.trim();
        // Bare words that are not TOML literals are taken as strings.
        let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.to_string()));
        Ok(Override { key, value })
    }
}

impl Override {
    pub fn new(key: &str, value: impl Into<toml::Value>) -> Self {
        Override {
            key: key.into(),
            value: value.into(),
        }
    }
}

impl ExperimentConfig {
    /// Parses file text and applies `overrides` on top.
    pub fn from_sources(file_text: Option<&str>, overrides: &[Override]) -> Result<Self, RunError> {
        let mut table = match file_text {
            Some(text) => toml::from_str::<toml::Table>(text).map_err(|e| RunError::Config(e.message().to_string()))?,
            None => toml::Table::new(),
        };
        for (key, value) in &table {
            if value.is_table() {
                return Err(RunError::invalid(key, "nested tables are not allowed"));
            }
        }
        for o in overrides {
            table.insert(o.key.clone(), o.value.clone());
        }
        ExperimentConfig::deserialize(toml::Value::Table(table)).map_err(|e| {
            let msg = e.message().to_string();
            match unknown_field(&msg) {
                Some(field) => RunError::invalid(&field, "unknown key"),
                None => RunError::Config(msg),
            }
        })
    }

    pub fn load(path: Option<&Path>, overrides: &[Override]) -> Result<Self, RunError> {
        let text = match path {
            Some(p) => Some(std::fs::read_to_string(p).map_err(|e| RunError::io(p, e))?),
            None => None,
        };
        Self::from_sources(text.as_deref(), overrides)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    /// Range checks that apply before any experiment starts; each error
    /// names the offending key.
    pub fn validate(&self, kind: Kind) -> Result<(), RunError> {
        let unit = |field: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(RunError::invalid(field, format!("{v} is outside [0, 1]")))
            }
        };
        let positive = |field: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(RunError::invalid(field, format!("{v} must be positive")))
            }
        };
        let nonneg = |field: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(RunError::invalid(field, format!("{v} must be non-negative")))
            }
        };
        if self.side == 0 {
            return Err(RunError::invalid("L", "grid side must be at least 1"));
        }
        if let Some(k) = self.experiment {
            if k != kind {
                return Err(RunError::invalid("experiment", format!("config is for `{k}`, subcommand is `{kind}`")));
            }
        }
        positive("t_cycle", self.t_cycle)?;
        match kind {
            Kind::Bounds | Kind::Simulate => {
                if self.atoms.is_empty() {
                    return Err(RunError::invalid("atoms", "at least one atom required"));
                }
                if !self.masses.is_empty() && self.masses.len() != self.atoms.len() {
                    return Err(RunError::invalid("masses", "one mass per atom required"));
                }
            }
            Kind::Treefold => {
                if self.fuzz_trees == 0 {
                    return Err(RunError::invalid("fuzz_trees", "must be positive"));
                }
            }
            Kind::Variance => {
                if !(self.f_act > 0.0 && self.f_act < 1.0) {
                    return Err(RunError::invalid("f_act", format!("{} must lie strictly between 0 and 1", self.f_act)));
                }
                if self.n_list.is_empty() {
                    return Err(RunError::invalid("n_list", "must not be empty"));
                }
                if self.trials < 2 {
                    return Err(RunError::invalid("trials", "need at least 2 trials"));
                }
                positive("sigma", self.sigma)?;
            }
            Kind::Percolation => {
                unit("delta", self.delta)?;
                if self.side < 2 {
                    return Err(RunError::invalid("L", "grid side must be at least 2"));
                }
                if self.fields == 0 {
                    return Err(RunError::invalid("fields", "must be positive"));
                }
                if self.pairs_per_field == 0 {
                    return Err(RunError::invalid("pairs_per_field", "must be positive"));
                }
                positive("bias_sigma", self.bias_sigma)?;
            }
            Kind::Smallworld => {
                if self.side_list.is_empty() {
                    return Err(RunError::invalid("L_list", "must not be empty"));
                }
                if self.side_list.iter().any(|&l| l < 2) {
                    return Err(RunError::invalid("L_list", "every side must be at least 2"));
                }
                if self.pairs == 0 {
                    return Err(RunError::invalid("pairs", "must be positive"));
                }
            }
            Kind::Latency => {
                for (field, v) in [
                    ("alpha", self.alpha),
                    ("beta", self.beta),
                    ("gamma", self.gamma),
                    ("c1", self.c1),
                    ("c2", self.c2),
                    ("merge_coeff", self.merge_coeff),
                ] {
                    nonneg(field, v)?;
                }
                positive("c_w", self.c_w)?;
                positive("m0", self.m0)?;
                if !(self.f_act > 0.0 && self.f_act <= 1.0) {
                    return Err(RunError::invalid("f_act", format!("{} must lie in (0, 1]", self.f_act)));
                }
                if self.participants < 2 {
                    return Err(RunError::invalid("participants", "need at least 2"));
                }
                if self.log2_n_min < 1 || self.log2_n_min >= self.log2_n_max || self.log2_n_max > 62 {
                    return Err(RunError::invalid("log2_n_max", "need 1 ≤ log2_n_min < log2_n_max ≤ 62"));
                }
                if self.x_max_log2 > 60 {
                    return Err(RunError::invalid("x_max_log2", "must be at most 60"));
                }
            }
        }
        Ok(())
    }
}

fn unknown_field(msg: &str) -> Option<String> {
    let rest = msg.strip_prefix("unknown field `")?;
    Some(rest.split('`').next()?.to_string())
}
