//! Run configuration: a flat TOML key/value file, overridable per key.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::circuit::{CircuitParams, DEFAULT_C, DEFAULT_MU_MAX, DEFAULT_WEIGHT_RANGE};
use crate::encoding::EncodingParams;
use crate::error::{Result, WtaError};
use crate::network::{build_hierarchical, build_integration, NetworkParams, NetworkTopology, SensoryGrid, TdPolicy};
use crate::plasticity::StdpParams;

/// Environment variable naming the MNIST directory.
pub const DATA_DIR_ENV: &str = "WTA_DATA_DIR";

/// Keys that do not influence the trained weights and are left out of the
/// config hash.
const UNHASHED_KEYS: &[&str] = &[
    "test_count",
    "output_dir",
    "data_dir",
    "checkpoint_every",
    "snapshots",
    "assignment",
    "assignment_count",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Design {
    Hierarchical,
    Integration,
}

impl fmt::Display for Design {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Design::Hierarchical => "hierarchical",
            Design::Integration => "integration",
        })
    }
}

/// Where the readout labels come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Assignment {
    /// Responses over the test set itself.
    Test,
    /// Responses over the first `assignment_count` training images.
    Train,
}

/// What the second input field of an integration network shows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pairing {
    /// The same image as the first field.
    Same,
    /// The next image in the data set with the same label.
    SameLabel,
}

/// Top-down setting: `None` builds no feedback edges at all.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct TopDown(pub Option<TdPolicy>);

impl fmt::Display for TopDown {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0 {
            None => f.write_str("none"),
            Some(p) => write!(f, "{p}"),
        }
    }
}

impl FromStr for TopDown {
    type Err = WtaError;

    fn from_str(s: &str) -> Result<Self> {
        if s == "none" {
            Ok(TopDown(None))
        } else {
            Ok(TopDown(Some(s.parse()?)))
        }
    }
}

impl Serialize for TopDown {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TopDown {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub design: Design,
    pub top_down: TopDown,
    pub seed: u64,

    pub k_h: usize,
    pub k_o: usize,
    pub k_f: usize,

    pub mu_max: f64,
    pub c: f64,
    /// Width of the log-weight domain below `ln c`.
    pub weight_range: f64,
    pub target_rate: f64,
    pub psi_gain: f64,
    pub psi_initial: f64,
    /// Defaults to `-10 ln c`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi_max: Option<f64>,
    pub rate_decay: f64,

    pub tau_fast: f64,
    pub tau_slow: f64,
    pub rate_exponent: f64,
    pub window: u64,
    pub init_fraction: f64,

    pub train_count: usize,
    pub test_count: usize,
    pub duration: u64,
    pub rate_hz: f64,
    pub dt_ms: f64,
    pub threshold: u8,
    pub pairing: Pairing,

    /// Stimulus counts after which weight maps are exported.
    pub snapshots: Vec<usize>,
    /// Stimuli between checkpoints; 0 writes only the final one.
    pub checkpoint_every: usize,
    pub assignment: Assignment,
    pub assignment_count: usize,
    pub output_dir: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            design: Design::Integration,
            top_down: TopDown(None),
            seed: 1,
            k_h: 38,
            k_o: 99,
            k_f: 98,
            mu_max: DEFAULT_MU_MAX,
            c: DEFAULT_C,
            weight_range: DEFAULT_WEIGHT_RANGE,
            target_rate: 0.1,
            psi_gain: 0.003,
            psi_initial: -DEFAULT_C.ln(),
            psi_max: None,
            rate_decay: 0.9,
            tau_fast: 2.0,
            tau_slow: 8.0,
            rate_exponent: 0.8,
            window: 40,
            init_fraction: 0.25,
            train_count: 60_000,
            test_count: 10_000,
            duration: 150,
            rate_hz: 200.0,
            dt_ms: 1.0,
            threshold: 1,
            pairing: Pairing::Same,
            snapshots: vec![0, 1_000, 10_000],
            checkpoint_every: 5_000,
            assignment: Assignment::Test,
            assignment_count: 10_000,
            output_dir: PathBuf::from("runs/default"),
            data_dir: None,
        }
    }
}

/// Parses a command-line value as a TOML value, falling back to a string.
fn override_value(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig> {
        Self::from_parts(text, &[])
    }

    /// Reads `text` as a config file, then applies `key = value` overrides.
    pub fn from_parts(text: &str, overrides: &[(String, String)]) -> Result<RunConfig> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| WtaError::config(format!("config file: {e}")))?;
        for (key, raw) in overrides {
            table.insert(key.clone(), override_value(raw));
        }
        let config: RunConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| WtaError::config(e.message().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| WtaError::io(format!("reading {}", path.display()), e))?;
        Self::from_parts(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 over the canonical form of every weight-relevant key.
    pub fn hash(&self) -> [u8; 32] {
        let mut table = toml::Table::try_from(self).expect("config serializes");
        for key in UNHASHED_KEYS {
            table.remove(*key);
        }
        table.insert("psi_max".into(), toml::Value::Float(self.psi_max()));
        Sha256::digest(toml::to_string(&table).expect("table serializes").as_bytes()).into()
    }

    pub fn hash_hex(&self) -> String {
        hex(&self.hash())
    }

    pub fn psi_max(&self) -> f64 {
        self.psi_max.unwrap_or(-10.0 * self.c.ln())
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_h == 0 || self.k_o == 0 || self.k_f == 0 {
            return Err(WtaError::config("circuit sizes must be at least 1"));
        }
        if self.test_count == 0 {
            return Err(WtaError::config("test_count must be at least 1"));
        }
        if self.threshold == 0 {
            return Err(WtaError::config("threshold must lie in [1, 255]"));
        }
        if !(self.init_fraction > 0.0 && self.init_fraction <= 1.0) {
            return Err(WtaError::config("init_fraction must lie in (0, 1]"));
        }
        if self.assignment == Assignment::Train && self.assignment_count == 0 {
            return Err(WtaError::config("assignment_count must be at least 1"));
        }
        self.encoding().spike_probability()?;
        self.stdp().validate()?;
        self.circuit_template().validate()
    }

    pub fn circuit_template(&self) -> CircuitParams {
        CircuitParams {
            k: 1,
            mu_max: self.mu_max,
            c: self.c,
            weight_range: self.weight_range,
            target_rate: self.target_rate,
            psi_gain: self.psi_gain,
            psi_initial: self.psi_initial,
            psi_max: self.psi_max(),
            rate_decay: self.rate_decay,
            td: self.top_down.0.unwrap_or_default(),
        }
    }

    pub fn stdp(&self) -> StdpParams {
        StdpParams {
            tau_fast: self.tau_fast,
            tau_slow: self.tau_slow,
            c: self.c,
            weight_range: self.weight_range,
            rate_exponent: self.rate_exponent,
            window: self.window,
        }
    }

    pub fn network_params(&self) -> NetworkParams {
        NetworkParams {
            stdp: self.stdp(),
            init_fraction: self.init_fraction,
            seed: self.seed,
        }
    }

    pub fn encoding(&self) -> EncodingParams {
        EncodingParams {
            duration: self.duration,
            rate_hz: self.rate_hz,
            dt_ms: self.dt_ms,
        }
    }

    pub fn topology(&self) -> Result<NetworkTopology> {
        let template = self.circuit_template();
        let hierarchy = |prefix: &str, field: usize| -> Result<NetworkTopology> {
            let t = build_hierarchical(&SensoryGrid::mnist(prefix, field), self.k_h, self.k_o, &template)?;
            Ok(if self.top_down.0.is_some() { t.with_top_down() } else { t })
        };
        match self.design {
            Design::Hierarchical => hierarchy("h", 0),
            Design::Integration => {
                build_integration(&hierarchy("a", 0)?, &hierarchy("b", 1)?, self.k_f, &template, "top")
            }
        }
    }

    /// `(report name, circuit name)` of every network assessed by a test run.
    pub fn readouts(&self) -> Vec<(&'static str, &'static str)> {
        match self.design {
            Design::Hierarchical => vec![("H", "h.out")],
            Design::Integration => vec![("I", "top"), ("H_a", "a.out"), ("H_b", "b.out")],
        }
    }

    /// Explicit `data_dir`, else the environment variable, else `data/mnist`.
    pub fn resolve_data_dir(&self) -> PathBuf {
        self.data_dir
            .clone()
            .or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("data/mnist"))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
