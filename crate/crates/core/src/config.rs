//! TOML run configuration: simulation settings, dopamine levels, the circuit
//! (populations, generators, connections) and output options.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bg::{BgConfig, CircuitSpec, DopamineLevels, GeneratorSpec, PopulationSpec};
use crate::network::{Backend, ConnectionSpec, RecordFilter};
use crate::neuron::{NeuronParams, DEFAULT_V_PEAK};

/// The shipped basal ganglia configuration.
pub const DEFAULT_BG: &str = include_str!("../config/default_bg.toml");

/// Target name that expands to every Izhikevich population.
pub const ALL_TARGET: &str = "all";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{origin}:{line}:{column}: {message}")]
    Parse {
        origin: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{origin}: {message}")]
    Invalid { origin: String, message: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub backend: Backend,
    #[serde(default = "default_duration")]
    pub duration_ms: f64,
    #[serde(default = "default_analysis_start")]
    pub analysis_start_ms: f64,
    #[serde(default = "default_tau")]
    pub tau_ms: f64,
    #[serde(default = "default_da_bits")]
    pub accumulator_frac_bits: u32,
    #[serde(default = "default_threads")]
    pub threads: usize,
}

fn default_seed() -> u64 {
    1
}
fn default_duration() -> f64 {
    1000.0
}
fn default_analysis_start() -> f64 {
    200.0
}
fn default_tau() -> f64 {
    crate::synapse::DEFAULT_TAU_MS
}
fn default_da_bits() -> u32 {
    crate::fxp::DA_FMT.frac_bits()
}
fn default_threads() -> usize {
    1
}
fn default_v_peak() -> f64 {
    DEFAULT_V_PEAK
}
fn default_true() -> bool {
    true
}

impl Default for SimulationSection {
    fn default() -> Self {
        SimulationSection {
            seed: default_seed(),
            backend: Backend::default(),
            duration_ms: default_duration(),
            analysis_start_ms: default_analysis_start(),
            tau_ms: default_tau(),
            accumulator_frac_bits: default_da_bits(),
            threads: default_threads(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationEntry {
    pub name: String,
    pub size: usize,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    #[serde(default)]
    pub i_const: f64,
    #[serde(default)]
    pub beta: f64,
    #[serde(default = "default_v_peak")]
    pub v_peak: f64,
    #[serde(default = "default_true")]
    pub include_140: bool,
}

impl PopulationEntry {
    pub fn params(&self) -> NeuronParams {
        let p = NeuronParams::new(self.a, self.b, self.c, self.d)
            .with_i_const(self.i_const)
            .with_beta(self.beta)
            .with_v_peak(self.v_peak);
        if self.include_140 {
            p
        } else {
            p.without_140()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorEntry {
    pub name: String,
    pub size: usize,
    pub rate_hz: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RecordSetting {
    Keyword(String),
    Names(Vec<String>),
}

impl Default for RecordSetting {
    fn default() -> Self {
        RecordSetting::Keyword(ALL_TARGET.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_out")]
    pub dir: PathBuf,
    #[serde(default)]
    pub record: RecordSetting,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: default_out(),
            record: RecordSetting::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub dopamine: DopamineLevels,
    #[serde(default, rename = "population")]
    pub populations: Vec<PopulationEntry>,
    #[serde(default, rename = "generator")]
    pub generators: Vec<GeneratorEntry>,
    #[serde(default, rename = "connection")]
    pub connections: Vec<ConnectionSpec>,
    #[serde(default)]
    pub output: OutputSection,
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

impl RunConfig {
    /// The shipped default circuit.
    pub fn default_bg() -> Self {
        Self::parse(DEFAULT_BG, "default_bg.toml").expect("shipped config is valid")
    }

    /// Parses and validates `text`; `origin` names the source in diagnostics.
    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
            ConfigError::Parse {
                origin: origin.to_string(),
                line,
                column,
                message: e.message().to_string(),
            }
        })?;
        cfg.validate().map_err(|message| ConfigError::Invalid {
            origin: origin.to_string(),
            message,
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn validate(&self) -> Result<(), String> {
        let sim = &self.simulation;
        if !(sim.duration_ms.is_finite() && sim.duration_ms > 0.0) {
            return Err(format!(
                "simulation.duration_ms must be > 0, got {}",
                sim.duration_ms
            ));
        }
        if !(sim.analysis_start_ms >= 0.0 && sim.analysis_start_ms < sim.duration_ms) {
            return Err(format!(
                "simulation.analysis_start_ms must lie in [0, duration_ms), got {}",
                sim.analysis_start_ms
            ));
        }
        if !(sim.tau_ms.is_finite() && sim.tau_ms >= crate::neuron::DT_MS) {
            return Err(format!(
                "simulation.tau_ms must be >= one timestep, got {}",
                sim.tau_ms
            ));
        }
        if sim.accumulator_frac_bits > 12 {
            return Err(format!(
                "simulation.accumulator_frac_bits must be <= 12, got {}",
                sim.accumulator_frac_bits
            ));
        }
        if sim.threads == 0 {
            return Err("simulation.threads must be >= 1".into());
        }
        for (k, v) in [
            ("baseline", self.dopamine.baseline),
            ("high", self.dopamine.high),
            ("low", self.dopamine.low),
        ] {
            if !v.is_finite() {
                return Err(format!("dopamine.{k} must be finite"));
            }
        }

        let mut names = BTreeSet::new();
        for p in &self.populations {
            if p.size == 0 {
                return Err(format!("population '{}': size must be > 0", p.name));
            }
            p.params()
                .validate()
                .map_err(|e| format!("population '{}': {e}", p.name))?;
            if !names.insert(p.name.as_str()) || p.name == ALL_TARGET {
                return Err(format!(
                    "population name '{}' is reserved or duplicated",
                    p.name
                ));
            }
        }
        for g in &self.generators {
            if g.size == 0 {
                return Err(format!("generator '{}': size must be > 0", g.name));
            }
            let p = g.rate_hz * crate::neuron::DT_MS / 1000.0;
            if !(0.0..=1.0).contains(&p) {
                return Err(format!(
                    "generator '{}': rate {} Hz out of range",
                    g.name, g.rate_hz
                ));
            }
            if !names.insert(g.name.as_str()) || g.name == ALL_TARGET {
                return Err(format!(
                    "generator name '{}' is reserved or duplicated",
                    g.name
                ));
            }
        }
        let neurons: BTreeSet<&str> = self.populations.iter().map(|p| p.name.as_str()).collect();
        for (i, c) in self.connections.iter().enumerate() {
            let at = format!("connection #{} ({} -> {})", i + 1, c.pre, c.post);
            if !names.contains(c.pre.as_str()) {
                return Err(format!("{at}: unknown population '{}'", c.pre));
            }
            if c.post != ALL_TARGET && !neurons.contains(c.post.as_str()) {
                return Err(format!(
                    "{at}: '{}' is not an Izhikevich population",
                    c.post
                ));
            }
            if !(0.0..=1.0).contains(&c.prob) {
                return Err(format!("{at}: probability {} outside [0, 1]", c.prob));
            }
            crate::synapse::Weight::new(c.weight).map_err(|e| format!("{at}: {e}"))?;
        }
        if let RecordSetting::Names(list) = &self.output.record {
            if let Some(bad) = list.iter().find(|n| !names.contains(n.as_str())) {
                return Err(format!("output.record: unknown population '{bad}'"));
            }
        } else if let RecordSetting::Keyword(k) = &self.output.record {
            if k != ALL_TARGET {
                return Err(format!(
                    "output.record: expected \"all\" or a list of names, got \"{k}\""
                ));
            }
        }
        Ok(())
    }

    /// Connections with `post = "all"` expanded, in file order.
    pub fn expanded_connections(&self) -> Vec<ConnectionSpec> {
        let mut out = Vec::new();
        for c in &self.connections {
            if c.post == ALL_TARGET {
                out.extend(self.populations.iter().map(|p| ConnectionSpec {
                    post: p.name.clone(),
                    ..c.clone()
                }));
            } else {
                out.push(c.clone());
            }
        }
        out
    }

    pub fn circuit(&self) -> CircuitSpec {
        CircuitSpec {
            populations: self
                .populations
                .iter()
                .map(|p| PopulationSpec {
                    name: p.name.clone(),
                    size: p.size,
                    params: p.params(),
                })
                .collect(),
            generators: self
                .generators
                .iter()
                .map(|g| GeneratorSpec {
                    name: g.name.clone(),
                    size: g.size,
                    rate_hz: g.rate_hz,
                })
                .collect(),
            connections: self.expanded_connections(),
        }
    }

    pub fn record_filter(&self) -> RecordFilter {
        match &self.output.record {
            RecordSetting::Keyword(_) => RecordFilter::All,
            RecordSetting::Names(n) => RecordFilter::Only(n.clone()),
        }
    }

    pub fn bg_config(&self) -> BgConfig {
        let sim = &self.simulation;
        BgConfig {
            circuit: self.circuit(),
            duration_ms: sim.duration_ms,
            analysis_start_ms: sim.analysis_start_ms,
            seed: sim.seed,
            backend: sim.backend,
            tau_ms: sim.tau_ms,
            accumulator_frac_bits: sim.accumulator_frac_bits,
            threads: sim.threads,
            dopamine: self.dopamine,
            record: self.record_filter(),
        }
    }
}
