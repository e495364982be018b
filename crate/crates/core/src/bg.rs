//! Basal ganglia circuit and the Go/No-Go experiment: the same network run
//! under baseline, raised and lowered dopamine.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{self, AnalysisError};
use crate::config::RunConfig;
use crate::network::{Backend, ConnectionSpec, Network, NetworkError, RecordFilter, SpikeRecord};
use crate::neuron::NeuronParams;

#[derive(Debug, Error)]
pub enum BgError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PopulationSpec {
    pub name: String,
    pub size: usize,
    pub params: NeuronParams,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorSpec {
    pub name: String,
    pub size: usize,
    pub rate_hz: f64,
}

/// Populations, generators and fully expanded connections.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CircuitSpec {
    pub populations: Vec<PopulationSpec>,
    pub generators: Vec<GeneratorSpec>,
    pub connections: Vec<ConnectionSpec>,
}

impl CircuitSpec {
    /// Sets every Izhikevich population to `size` neurons.
    pub fn with_population_size(mut self, size: usize) -> Self {
        for p in &mut self.populations {
            p.size = size;
        }
        self
    }

    pub fn with_generator_size(mut self, size: usize) -> Self {
        for g in &mut self.generators {
            g.size = size;
        }
        self
    }

    pub fn population_names(&self) -> Vec<&str> {
        self.populations.iter().map(|p| p.name.as_str()).collect()
    }

    pub fn size_of(&self, name: &str) -> Option<usize> {
        self.populations
            .iter()
            .find(|p| p.name == name)
            .map(|p| p.size)
            .or_else(|| {
                self.generators
                    .iter()
                    .find(|g| g.name == name)
                    .map(|g| g.size)
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DopamineLevels {
    pub baseline: f64,
    pub high: f64,
    pub low: f64,
}

impl Default for DopamineLevels {
    fn default() -> Self {
        DopamineLevels {
            baseline: 0.0,
            high: 1.0,
            low: -1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Baseline,
    High,
    Low,
}

impl Condition {
    pub const ALL: [Condition; 3] = [Condition::Baseline, Condition::High, Condition::Low];

    pub fn name(self) -> &'static str {
        match self {
            Condition::Baseline => "baseline",
            Condition::High => "high",
            Condition::Low => "low",
        }
    }

    pub fn delta_dop(self, levels: &DopamineLevels) -> f64 {
        match self {
            Condition::Baseline => levels.baseline,
            Condition::High => levels.high,
            Condition::Low => levels.low,
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Condition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Condition::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown condition '{s}'"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BgConfig {
    pub circuit: CircuitSpec,
    pub duration_ms: f64,
    pub analysis_start_ms: f64,
    pub seed: u64,
    pub backend: Backend,
    pub tau_ms: f64,
    pub accumulator_frac_bits: u32,
    pub threads: usize,
    pub dopamine: DopamineLevels,
    pub record: RecordFilter,
}

impl Default for BgConfig {
    /// The shipped circuit and settings.
    fn default() -> Self {
        RunConfig::default_bg().bg_config()
    }
}

impl BgConfig {
    pub fn validate(&self) -> Result<(), BgError> {
        if !(self.duration_ms.is_finite() && self.duration_ms > 0.0) {
            return Err(BgError::Config(format!(
                "duration_ms must be > 0, got {}",
                self.duration_ms
            )));
        }
        if !(self.analysis_start_ms >= 0.0 && self.analysis_start_ms < self.duration_ms) {
            return Err(BgError::Config(format!(
                "analysis_start_ms must lie in [0, duration_ms), got {}",
                self.analysis_start_ms
            )));
        }
        if let Some(p) = self.circuit.populations.iter().find(|p| p.size == 0) {
            return Err(BgError::Config(format!("population '{}' is empty", p.name)));
        }
        Ok(())
    }

    pub fn steps(&self) -> u64 {
        (self.duration_ms / crate::neuron::DT_MS).round() as u64
    }

    pub fn analysis_window(&self) -> (f64, f64) {
        (self.analysis_start_ms, self.duration_ms)
    }
}

/// Builds the network at `Δdop = 0`. Populations are added in circuit order,
/// then generators, then connections.
pub fn build_bg(cfg: &BgConfig) -> Result<Network, BgError> {
    cfg.validate()?;
    let mut net = Network::with_tau(cfg.backend, cfg.seed, cfg.tau_ms)?;
    net.set_accumulator_frac_bits(cfg.accumulator_frac_bits)?;
    net.set_threads(cfg.threads)?;
    for p in &cfg.circuit.populations {
        net.add_izhikevich(&p.name, p.size, p.params)?;
    }
    for g in &cfg.circuit.generators {
        net.add_poisson(&g.name, g.size, g.rate_hz)?;
    }
    for c in &cfg.circuit.connections {
        net.connect(c)?;
    }
    Ok(net)
}

pub fn set_dopamine(net: &mut Network, delta_dop: f64) {
    net.set_dopamine(delta_dop);
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationSummary {
    pub mean_rate_hz: f64,
    pub spike_count: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionResult {
    pub condition: Condition,
    pub delta_dop: f64,
    pub record: SpikeRecord,
    /// Per recorded population; rates over the analysis window, counts over
    /// the whole run.
    pub summary: BTreeMap<String, PopulationSummary>,
}

impl ConditionResult {
    pub fn rate(&self, population: &str) -> f64 {
        self.summary.get(population).map_or(0.0, |s| s.mean_rate_hz)
    }
}

pub fn run_condition(cfg: &BgConfig, condition: Condition) -> Result<ConditionResult, BgError> {
    let mut net = build_bg(cfg)?;
    let delta_dop = condition.delta_dop(&cfg.dopamine);
    set_dopamine(&mut net, delta_dop);
    let record = net.run(cfg.steps(), &cfg.record)?;
    let window = cfg.analysis_window();
    let mut summary = BTreeMap::new();
    let recorded: Vec<String> = match &cfg.record {
        RecordFilter::All => record.populations.clone(),
        RecordFilter::Only(names) => names.clone(),
    };
    for name in recorded {
        let mean_rate_hz = analysis::population_rate(&record, &name, net.dt_ms(), window)?;
        let spike_count = record.count(&name);
        summary.insert(
            name,
            PopulationSummary {
                mean_rate_hz,
                spike_count,
            },
        );
    }
    Ok(ConditionResult {
        condition,
        delta_dop,
        record,
        summary,
    })
}

/// Runs baseline, high and low dopamine; each condition builds its own
/// network from the same seed.
pub fn run_gonogo(cfg: &BgConfig) -> Result<Vec<ConditionResult>, BgError> {
    Condition::ALL
        .iter()
        .map(|&c| run_condition(cfg, c))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(backend: Backend) -> BgConfig {
        BgConfig {
            circuit: BgConfig::default()
                .circuit
                .with_population_size(20)
                .with_generator_size(20),
            duration_ms: 300.0,
            analysis_start_ms: 100.0,
            backend,
            ..BgConfig::default()
        }
    }

    #[test]
    fn default_build_sizes() {
        let net = build_bg(&BgConfig::default()).unwrap();
        let izh: usize = net
            .populations()
            .iter()
            .filter(|p| !p.is_source())
            .map(|p| p.size())
            .sum();
        assert_eq!(izh, 600);
        assert_eq!(net.neuron_count(), 1000);
        let again = build_bg(&BgConfig::default()).unwrap();
        assert_eq!(net.synapse_count(), again.synapse_count());
        // four fully connected striatal projections, two of them recurrent
        let d1 = net.population_id("STR_D1").unwrap();
        let d2 = net.population_id("STR_D2").unwrap();
        assert_eq!(net.count_synapses(d1, d2), 10_000);
        assert_eq!(net.count_synapses(d1, d1), 9_900);
    }

    #[test]
    fn gpe_row() {
        let cfg = BgConfig::default();
        let gpe = cfg
            .circuit
            .populations
            .iter()
            .find(|p| p.name == "GPe")
            .unwrap();
        assert_eq!(
            gpe.params,
            NeuronParams::new(0.1, 0.585, -65.0, 4.0).with_i_const(5.0)
        );
        let c = cfg
            .circuit
            .connections
            .iter()
            .find(|c| c.pre == "G_Ctx3")
            .unwrap();
        assert_eq!((c.post.as_str(), c.weight, c.prob), ("STN", 1.125, 0.05));
        assert_eq!(cfg.circuit.generators[2].rate_hz, 4.0);
    }

    #[test]
    fn unknown_reference_is_an_error() {
        let mut cfg = small(Backend::Fixed);
        cfg.circuit.connections.push(ConnectionSpec {
            pre: "STR_D1".into(),
            post: "nowhere".into(),
            weight: 1.0,
            prob: 0.1,
        });
        assert!(matches!(
            build_bg(&cfg),
            Err(BgError::Network(NetworkError::UnknownPopulation(_)))
        ));
        let mut cfg = small(Backend::Fixed);
        cfg.duration_ms = 0.0;
        assert!(matches!(build_bg(&cfg), Err(BgError::Config(_))));
    }

    #[test]
    fn dopamine_only_acts_through_synaptic_input() {
        // striatum cut off from cortex: its input current stays zero and
        // the dopamine level cannot change any spike
        for backend in [Backend::Fixed, Backend::Float] {
            let mut cfg = small(backend);
            cfg.circuit.connections.retain(|c| {
                !(c.pre.starts_with("G_Ctx") && c.post.starts_with("STR_D")) && c.pre != "G_noise"
            });
            let runs = run_gonogo(&cfg).unwrap();
            assert_eq!(runs[0].record, runs[1].record, "{backend}");
            assert_eq!(runs[0].record, runs[2].record, "{backend}");
        }
    }

    #[test]
    fn conditions_differ_with_cortical_drive() {
        let runs = run_gonogo(&small(Backend::Fixed)).unwrap();
        assert_eq!(runs.len(), 3);
        assert_eq!(runs[1].delta_dop, 1.0);
        assert_eq!(runs[2].delta_dop, -1.0);
        assert_ne!(runs[1].record, runs[2].record);
        assert!(runs[1].rate("STR_D1") > runs[2].rate("STR_D1"));
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let base = run_condition(&small(Backend::Fixed), Condition::High).unwrap();
        let mut cfg = small(Backend::Fixed);
        cfg.threads = 4;
        assert_eq!(
            base.record,
            run_condition(&cfg, Condition::High).unwrap().record
        );
        let base = run_condition(&small(Backend::Float), Condition::Low).unwrap();
        let mut cfg = small(Backend::Float);
        cfg.threads = 3;
        assert_eq!(
            base.record,
            run_condition(&cfg, Condition::Low).unwrap().record
        );
    }

    #[test]
    fn condition_names() {
        for c in Condition::ALL {
            assert_eq!(c.name().parse::<Condition>().unwrap(), c);
        }
        assert!("medium".parse::<Condition>().is_err());
    }
}
