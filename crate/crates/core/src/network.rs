//! Populations, probabilistic connectivity, and the phase-ordered engine.
//!
//! Each call to [`Network::step`] runs, in order:
//! 1. delivery of the previous step's spikes into per-neuron accumulators
//!    (pull-based: each neuron scans its own incoming synapse list),
//! 2. Poisson source draws,
//! 3. the neuron update (synaptic current, dopamine modulation, Izhikevich step),
//! 4. spike collection for recording and next-step delivery,
//! 5. the step counter increment.
//!
//! Spikes therefore reach their targets with a one-step delay. Every phase
//! is a pure per-neuron map over immutable inputs, so results do not depend
//! on the configured thread count.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fxp::{self, Fixed, FixedFormat, FxpError};
use crate::neuron::{
    step_fixed, step_float, CompartmentWords, Field, GroupConstants, NeuronError, NeuronParams,
    NeuronState, DT_MS,
};
use crate::rng;
use crate::synapse::{
    self, decay_alpha, decay_alpha_fixed, DendriteAccumulator, NeuronRef, PoissonSource, Synapse,
    Weight,
};

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("unknown population '{0}'")]
    UnknownPopulation(String),
    #[error("duplicate population name '{0}'")]
    DuplicatePopulation(String),
    #[error("population '{0}' must have at least one neuron")]
    EmptyPopulation(String),
    #[error("connection {pre} -> {post}: probability {prob} outside [0, 1]")]
    InvalidProbability {
        pre: String,
        post: String,
        prob: f64,
    },
    #[error("population '{0}' is a spike source and cannot receive synapses")]
    NotReceiving(String),
    #[error(
        "Poisson source '{name}': rate {rate_hz} Hz gives per-step probability outside [0, 1]"
    )]
    InvalidRate { name: String, rate_hz: f64 },
    #[error("neuron {index} out of range for population '{population}'")]
    IndexOutOfRange { population: String, index: usize },
    #[error("per-neuron parameters must keep the group's beta, v_peak and offset switch")]
    GroupMismatch,
    #[error(transparent)]
    Neuron(#[from] NeuronError),
    #[error(transparent)]
    Fxp(#[from] FxpError),
    #[error("failed to build thread pool: {0}")]
    ThreadPool(String),
}

/// Numeric backend for neuron updates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    #[default]
    Fixed,
    Float,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Fixed => "fixed",
            Backend::Float => "float",
        })
    }
}

impl FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fixed" => Ok(Backend::Fixed),
            "float" => Ok(Backend::Float),
            other => Err(format!(
                "unknown backend '{other}' (expected fixed or float)"
            )),
        }
    }
}

/// A weighted, probabilistic projection between two named populations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConnectionSpec {
    pub pre: String,
    pub post: String,
    pub weight: f64,
    pub prob: f64,
}

/// A population id together with its size.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Endpoint {
    pub population: usize,
    pub size: usize,
}

/// Draws each `(pre, post)` pair independently with the projection's probability.
/// Self-pairs are skipped when both ends are the same population.
pub fn build_connections<R: Rng>(
    spec: &ConnectionSpec,
    pre: Endpoint,
    post: Endpoint,
    rng: &mut R,
) -> Result<Vec<Synapse>, NetworkError> {
    if !(0.0..=1.0).contains(&spec.prob) {
        return Err(NetworkError::InvalidProbability {
            pre: spec.pre.clone(),
            post: spec.post.clone(),
            prob: spec.prob,
        });
    }
    if pre.size == 0 {
        return Err(NetworkError::EmptyPopulation(spec.pre.clone()));
    }
    if post.size == 0 {
        return Err(NetworkError::EmptyPopulation(spec.post.clone()));
    }
    let weight = Weight::new(spec.weight)?;
    let recurrent = pre.population == post.population;
    let mut out = Vec::new();
    for i in 0..pre.size {
        for j in 0..post.size {
            if recurrent && i == j {
                continue;
            }
            if rng.gen_bool(spec.prob) {
                out.push(Synapse {
                    pre: NeuronRef {
                        population: pre.population,
                        index: i,
                    },
                    post: NeuronRef {
                        population: post.population,
                        index: j,
                    },
                    weight,
                });
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
enum NeuronStates {
    Fixed {
        words: Vec<CompartmentWords>,
        consts: GroupConstants,
    },
    Float {
        states: Vec<NeuronState>,
        params: Vec<NeuronParams>,
    },
}

#[derive(Clone, Debug)]
pub enum PopulationKind {
    Izhikevich { params: NeuronParams },
    Poisson { rate_hz: f64 },
}

#[derive(Clone, Debug)]
pub struct Population {
    name: String,
    size: usize,
    kind: PopulationKind,
    states: Option<NeuronStates>,
    source: Option<PoissonSource>,
}

impl Population {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn kind(&self) -> &PopulationKind {
        &self.kind
    }

    pub fn is_source(&self) -> bool {
        matches!(self.kind, PopulationKind::Poisson { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SpikeEvent {
    pub step: u64,
    pub population: u32,
    pub neuron: u32,
}

/// Append-only spike log; events are non-decreasing in `step`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SpikeRecord {
    pub populations: Vec<String>,
    pub sizes: Vec<usize>,
    pub events: Vec<SpikeEvent>,
}

impl SpikeRecord {
    pub fn new(populations: Vec<String>, sizes: Vec<usize>) -> Self {
        debug_assert_eq!(populations.len(), sizes.len());
        SpikeRecord {
            populations,
            sizes,
            events: Vec::new(),
        }
    }

    pub fn size_of(&self, population: &str) -> Option<usize> {
        self.population_id(population).map(|id| self.sizes[id])
    }

    pub fn population_id(&self, name: &str) -> Option<usize> {
        self.populations.iter().position(|p| p == name)
    }

    pub fn population_name(&self, id: u32) -> &str {
        &self.populations[id as usize]
    }

    pub fn count(&self, population: &str) -> usize {
        match self.population_id(population) {
            Some(id) => self
                .events
                .iter()
                .filter(|e| e.population as usize == id)
                .count(),
            None => 0,
        }
    }

    /// Spike steps of one neuron, in order.
    pub fn steps_of(&self, population: &str, neuron: usize) -> Vec<u64> {
        let Some(id) = self.population_id(population) else {
            return Vec::new();
        };
        self.events
            .iter()
            .filter(|e| e.population as usize == id && e.neuron as usize == neuron)
            .map(|e| e.step)
            .collect()
    }

    /// Events as `(step, population name, neuron)` triples.
    pub fn named_events(&self) -> impl Iterator<Item = (u64, &str, u32)> + '_ {
        self.events.iter().map(|e| {
            (
                e.step,
                self.populations[e.population as usize].as_str(),
                e.neuron,
            )
        })
    }
}

/// Which populations a run records.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub enum RecordFilter {
    #[default]
    All,
    Only(Vec<String>),
}

impl RecordFilter {
    fn mask(&self, net: &Network) -> Result<Vec<bool>, NetworkError> {
        match self {
            RecordFilter::All => Ok(vec![true; net.populations.len()]),
            RecordFilter::Only(names) => {
                let mut mask = vec![false; net.populations.len()];
                for n in names {
                    let id = net
                        .population_id(n)
                        .ok_or_else(|| NetworkError::UnknownPopulation(n.clone()))?;
                    mask[id] = true;
                }
                Ok(mask)
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Incoming {
    pre: u32,
    weight: Fixed,
    value: f64,
}

pub struct Network {
    backend: Backend,
    seed: u64,
    dt_ms: f64,
    tau_ms: f64,
    alpha: f64,
    alpha_fixed: Fixed,
    populations: Vec<Population>,
    offsets: Vec<usize>,
    incoming: Vec<Vec<Incoming>>,
    spiked: Vec<bool>,
    next_spiked: Vec<bool>,
    acc_fixed: Vec<Fixed>,
    acc_float: Vec<f64>,
    acc_format: FixedFormat,
    delta_dop: f64,
    step: u64,
    connections_built: u64,
    synapse_count: usize,
    pool: Option<rayon::ThreadPool>,
}

impl fmt::Debug for Network {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Network")
            .field("backend", &self.backend)
            .field("seed", &self.seed)
            .field(
                "populations",
                &self.populations.iter().map(|p| &p.name).collect::<Vec<_>>(),
            )
            .field("synapses", &self.synapse_count)
            .field("step", &self.step)
            .finish()
    }
}

impl Network {
    pub fn new(backend: Backend, seed: u64) -> Self {
        Self::with_tau(backend, seed, synapse::DEFAULT_TAU_MS).expect("default tau is valid")
    }

    pub fn with_tau(backend: Backend, seed: u64, tau_ms: f64) -> Result<Self, NetworkError> {
        let dt_ms = DT_MS;
        Ok(Network {
            backend,
            seed,
            dt_ms,
            tau_ms,
            alpha: decay_alpha(dt_ms, tau_ms),
            alpha_fixed: decay_alpha_fixed(dt_ms, tau_ms)?,
            populations: Vec::new(),
            offsets: Vec::new(),
            incoming: Vec::new(),
            spiked: Vec::new(),
            next_spiked: Vec::new(),
            acc_fixed: Vec::new(),
            acc_float: Vec::new(),
            acc_format: fxp::DA_FMT,
            delta_dop: 0.0,
            step: 0,
            connections_built: 0,
            synapse_count: 0,
            pool: None,
        })
    }

    /// Worker threads used inside each phase; `1` runs everything inline.
    pub fn set_threads(&mut self, threads: usize) -> Result<(), NetworkError> {
        self.pool = if threads > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build()
                    .map_err(|e| NetworkError::ThreadPool(e.to_string()))?,
            )
        } else {
            None
        };
        Ok(())
    }

    /// Fraction bits of the dendrite accumulator grid (fixed backend); the
    /// default is 3. The float backend never quantizes.
    pub fn set_accumulator_frac_bits(&mut self, frac_bits: u32) -> Result<(), NetworkError> {
        self.acc_format = FixedFormat::new(fxp::DA_FMT.width(), frac_bits)?;
        Ok(())
    }

    pub fn accumulator_format(&self) -> FixedFormat {
        self.acc_format
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dt_ms(&self) -> f64 {
        self.dt_ms
    }

    pub fn tau_ms(&self) -> f64 {
        self.tau_ms
    }

    pub fn current_step(&self) -> u64 {
        self.step
    }

    pub fn delta_dop(&self) -> f64 {
        self.delta_dop
    }

    pub fn synapse_count(&self) -> usize {
        self.synapse_count
    }

    pub fn neuron_count(&self) -> usize {
        self.spiked.len()
    }

    pub fn populations(&self) -> &[Population] {
        &self.populations
    }

    pub fn population_names(&self) -> Vec<String> {
        self.populations.iter().map(|p| p.name.clone()).collect()
    }

    pub fn population_id(&self, name: &str) -> Option<usize> {
        self.populations.iter().position(|p| p.name == name)
    }

    fn check_new(&self, name: &str, size: usize) -> Result<(), NetworkError> {
        if size == 0 {
            return Err(NetworkError::EmptyPopulation(name.to_string()));
        }
        if self.population_id(name).is_some() {
            return Err(NetworkError::DuplicatePopulation(name.to_string()));
        }
        Ok(())
    }

    fn push(&mut self, pop: Population) -> usize {
        let id = self.populations.len();
        let base = self.spiked.len();
        self.offsets.push(base);
        let n = pop.size;
        self.incoming.resize_with(base + n, Vec::new);
        self.spiked.resize(base + n, false);
        self.next_spiked.resize(base + n, false);
        self.acc_fixed.resize(base + n, Fixed::zero(fxp::DA_FMT));
        self.acc_float.resize(base + n, 0.0);
        self.populations.push(pop);
        id
    }

    /// Adds a homogeneous Izhikevich population, every neuron starting at
    /// `v = c`, `u = b * c`, `I_syn = 0`.
    pub fn add_izhikevich(
        &mut self,
        name: &str,
        size: usize,
        params: NeuronParams,
    ) -> Result<usize, NetworkError> {
        let init = NeuronState::reset(&params);
        self.add_izhikevich_from(name, size, params, init)
    }

    /// Adds an Izhikevich population with an explicit initial state.
    pub fn add_izhikevich_from(
        &mut self,
        name: &str,
        size: usize,
        params: NeuronParams,
        init: NeuronState,
    ) -> Result<usize, NetworkError> {
        self.check_new(name, size)?;
        params.validate()?;
        let init = NeuronState {
            delta_dop: self.delta_dop,
            ..init
        };
        let states = match self.backend {
            Backend::Fixed => {
                let consts = GroupConstants::new(&params, self.alpha_fixed)?;
                let words = CompartmentWords::encode(&params, &init)?;
                NeuronStates::Fixed {
                    words: vec![words; size],
                    consts,
                }
            }
            Backend::Float => NeuronStates::Float {
                states: vec![init; size],
                params: vec![params; size],
            },
        };
        Ok(self.push(Population {
            name: name.to_string(),
            size,
            kind: PopulationKind::Izhikevich { params },
            states: Some(states),
            source: None,
        }))
    }

    pub fn add_poisson(
        &mut self,
        name: &str,
        size: usize,
        rate_hz: f64,
    ) -> Result<usize, NetworkError> {
        self.check_new(name, size)?;
        let p = rate_hz * self.dt_ms / 1000.0;
        if !(0.0..=1.0).contains(&p) || !rate_hz.is_finite() {
            return Err(NetworkError::InvalidRate {
                name: name.to_string(),
                rate_hz,
            });
        }
        let stream = self.populations.len() as u64;
        let source = PoissonSource::new(rate_hz, size, self.seed, stream, self.dt_ms);
        Ok(self.push(Population {
            name: name.to_string(),
            size,
            kind: PopulationKind::Poisson { rate_hz },
            states: None,
            source: Some(source),
        }))
    }

    /// Overrides one neuron's `a, b, c, d, I_const` (group values such as
    /// `beta` and `v_peak` must match the population's).
    pub fn set_neuron_params(
        &mut self,
        population: usize,
        index: usize,
        params: NeuronParams,
    ) -> Result<(), NetworkError> {
        params.validate()?;
        let pop = &mut self.populations[population];
        if index >= pop.size {
            return Err(NetworkError::IndexOutOfRange {
                population: pop.name.clone(),
                index,
            });
        }
        let PopulationKind::Izhikevich { params: group } = &pop.kind else {
            return Err(NetworkError::NotReceiving(pop.name.clone()));
        };
        if group.beta != params.beta
            || group.v_peak != params.v_peak
            || group.include_140 != params.include_140
        {
            return Err(NetworkError::GroupMismatch);
        }
        match pop.states.as_mut().expect("izhikevich states") {
            NeuronStates::Fixed { words, .. } => {
                let state = words[index].state();
                words[index] = CompartmentWords::encode(&params, &state)?;
            }
            NeuronStates::Float { params: ps, .. } => ps[index] = params,
        }
        Ok(())
    }

    /// Builds and installs one projection. Each call draws from its own
    /// stream derived from the network seed and the call ordinal.
    pub fn connect(&mut self, spec: &ConnectionSpec) -> Result<usize, NetworkError> {
        let pre = self
            .population_id(&spec.pre)
            .ok_or_else(|| NetworkError::UnknownPopulation(spec.pre.clone()))?;
        let post = self
            .population_id(&spec.post)
            .ok_or_else(|| NetworkError::UnknownPopulation(spec.post.clone()))?;
        if self.populations[post].is_source() {
            return Err(NetworkError::NotReceiving(spec.post.clone()));
        }
        let mut rng =
            ChaCha8Rng::seed_from_u64(rng::derive_seed(self.seed, self.connections_built));
        self.connections_built += 1;
        let synapses = build_connections(
            spec,
            Endpoint {
                population: pre,
                size: self.populations[pre].size,
            },
            Endpoint {
                population: post,
                size: self.populations[post].size,
            },
            &mut rng,
        )?;
        let n = synapses.len();
        for s in synapses {
            self.add_synapse(s);
        }
        Ok(n)
    }

    /// Installs a single synapse (grouped under its post-synaptic neuron).
    pub fn add_synapse(&mut self, s: Synapse) {
        let pre = self.offsets[s.pre.population] + s.pre.index;
        let post = self.offsets[s.post.population] + s.post.index;
        self.incoming[post].push(Incoming {
            pre: pre as u32,
            weight: s.weight.fixed(),
            value: s.weight.value(),
        });
        self.synapse_count += 1;
    }

    /// Number of synapses from population `pre` onto population `post`.
    pub fn count_synapses(&self, pre: usize, post: usize) -> usize {
        let lo = self.offsets[pre] as u32;
        let hi = lo + self.populations[pre].size as u32;
        let base = self.offsets[post];
        (base..base + self.populations[post].size)
            .map(|g| {
                self.incoming[g]
                    .iter()
                    .filter(|s| (lo..hi).contains(&s.pre))
                    .count()
            })
            .sum()
    }

    /// Sets the network-wide dopamine deviation; it is broadcast into every
    /// neuron's state at the start of each update.
    pub fn set_dopamine(&mut self, delta_dop: f64) {
        self.delta_dop = delta_dop;
    }

    /// Decoded state of one neuron.
    pub fn state(&self, population: usize, index: usize) -> Option<NeuronState> {
        match self.populations.get(population)?.states.as_ref()? {
            NeuronStates::Fixed { words, .. } => words.get(index).map(CompartmentWords::state),
            NeuronStates::Float { states, .. } => states.get(index).copied(),
        }
    }

    /// Raw compartment words of one neuron (fixed backend only).
    pub fn words(&self, population: usize, index: usize) -> Option<CompartmentWords> {
        match self.populations.get(population)?.states.as_ref()? {
            NeuronStates::Fixed { words, .. } => words.get(index).copied(),
            NeuronStates::Float { .. } => None,
        }
    }

    /// Accumulator value consumed by a neuron in the most recent step.
    pub fn accumulator(&self, population: usize, index: usize) -> f64 {
        let g = self.offsets[population] + index;
        match self.backend {
            Backend::Fixed => self.acc_fixed[g].decode(),
            Backend::Float => self.acc_float[g],
        }
    }

    /// Advances one timestep and returns the spikes emitted in it.
    pub fn step(&mut self) -> Result<Vec<SpikeEvent>, NetworkError> {
        let Network {
            backend,
            alpha,
            populations,
            offsets,
            incoming,
            spiked,
            next_spiked,
            acc_fixed,
            acc_float,
            acc_format,
            delta_dop,
            step,
            pool,
            ..
        } = self;
        let acc_format = *acc_format;
        let now = *step;
        let alpha = *alpha;
        let delta_dop = *delta_dop;
        let pool = pool.as_ref();
        let spiked: &[bool] = spiked;

        // 1. delivery
        match backend {
            Backend::Fixed => {
                let deliver = |(acc, inc): (&mut Fixed, &Vec<Incoming>)| {
                    let mut da = DendriteAccumulator::new(acc_format);
                    for s in inc.iter().filter(|s| spiked[s.pre as usize]) {
                        da.add(s.weight);
                    }
                    *acc = da.value();
                };
                run_phase(pool, acc_fixed.as_mut_slice(), incoming.as_slice(), deliver);
            }
            Backend::Float => {
                let deliver = |(acc, inc): (&mut f64, &Vec<Incoming>)| {
                    *acc = inc
                        .iter()
                        .filter(|s| spiked[s.pre as usize])
                        .map(|s| s.value)
                        .sum();
                };
                run_phase(pool, acc_float.as_mut_slice(), incoming.as_slice(), deliver);
            }
        }

        // 2. sources
        for (pop, &base) in populations.iter_mut().zip(offsets.iter()) {
            if let Some(src) = pop.source.as_mut() {
                src.draw_into(&mut next_spiked[base..base + pop.size]);
            }
        }

        // 3. neuron update
        let ddop_fixed = Fixed::encode(delta_dop, fxp::DDOP_FMT)?;
        for (pop, &base) in populations.iter_mut().zip(offsets.iter()) {
            let range = base..base + pop.size;
            let out = &mut next_spiked[range.clone()];
            match pop.states.as_mut() {
                None => {}
                Some(NeuronStates::Fixed { words, consts }) => {
                    let consts = *consts;
                    let update = |((w, flag), da): ((&mut CompartmentWords, &mut bool), &Fixed)| {
                        w.set(Field::DeltaDop, ddop_fixed);
                        let (next, spk) = step_fixed(*w, *da, &consts);
                        *w = next;
                        *flag = spk;
                    };
                    let items = words.iter_mut().zip(out.iter_mut());
                    match pool {
                        Some(p) => p.install(|| {
                            words
                                .par_iter_mut()
                                .zip(out.par_iter_mut())
                                .zip(acc_fixed[range.clone()].par_iter())
                                .for_each(update)
                        }),
                        None => items.zip(acc_fixed[range.clone()].iter()).for_each(update),
                    }
                }
                Some(NeuronStates::Float { states, params }) => {
                    let update = |(((s, p), flag), acc): (
                        ((&mut NeuronState, &NeuronParams), &mut bool),
                        &f64,
                    )|
                     -> Result<(), NeuronError> {
                        s.delta_dop = delta_dop;
                        s.i_syn = alpha * s.i_syn + acc;
                        let current =
                            synapse::modulated_current_f64(p.i_const, s.i_syn, p.beta, delta_dop);
                        let (next, spk) = step_float(p, s, current, DT_MS)?;
                        *s = next;
                        *flag = spk;
                        Ok(())
                    };
                    match pool {
                        Some(pl) => pl.install(|| {
                            states
                                .par_iter_mut()
                                .zip(params.par_iter())
                                .zip(out.par_iter_mut())
                                .zip(acc_float[range.clone()].par_iter())
                                .try_for_each(update)
                        })?,
                        None => states
                            .iter_mut()
                            .zip(params.iter())
                            .zip(out.iter_mut())
                            .zip(acc_float[range.clone()].iter())
                            .try_for_each(update)?,
                    }
                }
            }
        }

        // 4. collect
        let mut events = Vec::new();
        for (pid, (pop, &base)) in populations.iter().zip(offsets.iter()).enumerate() {
            for (i, &s) in next_spiked[base..base + pop.size].iter().enumerate() {
                if s {
                    events.push(SpikeEvent {
                        step: now,
                        population: pid as u32,
                        neuron: i as u32,
                    });
                }
            }
        }
        std::mem::swap(&mut self.spiked, &mut self.next_spiked);

        // 5. advance
        self.step += 1;
        Ok(events)
    }

    /// Steps `steps` times, recording the populations selected by `filter`.
    pub fn run(&mut self, steps: u64, filter: &RecordFilter) -> Result<SpikeRecord, NetworkError> {
        let mask = filter.mask(self)?;
        let sizes = self.populations.iter().map(|p| p.size).collect();
        let mut record = SpikeRecord::new(self.population_names(), sizes);
        for _ in 0..steps {
            let events = self.step()?;
            record
                .events
                .extend(events.into_iter().filter(|e| mask[e.population as usize]));
        }
        Ok(record)
    }
}

/// Runs `f` over zipped items, on the pool when one is configured.
fn run_phase<A, B, F>(pool: Option<&rayon::ThreadPool>, a: &mut [A], b: &[B], f: F)
where
    A: Send,
    B: Sync,
    F: Fn((&mut A, &B)) + Sync + Send,
{
    match pool {
        Some(p) => p.install(|| a.par_iter_mut().zip(b.par_iter()).for_each(&f)),
        None => a.iter_mut().zip(b.iter()).for_each(f),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(pre: &str, post: &str, weight: f64, prob: f64) -> ConnectionSpec {
        ConnectionSpec {
            pre: pre.into(),
            post: post.into(),
            weight,
            prob,
        }
    }

    fn ep(population: usize, size: usize) -> Endpoint {
        Endpoint { population, size }
    }

    #[test]
    fn full_cross_projection_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let syns = build_connections(&spec("A", "B", -0.3, 1.0), ep(0, 100), ep(1, 100), &mut rng)
            .unwrap();
        assert_eq!(syns.len(), 10_000);
        assert_eq!(syns[0].weight.fixed().raw(), -1229);
    }

    #[test]
    fn recurrent_projection_skips_self_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let syns = build_connections(&spec("A", "A", -0.3, 1.0), ep(0, 100), ep(0, 100), &mut rng)
            .unwrap();
        assert_eq!(syns.len(), 9_900);
        assert!(syns.iter().all(|s| s.pre.index != s.post.index));
    }

    #[test]
    fn zero_probability_is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let syns =
            build_connections(&spec("A", "B", 1.0, 0.0), ep(0, 100), ep(1, 100), &mut rng).unwrap();
        assert!(syns.is_empty());
    }

    #[test]
    fn probability_out_of_range_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for p in [-0.1, 1.5, f64::NAN] {
            assert!(matches!(
                build_connections(&spec("A", "B", 1.0, p), ep(0, 10), ep(1, 10), &mut rng),
                Err(NetworkError::InvalidProbability { .. })
            ));
        }
    }

    #[test]
    fn sparse_projection_within_binomial_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = build_connections(
            &spec("A", "B", -7.5, 0.15),
            ep(0, 100),
            ep(1, 100),
            &mut rng,
        )
        .unwrap()
        .len() as f64;
        let sigma = (10_000.0f64 * 0.15 * 0.85).sqrt();
        assert!((n - 1500.0).abs() <= 4.0 * sigma, "{n}");
    }

    #[test]
    fn empty_network_advances() {
        let mut net = Network::new(Backend::Fixed, 0);
        assert!(net.step().unwrap().is_empty());
        assert_eq!(net.current_step(), 1);
        let rec = net.run(0, &RecordFilter::All).unwrap();
        assert!(rec.events.is_empty());
        assert_eq!(net.current_step(), 1);
    }

    #[test]
    fn engine_matches_direct_float_loop() {
        let params = NeuronParams::regular_spiking().with_i_const(10.0);
        let mut net = Network::new(Backend::Float, 0);
        net.add_izhikevich("rs", 1, params).unwrap();
        let rec = net.run(2000, &RecordFilter::All).unwrap();

        let mut s = NeuronState::reset(&params);
        let mut direct = Vec::new();
        for k in 0..2000u64 {
            let (next, spk) = step_float(&params, &s, 10.0, DT_MS).unwrap();
            if spk {
                direct.push(k);
            }
            s = next;
        }
        assert!(!direct.is_empty());
        assert_eq!(rec.steps_of("rs", 0), direct);
    }

    fn chain(backend: Backend) -> Network {
        let mut net = Network::new(backend, 3);
        // pre fires on its own; post is silent unless driven
        net.add_izhikevich("pre", 1, NeuronParams::fast_spiking().with_i_const(7.5))
            .unwrap();
        net.add_izhikevich("post", 1, NeuronParams::regular_spiking())
            .unwrap();
        net.connect(&spec("pre", "post", 7.5, 1.0)).unwrap();
        net
    }

    #[test]
    fn one_step_delivery_delay() {
        for backend in [Backend::Fixed, Backend::Float] {
            let mut net = chain(backend);
            let mut first_pre = None;
            for _ in 0..4000 {
                let events = net.step().unwrap();
                let acc = net.accumulator(1, 0);
                if let Some(k) = first_pre {
                    if net.current_step() - 1 == k + 1 {
                        assert_eq!(acc, 7.5, "{backend}");
                        break;
                    }
                } else {
                    assert_eq!(acc, 0.0);
                }
                if first_pre.is_none() && events.iter().any(|e| e.population == 0) {
                    first_pre = Some(net.current_step() - 1);
                }
            }
            assert!(first_pre.is_some());
        }
    }

    #[test]
    fn strong_input_drives_post_neuron() {
        let mut net = chain(Backend::Fixed);
        let rec = net.run(8000, &RecordFilter::All).unwrap();
        assert!(rec.count("pre") > 0);
        assert!(rec.count("post") > 0);
        let filtered = chain(Backend::Fixed)
            .run(8000, &RecordFilter::Only(vec!["post".into()]))
            .unwrap();
        assert_eq!(filtered.count("pre"), 0);
        assert_eq!(filtered.count("post"), rec.count("post"));
        assert!(rec.events.windows(2).all(|w| w[0].step <= w[1].step));
    }

    #[test]
    fn unknown_names_are_errors() {
        let mut net = Network::new(Backend::Fixed, 0);
        net.add_izhikevich("a", 2, NeuronParams::regular_spiking())
            .unwrap();
        assert!(matches!(
            net.connect(&spec("a", "zz", 1.0, 1.0)),
            Err(NetworkError::UnknownPopulation(_))
        ));
        assert!(net.run(1, &RecordFilter::Only(vec!["zz".into()])).is_err());
        assert!(matches!(
            net.add_izhikevich("a", 2, NeuronParams::regular_spiking()),
            Err(NetworkError::DuplicatePopulation(_))
        ));
        assert!(matches!(
            net.add_izhikevich("b", 0, NeuronParams::regular_spiking()),
            Err(NetworkError::EmptyPopulation(_))
        ));
        net.add_poisson("g", 3, 10.0).unwrap();
        assert!(matches!(
            net.connect(&spec("a", "g", 1.0, 1.0)),
            Err(NetworkError::NotReceiving(_))
        ));
    }

    #[test]
    fn fixed_backend_rejects_unrepresentable_bias() {
        let mut net = Network::new(Backend::Fixed, 0);
        let err = net
            .add_izhikevich("x", 1, NeuronParams::regular_spiking().with_i_const(10.0))
            .unwrap_err();
        assert!(matches!(
            err,
            NetworkError::Neuron(NeuronError::Unrepresentable {
                name: "i_const",
                ..
            })
        ));
    }

    #[test]
    fn delivery_conserves_events() {
        // each source spike reaches exactly its targets once
        let mut net = Network::new(Backend::Fixed, 11);
        net.add_poisson("src", 20, 400.0).unwrap();
        net.add_izhikevich("dst", 30, NeuronParams::regular_spiking())
            .unwrap();
        net.connect(&spec("src", "dst", 1.0, 0.3)).unwrap();
        let mut total_expected = 0.0;
        let mut total_delivered = 0.0;
        let mut last: Vec<SpikeEvent> = Vec::new();
        for _ in 0..500 {
            let fan: f64 = last
                .iter()
                .filter(|e| e.population == 0)
                .map(|e| {
                    net.incoming
                        .iter()
                        .flatten()
                        .filter(|s| s.pre == e.neuron)
                        .count() as f64
                })
                .sum();
            last = net.step().unwrap();
            total_expected += fan;
            total_delivered += (0..30).map(|i| net.accumulator(1, i)).sum::<f64>();
        }
        assert!(total_expected > 0.0);
        assert_eq!(total_expected, total_delivered);
    }

    #[test]
    fn per_neuron_parameters() {
        let mut net = Network::new(Backend::Float, 0);
        let id = net
            .add_izhikevich("p", 2, NeuronParams::regular_spiking().with_i_const(10.0))
            .unwrap();
        net.set_neuron_params(id, 1, NeuronParams::fast_spiking().with_i_const(10.0))
            .unwrap();
        let rec = net.run(8000, &RecordFilter::All).unwrap();
        assert!(rec.steps_of("p", 1).len() > 2 * rec.steps_of("p", 0).len());
        assert!(matches!(
            net.set_neuron_params(id, 0, NeuronParams::regular_spiking().with_beta(0.5)),
            Err(NetworkError::GroupMismatch)
        ));
    }
}
