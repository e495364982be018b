//! Fixed-point neuromorphic core emulator: Izhikevich neurons in packed
//! compartment words, a float reference, dopamine-modulated synapses, a
//! network engine, and a basal ganglia Go/No-Go model.

pub mod analysis;
pub mod bg;
pub mod config;
pub mod export;
pub mod fxp;
pub mod network;
pub mod neuron;
pub mod regimes;
pub mod rng;
pub mod synapse;

pub use analysis::{errt, firing_rate, SpikeTrain};
pub use bg::{build_bg, run_gonogo, BgConfig, Condition, ConditionResult};
pub use config::{ConfigError, RunConfig};

pub use fxp::{Fixed, FixedFormat, FxpError};
pub use network::{
    Backend, ConnectionSpec, Network, NetworkError, RecordFilter, SpikeEvent, SpikeRecord,
};
pub use neuron::{
    step_fixed, step_float, CompartmentFields, CompartmentWords, Field, GroupConstants,
    NeuronError, NeuronParams, NeuronState, DT_MS,
};
pub use synapse::{PoissonSource, Synapse, Weight};
