//! Fixtures shared by the benchmarks.

use neurocore::bg::{build_bg, BgConfig};
use neurocore::network::{Backend, Network};
use neurocore::neuron::{CompartmentWords, GroupConstants, NeuronParams, NeuronState, DT_MS};
use neurocore::synapse::{decay_alpha_fixed, DEFAULT_TAU_MS};

/// The default basal ganglia network at raised dopamine.
pub fn bg_network(backend: Backend, threads: usize) -> Network {
    let cfg = BgConfig {
        backend,
        threads,
        ..BgConfig::default()
    };
    let mut net = build_bg(&cfg).expect("default config builds");
    net.set_dopamine(1.0);
    net
}

/// A regular-spiking neuron at rest, ready for `step_fixed`.
pub fn rs_neuron() -> (NeuronParams, CompartmentWords, GroupConstants) {
    let p = NeuronParams::regular_spiking();
    let words = CompartmentWords::encode(&p, &NeuronState::reset(&p)).expect("encodable");
    let k = GroupConstants::new(
        &p,
        decay_alpha_fixed(DT_MS, DEFAULT_TAU_MS).expect("finite"),
    )
    .expect("encodable");
    (p, words, k)
}
