//! Synaptic input path: weighted spike accumulation in the dendrite
//! accumulator, exponential synaptic current, dopamine modulation, and
//! Poisson spike sources.

use serde::{Deserialize, Serialize};

use crate::fxp::{self, Fixed, FixedFormat, FxpError};
use crate::rng;

/// Synaptic time constant used throughout the circuit, in ms.
pub const DEFAULT_TAU_MS: f64 = 15.0;

/// A neuron address: population index and neuron index within it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NeuronRef {
    pub population: usize,
    pub index: usize,
}

/// Synaptic strength, kept both as the build-time real value (float backend)
/// and its Q12 encoding (fixed backend).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Weight {
    value: f64,
    fixed: Fixed,
}

impl Weight {
    /// Fails when the value does not fit the weight format or would
    /// quantize a nonzero weight to zero.
    pub fn new(value: f64) -> Result<Self, FxpError> {
        let fmt = fxp::WEIGHT_FMT;
        let fixed = Fixed::encode(value, fmt)?;
        if (fixed.decode() - value).abs() > fmt.lsb() {
            return Err(FxpError::OutOfRange {
                value,
                format: fmt.to_string(),
            });
        }
        if value != 0.0 && fixed.raw() == 0 {
            return Err(FxpError::Underflow {
                value,
                format: fmt.to_string(),
            });
        }
        Ok(Weight { value, fixed })
    }

    pub fn value(self) -> f64 {
        self.value
    }

    pub fn fixed(self) -> Fixed {
        self.fixed
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Synapse {
    pub pre: NeuronRef,
    pub post: NeuronRef,
    pub weight: Weight,
}

/// Per-neuron dendrite accumulator: sums Q12 weights exactly, then quantizes
/// the step total onto the accumulator grid (round to nearest, saturating).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DendriteAccumulator {
    sum: i64,
    format: FixedFormat,
}

impl Default for DendriteAccumulator {
    fn default() -> Self {
        Self::new(fxp::DA_FMT)
    }
}

impl DendriteAccumulator {
    pub fn new(format: FixedFormat) -> Self {
        DendriteAccumulator { sum: 0, format }
    }

    #[inline]
    pub fn add(&mut self, weight: Fixed) {
        debug_assert_eq!(weight.format(), fxp::WEIGHT_FMT);
        self.sum += weight.raw();
    }

    /// Quantized value for this step.
    #[inline]
    pub fn value(&self) -> Fixed {
        Fixed::from_raw(self.sum, fxp::REG_FMT).round_to(self.format)
    }

    /// Returns the quantized value and clears the accumulator.
    pub fn take(&mut self) -> Fixed {
        let v = self.value();
        self.sum = 0;
        v
    }
}

/// Sums the weights of the firing synapses into a fresh accumulator value.
pub fn accumulate<'a>(events: impl IntoIterator<Item = &'a Synapse>, format: FixedFormat) -> Fixed {
    let mut acc = DendriteAccumulator::new(format);
    for syn in events {
        acc.add(syn.weight.fixed());
    }
    acc.value()
}

/// `alpha = 1 - dt / tau`.
pub fn decay_alpha(dt_ms: f64, tau_ms: f64) -> f64 {
    1.0 - dt_ms / tau_ms
}

pub fn decay_alpha_fixed(dt_ms: f64, tau_ms: f64) -> Result<Fixed, FxpError> {
    Fixed::encode(decay_alpha(dt_ms, tau_ms), fxp::CONST_FMT)
}

/// `I_syn' = alpha * I_syn + DA`, with the accumulator value left-shifted
/// onto the Q12 grid. Result is in the synaptic-current field format.
#[inline]
pub fn isyn_step(i_syn: Fixed, alpha: Fixed, acc: Fixed) -> Fixed {
    i_syn
        .align_to(fxp::REG_FMT)
        .mul_rescale(alpha)
        .sat_add(acc.align_to(fxp::REG_FMT))
        .align_to(fxp::ISYN_FMT)
}

/// `I = I_const + I_syn * (1 + beta * delta_dop)`, evaluated in a scratch register.
#[inline]
pub fn modulated_current(i_const: Fixed, i_syn: Fixed, beta: Fixed, delta_dop: Fixed) -> Fixed {
    let one = Fixed::from_raw(1 << fxp::REG_FMT.frac_bits(), fxp::REG_FMT);
    let gain = delta_dop
        .align_to(fxp::REG_FMT)
        .mul_rescale(beta)
        .sat_add(one);
    let syn = i_syn.align_to(fxp::REG_FMT).mul_rescale(gain);
    i_const.align_to(fxp::REG_FMT).sat_add(syn)
}

/// Float counterpart of [`modulated_current`].
#[inline]
pub fn modulated_current_f64(i_const: f64, i_syn: f64, beta: f64, delta_dop: f64) -> f64 {
    i_const + i_syn * (1.0 + beta * delta_dop)
}

/// A group of independent Poisson spike generators.
#[derive(Clone, Debug, PartialEq)]
pub struct PoissonSource {
    rate_hz: f64,
    size: usize,
    seed: u64,
    stream: u64,
    dt_ms: f64,
    threshold: u64,
    step: u64,
}

impl PoissonSource {
    /// `stream` distinguishes sources sharing a global seed.
    pub fn new(rate_hz: f64, size: usize, seed: u64, stream: u64, dt_ms: f64) -> Self {
        let p = rate_hz * dt_ms / 1000.0;
        debug_assert!((0.0..=1.0).contains(&p), "rate * dt outside [0, 1]");
        PoissonSource {
            rate_hz,
            size,
            seed,
            stream,
            dt_ms,
            threshold: rng::bernoulli_threshold(p),
            step: 0,
        }
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Per-neuron firing probability per step.
    pub fn probability(&self) -> f64 {
        self.rate_hz * self.dt_ms / 1000.0
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    #[inline]
    pub fn fires(&self, neuron: usize, step: u64) -> bool {
        rng::counter_u64(self.seed, self.stream, neuron as u64, step) < self.threshold
    }

    /// Draws this step's spikes into `out` (one flag per neuron) and advances.
    pub fn draw_into(&mut self, out: &mut [bool]) {
        debug_assert_eq!(out.len(), self.size);
        let step = self.step;
        for (i, flag) in out.iter_mut().enumerate() {
            *flag = self.fires(i, step);
        }
        self.step += 1;
    }

    /// Indices of the neurons firing this step; advances the stream.
    pub fn poisson_step(&mut self) -> Vec<usize> {
        let step = self.step;
        self.step += 1;
        (0..self.size).filter(|&i| self.fires(i, step)).collect()
    }
}
