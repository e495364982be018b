//! Izhikevich neuron: parameters, floating-point reference stepping, the
//! packed compartment-state layout, and the fixed-point block pipeline.

mod compartment;
mod fixed;
mod float;
pub mod schedule;

pub use compartment::{CompartmentFields, CompartmentWords, Field, PackError};
pub use fixed::{step_fixed, GroupConstants, DT_SHIFT};
pub use float::step_float;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fxp::{self, Fixed, FixedFormat};

/// Simulation timestep in milliseconds (the `dt_shift` of 3 realizes the multiply).
pub const DT_MS: f64 = 0.125;

/// Canonical spike-cut potential in mV.
pub const DEFAULT_V_PEAK: f64 = 30.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NeuronError {
    #[error("invalid neuron parameters: {0}")]
    InvalidParams(String),
    #[error("numerical blow-up: state became non-finite (v = {v}, u = {u})")]
    NonFinite { v: f64, u: f64 },
    #[error("parameter {name} = {value} is not representable in {format}")]
    Unrepresentable {
        name: &'static str,
        value: f64,
        format: FixedFormat,
    },
    #[error(transparent)]
    Pack(#[from] PackError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeuronParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub v_peak: f64,
    /// Dopamine sensitivity applied to the summed synaptic current.
    pub beta: f64,
    pub i_const: f64,
    /// Include the `+140` term of the quadratic voltage equation.
    pub include_140: bool,
}

impl NeuronParams {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        NeuronParams {
            a,
            b,
            c,
            d,
            v_peak: DEFAULT_V_PEAK,
            beta: 0.0,
            i_const: 0.0,
            include_140: true,
        }
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_i_const(mut self, i_const: f64) -> Self {
        self.i_const = i_const;
        self
    }

    pub fn with_v_peak(mut self, v_peak: f64) -> Self {
        self.v_peak = v_peak;
        self
    }

    pub fn without_140(mut self) -> Self {
        self.include_140 = false;
        self
    }

    pub fn regular_spiking() -> Self {
        Self::new(0.02, 0.2, -65.0, 8.0)
    }

    pub fn fast_spiking() -> Self {
        Self::new(0.1, 0.2, -65.0, 2.0)
    }

    pub fn intrinsic_bursting() -> Self {
        Self::new(0.02, 0.2, -55.0, 4.0)
    }

    pub fn chattering() -> Self {
        Self::new(0.02, 0.2, -50.0, 2.0)
    }

    pub fn low_threshold() -> Self {
        Self::new(0.02, 0.25, -65.0, 2.0)
    }

    pub fn thalamo_cortical() -> Self {
        Self::new(0.02, 0.25, -65.0, 0.05)
    }

    pub fn validate(&self) -> Result<(), NeuronError> {
        let fields = [
            ("a", self.a),
            ("b", self.b),
            ("c", self.c),
            ("d", self.d),
            ("v_peak", self.v_peak),
            ("beta", self.beta),
            ("i_const", self.i_const),
        ];
        if let Some((name, _)) = fields.iter().find(|(_, v)| !v.is_finite()) {
            return Err(NeuronError::InvalidParams(format!("{name} is not finite")));
        }
        if self.a <= 0.0 {
            return Err(NeuronError::InvalidParams(format!(
                "a must be > 0, got {}",
                self.a
            )));
        }
        if self.v_peak <= self.c {
            return Err(NeuronError::InvalidParams(format!(
                "v_peak ({}) must exceed c ({})",
                self.v_peak, self.c
            )));
        }
        Ok(())
    }

    /// Checks that every per-neuron and per-group value survives encoding into
    /// its hardware field to within one LSB.
    pub fn check_representable(&self) -> Result<(), NeuronError> {
        let checks: [(&'static str, f64, FixedFormat); 7] = [
            ("a", self.a, fxp::AB_FMT),
            ("b", self.b, fxp::AB_FMT),
            ("c", self.c, fxp::CD_FMT),
            ("d", self.d, fxp::CD_FMT),
            ("i_const", self.i_const, fxp::ICONST_FMT),
            ("beta", self.beta, fxp::CONST_FMT),
            ("v_peak", self.v_peak, fxp::CONST_FMT),
        ];
        for (name, value, format) in checks {
            let enc = Fixed::encode(value, format).map_err(|_| NeuronError::Unrepresentable {
                name,
                value,
                format,
            })?;
            if (enc.decode() - value).abs() > format.lsb() {
                return Err(NeuronError::Unrepresentable {
                    name,
                    value,
                    format,
                });
            }
        }
        Ok(())
    }
}

/// Dynamic state of one neuron in real units.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NeuronState {
    pub v: f64,
    pub u: f64,
    pub i_syn: f64,
    pub delta_dop: f64,
}

impl NeuronState {
    /// `v = v0`, `u = b * v0`, no synaptic current.
    pub fn at(params: &NeuronParams, v0: f64) -> Self {
        NeuronState {
            v: v0,
            u: params.b * v0,
            i_syn: 0.0,
            delta_dop: 0.0,
        }
    }

    /// Parameter-consistent reset state: `v = c`, `u = b * c`.
    pub fn reset(params: &NeuronParams) -> Self {
        Self::at(params, params.c)
    }
}
