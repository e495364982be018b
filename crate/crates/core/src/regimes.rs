//! Single-neuron experiments: the six canonical firing regimes, the
//! float-vs-fixed ERRt comparison, and trace-level backend agreement.
//!
//! The stimulus is written into the synaptic-current field every step with
//! the decay constant fixed at 1, so both backends see exactly the same
//! input current. `I_const` stays 0: its field cannot hold the usual test
//! currents.

use std::fmt;
use std::io::Write;

use serde::Serialize;
use thiserror::Error;

use crate::analysis::{self, AnalysisError, SpikeTrain};
use crate::fxp::{self, Fixed};
use crate::network::Backend;
use crate::neuron::{
    step_fixed, step_float, CompartmentWords, Field, GroupConstants, NeuronError, NeuronParams,
    NeuronState, DT_MS,
};

/// Spikes before this time are ignored by the tonic-spiking check.
pub const TRANSIENT_MS: f64 = 200.0;
pub const TONIC_CV_MAX: f64 = 0.1;
pub const FS_RATE_RATIO: f64 = 2.0;
pub const BURST_ISI_MAX_MS: f64 = 10.0;
pub const INTERBURST_ISI_MIN_MS: f64 = 20.0;
pub const REBOUND_WINDOW_MS: f64 = 100.0;

pub const TEST_CURRENT: f64 = 10.0;
pub const TEST_DURATION_MS: f64 = 1000.0;
/// Input current below the regular-spiking rheobase.
pub const LTS_CURRENT: f64 = 2.0;
pub const REBOUND_CURRENT: f64 = -10.0;
pub const REBOUND_ONSET_MS: f64 = 100.0;
pub const REBOUND_RELEASE_MS: f64 = 300.0;
pub const REBOUND_DURATION_MS: f64 = 600.0;

#[derive(Debug, Error)]
pub enum RegimeError {
    #[error(transparent)]
    Neuron(#[from] NeuronError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("stimulus current {0} does not fit the synaptic current field")]
    Stimulus(f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Piecewise-constant current: each `(start_ms, current)` holds until the
/// next start.
#[derive(Clone, Debug, PartialEq)]
pub struct Stimulus {
    segments: Vec<(f64, f64)>,
}

impl Stimulus {
    pub fn constant(current: f64) -> Self {
        Stimulus {
            segments: vec![(0.0, current)],
        }
    }

    /// Segments must start at 0 and be sorted by start time.
    pub fn piecewise(segments: Vec<(f64, f64)>) -> Self {
        debug_assert!(segments.first().is_some_and(|s| s.0 == 0.0));
        debug_assert!(segments.windows(2).all(|w| w[0].0 < w[1].0));
        Stimulus { segments }
    }

    pub fn at(&self, t_ms: f64) -> f64 {
        self.segments
            .iter()
            .rev()
            .find(|(start, _)| *start <= t_ms)
            .map_or(0.0, |s| s.1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Protocol {
    pub params: NeuronParams,
    pub v0: f64,
    pub stimulus: Stimulus,
    pub duration_ms: f64,
}

impl Protocol {
    /// Constant current from rest at `v0 = c`, `u0 = b * v0`.
    pub fn constant(params: NeuronParams, current: f64, duration_ms: f64) -> Self {
        Protocol {
            params,
            v0: params.c,
            stimulus: Stimulus::constant(current),
            duration_ms,
        }
    }

    pub fn steps(&self) -> usize {
        (self.duration_ms / DT_MS).round() as usize
    }
}

/// Membrane trace and spikes of one simulated neuron.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub backend: Backend,
    /// `v[k]` is the membrane potential entering step `k`.
    pub v: Vec<f64>,
    pub spike_steps: Vec<u64>,
}

impl Trace {
    pub fn train(&self) -> SpikeTrain {
        SpikeTrain::from_steps(&self.spike_steps, DT_MS).expect("steps increase")
    }

    pub fn spikes_in(&self, start_ms: f64, end_ms: f64) -> usize {
        self.train()
            .times()
            .iter()
            .filter(|&&t| t >= start_ms && t < end_ms)
            .count()
    }
}

pub fn simulate(protocol: &Protocol, backend: Backend) -> Result<Trace, RegimeError> {
    let p = &protocol.params;
    p.validate()?;
    let init = NeuronState::at(p, protocol.v0);
    let n = protocol.steps();
    let mut v = Vec::with_capacity(n);
    let mut spike_steps = Vec::new();
    match backend {
        Backend::Float => {
            let mut s = init;
            for k in 0..n {
                v.push(s.v);
                let i = protocol.stimulus.at(k as f64 * DT_MS);
                let current = crate::synapse::modulated_current_f64(p.i_const, i, p.beta, 0.0);
                let (next, spiked) = step_float(p, &s, current, DT_MS)?;
                if spiked {
                    spike_steps.push(k as u64);
                }
                s = next;
            }
        }
        Backend::Fixed => {
            let one = Fixed::encode(1.0, fxp::CONST_FMT).expect("finite");
            let consts = GroupConstants::new(p, one)?;
            let mut words = CompartmentWords::encode(p, &init)?;
            let zero = Fixed::zero(fxp::DA_FMT);
            for k in 0..n {
                v.push(words.get(Field::V).decode());
                let i = protocol.stimulus.at(k as f64 * DT_MS);
                let fixed_i =
                    Fixed::encode(i, fxp::ISYN_FMT).map_err(|_| RegimeError::Stimulus(i))?;
                if !fxp::ISYN_FMT.contains(fixed_i.raw())
                    || (fixed_i.decode() - i).abs() > fxp::ISYN_FMT.lsb()
                {
                    return Err(RegimeError::Stimulus(i));
                }
                words.set(Field::Isyn, fixed_i);
                let (next, spiked) = step_fixed(words, zero, &consts);
                if spiked {
                    spike_steps.push(k as u64);
                }
                words = next;
            }
        }
    }
    Ok(Trace {
        backend,
        v,
        spike_steps,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Regime {
    RegularSpiking,
    FastSpiking,
    IntrinsicBursting,
    Chattering,
    LowThreshold,
    Rebound,
}

impl Regime {
    pub const ALL: [Regime; 6] = [
        Regime::RegularSpiking,
        Regime::FastSpiking,
        Regime::IntrinsicBursting,
        Regime::Chattering,
        Regime::LowThreshold,
        Regime::Rebound,
    ];

    pub fn short(self) -> &'static str {
        match self {
            Regime::RegularSpiking => "RS",
            Regime::FastSpiking => "FS",
            Regime::IntrinsicBursting => "IB",
            Regime::Chattering => "CH",
            Regime::LowThreshold => "LTS",
            Regime::Rebound => "TC",
        }
    }

    pub fn params(self) -> NeuronParams {
        match self {
            Regime::RegularSpiking => NeuronParams::regular_spiking(),
            Regime::FastSpiking => NeuronParams::fast_spiking(),
            Regime::IntrinsicBursting => NeuronParams::intrinsic_bursting(),
            Regime::Chattering => NeuronParams::chattering(),
            Regime::LowThreshold => NeuronParams::low_threshold(),
            Regime::Rebound => NeuronParams::thalamo_cortical(),
        }
    }

    pub fn protocol(self) -> Protocol {
        let p = self.params();
        match self {
            Regime::LowThreshold => Protocol::constant(p, LTS_CURRENT, TEST_DURATION_MS),
            Regime::Rebound => Protocol {
                params: p,
                v0: p.c,
                stimulus: Stimulus::piecewise(vec![
                    (0.0, 0.0),
                    (REBOUND_ONSET_MS, REBOUND_CURRENT),
                    (REBOUND_RELEASE_MS, 0.0),
                ]),
                duration_ms: REBOUND_DURATION_MS,
            },
            _ => Protocol::constant(p, TEST_CURRENT, TEST_DURATION_MS),
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegimeCheck {
    pub regime: Regime,
    pub backend: Backend,
    pub spikes: usize,
    pub passed: bool,
    pub detail: String,
}

/// Runs one regime's protocol and its detector.
pub fn check_regime(regime: Regime, backend: Backend) -> Result<(RegimeCheck, Trace), RegimeError> {
    let protocol = regime.protocol();
    let trace = simulate(&protocol, backend)?;
    let train = trace.train();
    let isis = train.isis();
    let (passed, detail) = match regime {
        Regime::RegularSpiking => {
            let late = train.after(TRANSIENT_MS).isis();
            match analysis::coefficient_of_variation(&late) {
                Some(cv) => (
                    late.len() >= 3 && cv < TONIC_CV_MAX,
                    format!("ISI CV {cv:.4} after {TRANSIENT_MS} ms"),
                ),
                None => (false, "too few spikes after transient".into()),
            }
        }
        Regime::FastSpiking => {
            let rs = simulate(&Regime::RegularSpiking.protocol(), backend)?.train();
            let window = (0.0, protocol.duration_ms);
            let fs_rate = analysis::firing_rate(&train, window)?;
            let rs_rate = analysis::firing_rate(&rs, window)?;
            (
                rs_rate > 0.0 && fs_rate > FS_RATE_RATIO * rs_rate,
                format!("rate {fs_rate:.1} Hz vs RS {rs_rate:.1} Hz"),
            )
        }
        Regime::IntrinsicBursting | Regime::Chattering => {
            let min = isis.iter().copied().fold(f64::INFINITY, f64::min);
            let max = isis.iter().copied().fold(0.0, f64::max);
            (
                min < BURST_ISI_MAX_MS && max > INTERBURST_ISI_MIN_MS,
                format!("ISI min {min:.3} ms, max {max:.3} ms"),
            )
        }
        Regime::LowThreshold => {
            let rs = Protocol::constant(
                NeuronParams::regular_spiking(),
                LTS_CURRENT,
                TEST_DURATION_MS,
            );
            let rs_spikes = simulate(&rs, backend)?.spike_steps.len();
            (
                !train.is_empty() && rs_spikes == 0,
                format!(
                    "{} spikes at I={LTS_CURRENT}; RS fires {rs_spikes}",
                    train.len()
                ),
            )
        }
        Regime::Rebound => {
            let during = trace.spikes_in(REBOUND_ONSET_MS, REBOUND_RELEASE_MS);
            let after = trace.spikes_in(REBOUND_RELEASE_MS, REBOUND_RELEASE_MS + REBOUND_WINDOW_MS);
            let first = train.after(REBOUND_RELEASE_MS).times().first().copied();
            (
                during == 0 && after >= 1,
                match first {
                    Some(t) => format!(
                        "{during} spikes during hold, {after} within {REBOUND_WINDOW_MS} ms of release (first at +{:.3} ms)",
                        t - REBOUND_RELEASE_MS
                    ),
                    None => format!("{during} spikes during hold, none after release"),
                },
            )
        }
    };
    Ok((
        RegimeCheck {
            regime,
            backend,
            spikes: train.len(),
            passed,
            detail,
        },
        trace,
    ))
}

/// Every regime on both backends, with traces.
pub fn run_regimes() -> Result<Vec<(RegimeCheck, Trace)>, RegimeError> {
    let mut out = Vec::new();
    for regime in Regime::ALL {
        for backend in [Backend::Float, Backend::Fixed] {
            out.push(check_regime(regime, backend)?);
        }
    }
    Ok(out)
}

/// `step,time_ms,v_float,v_fixed` for two traces of equal length.
pub fn write_trace_csv<W: Write>(float: &Trace, fixed: &Trace, out: W) -> Result<(), RegimeError> {
    let mut w = std::io::BufWriter::new(out);
    writeln!(w, "step,time_ms,v_float,v_fixed")?;
    for (k, (a, b)) in float.v.iter().zip(&fixed.v).enumerate() {
        writeln!(w, "{k},{},{a},{b}", k as f64 * DT_MS)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrtRow {
    pub label: String,
    pub float: SpikeTrain,
    pub fixed: SpikeTrain,
    pub errt_percent: f64,
    pub mean_gap_percent: f64,
}

/// Float oracle versus fixed point under the constant test current.
pub fn errt_experiment(label: &str, params: NeuronParams) -> Result<ErrtRow, RegimeError> {
    let protocol = Protocol::constant(params, TEST_CURRENT, TEST_DURATION_MS);
    let float = simulate(&protocol, Backend::Float)?.train();
    let fixed = simulate(&protocol, Backend::Fixed)?.train();
    Ok(ErrtRow {
        label: label.to_string(),
        errt_percent: analysis::errt(&float, &fixed)?,
        mean_gap_percent: analysis::errt_mean_gaps(&float, &fixed)?,
        float,
        fixed,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Agreement {
    pub first_spike_float: Option<u64>,
    pub first_spike_fixed: Option<u64>,
    /// Max |v_fixed - v_float| over the steps before either first spike.
    pub max_pre_spike_dv: f64,
}

impl Agreement {
    pub fn first_spike_diff(&self) -> Option<u64> {
        Some(self.first_spike_float?.abs_diff(self.first_spike_fixed?))
    }
}

pub fn agreement(protocol: &Protocol) -> Result<Agreement, RegimeError> {
    let fl = simulate(protocol, Backend::Float)?;
    let fx = simulate(protocol, Backend::Fixed)?;
    let a = fl.spike_steps.first().copied();
    let b = fx.spike_steps.first().copied();
    let end = match (a, b) {
        (Some(a), Some(b)) => a.min(b) as usize,
        (Some(x), None) | (None, Some(x)) => x as usize,
        (None, None) => fl.v.len(),
    };
    let max_pre_spike_dv = fl.v[..end]
        .iter()
        .zip(&fx.v[..end])
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    Ok(Agreement {
        first_spike_float: a,
        first_spike_fixed: b,
        max_pre_spike_dv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stimulus_segments() {
        let s = Stimulus::piecewise(vec![(0.0, 0.0), (100.0, -10.0), (300.0, 0.0)]);
        assert_eq!(s.at(0.0), 0.0);
        assert_eq!(s.at(99.875), 0.0);
        assert_eq!(s.at(100.0), -10.0);
        assert_eq!(s.at(299.875), -10.0);
        assert_eq!(s.at(300.0), 0.0);
    }

    #[test]
    fn float_backend_matches_hand_loop() {
        let p = NeuronParams::regular_spiking();
        let trace = simulate(&Protocol::constant(p, 10.0, 50.0), Backend::Float).unwrap();
        let mut s = NeuronState::at(&p, -65.0);
        for k in 0..400 {
            assert_eq!(trace.v[k], s.v);
            s = step_float(&p, &s, 10.0, DT_MS).unwrap().0;
        }
    }

    #[test]
    fn first_rs_interval() {
        // 23.75 ms between the first two spikes, identical on both backends
        for backend in [Backend::Float, Backend::Fixed] {
            let t = simulate(&Regime::RegularSpiking.protocol(), backend)
                .unwrap()
                .train();
            assert_eq!(t.isis()[0], 23.75, "{backend}");
        }
    }

    #[test]
    fn oversized_stimulus_is_rejected() {
        let p = Protocol::constant(NeuronParams::regular_spiking(), 1e7, 1.0);
        assert!(matches!(
            simulate(&p, Backend::Fixed),
            Err(RegimeError::Stimulus(_))
        ));
    }

    #[test]
    fn trace_csv_layout() {
        let p = Protocol::constant(NeuronParams::regular_spiking(), 0.0, 0.25);
        let a = simulate(&p, Backend::Float).unwrap();
        let b = simulate(&p, Backend::Fixed).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&a, &b, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1], "0,0,-65,-65");
    }

    #[test]
    fn rebound_needs_the_hold() {
        let p = Regime::Rebound.params();
        let quiet = simulate(
            &Protocol::constant(p, 0.0, REBOUND_DURATION_MS),
            Backend::Float,
        )
        .unwrap();
        assert!(quiet.spike_steps.is_empty());
    }
}
