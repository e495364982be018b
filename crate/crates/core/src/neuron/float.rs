use super::{NeuronError, NeuronParams, NeuronState};

/// One explicit-Euler step of the Izhikevich model in `f64`.
///
/// Spike detection looks at the incoming state: if `v > v_peak` the neuron
/// is reset (`v = c`, `u += d`) and the step reports a spike. Otherwise `v`
/// and `u` advance by Euler using the old values of both. `i_syn` and
/// `delta_dop` pass through untouched.
pub fn step_float(
    p: &NeuronParams,
    s: &NeuronState,
    current: f64,
    dt: f64,
) -> Result<(NeuronState, bool), NeuronError> {
    debug_assert!(dt > 0.0);
    if !(s.v.is_finite() && s.u.is_finite() && current.is_finite()) {
        return Err(NeuronError::NonFinite { v: s.v, u: s.u });
    }
    if s.v > p.v_peak {
        let next = NeuronState {
            v: p.c,
            u: s.u + p.d,
            ..*s
        };
        return Ok((next, true));
    }
    let offset = if p.include_140 { 140.0 } else { 0.0 };
    let dv = 0.04 * s.v * s.v + 5.0 * s.v + offset - s.u + current;
    let du = p.a * (p.b * s.v - s.u);
    let next = NeuronState {
        v: s.v + dv * dt,
        u: s.u + du * dt,
        ..*s
    };
    if !(next.v.is_finite() && next.u.is_finite()) {
        return Err(NeuronError::NonFinite {
            v: next.v,
            u: next.u,
        });
    }
    Ok((next, false))
}
