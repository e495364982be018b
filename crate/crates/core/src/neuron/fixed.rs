//! Fixed-point Izhikevich step, written block by block so that each block
//! touches a single compartment-state word. The statement order mirrors the
//! shipped block schedule (`config/izhikevich.sched`); a property test holds
//! the two in bit-exact agreement.

use super::{CompartmentWords, Field, NeuronError, NeuronParams};
use crate::fxp::{self, Fixed, FixedFormat};
use crate::synapse::{isyn_step, modulated_current};

/// `dt = 1/8 ms` realized as a right shift.
pub const DT_SHIFT: u32 = 3;

/// Format of the quadratic coefficient: 0.04 needs more fraction bits than Q12
/// to keep the resting point of the voltage equation exact.
pub const QUAD_FMT: FixedFormat = FixedFormat::q(32, 30);

/// Values shared by every neuron of a population (microcode constants).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GroupConstants {
    pub alpha: Fixed,
    pub beta: Fixed,
    pub v_peak: Fixed,
    pub offset: Fixed,
    pub quad: Fixed,
    pub five: Fixed,
    pub one: Fixed,
}

impl GroupConstants {
    pub fn new(params: &NeuronParams, alpha: Fixed) -> Result<Self, NeuronError> {
        params.check_representable()?;
        let c = |x: f64| Fixed::encode(x, fxp::CONST_FMT).expect("finite constant");
        Ok(GroupConstants {
            alpha: alpha.align_to(fxp::CONST_FMT),
            beta: c(params.beta),
            v_peak: c(params.v_peak),
            offset: c(if params.include_140 { 140.0 } else { 0.0 }),
            quad: Fixed::encode(0.04, QUAD_FMT).expect("finite constant"),
            five: c(5.0),
            one: c(1.0),
        })
    }

    /// Looks up a named constant as used by block-schedule operands.
    pub fn named(&self, name: &str) -> Option<Fixed> {
        Some(match name {
            "alpha" => self.alpha,
            "beta" => self.beta,
            "vpeak" => self.v_peak,
            "offset" => self.offset,
            "quad" => self.quad,
            "five" => self.five,
            "one" => self.one,
            _ => return None,
        })
    }
}

/// One timestep of the fixed-point neuron.
///
/// `da` is the dendrite accumulator value for this step (3 fraction bits).
/// Returns the updated words and whether the neuron spiked; a spike is
/// reported for the incoming state when `v > v_peak`, and that step applies
/// the reset instead of the Euler update.
#[inline]
pub fn step_fixed(
    words: CompartmentWords,
    da: Fixed,
    k: &GroupConstants,
) -> (CompartmentWords, bool) {
    let reg = |x: Fixed| x.align_to(fxp::REG_FMT);
    let mut w = words;

    // blk0, word 0: synaptic current decay plus accumulated input
    let i_syn = isyn_step(w.get(Field::Isyn), k.alpha, da);
    w.set(Field::Isyn, i_syn);
    let a = reg(w.get(Field::A));
    let b = reg(w.get(Field::B));

    // blk1..blk3: dopamine gain (word 1), current assembly (word 2)
    let c = reg(w.get(Field::C));
    let d = reg(w.get(Field::D));
    let current = modulated_current(w.get(Field::Iconst), i_syn, k.beta, w.get(Field::DeltaDop));
    let v = reg(w.get(Field::V));
    let u = reg(w.get(Field::U));

    // blk4: dv/dt = 0.04 v^2 + 5 v + 140 - u + I
    let dv = v
        .mul_rescale(v)
        .mul_rescale(k.quad)
        .sat_add(v.mul_rescale(k.five))
        .sat_add(reg(k.offset))
        .sat_sub(u)
        .sat_add(current);
    // blk5: du/dt = a (b v - u)
    let du = v.mul_rescale(b).sat_sub(u).mul_rescale(a);

    // blk6: dt stage and threshold/reset select
    let v_euler = v.sat_add(dv.shr_round(DT_SHIFT));
    let u_euler = u.sat_add(du.shr_round(DT_SHIFT));
    let spiked = v.raw() > reg(k.v_peak).raw();
    let (v_next, u_next) = if spiked {
        (c, u.sat_add(d))
    } else {
        (v_euler, u_euler)
    };

    // blk7, word 2: write back
    w.set(Field::V, v_next);
    w.set(Field::U, u_next);
    (w, spiked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuron::{step_float, NeuronState, DT_MS};
    use crate::synapse::{decay_alpha_fixed, DEFAULT_TAU_MS};

    fn consts(p: &NeuronParams) -> GroupConstants {
        GroupConstants::new(p, decay_alpha_fixed(DT_MS, DEFAULT_TAU_MS).unwrap()).unwrap()
    }

    #[test]
    fn da_alignment_is_nine_bit_shift() {
        let da = Fixed::from_raw(8, fxp::DA_FMT);
        let aligned = da.align_to(fxp::REG_FMT);
        assert_eq!(aligned.raw(), 4096);
        // one DA unit lands in Isyn as exactly 1.0 when Isyn starts at zero
        let p = NeuronParams::regular_spiking();
        let words = CompartmentWords::encode(&p, &NeuronState::at(&p, -70.0)).unwrap();
        let (next, _) = step_fixed(words, da, &consts(&p));
        assert_eq!(next.raw(Field::Isyn), 4096);
    }

    #[test]
    fn dt_stage_divides_by_eight() {
        let x = Fixed::from_raw(4096, fxp::REG_FMT);
        assert_eq!(x.shr(DT_SHIFT).raw(), 512);
        assert_eq!(x.shr_round(DT_SHIFT).raw(), 512);
    }

    #[test]
    fn equilibrium_holds_for_a_thousand_steps() {
        let p = NeuronParams::regular_spiking();
        let k = consts(&p);
        let start = NeuronState {
            v: -70.0,
            u: -14.0,
            ..Default::default()
        };
        let mut words = CompartmentWords::encode(&p, &start).unwrap();
        let v0 = words.raw(Field::V);
        let mut oracle = start;
        let zero = Fixed::zero(fxp::DA_FMT);
        for _ in 0..1000 {
            let (next, spiked) = step_fixed(words, zero, &k);
            assert!(!spiked);
            words = next;
            assert!((words.raw(Field::V) - v0).abs() <= 1);
            oracle = step_float(&p, &oracle, 0.0, DT_MS).unwrap().0;
        }
        assert!((words.get(Field::V).decode() - oracle.v).abs() <= fxp::V_FMT.lsb());
    }

    #[test]
    fn reset_sets_c_and_adds_d() {
        let p = NeuronParams::regular_spiking();
        let k = consts(&p);
        let s = NeuronState {
            v: 31.0,
            u: -10.0,
            ..Default::default()
        };
        let words = CompartmentWords::encode(&p, &s).unwrap();
        let (next, spiked) = step_fixed(words, Fixed::zero(fxp::DA_FMT), &k);
        assert!(spiked);
        assert_eq!(next.get(Field::V).decode(), -65.0);
        assert_eq!(
            next.raw(Field::U),
            words.raw(Field::U) + words.raw(Field::D)
        );
    }

    #[test]
    fn saturated_input_stays_in_range() {
        let p = NeuronParams::fast_spiking();
        let k = consts(&p);
        let mut words = CompartmentWords::encode(&p, &NeuronState::reset(&p)).unwrap();
        let big = Fixed::from_raw(fxp::DA_FMT.max_raw(), fxp::DA_FMT);
        for _ in 0..200 {
            words = step_fixed(words, big, &k).0;
            for f in Field::ALL {
                assert!(f.format().contains(words.raw(f)));
            }
        }
        assert_eq!(words.raw(Field::Isyn), fxp::ISYN_FMT.max_raw());
    }
}
