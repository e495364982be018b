//! Packed compartment-state layout.
//!
//! | field     | bits | word |
//! |-----------|------|------|
//! | a         | 16   | 0    |
//! | b         | 16   | 0    |
//! | isyn      | 24   | 0    |
//! | c         | 24   | 1    |
//! | d         | 24   | 1    |
//! | delta_dop | 16   | 1    |
//! | v         | 24   | 2    |
//! | u         | 24   | 2    |
//! | iconst    | 16   | 2    |
//!
//! Fields are laid out from the least significant bit upward in the order
//! listed, stored as two's complement.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use super::{NeuronError, NeuronParams, NeuronState};
use crate::fxp::{self, Fixed, FixedFormat};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PackError {
    #[error("field {field} raw value {raw} does not fit in {width} bits")]
    OutOfWidth { field: Field, raw: i64, width: u32 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Field {
    A,
    B,
    Isyn,
    C,
    D,
    DeltaDop,
    V,
    U,
    Iconst,
}

impl Field {
    pub const ALL: [Field; 9] = [
        Field::A,
        Field::B,
        Field::Isyn,
        Field::C,
        Field::D,
        Field::DeltaDop,
        Field::V,
        Field::U,
        Field::Iconst,
    ];

    pub const fn word(self) -> usize {
        match self {
            Field::A | Field::B | Field::Isyn => 0,
            Field::C | Field::D | Field::DeltaDop => 1,
            Field::V | Field::U | Field::Iconst => 2,
        }
    }

    pub const fn format(self) -> FixedFormat {
        match self {
            Field::A | Field::B => fxp::AB_FMT,
            Field::Isyn => fxp::ISYN_FMT,
            Field::C | Field::D => fxp::CD_FMT,
            Field::DeltaDop => fxp::DDOP_FMT,
            Field::V => fxp::V_FMT,
            Field::U => fxp::U_FMT,
            Field::Iconst => fxp::ICONST_FMT,
        }
    }

    pub const fn width(self) -> u32 {
        self.format().width()
    }

    /// Bit offset inside its word.
    pub const fn offset(self) -> u32 {
        match self {
            Field::A | Field::C | Field::V => 0,
            Field::B => 16,
            Field::Isyn => 32,
            Field::D | Field::U => 24,
            Field::DeltaDop | Field::Iconst => 48,
        }
    }

    pub const fn name(self) -> &'static str {
        match self {
            Field::A => "a",
            Field::B => "b",
            Field::Isyn => "isyn",
            Field::C => "c",
            Field::D => "d",
            Field::DeltaDop => "delta_dop",
            Field::V => "v",
            Field::U => "u",
            Field::Iconst => "iconst",
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Field {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Field::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| s.to_string())
    }
}

/// Raw (unpacked) field values.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CompartmentFields {
    pub a: i64,
    pub b: i64,
    pub isyn: i64,
    pub c: i64,
    pub d: i64,
    pub delta_dop: i64,
    pub v: i64,
    pub u: i64,
    pub iconst: i64,
}

impl CompartmentFields {
    pub fn get(&self, field: Field) -> i64 {
        match field {
            Field::A => self.a,
            Field::B => self.b,
            Field::Isyn => self.isyn,
            Field::C => self.c,
            Field::D => self.d,
            Field::DeltaDop => self.delta_dop,
            Field::V => self.v,
            Field::U => self.u,
            Field::Iconst => self.iconst,
        }
    }

    pub fn set(&mut self, field: Field, raw: i64) {
        let slot = match field {
            Field::A => &mut self.a,
            Field::B => &mut self.b,
            Field::Isyn => &mut self.isyn,
            Field::C => &mut self.c,
            Field::D => &mut self.d,
            Field::DeltaDop => &mut self.delta_dop,
            Field::V => &mut self.v,
            Field::U => &mut self.u,
            Field::Iconst => &mut self.iconst,
        };
        *slot = raw;
    }

    pub fn pack(&self) -> Result<CompartmentWords, PackError> {
        let mut words = CompartmentWords::default();
        for field in Field::ALL {
            let raw = self.get(field);
            if !field.format().contains(raw) {
                return Err(PackError::OutOfWidth {
                    field,
                    raw,
                    width: field.width(),
                });
            }
            words.put(field, raw);
        }
        Ok(words)
    }
}

/// Three 64-bit compartment-state words.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct CompartmentWords(pub [u64; 3]);

impl CompartmentWords {
    /// Sign-extended raw value of one field.
    #[inline]
    pub fn raw(&self, field: Field) -> i64 {
        let word = self.0[field.word()];
        let width = field.width();
        let bits = (word >> field.offset()) & ((1u64 << width) - 1);
        let shift = 64 - width;
        ((bits << shift) as i64) >> shift
    }

    #[inline]
    fn put(&mut self, field: Field, raw: i64) {
        let mask = ((1u64 << field.width()) - 1) << field.offset();
        let word = &mut self.0[field.word()];
        *word = (*word & !mask) | (((raw as u64) << field.offset()) & mask);
    }

    #[inline]
    pub fn get(&self, field: Field) -> Fixed {
        Fixed::from_raw(self.raw(field), field.format())
    }

    /// Writes a value, converting it to the field's format (saturating).
    #[inline]
    pub fn set(&mut self, field: Field, value: Fixed) {
        let v = value.align_to(field.format());
        self.put(field, v.raw());
    }

    pub fn unpack(&self) -> CompartmentFields {
        let mut f = CompartmentFields::default();
        for field in Field::ALL {
            f.set(field, self.raw(field));
        }
        f
    }

    /// Encodes a neuron's parameters and state into its compartment words.
    pub fn encode(params: &NeuronParams, state: &NeuronState) -> Result<Self, NeuronError> {
        params.check_representable()?;
        let enc = |x: f64, field: Field| -> Result<i64, NeuronError> {
            Fixed::encode(x, field.format())
                .map(Fixed::raw)
                .map_err(|_| NeuronError::NonFinite {
                    v: state.v,
                    u: state.u,
                })
        };
        let fields = CompartmentFields {
            a: enc(params.a, Field::A)?,
            b: enc(params.b, Field::B)?,
            isyn: enc(state.i_syn, Field::Isyn)?,
            c: enc(params.c, Field::C)?,
            d: enc(params.d, Field::D)?,
            delta_dop: enc(state.delta_dop, Field::DeltaDop)?,
            v: enc(state.v, Field::V)?,
            u: enc(state.u, Field::U)?,
            iconst: enc(params.i_const, Field::Iconst)?,
        };
        Ok(fields.pack()?)
    }

    /// Decoded dynamic state.
    pub fn state(&self) -> NeuronState {
        NeuronState {
            v: self.get(Field::V).decode(),
            u: self.get(Field::U).decode(),
            i_syn: self.get(Field::Isyn).decode(),
            delta_dop: self.get(Field::DeltaDop).decode(),
        }
    }
}
