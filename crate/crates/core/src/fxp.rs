//! Saturating signed fixed-point arithmetic.
//!
//! Every value carries its [`FixedFormat`] (total width including sign, and
//! number of fraction bits). All operations saturate to the destination
//! format instead of wrapping, and runtime rescaling shifts are arithmetic
//! (floor toward negative infinity) unless the rounding variant is named.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FxpError {
    #[error("invalid fixed-point format: width {width}, fraction bits {frac_bits}")]
    InvalidFormat { width: u32, frac_bits: u32 },
    #[error("cannot encode non-finite value {0}")]
    NonFinite(f64),
    #[error("{value} is outside the range of {format}")]
    OutOfRange { value: f64, format: String },
    #[error("nonzero {value} rounds to zero in {format}")]
    Underflow { value: f64, format: String },
}

/// Bit layout of a fixed-point value: `width` total bits, `frac_bits` of them fractional.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FixedFormat {
    width: u8,
    frac_bits: u8,
}

impl FixedFormat {
    /// Const constructor for formats known at compile time. Panics on an
    /// invalid layout.
    pub const fn q(width: u32, frac_bits: u32) -> Self {
        assert!(width >= 1 && width <= 32 && frac_bits < width);
        FixedFormat {
            width: width as u8,
            frac_bits: frac_bits as u8,
        }
    }

    pub fn new(width: u32, frac_bits: u32) -> Result<Self, FxpError> {
        if !(1..=32).contains(&width) || frac_bits >= width {
            return Err(FxpError::InvalidFormat { width, frac_bits });
        }
        Ok(Self::q(width, frac_bits))
    }

    #[inline]
    pub const fn width(self) -> u32 {
        self.width as u32
    }

    #[inline]
    pub const fn frac_bits(self) -> u32 {
        self.frac_bits as u32
    }

    #[inline]
    pub const fn min_raw(self) -> i64 {
        -(1i64 << (self.width - 1))
    }

    #[inline]
    pub const fn max_raw(self) -> i64 {
        (1i64 << (self.width - 1)) - 1
    }

    /// Value of one least-significant bit.
    pub fn lsb(self) -> f64 {
        1.0 / (1u64 << self.frac_bits) as f64
    }

    #[inline]
    pub fn saturate(self, raw: i64) -> i64 {
        raw.clamp(self.min_raw(), self.max_raw())
    }

    #[inline]
    fn saturate_wide(self, raw: i128) -> i64 {
        raw.clamp(self.min_raw() as i128, self.max_raw() as i128) as i64
    }

    pub fn contains(self, raw: i64) -> bool {
        (self.min_raw()..=self.max_raw()).contains(&raw)
    }
}

impl fmt::Display for FixedFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Q{}.{}", self.width - self.frac_bits, self.frac_bits)
    }
}

/// Membrane potential word field.
pub const V_FMT: FixedFormat = FixedFormat::q(24, 12);
/// Recovery variable word field.
pub const U_FMT: FixedFormat = FixedFormat::q(24, 12);
/// Izhikevich `a` and `b` parameters.
pub const AB_FMT: FixedFormat = FixedFormat::q(16, 12);
/// Izhikevich `c` and `d` parameters.
pub const CD_FMT: FixedFormat = FixedFormat::q(24, 12);
/// Synaptic current state.
pub const ISYN_FMT: FixedFormat = FixedFormat::q(24, 12);
/// Constant bias current.
pub const ICONST_FMT: FixedFormat = FixedFormat::q(16, 12);
/// Dopamine deviation.
pub const DDOP_FMT: FixedFormat = FixedFormat::q(16, 12);
/// Dendrite accumulator output (3 fraction bits; total width is a local choice).
pub const DA_FMT: FixedFormat = FixedFormat::q(16, 3);
/// Synaptic weights as stored per synapse.
pub const WEIGHT_FMT: FixedFormat = FixedFormat::q(16, 12);
/// Group-wide constants shared by all neurons of a population (alpha, beta, v_peak).
pub const CONST_FMT: FixedFormat = FixedFormat::q(24, 12);
/// Microcode scratch registers: double the 16-bit parameter width, Q12.
pub const REG_FMT: FixedFormat = FixedFormat::q(32, 12);

/// A raw integer tagged with its fixed-point format. The raw value is always
/// inside the format's representable range.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Fixed {
    raw: i64,
    format: FixedFormat,
}

impl Fixed {
    /// Saturating constructor from a raw integer.
    #[inline]
    pub fn from_raw(raw: i64, format: FixedFormat) -> Self {
        Fixed {
            raw: format.saturate(raw),
            format,
        }
    }

    pub fn zero(format: FixedFormat) -> Self {
        Fixed { raw: 0, format }
    }

    /// Round-to-nearest (ties away from zero) encoding, saturated to range.
    pub fn encode(x: f64, format: FixedFormat) -> Result<Self, FxpError> {
        if !x.is_finite() {
            return Err(FxpError::NonFinite(x));
        }
        let scaled = (x * (1u64 << format.frac_bits()) as f64).round();
        // float -> int `as` casts saturate, so huge inputs land on i64 bounds first
        Ok(Fixed::from_raw(scaled as i64, format))
    }

    #[inline]
    pub fn raw(self) -> i64 {
        self.raw
    }

    #[inline]
    pub fn format(self) -> FixedFormat {
        self.format
    }

    pub fn decode(self) -> f64 {
        self.raw as f64 / (1u64 << self.format.frac_bits()) as f64
    }

    /// Saturating add. Both operands must share the fraction convention; the
    /// result takes `self`'s format.
    #[inline]
    pub fn sat_add(self, other: Fixed) -> Fixed {
        debug_assert_eq!(self.format.frac_bits, other.format.frac_bits);
        Fixed::from_raw(self.raw + other.raw, self.format)
    }

    #[inline]
    pub fn sat_sub(self, other: Fixed) -> Fixed {
        debug_assert_eq!(self.format.frac_bits, other.format.frac_bits);
        Fixed::from_raw(self.raw - other.raw, self.format)
    }

    #[inline]
    pub fn sat_neg(self) -> Fixed {
        Fixed::from_raw(-self.raw, self.format)
    }

    /// Product rescaled by `other`'s fraction bits with an arithmetic right
    /// shift. The full product is formed at double width before shifting; the
    /// result keeps `self`'s format.
    #[inline]
    pub fn mul_rescale(self, other: Fixed) -> Fixed {
        let wide = (self.raw as i128 * other.raw as i128) >> other.format.frac_bits();
        Fixed {
            raw: self.format.saturate_wide(wide),
            format: self.format,
        }
    }

    /// Arithmetic right shift (floor semantics on negatives).
    #[inline]
    #[allow(clippy::should_implement_trait)]
    pub fn shr(self, n: u32) -> Fixed {
        let raw = if n >= 63 {
            if self.raw < 0 {
                -1
            } else {
                0
            }
        } else {
            self.raw >> n
        };
        Fixed {
            raw,
            format: self.format,
        }
    }

    /// Right shift rounding to nearest, ties toward positive infinity
    /// (add half an output LSB, then shift).
    #[inline]
    pub fn shr_round(self, n: u32) -> Fixed {
        if n == 0 {
            return self;
        }
        if n >= 63 {
            return Fixed::zero(self.format);
        }
        let raw = (self.raw + (1i64 << (n - 1))) >> n;
        Fixed {
            raw,
            format: self.format,
        }
    }

    /// Saturating left shift.
    #[inline]
    #[allow(clippy::should_implement_trait)]
    pub fn shl(self, n: u32) -> Fixed {
        let wide = (self.raw as i128) << n.min(64);
        Fixed {
            raw: self.format.saturate_wide(wide),
            format: self.format,
        }
    }

    /// Converts to another format, preserving the value: raw bits are shifted
    /// by the difference in fraction bits (floor when dropping bits), then
    /// saturated to the target width.
    #[inline]
    pub fn align_to(self, target: FixedFormat) -> Fixed {
        let from = self.format.frac_bits();
        let to = target.frac_bits();
        let wide = if to >= from {
            (self.raw as i128) << (to - from)
        } else {
            (self.raw as i128) >> (from - to)
        };
        Fixed {
            raw: target.saturate_wide(wide),
            format: target,
        }
    }

    /// Like [`align_to`](Self::align_to) but rounds to nearest (ties away
    /// from zero) when dropping fraction bits.
    pub fn round_to(self, target: FixedFormat) -> Fixed {
        let from = self.format.frac_bits();
        let to = target.frac_bits();
        if to >= from {
            return self.align_to(target);
        }
        Fixed::from_raw(round_shift(self.raw, from - to), target)
    }
}

impl fmt::Display for Fixed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({} raw {})", self.decode(), self.format, self.raw)
    }
}

/// Integer division by `2^n`, rounding to nearest with ties away from zero.
pub fn round_shift(x: i64, n: u32) -> i64 {
    if n == 0 {
        return x;
    }
    let half = 1i64 << (n - 1);
    if x >= 0 {
        (x + half) >> n
    } else {
        -((-x + half) >> n)
    }
}
