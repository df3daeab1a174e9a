//! Key-derived material: the Logistic byte stream `x̄`, the Arnold-derived
//! mask matrix `D`, the initial cipher block `C0`, and the scalars `r`, `v`.
//!
//! All floating-point work follows a fixed contract: binary64, round to
//! nearest even, no fused multiply-add, operations evaluated in the order the
//! recurrences are written. Conversions from reals to integers never go
//! through a floating multiplication; the binary64 bit pattern is scaled by
//! an exact integer power of ten instead.

use num_bigint::BigUint;

use crate::error::{Error, Result};
use crate::image::GrayImage;

/// Decimal scaling used by the byte conversion.
pub const BYTE_SCALE_EXP: u32 = 14;

const POW10_14: u128 = 100_000_000_000_000;

/// Largest binary64 strictly below one.
const ONE_MINUS_ULP: f64 = 1.0 - f64::EPSILON / 2.0;

/// Quantization applied after decimal scaling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quantizer {
    Floor,
    Ceil,
    /// Round half to even.
    Round,
}

impl Quantizer {
    pub const ALL: [Quantizer; 3] = [Quantizer::Floor, Quantizer::Round, Quantizer::Ceil];

    /// Quantizes `num / 2^shift` for a non-negative integer numerator.
    pub(crate) fn apply_dyadic(self, num: u128, shift: u32) -> u128 {
        if shift == 0 {
            return num;
        }
        if shift >= 128 {
            return match self {
                Quantizer::Floor => 0,
                Quantizer::Ceil => u128::from(num != 0),
                // value < 1, above one half only when shift == 128
                Quantizer::Round => u128::from(shift == 128 && num > 1 << 127),
            };
        }
        let floor = num >> shift;
        let rem = num & ((1u128 << shift) - 1);
        match self {
            Quantizer::Floor => floor,
            Quantizer::Ceil => floor + u128::from(rem != 0),
            Quantizer::Round => {
                let half = 1u128 << (shift - 1);
                if rem > half || (rem == half && floor & 1 == 1) {
                    floor + 1
                } else {
                    floor
                }
            }
        }
    }
}

impl std::str::FromStr for Quantizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "floor" => Ok(Quantizer::Floor),
            "ceil" => Ok(Quantizer::Ceil),
            "round" => Ok(Quantizer::Round),
            other => Err(Error::InvalidArgument(format!(
                "unknown quantizer `{other}`"
            ))),
        }
    }
}

impl std::fmt::Display for Quantizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Quantizer::Floor => "floor",
            Quantizer::Ceil => "ceil",
            Quantizer::Round => "round",
        })
    }
}

/// Splits a finite non-negative binary64 into `(significand, exponent)` with
/// `x = significand * 2^exponent` exactly.
pub(crate) fn decompose(x: f64) -> (u64, i32) {
    let bits = x.to_bits();
    let biased = ((bits >> 52) & 0x7ff) as i32;
    let frac = bits & ((1u64 << 52) - 1);
    if biased == 0 {
        (frac, -1074)
    } else {
        (frac | (1u64 << 52), biased - 1075)
    }
}

fn check_non_negative(x: f64) -> Result<()> {
    if !x.is_finite() || x < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "expected a finite non-negative real, got {x}"
        )));
    }
    Ok(())
}

/// Fractional part `x - floor(x)`, always in `[0, 1)`.
pub fn rem(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "rem of non-finite value {x}"
        )));
    }
    let r = x - x.floor();
    // tiny negative inputs round 1 - |x| up to 1.0
    Ok(if r >= 1.0 { ONE_MINUS_ULP } else { r })
}

/// Exact fractional part of `x * 10^pow10`, rounded once to binary64.
pub(crate) fn scaled_fraction(x: f64, pow10: u32) -> Result<f64> {
    check_non_negative(x)?;
    debug_assert!(pow10 <= 14);
    let (sig, exp) = decompose(x);
    if exp >= 0 {
        return Ok(0.0);
    }
    let scaled = u128::from(sig) * 10u128.pow(pow10);
    let shift = exp.unsigned_abs();
    let numerator = if shift >= 128 {
        scaled
    } else {
        scaled & ((1u128 << shift) - 1)
    };
    let mut value = numerator as f64;
    let mut remaining = shift as i32;
    while remaining > 0 {
        let step = remaining.min(1000);
        value *= 2f64.powi(-step);
        remaining -= step;
    }
    Ok(if value >= 1.0 { ONE_MINUS_ULP } else { value })
}

/// `floor(x * 10^14) mod 256`, with the product evaluated exactly.
pub fn convert_byte(x: f64) -> Result<u8> {
    check_non_negative(x)?;
    let (sig, exp) = decompose(x);
    let scaled = u128::from(sig) * POW10_14;
    let value = if exp >= 0 {
        if exp >= 8 {
            0
        } else {
            scaled << exp
        }
    } else {
        let shift = exp.unsigned_abs();
        if shift >= 128 {
            0
        } else {
            scaled >> shift
        }
    };
    Ok((value & 0xff) as u8)
}

/// `quantizer(x * 10^m) mod modulus`, evaluated exactly on the bit pattern.
pub fn convert_generic(x: f64, quantizer: Quantizer, m: u32, modulus: u64) -> Result<u64> {
    check_non_negative(x)?;
    if m < 1 {
        return Err(Error::InvalidArgument(
            "decimal exponent must be at least 1".into(),
        ));
    }
    if modulus < 2 {
        return Err(Error::InvalidArgument(format!(
            "modulus must be at least 2, got {modulus}"
        )));
    }
    let (sig, exp) = decompose(x);
    let scaled = BigUint::from(sig) * BigUint::from(10u32).pow(m);
    let quantized = if exp >= 0 {
        scaled << exp.unsigned_abs()
    } else {
        let shift = u64::from(exp.unsigned_abs());
        let floor = &scaled >> shift;
        let rem = &scaled - (&floor << shift);
        let zero = BigUint::ZERO;
        match quantizer {
            Quantizer::Floor => floor,
            Quantizer::Ceil => {
                if rem != zero {
                    floor + 1u32
                } else {
                    floor
                }
            }
            Quantizer::Round => {
                let half = BigUint::from(1u32) << (shift - 1);
                if rem > half || (rem == half && floor.bit(0)) {
                    floor + 1u32
                } else {
                    floor
                }
            }
        }
    };
    let reduced = quantized % BigUint::from(modulus);
    Ok(reduced.iter_u64_digits().next().unwrap_or(0))
}

/// One step of the Logistic map, `mu * x * (1 - x)` evaluated left to right.
#[inline]
pub fn logistic_step(x: f64, mu: f64) -> f64 {
    mu * x * (1.0 - x)
}

pub(crate) fn check_mu(mu: f64) -> Result<()> {
    if !(3.9..=4.0).contains(&mu) {
        return Err(Error::KeyDomain(format!(
            "Logistic control parameter {mu} outside [3.9, 4]"
        )));
    }
    Ok(())
}

/// `x_1 .. x_n` of the Logistic orbit started at `x0` (which is not emitted).
pub fn logistic_iterate(x0: f64, mu: f64, n: usize) -> Result<Vec<f64>> {
    check_mu(mu)?;
    if !(0.0..=1.0).contains(&x0) {
        return Err(Error::InvalidArgument(format!(
            "Logistic initial value {x0} outside [0, 1]"
        )));
    }
    let mut x = x0;
    Ok((0..n)
        .map(|_| {
            x = logistic_step(x, mu);
            x
        })
        .collect())
}

/// Initial conditions derived from the largest Lyapunov exponent `λ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChaoticSeed {
    pub lambda: f64,
    /// `Rem(|λ| * 10^8)`.
    pub x0_logistic: f64,
    /// `(|λ|, Rem(|λ| * 10^5))`.
    pub xy0_arnold: (f64, f64),
}

impl ChaoticSeed {
    /// The fractional parts are taken of the exact decimal scaling of `|λ|`.
    pub fn from_lambda(lambda: f64) -> Result<Self> {
        if !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "Lyapunov exponent must be finite, got {lambda}"
            )));
        }
        let abs = lambda.abs();
        Ok(ChaoticSeed {
            lambda,
            x0_logistic: scaled_fraction(abs, 8)?,
            xy0_arnold: (abs, scaled_fraction(abs, 5)?),
        })
    }

    /// Seed with explicit initial conditions, bypassing `λ`.
    pub fn from_initial_conditions(x0_logistic: f64, xy0_arnold: (f64, f64)) -> Result<Self> {
        if !(0.0..1.0).contains(&x0_logistic) {
            return Err(Error::InvalidArgument(format!(
                "Logistic seed {x0_logistic} outside [0, 1)"
            )));
        }
        let (x, y) = xy0_arnold;
        if !x.is_finite() || x < 0.0 || !(0.0..1.0).contains(&y) {
            return Err(Error::InvalidArgument(format!(
                "Arnold seed ({x}, {y}) out of range"
            )));
        }
        Ok(ChaoticSeed {
            lambda: f64::NAN,
            x0_logistic,
            xy0_arnold,
        })
    }
}

/// The converted Logistic byte stream `x̄_1, x̄_2, ...`, indexed from one.
///
/// The sequence can be extended in place; extension never changes entries
/// already produced.
#[derive(Debug, Clone)]
pub struct ByteSequence {
    values: Vec<u8>,
    state: f64,
    mu: f64,
}

impl PartialEq for ByteSequence {
    fn eq(&self, other: &Self) -> bool {
        self.values == other.values
    }
}

impl ByteSequence {
    pub fn generate(seed: &ChaoticSeed, mu: f64, min_len: usize) -> Result<Self> {
        check_mu(mu)?;
        let mut seq = ByteSequence {
            values: Vec::new(),
            state: seed.x0_logistic,
            mu,
        };
        seq.extend_to(min_len)?;
        Ok(seq)
    }

    /// Builds a sequence from literal bytes. It cannot be extended.
    pub fn from_bytes(values: Vec<u8>) -> Self {
        ByteSequence {
            values,
            state: f64::NAN,
            mu: f64::NAN,
        }
    }

    pub fn extend_to(&mut self, len: usize) -> Result<()> {
        if len <= self.values.len() {
            return Ok(());
        }
        if self.state.is_nan() {
            return Err(Error::Internal(
                "literal byte sequence cannot be extended".into(),
            ));
        }
        self.values.reserve(len - self.values.len());
        while self.values.len() < len {
            self.state = logistic_step(self.state, self.mu);
            self.values.push(convert_byte(self.state)?);
        }
        Ok(())
    }

    /// One-based access: `get(1)` is `x̄_1`.
    pub fn get(&self, index: usize) -> Option<u8> {
        index
            .checked_sub(1)
            .and_then(|i| self.values.get(i).copied())
    }

    pub(crate) fn at(&self, index: usize, what: &str) -> Result<u8> {
        self.get(index).ok_or_else(|| {
            Error::Internal(format!(
                "{what}: index {index} outside x̄ of length {}",
                self.len()
            ))
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.values
    }
}

/// `x̄_1 .. x̄_{min_len}` for the orbit started at the seed's Logistic value.
pub fn gen_xbar(seed: &ChaoticSeed, mu: f64, min_len: usize) -> Result<ByteSequence> {
    ByteSequence::generate(seed, mu, min_len)
}

fn check_arnold(a: u64, b: u64) -> Result<()> {
    if a == 0 || b == 0 {
        return Err(Error::KeyDomain(format!(
            "Arnold parameters must be positive, got a={a}, b={b}"
        )));
    }
    Ok(())
}

#[inline]
fn mod1(v: f64) -> f64 {
    v - v.floor()
}

/// Generalized Arnold map with parameters already cast to binary64.
#[derive(Debug, Clone, Copy)]
struct ArnoldMap {
    a: f64,
    b: f64,
    ab1: f64,
}

impl ArnoldMap {
    fn new(a: u64, b: u64) -> Result<Self> {
        check_arnold(a, b)?;
        let ab1 = u128::from(a) * u128::from(b) + 1;
        Ok(ArnoldMap {
            a: a as f64,
            b: b as f64,
            ab1: ab1 as f64,
        })
    }

    #[inline]
    fn step(&self, (x, y): (f64, f64)) -> (f64, f64) {
        (mod1(x + self.a * y), mod1(self.b * x + self.ab1 * y))
    }
}

/// `n` successive states of the generalized Arnold map (the start is not emitted).
pub fn arnold_iterate(xy0: (f64, f64), a: u64, b: u64, n: usize) -> Result<Vec<(f64, f64)>> {
    let map = ArnoldMap::new(a, b)?;
    let mut p = xy0;
    Ok((0..n)
        .map(|_| {
            p = map.step(p);
            p
        })
        .collect())
}

/// Mask matrix `D`: the Arnold orbit after skipping `r` states, converted
/// pairwise (`x` then `y`) and laid out row-major.
pub fn build_d(
    seed: &ChaoticSeed,
    a: u64,
    b: u64,
    r: usize,
    rows: usize,
    cols: usize,
) -> Result<GrayImage> {
    let cells = rows * cols;
    if cells == 0 || !cells.is_multiple_of(2) {
        return Err(Error::Layout(format!(
            "D needs an even positive cell count, got {rows}x{cols}"
        )));
    }
    let map = ArnoldMap::new(a, b)?;
    let mut p = seed.xy0_arnold;
    for _ in 0..r {
        p = map.step(p);
    }
    let mut pixels = Vec::with_capacity(cells);
    for _ in 0..cells / 2 {
        p = map.step(p);
        pixels.push(convert_byte(p.0)?);
        pixels.push(convert_byte(p.1)?);
    }
    GrayImage::new(rows, cols, pixels)
}

/// Initial block `C0`: `x̄_{μ3} .. x̄_{μ3 + p1·p2 - 1}` laid out row-major.
pub fn build_c0(xbar: &ByteSequence, mu3: usize, p1: usize, p2: usize) -> Result<GrayImage> {
    if mu3 == 0 {
        return Err(Error::InvalidArgument("μ3 is one-based".into()));
    }
    let start = mu3 - 1;
    let end = start + p1 * p2;
    let slice = xbar.as_slice().get(start..end).ok_or_else(|| {
        Error::Internal(format!(
            "x̄ has {} entries, C0 needs index {}",
            xbar.len(),
            end
        ))
    })?;
    GrayImage::new(p1, p2, slice.to_vec())
}

/// Everything the round function consumes for one image.
#[derive(Debug, Clone)]
pub struct KeystreamSet {
    pub xbar: ByteSequence,
    /// Arnold skip count, `x̄_{μ1}`.
    pub r: u8,
    /// Mask multiplier, `x̄_{μ2}`.
    pub v: u8,
    pub d: GrayImage,
    pub c0: GrayImage,
}
