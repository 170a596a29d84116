//! Fixed-precision real numbers with a 64-bit binary exponent, wide enough
//! that `3^k` and `2^{-k^2}` at search-scale exponents never overflow.
//!
//! Arithmetic rounds to nearest-even at the larger precision of the two
//! operands. Transcendental functions draw their constant caches from a
//! shared pool whose entries are always pre-warmed to the same level, so
//! results do not depend on which thread or call happened to fill a cache.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::ops::{Add, Div, Mul, Neg, Sub};

use astro_float::{BigFloat, Consts, Radix, RoundingMode, Sign};
use num_bigint::{BigInt, Sign as BigSign};
use num_rational::BigRational;
use num_traits::Zero;

use crate::error::ParseError;

const RM: RoundingMode = RoundingMode::ToEven;
const BITS_PER_DIGIT: f64 = 3.321_928_094_887_362_3;

/// Default working precision in significant decimal digits.
pub const DEFAULT_DIGITS: u32 = 128;

/// Working precision, expressed in decimal digits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Precision {
    digits: u32,
}

impl Precision {
    pub const fn from_digits(digits: u32) -> Self {
        Precision { digits: if digits == 0 { 1 } else { digits } }
    }

    pub const fn digits(self) -> u32 {
        self.digits
    }

    /// Mantissa width in bits, rounded up to whole 64-bit words.
    pub fn bits(self) -> usize {
        let raw = libm::ceil(self.digits as f64 * BITS_PER_DIGIT) as usize;
        raw.div_ceil(64) * 64
    }

    pub const fn doubled(self) -> Self {
        Precision::from_digits(self.digits * 2)
    }

    /// Relative spacing of representable values, `2^{1-bits}`.
    pub fn ulp(self) -> ExtReal {
        ExtReal::pow2(1 - self.bits() as i64, self)
    }
}

impl Default for Precision {
    fn default() -> Self {
        Precision::from_digits(DEFAULT_DIGITS)
    }
}

static CONSTS_POOL: spin::Mutex<Vec<(usize, Consts)>> = spin::Mutex::new(Vec::new());

fn warm_level(bits: usize) -> usize {
    (2 * bits).next_power_of_two().max(4096)
}

fn with_consts<R>(bits: usize, f: impl FnOnce(&mut Consts) -> R) -> R {
    let level = warm_level(bits);
    let taken = {
        let mut pool = CONSTS_POOL.lock();
        pool.iter()
            .position(|(l, _)| *l == level)
            .map(|i| pool.swap_remove(i))
    };
    let (level, mut cc) = taken.unwrap_or_else(|| {
        let mut cc = Consts::new().expect("constant cache allocation");
        cc.pi(level, RM);
        cc.e(level, RM);
        cc.ln_2(level, RM);
        cc.ln_10(level, RM);
        (level, cc)
    });
    let out = f(&mut cc);
    CONSTS_POOL.lock().push((level, cc));
    out
}

/// A real number at a fixed working precision.
///
/// Stored as `v * 2^e` with `|v|` in `[1/2, 1)`, so the exponent range is
/// that of an `i64`; zero and the infinities live in `v` with `e = 0`.
#[derive(Clone)]
pub struct ExtReal {
    v: BigFloat,
    e: i64,
    prec: Precision,
}

/// `|v|` in `[1/2, 1)`, the difference moved into the outer exponent.
fn normalize(mut v: BigFloat, e: i64) -> (BigFloat, i64) {
    match v.exponent() {
        Some(ve) if !v.is_zero() && v.is_finite_value() => {
            v.set_exponent(0);
            (v, e.saturating_add(ve as i64))
        }
        _ => (v, 0),
    }
}

trait FiniteValue {
    fn is_finite_value(&self) -> bool;
}

impl FiniteValue for BigFloat {
    fn is_finite_value(&self) -> bool {
        !self.is_inf() && !self.is_nan()
    }
}

/// Plain (non-wide) exponents beyond this are out of astro-float's range.
const PLAIN_LIMIT: i64 = 1 << 30;

impl ExtReal {
    fn wrap(v: BigFloat, prec: Precision) -> Self {
        Self::wrap_exp(v, 0, prec)
    }

    fn wrap_exp(v: BigFloat, e: i64, prec: Precision) -> Self {
        let (v, e) = normalize(v, e);
        ExtReal { v, e, prec }
    }

    fn is_regular(&self) -> bool {
        !self.v.is_zero() && self.v.is_finite_value()
    }

    /// The value as a single astro-float number; only valid when the
    /// exponent is in the plain range.
    fn plain(&self) -> BigFloat {
        let mut v = self.v.clone();
        if self.is_regular() {
            v.set_exponent(self.e.clamp(-PLAIN_LIMIT, PLAIN_LIMIT) as i32);
        }
        v
    }

    pub fn zero(prec: Precision) -> Self {
        Self::wrap(BigFloat::from_word(0, prec.bits()), prec)
    }

    pub fn one(prec: Precision) -> Self {
        Self::wrap(BigFloat::from_word(1, prec.bits()), prec)
    }

    /// The reserved `-inf` marker used as the log-magnitude of zero.
    pub fn neg_infinity(prec: Precision) -> Self {
        Self::wrap(astro_float::INF_NEG, prec)
    }

    pub fn from_i64(x: i64, prec: Precision) -> Self {
        Self::wrap(BigFloat::from_i64(x, prec.bits()), prec)
    }

    pub fn from_u64(x: u64, prec: Precision) -> Self {
        Self::wrap(BigFloat::from_u64(x, prec.bits()), prec)
    }

    /// Exact conversion (every finite `f64` is representable).
    pub fn from_f64(x: f64, prec: Precision) -> Self {
        Self::wrap(BigFloat::from_f64(x, prec.bits()), prec)
    }

    pub fn from_bigint(x: &BigInt, prec: Precision) -> Self {
        let (sign, digits) = x.to_u64_digits();
        let bits = prec.bits();
        let mut acc = Self::zero(prec);
        let mut shift = 0i64;
        // low words first: each contributes d * 2^(64 i)
        for d in digits.iter() {
            let term = Self::wrap_exp(BigFloat::from_u64(*d, bits), shift, prec);
            acc = &acc + &term;
            shift += 64;
        }
        if sign == BigSign::Minus {
            acc = -acc;
        }
        acc
    }

    pub fn from_ratio(r: &BigRational, prec: Precision) -> Self {
        let n = Self::from_bigint(r.numer(), prec);
        let d = Self::from_bigint(r.denom(), prec);
        &n / &d
    }

    /// `2^e` exactly.
    pub fn pow2(e: i64, prec: Precision) -> Self {
        Self::wrap_exp(BigFloat::from_word(1, prec.bits()), e, prec)
    }

    /// Parses a decimal literal (`-0.125`, `3e-5`) or a ratio of two
    /// decimal literals (`-1/2`).
    pub fn parse(s: &str, prec: Precision) -> Result<Self, ParseError> {
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            let n = Self::parse(n, prec)?;
            let d = Self::parse(d, prec)?;
            if d.is_zero() {
                return Err(ParseError::ZeroDenominator(s.to_string()));
            }
            return Ok(&n / &d);
        }
        if s.is_empty()
            || !s
                .bytes()
                .all(|b| b.is_ascii_digit() || matches!(b, b'+' | b'-' | b'.' | b'e' | b'E'))
        {
            return Err(ParseError::Malformed(s.to_string()));
        }
        let bits = prec.bits();
        // astro-float handles moderate decimal exponents exactly; larger ones
        // are applied here as a power of ten
        let (mant, exp10) = match s.find(['e', 'E']) {
            Some(i) => {
                let e = s[i + 1..].parse::<i64>().map_err(|_| ParseError::Malformed(s.to_string()))?;
                (&s[..i], e)
            }
            None => (s, 0),
        };
        let literal = if exp10.unsigned_abs() <= 100_000 { s } else { mant };
        let v = with_consts(bits, |cc| BigFloat::parse(literal, Radix::Dec, bits, RM, cc));
        if v.is_nan() || v.is_inf() {
            return Err(ParseError::Malformed(s.to_string()));
        }
        let x = Self::wrap(v, prec);
        if exp10.unsigned_abs() <= 100_000 {
            return Ok(x);
        }
        Ok(&x * &Self::pow10(exp10, prec))
    }

    /// `10^k` for large `|k|`, via `exp(k ln 10)` with guard bits.
    fn pow10(k: i64, prec: Precision) -> Self {
        let guard = Precision::from_digits(prec.digits() + 40);
        let bits = guard.bits();
        let ln10 = Self::wrap(with_consts(bits, |cc| cc.ln_10(bits, RM)), guard);
        (&Self::from_i64(k, guard) * &ln10).exp().with_precision(prec)
    }

    pub fn precision(&self) -> Precision {
        self.prec
    }

    /// Re-rounds to `prec` (exact when widening).
    pub fn with_precision(&self, prec: Precision) -> Self {
        let mut v = self.v.clone();
        if v.is_inf() || v.is_nan() {
            return Self::wrap(v, prec);
        }
        v.set_precision(prec.bits(), RM).expect("precision change");
        Self::wrap_exp(v, self.e, prec)
    }

    /// Splits into a mantissa in the plain range and a decimal exponent
    /// `d`, with `self = m * 10^d`; `d = 0` unless the exponent is huge.
    fn decimal_split(&self, bits: usize) -> (BigFloat, i64) {
        if self.e.abs() < PLAIN_LIMIT / 2 {
            let mut v = self.plain();
            v.set_precision(bits, RM).expect("precision change");
            return (v, 0);
        }
        let guard = Precision::from_digits((bits as f64 / BITS_PER_DIGIT) as u32 + 40);
        let d = libm::floor(self.e as f64 * core::f64::consts::LOG10_2) as i64;
        let m = &self.with_precision(guard) / &Self::pow10(d, guard);
        let mut v = m.plain();
        v.set_precision(bits, RM).expect("precision change");
        (v, d)
    }

    /// Shortest decimal string that parses back to the identical value at
    /// this precision.
    pub fn to_decimal_string(&self) -> String {
        if self.v.is_zero() {
            return "0".to_string();
        }
        if self.v.is_inf_neg() {
            return "-inf".to_string();
        }
        let bits = self.prec.bits() + 64;
        let (m, d) = self.decimal_split(bits);
        let s = with_consts(bits, |cc| m.format(Radix::Dec, RM, cc)).expect("decimal formatting");
        shift_decimal_exponent(&s, d)
    }

    /// Decimal string rounded to about `digits` significant digits.
    pub fn to_string_digits(&self, digits: u32) -> String {
        if self.v.is_zero() {
            return "0".to_string();
        }
        if self.v.is_inf_neg() {
            return "-inf".to_string();
        }
        let p = Precision::from_digits(digits);
        let (m, d) = self.decimal_split(p.bits());
        let s = with_consts(p.bits(), |cc| m.format(Radix::Dec, RM, cc)).expect("decimal formatting");
        trim_decimal(&shift_decimal_exponent(&s, d), digits as usize)
    }

    pub fn is_zero(&self) -> bool {
        self.v.is_zero()
    }

    pub fn is_neg_infinity(&self) -> bool {
        self.v.is_inf_neg()
    }

    pub fn is_finite(&self) -> bool {
        self.v.is_finite_value()
    }

    pub fn is_negative(&self) -> bool {
        !self.v.is_zero() && self.v.is_negative()
    }

    pub fn is_positive(&self) -> bool {
        !self.v.is_zero() && self.v.is_positive()
    }

    /// -1, 0 or 1.
    pub fn signum(&self) -> i8 {
        if self.is_zero() {
            0
        } else if self.v.is_negative() {
            -1
        } else {
            1
        }
    }

    pub fn abs(&self) -> Self {
        ExtReal { v: self.v.abs(), e: self.e, prec: self.prec }
    }

    pub fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    pub fn min(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    fn bits(&self) -> usize {
        self.prec.bits()
    }

    pub fn recip(&self) -> Self {
        Self::wrap_exp(self.v.reciprocal(self.bits(), RM), self.e.saturating_neg(), self.prec)
    }

    pub fn sqrt(&self) -> Self {
        if !self.is_regular() {
            return Self::wrap(self.v.sqrt(self.bits(), RM), self.prec);
        }
        let mut v = self.v.clone();
        let odd = self.e.rem_euclid(2);
        v.set_exponent(odd as i32);
        Self::wrap_exp(v.sqrt(self.bits(), RM), (self.e - odd) / 2, self.prec)
    }

    pub fn powi(&self, mut n: u64) -> Self {
        let mut acc = Self::one(self.prec);
        let mut base = self.clone();
        while n > 0 {
            if n & 1 == 1 {
                acc = &acc * &base;
            }
            n >>= 1;
            if n > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    /// Natural logarithm; `ln 0` is the `-inf` marker.
    pub fn ln(&self) -> Self {
        let bits = self.bits();
        if !self.is_regular() || self.e == 0 {
            return Self::wrap(with_consts(bits, |cc| self.plain().ln(bits, RM, cc)), self.prec);
        }
        // ln v + e ln 2, with enough guard bits for the integer part
        let wide = bits + 128;
        let (lv, l2) = with_consts(wide, |cc| (self.v.ln(wide, RM, cc), cc.ln_2(wide, RM)));
        let t = BigFloat::from_i64(self.e, wide).mul(&l2, wide, RM);
        let mut out = lv.add(&t, wide, RM);
        out.set_precision(bits, RM).expect("precision change");
        Self::wrap(out, self.prec)
    }

    pub fn exp(&self) -> Self {
        if self.v.is_inf_neg() {
            return Self::zero(self.prec);
        }
        let bits = self.bits();
        if !self.is_regular() || self.e <= 20 {
            return Self::wrap(with_consts(bits, |cc| self.plain().exp(bits, RM, cc)), self.prec);
        }
        if self.e > 62 {
            return if self.is_negative() { Self::zero(self.prec) } else { Self::wrap(astro_float::INF_POS, self.prec) };
        }
        // x = q ln 2 + r with |r| <= ln 2
        let wide = bits + 128;
        let l2 = with_consts(wide, |cc| cc.ln_2(wide, RM));
        let mut x = self.plain();
        x.set_precision(wide, RM).expect("precision change");
        let q = x.div(&l2, wide, RM).floor();
        let qi = Self::wrap(q.clone(), Precision::from_digits(40)).floor_i128().expect("bounded quotient");
        let r = x.sub(&q.mul(&l2, wide, RM), wide, RM);
        let er = with_consts(bits, |cc| r.exp(bits, RM, cc));
        Self::wrap_exp(er, qi as i64, self.prec)
    }

    pub fn sin(&self) -> Self {
        let bits = self.bits();
        Self::wrap(with_consts(bits, |cc| self.plain().sin(bits, RM, cc)), self.prec)
    }

    pub fn cos(&self) -> Self {
        let bits = self.bits();
        Self::wrap(with_consts(bits, |cc| self.plain().cos(bits, RM, cc)), self.prec)
    }

    pub fn atan(&self) -> Self {
        let bits = self.bits();
        if self.is_regular() && self.e > PLAIN_LIMIT / 2 {
            let half_pi = &Self::pi(self.prec) / &Self::from_i64(2, self.prec);
            return if self.is_negative() { -half_pi } else { half_pi };
        }
        Self::wrap(with_consts(bits, |cc| self.plain().atan(bits, RM, cc)), self.prec)
    }

    pub fn pi(prec: Precision) -> Self {
        let bits = prec.bits();
        Self::wrap(with_consts(bits, |cc| cc.pi(bits, RM)), prec)
    }

    pub fn two_pi(prec: Precision) -> Self {
        let pi = Self::pi(prec);
        &pi + &pi
    }

    /// Angle of `(x, y)` in `(-pi, pi]`.
    pub fn atan2(y: &ExtReal, x: &ExtReal) -> ExtReal {
        let prec = y.prec.max(x.prec);
        if x.is_zero() {
            let half_pi = &Self::pi(prec) / &Self::from_i64(2, prec);
            return match y.signum() {
                1 => half_pi,
                -1 => -half_pi,
                _ => Self::zero(prec),
            };
        }
        let base = (y / x).atan();
        if x.is_positive() {
            base
        } else if y.is_negative() {
            &base - &Self::pi(prec)
        } else {
            &base + &Self::pi(prec)
        }
    }

    pub fn floor(&self) -> Self {
        if !self.is_regular() || self.e >= self.bits() as i64 {
            return self.clone();
        }
        if self.e <= 0 {
            return if self.is_negative() { Self::from_i64(-1, self.prec) } else { Self::zero(self.prec) };
        }
        Self::wrap(self.plain().floor(), self.prec)
    }

    /// Binary exponent `e` with `|x| = m * 2^e`, `m` in `[1/2, 1)`.
    pub fn exponent(&self) -> Option<i64> {
        if !self.is_regular() {
            return None;
        }
        Some(self.e)
    }

    /// Top 128 mantissa bits as an integer `M`, with `|x| = M * 2^(e - 128)`.
    fn top_u128(&self) -> Option<(u128, i64)> {
        let (words, _, _, _, _) = self.v.as_raw_parts()?;
        let len = words.len();
        let hi = *words.get(len.checked_sub(1)?)? as u128;
        let lo = if len >= 2 { words[len - 2] as u128 } else { 0 };
        Some(((hi << 64) | lo, self.e))
    }
    /// Nearest `f64`; saturates to `±inf` or `±0` outside the `f64` range.
    pub fn to_f64(&self) -> f64 {
        if self.v.is_zero() {
            return 0.0;
        }
        if self.v.is_inf_neg() {
            return f64::NEG_INFINITY;
        }
        if self.v.is_inf_pos() {
            return f64::INFINITY;
        }
        let Some((m, e)) = self.top_u128() else { return f64::NAN };
        let mant = (m >> 64) as f64 / 18_446_744_073_709_551_616.0;
        let e = e.clamp(-2000, 2000) as i32;
        let mag = libm::ldexp(mant, e);
        if self.v.is_negative() {
            -mag
        } else {
            mag
        }
    }

    /// `log2 |x|` as an `f64`, finite for every nonzero finite value.
    pub fn log2_abs_f64(&self) -> f64 {
        match self.top_u128() {
            Some((m, e)) if !self.v.is_zero() => {
                let mant = (m >> 64) as f64 / 18_446_744_073_709_551_616.0;
                libm::log2(mant) + e as f64
            }
            _ => f64::NEG_INFINITY,
        }
    }

    /// `floor(x)` as an integer, if it fits in an `i128`.
    pub fn floor_i128(&self) -> Option<i128> {
        let f = self.floor();
        if f.is_zero() {
            return Some(0);
        }
        let (m, e) = f.top_u128()?;
        if !(0..=126).contains(&e) {
            return None;
        }
        let mag = (m >> (128 - e)) as i128;
        Some(if f.is_negative() { -mag } else { mag })
    }

    /// Splits `x` into `floor(x)` and the fractional part scaled to
    /// `2^128`, truncated.
    pub fn to_fixed(&self) -> Option<(i128, u128)> {
        let int = self.floor_i128()?;
        let frac = self - &Self::from_bigint(&BigInt::from(int), self.prec);
        if frac.is_zero() {
            return Some((int, 0));
        }
        let (m, e) = frac.top_u128()?;
        // frac in (0, 1): e <= 0
        let shift = (-e) as u32;
        let f = if shift >= 128 { 0 } else { m >> shift };
        Some((int, f))
    }

    /// Exact rational value of a finite number.
    pub fn to_ratio(&self) -> Option<BigRational> {
        if self.v.is_zero() {
            return Some(BigRational::zero());
        }
        let (words, _, sign, _, _) = self.v.as_raw_parts()?;
        let e = self.e;
        let mut mant = BigInt::zero();
        for w in words.iter().rev() {
            mant = (mant << 64) + BigInt::from(*w);
        }
        let shift = e as i64 - 64 * words.len() as i64;
        let mut r = if shift >= 0 {
            BigRational::from_integer(mant << shift as usize)
        } else {
            BigRational::new(mant, BigInt::from(1) << (-shift) as usize)
        };
        if sign == Sign::Neg {
            r = -r;
        }
        Some(r)
    }

    pub fn total_cmp(&self, other: &Self) -> Ordering {
        self.partial_cmp(other).unwrap_or(Ordering::Equal)
    }
}

/// Adds `d` to the decimal exponent of a formatter string.
fn shift_decimal_exponent(s: &str, d: i64) -> String {
    if d == 0 {
        return s.to_string();
    }
    let (mant, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i64>().unwrap_or(0)),
        None => (s, 0),
    };
    format!("{mant}e{}", exp + d)
}

/// Rounds a scientific-notation string from the formatter to `digits`
/// significant digits and drops trailing zeros.
fn trim_decimal(s: &str, digits: usize) -> String {
    let (mant, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], &s[i + 1..]),
        None => (s, "0"),
    };
    let neg = mant.starts_with('-');
    let mant = mant.trim_start_matches(['-', '+']);
    let (ip, fp) = mant.split_once('.').unwrap_or((mant, ""));
    let mut all: Vec<u8> = ip.bytes().chain(fp.bytes()).map(|b| b - b'0').collect();
    let mut exp10: i64 = exp.parse::<i64>().unwrap_or(0) + ip.len() as i64 - 1;
    let lead = all.iter().position(|&d| d != 0).unwrap_or(all.len());
    all.drain(..lead);
    exp10 -= lead as i64;
    if all.is_empty() {
        return "0".to_string();
    }
    if all.len() > digits {
        let round_up = all[digits] >= 5;
        all.truncate(digits);
        if round_up {
            let mut i = digits;
            loop {
                if i == 0 {
                    all.insert(0, 1);
                    all.truncate(digits);
                    exp10 += 1;
                    break;
                }
                i -= 1;
                if all[i] == 9 {
                    all[i] = 0;
                } else {
                    all[i] += 1;
                    break;
                }
            }
        }
    }
    while all.len() > 1 && *all.last().unwrap() == 0 {
        all.pop();
    }
    let mut out = String::new();
    if neg {
        out.push('-');
    }
    out.push((b'0' + all[0]) as char);
    if all.len() > 1 {
        out.push('.');
        for d in &all[1..] {
            out.push((b'0' + d) as char);
        }
    }
    if exp10 != 0 {
        out.push('e');
        out.push_str(&exp10.to_string());
    }
    out
}

impl PartialEq for ExtReal {
    fn eq(&self, other: &Self) -> bool {
        self.partial_cmp(other) == Some(Ordering::Equal)
    }
}

impl PartialOrd for ExtReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        if !(self.is_regular() && other.is_regular()) || self.signum() != other.signum() {
            return self.v.cmp(&other.v).map(|c| c.cmp(&0));
        }
        let mag = self.e.cmp(&other.e).then_with(|| self.v.abs().cmp(&other.v.abs()).map_or(Ordering::Equal, |c| c.cmp(&0)));
        Some(if self.is_negative() { mag.reverse() } else { mag })
    }
}

impl fmt::Debug for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_string_digits(24))
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match f.precision() {
            Some(d) => write!(f, "{}", self.to_string_digits(d.max(1) as u32)),
            None => write!(f, "{}", self.to_decimal_string()),
        }
    }
}

fn add_signed(x: &ExtReal, y: &ExtReal, negate: bool) -> ExtReal {
    let prec = x.prec.max(y.prec);
    let bits = prec.bits();
    let yv = if negate { (&y.v).neg() } else { y.v.clone() };
    let round = |v: &BigFloat, e: i64| {
        let mut v = v.clone();
        v.set_precision(bits, RM).expect("precision change");
        ExtReal::wrap_exp(v, e, prec)
    };
    if x.is_zero() && y.is_regular() {
        return round(&yv, y.e);
    }
    if y.is_zero() && x.is_regular() {
        return round(&x.v, x.e);
    }
    if !(x.is_regular() && y.is_regular()) {
        let (a, b) = (x.plain(), if negate { y.plain().neg() } else { y.plain() });
        return ExtReal::wrap(a.add(&b, bits, RM), prec);
    }
    let d = x.e.saturating_sub(y.e);
    let gap = bits as i64 + 4;
    if d > gap {
        return round(&x.v, x.e);
    }
    if d < -gap {
        return round(&yv, y.e);
    }
    // align the smaller operand to the larger one's scale
    if d >= 0 {
        let mut b = yv;
        b.set_exponent(-d as i32);
        ExtReal::wrap_exp(x.v.add(&b, bits, RM), x.e, prec)
    } else {
        let mut a = x.v.clone();
        a.set_exponent(d as i32);
        ExtReal::wrap_exp(a.add(&yv, bits, RM), y.e, prec)
    }
}

fn mul_div(x: &ExtReal, y: &ExtReal, div: bool) -> ExtReal {
    let prec = x.prec.max(y.prec);
    let bits = prec.bits();
    if div {
        ExtReal::wrap_exp(x.v.div(&y.v, bits, RM), x.e.saturating_sub(y.e), prec)
    } else {
        ExtReal::wrap_exp(x.v.mul(&y.v, bits, RM), x.e.saturating_add(y.e), prec)
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $body:expr) => {
        impl<'a> $tr<&'a ExtReal> for &'a ExtReal {
            type Output = ExtReal;
            fn $m(self, rhs: &'a ExtReal) -> ExtReal {
                $body(self, rhs)
            }
        }
        impl $tr<ExtReal> for ExtReal {
            type Output = ExtReal;
            fn $m(self, rhs: ExtReal) -> ExtReal {
                (&self).$m(&rhs)
            }
        }
        impl<'a> $tr<&'a ExtReal> for ExtReal {
            type Output = ExtReal;
            fn $m(self, rhs: &'a ExtReal) -> ExtReal {
                (&self).$m(rhs)
            }
        }
    };
}

binop!(Add, add, |x, y| add_signed(x, y, false));
binop!(Sub, sub, |x, y| add_signed(x, y, true));
binop!(Mul, mul, |x, y| mul_div(x, y, false));
binop!(Div, div, |x, y| mul_div(x, y, true));

impl Neg for &ExtReal {
    type Output = ExtReal;
    fn neg(self) -> ExtReal {
        ExtReal { v: (&self.v).neg(), e: self.e, prec: self.prec }
    }
}

impl Neg for ExtReal {
    type Output = ExtReal;
    fn neg(self) -> ExtReal {
        -&self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> Precision {
        Precision::default()
    }

    #[test]
    fn precision_bits_round_to_words() {
        assert_eq!(Precision::from_digits(128).bits(), 448);
        assert_eq!(Precision::from_digits(15).bits(), 64);
        assert_eq!(Precision::from_digits(256).bits(), 896);
    }

    #[test]
    fn decimal_round_trip_is_exact() {
        let x = ExtReal::from_i64(1, p()) / ExtReal::from_i64(3, p());
        let back = ExtReal::parse(&x.to_decimal_string(), p()).unwrap();
        assert_eq!(back, x);
        let l = ExtReal::from_i64(3, p()).ln().powi(977);
        assert_eq!(ExtReal::parse(&l.to_decimal_string(), p()).unwrap(), l);
    }

    #[test]
    fn parses_ratios_and_rejects_garbage() {
        let h = ExtReal::parse("-1/2", p()).unwrap();
        assert_eq!(h.to_f64(), -0.5);
        assert!(ExtReal::parse("abc", p()).is_err());
        assert!(ExtReal::parse("1/0", p()).is_err());
        assert!(ExtReal::parse("", p()).is_err());
    }

    #[test]
    fn huge_powers_stay_finite() {
        let x = ExtReal::from_i64(27, p()).powi(400_000_000);
        assert!(x.is_finite());
        let l2 = x.log2_abs_f64();
        assert!((l2 / 400_000_000.0 - 27f64.log2()).abs() < 1e-9);
        let tiny = ExtReal::from_f64(0.5, p()).powi(1 << 30);
        assert!(tiny.is_positive());
        assert_eq!(tiny.exponent(), Some(-(1i64 << 30) + 1));
    }

    #[test]
    fn exponents_beyond_i32() {
        let big = ExtReal::from_i64(27, p()).powi(1u64 << 40);
        assert_eq!(&ExtReal::zero(p()) + &big, big);
        assert_eq!(&big - &ExtReal::zero(p()), big);
        let half = &big / &ExtReal::from_i64(2, p());
        assert_eq!(half.exponent().unwrap(), big.exponent().unwrap() - 1);
        assert!(&big - &half == half);
        let l = big.ln();
        let want = &ExtReal::from_u64(1u64 << 40, p()) * &ExtReal::from_i64(27, p()).ln();
        assert!((&l - &want).abs() < ExtReal::pow2(-300, p()));
        assert!((&l.exp() / &big - ExtReal::one(p())).abs() < ExtReal::pow2(-300, p()));
        let tiny = big.recip();
        assert!(tiny.is_positive() && tiny < ExtReal::pow2(-(1i64 << 40), p()));
        let back = ExtReal::parse(&tiny.to_decimal_string(), p()).unwrap();
        assert!((&(&back / &tiny) - &ExtReal::one(p())).abs() < ExtReal::pow2(-300, p()));
        assert_eq!(big.sqrt().exponent().unwrap(), (big.exponent().unwrap() + 1) / 2);
    }

    #[test]
    fn f64_conversions() {
        for v in [3.0, -0.75, 1e-300, 6.02e23, -1.0] {
            assert_eq!(ExtReal::from_f64(v, p()).to_f64(), v);
        }
        assert_eq!(ExtReal::from_i64(-7, p()).floor_i128(), Some(-7));
        assert_eq!(ExtReal::from_f64(-7.25, p()).floor_i128(), Some(-8));
        let (i, f) = ExtReal::from_f64(2.75, p()).to_fixed().unwrap();
        assert_eq!(i, 2);
        assert_eq!(f, 3u128 << 126);
        let (i, f) = ExtReal::from_f64(-0.25, p()).to_fixed().unwrap();
        assert_eq!((i, f), (-1, 3u128 << 126));
    }

    #[test]
    fn transcendental_values() {
        let l = ExtReal::from_i64(2, p()).ln() / ExtReal::from_i64(3, p()).ln();
        assert_eq!(&l.to_string_digits(12), "6.30929753571e-1");
        let pi = ExtReal::pi(p());
        assert!(pi.to_decimal_string().starts_with("3.14159265358979323846264338327950288"));
        let a = ExtReal::atan2(&ExtReal::from_i64(-1, p()), &ExtReal::from_i64(-1, p()));
        assert!((a.to_f64() + 3.0 * core::f64::consts::FRAC_PI_4).abs() < 1e-15);
    }

    #[test]
    fn ratio_round_trip() {
        let x = ExtReal::from_f64(-0.3125, p());
        let r = x.to_ratio().unwrap();
        assert_eq!(r, BigRational::new(BigInt::from(-5), BigInt::from(16)));
        assert_eq!(ExtReal::from_ratio(&r, p()), x);
    }

    #[test]
    fn trims_decimal_strings() {
        assert_eq!(trim_decimal("1.2500000e+0", 6), "1.25");
        assert_eq!(trim_decimal("-9.99996e-3", 4), "-1e-2");
        assert_eq!(trim_decimal("0.0", 3), "0");
    }
}
