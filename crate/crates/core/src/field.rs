//! Scalars over `K = R` or `C`.
//!
//! Two representations are used. [`FieldElement`] is polar: natural log of
//! the modulus plus a sign (real) or an angle in `[0, 2pi)` (complex), so that
//! products and integer powers never overflow and stay exact up to one
//! rounding per operation. [`Scalar`] is rectangular and is what matrices
//! hold, since sums need it.

use alloc::string::{String, ToString};
use core::fmt;
use core::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{ParseError, Result};
use crate::ext::{ExtReal, Precision};

/// The ground field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Field {
    Real,
    Complex,
}

impl Field {
    pub fn name(self) -> &'static str {
        match self {
            Field::Real => "real",
            Field::Complex => "complex",
        }
    }

    /// Number of real axes per coordinate.
    pub fn real_dim(self) -> usize {
        match self {
            Field::Real => 1,
            Field::Complex => 2,
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Exactly known argument of a field element.
#[derive(Clone, Debug, PartialEq)]
pub enum ExactPhase {
    /// Real field: +1 or -1.
    Sign(i8),
    /// Complex field: angle in radians, a rational number.
    Radians(BigRational),
    /// Complex field: angle as a rational multiple of `pi`, reduced mod 2.
    PiMultiple(BigRational),
}

/// Parses an exact rational from a decimal literal (`-0.0625`, `1e-3`) or
/// from a ratio of such literals (`-1/2`).
pub fn parse_exact_ratio(s: &str) -> Result<BigRational, ParseError> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n = parse_exact_ratio(n)?;
        let d = parse_exact_ratio(d)?;
        if d.is_zero() {
            return Err(ParseError::ZeroDenominator(s.to_string()));
        }
        return Ok(n / d);
    }
    let bad = || ParseError::Malformed(s.to_string());
    let (mant, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i64>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (neg, mant) = match mant.as_bytes().first() {
        Some(b'-') => (true, &mant[1..]),
        Some(b'+') => (false, &mant[1..]),
        _ => (false, mant),
    };
    let (ip, fp) = mant.split_once('.').unwrap_or((mant, ""));
    if ip.is_empty() && fp.is_empty() {
        return Err(bad());
    }
    if !ip.bytes().chain(fp.bytes()).all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    if exp.abs() > 100_000 {
        return Err(bad());
    }
    let mut digits = String::from(ip);
    digits.push_str(fp);
    let mut num: BigInt = digits.parse().unwrap_or_else(|_| BigInt::zero());
    if neg {
        num = -num;
    }
    let scale = exp - fp.len() as i64;
    let ten = BigInt::from(10);
    let r = if scale >= 0 {
        BigRational::from_integer(num * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(num, num_traits::pow(ten, (-scale) as usize))
    };
    Ok(r)
}

/// Rectangular scalar.
#[derive(Clone, PartialEq)]
pub enum Scalar {
    Real(ExtReal),
    Complex(ExtReal, ExtReal),
}

impl Scalar {
    pub fn zero(field: Field, prec: Precision) -> Self {
        match field {
            Field::Real => Scalar::Real(ExtReal::zero(prec)),
            Field::Complex => Scalar::Complex(ExtReal::zero(prec), ExtReal::zero(prec)),
        }
    }

    pub fn one(field: Field, prec: Precision) -> Self {
        match field {
            Field::Real => Scalar::Real(ExtReal::one(prec)),
            Field::Complex => Scalar::Complex(ExtReal::one(prec), ExtReal::zero(prec)),
        }
    }

    pub fn real(x: ExtReal) -> Self {
        Scalar::Real(x)
    }

    pub fn from_f64(x: f64, prec: Precision) -> Self {
        Scalar::Real(ExtReal::from_f64(x, prec))
    }

    pub fn from_i64(x: i64, prec: Precision) -> Self {
        Scalar::Real(ExtReal::from_i64(x, prec))
    }

    pub fn from_ratio(r: &BigRational, prec: Precision) -> Self {
        Scalar::Real(ExtReal::from_ratio(r, prec))
    }

    pub fn field(&self) -> Field {
        match self {
            Scalar::Real(_) => Field::Real,
            Scalar::Complex(..) => Field::Complex,
        }
    }

    pub fn precision(&self) -> Precision {
        match self {
            Scalar::Real(x) => x.precision(),
            Scalar::Complex(a, b) => a.precision().max(b.precision()),
        }
    }

    pub fn with_precision(&self, prec: Precision) -> Self {
        match self {
            Scalar::Real(x) => Scalar::Real(x.with_precision(prec)),
            Scalar::Complex(a, b) => Scalar::Complex(a.with_precision(prec), b.with_precision(prec)),
        }
    }

    /// Same value viewed in `field` (a real value is promoted; the imaginary
    /// part is dropped when demoting).
    pub fn in_field(&self, field: Field) -> Self {
        match (self, field) {
            (Scalar::Real(x), Field::Complex) => Scalar::Complex(x.clone(), ExtReal::zero(x.precision())),
            (Scalar::Complex(a, _), Field::Real) => Scalar::Real(a.clone()),
            _ => self.clone(),
        }
    }

    pub fn re(&self) -> ExtReal {
        match self {
            Scalar::Real(x) | Scalar::Complex(x, _) => x.clone(),
        }
    }

    pub fn im(&self) -> ExtReal {
        match self {
            Scalar::Real(x) => ExtReal::zero(x.precision()),
            Scalar::Complex(_, y) => y.clone(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Scalar::Real(x) => x.is_zero(),
            Scalar::Complex(a, b) => a.is_zero() && b.is_zero(),
        }
    }

    pub fn abs_sq(&self) -> ExtReal {
        match self {
            Scalar::Real(x) => x * x,
            Scalar::Complex(a, b) => &(a * a) + &(b * b),
        }
    }

    /// Modulus.
    pub fn abs(&self) -> ExtReal {
        match self {
            Scalar::Real(x) => x.abs(),
            Scalar::Complex(a, b) => {
                if b.is_zero() {
                    a.abs()
                } else if a.is_zero() {
                    b.abs()
                } else {
                    self.abs_sq().sqrt()
                }
            }
        }
    }

    pub fn scale(&self, k: &ExtReal) -> Self {
        match self {
            Scalar::Real(x) => Scalar::Real(x * k),
            Scalar::Complex(a, b) => Scalar::Complex(a * k, b * k),
        }
    }

    pub fn recip(&self) -> Self {
        match self {
            Scalar::Real(x) => Scalar::Real(x.recip()),
            Scalar::Complex(a, b) => {
                let d = self.abs_sq();
                Scalar::Complex(a / &d, -(b / &d))
            }
        }
    }

    pub fn powi(&self, mut n: u64) -> Self {
        if let Scalar::Real(x) = self {
            return Scalar::Real(x.powi(n));
        }
        let mut base = self.clone();
        let mut acc = Scalar::one(self.field(), self.precision());
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

    /// `(re, im)` rounded to `f64`.
    pub fn to_f64_parts(&self) -> (f64, f64) {
        (self.re().to_f64(), self.im().to_f64())
    }

    /// Polar form (no exact data attached).
    pub fn to_polar(&self) -> FieldElement {
        FieldElement::from_scalar(self)
    }

    pub fn parse_real(s: &str, prec: Precision) -> Result<Self, ParseError> {
        Ok(Scalar::Real(ExtReal::parse(s, prec)?))
    }

    /// `log2 |x|` as an `f64`.
    pub fn log2_abs_f64(&self) -> f64 {
        match self {
            Scalar::Real(x) => x.log2_abs_f64(),
            Scalar::Complex(a, b) => {
                let la = a.log2_abs_f64();
                let lb = b.log2_abs_f64();
                let hi = la.max(lb);
                if hi == f64::NEG_INFINITY {
                    return hi;
                }
                hi + 0.5 * libm::log2(libm::exp2(2.0 * (la - hi)) + libm::exp2(2.0 * (lb - hi)))
            }
        }
    }
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Real(x) => write!(f, "{x:?}"),
            Scalar::Complex(a, b) => write!(f, "({a:?} + {b:?}i)"),
        }
    }
}

impl<'a> Add<&'a Scalar> for &'a Scalar {
    type Output = Scalar;
    fn add(self, rhs: &'a Scalar) -> Scalar {
        match (self, rhs) {
            (Scalar::Real(a), Scalar::Real(b)) => Scalar::Real(a + b),
            _ => Scalar::Complex(&self.re() + &rhs.re(), &self.im() + &rhs.im()),
        }
    }
}

impl<'a> Sub<&'a Scalar> for &'a Scalar {
    type Output = Scalar;
    fn sub(self, rhs: &'a Scalar) -> Scalar {
        match (self, rhs) {
            (Scalar::Real(a), Scalar::Real(b)) => Scalar::Real(a - b),
            _ => Scalar::Complex(&self.re() - &rhs.re(), &self.im() - &rhs.im()),
        }
    }
}

impl<'a> Mul<&'a Scalar> for &'a Scalar {
    type Output = Scalar;
    fn mul(self, rhs: &'a Scalar) -> Scalar {
        match (self, rhs) {
            (Scalar::Real(a), Scalar::Real(b)) => Scalar::Real(a * b),
            (Scalar::Real(k), Scalar::Complex(..)) => rhs.scale(k),
            (Scalar::Complex(..), Scalar::Real(k)) => self.scale(k),
            (Scalar::Complex(a, b), Scalar::Complex(c, d)) => {
                Scalar::Complex(&(a * c) - &(b * d), &(a * d) + &(b * c))
            }
        }
    }
}

impl<'a> Div<&'a Scalar> for &'a Scalar {
    type Output = Scalar;
    fn div(self, rhs: &'a Scalar) -> Scalar {
        match (self, rhs) {
            (Scalar::Real(a), Scalar::Real(b)) => Scalar::Real(a / b),
            (_, Scalar::Real(k)) => self.scale(&k.recip()),
            _ => self * &rhs.recip(),
        }
    }
}

impl Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        match self {
            Scalar::Real(x) => Scalar::Real(-x),
            Scalar::Complex(a, b) => Scalar::Complex(-a, -b),
        }
    }
}

macro_rules! owned_ops {
    ($tr:ident, $m:ident) => {
        impl $tr<Scalar> for Scalar {
            type Output = Scalar;
            fn $m(self, rhs: Scalar) -> Scalar {
                (&self).$m(&rhs)
            }
        }
        impl<'a> $tr<&'a Scalar> for Scalar {
            type Output = Scalar;
            fn $m(self, rhs: &'a Scalar) -> Scalar {
                (&self).$m(rhs)
            }
        }
    };
}

owned_ops!(Add, add);
owned_ops!(Sub, sub);
owned_ops!(Mul, mul);
owned_ops!(Div, div);

/// Argument of a polar element.
#[derive(Clone, Debug, PartialEq)]
pub enum Phase {
    /// Real field.
    Sign(i8),
    /// Complex field, in `[0, 2pi)`.
    Angle(ExtReal),
}

/// Largest exponent for which exact rational powers are still tracked.
const EXACT_POWER_LIMIT: u64 = 256;

/// Polar field element.
#[derive(Clone, Debug)]
pub struct FieldElement {
    field: Field,
    log_mag: ExtReal,
    phase: Phase,
    exact_modulus: Option<BigRational>,
    exact_phase: Option<ExactPhase>,
}

fn normalize_angle(theta: &ExtReal) -> ExtReal {
    let prec = theta.precision();
    let two_pi = ExtReal::two_pi(prec);
    let k = (theta / &two_pi).floor();
    let mut r = theta - &(&k * &two_pi);
    if r.is_negative() {
        r = &r + &two_pi;
    }
    if r >= two_pi {
        r = &r - &two_pi;
    }
    r
}

fn reduce_pi_multiple(q: &BigRational) -> BigRational {
    let two = BigRational::from_integer(BigInt::from(2));
    let k = (q / &two).floor();
    q - &(k * two)
}

impl FieldElement {
    /// Exact real rational.
    pub fn real_ratio(r: &BigRational, prec: Precision) -> Self {
        let sign = if r.is_negative() { -1 } else { 1 };
        let modulus = r.abs();
        let log_mag = if modulus.is_zero() {
            ExtReal::neg_infinity(prec)
        } else {
            ExtReal::from_ratio(&modulus, prec).ln()
        };
        FieldElement {
            field: Field::Real,
            log_mag,
            phase: Phase::Sign(sign),
            exact_modulus: Some(modulus),
            exact_phase: Some(ExactPhase::Sign(sign)),
        }
    }

    pub fn real_i64(x: i64, prec: Precision) -> Self {
        Self::real_ratio(&BigRational::from_integer(BigInt::from(x)), prec)
    }

    /// Exact real from a decimal or `p/q` literal.
    pub fn parse_real(s: &str, prec: Precision) -> Result<Self, ParseError> {
        Ok(Self::real_ratio(&parse_exact_ratio(s)?, prec))
    }

    /// Complex element `modulus * e^{i * radians}` with both parts rational.
    pub fn complex_exact_radians(modulus: &BigRational, radians: &BigRational, prec: Precision) -> Self {
        let angle = normalize_angle(&ExtReal::from_ratio(radians, prec));
        FieldElement {
            field: Field::Complex,
            log_mag: if modulus.is_zero() {
                ExtReal::neg_infinity(prec)
            } else {
                ExtReal::from_ratio(modulus, prec).ln()
            },
            phase: Phase::Angle(angle),
            exact_modulus: Some(modulus.abs()),
            exact_phase: Some(ExactPhase::Radians(radians.clone())),
        }
    }

    /// Complex element `modulus * e^{i * pi * turns}` with both parts rational.
    pub fn complex_exact_pi(modulus: &BigRational, pi_multiple: &BigRational, prec: Precision) -> Self {
        let q = reduce_pi_multiple(pi_multiple);
        let angle = &ExtReal::from_ratio(&q, prec) * &ExtReal::pi(prec);
        FieldElement {
            field: Field::Complex,
            log_mag: if modulus.is_zero() {
                ExtReal::neg_infinity(prec)
            } else {
                ExtReal::from_ratio(modulus, prec).ln()
            },
            phase: Phase::Angle(angle),
            exact_modulus: Some(modulus.abs()),
            exact_phase: Some(ExactPhase::PiMultiple(q)),
        }
    }

    /// Polar element from a log-modulus and a sign or angle.
    pub fn from_log_polar(field: Field, log_mag: ExtReal, phase: Phase) -> Self {
        let phase = match (field, phase) {
            (Field::Real, Phase::Sign(s)) => Phase::Sign(if s < 0 { -1 } else { 1 }),
            (Field::Real, Phase::Angle(a)) => {
                let a = normalize_angle(&a);
                Phase::Sign(if a.is_zero() { 1 } else { -1 })
            }
            (Field::Complex, Phase::Sign(s)) => Phase::Angle(if s < 0 {
                ExtReal::pi(log_mag.precision())
            } else {
                ExtReal::zero(log_mag.precision())
            }),
            (Field::Complex, Phase::Angle(a)) => Phase::Angle(normalize_angle(&a)),
        };
        FieldElement { field, log_mag, phase, exact_modulus: None, exact_phase: None }
    }

    pub fn from_scalar(x: &Scalar) -> Self {
        let prec = x.precision();
        match x {
            Scalar::Real(v) => FieldElement {
                field: Field::Real,
                log_mag: if v.is_zero() { ExtReal::neg_infinity(prec) } else { v.abs().ln() },
                phase: Phase::Sign(if v.is_negative() { -1 } else { 1 }),
                exact_modulus: None,
                exact_phase: None,
            },
            Scalar::Complex(a, b) => {
                let log_mag = if x.is_zero() { ExtReal::neg_infinity(prec) } else { x.abs().ln() };
                let angle = normalize_angle(&ExtReal::atan2(b, a));
                FieldElement {
                    field: Field::Complex,
                    log_mag,
                    phase: Phase::Angle(angle),
                    exact_modulus: None,
                    exact_phase: None,
                }
            }
        }
    }

    /// Same element viewed over `field`. Promotion to `C` keeps exact data
    /// (sign -1 becomes the exact angle `pi`). Demotion keeps only sign-like
    /// angles.
    pub fn in_field(&self, field: Field) -> Self {
        if field == self.field {
            return self.clone();
        }
        let prec = self.precision();
        match field {
            Field::Complex => {
                let sign = match self.phase {
                    Phase::Sign(s) => s,
                    Phase::Angle(_) => 1,
                };
                let mut out = Self::from_log_polar(Field::Complex, self.log_mag.clone(), Phase::Sign(sign));
                out.exact_modulus = self.exact_modulus.clone();
                out.exact_phase = Some(ExactPhase::PiMultiple(if sign < 0 {
                    BigRational::one()
                } else {
                    BigRational::zero()
                }));
                let _ = prec;
                out
            }
            Field::Real => {
                let mut out = Self::from_log_polar(Field::Real, self.log_mag.clone(), self.phase.clone());
                out.exact_modulus = self.exact_modulus.clone();
                out
            }
        }
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn precision(&self) -> Precision {
        self.log_mag.precision()
    }

    pub fn is_zero(&self) -> bool {
        self.log_mag.is_neg_infinity()
    }

    /// `ln |x|` (`-inf` marker for zero).
    pub fn log_mag(&self) -> &ExtReal {
        &self.log_mag
    }

    pub fn phase(&self) -> &Phase {
        &self.phase
    }

    pub fn exact_modulus(&self) -> Option<&BigRational> {
        self.exact_modulus.as_ref()
    }

    pub fn exact_phase(&self) -> Option<&ExactPhase> {
        self.exact_phase.as_ref()
    }

    /// Sign for real elements; `None` over `C`.
    pub fn sign(&self) -> Option<i8> {
        match self.phase {
            Phase::Sign(s) => Some(s),
            Phase::Angle(_) => None,
        }
    }

    /// Argument in radians (`0` or `pi` over `R`).
    pub fn angle(&self) -> ExtReal {
        match &self.phase {
            Phase::Sign(s) if *s < 0 => ExtReal::pi(self.precision()),
            Phase::Sign(_) => ExtReal::zero(self.precision()),
            Phase::Angle(a) => a.clone(),
        }
    }

    /// Modulus `|x|`.
    pub fn modulus(&self) -> ExtReal {
        match &self.exact_modulus {
            Some(r) => ExtReal::from_ratio(r, self.precision()),
            None => self.log_mag.exp(),
        }
    }

    pub fn with_precision(&self, prec: Precision) -> Self {
        let mut out = self.clone();
        out.log_mag = match &self.exact_modulus {
            Some(r) if !r.is_zero() => ExtReal::from_ratio(r, prec).ln(),
            _ => self.log_mag.with_precision(prec),
        };
        if let Phase::Angle(a) = &self.phase {
            out.phase = Phase::Angle(match &self.exact_phase {
                Some(ExactPhase::Radians(r)) => normalize_angle(&ExtReal::from_ratio(r, prec)),
                Some(ExactPhase::PiMultiple(q)) => &ExtReal::from_ratio(q, prec) * &ExtReal::pi(prec),
                _ => a.with_precision(prec),
            });
        }
        out
    }

    /// Rectangular value at this element's precision.
    pub fn to_scalar(&self) -> Scalar {
        self.to_scalar_at(self.precision())
    }

    /// Rectangular value evaluated at `prec` (exact parts are re-expanded at
    /// that precision rather than rounded from the stored logarithm).
    pub fn to_scalar_at(&self, prec: Precision) -> Scalar {
        let src = if prec == self.precision() { self.clone() } else { self.with_precision(prec) };
        if src.is_zero() {
            return Scalar::zero(self.field, prec);
        }
        let r = src.modulus();
        match &src.phase {
            Phase::Sign(s) => Scalar::Real(if *s < 0 { -r } else { r }),
            Phase::Angle(a) => Scalar::Complex(&r * &a.cos(), &r * &a.sin()),
        }
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        let field = if self.field == Field::Complex || rhs.field == Field::Complex {
            Field::Complex
        } else {
            Field::Real
        };
        let (a, b) = (self.in_field(field), rhs.in_field(field));
        let log_mag = if a.is_zero() || b.is_zero() {
            ExtReal::neg_infinity(a.precision().max(b.precision()))
        } else {
            &a.log_mag + &b.log_mag
        };
        let phase = match (&a.phase, &b.phase) {
            (Phase::Sign(x), Phase::Sign(y)) => Phase::Sign(x * y),
            _ => Phase::Angle(normalize_angle(&(&a.angle() + &b.angle()))),
        };
        let exact_modulus = match (&a.exact_modulus, &b.exact_modulus) {
            (Some(x), Some(y)) => Some(x * y),
            _ => None,
        };
        let exact_phase = match (&a.exact_phase, &b.exact_phase) {
            (Some(ExactPhase::Sign(x)), Some(ExactPhase::Sign(y))) => Some(ExactPhase::Sign(x * y)),
            (Some(ExactPhase::Radians(x)), Some(ExactPhase::Radians(y))) => Some(ExactPhase::Radians(x + y)),
            (Some(ExactPhase::PiMultiple(x)), Some(ExactPhase::PiMultiple(y))) => {
                Some(ExactPhase::PiMultiple(reduce_pi_multiple(&(x + y))))
            }
            (Some(ExactPhase::Radians(x)), Some(ExactPhase::PiMultiple(z)))
            | (Some(ExactPhase::PiMultiple(z)), Some(ExactPhase::Radians(x)))
                if z.is_zero() =>
            {
                Some(ExactPhase::Radians(x.clone()))
            }
            _ => None,
        };
        FieldElement { field, log_mag, phase, exact_modulus, exact_phase }
    }

    /// Multiplicative inverse. Panics on zero.
    pub fn inv(&self) -> Self {
        assert!(!self.is_zero(), "inverse of zero");
        let phase = match &self.phase {
            Phase::Sign(s) => Phase::Sign(*s),
            Phase::Angle(a) => Phase::Angle(normalize_angle(&-a)),
        };
        FieldElement {
            field: self.field,
            log_mag: -&self.log_mag,
            phase,
            exact_modulus: self.exact_modulus.as_ref().map(|r| r.recip()),
            exact_phase: self.exact_phase.as_ref().map(|p| match p {
                ExactPhase::Sign(s) => ExactPhase::Sign(*s),
                ExactPhase::Radians(r) => ExactPhase::Radians(-r),
                ExactPhase::PiMultiple(q) => ExactPhase::PiMultiple(reduce_pi_multiple(&-q)),
            }),
        }
    }

    pub fn div(&self, rhs: &Self) -> Self {
        self.mul(&rhs.inv())
    }

    /// `x^k`: the log-modulus is scaled by `k`, the phase multiplied by `k`.
    pub fn powi(&self, k: u64) -> Self {
        let prec = self.precision();
        if k == 0 {
            let one = Self::real_i64(1, prec);
            return one.in_field(self.field);
        }
        if self.is_zero() {
            return self.clone();
        }
        let kk = ExtReal::from_u64(k, prec);
        let log_mag = &self.log_mag * &kk;
        let phase = match &self.phase {
            Phase::Sign(s) => Phase::Sign(if *s < 0 && k % 2 == 1 { -1 } else { 1 }),
            Phase::Angle(a) => Phase::Angle(normalize_angle(&(a * &kk))),
        };
        let small = k <= EXACT_POWER_LIMIT;
        let exact_modulus = self
            .exact_modulus
            .as_ref()
            .filter(|_| small)
            .map(|r| num_traits::pow(r.clone(), k as usize));
        let kq = BigRational::from_integer(BigInt::from(k));
        let exact_phase = self.exact_phase.as_ref().map(|p| match p {
            ExactPhase::Sign(s) => ExactPhase::Sign(if *s < 0 && k % 2 == 1 { -1 } else { 1 }),
            ExactPhase::Radians(r) => ExactPhase::Radians(r * &kq),
            ExactPhase::PiMultiple(q) => ExactPhase::PiMultiple(reduce_pi_multiple(&(q * &kq))),
        });
        FieldElement { field: self.field, log_mag, phase, exact_modulus, exact_phase }
    }

    /// Phase as a fraction of a full turn, scaled to `2^128`.
    pub fn turns_fixed(&self) -> u128 {
        match &self.phase {
            Phase::Sign(s) if *s < 0 => 1u128 << 127,
            Phase::Sign(_) => 0,
            Phase::Angle(a) => {
                let t = a / &ExtReal::two_pi(a.precision());
                t.to_fixed().map(|(_, f)| f).unwrap_or(0)
            }
        }
    }
}

impl PartialEq for FieldElement {
    fn eq(&self, other: &Self) -> bool {
        self.field == other.field && self.log_mag == other.log_mag && self.phase == other.phase
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.to_scalar())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p() -> Precision {
        Precision::default()
    }

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn exact_literals() {
        assert_eq!(parse_exact_ratio("-0.0625").unwrap(), q(-1, 16));
        assert_eq!(parse_exact_ratio("1/3").unwrap(), q(1, 3));
        assert_eq!(parse_exact_ratio("2.5e-2").unwrap(), q(1, 40));
        assert_eq!(parse_exact_ratio("12").unwrap(), q(12, 1));
        assert!(parse_exact_ratio("1/0").is_err());
        assert!(parse_exact_ratio("--1").is_err());
        assert!(parse_exact_ratio("1.2.3").is_err());
    }

    #[test]
    fn powers_track_exact_moduli_and_signs() {
        let b = FieldElement::real_ratio(&q(-1, 2), p());
        let b3 = b.powi(3);
        assert_eq!(b3.sign(), Some(-1));
        assert_eq!(b3.exact_modulus(), Some(&q(1, 8)));
        assert_eq!(b3.to_scalar().re().to_f64(), -0.125);
        let r = FieldElement::real_i64(3, p()).div(&b);
        assert_eq!(r.exact_modulus(), Some(&q(6, 1)));
        assert_eq!(r.sign(), Some(-1));
    }

    #[test]
    fn complex_example_entry() {
        // (e^i / 2)^4: modulus 1/16, argument 4 rad
        let b = FieldElement::complex_exact_radians(&q(1, 2), &q(1, 1), p());
        let b4 = b.powi(4);
        assert_eq!(b4.exact_modulus(), Some(&q(1, 16)));
        assert_eq!(b4.exact_phase(), Some(&ExactPhase::Radians(q(4, 1))));
        assert!((b4.angle().to_f64() - 4.0).abs() < 1e-15);
        let (re, im) = b4.to_scalar().to_f64_parts();
        assert!((re - 4f64.cos() / 16.0).abs() < 1e-16);
        assert!((im - 4f64.sin() / 16.0).abs() < 1e-16);
    }

    #[test]
    fn complex_multiplication_matches_rectangular() {
        let a = Scalar::Complex(ExtReal::from_f64(0.3, p()), ExtReal::from_f64(-1.7, p()));
        let b = Scalar::Complex(ExtReal::from_f64(-2.0, p()), ExtReal::from_f64(0.25, p()));
        let rect = &a * &b;
        let polar = a.to_polar().mul(&b.to_polar()).to_scalar();
        let err = (&rect - &polar).abs();
        assert!(err.to_f64() < 1e-120);
        let back = &(&rect / &b) - &a;
        assert!(back.abs().to_f64() < 1e-120);
    }

    #[test]
    fn promotion_keeps_sign_as_angle() {
        let x = FieldElement::real_ratio(&q(-3, 1), p()).in_field(Field::Complex);
        assert_eq!(x.exact_phase(), Some(&ExactPhase::PiMultiple(q(1, 1))));
        assert!((x.angle().to_f64() - core::f64::consts::PI).abs() < 1e-15);
        assert_eq!(x.turns_fixed(), 1u128 << 127);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn log_mag_of_power_products_is_additive(num in 1i64..50, den in 1i64..50, j in 0u64..40, k in 0u64..40) {
            prop_assume!(num != den);
            let x = FieldElement::real_ratio(&q(-num, den), p());
            let lhs = x.powi(j).mul(&x.powi(k));
            let rhs = x.powi(j + k);
            let d = (lhs.log_mag() - rhs.log_mag()).abs();
            let scale = rhs.log_mag().abs().max(ExtReal::one(p()));
            prop_assert!(d <= &scale * &(&p().ulp() * &ExtReal::from_i64(8, p())));
            prop_assert_eq!(lhs.sign(), rhs.sign());
        }

        #[test]
        fn rectangular_round_trip_preserves_log_mag(re in -1e6f64..1e6, im in -1e6f64..1e6) {
            prop_assume!(re.abs() + im.abs() > 1e-9);
            let x = Scalar::Complex(ExtReal::from_f64(re, p()), ExtReal::from_f64(im, p()));
            let polar = x.to_polar();
            let back = polar.to_scalar().to_polar();
            let d = (polar.log_mag() - back.log_mag()).abs();
            let scale = polar.log_mag().abs().max(ExtReal::one(p()));
            prop_assert!(d <= &scale * &(&p().ulp() * &ExtReal::from_i64(2, p())));
        }
    }
}
