//! Semigroup systems: the example families, hypothesis validation, the
//! affine lift and the quadrant system.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use num_bigint::BigInt;
use num_rational::BigRational;

use crate::error::{Error, Result};
use crate::ext::{ExtReal, Precision};
use crate::field::{Field, FieldElement, Scalar};
use crate::matrix::{
    condition_ii, growth_lambda, normalized_inverse_limit, BoundCertificate, Diagonal, LimitMatrix, LowerTriangular,
    Matrix,
};
use crate::scalar::{certify_generating, default_delta_cmp, prec_compare, CertifyOptions, GeneratingPair, PrecOutcome};

/// Which hypothesis a check belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CheckKind {
    ModulusChain,
    Generating,
    PrecChain,
    ConditionII,
    TranslationVector,
    Parameters,
}

impl CheckKind {
    pub fn name(self) -> &'static str {
        match self {
            CheckKind::ModulusChain => "modulus-chain",
            CheckKind::Generating => "generating-pair",
            CheckKind::PrecChain => "prec-chain",
            CheckKind::ConditionII => "condition-ii",
            CheckKind::TranslationVector => "translation-vector",
            CheckKind::Parameters => "parameters",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub kind: CheckKind,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Hypotheses a report was checked against.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Hypotheses {
    Theorem1,
    Theorem2,
    Quadrant,
}

impl Hypotheses {
    pub fn name(self) -> &'static str {
        match self {
            Hypotheses::Theorem1 => "theorem1",
            Hypotheses::Theorem2 => "theorem2",
            Hypotheses::Quadrant => "quadrant",
        }
    }
}

#[derive(Clone, Debug)]
pub struct ValidationReport {
    pub hypotheses: Hypotheses,
    pub accepted: bool,
    pub checks: Vec<Check>,
    /// Certified pairs in check order.
    pub pairs: Vec<GeneratingPair>,
    /// Condition (ii) column, or `(A - I)^{-1} v` for affine systems.
    pub column: Vec<Scalar>,
}

impl ValidationReport {
    fn new(hypotheses: Hypotheses, checks: Vec<Check>, pairs: Vec<GeneratingPair>, column: Vec<Scalar>) -> Self {
        let accepted = checks.iter().all(|c| c.passed);
        ValidationReport { hypotheses, accepted, checks, pairs, column }
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn first_failure(&self) -> Option<&Check> {
        self.failures().next()
    }
}

/// Tolerances and certification settings used by validation.
#[derive(Clone, Debug)]
pub struct ValidationOptions {
    pub certify: CertifyOptions,
    pub delta_cmp: ExtReal,
    pub tau_zero: ExtReal,
}

impl ValidationOptions {
    pub fn for_precision(prec: Precision) -> Self {
        ValidationOptions {
            certify: CertifyOptions::default(),
            delta_cmp: default_delta_cmp(prec),
            tau_zero: default_tau_zero(prec),
        }
    }
}

pub fn default_tau_zero(prec: Precision) -> ExtReal {
    ExtReal::parse("1e-40", prec).expect("literal")
}

fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn modulus_lt(x: &FieldElement, y: &FieldElement) -> bool {
    match (x.exact_modulus(), y.exact_modulus()) {
        (Some(a), Some(b)) => a < b,
        _ => x.log_mag().total_cmp(y.log_mag()) == Ordering::Less,
    }
}

fn link(name: String, passed: bool) -> Check {
    let detail = if passed { String::from("holds") } else { format!("{name} violated") };
    Check { kind: CheckKind::ModulusChain, name, passed, detail }
}

/// `0 < |B_n| < ... < |B_1| < 1 < |A_1| < ... < |A_n|`, one check per link.
fn modulus_chain(a: &[FieldElement], b: &[FieldElement]) -> Vec<Check> {
    let n = a.len();
    let prec = a[0].precision();
    let one = FieldElement::real_i64(1, prec);
    let mut out = Vec::new();
    for j in (1..n).rev() {
        out.push(link(format!("|B{}| < |B{}|", j + 1, j), modulus_lt(&b[j], &b[j - 1])));
    }
    out.push(link(String::from("|B1| < 1"), modulus_lt(&b[0], &one)));
    out.push(link(String::from("1 < |A1|"), modulus_lt(&one, &a[0])));
    for j in 1..n {
        out.push(link(format!("|A{}| < |A{}|", j, j + 1), modulus_lt(&a[j - 1], &a[j])));
    }
    out
}

fn certify_check(name: String, pair: &GeneratingPair) -> Check {
    Check {
        kind: CheckKind::Generating,
        name,
        passed: pair.is_certified(),
        detail: format!("{}: {}", pair.certificate.name(), pair.reason),
    }
}

fn prec_check(name: String, p: &GeneratingPair, q: &GeneratingPair, delta: &ExtReal) -> Check {
    let o = prec_compare(p, q, delta);
    Check { kind: CheckKind::PrecChain, name, passed: o.outcome == PrecOutcome::Less, detail: o.reason }
}

/// Theorem 1 hypotheses: the modulus chain, certification of `(B_1, A_1)`
/// and every `(B_j/B_1, A_j/A_1)`, the strict `prec` chain, and condition
/// (ii).
pub fn validate_theorem1(a: &LowerTriangular, b: &Diagonal, opts: &ValidationOptions) -> Result<ValidationReport> {
    let n = a.n();
    if b.n() != n {
        return Err(Error::DimensionMismatch { expected: n, got: b.n() });
    }
    let ad: Vec<FieldElement> = (0..n).map(|i| a.diag(i).clone()).collect();
    let bd = b.entries().to_vec();
    let mut checks = modulus_chain(&ad, &bd);
    let mut pairs = vec![certify_generating(&bd[0], &ad[0], &opts.certify)];
    checks.push(certify_check(String::from("(B1, A1) generating"), &pairs[0]));
    for j in 1..n {
        let p = certify_generating(&bd[j].div(&bd[0]), &ad[j].div(&ad[0]), &opts.certify);
        checks.push(certify_check(format!("(B{0}/B1, A{0}/A1) generating", j + 1), &p));
        pairs.push(p);
    }
    for j in (1..n).rev() {
        let prev = if j == 1 { String::from("(B1, A1)") } else { format!("(B{0}/B1, A{0}/A1)", j) };
        let name = format!("(B{0}/B1, A{0}/A1) prec {1}", j + 1, prev);
        checks.push(prec_check(name, &pairs[j], &pairs[j - 1], &opts.delta_cmp));
    }
    let (column, ok) = condition_ii(a, &opts.tau_zero);
    let detail = if ok {
        String::from("every entry of the first column is nonzero")
    } else {
        let zeros: Vec<String> = column
            .iter()
            .enumerate()
            .filter(|(_, x)| x.abs() <= opts.tau_zero)
            .map(|(i, _)| format!("{}", i + 1))
            .collect();
        format!("zero entries at rows {}", zeros.join(", "))
    };
    checks.push(Check { kind: CheckKind::ConditionII, name: String::from("condition (ii)"), passed: ok, detail });
    Ok(ValidationReport::new(Hypotheses::Theorem1, checks, pairs, column))
}

/// Lower-triangular `A`, diagonal `B` and a seed, with cached growth bound,
/// limit matrix and validation report.
#[derive(Clone, Debug)]
pub struct SemigroupSystem {
    a: LowerTriangular,
    b: Diagonal,
    seed: Vec<FieldElement>,
    bound: Option<BoundCertificate>,
    limit: Option<LimitMatrix>,
    validation: Option<ValidationReport>,
}

impl SemigroupSystem {
    /// Unvalidated system with seed `e_1`.
    pub fn new(a: LowerTriangular, b: Diagonal) -> Result<Self> {
        if a.n() != b.n() {
            return Err(Error::DimensionMismatch { expected: a.n(), got: b.n() });
        }
        let field = if b.field() == Field::Complex { Field::Complex } else { a.field() };
        let prec = a.precision();
        let seed = (0..a.n()).map(|i| FieldElement::real_i64(i64::from(i == 0), prec).in_field(field)).collect();
        Ok(SemigroupSystem { a, b, seed, bound: None, limit: None, validation: None })
    }

    pub fn with_seed(mut self, seed: Vec<FieldElement>) -> Result<Self> {
        if seed.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), got: seed.len() });
        }
        let field = self.field();
        self.seed = seed.into_iter().map(|x| x.in_field(field)).collect();
        Ok(self)
    }

    /// Runs Theorem 1 validation and fills the caches.
    pub fn validated(mut self, opts: &ValidationOptions) -> Result<Self> {
        let report = validate_theorem1(&self.a, &self.b, opts)?;
        self.fill_caches();
        self.validation = Some(report);
        Ok(self)
    }

    fn fill_caches(&mut self) {
        if self.a.check_spectral_order().is_ok() {
            self.bound = growth_lambda(&self.a).ok();
            self.limit = normalized_inverse_limit(&self.a).ok();
        }
    }

    pub fn n(&self) -> usize {
        self.a.n()
    }

    pub fn field(&self) -> Field {
        if self.b.field() == Field::Complex {
            Field::Complex
        } else {
            self.a.field()
        }
    }

    pub fn precision(&self) -> Precision {
        self.a.precision()
    }

    pub fn a(&self) -> &LowerTriangular {
        &self.a
    }

    pub fn b(&self) -> &Diagonal {
        &self.b
    }

    pub fn seed(&self) -> &[FieldElement] {
        &self.seed
    }

    pub fn seed_scalars(&self) -> Vec<Scalar> {
        let prec = self.precision();
        self.seed.iter().map(|x| x.to_scalar_at(prec).in_field(self.field())).collect()
    }

    pub fn bound(&self) -> Option<&BoundCertificate> {
        self.bound.as_ref()
    }

    pub fn limit(&self) -> Option<&LimitMatrix> {
        self.limit.as_ref()
    }

    pub fn validation(&self) -> Option<&ValidationReport> {
        self.validation.as_ref()
    }

    /// Accepted under Theorem 1.
    pub fn is_accepted(&self) -> bool {
        matches!(&self.validation, Some(r) if r.accepted && r.hypotheses == Hypotheses::Theorem1)
    }

    /// Copy at another precision; exact entries are re-expanded. The report
    /// is kept, caches are recomputed.
    pub fn with_precision(&self, prec: Precision) -> Self {
        let mut out = SemigroupSystem {
            a: self.a.with_precision(prec),
            b: self.b.with_precision(prec),
            seed: self.seed.iter().map(|x| x.with_precision(prec)).collect(),
            bound: None,
            limit: None,
            validation: self.validation.clone(),
        };
        out.fill_caches();
        out
    }

    /// Largest exponent for which every power `A_i^l`, `B_i^k` stays well
    /// inside the binary exponent range of the working type.
    pub fn exponent_cap(&self) -> u64 {
        let worst = (0..self.n())
            .flat_map(|i| [self.a.diag(i).log_mag().to_f64(), self.b.entry(i).log_mag().to_f64()])
            .map(|x| (x / core::f64::consts::LN_2).abs())
            .fold(1.0_f64, f64::max);
        ((1u64 << 61) as f64 / worst) as u64
    }
}

fn real_a(n: usize, prec: Precision) -> LowerTriangular {
    let rows = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        FieldElement::real_ratio(&BigRational::from_integer(BigInt::from(3).pow(i as u32 + 1)), prec)
                    } else if j == 0 {
                        FieldElement::real_i64(3, prec)
                    } else {
                        FieldElement::real_i64(0, prec)
                    }
                })
                .collect()
        })
        .collect();
    LowerTriangular::new(rows).expect("well formed")
}

/// `A_k = 3^k`, `A_{k1} = 3`; `B_1 = -1/2`, `B_k = 2^{-k^2}`.
pub fn build_real_example(n: usize, prec: Precision) -> Result<SemigroupSystem> {
    if n == 0 {
        return Err(Error::InvalidArgument(String::from("dimension must be at least 1")));
    }
    let b = (1..=n as u32)
        .map(|k| {
            if k == 1 {
                FieldElement::real_ratio(&ratio(-1, 2), prec)
            } else {
                let den = BigInt::from(1) << (k * k) as usize;
                FieldElement::real_ratio(&BigRational::new(BigInt::from(1), den), prec)
            }
        })
        .collect();
    SemigroupSystem::new(real_a(n, prec), Diagonal::new(b)?)?.validated(&ValidationOptions::for_precision(prec))
}

/// Same `A`; `B_k = (e^i / 2)^{k^2}`.
pub fn build_complex_example(n: usize, prec: Precision) -> Result<SemigroupSystem> {
    if n == 0 {
        return Err(Error::InvalidArgument(String::from("dimension must be at least 1")));
    }
    let b = (1..=n as u32)
        .map(|k| {
            let den = BigInt::from(1) << (k * k) as usize;
            FieldElement::complex_exact_radians(
                &BigRational::new(BigInt::from(1), den),
                &BigRational::from_integer(BigInt::from(k * k)),
                prec,
            )
        })
        .collect();
    let a = real_a(n, prec);
    SemigroupSystem::new(a, Diagonal::new(b)?)?.validated(&ValidationOptions::for_precision(prec))
}

/// Affine maps `x -> Ax + v` and `x -> Bx`.
#[derive(Clone, Debug)]
pub struct AffineSystem {
    a: LowerTriangular,
    v: Vec<FieldElement>,
    b: Diagonal,
    validation: Option<ValidationReport>,
}

impl AffineSystem {
    pub fn new(a: LowerTriangular, v: Vec<FieldElement>, b: Diagonal) -> Result<Self> {
        let n = a.n();
        if v.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: v.len() });
        }
        if b.n() != n {
            return Err(Error::DimensionMismatch { expected: n, got: b.n() });
        }
        Ok(AffineSystem { a, v, b, validation: None })
    }

    pub fn validated(mut self, opts: &ValidationOptions) -> Result<Self> {
        self.validation = Some(validate_theorem2(&self.a, &self.v, &self.b, opts)?);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.a.n()
    }

    pub fn field(&self) -> Field {
        if self.b.field() == Field::Complex || self.v.iter().any(|x| x.field() == Field::Complex) {
            Field::Complex
        } else {
            self.a.field()
        }
    }

    pub fn precision(&self) -> Precision {
        self.a.precision()
    }

    pub fn a(&self) -> &LowerTriangular {
        &self.a
    }

    pub fn v(&self) -> &[FieldElement] {
        &self.v
    }

    pub fn b(&self) -> &Diagonal {
        &self.b
    }

    pub fn validation(&self) -> Option<&ValidationReport> {
        self.validation.as_ref()
    }

    pub fn is_accepted(&self) -> bool {
        matches!(&self.validation, Some(r) if r.accepted)
    }

    /// `x -> Ax + v`.
    pub fn apply_a(&self, x: &[Scalar]) -> Result<Vec<Scalar>> {
        let prec = x.first().map(Scalar::precision).unwrap_or_else(|| self.precision());
        let a = if prec == self.precision() { self.a.clone() } else { self.a.with_precision(prec) };
        let ax = a.matrix().mul_vec(x)?;
        Ok(ax.iter().zip(&self.v).map(|(y, v)| y + &v.to_scalar_at(prec)).collect())
    }

    /// `x -> Bx`.
    pub fn apply_b(&self, x: &[Scalar]) -> Result<Vec<Scalar>> {
        crate::matrix::mat_pow_apply(&self.b, 1, x)
    }
}

/// 1-D affine example `x -> 3x + 1`, `x -> -x/2`.
pub fn build_affine_1d(prec: Precision) -> Result<AffineSystem> {
    let a = LowerTriangular::new(vec![vec![FieldElement::real_i64(3, prec)]])?;
    let b = Diagonal::new(vec![FieldElement::real_ratio(&ratio(-1, 2), prec)])?;
    AffineSystem::new(a, vec![FieldElement::real_i64(1, prec)], b)?.validated(&ValidationOptions::for_precision(prec))
}

/// Theorem 2 hypotheses: the modulus chain, certification of every
/// `(B_j, A_j)`, the chain `(B_n, A_n) prec ... prec (B_1, A_1)`, and
/// nonzero entries of `(A - I)^{-1} v`.
pub fn validate_theorem2(
    a: &LowerTriangular,
    v: &[FieldElement],
    b: &Diagonal,
    opts: &ValidationOptions,
) -> Result<ValidationReport> {
    let n = a.n();
    if b.n() != n || v.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: if b.n() != n { b.n() } else { v.len() } });
    }
    let prec = a.precision();
    let field = if b.field() == Field::Complex || v.iter().any(|x| x.field() == Field::Complex) {
        Field::Complex
    } else {
        a.field()
    };
    let a_minus_i = a.matrix().sub(&Matrix::identity(n, a.field(), prec));
    let inv = a_minus_i.inverse().ok_or(Error::SingularAminusI)?;
    let ad: Vec<FieldElement> = (0..n).map(|i| a.diag(i).clone()).collect();
    let bd = b.entries().to_vec();
    let mut checks = modulus_chain(&ad, &bd);
    let pairs: Vec<GeneratingPair> = (0..n).map(|j| certify_generating(&bd[j], &ad[j], &opts.certify)).collect();
    for (j, p) in pairs.iter().enumerate() {
        checks.push(certify_check(format!("(B{0}, A{0}) generating", j + 1), p));
    }
    for j in (1..n).rev() {
        let name = format!("(B{0}, A{0}) prec (B{1}, A{1})", j + 1, j);
        checks.push(prec_check(name, &pairs[j], &pairs[j - 1], &opts.delta_cmp));
    }
    let vs: Vec<Scalar> = v.iter().map(|x| x.to_scalar_at(prec).in_field(field)).collect();
    let column = inv.in_field(field).mul_vec(&vs)?;
    let zero_rows: Vec<String> = column
        .iter()
        .enumerate()
        .filter(|(_, x)| x.abs() <= opts.tau_zero)
        .map(|(i, _)| format!("{}", i + 1))
        .collect();
    let passed = zero_rows.is_empty();
    checks.push(Check {
        kind: CheckKind::TranslationVector,
        name: String::from("(A - I)^{-1} v nonzero"),
        passed,
        detail: if passed { String::from("every entry is nonzero") } else { format!("zero entries at rows {}", zero_rows.join(", ")) },
    });
    Ok(ValidationReport::new(Hypotheses::Theorem2, checks, pairs, column))
}

/// Default lift parameters: `b = B_1`, `a = A_1^2`.
pub fn default_lift_parameters(sys: &AffineSystem) -> (FieldElement, FieldElement) {
    let a1 = sys.a.diag(0);
    (a1.mul(a1), sys.b.entry(0).clone())
}

/// `A' = [[a, 0], [a v, a A]]`, `B' = diag(b, b B)`, validated under
/// Theorem 1. The seed of the returned system is `Psi(0) = e_1`.
pub fn lift_affine(
    sys: &AffineSystem,
    a: &FieldElement,
    b: &FieldElement,
    opts: &ValidationOptions,
) -> Result<SemigroupSystem> {
    let n = sys.n();
    let base = certify_generating(sys.b.entry(0), sys.a.diag(0), &opts.certify);
    let lifted = certify_generating(b, a, &opts.certify);
    let order = prec_compare(&base, &lifted, &opts.delta_cmp);
    if order.outcome != PrecOutcome::Less {
        return Err(Error::PrecViolation(format!("(B1, A1) is not prec (b, a): {}", order.reason)));
    }
    let prec = sys.precision();
    let zero = FieldElement::real_i64(0, prec);
    let mut rows = Vec::with_capacity(n + 1);
    let mut first = vec![a.clone()];
    first.extend(core::iter::repeat(zero.clone()).take(n));
    rows.push(first);
    for i in 0..n {
        let mut row = vec![a.mul(&sys.v[i])];
        row.extend((0..n).map(|j| a.mul(sys.a.entry(i, j))));
        rows.push(row);
    }
    let mut bd = vec![b.clone()];
    bd.extend(sys.b.entries().iter().map(|x| b.mul(x)));
    SemigroupSystem::new(LowerTriangular::new(rows)?, Diagonal::new(bd)?)?.validated(opts)
}

/// `Phi(y) = (y_2/y_1, ..., y_{n+1}/y_1)`.
pub fn phi(y: &[Scalar], tau_zero: &ExtReal) -> Result<Vec<Scalar>> {
    let y1 = y.first().ok_or(Error::DimensionMismatch { expected: 1, got: 0 })?;
    if y1.abs() <= *tau_zero {
        return Err(Error::ZeroFirstCoordinate);
    }
    let r = y1.recip();
    Ok(y[1..].iter().map(|x| x * &r).collect())
}

/// `Psi(x) = (1, x_1, ..., x_n)`.
pub fn psi(x: &[Scalar], field: Field, prec: Precision) -> Vec<Scalar> {
    let mut out = Vec::with_capacity(x.len() + 1);
    out.push(Scalar::one(field, prec));
    out.extend(x.iter().map(|v| v.in_field(field)));
    out
}

/// `A = [[a, 0], [b, d]]`, `B = diag(u, v)` with a report on
/// `d > a > 1 > u > v > 0`, `b > 0` and `(-v, d) prec (-u, a)`.
pub fn build_quadrant_example(
    a: &FieldElement,
    b: &FieldElement,
    d: &FieldElement,
    u: &FieldElement,
    v: &FieldElement,
    opts: &ValidationOptions,
) -> Result<(SemigroupSystem, ValidationReport)> {
    for (name, x) in [("a", a), ("b", b), ("d", d), ("u", u), ("v", v)] {
        if x.field() != Field::Real {
            return Err(Error::InvalidArgument(format!("{name} must be real")));
        }
    }
    let prec = a.precision();
    let zero = FieldElement::real_i64(0, prec);
    let one = FieldElement::real_i64(1, prec);
    let positive = |x: &FieldElement| x.sign() == Some(1) && !x.is_zero();
    let mut checks = Vec::new();
    let mut param = |name: &str, ok: bool| {
        checks.push(Check {
            kind: CheckKind::Parameters,
            name: String::from(name),
            passed: ok,
            detail: if ok { String::from("holds") } else { format!("{name} violated") },
        })
    };
    let all_pos = [a, d, u, v].iter().all(|x| positive(x));
    param("d > a", all_pos && modulus_lt(a, d));
    param("a > 1", positive(a) && modulus_lt(&one, a));
    param("1 > u", positive(u) && modulus_lt(u, &one));
    param("u > v", all_pos && modulus_lt(v, u));
    param("v > 0", positive(v));
    param("b > 0", positive(b));
    let neg = FieldElement::real_i64(-1, prec);
    let vd = certify_generating(&neg.mul(v), d, &opts.certify);
    let ua = certify_generating(&neg.mul(u), a, &opts.certify);
    checks.push(certify_check(String::from("(-v, d) generating"), &vd));
    checks.push(certify_check(String::from("(-u, a) generating"), &ua));
    checks.push(prec_check(String::from("(-v, d) prec (-u, a)"), &vd, &ua, &opts.delta_cmp));
    let report = ValidationReport::new(Hypotheses::Quadrant, checks, vec![vd, ua], Vec::new());
    let lower = LowerTriangular::new(vec![vec![a.clone(), zero], vec![b.clone(), d.clone()]])?;
    let mut sys = SemigroupSystem::new(lower, Diagonal::new(vec![u.clone(), v.clone()])?)?
        .with_seed(vec![one.clone(), one])?;
    sys.fill_caches();
    sys.validation = Some(report.clone());
    Ok((sys, report))
}

/// `(3, 1, 9, 1/2, 1/16)`.
pub fn default_quadrant(prec: Precision) -> Result<(SemigroupSystem, ValidationReport)> {
    let f = |n, d| FieldElement::real_ratio(&ratio(n, d), prec);
    build_quadrant_example(&f(3, 1), &f(1, 1), &f(9, 1), &f(1, 2), &f(1, 16), &ValidationOptions::for_precision(prec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p() -> Precision {
        Precision::default()
    }

    fn fe(n: i64, d: i64) -> FieldElement {
        FieldElement::real_ratio(&ratio(n, d), p())
    }

    fn close(x: &Scalar, y: f64) -> bool {
        (x.re().to_f64() - y).abs() < 1e-30 && x.im().to_f64().abs() < 1e-30
    }

    fn opts() -> ValidationOptions {
        ValidationOptions::for_precision(p())
    }

    fn real_with_b(n: usize, b: Vec<FieldElement>) -> ValidationReport {
        validate_theorem1(&real_a(n, p()), &Diagonal::new(b).unwrap(), &opts()).unwrap()
    }

    fn real_b(n: u32) -> Vec<FieldElement> {
        build_real_example(n as usize, p()).unwrap().b().entries().to_vec()
    }

    #[test]
    fn families_validate() {
        for n in 1..=4 {
            let r = build_real_example(n, p()).unwrap();
            assert!(r.is_accepted(), "real n={n}: {:?}", r.validation().unwrap().first_failure());
            let c = build_complex_example(n, p()).unwrap();
            assert!(c.is_accepted(), "complex n={n}: {:?}", c.validation().unwrap().first_failure());
        }
        let s = build_real_example(2, p()).unwrap();
        assert!(close(s.a().matrix().get(1, 0), 3.0) && close(s.a().matrix().get(1, 1), 9.0));
        assert!(close(&s.b().entry(1).to_scalar(), 1.0 / 16.0));
        let c = build_complex_example(2, p()).unwrap();
        assert!((c.b().entry(1).modulus().to_f64() - 1.0 / 16.0).abs() < 1e-30);
        assert!((c.b().entry(1).angle().to_f64() - 4.0).abs() < 1e-15);
        assert!((c.b().entry(0).angle().to_f64() - 1.0).abs() < 1e-15);
        assert!(build_real_example(0, p()).is_err());
    }

    #[test]
    fn tampering_is_rejected_with_the_right_reason() {
        let mut b = real_b(3);
        b[0] = fe(2, 1);
        let r = real_with_b(3, b);
        assert!(!r.accepted);
        assert_eq!(r.first_failure().unwrap().name, "|B1| < 1");

        let mut b = real_b(3);
        b.swap(1, 2);
        let r = real_with_b(3, b);
        assert_eq!(r.first_failure().unwrap().kind, CheckKind::ModulusChain);

        let mut b = real_b(3);
        b[0] = fe(1, 2);
        let r = real_with_b(3, b);
        assert_eq!(r.first_failure().unwrap().kind, CheckKind::Generating);

        let mut b = real_b(3);
        b[2] = fe(1, 32);
        let r = real_with_b(3, b);
        assert_eq!(r.first_failure().unwrap().kind, CheckKind::PrecChain);

        let a = LowerTriangular::new(vec![
            vec![fe(3, 1), fe(0, 1), fe(0, 1)],
            vec![fe(0, 1), fe(9, 1), fe(0, 1)],
            vec![fe(3, 1), fe(0, 1), fe(27, 1)],
        ])
        .unwrap();
        let r = validate_theorem1(&a, &Diagonal::new(real_b(3)).unwrap(), &opts()).unwrap();
        assert_eq!(r.first_failure().unwrap().kind, CheckKind::ConditionII);
        assert!(r.first_failure().unwrap().detail.contains('2'));
    }

    #[test]
    fn theorem2_examples() {
        let one_d = |v: i64, b: FieldElement| {
            validate_theorem2(
                &LowerTriangular::new(vec![vec![fe(3, 1)]]).unwrap(),
                &[fe(v, 1)],
                &Diagonal::new(vec![b]).unwrap(),
                &opts(),
            )
            .unwrap()
        };
        let r = one_d(1, fe(-1, 2));
        assert!(r.accepted);
        assert!(close(&r.column[0], 0.5));
        assert_eq!(one_d(0, fe(-1, 2)).first_failure().unwrap().kind, CheckKind::TranslationVector);
        assert_eq!(one_d(1, fe(1, 2)).first_failure().unwrap().kind, CheckKind::Generating);
        let singular = validate_theorem2(
            &LowerTriangular::new(vec![vec![fe(1, 1)]]).unwrap(),
            &[fe(1, 1)],
            &Diagonal::new(vec![fe(-1, 2)]).unwrap(),
            &opts(),
        );
        assert!(matches!(singular, Err(Error::SingularAminusI)));
    }

    #[test]
    fn lift_examples() {
        let sys = build_affine_1d(p()).unwrap();
        assert!(sys.is_accepted());
        let lifted = lift_affine(&sys, &fe(9, 1), &fe(-1, 2), &opts()).unwrap();
        assert!(lifted.is_accepted());
        let m = lifted.a().matrix();
        assert!(close(m.get(0, 0), 9.0) && close(m.get(1, 0), 9.0) && close(m.get(1, 1), 27.0));
        assert!(close(&lifted.b().entry(0).to_scalar(), -0.5) && close(&lifted.b().entry(1).to_scalar(), 0.25));
        let col = &lifted.validation().unwrap().column;
        assert!(close(&col[0], 1.0) && close(&col[1], -0.5));
        assert!(matches!(lift_affine(&sys, &fe(2, 1), &fe(-1, 2), &opts()), Err(Error::PrecViolation(_))));
        let (a, b) = default_lift_parameters(&sys);
        assert!(lift_affine(&sys, &a, &b, &opts()).unwrap().is_accepted());
    }

    #[test]
    fn phi_psi_examples() {
        let s = |x: f64| Scalar::from_f64(x, p());
        let y = psi(&[s(2.0), s(3.0)], Field::Real, p());
        assert!(close(&y[0], 1.0) && close(&y[1], 2.0) && close(&y[2], 3.0));
        let x = phi(&[s(2.0), s(4.0), s(6.0)], &default_tau_zero(p())).unwrap();
        assert!(close(&x[0], 2.0) && close(&x[1], 3.0));
        assert!(matches!(phi(&[s(0.0), s(1.0)], &default_tau_zero(p())), Err(Error::ZeroFirstCoordinate)));
    }

    proptest! {
        #[test]
        fn phi_inverts_psi(xs in proptest::collection::vec(-1e6f64..1e6, 1..5)) {
            let x: Vec<Scalar> = xs.iter().map(|&v| Scalar::from_f64(v, p())).collect();
            let back = phi(&psi(&x, Field::Real, p()), &default_tau_zero(p())).unwrap();
            prop_assert_eq!(back, x);
        }
    }

    #[test]
    fn quadrant_examples() {
        let (sys, r) = default_quadrant(p()).unwrap();
        assert!(r.accepted, "{:?}", r.first_failure());
        assert!(!sys.is_accepted());
        let f = |n, d| fe(n, d);
        let o = opts();
        let (_, r) = build_quadrant_example(&f(3, 1), &f(1, 1), &f(9, 1), &f(1, 16), &f(1, 2), &o).unwrap();
        assert!(!r.accepted);
        let (_, r) = build_quadrant_example(&f(3, 1), &f(0, 1), &f(9, 1), &f(1, 2), &f(1, 16), &o).unwrap();
        assert_eq!(r.first_failure().unwrap().name, "b > 0");
    }

    #[test]
    fn exponent_cap_is_sane() {
        let s = build_real_example(3, p()).unwrap();
        let cap = s.exponent_cap();
        assert!(cap > 100_000_000_000_000_000 && cap < 1_000_000_000_000_000_000);
        // the steepest powers at the cap are still representable
        let b3 = s.b().entry(2).powi(cap).to_scalar_at(p());
        assert!(b3.abs().is_positive());
        let a3 = s.a().diag(2).powi(cap).to_scalar_at(p());
        assert!(a3.abs().is_finite());
    }
}
