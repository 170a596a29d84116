//! Generating pairs: log-ratios, certification, and the `prec` order.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::contfrac::ContinuedFraction;
use crate::error::{Error, Result};
use crate::exact::{log_ratio_exact, LogRatio};
use crate::ext::{ExtReal, Precision};
use crate::field::{ExactPhase, Field, FieldElement, Phase};

/// `ln|a| / ln|b|`.
pub fn log_ratio(a: &FieldElement, b: &FieldElement) -> Result<ExtReal> {
    if a.is_zero() || b.is_zero() {
        return Err(Error::ZeroModulus);
    }
    let unit = match b.exact_modulus() {
        Some(r) => r.is_one(),
        None => b.log_mag().is_zero(),
    };
    if unit {
        return Err(Error::UnitModulusDenominator);
    }
    Ok(a.log_mag() / b.log_mag())
}

/// Verdict of [`certify_generating`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Certificate {
    CertifiedExact,
    CertifiedHeuristic,
    RefutedMagnitude,
    RefutedRationalRatio,
    RefutedSignCoverage,
    RefutedPhase,
    Unknown,
}

impl Certificate {
    pub fn is_certified(self) -> bool {
        matches!(self, Certificate::CertifiedExact | Certificate::CertifiedHeuristic)
    }

    pub fn name(self) -> &'static str {
        match self {
            Certificate::CertifiedExact => "CertifiedExact",
            Certificate::CertifiedHeuristic => "CertifiedHeuristic",
            Certificate::RefutedMagnitude => "RefutedMagnitude",
            Certificate::RefutedRationalRatio => "RefutedRationalRatio",
            Certificate::RefutedSignCoverage => "RefutedSignCoverage",
            Certificate::RefutedPhase => "RefutedPhase",
            Certificate::Unknown => "Unknown",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CertifyOptions {
    /// Continued-fraction depth of the incommensurability tests.
    pub cf_depth: usize,
    /// Number of products sampled for the empirical coverage report.
    pub samples: usize,
    /// Cells per axis of the coverage grid on the fundamental annulus.
    pub cells: usize,
    /// Below this coverage fraction the verdict degrades to `Unknown`.
    pub min_coverage: f64,
    /// Emit `CertifiedExact` when every rung was decided exactly.
    pub promote_exact: bool,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions { cf_depth: 64, samples: 4096, cells: 16, min_coverage: 0.5, promote_exact: false }
    }
}

/// Empirical coverage of the annulus `1 <= |x| < |b|` by sampled products
/// `a^m b^n`, one per `m`, with `n` chosen to land in the annulus. The
/// annulus is a fundamental domain of multiplication by `b`.
#[derive(Clone, Debug, PartialEq)]
pub struct AnnulusCoverage {
    pub samples: usize,
    pub cells_total: u64,
    pub cells_hit: u64,
}

impl AnnulusCoverage {
    pub fn fraction(&self) -> f64 {
        self.cells_hit as f64 / self.cells_total as f64
    }
}

/// A pair `(a, b)` together with its certification verdict.
#[derive(Clone, Debug)]
pub struct GeneratingPair {
    pub a: FieldElement,
    pub b: FieldElement,
    pub field: Field,
    /// `ln|a| / ln|b|`; zero when undefined.
    pub log_ratio: ExtReal,
    pub certificate: Certificate,
    pub reason: String,
    pub coverage: Option<AnnulusCoverage>,
}

impl GeneratingPair {
    pub fn is_certified(&self) -> bool {
        self.certificate.is_certified()
    }
}

fn phase_turns_f64(x: &FieldElement) -> f64 {
    x.turns_fixed() as f64 / 3.402_823_669_209_385e38
}

fn annulus_coverage(a: &FieldElement, b: &FieldElement, field: Field, opts: &CertifyOptions) -> AnnulusCoverage {
    let la = a.log_mag().to_f64();
    let lb = b.log_mag().to_f64();
    let (ta, tb) = (phase_turns_f64(a), phase_turns_f64(b));
    let sa = a.sign().unwrap_or(1);
    let sb = b.sign().unwrap_or(1);
    let k = opts.cells.max(1);
    let (cols, total) = match field {
        Field::Real => (2, 2 * k),
        Field::Complex => (k, k * k),
    };
    let mut hit = alloc::vec![false; total];
    for m in 0..opts.samples as u64 {
        let n = libm::ceil(-(m as f64) * la / lb).max(0.0);
        let t = (m as f64 * la + n * lb) / lb;
        let r = ((t.clamp(0.0, 1.0 - 1e-12)) * k as f64) as usize;
        let c = match field {
            Field::Real => {
                let neg = (sa < 0 && m % 2 == 1) ^ (sb < 0 && (n as u64) % 2 == 1);
                neg as usize
            }
            Field::Complex => {
                let turn = m as f64 * ta + n * tb;
                let f = turn - libm::floor(turn);
                ((f * k as f64) as usize).min(k - 1)
            }
        };
        hit[r * cols + c] = true;
    }
    AnnulusCoverage {
        samples: opts.samples,
        cells_total: total as u64,
        cells_hit: hit.iter().filter(|h| **h).count() as u64,
    }
}

fn cf_tolerance(prec: Precision) -> ExtReal {
    // rational structure must show up well above the rounding floor
    ExtReal::pow2(-(prec.bits() as i64) * 3 / 4, prec)
}

/// Runs the certification ladder on `(a, b)`.
pub fn certify_generating(a: &FieldElement, b: &FieldElement, opts: &CertifyOptions) -> GeneratingPair {
    let field = if a.field() == Field::Complex || b.field() == Field::Complex {
        Field::Complex
    } else {
        Field::Real
    };
    let prec = a.precision().max(b.precision());
    let (a, b) = (a.in_field(field), b.in_field(field));
    let lr = log_ratio(&a, &b).unwrap_or_else(|_| ExtReal::zero(prec));
    let done = |cert: Certificate, reason: String, coverage: Option<AnnulusCoverage>| GeneratingPair {
        a: a.clone(),
        b: b.clone(),
        field,
        log_ratio: lr.clone(),
        certificate: cert,
        reason,
        coverage,
    };

    // (1) 0 < |a| < 1 < |b|
    let magnitude_ok = match (a.exact_modulus(), b.exact_modulus()) {
        _ if a.is_zero() || b.is_zero() => false,
        (Some(ra), Some(rb)) => *ra < BigRational::one() && *rb > BigRational::one(),
        _ => a.log_mag().is_negative() && b.log_mag().is_positive(),
    };
    if !magnitude_ok {
        return done(Certificate::RefutedMagnitude, "0 < |a| < 1 < |b| violated".into(), None);
    }

    // (2) rationality of ln|a| / ln|b|
    let mut all_exact = true;
    match (a.exact_modulus(), b.exact_modulus()) {
        (Some(ra), Some(rb)) => {
            if let LogRatio::Rational(q) = log_ratio_exact(ra, rb) {
                return done(
                    Certificate::RefutedRationalRatio,
                    format!("ln|a|/ln|b| = {q} exactly; |a| and |b| are multiplicatively dependent"),
                    None,
                );
            }
        }
        _ => {
            all_exact = false;
            let cf = ContinuedFraction::expand(&lr, opts.cf_depth, &cf_tolerance(prec));
            if cf.terminated {
                let q = cf.value().unwrap_or_default();
                return done(
                    Certificate::RefutedRationalRatio,
                    format!("ln|a|/ln|b| is numerically rational ({q})"),
                    None,
                );
            }
        }
    }

    match field {
        // (3) sign coverage
        Field::Real => {
            if a.sign() == Some(1) && b.sign() == Some(1) {
                return done(
                    Certificate::RefutedSignCoverage,
                    "both generators positive; products never change sign".into(),
                    None,
                );
            }
        }
        // (4) phase lattice
        Field::Complex => {
            let exact_irrational = |x: &FieldElement| match x.exact_phase() {
                Some(ExactPhase::Radians(r)) => Some(!r.is_zero()),
                Some(ExactPhase::PiMultiple(_)) | Some(ExactPhase::Sign(_)) => Some(false),
                None => None,
            };
            match (exact_irrational(&a), exact_irrational(&b)) {
                (Some(false), Some(false)) => {
                    return done(
                        Certificate::RefutedPhase,
                        "both arguments are rational multiples of pi; finitely many rays".into(),
                        None,
                    );
                }
                (Some(true), _) | (_, Some(true)) => {}
                _ => {
                    all_exact = false;
                    let tol = cf_tolerance(prec);
                    let turns = |x: &FieldElement| match x.phase() {
                        Phase::Angle(t) => t / &ExtReal::two_pi(prec),
                        Phase::Sign(_) => ExtReal::zero(prec),
                    };
                    let ra = ContinuedFraction::expand(&turns(&a), opts.cf_depth, &tol).terminated;
                    let rb = ContinuedFraction::expand(&turns(&b), opts.cf_depth, &tol).terminated;
                    if ra && rb {
                        return done(
                            Certificate::RefutedPhase,
                            "both arguments numerically commensurate with 2pi".into(),
                            None,
                        );
                    }
                }
            }
        }
    }

    // (5) heuristic acceptance, backed by the empirical report
    let cov = annulus_coverage(&a, &b, field, opts);
    if cov.fraction() < opts.min_coverage {
        let reason = format!("sampled annulus coverage {:.3} below {}", cov.fraction(), opts.min_coverage);
        return done(Certificate::Unknown, reason, Some(cov));
    }
    let (cert, reason) = if opts.promote_exact && all_exact {
        (Certificate::CertifiedExact, "every rung decided exactly")
    } else {
        (Certificate::CertifiedHeuristic, "passes the exact refutations and the incommensurability tests")
    };
    done(cert, reason.into(), Some(cov))
}

/// Outcome of comparing two pairs under `prec`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PrecOutcome {
    Less,
    NotLess,
    Incomparable,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrecOrder {
    pub outcome: PrecOutcome,
    pub reason: String,
}

/// Default strictness margin at 128 digits.
pub fn default_delta_cmp(prec: Precision) -> ExtReal {
    ExtReal::parse("1e-30", prec).expect("literal")
}

/// `p prec q`: both certified and `log_ratio(p) < log_ratio(q) - delta`.
pub fn prec_compare(p: &GeneratingPair, q: &GeneratingPair, delta: &ExtReal) -> PrecOrder {
    if !p.is_certified() || !q.is_certified() {
        return PrecOrder {
            outcome: PrecOutcome::Incomparable,
            reason: format!(
                "not both certified ({} vs {})",
                p.certificate.name(),
                q.certificate.name()
            ),
        };
    }
    let (x, y) = (&p.log_ratio, &q.log_ratio);
    if *x < y - delta {
        PrecOrder { outcome: PrecOutcome::Less, reason: format!("{} < {}", x.to_string_digits(12), y.to_string_digits(12)) }
    } else {
        PrecOrder {
            outcome: PrecOutcome::NotLess,
            reason: format!("{} is not below {} by the margin", x.to_string_digits(12), y.to_string_digits(12)),
        }
    }
}

/// Lemma 1's linear bound: for `(m, n)` with `m ln|c| + n ln|d| < ln M`,
/// `m ln|a| + n ln|b| <= m ln|b| (r1 - r2) + ln M ln|b| / ln|d|`, where
/// `r1 = ln|a|/ln|b|`, `r2 = ln|c|/ln|d|`. Returns the right-hand side.
pub fn cone_bound(ab: &GeneratingPair, cd: &GeneratingPair, m: u64, ln_big_m: &ExtReal) -> ExtReal {
    let prec = ab.log_ratio.precision();
    let lb = ab.b.log_mag();
    let ld = cd.b.log_mag();
    let slope = lb * &(&ab.log_ratio - &cd.log_ratio);
    &(&ExtReal::from_u64(m, prec) * &slope) + &(&(ln_big_m * lb) / ld)
}

/// All exponent pairs with `m, n <= depth` inside the cone `|c^m d^n| < M`.
pub fn cone_points(cd: &GeneratingPair, depth: u64, ln_big_m: &ExtReal) -> Vec<(u64, u64)> {
    let prec = cd.log_ratio.precision();
    let (lc, ld) = (cd.a.log_mag(), cd.b.log_mag());
    let mut out = Vec::new();
    for m in 0..=depth {
        // n < (ln M - m ln|c|) / ln|d|
        let lim = &(ln_big_m - &(&ExtReal::from_u64(m, prec) * lc)) / ld;
        let top = lim.floor_i128().unwrap_or(i128::MAX).min(depth as i128);
        for n in 0..=top.max(-1) {
            let n = n as u64;
            let v = &(&ExtReal::from_u64(m, prec) * lc) + &(&ExtReal::from_u64(n, prec) * ld);
            if v < *ln_big_m {
                out.push((m, n));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    fn p() -> Precision {
        Precision::default()
    }

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn real(n: i64, d: i64) -> FieldElement {
        FieldElement::real_ratio(&q(n, d), p())
    }

    fn certify(a: FieldElement, b: FieldElement) -> GeneratingPair {
        certify_generating(&a, &b, &CertifyOptions::default())
    }

    fn ln_oracle(x: f64) -> ExtReal {
        // independent route: ln via atanh series at 128 digits is overkill;
        // compare against f64 logs with a loose bound instead
        ExtReal::from_f64(libm::log(x), p())
    }

    #[test]
    fn log_ratio_examples() {
        let r = log_ratio(&real(1, 2), &real(2, 1)).unwrap();
        assert!((&r + &ExtReal::one(p())).abs() < p().ulp());
        let r = log_ratio(&real(-1, 2), &real(3, 1)).unwrap();
        assert_eq!(r.to_string_digits(11), "-6.3092975357e-1");
        let oracle = &ln_oracle(0.5) / &ln_oracle(3.0);
        assert!((&r - &oracle).abs().to_f64() < 1e-15);
        let r = log_ratio(&real(1, 16).div(&real(-1, 2)), &real(9, 1).div(&real(3, 1))).unwrap();
        assert!((r.to_f64() + 3.0 * 2f64.ln() / 3f64.ln()).abs() < 1e-15);
        assert_eq!(r.to_string_digits(6), "-1.89279");
        assert_eq!(log_ratio(&real(0, 1), &real(3, 1)).unwrap_err(), Error::ZeroModulus);
        assert_eq!(log_ratio(&real(1, 2), &real(-1, 1)).unwrap_err(), Error::UnitModulusDenominator);
    }

    #[test]
    fn ladder_examples() {
        assert_eq!(certify(real(1, 2), real(2, 1)).certificate, Certificate::RefutedRationalRatio);
        assert_eq!(certify(real(1, 2), real(3, 1)).certificate, Certificate::RefutedSignCoverage);
        assert_eq!(certify(real(-1, 2), real(3, 1)).certificate, Certificate::CertifiedHeuristic);
        assert_eq!(certify(real(2, 1), real(3, 1)).certificate, Certificate::RefutedMagnitude);
        assert_eq!(certify(real(-1, 2), real(1, 1)).certificate, Certificate::RefutedMagnitude);
        let e = FieldElement::complex_exact_radians(&q(1, 2), &q(1, 1), p());
        let pair = certify(e, real(3, 1));
        assert_eq!(pair.certificate, Certificate::CertifiedHeuristic);
        assert_eq!(pair.field, Field::Complex);
        let i = FieldElement::complex_exact_pi(&q(1, 2), &q(1, 2), p());
        assert_eq!(certify(i, real(3, 1)).certificate, Certificate::RefutedPhase);
        let opts = CertifyOptions { promote_exact: true, ..Default::default() };
        let pair = certify_generating(&real(-1, 2), &real(3, 1), &opts);
        assert_eq!(pair.certificate, Certificate::CertifiedExact);
    }

    #[test]
    fn inexact_inputs_use_numeric_tests() {
        let a = FieldElement::from_scalar(&crate::field::Scalar::from_f64(-0.5, p()));
        let b = FieldElement::from_scalar(&crate::field::Scalar::from_f64(4.0, p()));
        assert_eq!(certify(a.clone(), b).certificate, Certificate::RefutedRationalRatio);
        let b = FieldElement::from_scalar(&crate::field::Scalar::from_f64(3.0, p()));
        assert_eq!(certify(a, b).certificate, Certificate::CertifiedHeuristic);
    }

    #[test]
    fn prec_examples() {
        let d = default_delta_cmp(p());
        let pq = certify(real(-1, 8), real(3, 1));
        let qq = certify(real(-1, 2), real(3, 1));
        assert_eq!(prec_compare(&pq, &qq, &d).outcome, PrecOutcome::Less);
        assert_eq!(prec_compare(&qq, &pq, &d).outcome, PrecOutcome::NotLess);
        assert_eq!(prec_compare(&qq, &qq, &d).outcome, PrecOutcome::NotLess);
        let mut unknown = qq.clone();
        unknown.certificate = Certificate::Unknown;
        assert_eq!(prec_compare(&pq, &unknown, &d).outcome, PrecOutcome::Incomparable);
    }

    #[test]
    fn prec_is_a_strict_partial_order() {
        let d = default_delta_cmp(p());
        let pairs: Vec<GeneratingPair> = [(1, 2), (1, 4), (1, 8), (3, 4), (1, 3), (2, 5)]
            .iter()
            .flat_map(|&(n, dd)| [(2, 1), (3, 1), (7, 2)].map(|(bn, bd)| certify(real(-n, dd), real(bn, bd))))
            .filter(|p| p.is_certified())
            .collect();
        assert!(pairs.len() > 10);
        let less = |x: &GeneratingPair, y: &GeneratingPair| prec_compare(x, y, &d).outcome == PrecOutcome::Less;
        for x in &pairs {
            assert!(!less(x, x));
            for y in &pairs {
                assert!(!(less(x, y) && less(y, x)));
                for z in &pairs {
                    if less(x, y) && less(y, z) {
                        assert!(less(x, z));
                    }
                }
            }
        }
    }

    #[test]
    fn cone_bound_holds() {
        let ab = certify(real(-1, 8), real(9, 1));
        let cd = certify(real(-1, 2), real(3, 1));
        let ln_m = ExtReal::from_i64(1000, p()).ln();
        let pts = cone_points(&cd, 200, &ln_m);
        assert!(!pts.is_empty());
        for (m, n) in pts {
            let lhs = &(&ExtReal::from_u64(m, p()) * ab.a.log_mag()) + &(&ExtReal::from_u64(n, p()) * ab.b.log_mag());
            assert!(lhs <= cone_bound(&ab, &cd, m, &ln_m));
        }
    }
}
