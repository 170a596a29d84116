//! Continued fractions of extended-precision reals.

use alloc::vec::Vec;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::ext::ExtReal;

/// Partial quotients `[a0; a1, a2, ...]` of a real number.
#[derive(Clone, Debug, PartialEq)]
pub struct ContinuedFraction {
    pub terms: Vec<BigInt>,
    /// The expansion stopped because a remainder fell below the tolerance,
    /// i.e. the input is numerically a rational number.
    pub terminated: bool,
}

impl ContinuedFraction {
    /// Expands `x` to at most `depth` terms. A remainder `<= tol` ends the
    /// expansion early and marks it terminated.
    pub fn expand(x: &ExtReal, depth: usize, tol: &ExtReal) -> Self {
        let mut terms = Vec::new();
        let mut x = x.clone();
        for _ in 0..depth {
            let a = x.floor();
            let r = &x - &a;
            terms.push(a.to_ratio().map(|q| q.to_integer()).unwrap_or_else(BigInt::zero));
            if r <= *tol {
                return ContinuedFraction { terms, terminated: true };
            }
            x = r.recip();
        }
        ContinuedFraction { terms, terminated: false }
    }

    /// Successive convergents `p_k / q_k`.
    pub fn convergents(&self) -> Vec<BigRational> {
        let (mut p0, mut q0) = (BigInt::one(), BigInt::zero());
        let (mut p1, mut q1) = (BigInt::zero(), BigInt::one());
        let mut out = Vec::with_capacity(self.terms.len());
        for a in &self.terms {
            let p = a * &p0 + &p1;
            let q = a * &q0 + &q1;
            out.push(BigRational::new(p.clone(), q.clone()));
            p1 = core::mem::replace(&mut p0, p);
            q1 = core::mem::replace(&mut q0, q);
        }
        out
    }

    /// The value of the truncated expansion.
    pub fn value(&self) -> Option<BigRational> {
        self.convergents().pop()
    }
}

/// True when `x` shows no rational structure within `depth` partial quotients.
pub fn incommensurable(x: &ExtReal, depth: usize, tol: &ExtReal) -> bool {
    !ContinuedFraction::expand(x, depth, tol).terminated
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ext::Precision;

    fn p() -> Precision {
        Precision::default()
    }

    #[test]
    fn golden_ratio_is_all_ones() {
        let phi = &(&ExtReal::one(p()) + &ExtReal::from_i64(5, p()).sqrt()) / &ExtReal::from_i64(2, p());
        let cf = ContinuedFraction::expand(&phi, 64, &ExtReal::pow2(-300, p()));
        assert!(!cf.terminated);
        assert!(cf.terms.iter().all(|t| *t == BigInt::one()));
        let c = cf.convergents();
        assert_eq!(c[5], BigRational::new(13.into(), 8.into()));
    }

    #[test]
    fn rationals_terminate() {
        let x = ExtReal::parse("355/113", p()).unwrap();
        let cf = ContinuedFraction::expand(&x, 64, &ExtReal::pow2(-300, p()));
        assert!(cf.terminated);
        assert_eq!(cf.value().unwrap(), BigRational::new(355.into(), 113.into()));
    }

    #[test]
    fn pi_quotients() {
        let cf = ContinuedFraction::expand(&ExtReal::pi(p()), 64, &ExtReal::pow2(-300, p()));
        let head: Vec<i64> = cf.terms.iter().take(5).map(|t| i64::try_from(t).unwrap()).collect();
        assert_eq!(head, [3, 7, 15, 1, 292]);
        let one_rad_turns = &ExtReal::one(p()) / &ExtReal::two_pi(p());
        assert!(incommensurable(&one_rad_turns, 64, &ExtReal::pow2(-300, p())));
    }
}
