//! Exact multiplicative dependence of positive rationals.
//!
//! Pairwise coprime integers greater than one are multiplicatively
//! independent, so after refining the numerators and denominators into a
//! coprime base, `ln a / ln b` is rational iff the exponent vectors of `a`
//! and `b` over that base are parallel. No factorization is needed.

use alloc::vec;
use alloc::vec::Vec;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Refines `nums` into a pairwise coprime set such that every input is a
/// product of powers of its elements. Ones and zeros are ignored.
pub fn coprime_base(nums: &[BigUint]) -> Vec<BigUint> {
    let mut base: Vec<BigUint> = nums.iter().filter(|x| **x > BigUint::one()).cloned().collect();
    'outer: loop {
        for i in 0..base.len() {
            for j in i + 1..base.len() {
                let g = base[i].gcd(&base[j]);
                if g.is_one() {
                    continue;
                }
                let (x, y) = (base[i].clone(), base[j].clone());
                base.swap_remove(j);
                base.swap_remove(i);
                if x == y {
                    base.push(x);
                } else {
                    for v in [&x / &g, &y / &g, g] {
                        if v > BigUint::one() {
                            base.push(v);
                        }
                    }
                }
                continue 'outer;
            }
        }
        break;
    }
    base.sort();
    base.dedup();
    base
}

/// Exponents of `x` over a coprime base; `None` if `x` has a prime factor
/// outside the base.
pub fn factor_over(x: &BigUint, base: &[BigUint]) -> Option<Vec<u64>> {
    let mut x = x.clone();
    let mut out = vec![0u64; base.len()];
    for (e, c) in out.iter_mut().zip(base) {
        loop {
            let (q, r) = x.div_rem(c);
            if !r.is_zero() {
                break;
            }
            x = q;
            *e += 1;
        }
    }
    x.is_one().then_some(out)
}

/// Outcome of the exact rationality test.
#[derive(Clone, Debug, PartialEq)]
pub enum LogRatio {
    Rational(BigRational),
    Irrational,
}

/// Decides whether `ln|a| / ln|b|` is rational. Requires `a, b` nonzero and
/// `|b| != 1`.
pub fn log_ratio_exact(a: &BigRational, b: &BigRational) -> LogRatio {
    let parts = |r: &BigRational| (r.numer().abs().to_biguint().unwrap(), r.denom().abs().to_biguint().unwrap());
    let (an, ad) = parts(a);
    let (bn, bd) = parts(b);
    let base = coprime_base(&[an.clone(), ad.clone(), bn.clone(), bd.clone()]);
    let vec_of = |n: &BigUint, d: &BigUint| -> Vec<BigInt> {
        let en = factor_over(n, &base).expect("numerator splits over its own base");
        let ed = factor_over(d, &base).expect("denominator splits over its own base");
        en.iter().zip(&ed).map(|(x, y)| BigInt::from(*x) - BigInt::from(*y)).collect()
    };
    let e = vec_of(&an, &ad);
    let f = vec_of(&bn, &bd);
    let Some(piv) = f.iter().position(|v| !v.is_zero()) else {
        panic!("|b| = 1 has no log-ratio");
    };
    let ratio = BigRational::new(e[piv].clone(), f[piv].clone());
    let parallel = (0..e.len()).all(|i| &e[i] * &f[piv] == &e[piv] * &f[i]);
    if parallel {
        LogRatio::Rational(ratio)
    } else {
        LogRatio::Irrational
    }
}
