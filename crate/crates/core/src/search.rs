//! Scalar steering: find `(m, n)` with `|a^m b^n - t| < eps`.
//!
//! Writing `theta = -ln|a| / ln|b| > 0`, the admissible `n` for a given `m`
//! form the interval `[L + m theta, L + m theta + w]` with `w` proportional to
//! `eps / |t|`. An integer lies in it iff `frac(c + m alpha) <= w` for
//! `alpha = frac(-theta)`, so the admissible `m` are the visits of a circle
//! rotation to the arc `[0, w]`. Consecutive visits are separated by one of
//! at most three gaps, which are read off the one-sided best approximations
//! of `alpha`; this lets the search jump between visits instead of
//! scanning every `m`. The rotation runs on `Z / 2^128` so the stepping is
//! exact; every candidate is re-checked in extended precision.
//!
//! Sign constraints (real field) are handled by splitting `m` and `n` into
//! residue classes mod 2. Phase constraints (complex field) are filtered
//! per candidate.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::ext::{ExtReal, Precision};
use crate::field::{Field, FieldElement, Scalar};
use crate::scalar::GeneratingPair;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Strategy {
    /// Jump between rotation visits (three-gap stepping).
    Convergent,
    /// Try every `m` in turn.
    Scan,
}

/// Limits of one scalar search.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SearchBudget {
    pub max_m: u64,
    pub max_n: u64,
    /// Cap on rotation steps plus candidate evaluations.
    pub max_nodes: u64,
    pub strategy: Strategy,
    /// Smallest admissible `m`.
    pub m_min: u64,
    /// Smallest admissible `n`.
    pub n_min: u64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            max_m: 1_000_000_000_000_000_000,
            max_n: 1_000_000_000_000_000_000,
            max_nodes: 2_000_000,
            strategy: Strategy::Convergent,
            m_min: 0,
            n_min: 0,
        }
    }
}

impl SearchBudget {
    /// Both exponents capped at `max`.
    pub fn exponents(max: u64) -> Self {
        SearchBudget { max_m: max, max_n: max, ..Default::default() }
    }

    pub fn with_strategy(mut self, strategy: Strategy) -> Self {
        self.strategy = strategy;
        self
    }

    pub fn with_floors(mut self, m_min: u64, n_min: u64) -> Self {
        self.m_min = m_min;
        self.n_min = n_min;
        self
    }
}

/// A solution of the scalar problem.
#[derive(Clone, Debug)]
pub struct ScalarHit {
    pub m: u64,
    pub n: u64,
    /// `a^m b^n` at working precision.
    pub value: Scalar,
    /// `|a^m b^n - t|`.
    pub error: ExtReal,
    /// Rotation steps plus candidate evaluations spent.
    pub nodes: u64,
}

struct Counter {
    used: u64,
    cap: u64,
}

impl Counter {
    fn tick(&mut self) -> bool {
        self.used += 1;
        self.used <= self.cap
    }
}

/// Rotation `m -> c + m alpha` on `Z / 2^128`.
#[derive(Clone, Copy, Debug)]
struct Rotation {
    c: u128,
    alpha: u128,
}

impl Rotation {
    fn at(&self, m: u64) -> u128 {
        self.c.wrapping_add((m as u128).wrapping_mul(self.alpha))
    }
}

/// Return gaps of the arc `[0, w]`: `g1` is the least `g` with
/// `frac(g alpha) <= w` (step `+d1`), `g2` the least with
/// `frac(g alpha) >= 1 - w` (step `-d2`).
#[derive(Clone, Copy, Debug, PartialEq)]
struct Gaps {
    w: u128,
    g1: Option<(u128, u128)>,
    g2: Option<(u128, u128)>,
}

fn gaps(alpha: u128, w: u128) -> Gaps {
    if alpha == 0 {
        return Gaps { w, g1: Some((1, 0)), g2: None };
    }
    // lower and upper one-sided approximations, Stern-Brocot style
    let (mut ql, mut dl) = (1u128, alpha);
    let (mut qu, mut du) = (1u128, alpha.wrapping_neg());
    let mut g1 = (dl <= w).then_some((ql, dl));
    let mut g2 = (du <= w).then_some((qu, du));
    while g1.is_none() || g2.is_none() {
        if dl == 0 || du == 0 {
            break;
        }
        if dl == du {
            // alpha is exactly rational: frac(q alpha) = 0 at the mediant
            if let Some(q) = ql.checked_add(qu) {
                g1.get_or_insert((q, 0));
            }
            break;
        }
        if dl > du {
            let j = (dl - 1) / du;
            if g1.is_none() && dl - j * du <= w {
                let js = if dl <= w { 0 } else { (dl - w).div_ceil(du) };
                if let Some(q) = qu.checked_mul(js).and_then(|x| x.checked_add(ql)) {
                    g1 = Some((q, dl - js * du));
                }
            }
            match qu.checked_mul(j).and_then(|x| x.checked_add(ql)) {
                Some(q) => ql = q,
                None => break,
            }
            dl -= j * du;
        } else {
            let j = (du - 1) / dl;
            if g2.is_none() && du - j * dl <= w {
                let js = if du <= w { 0 } else { (du - w).div_ceil(dl) };
                if let Some(q) = ql.checked_mul(js).and_then(|x| x.checked_add(qu)) {
                    g2 = Some((q, du - js * dl));
                }
            }
            match ql.checked_mul(j).and_then(|x| x.checked_add(qu)) {
                Some(q) => qu = q,
                None => break,
            }
            du -= j * dl;
        }
    }
    Gaps { w, g1, g2 }
}

/// Next visit strictly after `pos`, which must itself be a visit.
fn next_visit(rot: &Rotation, g: &Gaps, pos: u64, ctr: &mut Counter) -> Option<u64> {
    if g.w == u128::MAX {
        return pos.checked_add(1);
    }
    let x = rot.at(pos);
    let mut best: Option<u128> = None;
    let mut consider = |gap: u128| {
        if best.is_none_or(|b| gap < b) {
            best = Some(gap);
        }
    };
    if let Some((g1, d1)) = g.g1 {
        if x.checked_add(d1).is_some_and(|y| y <= g.w) {
            consider(g1);
        }
    }
    if let Some((g2, d2)) = g.g2 {
        if x >= d2 {
            consider(g2);
        }
    }
    if let (Some((g1, d1)), Some((g2, d2))) = (g.g1, g.g2) {
        if x.wrapping_add(d1).wrapping_sub(d2) <= g.w {
            consider(g1 + g2);
        }
    }
    if let Some(gap) = best {
        return u64::try_from(gap).ok().and_then(|gap| pos.checked_add(gap));
    }
    // Not reachable for a genuine rotation; kept as a bounded safety net.
    let mut m = pos;
    for _ in 0..1u32 << 20 {
        m = m.checked_add(1)?;
        if !ctr.tick() {
            return None;
        }
        if rot.at(m) <= g.w {
            return Some(m);
        }
    }
    None
}

/// First visit to `[0, w]` at or after `start`, found by descending through
/// nested arcs `[0, 2^{128 - 4i}]`: every visit of a smaller arc is a visit
/// of the larger one, so walking the larger arc's visits in order finds the
/// first visit of the smaller.
fn first_visit(rot: &Rotation, w: u128, start: u64, limit: u64, ctr: &mut Counter) -> (Option<u64>, Gaps) {
    let mut pos = start;
    let mut prev = Gaps { w: u128::MAX, g1: None, g2: None };
    let mut level = u128::MAX;
    loop {
        level = if level >> 4 <= w { w } else { level >> 4 };
        while rot.at(pos) > level {
            pos = match next_visit(rot, &prev, pos, ctr) {
                Some(p) if p <= limit => p,
                _ => return (None, prev),
            };
            if !ctr.tick() {
                return (None, prev);
            }
        }
        prev = gaps(rot.alpha, level);
        if level == w {
            return (Some(pos), prev);
        }
    }
}

fn ceil_i128(x: &ExtReal) -> Option<i128> {
    (-x).floor_i128().map(|f| -f)
}

/// One residue class `m = dm m' + rho`, `n = dn n' + sigma`, with the
/// admissible `n'` for `m'` in `[lo + m' step, hi + m' step]`.
struct Class {
    dm: u64,
    rho: u64,
    dn: u64,
    sigma: u64,
    lo: Option<ExtReal>,
    hi: ExtReal,
    step: ExtReal,
}

impl Class {
    fn bounds(&self, mq: u64) -> (Option<ExtReal>, ExtReal) {
        let prec = self.hi.precision();
        let s = &ExtReal::from_u64(mq, prec) * &self.step;
        (self.lo.as_ref().map(|l| l + &s), &self.hi + &s)
    }
}

struct Problem<'a> {
    a: &'a FieldElement,
    b: &'a FieldElement,
    target: Scalar,
    eps: ExtReal,
    /// Target argument and admissible half-width, in turns scaled to `2^128`.
    phase: Option<(u128, u128)>,
    prec: Precision,
}

impl Problem<'_> {
    fn value(&self, m: u64, n: u64) -> Scalar {
        self.a.powi(m).mul(&self.b.powi(n)).to_scalar_at(self.prec)
    }

    fn check(&self, m: u64, n: u64) -> Option<(Scalar, ExtReal)> {
        if let Some((t, hw)) = self.phase {
            let turn = (m as u128)
                .wrapping_mul(self.a.turns_fixed())
                .wrapping_add((n as u128).wrapping_mul(self.b.turns_fixed()));
            let off = turn.wrapping_sub(t) as i128;
            if off.unsigned_abs() > hw {
                return None;
            }
        }
        let v = self.value(m, n);
        let err = (&v - &self.target).abs();
        (err < self.eps).then_some((v, err))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Key {
    sum: u128,
    m: u64,
}

/// Steers `a^m b^n` to within `eps` of `target`, minimizing `m + n` (ties by
/// smaller `m`) among solutions inside the budget.
pub fn steer_scalar(pair: &GeneratingPair, target: &FieldElement, eps: &ExtReal, budget: &SearchBudget) -> Result<ScalarHit> {
    if !pair.is_certified() {
        return Err(Error::InvalidArgument(format!("pair is {}", pair.certificate.name())));
    }
    if target.is_zero() {
        return Err(Error::InvalidArgument("zero target".into()));
    }
    if !eps.is_positive() {
        return Err(Error::InvalidArgument("eps must be positive".into()));
    }
    let prec = pair.a.precision().max(target.precision()).max(eps.precision());
    let field = pair.field;
    let target = target.in_field(field);
    let t = target.to_scalar_at(prec);
    let eps = eps.with_precision(prec);
    let (a, b) = (pair.a.with_precision(prec), pair.b.with_precision(prec));
    let la = a.log_mag().clone();
    let lb = b.log_mag().clone();
    let theta = &(-&la) / &lb;
    let margin = ExtReal::pow2(-(prec.bits() as i64) / 2, prec);
    let zero = ExtReal::zero(prec);

    // (sign, ln lower, ln upper) of |a^m b^n|
    let mut windows: Vec<(i8, Option<ExtReal>, ExtReal)> = Vec::new();
    let log_window = |upper: ExtReal, lower: ExtReal| {
        let lo = lower.is_positive().then(|| &lower.ln() - &margin);
        (lo, &upper.ln() + &margin)
    };
    let mut phase = None;
    match field {
        Field::Real => {
            let tv = t.re();
            for s in [1i8, -1] {
                let st = if s > 0 { tv.clone() } else { -&tv };
                let upper = &st + &eps;
                if upper.is_positive() {
                    let lower = (&st - &eps).max(zero.clone());
                    let (lo, hi) = log_window(upper, lower);
                    windows.push((s, lo, hi));
                }
            }
        }
        Field::Complex => {
            let r = target.modulus();
            let (lo, hi) = log_window(&r + &eps, &r - &eps);
            if r > eps {
                // |arg x - arg t| <= asin(eps / r)
                let x = &eps / &r;
                let asin = (&x / &(&ExtReal::one(prec) - &(&x * &x)).sqrt()).atan();
                let turns = &asin / &ExtReal::two_pi(prec);
                let hw = turns.to_fixed().map(|(_, f)| f).unwrap_or(u128::MAX >> 1);
                phase = Some((target.turns_fixed(), hw.saturating_add(1 << 40)));
            }
            windows.push((0, lo, hi));
        }
    }

    let problem = Problem { a: &a, b: &b, target: t, eps: eps.clone(), phase, prec };
    let sa = a.sign().unwrap_or(1);
    let sb = b.sign().unwrap_or(1);
    let mut classes = Vec::new();
    for (s, lo, hi) in &windows {
        let (dm, dn) = match field {
            Field::Real => (if sa < 0 { 2 } else { 1 }, if sb < 0 { 2 } else { 1 }),
            Field::Complex => (1, 1),
        };
        for rho in 0..dm {
            for sigma in 0..dn {
                if field == Field::Real {
                    let sign = if (sa < 0 && rho == 1) ^ (sb < 0 && sigma == 1) { -1 } else { 1 };
                    if sign != *s {
                        continue;
                    }
                }
                let shift = &(&theta * &ExtReal::from_u64(rho, prec)) - &ExtReal::from_u64(sigma, prec);
                let dnx = ExtReal::from_u64(dn, prec);
                let to_n = |l: &ExtReal| &(&(l / &lb) + &shift) / &dnx;
                classes.push(Class {
                    dm,
                    rho,
                    dn,
                    sigma,
                    lo: lo.as_ref().map(to_n),
                    hi: to_n(hi),
                    step: &(&theta * &ExtReal::from_u64(dm, prec)) / &dnx,
                });
            }
        }
    }

    let mut ctr = Counter { used: 0, cap: budget.max_nodes };
    let mut best: Option<(Key, ScalarHit)> = None;
    let mut exhausted = false;
    for class in &classes {
        if !search_class(class, &problem, budget, &mut ctr, &mut best) {
            exhausted = true;
            break;
        }
    }
    match best {
        Some((_, mut hit)) => {
            hit.nodes = ctr.used.min(ctr.cap);
            Ok(hit)
        }
        None => Err(Error::NotFound(format!(
            "no (m, n) with m <= {}, n <= {} within {} of the target{}",
            budget.max_m,
            budget.max_n,
            eps.to_string_digits(6),
            if exhausted { "; node budget exhausted" } else { "" }
        ))),
    }
}

/// Searches one residue class, updating `best`. Returns false when the node
/// budget ran out.
fn search_class(
    class: &Class,
    p: &Problem<'_>,
    budget: &SearchBudget,
    ctr: &mut Counter,
    best: &mut Option<(Key, ScalarHit)>,
) -> bool {
    let prec = p.prec;
    if budget.max_m < class.rho || budget.max_n < class.sigma {
        return true;
    }
    let mq_min = budget.m_min.saturating_sub(class.rho).div_ceil(class.dm);
    let mq_max = (budget.max_m - class.rho) / class.dm;
    let nq_min = budget.n_min.saturating_sub(class.sigma).div_ceil(class.dn);
    let nq_max = (budget.max_n - class.sigma) / class.dn;

    // skip m' whose whole window lies below n'_min
    let start = {
        let need = &(&ExtReal::from_u64(nq_min, prec) - &class.hi) / &class.step;
        match ceil_i128(&need) {
            Some(v) if v > mq_min as i128 => u64::try_from(v).unwrap_or(u64::MAX),
            Some(_) => mq_min,
            None => return true,
        }
    };
    if start > mq_max {
        return true;
    }

    let width = class.lo.as_ref().map(|lo| &class.hi - lo);
    let walk = budget.strategy == Strategy::Convergent
        && width.as_ref().is_some_and(|w| w.to_f64() < 0.5);
    let rot_gaps = if walk {
        let lo = class.lo.as_ref().expect("finite window");
        let Some((_, cf)) = (-lo).to_fixed() else { return true };
        let Some((_, sf)) = (-&class.step).to_fixed() else { return true };
        let rot = Rotation { c: cf, alpha: sf };
        let w = width.as_ref().and_then(|w| w.to_fixed()).map(|(_, f)| f).unwrap_or(0);
        Some((rot, w.saturating_add(1 << 28)))
    } else {
        None
    };

    let mut mq = start;
    let mut fine_gaps = None;
    if let Some((rot, w)) = &rot_gaps {
        let (first, g) = first_visit(rot, *w, mq, mq_max, ctr);
        match first {
            Some(v) => mq = v,
            None => return ctr.used <= ctr.cap,
        }
        fine_gaps = Some(g);
    }

    loop {
        if mq > mq_max {
            return true;
        }
        let m = class.dm * mq + class.rho;
        let (lo, hi) = class.bounds(mq);
        let nq_lo = match &lo {
            Some(l) => match ceil_i128(l) {
                Some(v) => v.max(nq_min as i128),
                None => return true,
            },
            None => nq_min as i128,
        };
        if nq_lo > nq_max as i128 {
            return true;
        }
        let n_lo = class.dn as u128 * nq_lo as u128 + class.sigma as u128;
        let key = Key { sum: m as u128 + n_lo, m };
        if best.as_ref().is_some_and(|(k, _)| key >= *k) {
            return true;
        }
        let nq_hi = hi.floor_i128().unwrap_or(i128::MAX).min(nq_max as i128);
        let mut nq = nq_lo;
        let mut found = false;
        while nq <= nq_hi {
            if !ctr.tick() {
                return false;
            }
            let n = class.dn * nq as u64 + class.sigma;
            if let Some((value, error)) = p.check(m, n) {
                let key = Key { sum: m as u128 + n as u128, m };
                if best.as_ref().is_none_or(|(k, _)| key < *k) {
                    *best = Some((key, ScalarHit { m, n, value, error, nodes: 0 }));
                }
                // larger n' only increases m + n
                found = true;
                break;
            }
            nq += 1;
        }
        if found {
            // later m' cannot beat a hit at this m' within the class
            return true;
        }
        mq = match (&rot_gaps, &fine_gaps) {
            (Some((rot, _)), Some(g)) => match next_visit(rot, g, mq, ctr) {
                Some(v) => v,
                None => return ctr.used <= ctr.cap,
            },
            _ => mq + 1,
        };
        if !ctr.tick() {
            return false;
        }
    }
}
