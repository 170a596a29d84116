//! Orbit steering: words `B^{k_1} A^{l_1} ... B^{k_m} A^{l_m}` that carry the
//! seed to within `eps` of a target.
//!
//! The word is built backwards, one coordinate per stage. Stage `s` takes a
//! target `z` in `K^{s+1}` and picks `(k, l)` with `O^{k,l} ~ alpha E`, where
//! `alpha = z_{s+1} / z_1`; this reduces to the scalar problem
//! `(B_{s+1}/B_1)^k (A_{s+1}/A_1)^l ~ -alpha / omega`. The stage then hands
//! `S^{-l} U^{-k} (z_1, ..., z_s)` to the stage below. The base stage steers
//! the first coordinate of the seed with `(B_1, A_1)`.
//!
//! Errors of stage `s` reach the output through `P_s`, the product of the
//! stage matrices `B^k A^l` applied after it, so every stage tolerance is
//! measured as `||P_s e||_inf` for the stage error `e`. The top stage gets
//! most of `eps`: its exponents fix the conditioning of `P_s` for all the
//! stages below. Per-coordinate windows come from the column maxima of
//! `P_s`. Exponent floors make the off-target entries of `O^{k,l}` (bounded
//! by `n lambda^2` times a decaying power) and the finite-`l` deviation of
//! `omega` fit inside the stage tolerance; every choice is then checked by
//! direct evaluation and the floors doubled on failure.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::ext::{ExtReal, Precision};
use crate::field::{Field, FieldElement, Scalar};
use crate::matrix::{mat_pow_apply, o_matrix, sup_norm, Matrix};
use crate::scalar::GeneratingPair;
use crate::search::{steer_scalar, SearchBudget};
use crate::systems::{default_lift_parameters, default_tau_zero, lift_affine, phi, psi, AffineSystem, SemigroupSystem, ValidationOptions};

/// `B^{k_1} A^{l_1} ... B^{k_m} A^{l_m}`, stored as `[(k_1, l_1), ...]`; the
/// last pair acts first.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct OrbitWord {
    pub stages: Vec<(u64, u64)>,
}

impl OrbitWord {
    pub fn new(stages: Vec<(u64, u64)>) -> Self {
        OrbitWord { stages }
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    /// `self` followed on the right by `rhs` (so `rhs` acts first).
    pub fn concat(&self, rhs: &OrbitWord) -> OrbitWord {
        let mut stages = self.stages.clone();
        stages.extend_from_slice(&rhs.stages);
        OrbitWord { stages }
    }

    /// Largest exponent in the word.
    pub fn max_exponent(&self) -> u64 {
        self.stages.iter().map(|&(k, l)| k.max(l)).max().unwrap_or(0)
    }
}

/// Applies `word` to `p` at the precision of `p`.
pub fn evaluate_word(sys: &SemigroupSystem, word: &OrbitWord, p: &[Scalar]) -> Result<Vec<Scalar>> {
    if p.len() != sys.n() {
        return Err(Error::DimensionMismatch { expected: sys.n(), got: p.len() });
    }
    let prec = p.first().map(Scalar::precision).unwrap_or_else(|| sys.precision());
    let local;
    let sys = if prec == sys.precision() {
        sys
    } else {
        local = sys.with_precision(prec);
        &local
    };
    let field = sys.field();
    let mut x: Vec<Scalar> = p.iter().map(|v| v.in_field(field)).collect();
    for &(k, l) in word.stages.iter().rev() {
        x = mat_pow_apply(sys.a(), l, &x)?.into_iter().map(|v| v.in_field(field)).collect();
        x = mat_pow_apply(sys.b(), k, &x)?;
    }
    Ok(x)
}

/// Diagnostics of one stage. `s = 0` is the base stage.
#[derive(Clone, Debug)]
pub struct SteeringStage {
    pub s: usize,
    pub k: u64,
    pub l: u64,
    /// `z_{s+1} / z_1` (absent for the base stage).
    pub alpha: Option<Scalar>,
    /// `lim ((A_1 A^{-1})^l)_{s+1,1}` (absent for the base stage).
    pub omega: Option<Scalar>,
    /// Scalar target handed to the pair search.
    pub scalar_target: Scalar,
    /// Stage tolerance.
    pub eps: ExtReal,
    /// Stage target `z` in `K^{s+1}`.
    pub target: Vec<Scalar>,
    /// Preimage `S^{-l} U^{-k} (z_1, ..., z_s)` (empty for the base stage).
    pub preimage: Vec<Scalar>,
    /// `||B^k A^l||_inf`.
    pub gamma: ExtReal,
    /// `||P_s||_inf` for the stages applied after this one.
    pub amplification: ExtReal,
    /// Stage error as seen at the output, `||P_s e||_inf`.
    pub achieved: ExtReal,
    /// Exponent floors used for the accepted solution.
    pub floors: (u64, u64),
    /// Human-readable notes on surrogate substitutions.
    pub notes: Vec<String>,
    pub nodes: u64,
    pub retries: u32,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SteeringStats {
    pub nodes: u64,
    pub retries: u32,
    pub refinements: u32,
}

#[derive(Clone, Debug)]
pub struct SteeringResult {
    pub word: OrbitWord,
    pub target: Vec<Scalar>,
    /// Evaluated at doubled precision, rounded to working precision.
    pub achieved: Vec<Scalar>,
    /// `||achieved - target||_inf`, from the doubled-precision evaluation.
    pub error: ExtReal,
    /// `sum_s achieved_s`.
    pub error_bound: ExtReal,
    /// Base stage first, then `s = 1, 2, ...`.
    pub stages: Vec<SteeringStage>,
    pub stats: SteeringStats,
}

const MAX_RETRIES: u32 = 8;

fn ln(x: &ExtReal) -> ExtReal {
    x.ln()
}

/// Same phase as `z`, modulus raised to `mag` when `|z| < mag`.
fn lift_small(z: &Scalar, mag: &ExtReal, field: Field) -> (Scalar, bool) {
    let r = z.abs();
    if r >= *mag {
        return (z.clone(), false);
    }
    if z.is_zero() {
        return (Scalar::real(mag.clone()).in_field(field), true);
    }
    (z.scale(&(mag / &r)), true)
}

/// Smallest `l` with `coef + |beta| (L - l b) / |a| ... <= tol` along the
/// solution line `k ln|a| + l ln|b| = L`:
/// `l (gamma - |beta| b / |a|) + |beta| L / |a| + log_coef <= log_tol`.
fn cone_floor(beta: &ExtReal, gamma: &ExtReal, la: &ExtReal, lb: &ExtReal, l_hi: &ExtReal, log_coef: &ExtReal, log_tol: &ExtReal) -> Result<u64> {
    let (ab, aa) = (beta.abs(), la.abs());
    let slope = &(&(&ab * lb) / &aa) - gamma;
    if !slope.is_positive() {
        return Err(Error::PrecViolation(String::from("off-target entries do not decay along the solution line")));
    }
    let num = &(&(log_coef + &(&(&ab * l_hi) / &aa)) - log_tol);
    if !num.is_positive() {
        return Ok(0);
    }
    Ok((num / &slope).floor_i128().map_or(u64::MAX, |v| u64::try_from(v + 1).unwrap_or(u64::MAX)))
}

/// `k` floor implied by an `l` floor on the line `k ln|a| + l ln|b| <= L_hi`.
fn k_floor(l_floor: u64, la: &ExtReal, lb: &ExtReal, l_hi: &ExtReal) -> u64 {
    let prec = la.precision();
    let v = &(&(&ExtReal::from_u64(l_floor, prec) * lb) - l_hi) / &la.abs();
    v.floor_i128().map_or(0, |x| u64::try_from(x.max(0)).unwrap_or(u64::MAX))
}

struct Ctx<'a> {
    sys: &'a SemigroupSystem,
    pairs: &'a [GeneratingPair],
    prec: Precision,
    field: Field,
    cap: u64,
    budget: &'a SearchBudget,
    nodes: u64,
}

impl Ctx<'_> {
    fn search(&mut self, pair: &GeneratingPair, t: &Scalar, tol: &ExtReal, floors: (u64, u64)) -> Result<(u64, u64)> {
        if floors.0 > self.cap || floors.1 > self.cap {
            return Err(Error::NotFound(format!("floors {:?} exceed the exponent cap {}", floors, self.cap)));
        }
        let left = self.budget.max_nodes.saturating_sub(self.nodes);
        if left == 0 {
            return Err(Error::NotFound(String::from("node budget exhausted")));
        }
        let b = SearchBudget {
            max_m: self.budget.max_m.min(self.cap),
            max_n: self.budget.max_n.min(self.cap),
            max_nodes: left,
            strategy: self.budget.strategy,
            m_min: floors.0.max(self.budget.m_min),
            n_min: floors.1.max(self.budget.n_min),
        };
        let target = FieldElement::from_scalar(t).in_field(pair.field);
        match steer_scalar(pair, &target, tol, &b) {
            Ok(hit) => {
                self.nodes += hit.nodes;
                Ok((hit.m, hit.n))
            }
            Err(e) => {
                self.nodes = self.budget.max_nodes;
                Err(e)
            }
        }
    }
}

fn ln_abs(x: &FieldElement) -> ExtReal {
    x.log_mag().clone()
}

/// `B^k A^l` as a full matrix.
fn stage_matrix(sys: &SemigroupSystem, k: u64, l: u64, prec: Precision) -> Matrix {
    let mut m = sys.a().matrix().pow(l);
    for i in 0..sys.n() {
        let bk = sys.b().entry(i).powi(k).to_scalar_at(prec);
        for j in 0..sys.n() {
            let v = &bk * m.get(i, j);
            m.set(i, j, v);
        }
    }
    m
}

/// Largest entry of column `j`: the sup-norm gain on errors in coordinate `j`.
fn column_gain(p: &Matrix, j: usize) -> ExtReal {
    (0..p.rows()).map(|i| p.get(i, j).abs()).fold(ExtReal::zero(p.precision()), ExtReal::max)
}

/// Share of `eps` given to stage `s`; the top stage gets the largest share
/// because its exponents set the conditioning of everything below it.
fn stage_share(s: usize, n: usize, prec: Precision) -> ExtReal {
    let top = if n == 1 { 0 } else { n - 1 };
    if s == top {
        return ExtReal::from_f64(0.96, prec);
    }
    // the remaining quarter split geometrically, base stage included
    let rest = ExtReal::from_f64(0.04, prec);
    let depth = (top - s) as i64;
    let last = s == 0;
    let w = if last { ExtReal::pow2(-(depth - 1), prec) } else { ExtReal::pow2(-depth, prec) };
    &rest * &w
}

/// One pass of the backward induction at working tolerance `eps`.
fn attempt(
    ctx: &mut Ctx<'_>,
    y: &[Scalar],
    eps: &ExtReal,
    floor_scale: u64,
) -> Result<(OrbitWord, Vec<SteeringStage>, u32)> {
    let sys = ctx.sys;
    let n = sys.n();
    let prec = ctx.prec;
    let field = ctx.field;
    let two = ExtReal::from_u64(2, prec);
    let eighth = ExtReal::from_f64(0.125, prec);
    let lambda = sys.bound().ok_or_else(|| Error::NotValidated(String::from("no growth bound")))?.lambda.clone();
    let limit = sys.limit().ok_or_else(|| Error::NotValidated(String::from("no limit matrix")))?.clone();
    let ln_nl2 = ln(&(&ExtReal::from_u64(n as u64, prec) * &(&lambda * &lambda)));
    let a = sys.a();
    let b = sys.b();
    let mut z: Vec<Scalar> = y.to_vec();
    // product of the stages applied after the current one
    let mut prop = Matrix::identity(n, field, prec);
    let mut stages = Vec::new();
    let mut word = Vec::new();
    let mut retries = 0u32;

    for s in (1..n).rev() {
        let eps_s = eps * &stage_share(s, n, prec);
        let gain: Vec<ExtReal> = (0..n).map(|j| column_gain(&prop, j)).collect();
        let mut notes = Vec::new();
        let mag1 = &(&eps_s * &ExtReal::from_f64(0.03, prec)) / &gain[0];
        let (z1, sub1) = lift_small(&z[0], &mag1, field);
        if sub1 {
            notes.push(format!("z_1 raised to modulus {}", mag1.to_string_digits(6)));
        }
        let mags = &(&eps_s * &ExtReal::from_f64(0.03, prec)) / &gain[s];
        let (zs, sub2) = lift_small(&z[s], &mags, field);
        if sub2 {
            notes.push(format!("z_{} raised to modulus {}", s + 1, mags.to_string_digits(6)));
        }
        let mut top: Vec<Scalar> = z[..s].to_vec();
        top[0] = z1.clone();
        let alpha = &zs * &z1.recip();
        let omega = limit.limit_col[s - 1].clone();
        let t = -&(&alpha * &omega.recip());
        let t_abs = t.abs();
        // windows are generous; the direct check below enforces eps_s
        let o_tol = &(&(&eps_s * &ExtReal::from_f64(0.7, prec)) / &gain[s]) / &z1.abs();
        let delta = &o_tol / &omega.abs();
        let pair = &ctx.pairs[s];
        let (la, lb) = (ln_abs(&pair.a), ln_abs(&pair.b));
        let l_hi = ln(&(&t_abs + &delta));

        // omega deviation: (|t| + delta) C r^l <= o_tol / 2
        let mut l_floor = 0u64;
        if limit.rate.is_positive() {
            let num = ln(&(&(&two * &(&t_abs + &delta)) * &limit.constant)) - ln(&o_tol);
            if num.is_positive() {
                let v = &num / &(-&ln(&limit.rate));
                l_floor = v.floor_i128().map_or(u64::MAX, |x| u64::try_from(x + 1).unwrap_or(u64::MAX));
            }
        }
        let off_count = ExtReal::from_u64(((n - s) * s) as u64, prec);
        let off_base = &(&eps_s / &ExtReal::from_u64(4, prec)) / &(&off_count * &sup_norm(&top));
        for j in s..n {
            let log_off = ln(&(&off_base / &gain[j]));
            for m in 0..s {
                if j == s && m == 0 {
                    continue;
                }
                let beta = ln_abs(&b.entry(j).div(b.entry(m)));
                let gamma = ln_abs(&a.diag(j).div(a.diag(m)));
                l_floor = l_floor.max(cone_floor(&beta, &gamma, &la, &lb, &l_hi, &ln_nl2, &log_off)?);
            }
        }
        l_floor = l_floor.saturating_mul(floor_scale);
        let mut tries = 0u32;
        let (k, l, achieved) = loop {
            let floors = (k_floor(l_floor, &la, &lb, &l_hi), l_floor);
            let (k, l) = ctx.search(pair, &t, &delta, floors).map_err(|e| stage_failure(s, floors, e))?;
            let out = o_matrix(a, b, s, k, l)?.mul_vec(&top)?;
            let mut e = vec![Scalar::zero(field, prec); n];
            e[0] = &z1 - &z[0];
            e[s] = &out[0] - &z[s];
            for (j, v) in out.iter().enumerate().skip(1) {
                e[s + j] = v.clone();
            }
            let err = sup_norm(&prop.mul_vec(&e)?);
            if err <= eps_s {
                break (k, l, err);
            }
            tries += 1;
            retries += 1;
            if tries > MAX_RETRIES {
                return Err(Error::NotFound(format!(
                    "stage {s}: off-target entries of O exceed the stage tolerance after {MAX_RETRIES} retries"
                )));
            }
            l_floor = l_floor.max(l).saturating_mul(2).max(1);
        };
        // x = S^{-l} U^{-k} (z_1, ..., z_s)
        let u_inv: Vec<Scalar> = (0..s).map(|m| &top[m] * &b.entry(m).powi(k).to_scalar_at(prec).recip()).collect();
        let x = a.sub_block(0, s).inv_pow_apply(l, &u_inv)?;
        let m = stage_matrix(sys, k, l, prec);
        stages.push(SteeringStage {
            s,
            k,
            l,
            alpha: Some(alpha),
            omega: Some(omega),
            scalar_target: t,
            eps: eps_s,
            target: z[..=s].to_vec(),
            preimage: x.clone(),
            gamma: m.inf_norm(),
            amplification: prop.inf_norm(),
            achieved,
            floors: (k_floor(l_floor, &la, &lb, &l_hi), l_floor),
            notes,
            nodes: 0,
            retries: tries,
        });
        word.push((k, l));
        prop = prop.mul(&m)?;
        z = x;
    }

    // base stage on (B_1, A_1)
    let eps_0 = eps * &stage_share(0, n, prec);
    let gain: Vec<ExtReal> = (0..n).map(|j| column_gain(&prop, j)).collect();
    let p = sys.seed_scalars();
    let mut notes = Vec::new();
    let mag1 = &(&eps_0 * &eighth) / &gain[0];
    let (z1, sub) = lift_small(&z[0], &mag1, field);
    if sub {
        notes.push(format!("x_1 raised to modulus {}", mag1.to_string_digits(6)));
    }
    let t = &z1 * &p[0].recip();
    let delta = &(&(&eps_0 / &two) / &gain[0]) / &p[0].abs();
    let pair = &ctx.pairs[0];
    let (la, lb) = (ln_abs(&pair.a), ln_abs(&pair.b));
    let l_hi = ln(&(&t.abs() + &delta));
    let p_norm = p.iter().fold(ExtReal::zero(prec), |acc, v| &acc + &v.abs());
    let log_coef = ln(&(&lambda * &p_norm));
    let tail = ExtReal::from_u64(4 * (n.max(2) - 1) as u64, prec);
    let mut l_floor = 0u64;
    for j in 1..n {
        let log_tol = ln(&(&(&eps_0 / &tail) / &gain[j]));
        let beta = ln_abs(b.entry(j));
        let gamma = ln_abs(a.diag(j));
        l_floor = l_floor.max(cone_floor(&beta, &gamma, &la, &lb, &l_hi, &log_coef, &log_tol)?);
    }
    l_floor = l_floor.saturating_mul(floor_scale);
    let mut tries = 0u32;
    let (k, l, achieved) = loop {
        let floors = (k_floor(l_floor, &la, &lb, &l_hi), l_floor);
        let (k, l) = ctx.search(pair, &t, &delta, floors).map_err(|e| stage_failure(0, floors, e))?;
        let mut e = evaluate_word(sys, &OrbitWord::new(vec![(k, l)]), &p)?;
        e[0] = &e[0] - &z[0];
        let err = sup_norm(&prop.mul_vec(&e)?);
        if err <= eps_0 {
            break (k, l, err);
        }
        tries += 1;
        retries += 1;
        if tries > MAX_RETRIES {
            return Err(Error::NotFound(format!("base stage: tail coordinates exceed the tolerance after {MAX_RETRIES} retries")));
        }
        l_floor = l_floor.max(l).saturating_mul(2).max(1);
    };
    stages.push(SteeringStage {
        s: 0,
        k,
        l,
        alpha: None,
        omega: None,
        scalar_target: t,
        eps: eps_0,
        target: vec![z[0].clone()],
        preimage: Vec::new(),
        gamma: stage_matrix(sys, k, l, prec).inf_norm(),
        amplification: prop.inf_norm(),
        achieved,
        floors: (k_floor(l_floor, &la, &lb, &l_hi), l_floor),
        notes,
        nodes: 0,
        retries: tries,
    });
    word.push((k, l));
    stages.reverse();
    Ok((OrbitWord::new(word), stages, retries))
}

fn stage_failure(s: usize, floors: (u64, u64), e: Error) -> Error {
    match e {
        Error::NotFound(msg) => Error::NotFound(format!("stage {s} (floors k >= {}, l >= {}): {msg}", floors.0, floors.1)),
        other => other,
    }
}

/// Steers the system seed to within `eps` of `y` (sup norm).
pub fn synthesize_word(sys: &SemigroupSystem, y: &[Scalar], eps: &ExtReal, budget: &SearchBudget) -> Result<SteeringResult> {
    let n = sys.n();
    if !sys.is_accepted() {
        return Err(Error::NotValidated(String::from("system is not accepted under Theorem 1")));
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    if !eps.is_positive() {
        return Err(Error::InvalidArgument(String::from("eps must be positive")));
    }
    if sys.seed()[0].is_zero() {
        return Err(Error::SeedFirstCoordinateZero);
    }
    let prec = sys.precision();
    let field = sys.field();
    let y: Vec<Scalar> = y.iter().map(|v| v.with_precision(prec).in_field(field)).collect();
    let eps = eps.with_precision(prec);
    let pairs = &sys.validation().expect("accepted").pairs;
    let mut ctx = Ctx { sys, pairs, prec, field, cap: sys.exponent_cap(), budget, nodes: 0 };
    let hp = prec.doubled();
    let high = sys.with_precision(hp);
    let p_high = high.seed_scalars();
    let y_high: Vec<Scalar> = y.iter().map(|v| v.with_precision(hp)).collect();

    let mut work_eps = eps.clone();
    let mut stats = SteeringStats::default();
    let mut floor_scale = 1u64;
    for pass in 0..2 {
        let (word, stages, retries) = attempt(&mut ctx, &y, &work_eps, floor_scale)?;
        stats.retries += retries;
        let achieved_high = evaluate_word(&high, &word, &p_high)?;
        let err_high = achieved_high.iter().zip(&y_high).map(|(a, b)| (a - b).abs()).fold(ExtReal::zero(hp), ExtReal::max);
        if err_high < eps.with_precision(hp) {
            stats.nodes = ctx.nodes;
            let error_bound = stages.iter().fold(ExtReal::zero(prec), |acc, st| &acc + &st.achieved);
            return Ok(SteeringResult {
                word,
                target: y,
                achieved: achieved_high.iter().map(|v| v.with_precision(prec)).collect(),
                error: err_high.with_precision(prec),
                error_bound,
                stages,
                stats,
            });
        }
        if pass == 0 {
            stats.refinements += 1;
            work_eps = &work_eps / &ExtReal::from_u64(4, prec);
            floor_scale = 2;
        }
    }
    Err(Error::NotFound(String::from("verification at doubled precision failed after refinement")))
}

/// A steering run over an affine system, carried out on its lift.
#[derive(Clone, Debug)]
pub struct AffineSteering {
    /// Result in dimension `n + 1` for the lifted seed `Psi(p)`.
    pub lifted: SteeringResult,
    /// Word over `x -> Ax + v` (for `A`) and `x -> Bx` (for `B`).
    pub word: OrbitWord,
    /// `Phi` of the lifted orbit point.
    pub achieved: Vec<Scalar>,
    /// Direct affine evaluation of `word` at `p`.
    pub direct: Vec<Scalar>,
    /// `||direct - y||_inf`.
    pub error: ExtReal,
    pub lift_a: FieldElement,
    pub lift_b: FieldElement,
}

/// `D^l` as a pair `(M, c)` acting by `x -> Mx + c`.
fn affine_power(a: &Matrix, v: &[Scalar], mut l: u64) -> Result<(Matrix, Vec<Scalar>)> {
    let n = a.rows();
    let (field, prec) = (a.field(), a.precision());
    let mut acc = (Matrix::identity(n, field, prec), vec![Scalar::zero(field, prec); n]);
    let mut base = (a.clone(), v.to_vec());
    while l > 0 {
        if l & 1 == 1 {
            // base after acc
            let c = base.0.mul_vec(&acc.1)?.iter().zip(&base.1).map(|(x, y)| x + y).collect();
            acc = (base.0.mul(&acc.0)?, c);
        }
        l >>= 1;
        if l > 0 {
            let c = base.0.mul_vec(&base.1)?.iter().zip(&base.1).map(|(x, y)| x + y).collect();
            base = (base.0.mul(&base.0)?, c);
        }
    }
    Ok(acc)
}

/// Applies a word over the affine generators directly.
pub fn evaluate_affine_word(sys: &AffineSystem, word: &OrbitWord, p: &[Scalar]) -> Result<Vec<Scalar>> {
    if p.len() != sys.n() {
        return Err(Error::DimensionMismatch { expected: sys.n(), got: p.len() });
    }
    let prec = p.first().map(Scalar::precision).unwrap_or_else(|| sys.precision());
    let field = sys.field();
    let a = sys.a().with_precision(prec).matrix().in_field(field);
    let v: Vec<Scalar> = sys.v().iter().map(|x| x.to_scalar_at(prec).in_field(field)).collect();
    let b = sys.b().with_precision(prec);
    let mut x: Vec<Scalar> = p.iter().map(|t| t.in_field(field)).collect();
    for &(k, l) in word.stages.iter().rev() {
        let (m, c) = affine_power(&a, &v, l)?;
        x = m.mul_vec(&x)?.iter().zip(&c).map(|(s, t)| s + t).collect();
        x = mat_pow_apply(&b, k, &x)?;
    }
    Ok(x)
}

/// Steers `p` toward `y` under `x -> Ax + v`, `x -> Bx` through the lift
/// with parameters `lift` (default `(A_1^2, B_1)`), targeting `Psi(y)` with
/// tolerance `eps / (4 (1 + ||y||_inf))`.
pub fn steer_affine(
    sys: &AffineSystem,
    p: &[Scalar],
    y: &[Scalar],
    eps: &ExtReal,
    budget: &SearchBudget,
    lift: Option<(FieldElement, FieldElement)>,
) -> Result<AffineSteering> {
    if !sys.is_accepted() {
        return Err(Error::NotValidated(String::from("affine system is not accepted under Theorem 2")));
    }
    let n = sys.n();
    if p.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: p.len() });
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    let prec = sys.precision();
    let field = sys.field();
    let (la, lb) = lift.unwrap_or_else(|| default_lift_parameters(sys));
    let opts = ValidationOptions::for_precision(prec);
    let seed: Vec<FieldElement> = psi(p, field, prec).iter().map(FieldElement::from_scalar).collect();
    let lifted_sys = lift_affine(sys, &la, &lb, &opts)?.with_seed(seed)?;
    let target = psi(y, field, prec);
    let scale = &ExtReal::from_u64(4, prec) * &(&ExtReal::one(prec) + &sup_norm(y));
    let lifted = synthesize_word(&lifted_sys, &target, &(eps / &scale), budget)?;
    let achieved = phi(&lifted.achieved, &default_tau_zero(prec)).map_err(|_| Error::PhiDivergence)?;
    let hp = prec.doubled();
    let p_high: Vec<Scalar> = p.iter().map(|v| v.with_precision(hp)).collect();
    let direct_high = evaluate_affine_word(sys, &lifted.word, &p_high)?;
    let error = direct_high
        .iter()
        .zip(y)
        .map(|(d, t)| (d - &t.with_precision(hp)).abs())
        .fold(ExtReal::zero(hp), ExtReal::max)
        .with_precision(prec);
    Ok(AffineSteering {
        word: lifted.word.clone(),
        lifted,
        achieved,
        direct: direct_high.iter().map(|v| v.with_precision(prec)).collect(),
        error,
        lift_a: la,
        lift_b: lb,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{build_affine_1d, build_complex_example, build_real_example};
    use num_bigint::BigInt;
    use num_rational::BigRational;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn p() -> Precision {
        Precision::default()
    }

    fn s(x: f64) -> Scalar {
        Scalar::from_f64(x, p())
    }

    fn e(x: &str) -> ExtReal {
        ExtReal::parse(x, p()).unwrap()
    }

    fn fe(n: i64, d: i64) -> FieldElement {
        FieldElement::real_ratio(&BigRational::new(BigInt::from(n), BigInt::from(d)), p())
    }

    fn close(x: &Scalar, y: f64) -> bool {
        (x.re().to_f64() - y).abs() < 1e-30
    }

    #[test]
    fn evaluate_examples() {
        let sys = build_real_example(2, p()).unwrap();
        let p0 = vec![s(1.0), s(0.0)];
        assert_eq!(evaluate_word(&sys, &OrbitWord::default(), &p0).unwrap(), p0);
        let x = evaluate_word(&sys, &OrbitWord::new(vec![(1, 1)]), &p0).unwrap();
        assert!(close(&x[0], -1.5) && close(&x[1], 3.0 / 16.0));
        let x = evaluate_word(&sys, &OrbitWord::new(vec![(0, 2)]), &p0).unwrap();
        assert!(close(&x[0], 9.0) && close(&x[1], 36.0));
        assert!(matches!(evaluate_word(&sys, &OrbitWord::default(), &p0[..1]), Err(Error::DimensionMismatch { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn evaluation_is_associative(w1 in proptest::collection::vec((0u64..30, 0u64..30), 0..3),
                                     w2 in proptest::collection::vec((0u64..30, 0u64..30), 0..3)) {
            let sys = build_real_example(3, p()).unwrap();
            let p0 = vec![s(1.0), s(-0.5), s(2.0)];
            let (a, b) = (OrbitWord::new(w1), OrbitWord::new(w2));
            let lhs = evaluate_word(&sys, &a.concat(&b), &p0).unwrap();
            let rhs = evaluate_word(&sys, &a, &evaluate_word(&sys, &b, &p0).unwrap()).unwrap();
            for (x, y) in lhs.iter().zip(&rhs) {
                let scale = x.abs().max(ExtReal::one(p()));
                prop_assert!((x - y).abs() <= &scale * &e("1e-100"));
            }
        }
    }

    fn check_result(sys: &SemigroupSystem, r: &SteeringResult, y: &[Scalar], eps: &ExtReal) {
        assert!(r.error < *eps, "error {}", r.error.to_string_digits(6));
        // independent re-evaluation at doubled precision
        let hp = p().doubled();
        let again = evaluate_word(&sys.with_precision(hp), &r.word, &sys.with_precision(hp).seed_scalars()).unwrap();
        let err = again.iter().zip(y).map(|(a, b)| (a - &b.with_precision(hp)).abs()).fold(ExtReal::zero(hp), ExtReal::max);
        assert_eq!(err.with_precision(p()), r.error);
        assert!(r.error <= &r.error_bound * &(&ExtReal::one(p()) + &e("1e-20")) + e("1e-100"));
        for st in &r.stages {
            assert!(st.achieved <= st.eps);
        }
    }

    #[test]
    fn one_dimensional_target() {
        let sys = build_real_example(1, p()).unwrap();
        let eps = e("1e-2");
        let r = synthesize_word(&sys, &[s(5.0)], &eps, &SearchBudget::exponents(2000)).unwrap();
        check_result(&sys, &r, &[s(5.0)], &eps);
        let (k, l) = r.word.stages[0];
        let v = (-0.5f64).powi(k as i32) * 3f64.powi(l as i32);
        assert!((v - 5.0).abs() < 1e-2);
    }

    #[test]
    fn two_dimensional_target() {
        let sys = build_real_example(2, p()).unwrap();
        let eps = e("1e-2");
        let y = [s(1.0), s(-1.0)];
        let r = synthesize_word(&sys, &y, &eps, &SearchBudget::default()).unwrap();
        assert_eq!(r.word.len(), 2);
        check_result(&sys, &r, &y, &eps);
        let st = &r.stages[1];
        let o = o_matrix(sys.a(), sys.b(), 1, st.k, st.l).unwrap();
        let alpha = st.alpha.as_ref().unwrap();
        assert!(&(o.get(0, 0) - alpha).abs() * &st.target[0].abs() < st.eps);
    }

    #[test]
    fn zero_coordinates_use_surrogates() {
        let sys = build_real_example(2, p()).unwrap();
        let eps = e("5e-2");
        for y in [[0.0, 0.0], [0.0, 0.7], [-0.3, 0.0]] {
            let y = [s(y[0]), s(y[1])];
            let r = synthesize_word(&sys, &y, &eps, &SearchBudget::default()).unwrap();
            check_result(&sys, &r, &y, &eps);
        }
    }

    #[test]
    fn three_dimensional_targets() {
        let sys = build_real_example(3, p()).unwrap();
        let eps = e("1e-1");
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..4 {
            let y: Vec<Scalar> = (0..3).map(|_| s(rng.gen_range(-1.0..1.0))).collect();
            let r = synthesize_word(&sys, &y, &eps, &SearchBudget::default()).unwrap();
            check_result(&sys, &r, &y, &eps);
        }
    }

    #[test]
    fn complex_target() {
        let sys = build_complex_example(1, p()).unwrap();
        let eps = e("1e-1");
        let y = [Scalar::Complex(e("0.5"), e("-0.25"))];
        let r = synthesize_word(&sys, &y, &eps, &SearchBudget::default()).unwrap();
        check_result(&sys, &r, &y, &eps);
    }

    #[test]
    fn seed_and_budget_errors() {
        let sys = build_real_example(2, p()).unwrap().with_seed(vec![fe(0, 1), fe(1, 1)]).unwrap();
        let r = synthesize_word(&sys, &[s(1.0), s(1.0)], &e("1e-2"), &SearchBudget::default());
        assert!(matches!(r, Err(Error::SeedFirstCoordinateZero)));
        let sys = build_real_example(1, p()).unwrap();
        let r = synthesize_word(&sys, &[s(5.0)], &e("1e-300"), &SearchBudget::exponents(50));
        assert!(matches!(r, Err(Error::NotFound(_))));
    }

    #[test]
    fn affine_steering() {
        let sys = build_affine_1d(p()).unwrap();
        let eps = e("1e-2");
        let r = steer_affine(&sys, &[s(0.0)], &[s(4.0)], &eps, &SearchBudget::default(), Some((fe(9, 1), fe(-1, 2)))).unwrap();
        assert!(r.error < eps);
        // oracle: closed forms 3^l x + (3^l - 1)/2 and (-1/2)^k x at doubled precision
        let hp = p().doubled();
        let (three, half) = (ExtReal::from_i64(3, hp), ExtReal::from_f64(-0.5, hp));
        let mut x = ExtReal::zero(hp);
        for &(k, l) in r.word.stages.iter().rev() {
            let t = three.powi(l);
            x = &(&t * &x) + &(&(&t - &ExtReal::one(hp)) / &ExtReal::from_i64(2, hp));
            x = &half.powi(k) * &x;
        }
        assert!((&x - &ExtReal::from_i64(4, hp)).abs() < e("1e-2"), "{x:?}");
        assert!((&r.achieved[0] - &r.direct[0]).abs() < e("1e-30"));
    }

    #[test]
    fn lift_identities() {
        let sys = build_affine_1d(p()).unwrap();
        let lifted = lift_affine(&sys, &fe(9, 1), &fe(-1, 2), &ValidationOptions::for_precision(p())).unwrap();
        let tau = default_tau_zero(p());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let x = s(rng.gen_range(-10.0..10.0));
            let lx = psi(&[x.clone()], Field::Real, p());
            let ax = phi(&mat_pow_apply(lifted.a(), 1, &lx).unwrap(), &tau).unwrap();
            assert!((&ax[0] - &(&(&x * &s(3.0)) + &s(1.0))).abs() < e("1e-30"));
            let bx = phi(&mat_pow_apply(lifted.b(), 1, &lx).unwrap(), &tau).unwrap();
            assert!((&bx[0] - &(&x * &s(-0.5))).abs() < e("1e-30"));
            let w1 = OrbitWord::new(vec![(rng.gen_range(0..4), rng.gen_range(0..4))]);
            let w2 = OrbitWord::new(vec![(rng.gen_range(0..4), rng.gen_range(0..4)), (1, 2)]);
            let lhs = phi(&evaluate_word(&lifted, &w1.concat(&w2), &lx).unwrap(), &tau).unwrap();
            let inner = evaluate_affine_word(&sys, &w2, &[x.clone()]).unwrap();
            let rhs = evaluate_affine_word(&sys, &w1, &inner).unwrap();
            let scale = rhs[0].abs().max(ExtReal::one(p()));
            assert!((&lhs[0] - &rhs[0]).abs() < &scale * &e("1e-30"));
        }
    }
}
