//! Independent checks: brute-force orbit enumeration, grid coverage, the
//! three lemmas at finite depth, and batch steering.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};
use crate::ext::{ExtReal, Precision};
use crate::field::{Field, FieldElement, Scalar};
use crate::matrix::{growth_lambda, normalized_inverse_limit, LowerTriangular, Matrix};
use crate::search::SearchBudget;
use crate::steering::{evaluate_word, synthesize_word, OrbitWord, SteeringResult};
use crate::systems::SemigroupSystem;

/// Default cap on enumerated words.
pub const DEFAULT_WORD_CAP: u128 = 10_000_000;

/// Points closer than this (sup norm) are merged; `10^-60`.
pub fn default_tau_dedup(prec: Precision) -> ExtReal {
    ExtReal::parse("1e-60", prec).expect("literal")
}

#[derive(Clone, Debug)]
pub struct PointCloud {
    pub field: Field,
    pub dimension: usize,
    pub points: Vec<Vec<Scalar>>,
    /// Word that produced each point, when known.
    pub words: Option<Vec<OrbitWord>>,
}

impl PointCloud {
    pub fn new(field: Field, dimension: usize, points: Vec<Vec<Scalar>>) -> Result<Self> {
        for p in &points {
            if p.len() != dimension {
                return Err(Error::DimensionMismatch { expected: dimension, got: p.len() });
            }
            if !p.iter().all(|v| v.re().is_finite() && v.im().is_finite()) {
                return Err(Error::InvalidArgument(String::from("non-finite point")));
            }
        }
        Ok(PointCloud { field, dimension, points, words: None })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Real coordinates, complex entries split into `(re, im)`.
    pub fn real_axes(&self) -> usize {
        real_axes(self.field, self.dimension)
    }
}

fn real_axes(field: Field, n: usize) -> usize {
    match field {
        Field::Real => n,
        Field::Complex => 2 * n,
    }
}

fn realify(field: Field, p: &[Scalar]) -> Vec<ExtReal> {
    match field {
        Field::Real => p.iter().map(Scalar::re).collect(),
        Field::Complex => p.iter().flat_map(|v| [v.re(), v.im()]).collect(),
    }
}

/// `m` stages with `k <= k_max`, `l <= l_max` each.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WordShape {
    pub stages: usize,
    pub k_max: u64,
    pub l_max: u64,
}

impl WordShape {
    pub fn word_count(&self) -> Option<u128> {
        let per = (self.k_max as u128 + 1).checked_mul(self.l_max as u128 + 1)?;
        (0..self.stages).try_fold(1u128, |acc, _| acc.checked_mul(per))
    }
}

/// Calls `visit(word, point)` for every word of `shape` applied to `p`,
/// evaluating incrementally; nothing is materialized.
pub fn enumerate_orbit(
    sys: &SemigroupSystem,
    p: &[Scalar],
    shape: WordShape,
    cap: u128,
    mut visit: impl FnMut(&[(u64, u64)], &[Scalar]),
) -> Result<u128> {
    let n = sys.n();
    if p.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: p.len() });
    }
    let words = shape.word_count().unwrap_or(u128::MAX);
    if words > cap {
        return Err(Error::BudgetExceeded { words, cap });
    }
    let field = sys.field();
    let prec = p.first().map(Scalar::precision).unwrap_or_else(|| sys.precision());
    let local;
    let sys = if prec == sys.precision() {
        sys
    } else {
        local = sys.with_precision(prec);
        &local
    };
    let a = sys.a().matrix().in_field(field);
    let b: Vec<Scalar> = sys.b().entries().iter().map(|x| x.to_scalar_at(prec).in_field(field)).collect();
    let p: Vec<Scalar> = p.iter().map(|v| v.in_field(field)).collect();
    if shape.stages == 0 {
        visit(&[], &p);
        return Ok(1);
    }
    // word[j] is stage j + 1; the last stage acts first and is looped outermost
    let mut word = vec![(0u64, 0u64); shape.stages];
    fn go(
        level: usize,
        v: &[Scalar],
        a: &Matrix,
        b: &[Scalar],
        shape: WordShape,
        word: &mut Vec<(u64, u64)>,
        visit: &mut dyn FnMut(&[(u64, u64)], &[Scalar]),
    ) -> Result<()> {
        let slot = shape.stages - 1 - level;
        let mut va = v.to_vec();
        for l in 0..=shape.l_max {
            if l > 0 {
                va = a.mul_vec(&va)?;
            }
            let mut vb = va.clone();
            for k in 0..=shape.k_max {
                if k > 0 {
                    vb = vb.iter().zip(b).map(|(x, y)| x * y).collect();
                }
                word[slot] = (k, l);
                if slot == 0 {
                    visit(word, &vb);
                } else {
                    go(level + 1, &vb, a, b, shape, word, visit)?;
                }
            }
        }
        Ok(())
    }
    go(0, &p, &a, &b, shape, &mut word, &mut visit)?;
    Ok(words)
}

fn lex_cmp(x: &[ExtReal], y: &[ExtReal]) -> Ordering {
    x.iter().zip(y).map(|(a, b)| a.total_cmp(b)).find(|o| *o != Ordering::Equal).unwrap_or(Ordering::Equal)
}

/// All points of `shape` applied to `p`, with near-duplicates (closer than
/// `tau_dedup` in sup norm, realified) merged. Points are returned in
/// lexicographic order of their realified coordinates.
pub fn brute_force_orbit(
    sys: &SemigroupSystem,
    p: &[Scalar],
    shape: WordShape,
    tau_dedup: &ExtReal,
    cap: u128,
) -> Result<PointCloud> {
    let field = sys.field();
    let mut raw: Vec<(Vec<ExtReal>, Vec<Scalar>, OrbitWord)> = Vec::new();
    enumerate_orbit(sys, p, shape, cap, |w, x| {
        raw.push((realify(field, x), x.to_vec(), OrbitWord::new(w.to_vec())));
    })?;
    raw.sort_by(|x, y| lex_cmp(&x.0, &y.0).then_with(|| x.2.stages.cmp(&y.2.stages)));
    let mut points: Vec<Vec<Scalar>> = Vec::new();
    let mut words = Vec::new();
    let mut last: Option<Vec<ExtReal>> = None;
    for (key, x, w) in raw {
        let dup = last.as_ref().is_some_and(|prev| {
            prev.iter().zip(&key).all(|(a, b)| (a - b).abs() < *tau_dedup)
        });
        if dup {
            continue;
        }
        last = Some(key);
        points.push(x);
        words.push(w);
    }
    Ok(PointCloud { field, dimension: sys.n(), points, words: Some(words) })
}

/// Fraction of grid cells of a box that contain at least one point.
#[derive(Clone, Debug)]
pub struct CoverageReport {
    /// Per real axis `[lo, hi]`.
    pub bounds: Vec<(ExtReal, ExtReal)>,
    pub cell: ExtReal,
    pub cells_per_axis: Vec<u64>,
    pub cells_total: u64,
    pub cells_hit: u64,
    /// `cells_hit / cells_total` in lowest terms.
    pub fraction: (u64, u64),
    /// Centers of the first uncovered cells, in index order.
    pub misses: Vec<Vec<ExtReal>>,
    /// Points seen, and points that fell inside the box.
    pub points_seen: u64,
    pub points_inside: u64,
}

/// Streaming cell counter behind [`coverage`].
#[derive(Clone, Debug)]
pub struct CoverageGrid {
    bounds: Vec<(ExtReal, ExtReal)>,
    cell: ExtReal,
    per_axis: Vec<u64>,
    hit: Vec<bool>,
    seen: u64,
    inside: u64,
}

/// Sample size kept in `CoverageReport::misses`.
const MISS_SAMPLE: usize = 32;

impl CoverageGrid {
    pub fn new(bounds: Vec<(ExtReal, ExtReal)>, cell: &ExtReal) -> Result<Self> {
        if !cell.is_positive() {
            return Err(Error::InvalidArgument(String::from("cell must be positive")));
        }
        if bounds.is_empty() || bounds.iter().any(|(lo, hi)| hi <= lo) {
            return Err(Error::InvalidArgument(String::from("box must be nondegenerate")));
        }
        let prec = cell.precision();
        // a cell count within 2^-40 of an integer is taken as exact, so that
        // decimal boxes like [0.1, 2] with cell 0.1 give 19 cells
        let slack = ExtReal::pow2(-40, prec);
        let mut per_axis = Vec::new();
        for (lo, hi) in &bounds {
            let q = &(hi - lo) / cell;
            let c = (&q - &slack).floor_i128().ok_or_else(|| Error::InvalidArgument(String::from("too many cells")))? + 1;
            per_axis.push(u64::try_from(c.max(1)).map_err(|_| Error::InvalidArgument(String::from("too many cells")))?);
        }
        let total = per_axis.iter().try_fold(1u64, |acc, &c| acc.checked_mul(c));
        let total = total.filter(|&t| t <= 1 << 32).ok_or_else(|| Error::InvalidArgument(String::from("too many cells")))?;
        Ok(CoverageGrid { bounds, cell: cell.clone(), per_axis, hit: vec![false; total as usize], seen: 0, inside: 0 })
    }

    /// Marks the cell of a realified point; points outside the box are
    /// counted but otherwise ignored.
    pub fn add_real(&mut self, x: &[ExtReal]) {
        self.seen += 1;
        if x.len() != self.bounds.len() {
            return;
        }
        let mut idx = 0u64;
        for ((v, (lo, hi)), &count) in x.iter().zip(&self.bounds).zip(&self.per_axis) {
            if v < lo || v > hi {
                return;
            }
            let i = (&(v - lo) / &self.cell).floor_i128().unwrap_or(0).clamp(0, count as i128 - 1) as u64;
            idx = idx * count + i;
        }
        self.inside += 1;
        self.hit[idx as usize] = true;
    }

    pub fn add(&mut self, field: Field, p: &[Scalar]) {
        self.add_real(&realify(field, p));
    }

    pub fn report(&self) -> CoverageReport {
        let total = self.hit.len() as u64;
        let hits = self.hit.iter().filter(|h| **h).count() as u64;
        let g = num_integer::gcd(hits, total).max(1);
        let half = &self.cell / &ExtReal::from_i64(2, self.cell.precision());
        let misses = self
            .hit
            .iter()
            .enumerate()
            .filter(|(_, h)| !**h)
            .take(MISS_SAMPLE)
            .map(|(i, _)| {
                let mut rem = i as u64;
                let mut center = vec![ExtReal::zero(self.cell.precision()); self.bounds.len()];
                for axis in (0..self.bounds.len()).rev() {
                    let c = rem % self.per_axis[axis];
                    rem /= self.per_axis[axis];
                    let off = &(&ExtReal::from_u64(c, self.cell.precision()) * &self.cell) + &half;
                    center[axis] = &self.bounds[axis].0 + &off;
                }
                center
            })
            .collect();
        CoverageReport {
            bounds: self.bounds.clone(),
            cell: self.cell.clone(),
            cells_per_axis: self.per_axis.clone(),
            cells_total: total,
            cells_hit: hits,
            fraction: (hits / g, total / g),
            misses,
            points_seen: self.seen,
            points_inside: self.inside,
        }
    }
}

/// Coverage of `cloud` over `bounds` (one interval per real axis).
pub fn coverage(cloud: &PointCloud, bounds: &[(ExtReal, ExtReal)], cell: &ExtReal) -> Result<CoverageReport> {
    if bounds.len() != cloud.real_axes() {
        return Err(Error::DimensionMismatch { expected: cloud.real_axes(), got: bounds.len() });
    }
    let mut grid = CoverageGrid::new(bounds.to_vec(), cell)?;
    for p in &cloud.points {
        grid.add(cloud.field, p);
    }
    Ok(grid.report())
}

/// Outcome of one finite lemma check.
#[derive(Clone, Debug)]
pub struct LemmaCheck {
    /// 1, 2 or 3.
    pub lemma: u8,
    pub name: String,
    pub passed: bool,
    pub detail: String,
    /// Indices of the first violation, e.g. `[l, i, j]` or `[m, n]`.
    pub witness: Option<Vec<u64>>,
}

#[derive(Clone, Debug, Default)]
pub struct LemmaReport {
    pub checks: Vec<LemmaCheck>,
}

impl LemmaReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Clone, Debug)]
pub struct LemmaOptions {
    /// Largest power checked for Lemmas 2 and 3.
    pub depth: u64,
    /// Enumeration box `(m, n) <= (cone_max, cone_max)` for Lemma 1.
    pub cone_max: u64,
    /// Bound `M` on `|c^m d^n|`.
    pub cone_bound: ExtReal,
    /// Level the cone maximum must drop below.
    pub escape_level: ExtReal,
}

impl LemmaOptions {
    pub fn new(depth: u64, prec: Precision) -> Self {
        LemmaOptions {
            depth,
            cone_max: 500,
            cone_bound: ExtReal::from_u64(1000, prec),
            escape_level: ExtReal::from_i64(-100, prec),
        }
    }
}

/// Lemma 1 for `(a, b)` and `(c, d)` with `ln|a|/ln|b| < ln|c|/ln|d|`:
/// every `(m, n)` with `m ln|c| + n ln|d| < ln M` satisfies
/// `m ln|a| + n ln|b| <= m ln|b| (ln|a|/ln|b| - ln|c|/ln|d|) + ln M ln|b| / ln|d|`,
/// and the cone maximum is below `escape_level` from the threshold on.
pub fn check_lemma1(
    ab: (&FieldElement, &FieldElement),
    cd: (&FieldElement, &FieldElement),
    opts: &LemmaOptions,
) -> LemmaCheck {
    let prec = opts.cone_bound.precision();
    let (la, lb) = (ab.0.log_mag().with_precision(prec), ab.1.log_mag().with_precision(prec));
    let (lc, ld) = (cd.0.log_mag().with_precision(prec), cd.1.log_mag().with_precision(prec));
    let name = format!("cone decay ({:.4}, {:.4}) vs ({:.4}, {:.4})", la.exp(), lb.exp(), lc.exp(), ld.exp());
    let fail = |detail: String, witness: Option<Vec<u64>>| LemmaCheck { lemma: 1, name: name.clone(), passed: false, detail, witness };
    if !(la.is_negative() && lc.is_negative() && lb.is_positive() && ld.is_positive()) {
        return fail(String::from("hypotheses |a|,|c| < 1 < |b|,|d| fail"), None);
    }
    let (ra, rc) = (&la / &lb, &lc / &ld);
    if ra >= rc {
        return fail(String::from("ln|a|/ln|b| is not below ln|c|/ln|d|"), None);
    }
    let ln_m = opts.cone_bound.ln();
    let slope = &lb * &(&ra - &rc);
    let offset = &(&ln_m * &lb) / &ld;
    // smallest m with slope m + offset <= escape_level
    let need = &(&opts.escape_level - &offset) / &slope;
    let threshold = need.floor_i128().map_or(u64::MAX, |v| u64::try_from(v.max(-1) + 1).unwrap_or(u64::MAX));
    let tol = &ExtReal::pow2(-(prec.bits() as i64) / 2, prec) * &ExtReal::one(prec).max(ln_m.abs());
    let mut count = 0u64;
    let mut worst_tail: Option<ExtReal> = None;
    for m in 0..=opts.cone_max {
        let mf = ExtReal::from_u64(m, prec);
        let (mc, ma) = (&mf * &lc, &mf * &la);
        // n < (ln M - m ln|c|) / ln|d|
        let n_hi = (&(&ln_m - &mc) / &ld).floor_i128().unwrap_or(-1);
        if n_hi < 0 {
            continue;
        }
        let top = (n_hi as u64).min(opts.cone_max);
        let bound = &(&slope * &mf) + &offset;
        for n in 0..=top {
            let nf = ExtReal::from_u64(n, prec);
            if &mc + &(&nf * &ld) >= ln_m {
                continue;
            }
            count += 1;
            let val = &ma + &(&nf * &lb);
            if val > &bound + &tol {
                return fail(format!("linear bound violated: {} > {}", val.to_string_digits(12), bound.to_string_digits(12)), Some(vec![m, n]));
            }
            if m >= threshold {
                worst_tail = Some(match worst_tail {
                    Some(w) => w.max(val),
                    None => val,
                });
            }
        }
    }
    if let Some(w) = &worst_tail {
        if *w >= opts.escape_level {
            return fail(format!("cone maximum {} beyond m = {threshold} is not below the escape level", w.to_string_digits(12)), Some(vec![threshold]));
        }
    }
    LemmaCheck {
        lemma: 1,
        name,
        passed: true,
        detail: format!(
            "{count} cone points; bound slope {}; escape below {} from m = {threshold}{}",
            slope.to_string_digits(8),
            opts.escape_level.to_string_digits(6),
            if worst_tail.is_some() { "" } else { " (beyond the enumeration box)" }
        ),
        witness: None,
    }
}

/// Lemma 2 at doubled precision: forward and inverse powers up to `depth`.
pub fn check_lemma2(a: &LowerTriangular, depth: u64) -> Result<LemmaCheck> {
    let cert = growth_lambda(a)?;
    let hp = a.precision().doubled();
    let ah = a.with_precision(hp);
    let lambda = cert.lambda.with_precision(hp);
    let n = ah.n();
    let m = ah.matrix();
    let inv = ah.inverse();
    let diag: Vec<ExtReal> = (0..n).map(|i| m.get(i, i).abs()).collect();
    let (mut fwd, mut bwd) = (m.clone(), inv.clone());
    let (mut dpow, mut dinv) = (diag.clone(), diag.iter().map(ExtReal::recip).collect::<Vec<_>>());
    for l in 1..=depth {
        if l > 1 {
            fwd = fwd.mul(m)?;
            bwd = bwd.mul(&inv)?;
            for i in 0..n {
                dpow[i] = &dpow[i] * &diag[i];
                dinv[i] = &dinv[i] / &diag[i];
            }
        }
        for i in 0..n {
            for j in 0..n {
                if fwd.get(i, j).abs() > &lambda * &dpow[i] {
                    return Ok(lemma2_fail(l, i, j, "forward", &lambda));
                }
                if bwd.get(i, j).abs() > &lambda * &dinv[j] {
                    return Ok(lemma2_fail(l, i, j, "inverse", &lambda));
                }
            }
        }
    }
    Ok(LemmaCheck {
        lemma: 2,
        name: String::from("growth bound"),
        passed: true,
        detail: format!("lambda = {} holds for l <= {depth}, forward and inverse", cert.lambda.to_string_digits(12)),
        witness: None,
    })
}

fn lemma2_fail(l: u64, i: usize, j: usize, dir: &str, lambda: &ExtReal) -> LemmaCheck {
    LemmaCheck {
        lemma: 2,
        name: String::from("growth bound"),
        passed: false,
        detail: format!("{dir} bound with lambda = {} fails", lambda.to_string_digits(12)),
        witness: Some(vec![l, i as u64, j as u64]),
    }
}

/// Lemma 3: the rate bound for `l <= depth`, and `limit_col = -(F - I)^{-1} H`
/// recomputed by Gauss-Jordan elimination, to within `tol`.
pub fn check_lemma3(a: &LowerTriangular, depth: u64, tol: &ExtReal) -> Result<Vec<LemmaCheck>> {
    let lim = normalized_inverse_limit(a)?;
    let n = a.n();
    let (field, prec) = (a.field(), a.precision());
    let mut out = Vec::new();

    let a1 = a.matrix().get(0, 0).clone();
    let inv = a.inverse();
    let mut m = Matrix::zeros(n, n, field, prec);
    for i in 0..n {
        for j in 0..n {
            m.set(i, j, &a1 * inv.get(i, j));
        }
    }
    let mut pw = m.clone();
    let mut rate_l = lim.rate.clone();
    let mut failure = None;
    let mut worst = ExtReal::zero(prec);
    for l in 1..=depth {
        if l > 1 {
            pw = pw.mul(&m)?;
            rate_l = &rate_l * &lim.rate;
        }
        let dev = pw.sub(&lim.full_limit).max_abs();
        let bound = &lim.constant * &rate_l;
        if dev > bound {
            failure = Some(l);
            break;
        }
        if bound.is_positive() {
            worst = worst.max(&dev / &bound);
        }
    }
    out.push(LemmaCheck {
        lemma: 3,
        name: String::from("convergence rate"),
        passed: failure.is_none(),
        detail: match failure {
            None => format!(
                "||(A_1 A^-1)^l - L||_max <= C r^l for l <= {depth} with C = {}, r = {}; largest ratio {}",
                lim.constant.to_string_digits(10),
                lim.rate.to_string_digits(10),
                worst.to_string_digits(6)
            ),
            Some(l) => format!("rate bound fails at l = {l}"),
        },
        witness: failure.map(|l| vec![l]),
    });

    if n > 1 {
        let f_minus_i = lim.f.sub(&Matrix::identity(n - 1, field, prec));
        let check = match f_minus_i.inverse() {
            None => LemmaCheck {
                lemma: 3,
                name: String::from("limit column"),
                passed: false,
                detail: String::from("F - I is singular"),
                witness: None,
            },
            Some(g) => {
                let col: Vec<Scalar> = g.mul_vec(&lim.h)?.iter().map(|v| -v).collect();
                let bad = col.iter().zip(&lim.limit_col).position(|(x, y)| (x - y).abs() > *tol);
                let full_bad = (1..n).find(|&i| (lim.full_limit.get(i, 0) - &col[i - 1]).abs() > *tol);
                LemmaCheck {
                    lemma: 3,
                    name: String::from("limit column"),
                    passed: bad.is_none() && full_bad.is_none(),
                    detail: format!("limit_col = -(F - I)^-1 H to within {}", tol.to_string_digits(4)),
                    witness: bad.or(full_bad.map(|i| i - 1)).map(|i| vec![i as u64]),
                }
            }
        };
        out.push(check);
    }
    Ok(out)
}

/// Pairs `(B_j / B_m, A_j / A_m)` for `j > m`, plus `(B_1, A_1)`.
pub fn ratio_set(sys: &SemigroupSystem) -> Vec<(FieldElement, FieldElement)> {
    let (a, b) = (sys.a(), sys.b());
    let mut out = vec![(b.entry(0).clone(), a.diag(0).clone())];
    for m in 0..sys.n() {
        for j in m + 1..sys.n() {
            out.push((b.entry(j).div(b.entry(m)), a.diag(j).div(a.diag(m))));
        }
    }
    out
}

/// Lemma 1 on every ordered couple of the ratio set, Lemmas 2 and 3 on `A`.
pub fn verify_lemmas(sys: &SemigroupSystem, opts: &LemmaOptions) -> Result<LemmaReport> {
    let prec = sys.precision();
    let mut checks = Vec::new();
    let set = ratio_set(sys);
    let key = |p: &(FieldElement, FieldElement)| p.0.log_mag() / p.1.log_mag();
    let mut order: Vec<usize> = (0..set.len()).collect();
    order.sort_by(|&i, &j| key(&set[i]).total_cmp(&key(&set[j])));
    for (x, &i) in order.iter().enumerate() {
        for &j in &order[x + 1..] {
            if key(&set[i]) < key(&set[j]) {
                checks.push(check_lemma1((&set[i].0, &set[i].1), (&set[j].0, &set[j].1), opts));
            }
        }
    }
    checks.push(check_lemma2(sys.a(), opts.depth)?);
    let tol = ExtReal::parse("1e-30", prec).expect("literal");
    checks.extend(check_lemma3(sys.a(), opts.depth, &tol)?);
    Ok(LemmaReport { checks })
}

/// Outcome of one steering target.
#[derive(Clone, Debug)]
pub enum TargetOutcome {
    Reached {
        result: SteeringResult,
        /// Error recomputed by `evaluate_word` at doubled precision.
        reverified: ExtReal,
    },
    Failed(String),
}

#[derive(Clone, Debug)]
pub struct DensitySummary {
    pub targets: usize,
    pub successes: usize,
    /// `successes / targets` in lowest terms.
    pub fraction: (u64, u64),
    pub max_error: Option<ExtReal>,
    pub max_exponent: u64,
    pub mean_stages: Option<(u64, u64)>,
    /// Indices and reasons of failed targets.
    pub failures: Vec<(usize, String)>,
}

/// Steers one target and re-verifies the word independently.
pub fn steer_target(sys: &SemigroupSystem, y: &[Scalar], eps: &ExtReal, budget: &SearchBudget) -> TargetOutcome {
    match synthesize_word(sys, y, eps, budget) {
        Ok(result) => {
            let hp = sys.precision().doubled();
            let p: Vec<Scalar> = sys.seed_scalars().iter().map(|v| v.with_precision(hp)).collect();
            match evaluate_word(sys, &result.word, &p) {
                Ok(x) => {
                    let err = x
                        .iter()
                        .zip(y)
                        .map(|(a, b)| (a - &b.with_precision(hp)).abs())
                        .fold(ExtReal::zero(hp), ExtReal::max);
                    if err < eps.with_precision(hp) {
                        TargetOutcome::Reached { result, reverified: err.with_precision(sys.precision()) }
                    } else {
                        TargetOutcome::Failed(format!("re-verification error {} exceeds eps", err.to_string_digits(6)))
                    }
                }
                Err(e) => TargetOutcome::Failed(format!("{e}")),
            }
        }
        Err(e) => TargetOutcome::Failed(format!("{e}")),
    }
}

/// Aggregates per-target outcomes (in target order).
pub fn summarize(outcomes: &[TargetOutcome]) -> DensitySummary {
    let mut successes = 0usize;
    let mut max_error: Option<ExtReal> = None;
    let mut max_exponent = 0u64;
    let mut stages = 0u64;
    let mut failures = Vec::new();
    for (i, o) in outcomes.iter().enumerate() {
        match o {
            TargetOutcome::Reached { result, reverified } => {
                successes += 1;
                max_error = Some(match max_error {
                    Some(m) => m.max(reverified.clone()),
                    None => reverified.clone(),
                });
                max_exponent = max_exponent.max(result.word.max_exponent());
                stages += result.word.len() as u64;
            }
            TargetOutcome::Failed(why) => failures.push((i, why.clone())),
        }
    }
    let total = outcomes.len() as u64;
    let g = num_integer::gcd(successes as u64, total).max(1);
    let mean_stages = (successes > 0).then(|| {
        let g2 = num_integer::gcd(stages, successes as u64).max(1);
        (stages / g2, successes as u64 / g2)
    });
    DensitySummary {
        targets: outcomes.len(),
        successes,
        fraction: (successes as u64 / g, total.max(1) / g),
        max_error,
        max_exponent,
        mean_stages,
        failures,
    }
}

/// Steers every target in order.
pub fn density_experiment(
    sys: &SemigroupSystem,
    targets: &[Vec<Scalar>],
    eps: &ExtReal,
    budget: &SearchBudget,
) -> (Vec<TargetOutcome>, DensitySummary) {
    let outcomes: Vec<TargetOutcome> = targets.iter().map(|y| steer_target(sys, y, eps, budget)).collect();
    let summary = summarize(&outcomes);
    (outcomes, summary)
}
