//! Dense, lower-triangular and diagonal matrices over `K`, plus the growth
//! bound, the normalized inverse limit, condition (ii) and the `O^{k,l}`
//! blocks used by the steering induction.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};
use crate::ext::{ExtReal, Precision};
use crate::field::{Field, FieldElement, Scalar};

/// Sum with addends sorted by decreasing magnitude.
pub fn sum_sorted(mut terms: Vec<Scalar>, field: Field, prec: Precision) -> Scalar {
    terms.retain(|t| !t.is_zero());
    terms.sort_by(|x, y| y.log2_abs_f64().partial_cmp(&x.log2_abs_f64()).unwrap_or(Ordering::Equal));
    terms.iter().fold(Scalar::zero(field, prec), |acc, t| &acc + t)
}

/// `max_i |x_i|`.
pub fn sup_norm(x: &[Scalar]) -> ExtReal {
    let prec = x.first().map(Scalar::precision).unwrap_or_default();
    x.iter().map(Scalar::abs).fold(ExtReal::zero(prec), ExtReal::max)
}

/// `sum_i |x_i|`.
pub fn one_norm(x: &[Scalar]) -> ExtReal {
    let prec = x.first().map(Scalar::precision).unwrap_or_default();
    x.iter().fold(ExtReal::zero(prec), |acc, v| &acc + &v.abs())
}

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    field: Field,
    prec: Precision,
    data: Vec<Scalar>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize, field: Field, prec: Precision) -> Self {
        Matrix { rows, cols, field, prec, data: vec![Scalar::zero(field, prec); rows * cols] }
    }

    pub fn identity(n: usize, field: Field, prec: Precision) -> Self {
        let mut m = Self::zeros(n, n, field, prec);
        for i in 0..n {
            m.set(i, i, Scalar::one(field, prec));
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Scalar>>, field: Field, prec: Precision) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::DimensionMismatch { expected: c, got: row.len() });
            }
            data.extend(row.into_iter().map(|x| x.in_field(field).with_precision(prec)));
        }
        Ok(Matrix { rows: r, cols: c, field, prec, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn precision(&self) -> Precision {
        self.prec
    }

    pub fn get(&self, i: usize, j: usize) -> &Scalar {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Scalar) {
        self.data[i * self.cols + j] = v.in_field(self.field);
    }

    pub fn row(&self, i: usize) -> &[Scalar] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<Scalar> {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn with_precision(&self, prec: Precision) -> Self {
        Matrix { prec, data: self.data.iter().map(|x| x.with_precision(prec)).collect(), ..self.clone() }
    }

    pub fn in_field(&self, field: Field) -> Self {
        Matrix { field, data: self.data.iter().map(|x| x.in_field(field)).collect(), ..self.clone() }
    }

    pub fn mul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch { expected: self.cols, got: rhs.rows });
        }
        let mut out = Matrix::zeros(self.rows, rhs.cols, self.field, self.prec);
        for i in 0..self.rows {
            for j in 0..rhs.cols {
                let terms = (0..self.cols)
                    .filter(|&t| !self.get(i, t).is_zero() && !rhs.get(t, j).is_zero())
                    .map(|t| self.get(i, t) * rhs.get(t, j))
                    .collect();
                out.set(i, j, sum_sorted(terms, self.field, self.prec));
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, x: &[Scalar]) -> Result<Vec<Scalar>> {
        if self.cols != x.len() {
            return Err(Error::DimensionMismatch { expected: self.cols, got: x.len() });
        }
        Ok((0..self.rows)
            .map(|i| {
                let terms = (0..self.cols)
                    .filter(|&t| !self.get(i, t).is_zero() && !x[t].is_zero())
                    .map(|t| self.get(i, t) * &x[t])
                    .collect();
                sum_sorted(terms, self.field, self.prec)
            })
            .collect())
    }

    pub fn sub(&self, rhs: &Matrix) -> Matrix {
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect();
        Matrix { data, ..self.clone() }
    }

    /// Entries `[r0, r1) x [c0, c1)`.
    pub fn block(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> Matrix {
        let mut out = Matrix::zeros(r1 - r0, c1 - c0, self.field, self.prec);
        for i in r0..r1 {
            for j in c0..c1 {
                out.set(i - r0, j - c0, self.get(i, j).clone());
            }
        }
        out
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> ExtReal {
        self.data.iter().map(Scalar::abs).fold(ExtReal::zero(self.prec), ExtReal::max)
    }

    /// Operator infinity norm (max absolute row sum).
    pub fn inf_norm(&self) -> ExtReal {
        (0..self.rows).map(|i| one_norm(self.row(i))).fold(ExtReal::zero(self.prec), ExtReal::max)
    }

    /// `self^l` by binary powering.
    pub fn pow(&self, mut l: u64) -> Matrix {
        let mut acc = Matrix::identity(self.rows, self.field, self.prec);
        let mut base = self.clone();
        while l > 0 {
            if l & 1 == 1 {
                acc = acc.mul(&base).expect("square");
            }
            l >>= 1;
            if l > 0 {
                base = base.mul(&base).expect("square");
            }
        }
        acc
    }

    /// Inverse by Gauss-Jordan elimination with partial pivoting; `None` when
    /// a pivot vanishes.
    pub fn inverse(&self) -> Option<Matrix> {
        let n = self.rows;
        if n != self.cols {
            return None;
        }
        let mut a = self.clone();
        let mut inv = Matrix::identity(n, self.field, self.prec);
        for c in 0..n {
            let p = (c..n).max_by(|&x, &y| a.get(x, c).abs().total_cmp(&a.get(y, c).abs()))?;
            if a.get(p, c).is_zero() {
                return None;
            }
            if p != c {
                for j in 0..n {
                    a.data.swap(p * n + j, c * n + j);
                    inv.data.swap(p * n + j, c * n + j);
                }
            }
            let piv = a.get(c, c).recip();
            for j in 0..n {
                a.set(c, j, a.get(c, j) * &piv);
                inv.set(c, j, inv.get(c, j) * &piv);
            }
            for r in 0..n {
                if r == c || a.get(r, c).is_zero() {
                    continue;
                }
                let f = a.get(r, c).clone();
                for j in 0..n {
                    a.set(r, j, a.get(r, j) - &(&f * a.get(c, j)));
                    inv.set(r, j, inv.get(r, j) - &(&f * inv.get(c, j)));
                }
            }
        }
        Some(inv)
    }

    pub fn is_lower_triangular(&self) -> bool {
        (0..self.rows).all(|i| (i + 1..self.cols).all(|j| self.get(i, j).is_zero()))
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.rows).all(|i| (0..self.cols).all(|j| i == j || self.get(i, j).is_zero()))
    }
}

/// Something that can be raised to a power and applied to a vector.
pub trait PowApply {
    fn dim(&self) -> usize;
    /// `M^l x`.
    fn pow_apply(&self, l: u64, x: &[Scalar]) -> Result<Vec<Scalar>>;
}

/// Applies `a^l` to `x`. `l = 0` returns `x`.
pub fn mat_pow_apply<M: PowApply + ?Sized>(a: &M, l: u64, x: &[Scalar]) -> Result<Vec<Scalar>> {
    a.pow_apply(l, x)
}

fn modulus_cmp(x: &FieldElement, y: &FieldElement) -> Ordering {
    match (x.exact_modulus(), y.exact_modulus()) {
        (Some(a), Some(b)) => a.cmp(b),
        _ => x.log_mag().total_cmp(y.log_mag()),
    }
}

/// Lower-triangular matrix; entries are kept in polar form so that exact
/// values can be re-expanded at any precision.
#[derive(Clone, Debug)]
pub struct LowerTriangular {
    entries: Vec<Vec<FieldElement>>,
    m: Matrix,
}

impl LowerTriangular {
    /// `rows[i]` holds the full row `i`; entries above the diagonal must be
    /// zero and diagonal entries nonzero.
    pub fn new(rows: Vec<Vec<FieldElement>>) -> Result<Self> {
        let n = rows.len();
        let field = if rows.iter().flatten().any(|x| x.field() == Field::Complex) {
            Field::Complex
        } else {
            Field::Real
        };
        let prec = rows.iter().flatten().map(FieldElement::precision).max().unwrap_or_default();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: row.len() });
            }
            if row[i].is_zero() {
                return Err(Error::InvalidArgument(format!("diagonal entry {} is zero", i + 1)));
            }
            if row[i + 1..].iter().any(|x| !x.is_zero()) {
                return Err(Error::InvalidArgument(format!("row {} has entries above the diagonal", i + 1)));
            }
        }
        let entries: Vec<Vec<FieldElement>> =
            rows.into_iter().map(|r| r.into_iter().map(|x| x.in_field(field)).collect()).collect();
        let m = Matrix::from_rows(
            entries.iter().map(|r| r.iter().map(|x| x.to_scalar_at(prec)).collect()).collect(),
            field,
            prec,
        )?;
        Ok(LowerTriangular { entries, m })
    }

    pub fn from_matrix(m: &Matrix) -> Result<Self> {
        if m.rows() != m.cols() {
            return Err(Error::DimensionMismatch { expected: m.rows(), got: m.cols() });
        }
        Self::new((0..m.rows()).map(|i| m.row(i).iter().map(FieldElement::from_scalar).collect()).collect())
    }

    pub fn n(&self) -> usize {
        self.entries.len()
    }

    pub fn field(&self) -> Field {
        self.m.field()
    }

    pub fn precision(&self) -> Precision {
        self.m.precision()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.m
    }

    pub fn entry(&self, i: usize, j: usize) -> &FieldElement {
        &self.entries[i][j]
    }

    /// Diagonal entry `A_{i+1}` (zero-based `i`).
    pub fn diag(&self, i: usize) -> &FieldElement {
        &self.entries[i][i]
    }

    pub fn with_precision(&self, prec: Precision) -> Self {
        let rows = self.entries.iter().map(|r| r.iter().map(|x| x.with_precision(prec)).collect()).collect();
        Self::new(rows).expect("already validated")
    }

    /// Principal block on indices `[r0, r1)`.
    pub fn sub_block(&self, r0: usize, r1: usize) -> Self {
        let rows = (r0..r1).map(|i| self.entries[i][r0..r1].to_vec()).collect();
        Self::new(rows).expect("principal blocks stay lower triangular")
    }

    /// `0 < |A_1| < ... < |A_n|`, decided exactly when possible.
    pub fn check_spectral_order(&self) -> Result<()> {
        for i in 1..self.n() {
            if modulus_cmp(self.diag(i - 1), self.diag(i)) != Ordering::Less {
                return Err(Error::SpectralOrderViolation { index: i + 1 });
            }
        }
        Ok(())
    }

    /// `A^{-1}` by forward substitution.
    pub fn inverse(&self) -> Matrix {
        let n = self.n();
        let (field, prec) = (self.field(), self.precision());
        let inv_diag: Vec<Scalar> = (0..n).map(|i| self.m.get(i, i).recip()).collect();
        let mut out = Matrix::zeros(n, n, field, prec);
        for j in 0..n {
            out.set(j, j, inv_diag[j].clone());
            for i in j + 1..n {
                let terms = (j..i).map(|t| -&(self.m.get(i, t) * out.get(t, j))).collect();
                out.set(i, j, &sum_sorted(terms, field, prec) * &inv_diag[i]);
            }
        }
        out
    }

    /// Applies `A^{-l}` to `x`.
    pub fn inv_pow_apply(&self, l: u64, x: &[Scalar]) -> Result<Vec<Scalar>> {
        if x.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), got: x.len() });
        }
        pow_apply_dense(&self.inverse(), l, x)
    }
}

fn pow_apply_dense(m: &Matrix, mut l: u64, x: &[Scalar]) -> Result<Vec<Scalar>> {
    let mut v = x.to_vec();
    let mut base = m.clone();
    while l > 0 {
        if l & 1 == 1 {
            v = base.mul_vec(&v)?;
        }
        l >>= 1;
        if l > 0 {
            base = base.mul(&base)?;
        }
    }
    Ok(v)
}

impl PowApply for LowerTriangular {
    fn dim(&self) -> usize {
        self.n()
    }

    fn pow_apply(&self, l: u64, x: &[Scalar]) -> Result<Vec<Scalar>> {
        if x.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), got: x.len() });
        }
        pow_apply_dense(&self.m, l, x)
    }
}

/// Diagonal matrix with nonzero entries.
#[derive(Clone, Debug)]
pub struct Diagonal {
    entries: Vec<FieldElement>,
    field: Field,
}

impl Diagonal {
    pub fn new(entries: Vec<FieldElement>) -> Result<Self> {
        if let Some(i) = entries.iter().position(FieldElement::is_zero) {
            return Err(Error::InvalidArgument(format!("diagonal entry {} is zero", i + 1)));
        }
        let field = if entries.iter().any(|x| x.field() == Field::Complex) {
            Field::Complex
        } else {
            Field::Real
        };
        let entries = entries.into_iter().map(|x| x.in_field(field)).collect();
        Ok(Diagonal { entries, field })
    }

    pub fn n(&self) -> usize {
        self.entries.len()
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn precision(&self) -> Precision {
        self.entries.iter().map(FieldElement::precision).max().unwrap_or_default()
    }

    /// `B_{i+1}` (zero-based `i`).
    pub fn entry(&self, i: usize) -> &FieldElement {
        &self.entries[i]
    }

    pub fn entries(&self) -> &[FieldElement] {
        &self.entries
    }

    pub fn with_precision(&self, prec: Precision) -> Self {
        Diagonal { entries: self.entries.iter().map(|x| x.with_precision(prec)).collect(), field: self.field }
    }

    pub fn to_matrix(&self) -> Matrix {
        let prec = self.precision();
        let mut m = Matrix::zeros(self.n(), self.n(), self.field, prec);
        for (i, x) in self.entries.iter().enumerate() {
            m.set(i, i, x.to_scalar_at(prec));
        }
        m
    }

    /// `B_i^k` for every `i`, expanded from the polar form.
    pub fn powers(&self, k: u64, prec: Precision) -> Vec<Scalar> {
        self.entries.iter().map(|x| x.powi(k).to_scalar_at(prec)).collect()
    }
}

impl PowApply for Diagonal {
    fn dim(&self) -> usize {
        self.n()
    }

    fn pow_apply(&self, k: u64, x: &[Scalar]) -> Result<Vec<Scalar>> {
        if x.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), got: x.len() });
        }
        if k == 0 {
            return Ok(x.to_vec());
        }
        let prec = x.first().map(Scalar::precision).unwrap_or_else(|| self.precision());
        Ok(self.powers(k, prec).iter().zip(x).map(|(b, v)| b * &v.in_field(self.field)).collect())
    }
}

/// One step of the growth-bound recursion, for the trailing block starting
/// at `start` (zero-based).
#[derive(Clone, Debug)]
pub struct LambdaStep {
    pub start: usize,
    pub lambda_d: ExtReal,
    /// `b = sum_{k >= 2} |A_{k1}|` of the block.
    pub b: ExtReal,
    /// `b lambda_D / (|A_2| - |A_1|)`.
    pub forward: ExtReal,
    /// `lambda_D sum_t |(D^{-1} C)_t| |A_2| / (|A_2| - |A_1|)`.
    pub inverse: ExtReal,
    pub lambda: ExtReal,
}

/// `lambda` with `|(A^l)_{ij}| <= lambda |A_i|^l` and
/// `|(A^{-l})_{ij}| <= lambda |A_j|^{-l}` for all `l >= 1`.
#[derive(Clone, Debug)]
pub struct BoundCertificate {
    pub lambda: ExtReal,
    /// Innermost block first.
    pub trace: Vec<LambdaStep>,
}

/// Growth bound by induction over trailing principal blocks. The forward
/// term is the textbook recursion; the inverse term comes from the same
/// argument applied to `A^{-1} = [[1/A_1, 0], [-D^{-1}C/A_1, D^{-1}]]`, and
/// the larger of the two is kept.
pub fn growth_lambda(a: &LowerTriangular) -> Result<BoundCertificate> {
    a.check_spectral_order()?;
    let n = a.n();
    let prec = a.precision();
    let one = ExtReal::one(prec);
    let mut lambda = one.clone();
    let mut trace = Vec::new();
    for start in (0..n.saturating_sub(1)).rev() {
        let lambda_d = lambda.clone();
        let m = a.matrix();
        let a1 = m.get(start, start).abs();
        let a2 = m.get(start + 1, start + 1).abs();
        let gap = &a2 - &a1;
        let c: Vec<Scalar> = (start + 1..n).map(|k| m.get(k, start).clone()).collect();
        let b = one_norm(&c);
        let forward = &(&b * &lambda_d) / &gap;
        let d_inv_c = a.sub_block(start + 1, n).inverse().mul_vec(&c)?;
        let inverse = &(&(&lambda_d * &one_norm(&d_inv_c)) * &a2) / &gap;
        lambda = one.clone().max(lambda_d.clone()).max(forward.clone()).max(inverse.clone());
        trace.push(LambdaStep { start, lambda_d, b, forward, inverse, lambda: lambda.clone() });
    }
    // rounding guard
    let guard = &one + &ExtReal::pow2(-(prec.bits() as i64) / 2, prec);
    Ok(BoundCertificate { lambda: &lambda * &guard, trace })
}

/// Limit of `(A_1 A^{-1})^l`.
#[derive(Clone, Debug)]
pub struct LimitMatrix {
    /// Lower-right `(n-1) x (n-1)` block of `A_1 A^{-1}`.
    pub f: Matrix,
    /// Lower-left column of `A_1 A^{-1}`.
    pub h: Vec<Scalar>,
    /// `(I - F)^{-1} H`.
    pub limit_col: Vec<Scalar>,
    /// First column `(1, limit_col)`, zeros elsewhere.
    pub full_limit: Matrix,
    /// `|A_1 / A_2|` (zero when `n = 1`).
    pub rate: ExtReal,
    /// `C` with `||(A_1 A^{-1})^l - full_limit||_max <= C rate^l`.
    pub constant: ExtReal,
}

pub fn normalized_inverse_limit(a: &LowerTriangular) -> Result<LimitMatrix> {
    let cert = growth_lambda(a)?;
    let n = a.n();
    let (field, prec) = (a.field(), a.precision());
    let a1 = a.matrix().get(0, 0).clone();
    let inv = a.inverse();
    let mut m = Matrix::zeros(n, n, field, prec);
    for i in 0..n {
        for j in 0..n {
            m.set(i, j, &a1 * inv.get(i, j));
        }
    }
    let f = m.block(1, n, 1, n);
    let h: Vec<Scalar> = (1..n).map(|i| m.get(i, 0).clone()).collect();
    let i_minus_f = Matrix::identity(n - 1, field, prec).sub(&f);
    let limit_col = if n > 1 {
        LowerTriangular::from_matrix(&i_minus_f)?.inverse().mul_vec(&h)?
    } else {
        Vec::new()
    };
    let mut full_limit = Matrix::zeros(n, n, field, prec);
    full_limit.set(0, 0, Scalar::one(field, prec));
    for (i, v) in limit_col.iter().enumerate() {
        full_limit.set(i + 1, 0, v.clone());
    }
    let rate = if n > 1 { (&a1 / a.matrix().get(1, 1)).abs() } else { ExtReal::zero(prec) };
    let constant = &cert.lambda * &ExtReal::one(prec).max(one_norm(&limit_col));
    Ok(LimitMatrix { f, h, limit_col, full_limit, rate, constant })
}

/// First column of `(A_1^{-1} A - I + Delta)^{-1}` and whether every entry
/// exceeds `tau_zero` in modulus.
pub fn condition_ii(a: &LowerTriangular, tau_zero: &ExtReal) -> (Vec<Scalar>, bool) {
    let n = a.n();
    let (field, prec) = (a.field(), a.precision());
    let a1_inv = a.matrix().get(0, 0).recip();
    let mut m = Matrix::zeros(n, n, field, prec);
    for i in 0..n {
        for j in 0..n {
            let mut v = &a1_inv * a.matrix().get(i, j);
            if i == j && i > 0 {
                v = &v - &Scalar::one(field, prec);
            }
            if i == 0 && j == 0 {
                v = Scalar::one(field, prec);
            }
            m.set(i, j, v);
        }
    }
    let col = match m.inverse() {
        Some(inv) => inv.column(0),
        None => return (vec![Scalar::zero(field, prec); n], false),
    };
    let ok = col.iter().all(|x| x.abs() > *tau_zero);
    (col, ok)
}

/// `(n - s) x s` block `O^{k,l}` of `B^k A^l [I_s; 0] S^{-l} U^{-k}`, by
/// direct evaluation. `s` is 1-based as in the induction.
pub fn o_matrix(a: &LowerTriangular, b: &Diagonal, s: usize, k: u64, l: u64) -> Result<Matrix> {
    let n = a.n();
    if s == 0 || s >= n {
        return Err(Error::StageOutOfRange { stage: s, dim: n });
    }
    if b.n() != n {
        return Err(Error::DimensionMismatch { expected: n, got: b.n() });
    }
    let field = if b.field() == Field::Complex { Field::Complex } else { a.field() };
    let prec = a.precision();
    let al = a.matrix().pow(l);
    let s_inv_l = a.sub_block(0, s).inverse().pow(l);
    let mut out = Matrix::zeros(n - s, s, field, prec);
    for j in s..n {
        for m in 0..s {
            let terms = (0..s).map(|t| al.get(j, t) * s_inv_l.get(t, m)).collect();
            let core = sum_sorted(terms, a.field(), prec).in_field(field);
            let ratio = b.entry(j).div(b.entry(m)).powi(k).to_scalar_at(prec);
            out.set(j - s, m, &ratio * &core);
        }
    }
    Ok(out)
}

/// Closed form of the `(1,1)` entry:
/// `-(B_{s+1}/B_1)^k (A_{s+1}/A_1)^l ((A_1 A^{-1})^l)_{s+1, 1}`.
pub fn o11_closed_form(a: &LowerTriangular, b: &Diagonal, s: usize, k: u64, l: u64) -> Result<Scalar> {
    let n = a.n();
    if s == 0 || s >= n {
        return Err(Error::StageOutOfRange { stage: s, dim: n });
    }
    let prec = a.precision();
    let field = if b.field() == Field::Complex { Field::Complex } else { a.field() };
    let a1 = a.matrix().get(0, 0).clone();
    let inv = a.inverse();
    let mut m = Matrix::zeros(n, n, a.field(), prec);
    for i in 0..n {
        for j in 0..n {
            m.set(i, j, &a1 * inv.get(i, j));
        }
    }
    let ml = m.pow(l);
    let bk = b.entry(s).div(b.entry(0)).powi(k).to_scalar_at(prec);
    let al = a.diag(s).div(a.diag(0)).powi(l).to_scalar_at(prec);
    let v = &(&bk * &al.in_field(field)) * &ml.get(s, 0).in_field(field);
    Ok(-&v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use num_rational::BigRational;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn p() -> Precision {
        Precision::default()
    }

    fn fe(n: i64, d: i64) -> FieldElement {
        FieldElement::real_ratio(&BigRational::new(BigInt::from(n), BigInt::from(d)), p())
    }

    fn lower(rows: &[&[i64]]) -> LowerTriangular {
        LowerTriangular::new(rows.iter().map(|r| r.iter().map(|&x| fe(x, 1)).collect()).collect()).unwrap()
    }

    fn real_example(n: usize) -> (LowerTriangular, Diagonal) {
        let rows = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if i == j {
                            fe(3i64.pow(i as u32 + 1), 1)
                        } else if j == 0 {
                            fe(3, 1)
                        } else {
                            fe(0, 1)
                        }
                    })
                    .collect()
            })
            .collect();
        let b = (1..=n as u32)
            .map(|k| if k == 1 { fe(-1, 2) } else { fe(1, 1i64 << (k * k)) })
            .collect();
        (LowerTriangular::new(rows).unwrap(), Diagonal::new(b).unwrap())
    }

    fn f(x: &Scalar) -> f64 {
        x.re().to_f64()
    }

    fn close(x: &Scalar, y: f64) -> bool {
        (x.re().to_f64() - y).abs() < 1e-30_f64.max(y.abs() * 1e-15)
    }

    #[test]
    fn pow_apply_examples() {
        let a = lower(&[&[3, 0], &[3, 9]]);
        let x = vec![Scalar::from_i64(1, p()), Scalar::from_i64(1, p())];
        assert_eq!(mat_pow_apply(&a, 0, &x).unwrap(), x);
        let e1 = vec![Scalar::from_i64(1, p()), Scalar::from_i64(0, p())];
        let y = mat_pow_apply(&a, 1, &e1).unwrap();
        assert!(close(&y[0], 3.0) && close(&y[1], 3.0));
        let b = Diagonal::new(vec![fe(-1, 2), fe(1, 16)]).unwrap();
        let y = mat_pow_apply(&b, 2, &x).unwrap();
        assert!(close(&y[0], 0.25) && close(&y[1], 1.0 / 256.0));
        let y = mat_pow_apply(&a, 2, &e1).unwrap();
        assert!(close(&y[0], 9.0) && close(&y[1], 36.0));
        assert!(matches!(mat_pow_apply(&a, 1, &x[..1]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn lambda_examples() {
        assert_eq!(growth_lambda(&lower(&[&[3]])).unwrap().lambda.to_f64(), 1.0);
        let c = growth_lambda(&lower(&[&[3, 0], &[3, 9]])).unwrap();
        assert_eq!(c.lambda.to_f64(), 1.0);
        assert!((c.trace[0].forward.to_f64() - 0.5).abs() < 1e-30);
        let (a, _) = real_example(3);
        let c = growth_lambda(&a).unwrap();
        let hp = p().doubled();
        let ah = a.with_precision(hp);
        let mut pw = Matrix::identity(3, Field::Real, hp);
        for l in 1..=40u64 {
            pw = pw.mul(ah.matrix()).unwrap();
            let bound = &c.lambda * &ExtReal::from_i64(27, hp).powi(l);
            assert!(pw.get(2, 0).abs() <= bound);
        }
        assert!(matches!(
            growth_lambda(&lower(&[&[9, 0], &[1, 3]])),
            Err(Error::SpectralOrderViolation { index: 2 })
        ));
    }

    #[test]
    fn lemma2_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let n = rng.gen_range(2..=4);
            let mut diag: Vec<f64> = (0..n).map(|_| rng.gen_range(0.3..4.0)).collect();
            diag.sort_by(|x, y| x.partial_cmp(y).unwrap());
            let rows = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| match j.cmp(&i) {
                            Ordering::Equal => FieldElement::from_scalar(&Scalar::from_f64(
                                diag[i] * if rng.gen() { 1.0 } else { -1.0 },
                                p(),
                            )),
                            Ordering::Less => FieldElement::from_scalar(&Scalar::from_f64(rng.gen_range(-2.0..2.0), p())),
                            Ordering::Greater => fe(0, 1),
                        })
                        .collect()
                })
                .collect();
            let a = LowerTriangular::new(rows).unwrap();
            if a.check_spectral_order().is_err() {
                continue;
            }
            let lam = growth_lambda(&a).unwrap().lambda;
            let inv = a.inverse();
            let (mut fw, mut bw) = (a.matrix().clone(), inv.clone());
            for l in 1..=30u64 {
                for i in 0..n {
                    for j in 0..n {
                        let ai = a.matrix().get(i, i).abs().powi(l);
                        let aj = a.matrix().get(j, j).abs().powi(l);
                        assert!(fw.get(i, j).abs() <= &lam * &ai);
                        assert!(bw.get(i, j).abs() <= &lam / &aj, "l={l} i={i} j={j}");
                    }
                }
                fw = fw.mul(a.matrix()).unwrap();
                bw = bw.mul(&inv).unwrap();
            }
        }
    }

    #[test]
    fn limit_examples() {
        let lim = normalized_inverse_limit(&lower(&[&[3, 0], &[3, 9]])).unwrap();
        assert!(close(lim.f.get(0, 0), 1.0 / 3.0));
        assert!(close(&lim.h[0], -1.0 / 3.0));
        assert!(close(&lim.limit_col[0], -0.5));
        let (a, _) = real_example(3);
        let lim = normalized_inverse_limit(&a).unwrap();
        assert!(close(&lim.limit_col[0], -0.5));
        assert!(close(&lim.limit_col[1], -0.125));
        let lim = normalized_inverse_limit(&lower(&[&[5]])).unwrap();
        assert_eq!(lim.full_limit.rows(), 1);
        assert!(close(lim.full_limit.get(0, 0), 1.0));
        assert!(lim.limit_col.is_empty());
    }

    #[test]
    fn limit_converges_at_the_stated_rate() {
        let (a, _) = real_example(4);
        let lim = normalized_inverse_limit(&a).unwrap();
        let a1 = a.matrix().get(0, 0).clone();
        let inv = a.inverse();
        let mut m = Matrix::zeros(4, 4, Field::Real, p());
        for i in 0..4 {
            for j in 0..4 {
                m.set(i, j, &a1 * inv.get(i, j));
            }
        }
        let mut pw = m.clone();
        for l in 1..=60u64 {
            let dev = pw.sub(&lim.full_limit).max_abs();
            assert!(dev <= &lim.constant * &lim.rate.powi(l), "l = {l}");
            pw = pw.mul(&m).unwrap();
        }
    }

    #[test]
    fn condition_ii_examples() {
        let tau = ExtReal::parse("1e-40", p()).unwrap();
        let (a, _) = real_example(3);
        let (col, ok) = condition_ii(&a, &tau);
        assert!(ok);
        assert!(close(&col[0], 1.0) && close(&col[1], -0.5) && close(&col[2], -0.125));
        let (col, ok) = condition_ii(&lower(&[&[7]]), &tau);
        assert!(ok && close(&col[0], 1.0));
        let (col, ok) = condition_ii(&lower(&[&[2, 0], &[0, 4]]), &tau);
        assert!(!ok);
        assert!(close(&col[0], 1.0) && col[1].is_zero());
        // generic shape: nonzero diagonal and first column only
        let (_, ok) = condition_ii(&lower(&[&[2, 0, 0], &[-5, 3, 0], &[1, 0, 7]]), &tau);
        assert!(ok);
        // matches -(F - I)^{-1} H
        let lim = normalized_inverse_limit(&a).unwrap();
        for (x, y) in col_of(&a).iter().zip(&lim.limit_col) {
            assert!((x - y).abs() < ExtReal::parse("1e-30", p()).unwrap());
        }
    }

    fn col_of(a: &LowerTriangular) -> Vec<Scalar> {
        condition_ii(a, &ExtReal::zero(p())).0[1..].to_vec()
    }

    #[test]
    fn o_matrix_examples() {
        let (a, b) = real_example(2);
        let o = o_matrix(&a, &b, 1, 0, 0).unwrap();
        assert!(o.get(0, 0).is_zero());
        let o = o_matrix(&a, &b, 1, 1, 1).unwrap();
        assert!(close(o.get(0, 0), -0.125), "{}", f(o.get(0, 0)));
        let o = o_matrix(&a, &b, 1, 2, 1).unwrap();
        assert!(close(o.get(0, 0), 1.0 / 64.0));
        assert!(matches!(o_matrix(&a, &b, 2, 1, 1), Err(Error::StageOutOfRange { .. })));
    }

    #[test]
    fn o11_matches_closed_form() {
        let (a, b) = real_example(3);
        for s in 1..3 {
            for k in 0..=20u64 {
                for l in (0..=20u64).step_by(4) {
                    let d = o_matrix(&a, &b, s, k, l).unwrap();
                    let c = o11_closed_form(&a, &b, s, k, l).unwrap();
                    let err = (d.get(0, 0) - &c).abs();
                    let scale = c.abs().max(ExtReal::pow2(-300, p()));
                    assert!(err <= &scale * &ExtReal::parse("1e-100", p()).unwrap(), "s={s} k={k} l={l}");
                }
            }
        }
    }
}
