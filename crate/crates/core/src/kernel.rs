//! Matrices over GF(q) and the analysis of polarization kernels.

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::gf::{FieldCtx, FieldElem, Subfield};

/// Cap on `q^ell` for brute-force partial distances.
pub const PARTIAL_DISTANCE_BUDGET: u64 = 1 << 24;

/// Dense row-major matrix over a finite field.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Matrix {
    field: FieldCtx,
    rows: usize,
    cols: usize,
    data: Vec<FieldElem>,
}

impl Matrix {
    pub fn new(field: &FieldCtx, rows: usize, cols: usize, data: Vec<FieldElem>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(e) = data.iter().find(|e| e.index() >= field.q()) {
            return Err(Error::BadParameter(format!(
                "entry {e} is not an element of GF({})",
                field.q()
            )));
        }
        Ok(Self {
            field: field.clone(),
            rows,
            cols,
            data,
        })
    }

    /// Builds a matrix from rows of integer encodings.
    pub fn from_rows<R: AsRef<[u32]>>(field: &FieldCtx, rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        if rows.iter().any(|r| r.as_ref().len() != cols) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        let data = rows
            .iter()
            .flat_map(|r| r.as_ref().iter().map(|&v| FieldElem(v)))
            .collect();
        Self::new(field, rows.len(), cols, data)
    }

    pub fn zeros(field: &FieldCtx, rows: usize, cols: usize) -> Self {
        Self {
            field: field.clone(),
            rows,
            cols,
            data: vec![FieldElem::ZERO; rows * cols],
        }
    }

    pub fn identity(field: &FieldCtx, n: usize) -> Self {
        let mut m = Self::zeros(field, n, n);
        for i in 0..n {
            m.set(i, i, FieldElem::ONE);
        }
        m
    }

    /// Permutation matrix with a one at `(perm[j], j)`, so `A * P` places
    /// column `perm[j]` of `A` at position `j`.
    pub fn permutation(field: &FieldCtx, perm: &[usize]) -> Self {
        let mut m = Self::zeros(field, perm.len(), perm.len());
        for (j, &c) in perm.iter().enumerate() {
            m.set(c, j, FieldElem::ONE);
        }
        m
    }

    /// Uniformly random invertible square matrix (rejection sampling).
    pub fn random_invertible<R: Rng + ?Sized>(field: &FieldCtx, n: usize, rng: &mut R) -> Self {
        loop {
            let data = (0..n * n)
                .map(|_| FieldElem(rng.random_range(0..field.q() as u32)))
                .collect();
            let m = Self {
                field: field.clone(),
                rows: n,
                cols: n,
                data,
            };
            if m.rank() == n {
                return m;
            }
        }
    }

    /// Random invertible upper-triangular matrix.
    pub fn random_upper_triangular<R: Rng + ?Sized>(
        field: &FieldCtx,
        n: usize,
        rng: &mut R,
    ) -> Self {
        let q = field.q() as u32;
        let mut m = Self::zeros(field, n, n);
        for i in 0..n {
            m.set(i, i, FieldElem(rng.random_range(1..q)));
            for j in i + 1..n {
                m.set(i, j, FieldElem(rng.random_range(0..q)));
            }
        }
        m
    }

    pub fn field(&self) -> &FieldCtx {
        &self.field
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Side length of a square matrix.
    pub fn size(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> FieldElem {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: FieldElem) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[FieldElem] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<FieldElem> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn entries(&self) -> &[FieldElem] {
        &self.data
    }

    pub fn is_identity(&self) -> bool {
        self.is_square()
            && (0..self.rows)
                .all(|i| (0..self.cols).all(|j| self.get(i, j) == FieldElem((i == j) as u32)))
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(&self.field, self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn mul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let f = &self.field;
        let mut out = Self::zeros(f, self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let v = f.add(out.get(i, j), f.mul(a, other.get(k, j)));
                    out.set(i, j, v);
                }
            }
        }
        Ok(out)
    }

    /// Row vector times matrix, `u * self`.
    pub fn left_mul_vec(&self, u: &[FieldElem]) -> Result<Vec<FieldElem>> {
        if u.len() != self.rows {
            return Err(Error::LengthMismatch {
                expected: self.rows,
                got: u.len(),
            });
        }
        let f = &self.field;
        let mut x = vec![FieldElem::ZERO; self.cols];
        for (i, &ui) in u.iter().enumerate() {
            if ui.is_zero() {
                continue;
            }
            for (xj, &g) in x.iter_mut().zip(self.row(i)) {
                *xj = f.add(*xj, f.mul(ui, g));
            }
        }
        Ok(x)
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Matrix) -> Matrix {
        let f = &self.field;
        let (r, c) = (self.rows * other.rows, self.cols * other.cols);
        let mut out = Self::zeros(f, r, c);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self.get(i, j);
                for k in 0..other.rows {
                    for l in 0..other.cols {
                        out.set(
                            i * other.rows + k,
                            j * other.cols + l,
                            f.mul(a, other.get(k, l)),
                        );
                    }
                }
            }
        }
        out
    }

    /// `n`-fold Kronecker power; `n = 0` gives the 1x1 identity.
    pub fn kron_power(&self, n: usize) -> Matrix {
        (0..n).fold(Self::identity(&self.field, 1), |acc, _| acc.kron(self))
    }

    pub fn scale_column(&self, j: usize, s: FieldElem) -> Matrix {
        let mut out = self.clone();
        for i in 0..self.rows {
            out.set(i, j, self.field.mul(s, self.get(i, j)));
        }
        out
    }

    pub fn permute_columns(&self, perm: &[usize]) -> Matrix {
        let mut out = self.clone();
        for i in 0..self.rows {
            for (j, &c) in perm.iter().enumerate() {
                out.set(i, j, self.get(i, c));
            }
        }
        out
    }

    pub fn rank(&self) -> usize {
        let f = &self.field;
        let mut a = self.clone();
        let mut rank = 0;
        for col in 0..a.cols {
            let Some(p) = (rank..a.rows).find(|&r| !a.get(r, col).is_zero()) else {
                continue;
            };
            a.swap_rows(p, rank);
            let inv = f.inv(a.get(rank, col)).expect("nonzero pivot");
            for r in rank + 1..a.rows {
                let factor = f.mul(a.get(r, col), inv);
                if !factor.is_zero() {
                    a.row_axpy(r, rank, f.neg(factor));
                }
            }
            rank += 1;
        }
        rank
    }

    pub fn invert(&self) -> Result<Matrix> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch(
                "only square matrices are invertible".into(),
            ));
        }
        let f = &self.field;
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Self::identity(f, n);
        for col in 0..n {
            let p = (col..n)
                .find(|&r| !a.get(r, col).is_zero())
                .ok_or(Error::Singular)?;
            a.swap_rows(p, col);
            inv.swap_rows(p, col);
            let s = f.inv(a.get(col, col))?;
            a.row_scale(col, s);
            inv.row_scale(col, s);
            for r in 0..n {
                let factor = a.get(r, col);
                if r != col && !factor.is_zero() {
                    let neg = f.neg(factor);
                    a.row_axpy(r, col, neg);
                    inv.row_axpy(r, col, neg);
                }
            }
        }
        Ok(inv)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a != b {
            for j in 0..self.cols {
                self.data.swap(a * self.cols + j, b * self.cols + j);
            }
        }
    }

    fn row_scale(&mut self, r: usize, s: FieldElem) {
        for j in 0..self.cols {
            let v = self.field.mul(s, self.get(r, j));
            self.set(r, j, v);
        }
    }

    /// `row[dst] += s * row[src]`.
    fn row_axpy(&mut self, dst: usize, src: usize, s: FieldElem) {
        for j in 0..self.cols {
            let v = self
                .field
                .add(self.get(dst, j), self.field.mul(s, self.get(src, j)));
            self.set(dst, j, v);
        }
    }

    /// Parses the text format: field spec, `rows cols`, then row-major entries.
    pub fn parse(text: &str) -> Result<Matrix> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let field: FieldCtx = lines
            .next()
            .ok_or_else(|| Error::Parse("missing field line".into()))?
            .parse()?;
        Self::parse_body(&field, lines)
    }

    /// Parses a matrix file and checks it matches `field`.
    pub fn parse_for_field(text: &str, field: &FieldCtx) -> Result<Matrix> {
        let m = Self::parse(text)?;
        if m.field() != field {
            return Err(Error::DimensionMismatch(format!(
                "matrix is over {} but {} was requested",
                m.field(),
                field
            )));
        }
        Ok(m)
    }

    fn parse_body<'a>(
        field: &FieldCtx,
        mut lines: impl Iterator<Item = &'a str>,
    ) -> Result<Matrix> {
        let dims: Vec<usize> = lines
            .next()
            .ok_or_else(|| Error::Parse("missing dimension line".into()))?
            .split_whitespace()
            .map(|t| {
                t.parse()
                    .map_err(|_| Error::Parse(format!("bad dimension {t:?}")))
            })
            .collect::<Result<_>>()?;
        let [rows, cols] = dims[..] else {
            return Err(Error::Parse("dimension line must be `rows cols`".into()));
        };
        let data: Vec<FieldElem> = lines
            .flat_map(str::split_whitespace)
            .map(|t| {
                t.parse::<u32>()
                    .map(FieldElem)
                    .map_err(|_| Error::Parse(format!("bad entry {t:?}")))
            })
            .collect::<Result<_>>()?;
        Self::new(field, rows, cols, data)
    }
}

impl fmt::Display for Matrix {
    /// Writes the text format accepted by [`Matrix::parse`].
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.field)?;
        writeln!(f, "{} {}", self.rows, self.cols)?;
        for i in 0..self.rows {
            let row: Vec<String> = self.row(i).iter().map(|e| e.0.to_string()).collect();
            writeln!(f, "{}", row.join(" "))?;
        }
        Ok(())
    }
}

/// The 2x2 kernel `[[1, 0], [1, gamma]]`; `gamma = 1` is the binary kernel.
pub fn gamma_kernel(field: &FieldCtx, gamma: FieldElem) -> Result<Matrix> {
    if gamma.is_zero() {
        return Err(Error::Singular);
    }
    Matrix::new(
        field,
        2,
        2,
        vec![FieldElem::ONE, FieldElem::ZERO, FieldElem::ONE, gamma],
    )
}

/// `[[1, 0], [1, 1]]` over any field.
pub fn binary_kernel(field: &FieldCtx) -> Matrix {
    gamma_kernel(field, FieldElem::ONE).expect("one is nonzero")
}

/// The q x q Reed-Solomon kernel: `alpha^(ij)` in the top-left block, a zero
/// last column apart from the corner, and an all-ones last row.
pub fn rs_matrix(field: &FieldCtx) -> Matrix {
    let q = field.q();
    let mut g = Matrix::zeros(field, q, q);
    for i in 0..q - 1 {
        for j in 0..q - 1 {
            g.set(i, j, field.alpha_pow((i * j) as i64));
        }
    }
    for j in 0..q {
        g.set(q - 1, j, FieldElem::ONE);
    }
    g
}

/// Lower-right `ell x ell` block of [`rs_matrix`].
pub fn rs_submatrix(field: &FieldCtx, ell: usize) -> Result<Matrix> {
    let q = field.q();
    if ell > q {
        return Err(Error::SizeExceedsField { ell, q });
    }
    if ell == 0 {
        return Err(Error::BadParameter("kernel size must be positive".into()));
    }
    let full = rs_matrix(field);
    let off = q - ell;
    let data = (0..ell)
        .flat_map(|i| (0..ell).map(move |j| (i, j)))
        .map(|(i, j)| full.get(off + i, off + j))
        .collect();
    Matrix::new(field, ell, ell, data)
}

/// A lower unit-triangular form `upper * G * perm_matrix` of a kernel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StandardForm {
    pub form: Matrix,
    /// Invertible upper-triangular left factor.
    pub upper: Matrix,
    /// `perm[j]` is the column of `G` moved to position `j`.
    pub perm: Vec<usize>,
}

impl StandardForm {
    pub fn permutation_matrix(&self) -> Matrix {
        Matrix::permutation(self.form.field(), &self.perm)
    }
}

/// Standard form with pivots chosen at the leftmost usable column.
pub fn standard_form(g: &Matrix) -> Result<StandardForm> {
    let order: Vec<usize> = (0..g.cols()).collect();
    standard_form_with_priority(g, &order)
}

/// Standard form where each pivot is the first usable column in `priority`.
///
/// Rows are processed bottom-up. Row `i` is reduced by the already-pivoted
/// rows below it, then scaled so its pivot becomes one.
pub fn standard_form_with_priority(g: &Matrix, priority: &[usize]) -> Result<StandardForm> {
    if !g.is_square() {
        return Err(Error::DimensionMismatch("kernel must be square".into()));
    }
    let n = g.size();
    let mut sorted = priority.to_vec();
    sorted.sort_unstable();
    if sorted != (0..n).collect::<Vec<_>>() {
        return Err(Error::BadParameter(
            "priority must be a permutation of the columns".into(),
        ));
    }
    let f = g.field().clone();
    let mut r = g.clone();
    let mut v = Matrix::identity(&f, n);
    let mut pivot = vec![usize::MAX; n];
    let mut used = vec![false; n];
    for i in (0..n).rev() {
        for k in (i + 1..n).rev() {
            let c = r.get(i, pivot[k]);
            if !c.is_zero() {
                let neg = f.neg(c);
                r.row_axpy(i, k, neg);
                v.row_axpy(i, k, neg);
            }
        }
        let c = *priority
            .iter()
            .find(|&&c| !used[c] && !r.get(i, c).is_zero())
            .ok_or(Error::Singular)?;
        let s = f.inv(r.get(i, c))?;
        r.row_scale(i, s);
        v.row_scale(i, s);
        pivot[i] = c;
        used[c] = true;
    }
    let form = r.permute_columns(&pivot);
    Ok(StandardForm {
        form,
        upper: v,
        perm: pivot,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Classification {
    Polarizing,
    NonPolarizingIdentity,
    /// Entries of the standard form generate a proper subfield of this size.
    NonPolarizingSubfield(usize),
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Classification::Polarizing => write!(f, "polarizing"),
            Classification::NonPolarizingIdentity => write!(f, "non-polarizing (identity)"),
            Classification::NonPolarizingSubfield(s) => {
                write!(f, "non-polarizing (subfield of size {s})")
            }
        }
    }
}

pub fn classify_standard_form(sf: &StandardForm) -> (Classification, Subfield) {
    let field = sf.form.field();
    let sub = field.generated_subfield(sf.form.entries());
    let class = if sf.form.is_identity() {
        Classification::NonPolarizingIdentity
    } else if sub.size() == field.q() {
        Classification::Polarizing
    } else {
        Classification::NonPolarizingSubfield(sub.size())
    };
    (class, sub)
}

pub fn classify_polarizing(g: &Matrix) -> Result<Classification> {
    Ok(classify_standard_form(&standard_form(g)?).0)
}

/// Minimum Hamming distance from `target` to the span of `basis`.
fn distance_to_span(field: &FieldCtx, target: &[FieldElem], basis: &[Vec<FieldElem>]) -> u32 {
    let q = field.q();
    let weight = |v: &[FieldElem]| v.iter().filter(|e| !e.is_zero()).count() as u32;
    let mut cur = target.to_vec();
    let mut best = weight(&cur);
    let mut coef = vec![0u32; basis.len()];
    // odometer over coefficient tuples, updating `cur` by differences
    'outer: loop {
        let mut k = 0;
        loop {
            if k == basis.len() {
                break 'outer;
            }
            let old = FieldElem(coef[k]);
            let new = FieldElem((coef[k] + 1) % q as u32);
            let delta = field.sub(new, old);
            for (c, &b) in cur.iter_mut().zip(&basis[k]) {
                *c = field.add(*c, field.mul(delta, b));
            }
            coef[k] = new.0;
            if new.0 != 0 {
                break;
            }
            k += 1;
        }
        best = best.min(weight(&cur));
        if best == 0 {
            break;
        }
    }
    best
}

fn check_budget(g: &Matrix) -> Result<()> {
    let n = g.size() as u32;
    let cost = (g.field().q() as u64).checked_pow(n);
    match cost {
        Some(c) if c <= PARTIAL_DISTANCE_BUDGET => Ok(()),
        _ => Err(Error::BudgetExceeded(format!(
            "{}^{} span enumeration exceeds {}",
            g.field().q(),
            n,
            PARTIAL_DISTANCE_BUDGET
        ))),
    }
}

/// Channel partial distances (rows against later rows) and source partial
/// distances (columns of the inverse against earlier columns).
pub fn partial_distances(g: &Matrix) -> Result<(Vec<u32>, Vec<u32>)> {
    if !g.is_square() {
        return Err(Error::DimensionMismatch("kernel must be square".into()));
    }
    let h = g.invert()?;
    check_budget(g)?;
    let f = g.field();
    let n = g.size();
    let rows: Vec<Vec<FieldElem>> = (0..n).map(|i| g.row(i).to_vec()).collect();
    let cols: Vec<Vec<FieldElem>> = (0..n).map(|j| h.column(j)).collect();
    let dc = (0..n)
        .map(|i| distance_to_span(f, &rows[i], &rows[i + 1..]))
        .collect();
    let ds = (0..n)
        .map(|i| distance_to_span(f, &cols[i], &cols[..i]))
        .collect();
    Ok((dc, ds))
}

/// Exponent summary of a kernel; every value is on the base-`ell` scale.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Exponents {
    pub channel: f64,
    pub source: f64,
    pub channel_variance: f64,
}

pub fn exponents_from_distances(dc: &[u32], ds: &[u32]) -> Result<Exponents> {
    let ell = dc.len();
    if ell < 2 || ds.len() != ell {
        return Err(Error::BadParameter(
            "exponents need a kernel of size at least 2".into(),
        ));
    }
    let ln_ell = (ell as f64).ln();
    let avg = |d: &[u32]| d.iter().map(|&x| (x as f64).ln()).sum::<f64>() / (ell as f64 * ln_ell);
    let channel = avg(dc);
    let channel_variance = dc
        .iter()
        .map(|&x| ((x as f64).ln() / ln_ell - channel).powi(2))
        .sum::<f64>()
        / ell as f64;
    Ok(Exponents {
        channel,
        source: avg(ds),
        channel_variance,
    })
}

pub fn exponents(g: &Matrix) -> Result<Exponents> {
    let (dc, ds) = partial_distances(g)?;
    exponents_from_distances(&dc, &ds)
}

/// Everything the analyzer reports about one kernel.
#[derive(Clone, Debug)]
pub struct KernelReport {
    pub kernel: Matrix,
    pub standard: StandardForm,
    pub classification: Classification,
    pub generated_subfield_size: usize,
    pub channel_distances: Vec<u32>,
    pub source_distances: Vec<u32>,
    pub exponents: Exponents,
}

pub fn analyze(g: &Matrix) -> Result<KernelReport> {
    let standard = standard_form(g)?;
    let (classification, sub) = classify_standard_form(&standard);
    let (dc, ds) = partial_distances(g)?;
    let exponents = exponents_from_distances(&dc, &ds)?;
    Ok(KernelReport {
        kernel: g.clone(),
        standard,
        classification,
        generated_subfield_size: sub.size(),
        channel_distances: dc,
        source_distances: ds,
        exponents,
    })
}

impl KernelReport {
    /// `key=value` lines for machine consumption.
    pub fn to_key_values(&self) -> String {
        let join = |v: &[u32]| v.iter().map(u32::to_string).collect::<Vec<_>>().join(",");
        let rows = |m: &Matrix| {
            (0..m.rows())
                .map(|i| {
                    m.row(i)
                        .iter()
                        .map(|e| e.0.to_string())
                        .collect::<Vec<_>>()
                        .join(" ")
                })
                .collect::<Vec<_>>()
                .join(";")
        };
        let class = match self.classification {
            Classification::Polarizing => "polarizing".to_string(),
            Classification::NonPolarizingIdentity => "non_polarizing_identity".to_string(),
            Classification::NonPolarizingSubfield(s) => format!("non_polarizing_subfield:{s}"),
        };
        let perm = self
            .standard
            .perm
            .iter()
            .map(usize::to_string)
            .collect::<Vec<_>>()
            .join(",");
        [
            format!("field={}", self.kernel.field()),
            format!("size={}", self.kernel.size()),
            format!("standard_form={}", rows(&self.standard.form)),
            format!("upper_factor={}", rows(&self.standard.upper)),
            format!("column_permutation={perm}"),
            format!("classification={class}"),
            format!("generated_subfield_size={}", self.generated_subfield_size),
            format!("channel_distances={}", join(&self.channel_distances)),
            format!("source_distances={}", join(&self.source_distances)),
            format!("channel_exponent={:.12}", self.exponents.channel),
            format!("source_exponent={:.12}", self.exponents.source),
            format!("channel_variance={:.12}", self.exponents.channel_variance),
        ]
        .join("\n")
            + "\n"
    }
}

impl fmt::Display for KernelReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.kernel.size();
        writeln!(f, "kernel {n}x{n} over {}", self.kernel.field())?;
        writeln!(f, "standard form:")?;
        for i in 0..n {
            let row: Vec<String> = self
                .standard
                .form
                .row(i)
                .iter()
                .map(|e| format!("{:>3}", e.0))
                .collect();
            writeln!(f, "  {}", row.join(" "))?;
        }
        writeln!(f, "classification: {}", self.classification)?;
        writeln!(f, "channel partial distances: {:?}", self.channel_distances)?;
        writeln!(f, "source partial distances:  {:?}", self.source_distances)?;
        writeln!(
            f,
            "exponents: channel {:.6}, source {:.6}, channel variance {:.6}",
            self.exponents.channel, self.exponents.source, self.exponents.channel_variance
        )
    }
}

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..n).collect();
    loop {
        out.push(cur.clone());
        let Some(i) = (0..n.saturating_sub(1))
            .rev()
            .find(|&i| cur[i] < cur[i + 1])
        else {
            return out;
        };
        let j = (i + 1..n)
            .rev()
            .find(|&j| cur[j] > cur[i])
            .expect("successor exists");
        cur.swap(i, j);
        cur[i + 1..].reverse();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn f(q: u64) -> FieldCtx {
        FieldCtx::of_size(q).unwrap()
    }

    fn ln_factorial(n: usize) -> f64 {
        (1..=n).map(|k| (k as f64).ln()).sum()
    }

    #[test]
    fn inverse_examples() {
        let f4 = f(4);
        let id = Matrix::identity(&f4, 3);
        assert_eq!(id.invert().unwrap(), id);
        let g1 = binary_kernel(&f(2));
        assert_eq!(g1.invert().unwrap(), g1);
        let singular = Matrix::from_rows(&f4, &[[1, 1], [1, 1]]).unwrap();
        assert_eq!(singular.invert(), Err(Error::Singular));
    }

    /// The closed-form inverse: `alpha^(-ij)` block, first column of ones,
    /// last row `[1, 0, ..., 0, -1]`.
    fn displayed_rs_inverse(field: &FieldCtx) -> Matrix {
        let q = field.q();
        let mut h = Matrix::zeros(field, q, q);
        for i in 0..q - 1 {
            for j in 0..q - 1 {
                h.set(i, j, field.alpha_pow(-((i * j) as i64)));
            }
        }
        h.set(q - 1, 0, FieldElem::ONE);
        h.set(q - 1, q - 1, field.neg(FieldElem::ONE));
        h
    }

    #[test]
    fn rs_inverse_matches_closed_form() {
        for q in [2u64, 4, 8] {
            let field = f(q);
            assert_eq!(
                rs_matrix(&field).invert().unwrap(),
                displayed_rs_inverse(&field)
            );
        }
        // in odd characteristic the closed form is the negated inverse
        for q in [3u64, 5, 7, 9] {
            let field = f(q);
            let inv = rs_matrix(&field).invert().unwrap();
            let h = displayed_rs_inverse(&field);
            for i in 0..field.q() {
                for j in 0..field.q() {
                    assert_eq!(h.get(i, j), field.neg(inv.get(i, j)), "q={q} ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn rs_matrix_small() {
        assert_eq!(rs_matrix(&f(2)), binary_kernel(&f(2)));
        assert_eq!(
            rs_submatrix(&f(4), 5),
            Err(Error::SizeExceedsField { ell: 5, q: 4 })
        );
        for q in [2u64, 3, 4, 5, 7, 8] {
            let field = f(q);
            let g = rs_matrix(&field);
            // row i evaluates X^(q-1-i) at alpha^(-j) and at zero
            for i in 0..field.q() {
                let e = (field.q() - 1 - i) as u64;
                for j in 0..field.q() {
                    let x = if j == field.q() - 1 {
                        FieldElem::ZERO
                    } else {
                        field.alpha_pow(-(j as i64))
                    };
                    assert_eq!(g.get(i, j), field.pow(x, e));
                }
            }
        }
    }

    #[test]
    fn standard_form_examples() {
        let f4 = f(4);
        let a = f4.alpha();
        let g = gamma_kernel(&f4, a).unwrap();
        let sf = standard_form(&g).unwrap();
        let expect = Matrix::new(
            &f4,
            2,
            2,
            vec![FieldElem::ONE, FieldElem::ZERO, a, FieldElem::ONE],
        )
        .unwrap();
        assert_eq!(sf.form, expect);

        // the other pivot order gives the other form
        let sf2 = standard_form_with_priority(&g, &[1, 0]).unwrap();
        let other = Matrix::new(
            &f4,
            2,
            2,
            vec![
                FieldElem::ONE,
                FieldElem::ZERO,
                f4.inv(a).unwrap(),
                FieldElem::ONE,
            ],
        )
        .unwrap();
        assert_eq!(sf2.form, other);

        let u = Matrix::from_rows(&f4, &[[1, 1], [0, 1]]).unwrap();
        assert!(standard_form(&u).unwrap().form.is_identity());
        let id = Matrix::identity(&f4, 3);
        assert!(standard_form(&id).unwrap().form.is_identity());
    }

    fn check_transcript(g: &Matrix, sf: &StandardForm) {
        let n = g.size();
        let lhs = sf
            .upper
            .mul(g)
            .unwrap()
            .mul(&sf.permutation_matrix())
            .unwrap();
        assert_eq!(lhs, sf.form);
        for i in 0..n {
            assert_eq!(sf.form.get(i, i), FieldElem::ONE);
            for j in i + 1..n {
                assert!(sf.form.get(i, j).is_zero());
            }
            for j in 0..i {
                assert!(sf.upper.get(i, j).is_zero());
            }
        }
    }

    #[test]
    fn transcript_reproduces_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (q, ell) in [(2u64, 8usize), (3, 6), (4, 5), (8, 4), (16, 3), (5, 4)] {
            let field = f(q);
            for _ in 0..200 {
                let g = Matrix::random_invertible(&field, ell, &mut rng);
                check_transcript(&g, &standard_form(&g).unwrap());
            }
        }
    }

    #[test]
    fn classifier_examples() {
        let f4 = f(4);
        assert_eq!(
            classify_polarizing(&binary_kernel(&f4)).unwrap(),
            Classification::NonPolarizingSubfield(2)
        );
        assert_eq!(
            classify_polarizing(&gamma_kernel(&f4, f4.alpha()).unwrap()).unwrap(),
            Classification::Polarizing
        );
        assert_eq!(
            classify_polarizing(&Matrix::identity(&f4, 3)).unwrap(),
            Classification::NonPolarizingIdentity
        );
        assert_eq!(
            classify_polarizing(&binary_kernel(&f(2))).unwrap(),
            Classification::Polarizing
        );
        for q in [4u64, 8] {
            assert_eq!(
                classify_polarizing(&rs_matrix(&f(q))).unwrap(),
                Classification::Polarizing
            );
        }
    }

    #[test]
    fn classifier_is_pivot_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for q in [4u64, 8] {
            let field = f(q);
            for ell in [2usize, 3] {
                let orders = permutations(ell);
                for _ in 0..200 {
                    let g = Matrix::random_invertible(&field, ell, &mut rng);
                    let base = classify_polarizing(&g).unwrap();
                    for order in &orders {
                        let sf = standard_form_with_priority(&g, order).unwrap();
                        check_transcript(&g, &sf);
                        assert_eq!(classify_standard_form(&sf).0, base);
                    }
                }
            }
        }
    }

    #[test]
    fn partial_distance_examples() {
        let (dc, ds) = partial_distances(&binary_kernel(&f(2))).unwrap();
        assert_eq!(dc, vec![1, 2]);
        assert_eq!(ds, vec![2, 1]);
        let (dc, _) = partial_distances(&rs_matrix(&f(4))).unwrap();
        assert_eq!(dc, vec![1, 2, 3, 4]);
        let (dc, ds) = partial_distances(&Matrix::identity(&f(3), 2)).unwrap();
        assert_eq!((dc, ds), (vec![1, 1], vec![1, 1]));
        assert!(matches!(
            partial_distances(&Matrix::identity(&f(16), 7)),
            Err(Error::BudgetExceeded(_))
        ));
    }

    #[test]
    fn exponent_examples() {
        let e = exponents(&binary_kernel(&f(2))).unwrap();
        assert!((e.channel - 0.5).abs() < 1e-12);
        assert!((e.source - 0.5).abs() < 1e-12);
        assert!((e.channel_variance - 0.25).abs() < 1e-12);
        let e = exponents(&rs_matrix(&f(4))).unwrap();
        assert!((e.channel - 0.57312).abs() < 5e-6);
        assert!((e.channel - ln_factorial(4) / (4.0 * 4f64.ln())).abs() < 1e-12);
        let e = exponents(&Matrix::identity(&f(4), 3)).unwrap();
        assert_eq!(e.channel, 0.0);
        let e = exponents(&rs_submatrix(&f(4), 3).unwrap()).unwrap();
        assert!((e.channel - 6f64.ln() / (3.0 * 3f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn rs_submatrices_are_mds() {
        for q in [2u64, 3, 4, 5, 7, 8] {
            let field = f(q);
            for ell in 2..=field.q() {
                let g = rs_submatrix(&field, ell).unwrap();
                let (dc, ds) = partial_distances(&g).unwrap();
                let expect: Vec<u32> = (1..=ell as u32).collect();
                assert_eq!(dc, expect, "q={q} ell={ell}");
                // columns of the inverse are measured against earlier columns
                let reversed: Vec<u32> = expect.iter().rev().copied().collect();
                assert_eq!(ds, reversed, "q={q} ell={ell}");
            }
        }
    }

    #[test]
    fn zero_exponent_iff_identity_form_prime_fields() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for q in [2u64, 3, 5] {
            let field = f(q);
            for ell in [2usize, 3, 4] {
                for _ in 0..150 {
                    let g = Matrix::random_invertible(&field, ell, &mut rng);
                    let e = exponents(&g).unwrap();
                    let id = standard_form(&g).unwrap().form.is_identity();
                    assert_eq!(e.channel == 0.0, id);
                }
            }
        }
    }

    #[test]
    fn permutations_enumerates_all() {
        let p = permutations(4);
        assert_eq!(p.len(), 24);
        assert_eq!(p[0], vec![0, 1, 2, 3]);
        assert_eq!(p[23], vec![3, 2, 1, 0]);
    }

    #[test]
    fn text_format_roundtrip() {
        let g = rs_matrix(&f(4));
        let text = g.to_string();
        assert!(text.starts_with("2^2/1+x+x^2\n4 4\n"));
        assert_eq!(Matrix::parse(&text).unwrap(), g);
        assert!(Matrix::parse("2^2\n2 2\n1 0 1\n").is_err());
        assert!(Matrix::parse("2^2\n2 2\n1 0 1 4\n").is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn exponent_invariant_under_column_scaling(seed in any::<u64>(), col in 0usize..3, s in 1u32..8) {
            let field = f(8);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = Matrix::random_invertible(&field, 3, &mut rng);
            let scaled = g.scale_column(col, FieldElem(s));
            let (a, b) = (exponents(&g).unwrap(), exponents(&scaled).unwrap());
            prop_assert!((a.channel - b.channel).abs() < 1e-12);
            prop_assert!((a.source - b.source).abs() < 1e-12);
        }

        #[test]
        fn inverse_is_two_sided(seed in any::<u64>(), ell in 1usize..6) {
            let field = f(9);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = Matrix::random_invertible(&field, ell, &mut rng);
            let h = g.invert().unwrap();
            prop_assert!(g.mul(&h).unwrap().is_identity());
            prop_assert!(h.mul(&g).unwrap().is_identity());
        }

        #[test]
        fn distances_within_bounds(seed in any::<u64>(), ell in 2usize..5) {
            let field = f(4);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = Matrix::random_invertible(&field, ell, &mut rng);
            let (dc, ds) = partial_distances(&g).unwrap();
            for i in 0..ell {
                prop_assert!(dc[i] >= 1 && dc[i] as usize <= ell);
                prop_assert!(ds[i] >= 1 && ds[i] as usize <= ell);
            }
        }
    }
}
