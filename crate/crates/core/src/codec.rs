//! Polar codes over GF(q): index selection, encoding, successive-cancellation
//! decoding and the union bound.
//!
//! Symbols are indexed by the packed branch index used in [`crate::polarlab`].
//! The encoder computes `x = u G^{⊗n}` in that order; the decoder visits the
//! indices in [`decoding_order`], which is the digit reversal of the natural
//! order.

use serde::{Deserialize, Serialize};

use crate::chanmodel::SubchannelStats;
use crate::error::{Error, Result};
use crate::gf::{FieldCtx, FieldElem};
use crate::kernel::Matrix;
use crate::polarlab::{self, index_digits, KernelTable, McStats};

pub use crate::polarlab::decoding_order;

/// A polar code: kernel, depth and frozen symbols.
#[derive(Clone, Debug)]
pub struct PolarCodeSpec {
    table: KernelTable,
    depth: usize,
    frozen: Vec<bool>,
    /// Value of every index; zero on information indices.
    frozen_values: Vec<FieldElem>,
    info: Vec<usize>,
}

impl PartialEq for PolarCodeSpec {
    fn eq(&self, other: &Self) -> bool {
        self.table.kernel() == other.table.kernel()
            && self.depth == other.depth
            && self.frozen == other.frozen
            && self.frozen_values == other.frozen_values
    }
}

impl PolarCodeSpec {
    /// Freezes `frozen_set` to zero.
    pub fn new(kernel: &Matrix, depth: usize, frozen_set: &[usize]) -> Result<Self> {
        Self::with_frozen_values(
            kernel,
            depth,
            frozen_set,
            &vec![FieldElem::ZERO; frozen_set.len()],
        )
    }

    /// Freezes `frozen_set[k]` to `values[k]`.
    pub fn with_frozen_values(
        kernel: &Matrix,
        depth: usize,
        frozen_set: &[usize],
        values: &[FieldElem],
    ) -> Result<Self> {
        if values.len() != frozen_set.len() {
            return Err(Error::LengthMismatch {
                expected: frozen_set.len(),
                got: values.len(),
            });
        }
        let table = KernelTable::new(kernel)?;
        let len = kernel
            .size()
            .checked_pow(depth as u32)
            .filter(|&n| n <= 1 << 24)
            .ok_or_else(|| {
                Error::BudgetExceeded(format!("block length {}^{depth}", kernel.size()))
            })?;
        let q = kernel.field().q() as u32;
        let mut frozen = vec![false; len];
        let mut frozen_values = vec![FieldElem::ZERO; len];
        for (&i, &v) in frozen_set.iter().zip(values) {
            if i >= len {
                return Err(Error::BadParameter(format!(
                    "frozen index {i} outside block length {len}"
                )));
            }
            if frozen[i] {
                return Err(Error::BadParameter(format!(
                    "frozen index {i} listed twice"
                )));
            }
            if v.0 >= q {
                return Err(Error::BadParameter(format!(
                    "frozen value {} outside the field",
                    v.0
                )));
            }
            frozen[i] = true;
            frozen_values[i] = v;
        }
        let info = (0..len).filter(|&i| !frozen[i]).collect();
        Ok(Self {
            table,
            depth,
            frozen,
            frozen_values,
            info,
        })
    }

    /// Code whose information set is `info_set`.
    pub fn from_info_set(kernel: &Matrix, depth: usize, info_set: &[usize]) -> Result<Self> {
        let len = kernel.size().pow(depth as u32);
        let mut is_info = vec![false; len];
        for &i in info_set {
            if i >= len {
                return Err(Error::BadParameter(format!(
                    "index {i} outside block length {len}"
                )));
            }
            is_info[i] = true;
        }
        let frozen: Vec<usize> = (0..len).filter(|&i| !is_info[i]).collect();
        Self::new(kernel, depth, &frozen)
    }

    pub fn field(&self) -> &FieldCtx {
        self.table.kernel().field()
    }

    pub fn kernel(&self) -> &Matrix {
        self.table.kernel()
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn block_length(&self) -> usize {
        self.frozen.len()
    }

    /// Number of information symbols.
    pub fn dimension(&self) -> usize {
        self.info.len()
    }

    pub fn rate(&self) -> f64 {
        self.dimension() as f64 / self.block_length() as f64
    }

    /// Information indices in increasing order.
    pub fn info_set(&self) -> &[usize] {
        &self.info
    }

    /// Frozen indices in increasing order.
    pub fn frozen_set(&self) -> Vec<usize> {
        (0..self.block_length())
            .filter(|&i| self.frozen[i])
            .collect()
    }

    pub fn is_frozen(&self, index: usize) -> bool {
        self.frozen[index]
    }

    /// Values of the frozen indices, in the order of [`Self::frozen_set`].
    pub fn frozen_values(&self) -> Vec<FieldElem> {
        self.frozen_set()
            .into_iter()
            .map(|i| self.frozen_values[i])
            .collect()
    }

    /// Places `info` on the information indices and the frozen values elsewhere.
    pub fn assemble(&self, info: &[FieldElem]) -> Result<Vec<FieldElem>> {
        if info.len() != self.info.len() {
            return Err(Error::LengthMismatch {
                expected: self.info.len(),
                got: info.len(),
            });
        }
        let mut u = self.frozen_values.clone();
        for (&i, &v) in self.info.iter().zip(info) {
            u[i] = v;
        }
        Ok(u)
    }

    pub fn to_file(&self, kernel_path: &str) -> CodeFile {
        CodeFile {
            field: self.field().to_string(),
            kernel: kernel_path.to_string(),
            depth: self.depth,
            frozen: self.frozen_set(),
            frozen_values: self.frozen_values().iter().map(|v| v.0).collect(),
        }
    }

    /// Builds the code described by `file` with the already loaded kernel.
    pub fn from_file(file: &CodeFile, kernel: &Matrix) -> Result<Self> {
        let field: FieldCtx = file.field.parse()?;
        if &field != kernel.field() {
            return Err(Error::DimensionMismatch(format!(
                "code is over {field} but the kernel is over {}",
                kernel.field()
            )));
        }
        let values: Vec<FieldElem> = file.frozen_values.iter().map(|&v| FieldElem(v)).collect();
        Self::with_frozen_values(kernel, file.depth, &file.frozen, &values)
    }
}

/// On-disk description of a code; the kernel is referenced by path.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeFile {
    pub field: String,
    pub kernel: String,
    pub depth: usize,
    pub frozen: Vec<usize>,
    pub frozen_values: Vec<u32>,
}

impl CodeFile {
    pub fn parse(text: &str) -> Result<Self> {
        let file: CodeFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if file.frozen.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Parse(
                "frozen indices must be strictly increasing".into(),
            ));
        }
        Ok(file)
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("code file serializes")
    }
}

/// Per-index quality used to pick information indices.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IndexScore {
    pub entropy: f64,
    pub error_probability: f64,
}

impl From<&SubchannelStats> for IndexScore {
    fn from(s: &SubchannelStats) -> Self {
        Self {
            entropy: s.entropy,
            error_probability: s.error_probability,
        }
    }
}

impl From<&McStats> for IndexScore {
    fn from(s: &McStats) -> Self {
        Self {
            entropy: s.entropy.mean,
            error_probability: s.error_probability.mean,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SelectionRule {
    /// Indices with conditional entropy below the threshold.
    Threshold(f64),
    /// The `round(rate * N)` indices of smallest error probability.
    TargetRate(f64),
}

/// Indices sorted by error probability, ties to the smaller index.
pub fn rank_by_error(scores: &[IndexScore]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[a]
            .error_probability
            .total_cmp(&scores[b].error_probability)
            .then(a.cmp(&b))
    });
    order
}

/// Picks the information set from per-index scores.
pub fn build_spec(
    kernel: &Matrix,
    depth: usize,
    scores: &[IndexScore],
    rule: SelectionRule,
) -> Result<PolarCodeSpec> {
    let len = kernel.size().pow(depth as u32);
    if scores.len() != len {
        return Err(Error::LengthMismatch {
            expected: len,
            got: scores.len(),
        });
    }
    let info: Vec<usize> = match rule {
        SelectionRule::Threshold(eps) => (0..len).filter(|&i| scores[i].entropy < eps).collect(),
        SelectionRule::TargetRate(rate) => {
            if !(0.0..=1.0).contains(&rate) {
                return Err(Error::RateInfeasible(rate));
            }
            let k = (rate * len as f64).round() as usize;
            rank_by_error(scores).into_iter().take(k).collect()
        }
    };
    PolarCodeSpec::from_info_set(kernel, depth, &info)
}

/// Indices whose base-`l` digits sum to more than `threshold`.
pub fn rm_indices(ell: usize, depth: usize, threshold: usize) -> Result<Vec<usize>> {
    if ell < 2 || threshold >= depth * (ell - 1) {
        return Err(Error::BadThreshold(format!(
            "digit-sum threshold {threshold} must be below {} for l={ell}, n={depth}",
            depth * ell.saturating_sub(1)
        )));
    }
    Ok((0..ell.pow(depth as u32))
        .filter(|&i| index_digits(i, ell, depth).iter().sum::<usize>() > threshold)
        .collect())
}

/// Indices whose digit-plus-one product exceeds `threshold`.
pub fn hyperbolic_indices(ell: usize, depth: usize, threshold: usize) -> Result<Vec<usize>> {
    let len = ell.pow(depth as u32);
    if ell < 2 || threshold >= len {
        return Err(Error::BadThreshold(format!(
            "product threshold {threshold} must be below {len} for l={ell}, n={depth}"
        )));
    }
    Ok((0..len)
        .filter(|&i| {
            index_digits(i, ell, depth)
                .iter()
                .map(|d| d + 1)
                .product::<usize>()
                > threshold
        })
        .collect())
}

/// Encodes `info` with the frozen values of `spec`.
pub fn encode(spec: &PolarCodeSpec, info: &[FieldElem]) -> Result<Vec<FieldElem>> {
    let u = spec.assemble(info)?;
    polarlab::polar_transform(spec.kernel(), spec.depth, &u)
}

/// Output of [`sc_decode`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decoded {
    /// All `N` input symbols, frozen ones included.
    pub u: Vec<FieldElem>,
    pub info: Vec<FieldElem>,
    pub codeword: Vec<FieldElem>,
}

/// Successive-cancellation decoding from per-use likelihood vectors.
pub fn sc_decode(spec: &PolarCodeSpec, likelihoods: &[Vec<f64>]) -> Result<Decoded> {
    let len = spec.block_length();
    if likelihoods.len() != len {
        return Err(Error::LengthMismatch {
            expected: len,
            got: likelihoods.len(),
        });
    }
    let q = spec.field().q();
    for l in likelihoods {
        if l.len() != q {
            return Err(Error::LengthMismatch {
                expected: q,
                got: l.len(),
            });
        }
        if l.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::BadParameter(
                "likelihoods must be nonnegative".into(),
            ));
        }
    }
    let mut u = vec![FieldElem::ZERO; len];
    let codeword = polarlab::sc_recursion(&spec.table, likelihoods, &mut |i, post| {
        let v = if spec.frozen[i] {
            spec.frozen_values[i]
        } else {
            FieldElem(argmax_first(post) as u32)
        };
        u[i] = v;
        Ok(v)
    })?;
    let info = spec.info.iter().map(|&i| u[i]).collect();
    Ok(Decoded { u, info, codeword })
}

/// Index of the largest entry; the first one on ties.
fn argmax_first(v: &[f64]) -> usize {
    let mut best = 0;
    for (k, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = k;
        }
    }
    best
}

/// Sum of the per-index error probabilities over `info_set`.
pub fn union_bound(error_probabilities: &[f64], info_set: &[usize]) -> f64 {
    info_set.iter().map(|&i| error_probabilities[i]).sum()
}

/// Minimum Hamming weight over the nonzero codewords spanned by the rows of
/// `G^{⊗n}` listed in `info_set`; `None` for an empty set.
pub fn min_distance(kernel: &Matrix, depth: usize, info_set: &[usize]) -> Result<Option<usize>> {
    let field = kernel.field();
    let q = field.q();
    let len = kernel.size().pow(depth as u32);
    let k = info_set.len();
    if k == 0 {
        return Ok(None);
    }
    if (q as f64).powi(k as i32) > (1u64 << 24) as f64 {
        return Err(Error::BudgetExceeded(format!(
            "enumerating {q}^{k} codewords"
        )));
    }
    let rows: Vec<Vec<FieldElem>> = info_set
        .iter()
        .map(|&i| {
            let mut e = vec![FieldElem::ZERO; len];
            e[i] = FieldElem::ONE;
            polarlab::polar_transform(kernel, depth, &e)
        })
        .collect::<Result<_>>()?;
    // walk all coefficient vectors, updating the codeword by differences
    let mut coeffs = vec![0u32; k];
    let mut word = vec![FieldElem::ZERO; len];
    let mut best = usize::MAX;
    let shift = |word: &mut [FieldElem], row: &[FieldElem], from: u32, to: u32| {
        let delta = field.sub(FieldElem(to), FieldElem(from));
        for (w, r) in word.iter_mut().zip(row) {
            *w = field.add(*w, field.mul(delta, *r));
        }
    };
    loop {
        let mut pos = 0;
        while pos < k && coeffs[pos] as usize == q - 1 {
            shift(&mut word, &rows[pos], coeffs[pos], 0);
            coeffs[pos] = 0;
            pos += 1;
        }
        if pos == k {
            break;
        }
        shift(&mut word, &rows[pos], coeffs[pos], coeffs[pos] + 1);
        coeffs[pos] += 1;
        best = best.min(word.iter().filter(|w| !w.is_zero()).count());
    }
    Ok(Some(best))
}
