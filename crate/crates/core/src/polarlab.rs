//! Polarization transforms: exact kernel transforms with output merging,
//! kernel posteriors, successive-cancellation posterior recursion and
//! Monte-Carlo subchannel estimates.
//!
//! Index convention: the subchannel reached by branch digits
//! `(b_1, ..., b_n)` has index `i = b_1 + b_2 l + ... + b_n l^(n-1)`, so the
//! first branch is the least significant base-`l` digit. Successive
//! cancellation visits indices in lexicographic order of `(b_1, ..., b_n)`,
//! which is increasing order of the digit-reversed index.

use std::collections::HashMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::chanmodel::{self, posterior_key, DiscreteSource, SubchannelStats};
use crate::error::{Error, Result};
use crate::gf::{FieldCtx, FieldElem};
use crate::kernel::Matrix;

/// Cap on `|Y|^l * q^l` for one exact kernel transform.
pub const EXACT_BUDGET: u64 = 1 << 26;

/// Samples per deterministic accumulation chunk.
const CHUNK: usize = 256;

/// Kernel codebook: `u G` for every `u`, with `u_0` the most significant
/// digit of the row index so that a fixed prefix selects a contiguous block.
#[derive(Clone, Debug)]
pub struct KernelTable {
    kernel: Matrix,
    q: usize,
    ell: usize,
    codewords: Vec<u16>,
    /// `q^k` for `k = 0..=l`.
    powers: Vec<usize>,
}

impl KernelTable {
    pub fn new(kernel: &Matrix) -> Result<Self> {
        if !kernel.is_square() {
            return Err(Error::DimensionMismatch("kernel must be square".into()));
        }
        kernel.invert()?;
        let field = kernel.field();
        let (q, ell) = (field.q(), kernel.size());
        let total = (q as u64)
            .checked_pow(ell as u32)
            .filter(|&t| t <= 1 << 24)
            .ok_or_else(|| Error::BudgetExceeded(format!("kernel codebook {q}^{ell}")))?
            as usize;
        let powers: Vec<usize> = (0..=ell).map(|k| q.pow(k as u32)).collect();
        let mut codewords = Vec::with_capacity(total * ell);
        let mut u = vec![FieldElem::ZERO; ell];
        for idx in 0..total {
            for (k, uk) in u.iter_mut().enumerate() {
                *uk = FieldElem(((idx / powers[ell - 1 - k]) % q) as u32);
            }
            let x = kernel.left_mul_vec(&u)?;
            codewords.extend(x.iter().map(|e| e.0 as u16));
        }
        Ok(Self {
            kernel: kernel.clone(),
            q,
            ell,
            codewords,
            powers,
        })
    }

    pub fn kernel(&self) -> &Matrix {
        &self.kernel
    }

    pub fn size(&self) -> usize {
        self.ell
    }

    #[inline]
    fn codeword(&self, idx: usize) -> &[u16] {
        &self.codewords[idx * self.ell..(idx + 1) * self.ell]
    }

    /// Writes `P(u_i | u_0..u_{i-1}, y) ∝ sum over u_{i+1}.. of prod_j
    /// priors_j((uG)_j)` into `out`; returns the unnormalized mass.
    fn posterior_into(&self, priors: &[&[f64]], prefix: &[u32], out: &mut [f64]) -> f64 {
        let (q, ell) = (self.q, self.ell);
        let i = prefix.len();
        let block = self.powers[ell - i];
        let inner = self.powers[ell - i - 1];
        let start = prefix.iter().fold(0usize, |acc, &u| acc * q + u as usize) * block;
        out.iter_mut().for_each(|v| *v = 0.0);
        for (k, slot) in out.iter_mut().enumerate() {
            let base = start + k * inner;
            let mut acc = 0.0;
            for idx in base..base + inner {
                let cw = self.codeword(idx);
                let mut p = 1.0;
                for (prior, &x) in priors.iter().zip(cw) {
                    p *= prior[x as usize];
                }
                acc += p;
            }
            *slot = acc;
        }
        out.iter().sum()
    }
}

/// Posterior of `u_i` given `u_0..u_{i-1}` and the per-use priors.
pub fn kernel_posterior(
    table: &KernelTable,
    priors: &[Vec<f64>],
    prefix: &[FieldElem],
) -> Result<Vec<f64>> {
    if priors.len() != table.ell {
        return Err(Error::LengthMismatch {
            expected: table.ell,
            got: priors.len(),
        });
    }
    if prefix.len() >= table.ell {
        return Err(Error::BadParameter(format!(
            "prefix length {} leaves no symbol to estimate",
            prefix.len()
        )));
    }
    let scaled: Vec<Vec<f64>> = priors.iter().map(|p| scale_by_max(p)).collect();
    let refs: Vec<&[f64]> = scaled.iter().map(Vec::as_slice).collect();
    let prefix: Vec<u32> = prefix.iter().map(|e| e.0).collect();
    let mut out = vec![0.0; table.q];
    let mass = table.posterior_into(&refs, &prefix, &mut out);
    if !(mass > 0.0) {
        return Err(Error::ZeroLikelihood);
    }
    out.iter_mut().for_each(|v| *v /= mass);
    Ok(out)
}

fn scale_by_max(p: &[f64]) -> Vec<f64> {
    let m = p.iter().copied().fold(0.0, f64::max);
    if m > 0.0 {
        p.iter().map(|v| v / m).collect()
    } else {
        p.to_vec()
    }
}

/// Mixed-radix odometer over `len` digits in `[0, radix)`.
fn next_tuple(digits: &mut [usize], radix: usize) -> bool {
    for d in digits.iter_mut() {
        *d += 1;
        if *d < radix {
            return true;
        }
        *d = 0;
    }
    false
}

fn check_transform_budget(src: &DiscreteSource, ell: usize) -> Result<()> {
    let cost = (src.output_size() as u64)
        .checked_pow(ell as u32)
        .and_then(|a| a.checked_mul((src.q() as u64).pow(ell as u32)));
    match cost {
        Some(c) if c <= EXACT_BUDGET => Ok(()),
        _ => Err(Error::BudgetExceeded(format!(
            "exact transform of a {}-output source with kernel size {ell}",
            src.output_size()
        ))),
    }
}

/// Shared driver: visits every output tuple and hands each selected
/// subchannel its columns, one per prefix.
fn transform_columns(
    src: &DiscreteSource,
    table: &KernelTable,
    wanted: &[bool],
    mut sink: impl FnMut(usize, usize, usize, &[f64]),
) -> Result<()> {
    let (q, ell) = (src.q(), table.ell);
    if table.kernel.field() != src.field() {
        return Err(Error::DimensionMismatch(
            "kernel and source use different fields".into(),
        ));
    }
    check_transform_budget(src, ell)?;
    let ny = src.output_size();
    let total = table.powers[ell];
    let mut ys = vec![0usize; ell];
    let mut probs = vec![0.0; total];
    let mut y_index = 0usize;
    loop {
        let cols: Vec<&[f64]> = ys.iter().map(|&y| src.column(y)).collect();
        let mass: f64 = cols.iter().map(|c| c.iter().sum::<f64>()).product();
        if mass > 0.0 {
            for (idx, p) in probs.iter_mut().enumerate() {
                let cw = table.codeword(idx);
                *p = cols.iter().zip(cw).map(|(c, &x)| c[x as usize]).product();
            }
            // marginalize trailing digits one level at a time
            let mut level = probs.as_slice();
            let mut sums: Vec<Vec<f64>> = vec![Vec::new(); ell];
            for i in (0..ell).rev() {
                if wanted[i] {
                    for (prefix, col) in level.chunks_exact(q).enumerate() {
                        sink(i, y_index, prefix, col);
                    }
                }
                if i > 0 {
                    let reduced: Vec<f64> = level.chunks_exact(q).map(|c| c.iter().sum()).collect();
                    sums[i - 1] = reduced;
                    level = &sums[i - 1];
                }
            }
        }
        y_index += 1;
        if !next_tuple(&mut ys, ny) {
            break;
        }
    }
    Ok(())
}

/// Accumulates columns, merging those with equal posteriors.
struct MergingBuilder {
    q: usize,
    index: HashMap<Vec<u64>, usize>,
    joint: Vec<f64>,
    key: Vec<u64>,
}

impl MergingBuilder {
    fn new(q: usize) -> Self {
        Self {
            q,
            index: HashMap::new(),
            joint: Vec::new(),
            key: Vec::with_capacity(q),
        }
    }

    fn push(&mut self, col: &[f64]) {
        let mass: f64 = col.iter().sum();
        if mass <= 0.0 {
            return;
        }
        self.key.clear();
        self.key
            .extend(col.iter().map(|&c| posterior_key(c / mass)));
        if let Some(&k) = self.index.get(&self.key) {
            for (a, c) in self.joint[k * self.q..(k + 1) * self.q].iter_mut().zip(col) {
                *a += c;
            }
        } else {
            self.index.insert(self.key.clone(), self.index.len());
            self.joint.extend_from_slice(col);
        }
    }

    fn finish(self, field: &FieldCtx, uniform_input: bool) -> DiscreteSource {
        let outputs = self.joint.len() / self.q;
        DiscreteSource::from_columns_trusted(field, outputs, self.joint)
            .inherit_uniform(uniform_input)
    }
}

/// All `l` subchannels of one kernel transform, with merged outputs.
pub fn basic_transform_exact(src: &DiscreteSource, kernel: &Matrix) -> Result<Vec<DiscreteSource>> {
    let table = KernelTable::new(kernel)?;
    basic_transform_with_table(src, &table)
}

pub fn basic_transform_with_table(
    src: &DiscreteSource,
    table: &KernelTable,
) -> Result<Vec<DiscreteSource>> {
    let mut builders: Vec<MergingBuilder> = (0..table.ell)
        .map(|_| MergingBuilder::new(src.q()))
        .collect();
    transform_columns(src, table, &vec![true; table.ell], |i, _, _, col| {
        builders[i].push(col)
    })?;
    Ok(builders
        .into_iter()
        .map(|b| b.finish(src.field(), src.is_uniform_input()))
        .collect())
}

/// One subchannel of a kernel transform, with merged outputs.
pub fn transform_branch(
    src: &DiscreteSource,
    table: &KernelTable,
    branch: usize,
) -> Result<DiscreteSource> {
    if branch >= table.ell {
        return Err(Error::BadPathDigit {
            digit: branch,
            ell: table.ell,
        });
    }
    let mut wanted = vec![false; table.ell];
    wanted[branch] = true;
    let mut builder = MergingBuilder::new(src.q());
    transform_columns(src, table, &wanted, |_, _, _, col| builder.push(col))?;
    Ok(builder.finish(src.field(), src.is_uniform_input()))
}

/// Subchannels without merging. Subchannel `i` has `q^i |Y|^l` outputs;
/// output `t * q^i + p` carries the output tuple `t = sum_j y_j |Y|^j` and
/// the prefix `p = sum_k u_k q^(i-1-k)`.
pub fn basic_transform_unmerged(
    src: &DiscreteSource,
    kernel: &Matrix,
) -> Result<Vec<DiscreteSource>> {
    let table = KernelTable::new(kernel)?;
    let (q, ell) = (src.q(), table.ell);
    let ny = src.output_size();
    let tuples = ny.pow(ell as u32);
    let mut joints: Vec<Vec<f64>> = (0..ell)
        .map(|i| vec![0.0; tuples * q.pow(i as u32) * q])
        .collect();
    transform_columns(src, &table, &vec![true; ell], |i, t, p, col| {
        let out = t * q.pow(i as u32) + p;
        joints[i][out * q..(out + 1) * q].copy_from_slice(col);
    })?;
    Ok(joints
        .into_iter()
        .enumerate()
        .map(|(i, j)| {
            DiscreteSource::from_columns_trusted(src.field(), tuples * q.pow(i as u32), j)
                .inherit_uniform(src.is_uniform_input())
        })
        .collect())
}

/// Largest deviation between the Fourier transform of each unmerged
/// subchannel joint and the same transform assembled from the per-use
/// transforms through `G^{-1}`.
pub fn macwilliams_residual(src: &DiscreteSource, kernel: &Matrix) -> Result<f64> {
    let field = src.field();
    let (q, ny, ell) = (src.q(), src.output_size(), kernel.size());
    let inverse = kernel.invert()?;
    let subs = basic_transform_unmerged(src, kernel)?;
    let chi: Vec<Complex64> = field.elements().map(|a| field.character(a)).collect();
    let mul = |a: usize, b: usize| field.mul(FieldElem(a as u32), FieldElem(b as u32)).index();
    // per-use transform, indexed [y][w]
    let per_use: Vec<Vec<Complex64>> = (0..ny)
        .map(|y| {
            (0..q)
                .map(|w| (0..q).map(|z| src.joint(z, y) * chi[mul(w, z)]).sum())
                .collect()
        })
        .collect();
    let mut worst = 0.0f64;
    for (i, sub) in subs.iter().enumerate() {
        let prefixes = q.pow(i as u32);
        for out in 0..sub.output_size() {
            let (tuple, prefix_index) = (out / prefixes, out % prefixes);
            let ys = index_digits(tuple, ny, ell);
            // prefix digits with u_0 most significant
            let mut prefix = index_digits(prefix_index, q, i);
            prefix.reverse();
            for wi in 0..q {
                let lhs: Complex64 = (0..q).map(|u| sub.joint(u, out) * chi[mul(wi, u)]).sum();
                let mut rhs = Complex64::new(0.0, 0.0);
                let mut w = vec![0usize; i + 1];
                w[i] = wi;
                loop {
                    let mut term = Complex64::new(1.0, 0.0);
                    for (j, &y) in ys.iter().enumerate() {
                        let z = (0..=i).fold(FieldElem::ZERO, |acc, k| {
                            field.add(acc, field.mul(FieldElem(w[k] as u32), inverse.get(j, k)))
                        });
                        term *= per_use[y][z.index()];
                    }
                    for (j, &u) in prefix.iter().enumerate() {
                        term *= chi[field.neg(FieldElem(mul(w[j], u) as u32)).index()];
                    }
                    rhs += term;
                    if !next_tuple(&mut w[..i], q) {
                        break;
                    }
                }
                worst = worst.max((lhs - rhs / prefixes as f64).norm());
            }
        }
    }
    Ok(worst)
}

/// Branch digits `(b_1, ..., b_n)` through a recursive transform.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransformPath {
    kernel: Matrix,
    digits: Vec<usize>,
}

impl TransformPath {
    pub fn new(kernel: &Matrix, digits: Vec<usize>) -> Result<Self> {
        let ell = kernel.size();
        if let Some(&d) = digits.iter().find(|&&d| d >= ell) {
            return Err(Error::BadPathDigit { digit: d, ell });
        }
        Ok(Self {
            kernel: kernel.clone(),
            digits,
        })
    }

    /// Path for subchannel index `i` at depth `n`.
    pub fn from_index(kernel: &Matrix, n: usize, index: usize) -> Result<Self> {
        let ell = kernel.size();
        if index >= ell.pow(n as u32) {
            return Err(Error::BadParameter(format!(
                "index {index} out of range at depth {n}"
            )));
        }
        Self::new(kernel, index_digits(index, ell, n))
    }

    /// Parses comma-separated digits such as `0,3,1`.
    pub fn parse(kernel: &Matrix, text: &str) -> Result<Self> {
        let text = text.trim();
        let digits = if text.is_empty() {
            Vec::new()
        } else {
            text.split(',')
                .map(|t| {
                    t.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::Parse(format!("bad path digit {t:?}")))
                })
                .collect::<Result<_>>()?
        };
        Self::new(kernel, digits)
    }

    pub fn kernel(&self) -> &Matrix {
        &self.kernel
    }

    pub fn digits(&self) -> &[usize] {
        &self.digits
    }

    pub fn depth(&self) -> usize {
        self.digits.len()
    }

    pub fn index(&self) -> usize {
        digits_index(&self.digits, self.kernel.size())
    }
}

/// Base-`l` digits of `index`, least significant first.
pub fn index_digits(index: usize, ell: usize, n: usize) -> Vec<usize> {
    let mut r = index;
    (0..n)
        .map(|_| {
            let d = r % ell;
            r /= ell;
            d
        })
        .collect()
}

pub fn digits_index(digits: &[usize], ell: usize) -> usize {
    digits.iter().rev().fold(0, |acc, &d| acc * ell + d)
}

/// Reverses the `n` base-`l` digits of `index`.
pub fn digit_reverse(index: usize, ell: usize, n: usize) -> usize {
    let mut d = index_digits(index, ell, n);
    d.reverse();
    digits_index(&d, ell)
}

/// Indices in successive-cancellation order.
pub fn decoding_order(ell: usize, n: usize) -> Vec<usize> {
    (0..ell.pow(n as u32))
        .map(|s| digit_reverse(s, ell, n))
        .collect()
}

/// Subchannel at the end of `path`, merging after every level.
pub fn transform_path(src: &DiscreteSource, path: &TransformPath) -> Result<DiscreteSource> {
    let table = KernelTable::new(path.kernel())?;
    let mut cur = src.clone();
    for &b in path.digits() {
        cur = transform_branch(&cur, &table, b)?;
    }
    Ok(cur)
}

/// Every subchannel at depth `n`, indexed by the packed branch digits.
pub fn transform_all(
    src: &DiscreteSource,
    kernel: &Matrix,
    n: usize,
) -> Result<Vec<DiscreteSource>> {
    let table = KernelTable::new(kernel)?;
    let ell = table.ell;
    let mut level = vec![src.clone()];
    for depth in 0..n {
        let mut next = vec![None; level.len() * ell];
        for (idx, s) in level.iter().enumerate() {
            for (b, sub) in basic_transform_with_table(s, &table)?
                .into_iter()
                .enumerate()
            {
                // new digit b becomes the most significant one
                next[idx + b * ell.pow(depth as u32)] = Some(sub);
            }
        }
        level = next
            .into_iter()
            .map(|s| s.expect("every slot filled"))
            .collect();
    }
    Ok(level)
}

/// Draws i.i.d. uses of a source or channel.
pub trait Sampler: Sync {
    fn field(&self) -> &FieldCtx;

    /// Whether every input sees the same output law up to relabeling, so
    /// the all-zero input may stand in for a uniformly drawn one.
    fn is_symmetric(&self) -> bool;

    /// Draws one use and writes `[P(x', y)]_{x'}` (any positive scaling) for
    /// the realized output into `out`. With `input` set, the input is fixed
    /// to that symbol; otherwise it is drawn from the source law.
    fn sample<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        input: Option<FieldElem>,
        out: &mut [f64],
    ) -> FieldElem;
}

/// Sampler over the finite table of a [`DiscreteSource`].
#[derive(Clone, Debug)]
pub struct DiscreteSampler {
    src: DiscreteSource,
    symmetric: bool,
    /// Cumulative joint mass in `(y, x)` order.
    joint_cdf: Vec<f64>,
    /// Per-input cumulative mass over outputs.
    cond_cdf: Vec<Vec<f64>>,
}

impl DiscreteSampler {
    pub fn new(src: &DiscreteSource) -> Self {
        let q = src.q();
        let mut acc = 0.0;
        let joint_cdf = src
            .joint_table()
            .iter()
            .map(|v| {
                acc += v;
                acc
            })
            .collect();
        let cond_cdf = (0..q)
            .map(|x| {
                let mut a = 0.0;
                (0..src.output_size())
                    .map(|y| {
                        a += src.joint(x, y);
                        a
                    })
                    .collect()
            })
            .collect();
        let symmetric = src.is_uniform_input() && chanmodel::is_symmetric(src).unwrap_or(false);
        Self {
            src: src.clone(),
            symmetric,
            joint_cdf,
            cond_cdf,
        }
    }

    pub fn source(&self) -> &DiscreteSource {
        &self.src
    }
}

fn search_cdf(cdf: &[f64], r: f64) -> usize {
    cdf.partition_point(|&c| c <= r).min(cdf.len() - 1)
}

impl Sampler for DiscreteSampler {
    fn field(&self) -> &FieldCtx {
        self.src.field()
    }

    fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    fn sample<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        input: Option<FieldElem>,
        out: &mut [f64],
    ) -> FieldElem {
        let q = self.src.q();
        let (x, y) = match input {
            Some(x) => {
                let cdf = &self.cond_cdf[x.index()];
                let r = rng.random::<f64>() * cdf[cdf.len() - 1];
                (x, search_cdf(cdf, r))
            }
            None => {
                let total = self.joint_cdf[self.joint_cdf.len() - 1];
                let k = search_cdf(&self.joint_cdf, rng.random::<f64>() * total);
                (FieldElem((k % q) as u32), k / q)
            }
        };
        out.copy_from_slice(self.src.column(y));
        x
    }
}

/// Recursive transform over `n` levels: encodes `u` (packed index order)
/// with `x = u G^{⊗n}`.
pub fn polar_transform(kernel: &Matrix, n: usize, u: &[FieldElem]) -> Result<Vec<FieldElem>> {
    let ell = kernel.size();
    let len = ell.pow(n as u32);
    if u.len() != len {
        return Err(Error::LengthMismatch {
            expected: len,
            got: u.len(),
        });
    }
    Ok(polar_transform_rec(kernel, u))
}

fn polar_transform_rec(kernel: &Matrix, u: &[FieldElem]) -> Vec<FieldElem> {
    let ell = kernel.size();
    if u.len() == 1 {
        return u.to_vec();
    }
    let field = kernel.field();
    let sub = u.len() / ell;
    let parts: Vec<Vec<FieldElem>> = (0..ell)
        .map(|b| {
            let slice: Vec<FieldElem> = u.iter().skip(b).step_by(ell).copied().collect();
            polar_transform_rec(kernel, &slice)
        })
        .collect();
    let mut x = vec![FieldElem::ZERO; u.len()];
    for j in 0..sub {
        for c in 0..ell {
            let mut acc = FieldElem::ZERO;
            for (b, part) in parts.iter().enumerate() {
                acc = field.add(acc, field.mul(part[j], kernel.get(b, c)));
            }
            x[j * ell + c] = acc;
        }
    }
    x
}

/// Successive-cancellation recursion. `likelihoods` holds one column per
/// channel use; `decide(index, posterior)` returns the symbol to fix for
/// packed index `index`. Returns the re-encoded channel inputs.
pub fn sc_recursion(
    table: &KernelTable,
    likelihoods: &[Vec<f64>],
    decide: &mut dyn FnMut(usize, &[f64]) -> Result<FieldElem>,
) -> Result<Vec<FieldElem>> {
    let q = table.q;
    let flat: Vec<f64> = likelihoods.iter().flat_map(|v| v.iter().copied()).collect();
    if flat.len() != likelihoods.len() * q {
        return Err(Error::DimensionMismatch(
            "likelihood vectors must have q entries".into(),
        ));
    }
    let mut ws = Workspace::new(q);
    sc_rec(table, &flat, 0, 1, decide, &mut ws)
}

struct Workspace {
    scratch: Vec<f64>,
}

impl Workspace {
    fn new(q: usize) -> Self {
        Self {
            scratch: vec![0.0; q],
        }
    }
}

fn sc_rec(
    table: &KernelTable,
    lik: &[f64],
    base: usize,
    stride: usize,
    decide: &mut dyn FnMut(usize, &[f64]) -> Result<FieldElem>,
    ws: &mut Workspace,
) -> Result<Vec<FieldElem>> {
    let (q, ell) = (table.q, table.ell);
    let len = lik.len() / q;
    if len == 1 {
        let mass: f64 = lik.iter().sum();
        if !(mass > 0.0) {
            return Err(Error::ZeroLikelihood);
        }
        let post: Vec<f64> = lik.iter().map(|v| v / mass).collect();
        return Ok(vec![decide(base, &post)?]);
    }
    let groups = len / ell;
    let mut decided: Vec<Vec<FieldElem>> = Vec::with_capacity(ell);
    let mut prefix = vec![0u32; ell];
    for b in 0..ell {
        let mut child = vec![0.0; groups * q];
        for g in 0..groups {
            let priors: Vec<&[f64]> = (0..ell)
                .map(|c| &lik[(g * ell + c) * q..(g * ell + c + 1) * q])
                .collect();
            for (k, w) in decided.iter().enumerate() {
                prefix[k] = w[g].0;
            }
            let mass = table.posterior_into(&priors, &prefix[..b], &mut ws.scratch);
            let out = &mut child[g * q..(g + 1) * q];
            if mass > 0.0 && mass.is_finite() {
                for (o, v) in out.iter_mut().zip(&ws.scratch) {
                    *o = v / mass;
                }
            } else {
                // rescale and retry before giving up
                let scaled: Vec<Vec<f64>> = priors.iter().map(|p| scale_by_max(p)).collect();
                let refs: Vec<&[f64]> = scaled.iter().map(Vec::as_slice).collect();
                let mass = table.posterior_into(&refs, &prefix[..b], &mut ws.scratch);
                if !(mass > 0.0) {
                    return Err(Error::ZeroLikelihood);
                }
                for (o, v) in out.iter_mut().zip(&ws.scratch) {
                    *o = v / mass;
                }
            }
        }
        let w = sc_rec(table, &child, base + stride * b, stride * ell, decide, ws)?;
        decided.push(w);
    }
    let field = table.kernel.field();
    let mut x = vec![FieldElem::ZERO; len];
    for g in 0..groups {
        for c in 0..ell {
            let mut acc = FieldElem::ZERO;
            for (b, w) in decided.iter().enumerate() {
                acc = field.add(acc, field.mul(w[g], table.kernel.get(b, c)));
            }
            x[g * ell + c] = acc;
        }
    }
    Ok(x)
}

/// Genie-aided posteriors of every subchannel for one block: index `i` gets
/// `P(U_i | earlier U in decoding order, Y)` with the true `u` fed back.
pub fn genie_posteriors(
    table: &KernelTable,
    likelihoods: &[Vec<f64>],
    u: &[FieldElem],
) -> Result<Vec<Vec<f64>>> {
    let mut post = vec![Vec::new(); u.len()];
    sc_recursion(table, likelihoods, &mut |i, p| {
        post[i] = p.to_vec();
        Ok(u[i])
    })?;
    Ok(post)
}

/// Genie-aided posterior of a single subchannel: only the branches on
/// `digits` are expanded, with earlier siblings re-encoded from `u`.
pub fn genie_posterior_path(
    table: &KernelTable,
    likelihoods: &[Vec<f64>],
    u: &[FieldElem],
    digits: &[usize],
) -> Result<Vec<f64>> {
    let (q, ell) = (table.q, table.ell);
    let mut lik: Vec<f64> = likelihoods.iter().flat_map(|v| v.iter().copied()).collect();
    let mut u_cur: Vec<FieldElem> = u.to_vec();
    let mut scratch = vec![0.0; q];
    for &b in digits {
        let len = lik.len() / q;
        let groups = len / ell;
        // inputs of each level-one branch, re-encoded from the known u
        let siblings: Vec<Vec<FieldElem>> = (0..b)
            .map(|s| {
                let slice: Vec<FieldElem> = u_cur.iter().skip(s).step_by(ell).copied().collect();
                polar_transform_rec(&table.kernel, &slice)
            })
            .collect();
        let mut child = vec![0.0; groups * q];
        let mut prefix = vec![0u32; b];
        for g in 0..groups {
            let priors: Vec<&[f64]> = (0..ell)
                .map(|c| &lik[(g * ell + c) * q..(g * ell + c + 1) * q])
                .collect();
            for (k, w) in siblings.iter().enumerate() {
                prefix[k] = w[g].0;
            }
            let mut mass = table.posterior_into(&priors, &prefix, &mut scratch);
            if !(mass > 0.0 && mass.is_finite()) {
                let scaled: Vec<Vec<f64>> = priors.iter().map(|p| scale_by_max(p)).collect();
                let refs: Vec<&[f64]> = scaled.iter().map(Vec::as_slice).collect();
                mass = table.posterior_into(&refs, &prefix, &mut scratch);
                if !(mass > 0.0) {
                    return Err(Error::ZeroLikelihood);
                }
            }
            for (o, v) in child[g * q..(g + 1) * q].iter_mut().zip(&scratch) {
                *o = v / mass;
            }
        }
        lik = child;
        u_cur = u_cur.iter().skip(b).step_by(ell).copied().collect();
    }
    let mass: f64 = lik.iter().sum();
    if !(mass > 0.0) {
        return Err(Error::ZeroLikelihood);
    }
    Ok(lik.iter().map(|v| v / mass).collect())
}

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

/// Monte-Carlo estimates for one subchannel.
#[derive(Clone, Debug, PartialEq)]
pub struct McStats {
    pub entropy: Estimate,
    pub bhattacharyya: Estimate,
    pub bhattacharyya_by_shift: Vec<Estimate>,
    pub error_probability: Estimate,
}

impl McStats {
    pub const CSV_HEADER: &'static str = "path,quantity,estimate,std_error";

    /// CSV rows `(path, quantity, estimate, std_error)`.
    pub fn csv_rows(&self, path: &str) -> Vec<String> {
        let mut rows = vec![
            ("entropy".to_string(), self.entropy),
            ("bhattacharyya".to_string(), self.bhattacharyya),
            ("error_probability".to_string(), self.error_probability),
        ];
        for (d, e) in self.bhattacharyya_by_shift.iter().enumerate() {
            rows.push((format!("bhattacharyya_shift_{}", d + 1), *e));
        }
        rows.into_iter()
            .map(|(name, e)| format!("\"{path}\",{name},{:.12e},{:.12e}", e.mean, e.std_error))
            .collect()
    }
}

/// Per-sample integrands: entropy, error, mean shift value, shift values.
fn integrands(post: &[f64], add: &[usize], q: usize, out: &mut [f64]) {
    let ln_q = (q as f64).ln();
    let mut h = 0.0;
    let mut best = 0;
    for (x, &p) in post.iter().enumerate() {
        if p > 0.0 {
            h -= p * p.ln();
        }
        if p > post[best] {
            best = x;
        }
    }
    out[0] = (h / ln_q).max(0.0);
    // mass off the MAP symbol, summed directly to keep tiny values exact
    out[1] = post
        .iter()
        .enumerate()
        .filter(|&(x, _)| x != best)
        .map(|(_, p)| p)
        .sum();
    let mut z_total = 0.0;
    for d in 1..q {
        let z: f64 = (0..q)
            .map(|x| (post[x] * post[add[x * q + d]]).sqrt())
            .sum();
        out[3 + d - 1] = z;
        z_total += z;
    }
    out[2] = z_total / (q - 1) as f64;
}

fn addition_table(field: &FieldCtx) -> Vec<usize> {
    let q = field.q();
    let mut t = vec![0; q * q];
    for a in field.elements() {
        for b in field.elements() {
            t[a.index() * q + b.index()] = field.add(a, b).index();
        }
    }
    t
}

/// Draws one block and returns the true `u` and per-use columns.
fn draw_block<S: Sampler>(
    sampler: &S,
    inverse: &Matrix,
    n: usize,
    rng: &mut ChaCha8Rng,
    len: usize,
) -> (Vec<FieldElem>, Vec<Vec<f64>>) {
    let q = sampler.field().q();
    let mut lik = vec![vec![0.0; q]; len];
    if sampler.is_symmetric() {
        for l in lik.iter_mut() {
            sampler.sample(rng, Some(FieldElem::ZERO), l);
        }
        (vec![FieldElem::ZERO; len], lik)
    } else {
        let x: Vec<FieldElem> = lik
            .iter_mut()
            .map(|l| sampler.sample(rng, None, l))
            .collect();
        let u = polar_transform(inverse, n, &x).expect("length matches");
        (u, lik)
    }
}

fn rng_for(seed: u64, sample: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(sample);
    rng
}

/// Sums per-index integrands over all samples, chunked for determinism.
fn accumulate<F>(width: usize, n_samples: usize, seed: u64, per_sample: F) -> Result<Vec<f64>>
where
    F: Fn(&mut ChaCha8Rng, &mut [f64]) -> Result<()> + Sync,
{
    if n_samples == 0 {
        return Err(Error::BadSampleCount);
    }
    let chunks = n_samples.div_ceil(CHUNK);
    let partials: Vec<Result<Vec<f64>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![0.0; width];
            let mut vals = vec![0.0; width / 2];
            for s in c * CHUNK..((c + 1) * CHUNK).min(n_samples) {
                let mut rng = rng_for(seed, s as u64);
                per_sample(&mut rng, &mut vals)?;
                for (k, v) in vals.iter().enumerate() {
                    acc[2 * k] += v;
                    acc[2 * k + 1] += v * v;
                }
            }
            Ok(acc)
        })
        .collect();
    let mut total = vec![0.0; width];
    for p in partials {
        for (t, v) in total.iter_mut().zip(p?) {
            *t += v;
        }
    }
    Ok(total)
}

fn estimates_from_sums(sums: &[f64], n_samples: usize, q: usize) -> McStats {
    let n = n_samples as f64;
    let est = |k: usize| {
        let mean = sums[2 * k] / n;
        let var = if n_samples > 1 {
            ((sums[2 * k + 1] / n - mean * mean) * n / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        Estimate {
            mean,
            std_error: (var / n).sqrt(),
        }
    };
    McStats {
        entropy: est(0),
        error_probability: est(1),
        bhattacharyya: est(2),
        bhattacharyya_by_shift: (0..q - 1).map(|d| est(3 + d)).collect(),
    }
}

/// Monte-Carlo estimates of the subchannel at the end of `path`.
pub fn mc_subchannel_stats<S: Sampler>(
    sampler: &S,
    path: &TransformPath,
    n_samples: usize,
    seed: u64,
) -> Result<McStats> {
    let table = KernelTable::new(path.kernel())?;
    let inverse = path.kernel().invert()?;
    let q = sampler.field().q();
    let n = path.depth();
    let len = table.ell.pow(n as u32);
    let add = addition_table(sampler.field());
    let k = 3 + (q - 1);
    let sums = accumulate(2 * k, n_samples, seed, |rng, vals| {
        let (u, lik) = draw_block(sampler, &inverse, n, rng, len);
        let post = genie_posterior_path(&table, &lik, &u, path.digits())?;
        integrands(&post, &add, q, vals);
        Ok(())
    })?;
    Ok(estimates_from_sums(&sums, n_samples, q))
}

/// Monte-Carlo estimates of all `l^n` subchannels from one genie-aided pass
/// per sample; entry `i` is the subchannel with packed index `i`.
pub fn mc_all_subchannels<S: Sampler>(
    sampler: &S,
    kernel: &Matrix,
    n: usize,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<McStats>> {
    let table = KernelTable::new(kernel)?;
    let inverse = kernel.invert()?;
    let q = sampler.field().q();
    let len = table.ell.pow(n as u32);
    let add = addition_table(sampler.field());
    let k = 3 + (q - 1);
    let sums = accumulate(2 * k * len, n_samples, seed, |rng, vals| {
        let (u, lik) = draw_block(sampler, &inverse, n, rng, len);
        let post = genie_posteriors(&table, &lik, &u)?;
        for (i, p) in post.iter().enumerate() {
            integrands(p, &add, q, &mut vals[i * k..(i + 1) * k]);
        }
        Ok(())
    })?;
    Ok((0..len)
        .map(|i| estimates_from_sums(&sums[2 * k * i..2 * k * (i + 1)], n_samples, q))
        .collect())
}

/// Exact `H` at depth `n` along `n_paths` uniformly drawn digit paths.
pub fn martingale_trace(
    src: &DiscreteSource,
    kernel: &Matrix,
    n: usize,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let table = KernelTable::new(kernel)?;
    let ell = table.ell;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let paths: Vec<Vec<usize>> = (0..n_paths)
        .map(|_| (0..n).map(|_| rng.random_range(0..ell)).collect())
        .collect();
    // share transforms between paths with a common prefix
    let mut cache: HashMap<Vec<usize>, DiscreteSource> = HashMap::new();
    cache.insert(Vec::new(), src.clone());
    let mut out = Vec::with_capacity(n_paths);
    for p in &paths {
        for d in 1..=n {
            if !cache.contains_key(&p[..d]) {
                let parent = cache[&p[..d - 1]].clone();
                let child = transform_branch(&parent, &table, p[d - 1])?;
                cache.insert(p[..d].to_vec(), child);
            }
        }
        out.push(chanmodel::stats(&cache[&p[..]]).entropy);
    }
    Ok(out)
}

/// Monte-Carlo fallback: `H` along random paths, each estimated from
/// `samples_per_path` blocks.
pub fn martingale_trace_mc<S: Sampler>(
    sampler: &S,
    kernel: &Matrix,
    n: usize,
    n_paths: usize,
    samples_per_path: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let ell = kernel.size();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_paths)
        .map(|k| {
            let digits: Vec<usize> = (0..n).map(|_| rng.random_range(0..ell)).collect();
            let path = TransformPath::new(kernel, digits)?;
            Ok(
                mc_subchannel_stats(sampler, &path, samples_per_path, seed ^ (k as u64 + 1))?
                    .entropy
                    .mean,
            )
        })
        .collect()
}

/// Exact stats of every subchannel of one kernel transform.
pub fn transform_stats(src: &DiscreteSource, kernel: &Matrix) -> Result<Vec<SubchannelStats>> {
    Ok(basic_transform_exact(src, kernel)?
        .iter()
        .map(chanmodel::stats)
        .collect())
}
