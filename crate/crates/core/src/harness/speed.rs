use crate::chanmodel::DiscreteSource;
use crate::error::{Error, Result};
use crate::gf::FieldElem;
use crate::kernel::Matrix;

/// Leaf budget for exhaustive index enumeration.
const LEAF_BUDGET: usize = 1 << 24;

/// `table[i][k]`: number of erasure patterns with `k` erased positions that
/// leave input `i` undetermined given inputs `0..i`.
pub fn erasure_table(kernel: &Matrix) -> Result<Vec<Vec<u64>>> {
    let ell = kernel.size();
    let q = kernel.field().q();
    kernel.invert()?;
    if q.checked_pow(ell as u32).is_none_or(|t| t > 1 << 20) || ell > 20 {
        return Err(Error::BudgetExceeded(format!(
            "erasure patterns of a {ell}x{ell} kernel over {q} symbols"
        )));
    }
    let mut table = vec![vec![0u64; ell + 1]; ell];
    for (i, row) in table.iter_mut().enumerate() {
        // nonzero combinations of rows i.. with coefficient one on row i
        let free = ell - i - 1;
        let words: Vec<Vec<FieldElem>> = (0..q.pow(free as u32))
            .map(|idx| {
                let mut u = vec![FieldElem::ZERO; ell];
                u[i] = FieldElem::ONE;
                let mut r = idx;
                for uk in u.iter_mut().skip(i + 1) {
                    *uk = FieldElem((r % q) as u32);
                    r /= q;
                }
                kernel.left_mul_vec(&u).expect("sizes match")
            })
            .collect();
        for mask in 0u32..1 << ell {
            // undetermined iff some such word vanishes on every unerased position
            let hidden = words
                .iter()
                .any(|x| (0..ell).all(|j| mask >> j & 1 == 1 || x[j].is_zero()));
            if hidden {
                row[mask.count_ones() as usize] += 1;
            }
        }
    }
    Ok(table)
}

/// Erasure probability if `src` is a q-ary erasure channel: uniform input,
/// every output either reveals the input or says nothing, with the same
/// erasure probability for every input.
pub fn erasure_probability(src: &DiscreteSource) -> Option<f64> {
    if !src.is_uniform_input() {
        return None;
    }
    let q = src.q();
    let mut erased = vec![0.0; q];
    for col in src.columns() {
        let mass: f64 = col.iter().sum();
        if mass == 0.0 {
            continue;
        }
        let nonzero = col.iter().filter(|&&v| v > 0.0).count();
        let flat = col
            .iter()
            .all(|&v| (v - mass / q as f64).abs() <= 1e-12 * mass);
        if flat {
            erased.iter_mut().for_each(|e| *e += mass / q as f64);
        } else if nonzero != 1 {
            return None;
        }
    }
    let eps = erased[0] * q as f64;
    erased
        .iter()
        .all(|&e| (e * q as f64 - eps).abs() <= 1e-12)
        .then_some(eps.clamp(0.0, 1.0))
}

/// `log2(1 - 2^-l)` for `l >= 0`.
fn log2_one_minus_pow2(l: f64) -> f64 {
    if l == f64::INFINITY {
        0.0
    } else {
        (-(-l * std::f64::consts::LN_2).exp_m1()).log2()
    }
}

/// `log2 sum_k counts[k] z^k (1 - z)^(l - k)` from `lz = log2 z` and
/// `l1z = log2 (1 - z)`.
fn log2_pattern_sum(counts: &[u64], lz: f64, l1z: f64) -> f64 {
    let ell = counts.len() - 1;
    let terms: Vec<f64> = counts
        .iter()
        .enumerate()
        .filter(|&(_, &a)| a > 0)
        .map(|(k, &a)| {
            let mut t = (a as f64).log2();
            if k > 0 {
                t += k as f64 * lz;
            }
            if ell > k {
                t += (ell - k) as f64 * l1z;
            }
            t
        })
        .collect();
    let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return top;
    }
    top + terms.iter().map(|t| (t - top).exp2()).sum::<f64>().log2()
}

/// One branch of the erasure recursion on `l = -log2 z`. `hidden[k]` counts
/// erasure patterns of weight `k` that hide the input, `shown[k]` the rest.
fn next_level(hidden: &[u64], shown: &[u64], l: f64) -> f64 {
    let (lz, l1z) = (-l, log2_one_minus_pow2(l));
    let log_shown = log2_pattern_sum(shown, lz, l1z);
    if log_shown <= -1.0 {
        // z' >= 1/2: go through the complement to keep precision near one
        return (-(-log_shown.exp2()).ln_1p() / std::f64::consts::LN_2).max(0.0);
    }
    (-log2_pattern_sum(hidden, lz, l1z)).max(0.0)
}

/// Patterns that reveal the input, per weight.
fn complement(table: &[Vec<u64>]) -> Vec<Vec<u64>> {
    table
        .iter()
        .map(|row| {
            let ell = row.len() - 1;
            row.iter()
                .enumerate()
                .map(|(k, &a)| binomial(ell, k) - a)
                .collect()
        })
        .collect()
}

fn binomial(n: usize, k: usize) -> u64 {
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i + 1) as u64)
}

/// `-log2 Z` of every subchannel at depth `n` of an erasure channel,
/// indexed by the packed branch index.
pub fn erasure_log_bhattacharyya(kernel: &Matrix, eps: f64, n: usize) -> Result<Vec<f64>> {
    let ell = kernel.size();
    let leaves = ell
        .checked_pow(n as u32)
        .filter(|&l| l <= LEAF_BUDGET)
        .ok_or_else(|| Error::BudgetExceeded(format!("{ell}^{n} indices")))?;
    let table = erasure_table(kernel)?;
    let shown = complement(&table);
    let mut level = vec![-eps.log2()];
    for depth in 0..n {
        let stride = ell.pow(depth as u32);
        let mut next = vec![0.0; level.len() * ell];
        for (idx, &l) in level.iter().enumerate() {
            for (b, (hidden, revealed)) in table.iter().zip(&shown).enumerate() {
                next[idx + b * stride] = next_level(hidden, revealed, l);
            }
        }
        level = next;
    }
    debug_assert_eq!(level.len(), leaves);
    Ok(level)
}

/// Fraction of the `l^n` subchannels with `log_l(-log2 Z) >= threshold * n`;
/// `Z = 0` always counts.
pub fn speed_empiric(
    kernel: &Matrix,
    channel: &DiscreteSource,
    n: usize,
    threshold: f64,
) -> Result<f64> {
    if kernel.field() != channel.field() {
        return Err(Error::DimensionMismatch(
            "kernel and channel use different fields".into(),
        ));
    }
    let eps = erasure_probability(channel)
        .ok_or_else(|| Error::Unsupported("speed counts need an erasure channel".into()))?;
    let logs = erasure_log_bhattacharyya(kernel, eps, n)?;
    let ln_ell = (kernel.size() as f64).ln();
    let target = threshold * n as f64;
    let hits = logs
        .iter()
        .filter(|&&l| l == f64::INFINITY || (l > 0.0 && l.ln() / ln_ell >= target))
        .count();
    Ok(hits as f64 / logs.len() as f64)
}
