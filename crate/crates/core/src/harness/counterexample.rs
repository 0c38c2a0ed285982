use crate::chanmodel::DiscreteSource;
use crate::error::{Error, Result};
use crate::gf::FieldCtx;
use crate::kernel::Matrix;
use crate::polarlab::{mc_all_subchannels, DiscreteSampler};

use super::speed::erasure_table;

/// Deepest exhaustive enumeration.
const DEPTH_LIMIT: usize = 20;

/// Two independent binary erasure sources carried on the two coordinates of
/// a GF(4) symbol (basis `1, a` with `a` primitive).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BecPairSource {
    erasures: [f64; 2],
}

impl BecPairSource {
    pub fn new(first: f64, second: f64) -> Result<Self> {
        for e in [first, second] {
            if !(0.0..=1.0).contains(&e) {
                return Err(Error::BadParameter(format!(
                    "erasure probability {e} outside [0, 1]"
                )));
            }
        }
        Ok(Self {
            erasures: [first, second],
        })
    }

    pub fn erasures(&self) -> [f64; 2] {
        self.erasures
    }

    /// The joint table over GF(4): output `3 * o_1 + o_0` with `o_c` the
    /// received coordinate `c` (`2` = erased).
    pub fn to_source(&self) -> Result<DiscreteSource> {
        let field = FieldCtx::of_size(4)?;
        let basis = field.decomposition(&field.subfield_of_degree(1))?;
        let rows: Vec<Vec<f64>> = field
            .elements()
            .map(|x| {
                let bits = basis.decompose(x);
                (0..9)
                    .map(|y| {
                        let obs = [y % 3, y / 3];
                        obs.iter()
                            .zip(bits)
                            .zip(self.erasures)
                            .map(|((&o, b), e)| match o {
                                2 => e,
                                v if v == b.index() => 1.0 - e,
                                _ => 0.0,
                            })
                            .product::<f64>()
                            / 4.0
                    })
                    .collect()
            })
            .collect();
        let labels = (0..9)
            .map(|y| {
                let sym = |o: usize| ["0", "1", "?"][o];
                format!("{}{}", sym(y % 3), sym(y / 3))
            })
            .collect();
        DiscreteSource::from_joint(&field, &rows)?.with_labels(labels)
    }
}

/// Per-path values at one depth, indexed by the packed branch index.
#[derive(Clone, Debug, PartialEq)]
pub struct PathHistogram {
    pub depth: usize,
    pub values: Vec<f64>,
}

impl PathHistogram {
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Fraction of paths with value in the closed interval `[lo, hi]`.
    pub fn mass_closed(&self, lo: f64, hi: f64) -> f64 {
        fraction(&self.values, |h| (lo..=hi).contains(&h))
    }

    /// Fraction of paths with value in the open interval `(lo, hi)`.
    pub fn mass_open(&self, lo: f64, hi: f64) -> f64 {
        fraction(&self.values, |h| h > lo && h < hi)
    }

    /// Counts over `bins` equal-width bins of `[0, 1]`.
    pub fn bins(&self, bins: usize) -> Vec<usize> {
        let mut counts = vec![0; bins];
        for &h in &self.values {
            counts[((h * bins as f64) as usize).min(bins - 1)] += 1;
        }
        counts
    }

    pub const CSV_HEADER: &'static str = "bin_low,bin_high,count";

    pub fn csv_rows(&self, bins: usize) -> Vec<String> {
        self.bins(bins)
            .iter()
            .enumerate()
            .map(|(k, c)| {
                format!(
                    "{:.6},{:.6},{c}",
                    k as f64 / bins as f64,
                    (k + 1) as f64 / bins as f64
                )
            })
            .collect()
    }
}

fn fraction(values: &[f64], keep: impl Fn(f64) -> bool) -> f64 {
    values.iter().filter(|&&v| keep(v)).count() as f64 / values.len() as f64
}

fn check_kernel(kernel: &Matrix) -> Result<Vec<Vec<u64>>> {
    let field = kernel.field();
    if field.q() != 4 {
        return Err(Error::BadKernel(format!(
            "the two-erasure source lives on GF(4), kernel is over {field}"
        )));
    }
    if kernel
        .entries()
        .iter()
        .any(|&e| !field.is_prime_field_elem(e))
    {
        return Err(Error::BadKernel(
            "kernel entries must lie in the prime subfield".into(),
        ));
    }
    erasure_table(kernel)
}

/// Applies the binary erasure polynomial of one branch.
fn branch(table: &[u64], z: f64) -> f64 {
    let ell = table.len() - 1;
    table
        .iter()
        .enumerate()
        .map(|(k, &a)| a as f64 * z.powi(k as i32) * (1.0 - z).powi((ell - k) as i32))
        .sum()
}

/// Exact `H` of every depth-`n` subchannel of the two-erasure source under a
/// kernel with prime-subfield entries. Each coordinate then polarizes as its
/// own binary erasure source, so `H = (z_0 + z_1) / 2`.
pub fn bec_pair_counterexample(
    kernel: &Matrix,
    source: &BecPairSource,
    n: usize,
) -> Result<PathHistogram> {
    if n > DEPTH_LIMIT {
        return Err(Error::DepthExceeded {
            depth: n,
            limit: DEPTH_LIMIT,
        });
    }
    let table = check_kernel(kernel)?;
    let ell = kernel.size();
    let mut level: Vec<[f64; 2]> = vec![source.erasures];
    for depth in 0..n {
        let stride = ell.pow(depth as u32);
        let mut next = vec![[0.0; 2]; level.len() * ell];
        for (idx, z) in level.iter().enumerate() {
            for (b, row) in table.iter().enumerate() {
                next[idx + b * stride] = [branch(row, z[0]), branch(row, z[1])];
            }
        }
        level = next;
    }
    Ok(PathHistogram {
        depth: n,
        values: level.iter().map(|z| (z[0] + z[1]) / 2.0).collect(),
    })
}

/// Mean `H` over all paths at each depth `0..=n`.
pub fn bec_pair_means(kernel: &Matrix, source: &BecPairSource, n: usize) -> Result<Vec<f64>> {
    (0..=n)
        .map(|d| bec_pair_counterexample(kernel, source, d).map(|h| h.mean()))
        .collect()
}

/// Middle-band masses of a non-polarizing and a polarizing kernel on the
/// same source.
#[derive(Clone, Debug, PartialEq)]
pub struct ContrastReport {
    pub depth: usize,
    /// Exact mass of `H` in `(lo, hi)` for the prime-subfield kernel.
    pub reference_mass: f64,
    /// Monte-Carlo mass of `H` in `(lo, hi)` for the other kernel.
    pub contrast_mass: f64,
}

impl ContrastReport {
    pub fn ratio(&self) -> f64 {
        self.contrast_mass / self.reference_mass
    }
}

/// Compares the open middle band `(lo, hi)` at depth `n`.
#[allow(clippy::too_many_arguments)]
pub fn contrast_middle_mass(
    reference: &Matrix,
    contrast: &Matrix,
    source: &BecPairSource,
    n: usize,
    band: (f64, f64),
    samples: usize,
    seed: u64,
) -> Result<ContrastReport> {
    let exact = bec_pair_counterexample(reference, source, n)?;
    let sampler = DiscreteSampler::new(&source.to_source()?);
    let est = mc_all_subchannels(&sampler, contrast, n, samples, seed)?;
    let h: Vec<f64> = est.iter().map(|s| s.entropy.mean).collect();
    Ok(ContrastReport {
        depth: n,
        reference_mass: exact.mass_open(band.0, band.1),
        contrast_mass: fraction(&h, |v| v > band.0 && v < band.1),
    })
}
