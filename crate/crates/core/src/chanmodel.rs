//! Discrete sources `(X, Y)` over `GF(q) x Y` and their information quantities.
//!
//! A source is stored as its joint distribution, one column per output
//! symbol: `column(y)[x] = P(X = x, Y = y)`. A channel is a source whose
//! input marginal is uniform.

use std::collections::HashMap;
use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::gf::{FieldCtx, FieldElem};

/// Normalization and uniformity tolerance.
pub const PROB_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteSource {
    field: FieldCtx,
    outputs: usize,
    joint: Vec<f64>,
    uniform_input: bool,
    labels: Option<Vec<String>>,
}

impl DiscreteSource {
    /// Validates a joint table given as `q` rows of length `|Y|`, one per input.
    pub fn from_joint(field: &FieldCtx, rows: &[Vec<f64>]) -> Result<Self> {
        let q = field.q();
        if rows.len() != q {
            return Err(Error::DimensionMismatch(format!(
                "joint table needs {q} rows, got {}",
                rows.len()
            )));
        }
        let outputs = rows[0].len();
        if rows.iter().any(|r| r.len() != outputs) {
            return Err(Error::DimensionMismatch("ragged joint table".into()));
        }
        let mut joint = vec![0.0; q * outputs];
        for (x, row) in rows.iter().enumerate() {
            for (y, &v) in row.iter().enumerate() {
                joint[y * q + x] = v;
            }
        }
        Self::from_columns(field, outputs, joint)
    }

    /// Validates a column-major joint table (`joint[y * q + x]`).
    pub fn from_columns(field: &FieldCtx, outputs: usize, joint: Vec<f64>) -> Result<Self> {
        let q = field.q();
        if joint.len() != q * outputs {
            return Err(Error::DimensionMismatch(format!(
                "expected {} joint entries, got {}",
                q * outputs,
                joint.len()
            )));
        }
        for (k, &v) in joint.iter().enumerate() {
            if !(v >= 0.0) {
                return Err(Error::NegativeProbability {
                    input: k % q,
                    output: k / q,
                    value: v,
                });
            }
        }
        let total: f64 = joint.iter().sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::NotNormalized(total));
        }
        Ok(Self::assemble(field, outputs, joint))
    }

    /// Channel from transition rows `P(y | x)` with a uniform input.
    pub fn from_transition(field: &FieldCtx, rows: &[Vec<f64>]) -> Result<Self> {
        let q = field.q() as f64;
        for (x, row) in rows.iter().enumerate() {
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > PROB_TOL {
                return Err(Error::BadParameter(format!(
                    "transition row {x} sums to {s}"
                )));
            }
        }
        let scaled: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| r.iter().map(|v| v / q).collect())
            .collect();
        Self::from_joint(field, &scaled)
    }

    /// Internal constructor for tables produced by exact arithmetic; absorbs
    /// rounding by renormalizing.
    pub(crate) fn from_columns_trusted(
        field: &FieldCtx,
        outputs: usize,
        mut joint: Vec<f64>,
    ) -> Self {
        let total: f64 = joint.iter().sum();
        if total > 0.0 && total != 1.0 {
            joint.iter_mut().for_each(|v| *v /= total);
        }
        Self::assemble(field, outputs, joint)
    }

    /// Overrides the uniform-input flag for tables derived from a source
    /// whose flag is known.
    pub(crate) fn inherit_uniform(mut self, uniform_input: bool) -> Self {
        self.uniform_input = uniform_input;
        self
    }

    fn assemble(field: &FieldCtx, outputs: usize, joint: Vec<f64>) -> Self {
        let q = field.q();
        let mut marg = vec![0.0; q];
        for col in joint.chunks_exact(q) {
            for (m, v) in marg.iter_mut().zip(col) {
                *m += v;
            }
        }
        let uniform_input = marg.iter().all(|m| (m - 1.0 / q as f64).abs() <= PROB_TOL);
        Self {
            field: field.clone(),
            outputs,
            joint,
            uniform_input,
            labels: None,
        }
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.outputs {
            return Err(Error::LengthMismatch {
                expected: self.outputs,
                got: labels.len(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn field(&self) -> &FieldCtx {
        &self.field
    }

    pub fn q(&self) -> usize {
        self.field.q()
    }

    pub fn output_size(&self) -> usize {
        self.outputs
    }

    pub fn is_uniform_input(&self) -> bool {
        self.uniform_input
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    #[inline]
    pub fn joint(&self, x: usize, y: usize) -> f64 {
        self.joint[y * self.q() + x]
    }

    /// `[P(x, y)]_x` for a fixed output.
    #[inline]
    pub fn column(&self, y: usize) -> &[f64] {
        let q = self.q();
        &self.joint[y * q..(y + 1) * q]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        self.joint.chunks_exact(self.q())
    }

    pub fn joint_table(&self) -> &[f64] {
        &self.joint
    }

    pub fn input_marginal(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.q()];
        for col in self.columns() {
            for (a, v) in m.iter_mut().zip(col) {
                *a += v;
            }
        }
        m
    }

    pub fn output_marginal(&self) -> Vec<f64> {
        self.columns().map(|c| c.iter().sum()).collect()
    }

    /// `P(y | x)`, defined for inputs with positive probability.
    pub fn transition(&self, x: usize, y: usize) -> f64 {
        let px: f64 = self.columns().map(|c| c[x]).sum();
        if px > 0.0 {
            self.joint(x, y) / px
        } else {
            0.0
        }
    }

    /// Posterior `P(x | y)`; uniform for a zero-mass output.
    pub fn posterior(&self, y: usize) -> Vec<f64> {
        let col = self.column(y);
        let s: f64 = col.iter().sum();
        if s > 0.0 {
            col.iter().map(|v| v / s).collect()
        } else {
            vec![1.0 / self.q() as f64; self.q()]
        }
    }

    /// Rows of the joint table, one per input, as stored in source files.
    pub fn joint_rows(&self) -> Vec<Vec<f64>> {
        (0..self.q())
            .map(|x| (0..self.outputs).map(|y| self.joint(x, y)).collect())
            .collect()
    }

    /// Parses the text format: field spec, output size, then `q` rows.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let field: FieldCtx = lines
            .next()
            .ok_or_else(|| Error::Parse("missing field line".into()))?
            .parse()?;
        let outputs: usize = lines
            .next()
            .ok_or_else(|| Error::Parse("missing output size".into()))?
            .parse()
            .map_err(|_| Error::Parse("bad output size".into()))?;
        let values: Vec<f64> = lines
            .flat_map(str::split_whitespace)
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad probability {t:?}")))
            })
            .collect::<Result<_>>()?;
        if values.len() != field.q() * outputs {
            return Err(Error::Parse(format!(
                "expected {} probabilities, got {}",
                field.q() * outputs,
                values.len()
            )));
        }
        let rows: Vec<Vec<f64>> = values.chunks(outputs.max(1)).map(<[f64]>::to_vec).collect();
        Self::from_joint(&field, &rows)
    }
}

impl fmt::Display for DiscreteSource {
    /// Writes the text format accepted by [`DiscreteSource::parse`].
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.field)?;
        writeln!(f, "{}", self.outputs)?;
        for row in self.joint_rows() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            writeln!(f, "{}", cells.join(" "))?;
        }
        Ok(())
    }
}

/// q-ary symmetric channel: correct with probability `1 - eps`, otherwise
/// uniform over the other symbols.
pub fn qsc(field: &FieldCtx, eps: f64) -> Result<DiscreteSource> {
    let q = field.q();
    let max = (q - 1) as f64 / q as f64;
    if !(0.0..=max + PROB_TOL).contains(&eps) {
        return Err(Error::BadParameter(format!(
            "crossover {eps} outside [0, {max}]"
        )));
    }
    let rows: Vec<Vec<f64>> = (0..q)
        .map(|x| {
            (0..q)
                .map(|y| {
                    if x == y {
                        1.0 - eps
                    } else {
                        eps / (q - 1) as f64
                    }
                })
                .collect()
        })
        .collect();
    DiscreteSource::from_transition(field, &rows)
}

/// Erasure channel; output `q` is the erasure symbol.
pub fn erasure(field: &FieldCtx, eps: f64) -> Result<DiscreteSource> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::BadParameter(format!(
            "erasure probability {eps} outside [0, 1]"
        )));
    }
    let q = field.q();
    let rows: Vec<Vec<f64>> = (0..q)
        .map(|x| {
            (0..=q)
                .map(|y| match y {
                    _ if y == q => eps,
                    _ if y == x => 1.0 - eps,
                    _ => 0.0,
                })
                .collect()
        })
        .collect();
    let labels = (0..q)
        .map(|y| y.to_string())
        .chain(["?".to_string()])
        .collect();
    DiscreteSource::from_transition(field, &rows)?.with_labels(labels)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Subset-output channel: the output is a uniformly chosen subset of size `k`
/// (probability `1 - eps`) or `k + 1` (probability `eps`) containing the input.
pub fn subset_channel(field: &FieldCtx, k: usize, eps: f64) -> Result<DiscreteSource> {
    let q = field.q();
    if k == 0 || k >= q {
        return Err(Error::BadParameter(format!(
            "subset size {k} outside [1, {}]",
            q - 1
        )));
    }
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::BadParameter(format!("eps {eps} outside [0, 1]")));
    }
    if q > 16 {
        return Err(Error::BadParameter(
            "subset channel limited to q <= 16".into(),
        ));
    }
    let subsets: Vec<u32> = [k, k + 1]
        .iter()
        .flat_map(|&size| (0u32..1 << q).filter(move |s| s.count_ones() as usize == size))
        .collect();
    let small = (1.0 - eps) / binomial(q - 1, k - 1);
    let large = eps / binomial(q - 1, k);
    let rows: Vec<Vec<f64>> = (0..q)
        .map(|x| {
            subsets
                .iter()
                .map(|&s| match (s >> x & 1, s.count_ones() as usize == k) {
                    (0, _) => 0.0,
                    (_, true) => small,
                    (_, false) => large,
                })
                .collect()
        })
        .collect();
    let labels = subsets
        .iter()
        .map(|&s| {
            let items: Vec<String> = (0..q)
                .filter(|x| s >> x & 1 == 1)
                .map(|x| x.to_string())
                .collect();
            format!("{{{}}}", items.join(","))
        })
        .collect();
    DiscreteSource::from_transition(field, &rows)?.with_labels(labels)
}

/// Channel whose output carries no information about a uniform input.
pub fn useless_channel(field: &FieldCtx, outputs: usize) -> Result<DiscreteSource> {
    let q = field.q();
    let v = 1.0 / (q * outputs) as f64;
    DiscreteSource::from_columns(field, outputs, vec![v; q * outputs])
}

/// Noiseless channel `Y = X`.
pub fn noiseless(field: &FieldCtx) -> DiscreteSource {
    qsc(field, 0.0).expect("zero crossover is valid")
}

/// All information quantities of one (sub)channel.
#[derive(Clone, Debug, PartialEq)]
pub struct SubchannelStats {
    /// Conditional entropy `H(X | Y)`, base `q`.
    pub entropy: f64,
    /// Bhattacharyya parameter, the mean of the shift-wise values.
    pub bhattacharyya: f64,
    /// Shift-wise Bhattacharyya values, entry `d - 1` for shift `d`.
    pub bhattacharyya_by_shift: Vec<f64>,
    /// Pairwise values `sum_y sqrt(P(y|x) P(y|x'))`, row-major `q x q`;
    /// channels only.
    pub pairwise: Option<Vec<f64>>,
    /// Error probability of the MAP estimate of `X`.
    pub error_probability: f64,
    /// Expected total variation between posterior and uniform.
    pub total_variation: f64,
    /// Mean Fourier magnitude over nonzero frequencies.
    pub fourier: f64,
    /// Fourier magnitude per frequency, entry `w - 1` for frequency `w`.
    pub fourier_by_freq: Vec<f64>,
    pub max_pair_bhattacharyya: Option<f64>,
    pub min_pair_bhattacharyya: Option<f64>,
    pub max_fourier: f64,
    pub min_fourier: f64,
}

impl SubchannelStats {
    /// Largest pairwise value over distinct inputs.
    pub fn z_max(&self) -> Result<f64> {
        self.max_pair_bhattacharyya
            .ok_or(Error::NonUniformInputForChannelQuantity)
    }

    /// Smallest pairwise value over all input pairs.
    pub fn z_min(&self) -> Result<f64> {
        self.min_pair_bhattacharyya
            .ok_or(Error::NonUniformInputForChannelQuantity)
    }

    pub const CSV_HEADER: &'static str =
        "entropy,bhattacharyya,error_probability,total_variation,fourier,z_max,z_min,s_max,s_min";

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(String::new, |v| format!("{v:.12e}"));
        format!(
            "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{},{},{:.12e},{:.12e}",
            self.entropy,
            self.bhattacharyya,
            self.error_probability,
            self.total_variation,
            self.fourier,
            opt(self.max_pair_bhattacharyya),
            opt(self.min_pair_bhattacharyya),
            self.max_fourier,
            self.min_fourier
        )
    }

    pub fn to_key_values(&self) -> String {
        let list = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x:.12e}"))
                .collect::<Vec<_>>()
                .join(",")
        };
        let opt =
            |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |v| format!("{v:.12e}"));
        let mut out = vec![
            format!("entropy={:.12e}", self.entropy),
            format!("bhattacharyya={:.12e}", self.bhattacharyya),
            format!(
                "bhattacharyya_by_shift={}",
                list(&self.bhattacharyya_by_shift)
            ),
            format!("error_probability={:.12e}", self.error_probability),
            format!("total_variation={:.12e}", self.total_variation),
            format!("fourier={:.12e}", self.fourier),
            format!("fourier_by_freq={}", list(&self.fourier_by_freq)),
            format!("z_max={}", opt(self.max_pair_bhattacharyya)),
            format!("z_min={}", opt(self.min_pair_bhattacharyya)),
            format!("s_max={:.12e}", self.max_fourier),
            format!("s_min={:.12e}", self.min_fourier),
        ];
        out.push(String::new());
        out.join("\n")
    }
}

/// Precomputed addition and character tables for fast per-column sums.
pub(crate) struct FieldTables {
    /// `add[x * q + d] = x + d`
    pub add: Vec<usize>,
    /// `chi[w * q + z] = character(w z)`
    pub chi: Vec<Complex64>,
}

impl FieldTables {
    pub fn new(field: &FieldCtx) -> Self {
        let q = field.q();
        let mut add = vec![0; q * q];
        let mut chi = vec![Complex64::new(0.0, 0.0); q * q];
        for a in field.elements() {
            for b in field.elements() {
                add[a.index() * q + b.index()] = field.add(a, b).index();
                chi[a.index() * q + b.index()] = field.character(field.mul(a, b));
            }
        }
        Self { add, chi }
    }
}

/// Entropy in base `q` of a (possibly unnormalized) nonnegative vector
/// scaled by its mass: returns `-sum c ln(c / s)` with `s = sum c`, in nats.
fn column_entropy_nats(col: &[f64], mass: f64) -> f64 {
    col.iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| -c * (c / mass).ln())
        .sum()
}

pub fn stats(src: &DiscreteSource) -> SubchannelStats {
    let t = FieldTables::new(src.field());
    stats_with_tables(src, &t)
}

pub(crate) fn stats_with_tables(src: &DiscreteSource, t: &FieldTables) -> SubchannelStats {
    let q = src.q();
    let qf = q as f64;
    let mut h = 0.0;
    let mut z_shift = vec![0.0; q - 1];
    let mut pairwise = vec![0.0; q * q];
    let mut map_mass = 0.0;
    let mut tv = 0.0;
    let mut s_freq = vec![0.0; q - 1];
    let mut sqrt_col = vec![0.0; q];
    for col in src.columns() {
        let mass: f64 = col.iter().sum();
        if mass <= 0.0 {
            continue;
        }
        h += column_entropy_nats(col, mass);
        for (s, &c) in sqrt_col.iter_mut().zip(col) {
            *s = c.sqrt();
        }
        for d in 1..q {
            let mut acc = 0.0;
            for x in 0..q {
                acc += sqrt_col[x] * sqrt_col[t.add[x * q + d]];
            }
            z_shift[d - 1] += acc;
        }
        for x in 0..q {
            for x2 in 0..q {
                pairwise[x * q + x2] += sqrt_col[x] * sqrt_col[x2];
            }
        }
        map_mass += col.iter().copied().fold(0.0, f64::max);
        let u = mass / qf;
        tv += col.iter().map(|&c| (c - u).abs()).sum::<f64>();
        for w in 1..q {
            let chi = &t.chi[w * q..(w + 1) * q];
            let mut acc = Complex64::new(0.0, 0.0);
            for (c, ch) in col.iter().zip(chi) {
                acc += ch * *c;
            }
            s_freq[w - 1] += acc.norm();
        }
    }
    let entropy = (h / qf.ln()).clamp(0.0, 1.0);
    let bhattacharyya = z_shift.iter().sum::<f64>() / (qf - 1.0);
    let fourier = s_freq.iter().sum::<f64>() / (qf - 1.0);
    let (pairwise, zmax, zmin) = if src.is_uniform_input() {
        // P(y|x) = q P(x,y) for a uniform input
        let pw: Vec<f64> = pairwise.iter().map(|v| v * qf).collect();
        let max = (0..q)
            .flat_map(|x| (0..q).filter(move |&x2| x2 != x).map(move |x2| (x, x2)))
            .map(|(x, x2)| pw[x * q + x2])
            .fold(f64::NEG_INFINITY, f64::max);
        let min = pw.iter().copied().fold(f64::INFINITY, f64::min);
        (Some(pw), Some(max), Some(min))
    } else {
        (None, None, None)
    };
    SubchannelStats {
        entropy,
        bhattacharyya,
        max_fourier: s_freq.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        min_fourier: s_freq.iter().copied().fold(f64::INFINITY, f64::min),
        bhattacharyya_by_shift: z_shift,
        pairwise,
        error_probability: (1.0 - map_mass).max(0.0),
        total_variation: tv,
        fourier,
        fourier_by_freq: s_freq,
        max_pair_bhattacharyya: zmax,
        min_pair_bhattacharyya: zmin,
    }
}

/// Channel `(X, (X + N, Z))` with uniform `X`, built from a source `(N, Z)`.
/// Output `(s, z)` is numbered `s * |Z| + z`.
pub fn symmetrize(src: &DiscreteSource) -> DiscreteSource {
    let field = src.field();
    let q = src.q();
    let nz = src.output_size();
    let mut joint = vec![0.0; q * q * nz];
    for s in field.elements() {
        for z in 0..nz {
            let out = s.index() * nz + z;
            for x in field.elements() {
                let noise = field.sub(s, x);
                joint[out * q + x.index()] = src.joint(noise.index(), z) / q as f64;
            }
        }
    }
    DiscreteSource::from_columns_trusted(field, q * nz, joint)
}

/// Posterior coordinates closer than this are treated as equal.
const POSTERIOR_TOL: f64 = 1e-9;

/// Posterior distributions with their output mass, grouped by approximate
/// equality and sorted by a generic linear projection.
fn posterior_profile(cols: impl Iterator<Item = Vec<f64>>) -> Vec<(f64, Vec<f64>, f64)> {
    let mut items: Vec<(f64, Vec<f64>, f64)> = cols
        .filter_map(|c| {
            let mass: f64 = c.iter().sum();
            (mass > 0.0).then(|| {
                let post: Vec<f64> = c.iter().map(|v| v / mass).collect();
                let proj = post
                    .iter()
                    .enumerate()
                    .map(|(k, v)| v * (k as f64 + 1.0).sqrt())
                    .sum();
                (proj, post, mass)
            })
        })
        .collect();
    items.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut groups: Vec<(f64, Vec<f64>, f64)> = Vec::new();
    for (proj, post, mass) in items {
        // a few groups may share nearly the same projection
        let hit = groups
            .iter_mut()
            .rev()
            .take_while(|g| proj - g.0 <= 8.0 * POSTERIOR_TOL)
            .find(|g| close_vectors(&g.1, &post));
        match hit {
            Some(g) => g.2 += mass,
            None => groups.push((proj, post, mass)),
        }
    }
    groups
}

fn close_vectors(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= POSTERIOR_TOL)
}

/// Whether the channel looks the same from every input up to an output
/// permutation, i.e. whether it is symmetric with respect to addition.
/// Outputs with equal posteriors are pooled before comparing.
pub fn is_symmetric(src: &DiscreteSource) -> Result<bool> {
    if !src.is_uniform_input() {
        return Err(Error::NonUniformInput);
    }
    let field = src.field();
    let base = posterior_profile(src.columns().map(<[f64]>::to_vec));
    for d in field.nonzero_elements() {
        let shifted = posterior_profile(src.columns().map(|c| {
            field
                .elements()
                .map(|x| c[field.add(x, d).index()])
                .collect()
        }));
        let same = shifted.len() == base.len()
            && shifted.iter().zip(&base).all(|(a, b)| {
                close_vectors(&a.1, &b.1)
                    && (a.2 - b.2).abs() <= POSTERIOR_TOL * a.2.max(b.2) + 1e-15
            });
        if !same {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Remaps input `x` to `r x + d`.
pub fn relabel(src: &DiscreteSource, r: FieldElem, d: FieldElem) -> Result<DiscreteSource> {
    let field = src.field();
    if r.is_zero() {
        return Err(Error::BadParameter("relabel needs a nonzero scale".into()));
    }
    let q = src.q();
    let mut joint = vec![0.0; src.joint.len()];
    for y in 0..src.output_size() {
        for x in field.elements() {
            let nx = field.add(field.mul(r, x), d);
            joint[y * q + nx.index()] = src.joint(x.index(), y);
        }
    }
    let mut out = DiscreteSource::assemble(field, src.output_size(), joint);
    out.labels = src.labels.clone();
    Ok(out)
}

/// New output `j` is old output `perm[j]`.
pub fn permute_outputs(src: &DiscreteSource, perm: &[usize]) -> Result<DiscreteSource> {
    let n = src.output_size();
    let mut seen = vec![false; n];
    if perm.len() != n
        || perm
            .iter()
            .any(|&p| p >= n || std::mem::replace(&mut seen[p], true))
    {
        return Err(Error::BadParameter(
            "not a permutation of the outputs".into(),
        ));
    }
    let joint: Vec<f64> = perm
        .iter()
        .flat_map(|&p| src.column(p).iter().copied())
        .collect();
    let mut out = DiscreteSource::assemble(src.field(), n, joint);
    out.labels = src
        .labels
        .as_ref()
        .map(|l| perm.iter().map(|&p| l[p].clone()).collect());
    Ok(out)
}

/// Merges outputs with proportional columns; drops zero-mass outputs.
///
/// Columns are compared through their normalized posteriors rounded to a
/// relative precision near `1e-12`, so the result is exact up to rounding.
pub fn merge_equivalent_outputs(src: &DiscreteSource) -> DiscreteSource {
    let q = src.q();
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut joint: Vec<f64> = Vec::new();
    let mut key = Vec::with_capacity(q);
    for col in src.columns() {
        let mass: f64 = col.iter().sum();
        if mass <= 0.0 {
            continue;
        }
        key.clear();
        key.extend(col.iter().map(|&c| posterior_key(c / mass)));
        match index.get(&key) {
            Some(&k) => {
                for (a, c) in joint[k * q..(k + 1) * q].iter_mut().zip(col) {
                    *a += c;
                }
            }
            None => {
                index.insert(key.clone(), index.len());
                joint.extend_from_slice(col);
            }
        }
    }
    let outputs = joint.len() / q;
    let mut out = DiscreteSource::assemble(src.field(), outputs, joint);
    out.uniform_input = src.uniform_input;
    out
}

/// Bit pattern of `v` with the low mantissa bits dropped (relative precision
/// about `2^-40`); zero maps to zero.
#[inline]
pub(crate) fn posterior_key(v: f64) -> u64 {
    if v <= 0.0 {
        return 0;
    }
    let bits = v.to_bits();
    // round to nearest at bit 12
    (bits + (1 << 11)) >> 12
}

/// Bounds on the error probability in terms of the Bhattacharyya parameter.
pub fn error_bounds_from_bhattacharyya(q: usize, z: f64) -> (f64, f64) {
    let qf = q as f64;
    let z = z.clamp(0.0, 1.0);
    let lower = (qf - 1.0) / (qf * qf) * ((1.0 + (qf - 1.0) * z).sqrt() - (1.0 - z).sqrt()).powi(2);
    let upper = (1..q)
        .map(|k| {
            let k = k as f64;
            ((qf - 1.0) * z + k * (k - 1.0)) / (k * (k + 1.0))
        })
        .fold(f64::INFINITY, f64::min);
    (lower, upper)
}

/// Bounds on the total variation in terms of the error probability.
pub fn variation_bounds_from_error(q: usize, pe: f64) -> (f64, f64) {
    let qf = q as f64;
    let lower = 2.0 * ((qf - 1.0) / qf - pe);
    let best = (1..q)
        .map(|k| {
            let k = k as f64;
            k * (k + 1.0) * pe - k * (k - 1.0)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    (lower, 2.0 * (qf - 1.0) / qf - 2.0 / qf * best)
}

/// Bounds on the mean Fourier magnitude in terms of the error probability.
pub fn fourier_bounds_from_error(q: usize, pe: f64) -> (f64, f64) {
    let qf = q as f64;
    let c = qf / (qf - 1.0);
    let lower = 1.0 - c * pe;
    let upper = (1..q)
        .map(|k| {
            let k = k as f64;
            let a = (1.0 - c * (k - 1.0) / k).max(0.0).sqrt();
            let b = (1.0 - c * k / (k + 1.0)).max(0.0).sqrt();
            k * (k + 1.0) * ((k / (k + 1.0) - pe) * a + (pe - (k - 1.0) / k) * b)
        })
        .fold(f64::INFINITY, f64::min);
    (lower, upper)
}

/// Random source generators for property batteries.
pub mod random {
    use super::*;

    /// Dirichlet(1) weights with occasional exact zeros.
    fn weights<R: Rng + ?Sized>(n: usize, rng: &mut R, sparse: bool) -> Vec<f64> {
        loop {
            let w: Vec<f64> = (0..n)
                .map(|_| {
                    if sparse && rng.random_bool(0.2) {
                        0.0
                    } else {
                        Exp1.sample(rng)
                    }
                })
                .collect();
            let s: f64 = w.iter().sum();
            if s > 0.0 {
                return w.into_iter().map(|v| v / s).collect();
            }
        }
    }

    /// Random joint distribution with `outputs` symbols.
    pub fn source<R: Rng + ?Sized>(
        field: &FieldCtx,
        outputs: usize,
        rng: &mut R,
    ) -> DiscreteSource {
        let q = field.q();
        let sparse = rng.random_bool(0.3);
        let joint = weights(q * outputs, rng, sparse);
        DiscreteSource::from_columns_trusted(field, outputs, joint)
    }

    /// Random uniform-input channel with `outputs` symbols.
    pub fn channel<R: Rng + ?Sized>(
        field: &FieldCtx,
        outputs: usize,
        rng: &mut R,
    ) -> DiscreteSource {
        let q = field.q();
        let sparse = rng.random_bool(0.3);
        let mut joint = vec![0.0; q * outputs];
        for x in 0..q {
            for (y, w) in weights(outputs, rng, sparse).into_iter().enumerate() {
                joint[y * q + x] = w / q as f64;
            }
        }
        let mut src = DiscreteSource::from_columns_trusted(field, outputs, joint);
        src.uniform_input = true;
        src
    }

    /// Random symmetric channel obtained from a random noise source.
    pub fn symmetric_channel<R: Rng + ?Sized>(
        field: &FieldCtx,
        noise_outputs: usize,
        rng: &mut R,
    ) -> DiscreteSource {
        symmetrize(&source(field, noise_outputs, rng))
    }
}
