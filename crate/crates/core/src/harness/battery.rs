//! Randomized verification of the information-measure inequalities, the
//! kernel recursions and the Fourier identities.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chanmodel::{
    erasure, error_bounds_from_bhattacharyya, fourier_bounds_from_error, noiseless, qsc, random,
    stats_with_tables, subset_channel, useless_channel, variation_bounds_from_error,
    DiscreteSource, FieldTables, SubchannelStats,
};
use crate::error::{Error, Result};
use crate::gf::{FieldCtx, FieldElem};
use crate::kernel::{gamma_kernel, partial_distances, Matrix};
use crate::polarlab::{basic_transform_exact, macwilliams_residual, transform_stats};

const BOUND_TOL: f64 = 1e-9;
const PARSEVAL_TOL: f64 = 1e-10;
const IDENTITY_TOL: f64 = 1e-9;
const NEAR: f64 = 1e-4;
const FAR: f64 = 0.05;

/// Family of randomly drawn test cases.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// Arbitrary joint distributions, `q` in {2,3,4,5}, up to 6 outputs.
    RandomSource,
    /// Uniform-input channels with a random invertible kernel.
    RandomChannel,
    /// Symmetric channels, checked against the two-by-two cutoff bound.
    SymmetricChannel,
    Qsc,
    Subset,
    /// `X` a function of `Y`.
    Deterministic,
    /// Channels within a hair of noiseless or useless.
    Extreme,
    /// Fourier identity of the basic transform, `q` in {2,3}.
    MacWilliams,
}

impl Family {
    pub const ALL: [Family; 8] = [
        Family::RandomSource,
        Family::RandomChannel,
        Family::SymmetricChannel,
        Family::Qsc,
        Family::Subset,
        Family::Deterministic,
        Family::Extreme,
        Family::MacWilliams,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::RandomSource => "random-source",
            Family::RandomChannel => "random-channel",
            Family::SymmetricChannel => "symmetric-channel",
            Family::Qsc => "qsc",
            Family::Subset => "subset",
            Family::Deterministic => "deterministic",
            Family::Extreme => "extreme",
            Family::MacWilliams => "macwilliams",
        }
    }

    fn stream(self) -> u64 {
        Family::ALL.iter().position(|&f| f == self).unwrap_or(0) as u64
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BatteryConfig {
    /// Cases per family.
    pub cases: usize,
    pub seed: u64,
    pub families: Vec<Family>,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        Self {
            cases: 1000,
            seed: 2024,
            families: Family::ALL.to_vec(),
        }
    }
}

impl BatteryConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::ConfigError(e.to_string()))
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("battery config serializes")
    }

    /// Rejects batteries smaller than a thousand cases per family.
    pub fn validate(&self) -> Result<()> {
        if self.cases < 1000 {
            return Err(Error::ConfigError(format!(
                "cases = {} (need at least 1000)",
                self.cases
            )));
        }
        if self.families.is_empty() {
            return Err(Error::ConfigError("no families selected".into()));
        }
        Ok(())
    }
}

/// How a measured value is judged.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckKind {
    /// Value is a margin `rhs - lhs`; violated below `-tolerance`.
    Bound,
    /// Value is an absolute residual; violated above `tolerance`.
    Identity,
}

impl CheckKind {
    fn violated(self, value: f64, tolerance: f64) -> bool {
        match self {
            CheckKind::Bound => !(value >= -tolerance),
            CheckKind::Identity => !(value <= tolerance),
        }
    }

    /// True when `a` is a worse outcome than `b`.
    fn worse(self, a: f64, b: f64) -> bool {
        match self {
            CheckKind::Bound => a < b || a.is_nan(),
            CheckKind::Identity => a > b || a.is_nan(),
        }
    }

    fn name(self) -> &'static str {
        match self {
            CheckKind::Bound => "bound",
            CheckKind::Identity => "identity",
        }
    }
}

/// Aggregate result of one check over one family.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub family: Family,
    pub check: &'static str,
    pub kind: CheckKind,
    /// Cases where the check applied.
    pub cases: usize,
    pub violations: usize,
    /// Smallest margin (bounds) or largest residual (identities).
    pub worst_slack: f64,
    pub tolerance: f64,
    /// Text form of the worst violating case.
    pub violator: Option<String>,
}

impl CheckOutcome {
    pub const CSV_HEADER: &'static str =
        "family,check,kind,cases,violations,worst_slack,tolerance,passed";

    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{:e},{:e},{}",
            self.family,
            self.check,
            self.kind.name(),
            self.cases,
            self.violations,
            self.worst_slack,
            self.tolerance,
            self.passed()
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatteryReport {
    pub outcomes: Vec<CheckOutcome>,
}

impl BatteryReport {
    pub fn passed(&self) -> bool {
        self.outcomes.iter().all(CheckOutcome::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckOutcome> {
        self.outcomes.iter().filter(|o| !o.passed())
    }

    pub fn find(&self, family: Family, check: &str) -> Option<&CheckOutcome> {
        self.outcomes
            .iter()
            .find(|o| o.family == family && o.check == check)
    }

    /// Cases examined per family (maximum over its checks).
    pub fn cases(&self, family: Family) -> usize {
        self.outcomes
            .iter()
            .filter(|o| o.family == family)
            .map(|o| o.cases)
            .max()
            .unwrap_or(0)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CheckOutcome::CSV_HEADER);
        out.push('\n');
        for o in &self.outcomes {
            out.push_str(&o.csv_row());
            out.push('\n');
        }
        out
    }
}

/// One randomly drawn case.
struct Case {
    source: DiscreteSource,
    kernel: Option<Matrix>,
    /// `(k, eps)` for subset channels.
    subset: Option<(usize, f64)>,
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.source)?;
        if let Some((k, eps)) = self.subset {
            writeln!(f, "# subset k = {k}, eps = {eps:e}")?;
        }
        if let Some(g) = &self.kernel {
            writeln!(f, "# kernel")?;
            write!(f, "{g}")?;
        }
        Ok(())
    }
}

struct Measurement {
    check: &'static str,
    kind: CheckKind,
    tolerance: f64,
    value: f64,
}

fn bound(out: &mut Vec<Measurement>, check: &'static str, margin: f64) {
    out.push(Measurement {
        check,
        kind: CheckKind::Bound,
        tolerance: BOUND_TOL,
        value: margin,
    });
}

fn identity(out: &mut Vec<Measurement>, check: &'static str, tolerance: f64, residual: f64) {
    out.push(Measurement {
        check,
        kind: CheckKind::Identity,
        tolerance,
        value: residual,
    });
}

fn field_of(q: u64) -> FieldCtx {
    FieldCtx::of_size(q).expect("battery fields are valid")
}

fn pick<R: Rng>(rng: &mut R, sizes: &[u64]) -> FieldCtx {
    field_of(sizes[rng.random_range(0..sizes.len())])
}

fn random_kernel<R: Rng>(field: &FieldCtx, ell: usize, rng: &mut R) -> Matrix {
    loop {
        let g = Matrix::random_invertible(field, ell, rng);
        if !g.is_identity() {
            return g;
        }
    }
}

fn deterministic_source<R: Rng>(field: &FieldCtx, rng: &mut R) -> DiscreteSource {
    let q = field.q();
    let outputs = rng.random_range(1..=6);
    let mut joint = vec![0.0; q * outputs];
    for y in 0..outputs {
        joint[y * q + rng.random_range(0..q)] = rng.random_range(0.05..1.0);
    }
    let total: f64 = joint.iter().sum();
    joint.iter_mut().for_each(|v| *v /= total);
    DiscreteSource::from_columns(field, outputs, joint).expect("normalized")
}

fn extreme_source<R: Rng>(field: &FieldCtx, rng: &mut R) -> DiscreteSource {
    let q = field.q();
    let tiny = 10f64.powf(-rng.random_range(3.0..9.0));
    let max = (q - 1) as f64 / q as f64;
    let made = match rng.random_range(0..6) {
        0 => qsc(field, tiny),
        1 => qsc(field, max * (1.0 - tiny)),
        2 => erasure(field, tiny),
        3 => erasure(field, 1.0 - tiny),
        4 => useless_channel(field, rng.random_range(1..4)),
        _ => Ok(noiseless(field)),
    };
    made.expect("parameters in range")
}

fn draw(family: Family, seed: u64, index: usize) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(family.stream() << 40 | index as u64);
    let plain = |source| Case {
        source,
        kernel: None,
        subset: None,
    };
    match family {
        Family::RandomSource => {
            let field = pick(&mut rng, &[2, 3, 4, 5]);
            let outputs = rng.random_range(1..=6);
            plain(random::source(&field, outputs, &mut rng))
        }
        Family::RandomChannel => {
            let field = pick(&mut rng, &[2, 3, 4]);
            let ell = rng.random_range(2..=3);
            let outputs = rng.random_range(1..=3);
            let source = random::channel(&field, outputs, &mut rng);
            let kernel = random_kernel(&field, ell, &mut rng);
            Case {
                source,
                kernel: Some(kernel),
                subset: None,
            }
        }
        Family::SymmetricChannel => {
            let field = pick(&mut rng, &[2, 3, 4, 5, 7]);
            let noise = rng.random_range(1..=4);
            plain(random::symmetric_channel(&field, noise, &mut rng))
        }
        Family::Qsc => {
            let field = pick(&mut rng, &[2, 3, 4, 5, 7, 8]);
            let max = (field.q() - 1) as f64 / field.q() as f64;
            plain(qsc(&field, rng.random_range(0.0..=max)).expect("crossover in range"))
        }
        Family::Subset => {
            let field = pick(&mut rng, &[2, 3, 4, 5, 7, 8]);
            let k = rng.random_range(1..field.q());
            let eps = rng.random_range(0.0..=1.0);
            let source = subset_channel(&field, k, eps).expect("parameters in range");
            Case {
                source,
                kernel: None,
                subset: Some((k, eps)),
            }
        }
        Family::Deterministic => {
            let field = pick(&mut rng, &[2, 3, 4, 5, 7, 8]);
            plain(deterministic_source(&field, &mut rng))
        }
        Family::Extreme => {
            let field = pick(&mut rng, &[2, 3, 4, 5]);
            plain(extreme_source(&field, &mut rng))
        }
        Family::MacWilliams => {
            let field = pick(&mut rng, &[2, 3]);
            let source = random::source(&field, 2, &mut rng);
            let kernel = random_kernel(&field, 2, &mut rng);
            Case {
                source,
                kernel: Some(kernel),
                subset: None,
            }
        }
    }
}

/// `1 - Z_d` for every nonzero shift, summed as squared differences of root
/// probabilities so that near-useless channels keep their precision.
fn shift_gaps(src: &DiscreteSource, tables: &FieldTables) -> Vec<f64> {
    let q = src.q();
    let mut gaps = vec![0.0; q - 1];
    for col in src.columns() {
        for (d, gap) in (1..q).zip(gaps.iter_mut()) {
            *gap += (0..q)
                .map(|x| (col[x].sqrt() - col[tables.add[x * q + d]].sqrt()).powi(2))
                .sum::<f64>()
                / 2.0;
        }
    }
    gaps
}

/// Lower error bound written in terms of `1 - Z`.
fn error_lower_from_gap(q: usize, gap: f64) -> f64 {
    let qf = q as f64;
    (qf - 1.0) / (qf * qf) * ((qf - (qf - 1.0) * gap).max(0.0).sqrt() - gap.sqrt()).powi(2)
}

/// Bounds and identities that hold for every source.
fn source_checks(
    src: &DiscreteSource,
    tables: &FieldTables,
    st: &SubchannelStats,
    out: &mut Vec<Measurement>,
) {
    let q = src.q();
    let (h, z, pe) = (st.entropy, st.bhattacharyya, st.error_probability);
    let gaps = shift_gaps(src, tables);
    let gap = gaps.iter().sum::<f64>() / (q - 1) as f64;
    let (_, hi) = error_bounds_from_bhattacharyya(q, z);
    bound(out, "pe-z-lower", pe - error_lower_from_gap(q, gap));
    bound(out, "pe-z-upper", hi - pe);
    let (lo, hi) = variation_bounds_from_error(q, pe);
    bound(out, "tv-pe-lower", st.total_variation - lo);
    bound(out, "tv-pe-upper", hi - st.total_variation);
    let (lo, hi) = fourier_bounds_from_error(q, pe);
    bound(out, "fourier-pe-lower", st.fourier - lo);
    bound(out, "fourier-pe-upper", hi - st.fourier);

    let dist = |d: usize| gaps[d - 1].sqrt();
    let mut triangle = f64::INFINITY;
    for d1 in 1..q {
        for d2 in 1..q {
            let sum = tables.add[d1 * q + d2];
            if sum != 0 {
                triangle = triangle.min(dist(d1) + dist(d2) - dist(sum));
            }
        }
    }
    if triangle.is_finite() {
        bound(out, "shift-triangle", triangle);
    }

    let mut parseval = 0.0f64;
    for col in src.columns() {
        let mass: f64 = col.iter().sum();
        if mass <= 0.0 {
            continue;
        }
        let energy: f64 = (0..q)
            .map(|w| {
                let chi = &tables.chi[w * q..(w + 1) * q];
                col.iter()
                    .zip(chi)
                    .map(|(c, ch)| ch * (*c / mass))
                    .sum::<num_complex::Complex64>()
                    .norm_sqr()
            })
            .sum();
        let direct: f64 = col.iter().map(|c| (c / mass).powi(2)).sum::<f64>() * q as f64;
        parseval = parseval.max((energy - direct).abs());
    }
    identity(out, "parseval", PARSEVAL_TOL, parseval);

    if h < NEAR {
        bound(out, "small-entropy-small-z", FAR - z);
    }
    if z < NEAR {
        bound(out, "small-z-small-entropy", FAR - h);
    }
    if h > 1.0 - NEAR {
        bound(out, "large-entropy-large-z", z - (1.0 - FAR));
    }
    if z > 1.0 - NEAR {
        bound(out, "large-z-large-entropy", h - (1.0 - FAR));
    }
}

fn recursion_checks(
    src: &DiscreteSource,
    st: &SubchannelStats,
    kernel: &Matrix,
    out: &mut Vec<Measurement>,
) -> Result<()> {
    let (dc, ds) = partial_distances(kernel)?;
    let (zmax, zmin) = (st.z_max()?, st.z_min()?);
    let (smax, smin) = (st.max_fourier, st.min_fourier);
    let (qf, ell) = (src.q() as f64, kernel.size());
    let mut margins = [f64::INFINITY; 4];
    for (i, sub) in transform_stats(src, kernel)?.iter().enumerate() {
        let candidates = [
            qf.powi((ell - 1 - i) as i32) * zmax.powi(dc[i] as i32) - sub.z_max()?,
            sub.z_min()? - zmin.powi(dc[i] as i32),
            qf.powi(i as i32) * smax.powi(ds[i] as i32) - sub.max_fourier,
            sub.min_fourier - smin.powi(ds[i] as i32),
        ];
        for (m, c) in margins.iter_mut().zip(candidates) {
            *m = m.min(c);
        }
    }
    for (name, m) in [
        "z-max-recursion",
        "z-min-recursion",
        "fourier-max-recursion",
        "fourier-min-recursion",
    ]
    .into_iter()
    .zip(margins)
    {
        bound(out, name, m);
    }
    Ok(())
}

/// `H(X|Y) - H(U_1 | U_0, Y_0, Y_1)` against the cutoff-rate bound, for the
/// standard form and its column-swapped variant, over every nonzero multiplier.
fn cutoff_check(
    src: &DiscreteSource,
    st: &SubchannelStats,
    out: &mut Vec<Measurement>,
) -> Result<()> {
    let field = src.field();
    let q = src.q() as f64;
    let shift = |d: FieldElem| st.bhattacharyya_by_shift[d.index() - 1];
    let mut margin = f64::INFINITY;
    for gamma in field.nonzero_elements() {
        let sum: f64 = field
            .nonzero_elements()
            .map(|d| shift(field.mul(gamma, d)).powi(2) * (1.0 - shift(d)))
            .sum();
        let cutoff = -(1.0 - sum / q).ln() / q.ln();
        let standard = Matrix::from_rows(field, &[vec![1, 0], vec![gamma.0, 1]])?;
        for g in [standard, gamma_kernel(field, gamma)?] {
            let upper = crate::chanmodel::stats(&basic_transform_exact(src, &g)?[1]).entropy;
            margin = margin.min(st.entropy - upper - cutoff);
        }
    }
    bound(out, "cutoff", margin);
    Ok(())
}

fn measure(family: Family, case: &Case) -> Result<Vec<Measurement>> {
    let src = &case.source;
    let tables = FieldTables::new(src.field());
    let st = stats_with_tables(src, &tables);
    let mut out = Vec::new();
    source_checks(src, &tables, &st, &mut out);
    match family {
        Family::RandomChannel => {
            let kernel = case.kernel.as_ref().expect("channel cases carry a kernel");
            recursion_checks(src, &st, kernel, &mut out)?;
        }
        Family::SymmetricChannel => cutoff_check(src, &st, &mut out)?,
        Family::Qsc => {
            let (lo, _) = error_bounds_from_bhattacharyya(src.q(), st.bhattacharyya);
            identity(
                &mut out,
                "pe-z-lower-tight",
                IDENTITY_TOL,
                (st.error_probability - lo).abs(),
            );
        }
        Family::Subset => {
            let (k, eps) = case.subset.expect("subset cases carry parameters");
            let (_, hi) = error_bounds_from_bhattacharyya(src.q(), st.bhattacharyya);
            identity(
                &mut out,
                "pe-z-upper-tight",
                IDENTITY_TOL,
                (hi - st.error_probability).abs(),
            );
            let formula = (k as f64 - 1.0 + eps) / (src.q() - 1) as f64;
            identity(
                &mut out,
                "subset-z-formula",
                IDENTITY_TOL,
                (st.bhattacharyya - formula).abs(),
            );
        }
        Family::Deterministic => {
            let residual = st.bhattacharyya.abs().max(st.error_probability.abs());
            identity(&mut out, "deterministic-zero", IDENTITY_TOL, residual);
        }
        Family::MacWilliams => {
            let kernel = case
                .kernel
                .as_ref()
                .expect("macwilliams cases carry a kernel");
            identity(
                &mut out,
                "macwilliams",
                IDENTITY_TOL,
                macwilliams_residual(src, kernel)?,
            );
        }
        Family::RandomSource | Family::Extreme => {}
    }
    Ok(out)
}

struct Tally {
    outcome: CheckOutcome,
    worst_violator: Option<usize>,
}

fn run_family(family: Family, config: &BatteryConfig) -> Vec<CheckOutcome> {
    let results: Vec<Result<Vec<Measurement>>> = (0..config.cases)
        .into_par_iter()
        .map(|i| measure(family, &draw(family, config.seed, i)))
        .collect();
    let mut tallies: Vec<Tally> = Vec::new();
    let mut errors = CheckOutcome {
        family,
        check: "evaluation-error",
        kind: CheckKind::Identity,
        cases: 0,
        violations: 0,
        worst_slack: 0.0,
        tolerance: 0.0,
        violator: None,
    };
    for (index, result) in results.into_iter().enumerate() {
        errors.cases += 1;
        let measurements = match result {
            Ok(m) => m,
            Err(e) => {
                errors.violations += 1;
                errors.worst_slack = 1.0;
                errors
                    .violator
                    .get_or_insert_with(|| format!("{e}\n{}", draw(family, config.seed, index)));
                continue;
            }
        };
        for m in measurements {
            let pos = match tallies.iter().position(|t| t.outcome.check == m.check) {
                Some(p) => p,
                None => {
                    let worst = match m.kind {
                        CheckKind::Bound => f64::INFINITY,
                        CheckKind::Identity => 0.0,
                    };
                    tallies.push(Tally {
                        outcome: CheckOutcome {
                            family,
                            check: m.check,
                            kind: m.kind,
                            cases: 0,
                            violations: 0,
                            worst_slack: worst,
                            tolerance: m.tolerance,
                            violator: None,
                        },
                        worst_violator: None,
                    });
                    tallies.len() - 1
                }
            };
            let t = &mut tallies[pos];
            t.outcome.cases += 1;
            let violated = m.kind.violated(m.value, m.tolerance);
            if violated {
                t.outcome.violations += 1;
            }
            if m.kind.worse(m.value, t.outcome.worst_slack) {
                t.outcome.worst_slack = m.value;
                if violated {
                    t.worst_violator = Some(index);
                }
            }
        }
    }
    let mut outcomes: Vec<CheckOutcome> = tallies
        .into_iter()
        .map(|mut t| {
            t.outcome.violator = t
                .worst_violator
                .map(|i| draw(family, config.seed, i).to_string());
            t.outcome
        })
        .collect();
    if errors.violations > 0 {
        outcomes.push(errors);
    }
    outcomes
}

/// Runs every selected family; failures are report entries, never errors.
pub fn verify_inequalities(config: &BatteryConfig) -> BatteryReport {
    let outcomes = config
        .families
        .iter()
        .flat_map(|&f| run_family(f, config))
        .collect();
    BatteryReport { outcomes }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(families: Vec<Family>, cases: usize) -> BatteryConfig {
        BatteryConfig {
            cases,
            seed: 7,
            families,
        }
    }

    #[test]
    fn every_family_passes_on_a_small_battery() {
        let report = verify_inequalities(&small(Family::ALL.to_vec(), 150));
        if let Some(o) = report.failures().next() {
            panic!(
                "{} {} worst {} violator:\n{}",
                o.family,
                o.check,
                o.worst_slack,
                o.violator.as_deref().unwrap_or("")
            );
        }
        assert!(report.passed());
        for check in ["pe-z-lower", "parseval"] {
            assert_eq!(report.find(Family::RandomSource, check).unwrap().cases, 150);
        }
        // binary cases have no pair of shifts with a nonzero sum
        assert!(
            report
                .find(Family::RandomSource, "shift-triangle")
                .unwrap()
                .cases
                > 50
        );
        for check in ["z-max-recursion", "fourier-min-recursion"] {
            assert_eq!(
                report.find(Family::RandomChannel, check).unwrap().cases,
                150
            );
        }
        assert_eq!(
            report
                .find(Family::SymmetricChannel, "cutoff")
                .unwrap()
                .cases,
            150
        );
        assert_eq!(
            report
                .find(Family::MacWilliams, "macwilliams")
                .unwrap()
                .cases,
            150
        );
    }

    #[test]
    fn tight_families_sit_on_their_bounds() {
        let report = verify_inequalities(&small(vec![Family::Qsc, Family::Subset], 200));
        for (family, check) in [
            (Family::Qsc, "pe-z-lower-tight"),
            (Family::Subset, "pe-z-upper-tight"),
            (Family::Subset, "subset-z-formula"),
        ] {
            let o = report.find(family, check).unwrap();
            assert!(o.worst_slack <= 1e-9, "{family} {check}: {}", o.worst_slack);
        }
        let lower = report.find(Family::Qsc, "pe-z-lower").unwrap();
        assert!(lower.worst_slack.abs() <= 1e-9);
    }

    #[test]
    fn extreme_family_exercises_the_sandwich() {
        let report = verify_inequalities(&small(vec![Family::Extreme, Family::Deterministic], 300));
        if let Some(o) = report.failures().next() {
            panic!(
                "{} {} worst {} violator:\n{}",
                o.family,
                o.check,
                o.worst_slack,
                o.violator.as_deref().unwrap_or("")
            );
        }
        for check in [
            "small-entropy-small-z",
            "small-z-small-entropy",
            "large-entropy-large-z",
            "large-z-large-entropy",
        ] {
            assert!(
                report.find(Family::Extreme, check).unwrap().cases > 10,
                "{check}"
            );
        }
        assert!(
            report
                .find(Family::Deterministic, "deterministic-zero")
                .unwrap()
                .worst_slack
                < 1e-15
        );
    }

    #[test]
    fn battery_is_deterministic() {
        let cfg = small(vec![Family::RandomSource, Family::SymmetricChannel], 100);
        assert_eq!(
            verify_inequalities(&cfg).to_csv(),
            verify_inequalities(&cfg).to_csv()
        );
    }

    #[test]
    fn judging_rules() {
        assert!(CheckKind::Bound.violated(-1e-6, 1e-9));
        assert!(!CheckKind::Bound.violated(-1e-10, 1e-9));
        assert!(!CheckKind::Identity.violated(0.0, 1e-9));
        assert!(CheckKind::Identity.violated(f64::NAN, 1e-9));
        assert!(CheckKind::Bound.worse(-1.0, 0.0) && CheckKind::Identity.worse(1.0, 0.0));
        let case = draw(Family::RandomChannel, 1, 0);
        let text = case.to_string();
        assert!(text.contains("# kernel"));
        assert!(DiscreteSource::parse(&text).is_err() || text.lines().count() > 3);
    }

    #[test]
    fn config_round_trip_and_validation() {
        let cfg = BatteryConfig::default();
        assert_eq!(BatteryConfig::parse(&cfg.to_text()).unwrap(), cfg);
        assert!(cfg.validate().is_ok());
        let partial = BatteryConfig::parse("cases = 2000\nfamilies = [\"qsc\"]\n").unwrap();
        assert_eq!(partial.families, vec![Family::Qsc]);
        assert_eq!(partial.seed, BatteryConfig::default().seed);
        assert!(small(vec![Family::Qsc], 10).validate().is_err());
        assert!(BatteryConfig::parse("bogus = 1").is_err());
    }

    #[test]
    fn csv_has_one_row_per_outcome() {
        let report = verify_inequalities(&small(vec![Family::Qsc], 20));
        let csv = report.to_csv();
        assert_eq!(csv.lines().count(), report.outcomes.len() + 1);
        assert!(csv.lines().all(|l| l.split(',').count() == 8));
    }
}
