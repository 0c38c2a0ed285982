//! Acceptance criteria, one PASS/FAIL line each. Runs as a plain binary so
//! every line is printed; exits nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fqpolar::chanmodel::{qsc, random, stats, DiscreteSource};
use fqpolar::codec::{
    build_spec, decoding_order, encode, sc_decode, union_bound, IndexScore, PolarCodeSpec,
    SelectionRule,
};
use fqpolar::harness::{
    bec_pair_counterexample, bec_pair_means, compare_curves, contrast_middle_mass, run_fig2,
    speed_empiric, verify_inequalities, BatteryConfig, BecPairSource, ExperimentConfig, Family,
};
use fqpolar::kernel::{
    binary_kernel, classify_polarizing, classify_standard_form, exponents, gamma_kernel,
    partial_distances, permutations, rs_matrix, standard_form_with_priority, Classification,
    Matrix,
};
use fqpolar::polarlab::{
    basic_transform_exact, digit_reverse, mc_all_subchannels, DiscreteSampler,
};
use fqpolar::{FieldCtx, FieldElem};

type Verdict = Result<(bool, String), String>;

fn field(q: u64) -> FieldCtx {
    FieldCtx::of_size(q).expect("valid field size")
}

fn ln_factorial(q: usize) -> f64 {
    (2..=q).map(|k| (k as f64).ln()).sum()
}

fn exponents_of_rs_kernels() -> Verdict {
    let mut ok = true;
    let mut worst = 0.0f64;
    let mut notes = Vec::new();
    for q in [2u64, 3, 4, 5, 7, 8] {
        let g = rs_matrix(&field(q));
        let e = exponents(&g).map_err(|e| e.to_string())?;
        let qn = q as usize;
        let want = ln_factorial(qn) / (q as f64).ln() / q as f64;
        worst = worst
            .max((e.channel - want).abs())
            .max((e.source - want).abs());
        let (dc, ds) = partial_distances(&g).map_err(|e| e.to_string())?;
        let ascending: Vec<u32> = (1..=q as u32).collect();
        let descending: Vec<u32> = ascending.iter().rev().copied().collect();
        if dc != ascending || ds != descending {
            ok = false;
            notes.push(format!("q={q} D_c={dc:?} D_s={ds:?}"));
        }
    }
    ok &= worst <= 1e-12;
    let rs4 = exponents(&rs_matrix(&field(4)))
        .map_err(|e| e.to_string())?
        .channel;
    ok &= (rs4 - 0.57312).abs() <= 5e-6;
    Ok((
        ok,
        format!(
            "max |E - log_q(q!)/q| = {worst:.1e}; D_c = [1..q], D_s = [q..1] (column-to-earlier-span definition); \
             E_c(RS4) = {rs4:.6}{}",
            if notes.is_empty() { String::new() } else { format!("; mismatches {}", notes.join(" ")) }
        ),
    ))
}

fn classifier_battery() -> Verdict {
    let f4 = field(4);
    let f8 = field(8);
    let class = |g: &Matrix| classify_polarizing(g).map_err(|e| e.to_string());
    let mut ok = class(&binary_kernel(&f4))? == Classification::NonPolarizingSubfield(2);
    ok &= class(&gamma_kernel(&f4, f4.alpha()).map_err(|e| e.to_string())?)?
        == Classification::Polarizing;
    ok &= class(&rs_matrix(&f4))? == Classification::Polarizing;
    ok &= class(&rs_matrix(&f8))? == Classification::Polarizing;
    for fq in [field(2), f4.clone()] {
        let upper = Matrix::from_rows(&fq, &[vec![1, 1], vec![0, 1]]).map_err(|e| e.to_string())?;
        ok &= class(&upper)? == Classification::NonPolarizingIdentity;
    }
    let named_ok = ok;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let orders = permutations(3);
    let mut unstable = 0;
    for _ in 0..500 {
        let g = Matrix::random_invertible(&f4, 3, &mut rng);
        let reference = class(&g)?;
        for order in &orders {
            let sf = standard_form_with_priority(&g, order).map_err(|e| e.to_string())?;
            if classify_standard_form(&sf).0 != reference {
                unstable += 1;
            }
        }
    }
    Ok((
        named_ok && unstable == 0,
        format!("named kernels as expected: {named_ok}; pivot-order disagreements on 500 random 3x3 over F_4: {unstable}"),
    ))
}

fn chain_rule() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let q = [2u64, 3, 4][rng.random_range(0..3)];
        let f = field(q);
        let ell = rng.random_range(2..=3);
        let outputs = rng.random_range(1..=4);
        let src = if rng.random_bool(0.5) {
            random::source(&f, outputs, &mut rng)
        } else {
            random::channel(&f, outputs, &mut rng)
        };
        let g = Matrix::random_invertible(&f, ell, &mut rng);
        let subs = basic_transform_exact(&src, &g).map_err(|e| e.to_string())?;
        let total: f64 = subs.iter().map(|s| stats(s).entropy).sum();
        worst = worst.max((total - ell as f64 * stats(&src).entropy).abs());
    }
    Ok((
        worst <= 1e-9,
        format!("200 random source/kernel pairs, max |sum H_i - l H| = {worst:.2e}"),
    ))
}

fn inequality_batteries() -> Verdict {
    let config = BatteryConfig::default();
    let report = verify_inequalities(&config);
    let failed: Vec<String> = report
        .failures()
        .map(|o| format!("{}/{}", o.family, o.check))
        .collect();
    let min_cases = Family::ALL
        .iter()
        .map(|&f| report.cases(f))
        .min()
        .unwrap_or(0);
    let tight = |family, check| {
        report
            .find(family, check)
            .map_or(f64::INFINITY, |o| o.worst_slack)
    };
    let qsc_slack = tight(Family::Qsc, "pe-z-lower-tight");
    let subset_slack = tight(Family::Subset, "pe-z-upper-tight");
    let subset_z = tight(Family::Subset, "subset-z-formula");
    let ok = report.passed()
        && min_cases >= 1000
        && qsc_slack <= 1e-9
        && subset_slack <= 1e-9
        && subset_z <= 1e-9;
    Ok((
        ok,
        format!(
            "{} checks over {} families, >= {min_cases} cases each, violations in [{}]; \
             QSC tightness {qsc_slack:.1e}, subset tightness {subset_slack:.1e}, subset Z {subset_z:.1e}",
            report.outcomes.len(),
            Family::ALL.len(),
            failed.join(" ")
        ),
    ))
}

fn counterexample() -> Verdict {
    let f4 = field(4);
    let g1 = binary_kernel(&f4);
    let galpha = gamma_kernel(&f4, f4.alpha()).map_err(|e| e.to_string())?;
    let source = BecPairSource::new(0.2, 0.7).map_err(|e| e.to_string())?;
    let hist = bec_pair_counterexample(&g1, &source, 16).map_err(|e| e.to_string())?;
    let middle = hist.mass_closed(0.4, 0.6);
    let mass_ok = (middle - 0.5).abs() <= 0.05;
    let means = bec_pair_means(&g1, &source, 16).map_err(|e| e.to_string())?;
    let drift = means.iter().map(|m| (m - 0.45).abs()).fold(0.0, f64::max);
    let mean_ok = drift <= 1e-12;
    let contrast = contrast_middle_mass(&g1, &galpha, &source, 6, (0.1, 0.9), 20_000, 6)
        .map_err(|e| e.to_string())?;
    let contrast_ok = contrast.ratio() <= 0.2;
    Ok((
        mass_ok && mean_ok && contrast_ok,
        format!(
            "n=16 mass in [0.4,0.6] = {middle:.4} ({}); martingale drift {drift:.1e} ({}); \
             contrast n=6 middle mass G_alpha {:.4} vs G_1 {:.4}, ratio {:.3} ({}, need <= 0.2)",
            verdict(mass_ok),
            verdict(mean_ok),
            contrast.contrast_mass,
            contrast.reference_mass,
            contrast.ratio(),
            verdict(contrast_ok)
        ),
    ))
}

fn speed() -> Verdict {
    let f2 = field(2);
    let g = binary_kernel(&f2);
    let ch = fqpolar::chanmodel::erasure(&f2, 0.5).map_err(|e| e.to_string())?;
    let below = speed_empiric(&g, &ch, 20, 0.4).map_err(|e| e.to_string())?;
    let above = speed_empiric(&g, &ch, 20, 0.9).map_err(|e| e.to_string())?;
    let below_ok = (0.35..=0.55).contains(&below);
    let above_ok = above < 0.05;
    Ok((
        below_ok && above_ok,
        format!(
            "n=20 fraction at 0.4n = {below:.4} ({}, need [0.35, 0.55]); at 0.9n = {above:.6} ({}, need < 0.05)",
            verdict(below_ok),
            verdict(above_ok)
        ),
    ))
}

fn fig2() -> Verdict {
    let config = ExperimentConfig::desk_scale(20_000, 7);
    let points = run_fig2(&config, None).map_err(|e| e.to_string())?;
    let mut ok = true;
    let mut parts = Vec::new();
    for bits in [128usize, 512] {
        let common = compare_curves(&points, "quaternary", "binary", bits, 0.15, 0.4);
        let worst = common.iter().map(|(_, q, b)| q / b).fold(0.0, f64::max);
        let below = common.iter().filter(|(_, q, b)| q < b).count();
        ok &= !common.is_empty() && below == common.len();
        parts.push(format!(
            "{bits} bits: quaternary below at {below}/{} rates, max ratio {worst:.3}",
            common.len()
        ));
    }
    Ok((ok, parts.join("; ")))
}

fn noiseless_likelihoods(q: usize, x: &[FieldElem]) -> Vec<Vec<f64>> {
    x.iter()
        .map(|v| {
            (0..q)
                .map(|k| if k == v.index() { 1.0 } else { 0.0 })
                .collect()
        })
        .collect()
}

fn codec_round_trip() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let f2 = field(2);
    let f4 = field(4);
    let galpha = gamma_kernel(&f4, f4.alpha()).map_err(|e| e.to_string())?;
    let mut round_trip_failures = 0;
    let mut messages = 0;
    for g in [binary_kernel(&f2), galpha.clone(), rs_matrix(&f4)] {
        let q = g.field().q();
        for depth in 1..=3 {
            let len = g.size().pow(depth as u32);
            let mut indices: Vec<usize> = (0..len).collect();
            for k in (1..len).rev() {
                indices.swap(k, rng.random_range(0..=k));
            }
            let frozen: Vec<usize> = {
                let mut f = indices[..len / 2].to_vec();
                f.sort_unstable();
                f
            };
            let values: Vec<FieldElem> = frozen
                .iter()
                .map(|_| FieldElem(rng.random_range(0..q as u32)))
                .collect();
            let spec = PolarCodeSpec::with_frozen_values(&g, depth, &frozen, &values)
                .map_err(|e| e.to_string())?;
            for _ in 0..100 {
                let info: Vec<FieldElem> = (0..spec.dimension())
                    .map(|_| FieldElem(rng.random_range(0..q as u32)))
                    .collect();
                let x = encode(&spec, &info).map_err(|e| e.to_string())?;
                let decoded =
                    sc_decode(&spec, &noiseless_likelihoods(q, &x)).map_err(|e| e.to_string())?;
                messages += 1;
                if decoded.info != info || decoded.codeword != x {
                    round_trip_failures += 1;
                }
            }
        }
    }

    let mut pi_mismatches = 0;
    let mut words = 0;
    let binary4 = Matrix::from_rows(
        &f2,
        &[[1u32, 0, 0, 0], [1, 1, 0, 0], [1, 0, 1, 0], [1, 1, 1, 1]],
    )
    .map_err(|e| e.to_string())?;
    for g in [
        binary_kernel(&f2),
        galpha.clone(),
        rs_matrix(&field(3)),
        binary4,
    ] {
        let q = g.field().q();
        for depth in 1..=2 {
            let len = g.size().pow(depth as u32);
            if len > 16 || q.pow(len as u32) > 1 << 16 {
                continue;
            }
            let spec = PolarCodeSpec::new(&g, depth, &[]).map_err(|e| e.to_string())?;
            let perm: Vec<usize> = (0..len)
                .map(|s| digit_reverse(s, g.size(), depth))
                .collect();
            let product = Matrix::permutation(g.field(), &perm)
                .mul(&g.kron_power(depth))
                .map_err(|e| e.to_string())?;
            let order = decoding_order(g.size(), depth);
            let mut u = vec![0usize; len];
            loop {
                let word: Vec<FieldElem> = u.iter().map(|&d| FieldElem(d as u32)).collect();
                let in_order: Vec<FieldElem> = order.iter().map(|&i| word[i]).collect();
                if encode(&spec, &word).map_err(|e| e.to_string())?
                    != product.left_mul_vec(&in_order).map_err(|e| e.to_string())?
                {
                    pi_mismatches += 1;
                }
                words += 1;
                let Some(pos) = u.iter().position(|&d| d + 1 < q) else {
                    break;
                };
                u[pos] += 1;
                u[..pos].iter_mut().for_each(|d| *d = 0);
            }
        }
    }

    // block error on qsc(F_4, 0.05), RS(4) at depth 3, rate 1/2
    let g = rs_matrix(&f4);
    let eps = 0.05;
    let ch: DiscreteSource = qsc(&f4, eps).map_err(|e| e.to_string())?;
    let est = mc_all_subchannels(&DiscreteSampler::new(&ch), &g, 3, 100_000, 11)
        .map_err(|e| e.to_string())?;
    let scores: Vec<IndexScore> = est.iter().map(IndexScore::from).collect();
    let spec =
        build_spec(&g, 3, &scores, SelectionRule::TargetRate(0.5)).map_err(|e| e.to_string())?;
    let pe: Vec<f64> = est.iter().map(|s| s.error_probability.mean).collect();
    let ub = union_bound(&pe, spec.info_set());
    let trials = 10_000;
    let mut errors = 0;
    for _ in 0..trials {
        let info: Vec<FieldElem> = (0..spec.dimension())
            .map(|_| FieldElem(rng.random_range(0..4)))
            .collect();
        let x = encode(&spec, &info).map_err(|e| e.to_string())?;
        let lik: Vec<Vec<f64>> = x
            .iter()
            .map(|xi| {
                let y = if rng.random_bool(eps) {
                    f4.add(*xi, FieldElem(rng.random_range(1..4)))
                } else {
                    *xi
                };
                (0..4)
                    .map(|k| if k == y.index() { 1.0 - eps } else { eps / 3.0 })
                    .collect()
            })
            .collect();
        if sc_decode(&spec, &lik).map_err(|e| e.to_string())?.info != info {
            errors += 1;
        }
    }
    let rate = errors as f64 / trials as f64;
    let sigma = (rate * (1.0 - rate) / trials as f64).sqrt();
    let bound_ok = rate <= ub + 3.0 * sigma;
    Ok((
        round_trip_failures == 0 && pi_mismatches == 0 && bound_ok,
        format!(
            "noiseless round trips {}/{messages}; encoder vs Pi*G^(x)n mismatches {pi_mismatches}/{words}; \
             RS4 n=3 R=1/2 qsc(0.05): block error {rate:.4} vs union bound {ub:.4} + 3 sigma {:.4}",
            messages - round_trip_failures,
            3.0 * sigma
        ),
    ))
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "fail"
    }
}

type Criterion = (&'static str, Duration, fn() -> Verdict);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        (
            "exponents",
            Duration::from_secs(60),
            exponents_of_rs_kernels,
        ),
        ("classifier", Duration::from_secs(60), classifier_battery),
        ("chain rule", Duration::from_secs(600), chain_rule),
        (
            "inequality batteries",
            Duration::from_secs(300),
            inequality_batteries,
        ),
        ("counterexample", Duration::from_secs(120), counterexample),
        ("speed", Duration::from_secs(60), speed),
        ("fig2 desk scale", Duration::from_secs(600), fig2),
        (
            "codec round trip",
            Duration::from_secs(300),
            codec_round_trip,
        ),
    ];
    let mut failures = 0;
    for (k, (name, budget, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let (ok, detail) = match result {
            Ok((ok, detail)) => (ok && elapsed <= *budget, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            failures += 1;
        }
        println!(
            "{} criterion {} ({name}): {detail} [{:.1} s, limit {} s]",
            if ok { "PASS" } else { "FAIL" },
            k + 1,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
