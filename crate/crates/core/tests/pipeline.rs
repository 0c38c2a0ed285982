//! End-to-end use of the public API: channel, transform, construction,
//! encoding and decoding.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fqpolar::chanmodel::{erasure, qsc, stats, DiscreteSource};
use fqpolar::codec::{
    build_spec, encode, sc_decode, union_bound, CodeFile, IndexScore, PolarCodeSpec, SelectionRule,
};
use fqpolar::harness::{erasure_table, resolve_kernel};
use fqpolar::kernel::{binary_kernel, gamma_kernel, rs_matrix};
use fqpolar::polarlab::{transform_all, transform_path, TransformPath};
use fqpolar::{FieldCtx, FieldElem};

fn field(q: u64) -> FieldCtx {
    FieldCtx::of_size(q).unwrap()
}

/// Erasure probabilities of all `2^n` binary subchannels from the scalar
/// recursion `z -> 2z - z^2` (branch 0), `z -> z^2` (branch 1).
fn erasure_oracle(eps: f64, n: usize) -> Vec<f64> {
    let mut z = vec![eps];
    for level in 0..n {
        let mut next = vec![0.0; z.len() * 2];
        for (i, &v) in z.iter().enumerate() {
            // the new digit is the most significant one
            next[i] = 2.0 * v - v * v;
            next[i + (1 << level)] = v * v;
        }
        z = next;
    }
    z
}

#[test]
fn erasure_construction_matches_scalar_recursion() {
    let f2 = field(2);
    let g = binary_kernel(&f2);
    let subs = transform_all(&erasure(&f2, 0.5).unwrap(), &g, 3).unwrap();
    let st: Vec<_> = subs.iter().map(stats).collect();
    let oracle = erasure_oracle(0.5, 3);
    for (s, z) in st.iter().zip(&oracle) {
        assert!((s.bhattacharyya - z).abs() < 1e-12);
        assert!((s.error_probability - z / 2.0).abs() < 1e-12);
    }
    let scores: Vec<IndexScore> = st.iter().map(IndexScore::from).collect();
    let spec = build_spec(&g, 3, &scores, SelectionRule::TargetRate(0.5)).unwrap();
    let mut ranked: Vec<usize> = (0..8).collect();
    ranked.sort_by(|&a, &b| oracle[a].total_cmp(&oracle[b]).then(a.cmp(&b)));
    let mut best: Vec<usize> = ranked[..4].to_vec();
    best.sort_unstable();
    assert_eq!(spec.info_set(), best.as_slice());
    let pe: Vec<f64> = st.iter().map(|s| s.error_probability).collect();
    let want: f64 = best.iter().map(|&i| oracle[i] / 2.0).sum();
    assert!((union_bound(&pe, spec.info_set()) - want).abs() < 1e-12);
}

#[test]
fn path_and_tree_agree_on_rs4() {
    let f4 = field(4);
    let g = rs_matrix(&f4);
    let ch = qsc(&f4, 0.1).unwrap();
    let all = transform_all(&ch, &g, 1).unwrap();
    for (i, sub) in all.iter().enumerate() {
        let path = TransformPath::from_index(&g, 1, i).unwrap();
        let direct = stats(&transform_path(&ch, &path).unwrap());
        assert!((direct.entropy - stats(sub).entropy).abs() < 1e-12);
    }
}

#[test]
fn classic_erasure_pattern_table() {
    let g = binary_kernel(&field(2));
    assert_eq!(
        erasure_table(&g).unwrap(),
        vec![vec![0, 2, 1], vec![0, 0, 1]]
    );
}

#[test]
fn code_file_on_disk_round_trip() {
    let dir = std::env::temp_dir().join(format!("fqpolar-pipeline-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let f4 = field(4);
    std::fs::write(dir.join("g.txt"), "4\n2 2\n1 0\n2 1\n").unwrap();
    let g = resolve_kernel(&f4, "g.txt", Some(&dir)).unwrap();
    let spec =
        PolarCodeSpec::with_frozen_values(&g, 2, &[0, 2], &[FieldElem(3), FieldElem(1)]).unwrap();
    let text = spec.to_file("g.txt").to_text();
    let file = CodeFile::parse(&text).unwrap();
    let kernel = resolve_kernel(&f4, &file.kernel, Some(&dir)).unwrap();
    assert_eq!(PolarCodeSpec::from_file(&file, &kernel).unwrap(), spec);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn source_file_round_trip() {
    let src = qsc(&field(3), 0.2).unwrap();
    let back = DiscreteSource::parse(&src.to_string()).unwrap();
    assert!((stats(&back).entropy - stats(&src).entropy).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn noiseless_sc_recovers_any_message(seed in any::<u64>(), depth in 1usize..4, which in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (f, g) = match which {
            0 => (field(2), binary_kernel(&field(2))),
            1 => (field(4), gamma_kernel(&field(4), FieldElem(2)).unwrap()),
            _ => (field(3), rs_matrix(&field(3))),
        };
        let q = f.q();
        let len = g.size().pow(depth as u32);
        let frozen: Vec<usize> = (0..len).filter(|_| rng.random_bool(0.5)).collect();
        let values: Vec<FieldElem> = frozen.iter().map(|_| FieldElem(rng.random_range(0..q as u32))).collect();
        let spec = PolarCodeSpec::with_frozen_values(&g, depth, &frozen, &values).unwrap();
        let info: Vec<FieldElem> = (0..spec.dimension()).map(|_| FieldElem(rng.random_range(0..q as u32))).collect();
        let x = encode(&spec, &info).unwrap();
        let lik: Vec<Vec<f64>> = x.iter().map(|v| (0..q).map(|k| if k == v.index() { 1.0 } else { 0.0 }).collect()).collect();
        let out = sc_decode(&spec, &lik).unwrap();
        prop_assert_eq!(out.info, info);
        prop_assert_eq!(out.codeword, x);
    }

    #[test]
    fn encoder_is_linear_with_zero_frozen_values(seed in any::<u64>(), depth in 1usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f4 = field(4);
        let g = rs_matrix(&f4);
        let spec = PolarCodeSpec::new(&g, depth, &[0, 1]).unwrap();
        let draw = |rng: &mut ChaCha8Rng| -> Vec<FieldElem> {
            (0..spec.dimension()).map(|_| FieldElem(rng.random_range(0..4))).collect()
        };
        let (a, b) = (draw(&mut rng), draw(&mut rng));
        let sum: Vec<FieldElem> = a.iter().zip(&b).map(|(x, y)| f4.add(*x, *y)).collect();
        let xa = encode(&spec, &a).unwrap();
        let xb = encode(&spec, &b).unwrap();
        let xs: Vec<FieldElem> = xa.iter().zip(&xb).map(|(x, y)| f4.add(*x, *y)).collect();
        prop_assert_eq!(encode(&spec, &sum).unwrap(), xs);
    }
}
