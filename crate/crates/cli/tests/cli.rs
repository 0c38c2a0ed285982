use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fqpolar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fqpolar"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn analyze_kernel_reports_rs4_exponent() {
    let out = fqpolar(&["analyze-kernel", "--field", "4", "--kernel", "rs"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert!(lines
        .next()
        .unwrap()
        .starts_with("field,size,classification"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[2], "polarizing");
    assert_eq!(row[3], "1 2 3 4");
    assert!((row[5].parse::<f64>().unwrap() - 0.57312).abs() < 5e-6);
}

#[test]
fn analyze_kernel_flags_subfield_kernel() {
    let out = fqpolar(&["analyze-kernel", "--field", "4", "--kernel", "binary"]);
    assert!(stdout(&out).contains("non-polarizing-subfield-2"));
}

#[test]
fn stats_reads_source_files() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("src.txt");
    fs::write(&file, "2\n2\n0.4 0.1\n0.1 0.4\n").unwrap();
    let out = fqpolar(&["stats", "--source", path_str(&file)]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = stdout(&out);
    let row: Vec<f64> = text
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .take(3)
        .map(|v| v.parse().unwrap())
        .collect();
    assert!((row[1] - 0.8).abs() < 1e-12);
    assert!((row[2] - 0.2).abs() < 1e-12);
}

#[test]
fn polarize_exact_erasure_split() {
    let out = fqpolar(&[
        "polarize",
        "--field",
        "2",
        "--channel",
        "erasure:0.5",
        "--depth",
        "1",
    ]);
    let text = stdout(&out);
    let z: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    assert_eq!(z.len(), 2);
    assert!((z[0] - 0.75).abs() < 1e-12 && (z[1] - 0.25).abs() < 1e-12);
}

#[test]
fn polarize_mc_needs_samples_for_awgn() {
    let out = fqpolar(&[
        "polarize",
        "--field",
        "2",
        "--channel",
        "awgn:1.0",
        "--depth",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = fqpolar(&[
        "polarize",
        "--field",
        "2",
        "--channel",
        "awgn:1.0",
        "--depth",
        "2",
        "--samples",
        "500",
    ]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).lines().count(), 5);
}

#[test]
fn construct_encode_decode_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let code = dir.path().join("code.toml");
    let out = fqpolar(&[
        "construct",
        "--field",
        "4",
        "--kernel",
        "gamma:2",
        "--channel",
        "qsc:0.05",
        "--depth",
        "4",
        "--rate",
        "0.5",
        "--output",
        path_str(&code),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let out = fqpolar(&[
        "encode",
        "--code",
        path_str(&code),
        "--info",
        "1,2,3,0,1,2,3,1",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let codeword: Vec<String> = stdout(&out)
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().to_string())
        .collect();
    assert_eq!(codeword.len(), 16);
    let out = fqpolar(&[
        "decode",
        "--code",
        path_str(&code),
        "--channel",
        "qsc:0.05",
        "--received",
        &codeword.join(","),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let info: Vec<String> = stdout(&out)
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().to_string())
        .collect();
    assert_eq!(info.join(","), "1,2,3,0,1,2,3,1");
}

#[test]
fn construct_with_rm_rule_needs_no_channel() {
    let dir = tempfile::tempdir().unwrap();
    let code = dir.path().join("rm.toml");
    let out = fqpolar(&[
        "construct",
        "--depth",
        "3",
        "--rm",
        "1",
        "--output",
        path_str(&code),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(&code).unwrap();
    assert!(text.contains("frozen = [0, 1, 2, 4]"));
}

#[test]
fn speed_counts_fast_indices() {
    let out = fqpolar(&["speed", "--depth", "10", "--threshold", "0.9"]);
    let text = stdout(&out);
    assert_eq!(text.lines().next().unwrap(), "depth,threshold,fraction");
    let frac: f64 = text
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .nth(2)
        .unwrap()
        .parse()
        .unwrap();
    assert!((0.0..0.05).contains(&frac));
}

#[test]
fn counterexample_histogram_sums_to_all_paths() {
    let out = fqpolar(&["counterexample", "--depth", "8", "--bins", "4"]);
    assert!(out.status.success());
    let total: usize = stdout(&out)
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse::<usize>().unwrap())
        .sum();
    assert_eq!(total, 256);
    assert!(String::from_utf8_lossy(&out.stderr).contains("mean 0.450000000000"));
}

#[test]
fn verify_bounds_passes_and_rejects_small_batteries() {
    let out = fqpolar(&["verify-bounds", "--cases", "1000"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.starts_with("family,check,kind,cases,violations,worst_slack,tolerance,passed"));
    assert!(text.lines().skip(1).all(|l| l.ends_with(",true")));
    assert_eq!(
        fqpolar(&["verify-bounds", "--cases", "10"]).status.code(),
        Some(2)
    );
}

#[test]
fn simulate_fig2_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    fs::write(
        &cfg,
        "sigma = 0.97865\nsamples = 1000\nseed = 3\noutput = \"curve.csv\"\n\n\
         [[arms]]\nname = \"binary\"\nfield = \"2\"\nkernel = \"binary\"\ndepths = [3]\n",
    )
    .unwrap();
    let out = fqpolar(&["simulate-fig2", "--config", path_str(&cfg)]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(dir.path().join("curve.csv")).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "arm,blocklength_bits,rate,union_bound"
    );
    assert_eq!(text.lines().count(), 9);
}

#[test]
fn bad_input_exits_with_two() {
    assert_eq!(
        fqpolar(&["analyze-kernel", "--field", "6"]).status.code(),
        Some(2)
    );
    assert_eq!(
        fqpolar(&["stats", "--channel", "bogus:1"]).status.code(),
        Some(2)
    );
}
