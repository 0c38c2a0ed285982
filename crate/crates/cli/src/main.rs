use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fqpolar::chanmodel::{erasure, qsc, stats, subset_channel, DiscreteSource};
use fqpolar::codec::{
    build_spec, encode, hyperbolic_indices, rm_indices, sc_decode, union_bound, CodeFile,
    IndexScore, PolarCodeSpec, SelectionRule,
};
use fqpolar::harness::{
    bec_pair_counterexample, contrast_middle_mass, resolve_kernel, run_fig2, speed_empiric,
    verify_inequalities, AwgnSampler, BatteryConfig, BecPairSource, ExperimentConfig,
};
use fqpolar::kernel::{analyze, Classification, Matrix};
use fqpolar::polarlab::{mc_all_subchannels, transform_all, DiscreteSampler, McStats};
use fqpolar::{FieldCtx, FieldElem};

#[derive(Parser)]
#[command(
    name = "fqpolar",
    version,
    about = "Polarization and polar codes over finite fields"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Standard form, polarization class, partial distances and exponents.
    AnalyzeKernel {
        #[command(flatten)]
        kernel: KernelArgs,
        /// Human-readable summary instead of CSV.
        #[arg(long)]
        text: bool,
    },
    /// Information quantities of one source or channel.
    Stats {
        #[command(flatten)]
        channel: ChannelArgs,
        /// Field for `--channel`.
        #[arg(long, default_value = "2")]
        field: String,
    },
    /// Per-index statistics of all subchannels at a given depth.
    Polarize {
        #[command(flatten)]
        kernel: KernelArgs,
        #[command(flatten)]
        channel: ChannelArgs,
        #[arg(long)]
        depth: usize,
        #[command(flatten)]
        mc: McArgs,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Selects an information set and writes a code file.
    Construct {
        #[command(flatten)]
        kernel: KernelArgs,
        #[command(flatten)]
        channel: ChannelArgs,
        #[arg(long)]
        depth: usize,
        #[command(flatten)]
        rule: RuleArgs,
        #[command(flatten)]
        mc: McArgs,
        /// Code file to write.
        #[arg(long)]
        output: PathBuf,
    },
    /// Encodes information symbols with a code file.
    Encode {
        #[arg(long)]
        code: PathBuf,
        /// Comma-separated information symbols; random when omitted.
        #[arg(long)]
        info: Option<String>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Successive-cancellation decoding of channel outputs.
    Decode {
        #[arg(long)]
        code: PathBuf,
        #[command(flatten)]
        channel: ChannelArgs,
        /// Comma-separated output symbol ids, one per channel use.
        #[arg(long)]
        received: String,
    },
    /// Union-bound curves for the AWGN construction comparison.
    SimulateFig2 {
        /// Experiment file; the desk-scale comparison when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Randomized inequality battery; exits with status 1 on any violation.
    VerifyBounds {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        cases: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Entropy histogram of the two-erasure source over GF(4).
    Counterexample {
        #[arg(long, default_value_t = 0.2)]
        e0: f64,
        #[arg(long, default_value_t = 0.7)]
        e1: f64,
        #[arg(long, default_value_t = 16)]
        depth: usize,
        #[arg(long, default_value = "binary")]
        kernel: String,
        #[arg(long, default_value_t = 20)]
        bins: usize,
        /// Kernel whose middle-band mass is estimated by Monte Carlo for comparison.
        #[arg(long)]
        contrast: Option<String>,
        #[arg(long, default_value_t = 6)]
        contrast_depth: usize,
        #[arg(long, default_value_t = 20_000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Fraction of fast-polarized indices on an erasure channel.
    Speed {
        #[command(flatten)]
        kernel: KernelArgs,
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
        #[arg(long, default_value_t = 20)]
        depth: usize,
        /// One or more threshold exponents.
        #[arg(long, value_delimiter = ',', default_value = "0.4,0.9")]
        threshold: Vec<f64>,
    },
}

#[derive(Args)]
struct KernelArgs {
    /// Field size or spec, e.g. `4` or `2^2/1+x+x^2`.
    #[arg(long, default_value = "2")]
    field: String,
    /// `rs`, `rs:<size>`, `binary`, `gamma:<element>` or a matrix file.
    #[arg(long, default_value = "binary")]
    kernel: String,
}

impl KernelArgs {
    fn load(&self) -> Result<(FieldCtx, Matrix)> {
        let field: FieldCtx = self.field.parse()?;
        let kernel = resolve_kernel(&field, &self.kernel, None)?;
        Ok((field, kernel))
    }
}

#[derive(Args)]
struct ChannelArgs {
    /// Source file (field line, output count, joint rows).
    #[arg(long, conflicts_with = "channel")]
    source: Option<PathBuf>,
    /// `qsc:<eps>`, `erasure:<eps>`, `subset:<k>:<eps>` or `awgn:<sigma>`.
    #[arg(long)]
    channel: Option<String>,
}

enum Channel {
    Discrete(DiscreteSource),
    Awgn(AwgnSampler),
}

impl ChannelArgs {
    fn load(&self, field: Option<&FieldCtx>) -> Result<Channel> {
        if let Some(path) = &self.source {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let src = DiscreteSource::parse(&text)?;
            if let Some(f) = field {
                if f != src.field() {
                    bail!("source is over {} but the kernel is over {f}", src.field());
                }
            }
            return Ok(Channel::Discrete(src));
        }
        let Some(spec) = &self.channel else {
            bail!("give --source or --channel");
        };
        let field = match field {
            Some(f) => f.clone(),
            None => bail!("--channel needs a field"),
        };
        let parts: Vec<&str> = spec.split(':').collect();
        let num = |i: usize| -> Result<f64> {
            parts
                .get(i)
                .and_then(|s| s.parse().ok())
                .with_context(|| format!("channel {spec:?} needs a numeric argument"))
        };
        Ok(match parts[0] {
            "qsc" => Channel::Discrete(qsc(&field, num(1)?)?),
            "erasure" => Channel::Discrete(erasure(&field, num(1)?)?),
            "subset" => Channel::Discrete(subset_channel(&field, num(1)? as usize, num(2)?)?),
            "awgn" => Channel::Awgn(AwgnSampler::new(&field, num(1)?)?),
            other => bail!("unknown channel kind {other:?}"),
        })
    }

    fn discrete(&self, field: Option<&FieldCtx>) -> Result<DiscreteSource> {
        match self.load(field)? {
            Channel::Discrete(src) => Ok(src),
            Channel::Awgn(_) => bail!("this command needs a discrete channel"),
        }
    }
}

#[derive(Args)]
struct McArgs {
    /// Monte-Carlo samples; exact transforms when omitted.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct RuleArgs {
    /// Target rate: the lowest-error indices.
    #[arg(long)]
    rate: Option<f64>,
    /// Entropy threshold for information indices.
    #[arg(long)]
    threshold: Option<f64>,
    /// Reed-Muller rule: digit sum above the value.
    #[arg(long)]
    rm: Option<usize>,
    /// Hyperbolic rule: product of (digit + 1) above the value.
    #[arg(long)]
    hyperbolic: Option<usize>,
}

/// Per-index row: estimate and standard error of H, Z and P_e.
struct IndexRow {
    values: [(f64, f64); 3],
}

const INDEX_HEADER: &str =
    "index,entropy,entropy_se,bhattacharyya,bhattacharyya_se,error_probability,error_probability_se";

impl IndexRow {
    fn score(&self) -> IndexScore {
        IndexScore {
            entropy: self.values[0].0,
            error_probability: self.values[2].0,
        }
    }
}

impl From<&McStats> for IndexRow {
    fn from(s: &McStats) -> Self {
        let e = |v: fqpolar::polarlab::Estimate| (v.mean, v.std_error);
        Self {
            values: [e(s.entropy), e(s.bhattacharyya), e(s.error_probability)],
        }
    }
}

fn index_rows(
    kernel: &Matrix,
    channel: &Channel,
    depth: usize,
    mc: &McArgs,
) -> Result<Vec<IndexRow>> {
    let mc_rows = |stats: Vec<McStats>| stats.iter().map(IndexRow::from).collect();
    Ok(match (channel, mc.samples) {
        (Channel::Discrete(src), None) => transform_all(src, kernel, depth)?
            .iter()
            .map(|sub| {
                let s = stats(sub);
                IndexRow {
                    values: [
                        (s.entropy, 0.0),
                        (s.bhattacharyya, 0.0),
                        (s.error_probability, 0.0),
                    ],
                }
            })
            .collect(),
        (Channel::Discrete(src), Some(n)) => mc_rows(mc_all_subchannels(
            &DiscreteSampler::new(src),
            kernel,
            depth,
            n,
            mc.seed,
        )?),
        (Channel::Awgn(s), Some(n)) => mc_rows(mc_all_subchannels(s, kernel, depth, n, mc.seed)?),
        (Channel::Awgn(_), None) => bail!("the AWGN channel needs --samples"),
    })
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn csv(header: &str, rows: impl IntoIterator<Item = String>) -> String {
    let mut out = format!("{header}\n");
    for r in rows {
        out.push_str(&r);
        out.push('\n');
    }
    out
}

fn parse_symbols(field: &FieldCtx, text: &str) -> Result<Vec<FieldElem>> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            let v: u32 = t.parse().with_context(|| format!("bad symbol {t:?}"))?;
            Ok(field.elem(v)?)
        })
        .collect()
}

fn load_code(path: &Path) -> Result<PolarCodeSpec> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file = CodeFile::parse(&text)?;
    let field: FieldCtx = file.field.parse()?;
    let kernel = resolve_kernel(&field, &file.kernel, path.parent())?;
    Ok(PolarCodeSpec::from_file(&file, &kernel)?)
}

fn join<T: ToString>(v: &[T], sep: &str) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(sep)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::AnalyzeKernel { kernel, text } => {
            let (_, g) = kernel.load()?;
            let r = analyze(&g)?;
            if text {
                print!("{r}");
            } else {
                let class = match r.classification {
                    Classification::Polarizing => "polarizing".to_string(),
                    Classification::NonPolarizingIdentity => "non-polarizing-identity".to_string(),
                    Classification::NonPolarizingSubfield(s) => {
                        format!("non-polarizing-subfield-{s}")
                    }
                };
                let row = format!(
                    "{},{},{class},{},{},{:.12},{:.12},{:.12}",
                    g.field(),
                    g.size(),
                    join(&r.channel_distances, " "),
                    join(&r.source_distances, " "),
                    r.exponents.channel,
                    r.exponents.source,
                    r.exponents.channel_variance
                );
                print!(
                    "{}",
                    csv(
                        "field,size,classification,channel_distances,source_distances,channel_exponent,source_exponent,channel_variance",
                        [row]
                    )
                );
            }
        }
        Command::Stats { channel, field } => {
            let src = match &channel.source {
                Some(_) => channel.discrete(None)?,
                None => channel.discrete(Some(&field.parse()?))?,
            };
            print!(
                "{}",
                csv(
                    fqpolar::chanmodel::SubchannelStats::CSV_HEADER,
                    [stats(&src).csv_row()]
                )
            );
        }
        Command::Polarize {
            kernel,
            channel,
            depth,
            mc,
            output,
        } => {
            let (field, g) = kernel.load()?;
            let ch = channel.load(Some(&field))?;
            let rows = index_rows(&g, &ch, depth, &mc)?;
            let lines = rows.iter().enumerate().map(|(i, r)| {
                let cells: Vec<String> = r
                    .values
                    .iter()
                    .map(|(m, s)| format!("{m:.12e},{s:.6e}"))
                    .collect();
                format!("{i},{}", cells.join(","))
            });
            emit(output.as_deref(), &csv(INDEX_HEADER, lines))?;
        }
        Command::Construct {
            kernel,
            channel,
            depth,
            rule,
            mc,
            output,
        } => {
            let (field, g) = kernel.load()?;
            let needs_scores = rule.rate.is_some() || rule.threshold.is_some();
            let rows = if needs_scores || channel.source.is_some() || channel.channel.is_some() {
                let ch = channel.load(Some(&field))?;
                Some(index_rows(&g, &ch, depth, &mc)?)
            } else {
                None
            };
            let spec = if let Some(t) = rule.rm {
                PolarCodeSpec::from_info_set(&g, depth, &rm_indices(g.size(), depth, t)?)?
            } else if let Some(t) = rule.hyperbolic {
                PolarCodeSpec::from_info_set(&g, depth, &hyperbolic_indices(g.size(), depth, t)?)?
            } else {
                let scores: Vec<IndexScore> = rows
                    .as_ref()
                    .expect("scores computed")
                    .iter()
                    .map(IndexRow::score)
                    .collect();
                let selection = match (rule.rate, rule.threshold) {
                    (Some(r), _) => SelectionRule::TargetRate(r),
                    (_, Some(t)) => SelectionRule::Threshold(t),
                    _ => unreachable!("clap enforces one rule"),
                };
                build_spec(&g, depth, &scores, selection)?
            };
            let file = spec.to_file(&kernel.kernel);
            fs::write(&output, file.to_text())
                .with_context(|| format!("writing {}", output.display()))?;
            eprintln!(
                "block length {}, dimension {}, rate {:.6}",
                spec.block_length(),
                spec.dimension(),
                spec.rate()
            );
            if let Some(rows) = &rows {
                let pe: Vec<f64> = rows.iter().map(|r| r.values[2].0).collect();
                eprintln!("union bound {:.6e}", union_bound(&pe, spec.info_set()));
            }
            let lines = (0..spec.block_length()).map(|i| {
                let frozen = spec.is_frozen(i);
                match &rows {
                    Some(r) => format!(
                        "{i},{},{:.12e},{:.12e}",
                        frozen, r[i].values[0].0, r[i].values[2].0
                    ),
                    None => format!("{i},{frozen},,"),
                }
            });
            print!("{}", csv("index,frozen,entropy,error_probability", lines));
        }
        Command::Encode { code, info, seed } => {
            let spec = load_code(&code)?;
            let field = spec.field().clone();
            let info = match info {
                Some(text) => parse_symbols(&field, &text)?,
                None => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    (0..spec.dimension())
                        .map(|_| FieldElem(rng.random_range(0..field.q() as u32)))
                        .collect()
                }
            };
            let x = encode(&spec, &info)?;
            eprintln!(
                "info {}",
                join(&info.iter().map(|v| v.0).collect::<Vec<_>>(), ",")
            );
            print!(
                "{}",
                csv(
                    "position,symbol",
                    x.iter().enumerate().map(|(i, v)| format!("{i},{}", v.0))
                )
            );
        }
        Command::Decode {
            code,
            channel,
            received,
        } => {
            let spec = load_code(&code)?;
            let src = channel.discrete(Some(spec.field()))?;
            let ys: Vec<usize> = received
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .map(|t| {
                    t.parse::<usize>()
                        .with_context(|| format!("bad output id {t:?}"))
                })
                .collect::<Result<_>>()?;
            if let Some(&y) = ys.iter().find(|&&y| y >= src.output_size()) {
                bail!(
                    "output id {y} out of range (alphabet size {})",
                    src.output_size()
                );
            }
            let lik: Vec<Vec<f64>> = ys.iter().map(|&y| src.column(y).to_vec()).collect();
            let decoded = sc_decode(&spec, &lik)?;
            let lines = spec
                .info_set()
                .iter()
                .zip(&decoded.info)
                .map(|(i, v)| format!("{i},{}", v.0));
            print!("{}", csv("index,symbol", lines));
        }
        Command::SimulateFig2 {
            config,
            samples,
            seed,
            output,
        } => {
            let (mut cfg, base) = match &config {
                Some(path) => {
                    let text = fs::read_to_string(path)
                        .with_context(|| format!("reading {}", path.display()))?;
                    (
                        ExperimentConfig::parse(&text)?,
                        path.parent().map(Path::to_path_buf),
                    )
                }
                None => (ExperimentConfig::desk_scale(20_000, 1), None),
            };
            if let Some(s) = samples {
                cfg.samples = s;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let points = run_fig2(&cfg, base.as_deref())?;
            let text = csv(
                fqpolar::harness::Fig2Point::CSV_HEADER,
                points.iter().map(|p| p.csv_row()),
            );
            let target = output.or_else(|| {
                cfg.output.as_ref().map(|o| match &base {
                    Some(b) => b.join(o),
                    None => PathBuf::from(o),
                })
            });
            emit(target.as_deref(), &text)?;
        }
        Command::VerifyBounds {
            config,
            cases,
            seed,
            output,
        } => {
            let mut cfg = match &config {
                Some(path) => {
                    let text = fs::read_to_string(path)
                        .with_context(|| format!("reading {}", path.display()))?;
                    BatteryConfig::parse(&text)?
                }
                None => BatteryConfig::default(),
            };
            if let Some(c) = cases {
                cfg.cases = c;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            cfg.validate()?;
            let report = verify_inequalities(&cfg);
            emit(output.as_deref(), &report.to_csv())?;
            for o in report.failures() {
                eprintln!(
                    "FAILED {} {}: {} violations, worst {:e}",
                    o.family, o.check, o.violations, o.worst_slack
                );
                if let Some(v) = &o.violator {
                    eprintln!("{v}");
                }
            }
            if !report.passed() {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Counterexample {
            e0,
            e1,
            depth,
            kernel,
            bins,
            contrast,
            contrast_depth,
            samples,
            seed,
        } => {
            let field = FieldCtx::of_size(4)?;
            let g = resolve_kernel(&field, &kernel, None)?;
            let source = BecPairSource::new(e0, e1)?;
            let hist = bec_pair_counterexample(&g, &source, depth)?;
            print!(
                "{}",
                csv(
                    fqpolar::harness::PathHistogram::CSV_HEADER,
                    hist.csv_rows(bins)
                )
            );
            eprintln!("mean {:.12}", hist.mean());
            eprintln!("mass in [0.4, 0.6] {:.6}", hist.mass_closed(0.4, 0.6));
            if let Some(name) = contrast {
                let other = resolve_kernel(&field, &name, None)?;
                let r = contrast_middle_mass(
                    &g,
                    &other,
                    &source,
                    contrast_depth,
                    (0.1, 0.9),
                    samples,
                    seed,
                )?;
                eprintln!(
                    "depth {} middle mass (0.1, 0.9): reference {:.6}, contrast {:.6}, ratio {:.4}",
                    r.depth,
                    r.reference_mass,
                    r.contrast_mass,
                    r.ratio()
                );
            }
        }
        Command::Speed {
            kernel,
            eps,
            depth,
            threshold,
        } => {
            let (field, g) = kernel.load()?;
            let ch = erasure(&field, eps)?;
            let lines = threshold
                .iter()
                .map(|&t| {
                    Ok(format!(
                        "{depth},{t},{:.12}",
                        speed_empiric(&g, &ch, depth, t)?
                    ))
                })
                .collect::<Result<Vec<String>>>()?;
            print!("{}", csv("depth,threshold,fraction", lines));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
