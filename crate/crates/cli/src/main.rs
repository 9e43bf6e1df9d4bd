use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use suphist::gadgets::{gadget_stream, BicriteriaConstants, GadgetSpec};
use suphist::histogram::{domain_error, support_error, Histogram};
use suphist::ingest::{ingest_file, IngestMode};
use suphist::stream::{write_stream, ExactDistribution, FileStream, StreamSource, VecStream};
use suphist::sweep::{
    run_algorithm, sweep, write_detail_csv, write_summary_csv, Algorithm, RunParams, SweepConfig,
    DETAIL_COLUMNS, SUMMARY_COLUMNS,
};
use suphist::synth::{generate_synthetic, SyntheticKind, SyntheticSpec};

#[derive(Parser)]
#[command(name = "suphist", version, about = "Support-aware k-piece histograms of turnstile streams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a raw text file into a stream file.
    Ingest(IngestArgs),
    /// Generate a synthetic stream or a lower-bound gadget.
    Synth(SynthArgs),
    /// Run one algorithm on a stream file and print the histogram as JSON.
    Run(RunArgs),
    /// Run algorithms over a grid of space budgets and write CSV.
    #[command(after_help = format!(
        "Detail CSV columns: {DETAIL_COLUMNS}\nSummary CSV columns: {SUMMARY_COLUMNS}\n\
         wall_ms is present only with --timing. Standard deviations are sample deviations."
    ))]
    Sweep(SweepArgs),
    /// Evaluate a histogram JSON against a stream file.
    Eval(EvalArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum IngestKind {
    TextPrefix,
    Ipv4Prefix,
    DecimalBucket,
    Timestamp,
}

#[derive(Args)]
struct IngestArgs {
    /// Raw input file.
    input: PathBuf,
    #[arg(long, value_enum)]
    mode: IngestKind,
    /// Prefix length for text-prefix.
    #[arg(long, default_value_t = 3)]
    len: u32,
    /// Rounding step for decimal-bucket.
    #[arg(long, default_value_t = 0.01)]
    step: f64,
    #[arg(long, default_value_t = -90.0, allow_hyphen_values = true)]
    min: f64,
    #[arg(long, default_value_t = 90.0, allow_hyphen_values = true)]
    max: f64,
    /// 0-based comma-separated column to read; whole line when absent.
    #[arg(long)]
    column: Option<usize>,
    /// Output stream file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    EvenUniform,
    Zipf,
    UniformSparse,
    MiceElephants,
}

#[derive(Clone, Copy, ValueEnum)]
enum GadgetFamily {
    Disjointness,
    Proper,
    Bicriteria,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum, conflicts_with = "gadget")]
    kind: Option<SynthKind>,
    #[arg(long, value_enum)]
    gadget: Option<GadgetFamily>,
    /// Domain size (for proper and bicriteria gadgets, the perfect square n).
    #[arg(long)]
    n: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    count: u64,
    #[arg(long, default_value_t = 1.1)]
    exponent: f64,
    #[arg(long, default_value_t = 10_000)]
    length: u64,
    #[arg(long)]
    scatter: bool,
    #[arg(long, default_value_t = 100)]
    support: u64,
    #[arg(long, default_value_t = 100)]
    mice: u64,
    #[arg(long, default_value_t = 1)]
    mice_count: u64,
    #[arg(long, default_value_t = 10)]
    elephants: u64,
    #[arg(long, default_value_t = 100)]
    elephant_count: u64,
    /// Items inserted and later deleted again.
    #[arg(long, default_value_t = 0)]
    transient: u64,
    /// Alice's bit string, e.g. 0110.
    #[arg(long)]
    a: Option<String>,
    /// Bob's bit string (disjointness).
    #[arg(long)]
    b: Option<String>,
    /// Bob's index (1-based) for proper and bicriteria gadgets.
    #[arg(long)]
    j: Option<usize>,
    #[arg(long, default_value_t = 0.2)]
    gamma: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AlgoArgs {
    #[arg(long, default_value_t = 4)]
    k: usize,
    #[arg(long, default_value_t = 0.25)]
    eps: f64,
    /// Use k = space / scale_k pieces for the fixed baselines.
    #[arg(long)]
    scale_k: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct RunArgs {
    /// Stream file.
    input: PathBuf,
    #[arg(long, value_parser = parse_algo)]
    algo: Algorithm,
    #[command(flatten)]
    common: AlgoArgs,
    /// Space budget; selects the budgeted parameterization of onepass and twopass.
    #[arg(long)]
    space: Option<u64>,
    /// Two-pass: use exact hierarchical heavy hitters.
    #[arg(long)]
    hhh_exact: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    input: PathBuf,
    /// Comma-separated: onepass,twopass,fixed-support,fixed-domain,oracle.
    #[arg(long, value_delimiter = ',', value_parser = parse_algo, required = true)]
    algo: Vec<Algorithm>,
    /// Comma-separated space budgets.
    #[arg(long, value_delimiter = ',', required = true)]
    space: Vec<u64>,
    #[command(flatten)]
    common: AlgoArgs,
    #[arg(long, default_value_t = 10)]
    trials: u64,
    #[arg(long)]
    timing: bool,
    /// Detail CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    input: PathBuf,
    /// Histogram JSON, bare or as the `histogram` field of a run output.
    #[arg(long)]
    histogram: PathBuf,
}

fn parse_algo(s: &str) -> std::result::Result<Algorithm, String> {
    s.parse().map_err(|e: suphist::Error| e.to_string())
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn load(path: &Path) -> Result<VecStream> {
    let f = FileStream::open(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(f.load()?)
}

fn bits(s: Option<&str>, name: &str) -> Result<Vec<bool>> {
    let s = s.with_context(|| format!("--{name} is required"))?;
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => bail!("--{name} must be a 0/1 string"),
        })
        .collect()
}

fn cmd_ingest(a: IngestArgs) -> Result<()> {
    let mode = match a.mode {
        IngestKind::TextPrefix => IngestMode::TextPrefix { len: a.len },
        IngestKind::Ipv4Prefix => IngestMode::Ipv4Prefix,
        IngestKind::DecimalBucket => IngestMode::DecimalBucket {
            step: a.step,
            min: a.min,
            max: a.max,
        },
        IngestKind::Timestamp => IngestMode::Timestamp,
    };
    let s = ingest_file(&a.input, &mode, a.column)?;
    write_stream(&s, output(a.out.as_deref())?)?;
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let stream = if let Some(family) = a.gadget {
        let spec = match family {
            GadgetFamily::Disjointness => GadgetSpec::Disjointness {
                a: bits(a.a.as_deref(), "a")?,
                b: bits(a.b.as_deref(), "b")?,
            },
            GadgetFamily::Proper => GadgetSpec::Proper {
                n: a.n.context("--n is required")?,
                a: bits(a.a.as_deref(), "a")?,
                j: a.j.context("--j is required")?,
                gamma: a.gamma,
            },
            GadgetFamily::Bicriteria => GadgetSpec::Bicriteria {
                n: a.n.context("--n is required")?,
                x: bits(a.a.as_deref(), "a")?,
                i: a.j.context("--j is required")?,
                constants: BicriteriaConstants::default(),
            },
        };
        gadget_stream(&spec)?
    } else {
        let kind = match a.kind.context("one of --kind or --gadget is required")? {
            SynthKind::EvenUniform => SyntheticKind::EvenUniform {
                count_per_item: a.count,
            },
            SynthKind::Zipf => SyntheticKind::Zipf {
                exponent: a.exponent,
                length: a.length,
                scatter: a.scatter,
            },
            SynthKind::UniformSparse => SyntheticKind::UniformSparse {
                support: a.support,
                length: a.length,
            },
            SynthKind::MiceElephants => SyntheticKind::MiceElephants {
                mice: a.mice,
                mice_count: a.mice_count,
                elephants: a.elephants,
                elephant_count: a.elephant_count,
            },
        };
        let spec = SyntheticSpec::new(a.n.context("--n is required")?, kind).with_transient(a.transient);
        generate_synthetic(&spec, a.seed)?
    };
    write_stream(&stream, output(a.out.as_deref())?)?;
    Ok(())
}

fn params(c: &AlgoArgs, space: Option<u64>) -> RunParams {
    RunParams {
        k: c.k,
        eps: c.eps,
        space,
        scale_k: c.scale_k,
        exact_hhh: false,
        seed: c.seed,
    }
}

fn cmd_run(a: RunArgs) -> Result<()> {
    let stream = load(&a.input)?;
    let exact = ExactDistribution::from_source(&stream)?;
    let mut p = params(&a.common, a.space);
    p.exact_hhh = a.hhh_exact;
    let out = run_algorithm(&stream, Some(&exact), a.algo, &p)?;
    let report = json!({
        "algorithm": out.algorithm,
        "config": out.config,
        "seed": out.seed,
        "histogram": out.histogram,
        "space": out.space,
        "words": out.words,
        "errors": {
            "support": support_error(&exact, &out.histogram)?,
            "domain": domain_error(&exact, &out.histogram)?,
            "pieces": out.histogram.nonempty_piece_count(),
        },
    });
    let mut w = output(a.out.as_deref())?;
    serde_json::to_writer_pretty(&mut w, &report)?;
    writeln!(w)?;
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> Result<()> {
    let stream = load(&a.input)?;
    let cfg = SweepConfig {
        algorithms: a.algo,
        space_grid: a.space,
        k: a.common.k,
        eps: a.common.eps,
        trials: a.trials,
        master_seed: a.common.seed,
        scale_k: a.common.scale_k,
        timing: a.timing,
    };
    let res = sweep(&stream, &cfg)?;
    write_detail_csv(&res.detail, output(a.out.as_deref())?)?;
    if let Some(p) = a.summary {
        write_summary_csv(&res.summary, output(Some(&p))?)?;
    }
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let stream = load(&a.input)?;
    let text = std::fs::read_to_string(&a.histogram)
        .with_context(|| format!("reading {}", a.histogram.display()))?;
    let mut v: serde_json::Value = serde_json::from_str(&text)?;
    if let Some(h) = v.get_mut("histogram") {
        v = h.take();
    }
    let h: Histogram = serde_json::from_value(v).context("parsing histogram")?;
    if h.domain_size() != stream.domain_size() {
        return Err(suphist::Error::DomainMismatch {
            stream: stream.domain_size(),
            histogram: h.domain_size(),
        }
        .into());
    }
    let exact = ExactDistribution::from_source(&stream)?;
    let report = json!({
        "support_error": support_error(&exact, &h)?,
        "domain_error": domain_error(&exact, &h)?,
        "pieces": h.nonempty_piece_count(),
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Ingest(a) => cmd_ingest(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Eval(a) => cmd_eval(a),
    }
}
