//! `soe`: subspace outlier ensembles on categorical CSV data.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or I/O error, 3 internal error.

mod commands;
mod config;
mod table;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use soe_core::synth::DEFAULT_SEED;
use soe_core::{Combiner, MissingPolicy, Polarity};

#[derive(Parser, Debug)]
#[command(
    name = "soe",
    version,
    about = "Subspace outlier ensembles for categorical data",
    long_about = "Scores records by how frequent their attribute values are, fuses the \
                  per-attribute factors with a combining operator and reports the most \
                  outlying records.\n\n\
                  Every flag can also be set through an SOE_<FLAG> environment variable \
                  (for example SOE_TOP_RATIO) or a `--config` file of `flag = value` lines. \
                  Flags override the environment, which overrides the config file.\n\n\
                  Exit codes: 0 ok, 1 usage error, 2 data or I/O error, 3 internal error."
)]
struct Cli {
    /// Worker threads [default: available cores].
    #[arg(long, global = true, env = "SOE_THREADS")]
    threads: Option<usize>,
    /// Print space-aligned tables instead of TSV.
    #[arg(long, global = true, env = "SOE_PRETTY")]
    pretty: bool,
    /// Seed for every random choice.
    #[arg(long, global = true, env = "SOE_SEED", default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// File of `flag = value` lines used for flags not given otherwise.
    #[arg(long, global = true, env = "SOE_CONFIG")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Rank records with the two-scan one-dimensional detector.
    Detect(DetectArgs),
    /// Rank records over arbitrary subspaces with joint-frequency detectors.
    Framework(FrameworkArgs),
    /// Rare-class coverage of full rankings at several cut-offs.
    Eval(EvalArgs),
    /// Generate a labelled synthetic categorical dataset.
    Synth(SynthArgs),
    /// Time detection on synthetic data of growing size.
    Bench(BenchArgs),
    /// Download the UCI benchmark datasets and convert them to CSV.
    Fetch(FetchArgs),
}

#[derive(Args, Debug)]
struct LoadArgs {
    /// Headed CSV input.
    #[arg(long, env = "SOE_INPUT")]
    input: PathBuf,
    /// Cell text that marks a missing value.
    #[arg(long, env = "SOE_MISSING_TOKEN", default_value = "?")]
    missing_token: String,
    /// `special` keeps missing cells as a value; `ignore` drops them from scoring.
    #[arg(long, env = "SOE_MISSING_POLICY", default_value = "special")]
    missing_policy: MissingPolicy,
    /// Equal-width binning of numeric columns: `<column>=<B>` or `all=<B>`;
    /// repeat or separate with commas.
    #[arg(long, env = "SOE_BINS", value_delimiter = ',')]
    bins: Vec<String>,
}

#[derive(Args, Debug)]
#[group(id = "selection", required = true, multiple = false)]
struct SelectArgs {
    /// Number of records to report.
    #[arg(long, env = "SOE_K", group = "selection")]
    k: Option<usize>,
    /// Fraction of the records to report, in (0, 1].
    #[arg(long, env = "SOE_TOP_RATIO", group = "selection")]
    top_ratio: Option<f64>,
}

#[derive(Args, Debug)]
struct ScoreArgs {
    /// Combining operator: prod, sum, sq:<q> or sinf.
    #[arg(long, env = "SOE_OPERATOR", default_value = "prod")]
    operator: Combiner,
    /// `frequency`: low frequency is outlying; `rarity`: high 1 - frequency is.
    #[arg(long, env = "SOE_POLARITY", default_value = "frequency")]
    polarity: Polarity,
    /// Score the product as a sum of logarithms.
    #[arg(long, env = "SOE_LOG_SPACE")]
    log_space: bool,
}

#[derive(Args, Debug)]
struct DetectArgs {
    #[command(flatten)]
    load: LoadArgs,
    #[command(flatten)]
    select: SelectArgs,
    #[command(flatten)]
    score: ScoreArgs,
    /// Column excluded from detection.
    #[arg(long, env = "SOE_CLASS_COL")]
    class_col: Option<String>,
    /// Append the original CSV row to each reported record.
    #[arg(long, env = "SOE_ECHO_ROWS")]
    echo_rows: bool,
    /// Append the per-attribute factor vector to each reported record.
    #[arg(long, env = "SOE_EXPLAIN")]
    explain: bool,
    /// Write the attribute histograms to this TSV file.
    #[arg(long, env = "SOE_DUMP_HISTOGRAMS")]
    dump_histograms: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FrameworkArgs {
    #[command(flatten)]
    load: LoadArgs,
    #[command(flatten)]
    select: SelectArgs,
    #[command(flatten)]
    score: ScoreArgs,
    /// Column excluded from detection.
    #[arg(long, env = "SOE_CLASS_COL")]
    class_col: Option<String>,
    /// A file with one comma-separated attribute list per line, or
    /// `all:<max-dim>` for every subspace up to that dimensionality.
    #[arg(long, env = "SOE_SUBSPACES")]
    subspaces: String,
    /// Refuse `all:<max-dim>` enumerations larger than this.
    #[arg(long, env = "SOE_MAX_SUBSPACES", default_value_t = 100_000)]
    max_subspaces: u128,
    /// Report one ranking per subspace instead of fusing.
    #[arg(long, env = "SOE_NO_ENSEMBLE")]
    no_ensemble: bool,
    /// Largest factor matrix kept in memory, in bytes (K, M and G suffixes allowed).
    #[arg(long, env = "SOE_MEMORY_BUDGET", default_value = "256M", value_parser = parse_bytes)]
    memory_budget: usize,
}

#[derive(Args, Debug)]
#[group(id = "cutoffs", multiple = false)]
struct CutoffArgs {
    /// Top ratios in percent.
    #[arg(long, env = "SOE_RATIOS", value_delimiter = ',', group = "cutoffs")]
    ratios: Vec<f64>,
    /// Explicit record counts.
    #[arg(long, env = "SOE_KS", value_delimiter = ',', group = "cutoffs")]
    ks: Vec<usize>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    load: LoadArgs,
    /// Column holding the class labels.
    #[arg(long, env = "SOE_CLASS_COL")]
    class_col: String,
    /// Rare classes: a comma-separated label list, or `lt:<fraction>` for every
    /// class below that share of the records.
    #[arg(long, env = "SOE_RARE", default_value = "lt:0.05")]
    rare: String,
    #[command(flatten)]
    cutoffs: CutoffArgs,
    /// Operators to compare.
    #[arg(
        long,
        env = "SOE_OPERATORS",
        value_delimiter = ',',
        default_value = "prod,sum,sq:2,sq:5,sq:7,sinf"
    )]
    operators: Vec<Combiner>,
    /// frequency, rarity or both.
    #[arg(long, env = "SOE_POLARITY", default_value = "both")]
    polarity: String,
    /// Resolve ratios against this record count instead of the dataset size.
    #[arg(long, env = "SOE_K_BASE")]
    k_base: Option<usize>,
    /// Score the product as a sum of logarithms.
    #[arg(long, env = "SOE_LOG_SPACE")]
    log_space: bool,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Start from a named shape: DS1, DS2, DS3 or DS4.
    #[arg(long, env = "SOE_PRESET")]
    preset: Option<String>,
    #[arg(long, env = "SOE_ROWS")]
    rows: Option<usize>,
    #[arg(long, env = "SOE_ATTRS")]
    attrs: Option<usize>,
    #[arg(long, env = "SOE_CLASSES")]
    classes: Option<usize>,
    /// Distinct values per attribute.
    #[arg(long, env = "SOE_VALUES_PER_ATTR")]
    values_per_attr: Option<usize>,
    /// Probability that a cell takes its class's mode.
    #[arg(long, env = "SOE_CLASS_SKEW")]
    class_skew: Option<f64>,
    /// Output CSV [default: stdout].
    #[arg(long, env = "SOE_OUT")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Dataset shape: DS1, DS2, DS3 or DS4 [default: DS1 unless rows/attrs are given].
    #[arg(long, env = "SOE_SPEC")]
    spec: Option<String>,
    #[arg(long, env = "SOE_ROWS")]
    rows: Option<usize>,
    #[arg(long, env = "SOE_ATTRS")]
    attrs: Option<usize>,
    #[arg(long, env = "SOE_CLASSES")]
    classes: Option<usize>,
    /// Row fractions to time, strictly increasing.
    #[arg(
        long,
        env = "SOE_FRACTIONS",
        value_delimiter = ',',
        default_value = "0.25,0.5,0.75,1.0",
        conflicts_with = "attr_sweep"
    )]
    fractions: Vec<f64>,
    /// Time these attribute counts at a fixed row count instead.
    #[arg(long, env = "SOE_ATTR_SWEEP", value_delimiter = ',')]
    attr_sweep: Vec<usize>,
    /// Timed runs per size; the median is reported.
    #[arg(long, env = "SOE_REPEATS", default_value_t = 3)]
    repeats: usize,
    #[arg(long, env = "SOE_K", default_value_t = 100)]
    k: usize,
    #[arg(long, env = "SOE_OPERATOR", default_value = "prod")]
    operator: Combiner,
    /// Write `size seconds` pairs for plotting to this file.
    #[arg(long, env = "SOE_PLOT_DATA")]
    plot_data: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FetchArgs {
    /// lymphography, wisconsin, arrhythmia [default: all three].
    datasets: Vec<String>,
    /// Directory for the converted CSVs.
    #[arg(long, env = "SOE_OUT", default_value = "data")]
    out: PathBuf,
    /// Repository root URL.
    #[arg(long, env = "SOE_BASE_URL", default_value = soe_core::uci::UCI_BASE)]
    base_url: String,
}

fn parse_bytes(s: &str) -> Result<usize, String> {
    let s = s.trim();
    let (digits, scale) = match s.chars().last().map(|c| c.to_ascii_uppercase()) {
        Some('K') => (&s[..s.len() - 1], 1usize << 10),
        Some('M') => (&s[..s.len() - 1], 1 << 20),
        Some('G') => (&s[..s.len() - 1], 1 << 30),
        _ => (s, 1),
    };
    digits
        .trim()
        .parse::<usize>()
        .ok()
        .and_then(|v| v.checked_mul(scale))
        .ok_or_else(|| format!("invalid byte count `{s}`"))
}

/// A usage error clap has already printed.
#[derive(Debug)]
struct Reported;

impl std::fmt::Display for Reported {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("invalid command line")
    }
}

impl std::error::Error for Reported {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Reported>() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<soe_core::Error>() {
            return match e {
                soe_core::Error::Usage(_) => 1,
                soe_core::Error::Parse { .. }
                | soe_core::Error::Data(_)
                | soe_core::Error::Io(_)
                | soe_core::Error::Csv(_) => 2,
                soe_core::Error::EmptyFactors => 3,
            };
        }
        if cause.is::<std::io::Error>() || cause.is::<ureq::Error>() {
            return 2;
        }
    }
    3
}

fn run(args: Vec<OsString>) -> anyhow::Result<()> {
    let args = config::merge(args)?;
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            e.print()?;
            return Ok(());
        }
        Err(e) => {
            e.print()?;
            return Err(Reported.into());
        }
    };
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(soe_core::Error::Usage("--threads must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| anyhow::anyhow!("cannot size the thread pool: {e}"))?;
    }
    let ctx = commands::Context {
        pretty: cli.pretty,
        seed: cli.seed,
    };
    match cli.command {
        Command::Detect(a) => commands::detect(&ctx, a),
        Command::Framework(a) => commands::framework(&ctx, a),
        Command::Eval(a) => commands::eval(&ctx, a),
        Command::Synth(a) => commands::synth(&ctx, a),
        Command::Bench(a) => commands::bench(&ctx, a),
        Command::Fetch(a) => commands::fetch(&ctx, a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    match run(std::env::args_os().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if !e.is::<Reported>() {
                eprintln!("soe: error: {e:#}");
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
