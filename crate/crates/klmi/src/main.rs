//! Command-line interface: estimate, sweep, bias and simulate.

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use klmi::dataio::{read_matrix, read_points, write_result, OutputFormat, ResultDoc};
use klmi::error::Error;
use klmi::estimator::{
    bias_table_with, sweep_h_with, unbiased_mi_with, EstimateOptions, LabeledDataset, LogVariant,
};
use klmi::metric::Metric;
use klmi::synthesis::permutation_bias_oracle;

#[derive(Parser)]
#[command(
    name = "klmi",
    version,
    about = "Mutual information between labels and metric-space points, with exact bias correction",
    long_about = None
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Unbiased estimate at a single smoothing parameter h.
    Estimate(EstimateArgs),
    /// Estimate over a range of h and select the h maximising ie_bits.
    Sweep(SweepArgs),
    /// Closed-form bias table from class counts alone (no geometry).
    Bias(BiasArgs),
    /// Label-permutation Monte Carlo check of the bias formula on a
    /// dataset's geometry.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Points file: label column followed by feature columns.
    #[arg(long, value_name = "PATH", conflicts_with = "matrix", required_unless_present = "matrix")]
    points: Option<PathBuf>,

    /// Distance-matrix file: label column followed by n distance columns.
    #[arg(long, value_name = "PATH")]
    matrix: Option<PathBuf>,

    /// Point metric: euclidean, manhattan, chebyshev or hamming.
    /// Ignored for matrix input.
    #[arg(long, value_name = "NAME", default_value = "euclidean", value_parser = Metric::from_str)]
    metric: Metric,

    /// Field delimiter; "\t" selects tabs.
    #[arg(long, value_name = "CHAR", default_value = ",", value_parser = parse_delimiter)]
    delimiter: u8,

    /// Skip the first line of the input file.
    #[arg(long)]
    header: bool,
}

impl InputArgs {
    fn load(&self) -> Result<LabeledDataset, Error> {
        match (&self.points, &self.matrix) {
            (Some(path), None) => {
                let mut ds = read_points(path, self.delimiter, self.header)?;
                ds.set_metric(self.metric);
                Ok(ds)
            }
            (None, Some(path)) => read_matrix(path, self.delimiter, self.header),
            _ => unreachable!("clap enforces exactly one input"),
        }
    }
}

#[derive(Args)]
struct OutputArgs {
    /// Output format: json or tsv.
    #[arg(long, value_name = "FMT", default_value = "json", value_parser = OutputFormat::from_str)]
    format: OutputFormat,

    /// Worker threads for per-seed and per-h parallelism; results are
    /// identical for any thread count. Defaults to all cores.
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
}

#[derive(Args)]
struct VariantArgs {
    /// Class-cardinality factor inside the logarithms: nx (distinct
    /// labels; cancels the bias exactly) or nc (per-class count;
    /// diagnostic only).
    #[arg(long, value_name = "V", default_value = "nx", value_parser = parse_log_variant)]
    log_variant: LogVariant,

    /// Treat the label alphabet as having this many possible outcomes
    /// instead of the number observed.
    #[arg(long, value_name = "K")]
    nx_override: Option<u64>,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    input: InputArgs,

    /// Ball occupancy (number of points in each ball, seed included).
    #[arg(long, value_name = "K")]
    h: usize,

    /// Relative tolerance for merging boundary radii into one draw
    /// group; 0 means exact float equality.
    #[arg(long, value_name = "X", default_value_t = 0.0)]
    tie_epsilon: f64,

    #[command(flatten)]
    variant: VariantArgs,

    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    input: InputArgs,

    /// Smallest h in the sweep (default 1).
    #[arg(long, value_name = "A")]
    h_min: Option<usize>,

    /// Largest h in the sweep (default min(64, n - 1)).
    #[arg(long, value_name = "B")]
    h_max: Option<usize>,

    /// Relative tolerance for merging boundary radii into one draw
    /// group; 0 means exact float equality.
    #[arg(long, value_name = "X", default_value_t = 0.0)]
    tie_epsilon: f64,

    #[command(flatten)]
    variant: VariantArgs,

    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct BiasArgs {
    /// Per-class record counts, e.g. --counts 100,60,40.
    #[arg(long, value_name = "LIST", value_delimiter = ',', required = true)]
    counts: Vec<u64>,

    /// Ball occupancy the bias is evaluated at.
    #[arg(long, value_name = "K")]
    h: usize,

    #[command(flatten)]
    variant: VariantArgs,

    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    input: InputArgs,

    /// Ball occupancy the oracle checks.
    #[arg(long, value_name = "K")]
    h: usize,

    /// Number of label permutations to draw.
    #[arg(long, value_name = "R", default_value_t = 10_000)]
    replicates: u64,

    /// Seed for the replicate streams.
    #[arg(long, value_name = "S", default_value_t = 0)]
    seed: u64,

    #[command(flatten)]
    output: OutputArgs,
}

fn parse_delimiter(s: &str) -> Result<u8, String> {
    let c = match s {
        "\\t" | "tab" => '\t',
        _ => {
            let mut chars = s.chars();
            let c = chars
                .next()
                .ok_or_else(|| "delimiter must be one character".to_string())?;
            if chars.next().is_some() {
                return Err("delimiter must be one character".to_string());
            }
            c
        }
    };
    u8::try_from(c).map_err(|_| "delimiter must be a single-byte character".to_string())
}

fn parse_log_variant(s: &str) -> Result<LogVariant, String> {
    match s {
        "nx" => Ok(LogVariant::Nx),
        "nc" => Ok(LogVariant::Nc),
        other => Err(format!("unknown log variant '{other}' (expected nx or nc)")),
    }
}

fn configure_threads(threads: Option<usize>) {
    if let Some(n) = threads {
        // Ignore failure: the global pool can only be set once, which is
        // harmless when the library already initialised it.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn run(cli: Cli) -> Result<String, Error> {
    match cli.command {
        Command::Estimate(args) => {
            configure_threads(args.output.threads);
            let ds = args.input.load()?;
            let opts = EstimateOptions {
                tie_epsilon: args.tie_epsilon,
                log_variant: args.variant.log_variant,
                nx_override: args.variant.nx_override,
            };
            let est = unbiased_mi_with(&ds, args.h, &opts)?;
            Ok(write_result(&ResultDoc::Estimate(&est), args.output.format))
        }
        Command::Sweep(args) => {
            configure_threads(args.output.threads);
            let ds = args.input.load()?;
            let h_min = args.h_min.unwrap_or(1);
            let h_max = args
                .h_max
                .unwrap_or_else(|| 64.min(ds.n().saturating_sub(1)));
            let opts = EstimateOptions {
                tie_epsilon: args.tie_epsilon,
                log_variant: args.variant.log_variant,
                nx_override: args.variant.nx_override,
            };
            let sweep = sweep_h_with(&ds, h_min, h_max, &opts)?;
            Ok(write_result(&ResultDoc::Sweep(&sweep), args.output.format))
        }
        Command::Bias(args) => {
            configure_threads(args.output.threads);
            let table = bias_table_with(
                &args.counts,
                args.h,
                args.variant.log_variant,
                args.variant.nx_override,
            )?;
            let n: u64 = args.counts.iter().sum();
            let n_x = args
                .variant
                .nx_override
                .unwrap_or(args.counts.len() as u64);
            Ok(write_result(
                &ResultDoc::Bias {
                    n,
                    n_x,
                    class_counts: &args.counts,
                    table: &table,
                },
                args.output.format,
            ))
        }
        Command::Simulate(args) => {
            configure_threads(args.output.threads);
            let ds = args.input.load()?;
            let report = permutation_bias_oracle(
                &ds.distance_matrix(),
                ds.class_counts(),
                args.h,
                args.replicates,
                args.seed,
            )?;
            Ok(write_result(&ResultDoc::Report(&report), args.output.format))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(output) => {
            print!("{output}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("klmi: {err}");
            ExitCode::from(1)
        }
    }
}
