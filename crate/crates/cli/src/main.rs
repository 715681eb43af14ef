//! `slsf`: dataset generation, index construction, queries, benchmarks and
//! bound verification for spherical locality-sensitive filters.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use spherical_lsf::bench::Engine;
use spherical_lsf::dataset::{DatasetMode, DEFAULT_FAR_MARGIN};
use spherical_lsf::filter::P1Source;

#[derive(Parser, Debug)]
#[command(name = "slsf", version, about = "Spherical locality-sensitive filters")]
pub struct Cli {
    /// Seed for every random choice the command makes.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads (defaults to the number of cores). Results do not
    /// depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Also write the JSON report to this file.
    #[arg(long, global = true)]
    pub json_out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a planted instance and its metadata sidecar.
    Gen(GenArgs),
    /// Build a filter bank for a dataset and print index statistics.
    Index(IndexArgs),
    /// Run one query against a dataset.
    Query(QueryArgs),
    /// Repeated build + query trials on fresh planted instances.
    Bench(BenchArgs),
    /// Monte Carlo check of the collision-probability bounds.
    VerifyBounds(VerifyArgs),
    /// Tabulate ρ from the closed-form bounds.
    Rho(RhoArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    PlantedHard,
    UniformReject,
}

impl From<ModeArg> for DatasetMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::PlantedHard => DatasetMode::PlantedHard,
            ModeArg::UniformReject => DatasetMode::UniformReject,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum EngineArg {
    Auto,
    Materialized,
    Sampled,
}

impl From<EngineArg> for Engine {
    fn from(e: EngineArg) -> Self {
        match e {
            EngineArg::Auto => Engine::Auto,
            EngineArg::Materialized => Engine::Materialized,
            EngineArg::Sampled => Engine::Sampled,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum P1Arg {
    Quadrature,
    LowerBound,
}

impl From<P1Arg> for P1Source {
    fn from(p: P1Arg) -> Self {
        match p {
            P1Arg::Quadrature => P1Source::Quadrature,
            P1Arg::LowerBound => P1Source::LowerBound,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct InstanceArgs {
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    #[arg(long, default_value_t = 64)]
    pub d: usize,
    /// Near angle γ in radians (accepts forms like `pi/8`).
    #[arg(long, default_value = "0.3", value_parser = commands::parse_angle)]
    pub gamma: f64,
    #[arg(long, default_value_t = 2.0)]
    pub c: f64,
    #[arg(long, value_enum, default_value = "planted-hard")]
    pub mode: ModeArg,
    /// Far points sit at cγ + margin radians.
    #[arg(long, default_value_t = DEFAULT_FAR_MARGIN)]
    pub far_margin: f64,
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    /// Dataset file; the sidecar goes to `<out>.meta.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct ParamArgs {
    /// Explicit threshold τ.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Explicit filter count m.
    #[arg(long)]
    pub m: Option<u64>,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    #[arg(long, value_enum, default_value = "quadrature")]
    pub p1_source: P1Arg,
}

#[derive(Args, Debug)]
pub struct IndexArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Where to write the filter bank.
    #[arg(long)]
    pub bank_out: Option<PathBuf>,
    #[command(flatten)]
    pub params: ParamArgs,
    /// Overrides γ from the metadata sidecar.
    #[arg(long, value_parser = commands::parse_angle)]
    pub gamma: Option<f64>,
    /// Overrides c from the metadata sidecar.
    #[arg(long)]
    pub c: Option<f64>,
}

#[derive(Args, Debug)]
pub struct QueryArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Filter bank written by `index`. Without it the query runs on filters
    /// sampled conditionally on the query (seeded by --seed).
    #[arg(long)]
    pub bank: Option<PathBuf>,
    /// Query vector as a JSON array; defaults to the sidecar's query.
    #[arg(long)]
    pub query: Option<PathBuf>,
    /// Search radius in radians; defaults to cγ from the sidecar.
    #[arg(long, value_parser = commands::parse_angle)]
    pub radius: Option<f64>,
    /// Explicit threshold τ for the sampled engine.
    #[arg(long, conflicts_with = "bank")]
    pub tau: Option<f64>,
    /// Real-valued filter count for the sampled engine (e.g. 1.4555e45).
    #[arg(long, conflicts_with = "bank")]
    pub m: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    #[arg(long, value_enum, default_value = "quadrature")]
    pub p1_source: P1Arg,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long, value_enum, default_value = "auto")]
    pub engine: EngineArg,
    /// Comma-separated dataset sizes for the scan-cost fit.
    #[arg(long, value_delimiter = ',')]
    pub sweep: Vec<usize>,
    /// Include wall-clock timings (makes the output run-dependent).
    #[arg(long)]
    pub timings: bool,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Comma-separated `t:alpha` points, e.g. `2:pi/3,3:pi/4`.
    #[arg(long, default_value = "2:pi/3,2:pi/2,2:2pi/3,3:pi/4,4:pi/6")]
    pub grid: String,
    #[arg(long, default_value_t = 10_000_000)]
    pub trials: u64,
    /// Containment slack in standard errors.
    #[arg(long, default_value_t = 4.0)]
    pub k: f64,
    #[arg(long, default_value = "pi/4", value_parser = commands::parse_angle)]
    pub rho_gamma: f64,
    #[arg(long, default_value_t = 2.0)]
    pub rho_c: f64,
    /// Thresholds at which to estimate ρ; empty to skip.
    #[arg(long, default_value = "2.5,3,3.5")]
    pub rho_t: String,
    #[arg(long, default_value_t = 1_000_000)]
    pub rho_trials: u64,
    /// Replace every bound by an empty interval, to exercise the failure path.
    #[arg(long, hide = true)]
    pub corrupt_bounds: bool,
}

#[derive(Args, Debug)]
pub struct RhoArgs {
    #[arg(long, default_value = "pi/4", value_parser = commands::parse_angle)]
    pub gamma: f64,
    #[arg(long, default_value_t = 2.0)]
    pub c: f64,
    #[arg(long, value_delimiter = ',', default_value = "4,8,16,32,64")]
    pub t: Vec<f64>,
    /// Print CSV instead of JSON.
    #[arg(long)]
    pub csv: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
