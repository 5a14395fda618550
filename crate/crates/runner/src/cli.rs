//! Command-line interface of the `loadsel` binary.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use crate::{load_pool, parse_pool_arg, parse_seeds, run_matrix, ExperimentSpec, OracleSource, PoolSource};
use loadsel_core::io;
use loadsel_core::pool::synthetic_cases;
use loadsel_core::{Error, LabeledTable, Pool, QueryStrategy, SyntheticOracle, Target};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INPUT: u8 = 1;
pub const EXIT_RUN: u8 = 2;

#[derive(Parser)]
#[command(name = "loadsel", version, about = "Choose which loading cases to simulate next")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (configuration, strategy, seed) combination and write CSV results.
    Run(RunArgs),
    /// Encode raw current and wave CSVs into a feature CSV.
    Encode(EncodeArgs),
    /// Write a synthetic pool, optionally with labeled tables from the synthetic oracle.
    GeneratePool(GenerateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleKind {
    Table,
    Synthetic,
}

#[derive(Args)]
struct RunArgs {
    /// Feature CSV, or `synthetic:SIZE:SEED`. Alternatively give --currents and --waves.
    #[arg(long, conflicts_with_all = ["currents", "waves"])]
    pool: Option<String>,
    /// Long-format current CSV or a directory of per-case current files.
    #[arg(long, requires = "waves")]
    currents: Option<PathBuf>,
    #[arg(long, requires = "currents")]
    waves: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "synthetic")]
    oracle: OracleKind,
    /// Synthetic configuration seeds (`0..6` or `0,3,5`), or labeled-table CSVs for --oracle table.
    #[arg(long, default_value = "0..6")]
    configs: Vec<String>,
    /// `single:<target>`, `joint` or `random`; repeatable.
    #[arg(long = "strategy", default_value = "joint")]
    strategies: Vec<QueryStrategy>,
    /// Seeds as `a..b` or a comma-separated list.
    #[arg(long, default_value = "0..33")]
    seeds: String,
    /// Targets reported in the output CSVs; repeatable. Defaults to all six.
    #[arg(long = "targets", value_parser = parse_target)]
    targets: Vec<Target>,
    #[arg(long, default_value_t = 25)]
    n0: usize,
    #[arg(long, default_value_t = 325)]
    budget: usize,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long)]
    currents: PathBuf,
    #[arg(long)]
    waves: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 526)]
    size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write `config-<seed>.csv` labeled tables for these synthetic configurations.
    #[arg(long)]
    labels: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

fn parse_target(s: &str) -> Result<Target, String> {
    Target::from_name(s).ok_or_else(|| format!("unknown target {s:?}"))
}

fn run(args: RunArgs) -> Result<u8, Error> {
    let pool = match (args.pool, args.currents, args.waves) {
        (Some(p), _, _) => parse_pool_arg(&p)?,
        (None, Some(currents), Some(waves)) => PoolSource::Raw { currents, waves },
        _ => return Err(Error::Input("give --pool or both --currents and --waves".into())),
    };
    let oracle = match args.oracle {
        OracleKind::Synthetic => {
            let mut seeds = Vec::new();
            for c in &args.configs {
                seeds.extend(parse_seeds(c)?);
            }
            OracleSource::Synthetic(seeds)
        }
        OracleKind::Table => OracleSource::Tables(args.configs.iter().map(PathBuf::from).collect()),
    };
    let mut spec = ExperimentSpec::new(pool, oracle, args.out);
    spec.strategies = args.strategies;
    spec.seeds = parse_seeds(&args.seeds)?;
    if !args.targets.is_empty() {
        spec.targets = args.targets;
    }
    spec.n0 = args.n0;
    spec.budget = args.budget;
    spec.jobs = args.jobs;

    let report = run_matrix(&spec)?;
    let failed = report.failures();
    eprintln!(
        "{} runs, {} failed; results in {}",
        report.runs.len(),
        failed,
        spec.out.display()
    );
    Ok(if failed == 0 {
        EXIT_OK
    } else {
        EXIT_RUN
    })
}

fn encode(args: EncodeArgs) -> Result<u8, Error> {
    let (_, pool) = load_pool(&PoolSource::Raw {
        currents: args.currents,
        waves: args.waves,
    })?;
    io::write_features(&args.out, &pool)?;
    Ok(EXIT_OK)
}

fn generate(args: GenerateArgs) -> Result<u8, Error> {
    let cases = synthetic_cases(args.size, args.seed);
    let pool = Pool::from_cases(&cases, &loadsel_core::encode::REFERENCE_DEPTHS)?;
    io::write_cases(&args.out.join("currents.csv"), &args.out.join("waves.csv"), &cases)?;
    io::write_features(&args.out.join("features.csv"), &pool)?;
    if let Some(labels) = args.labels {
        for config in parse_seeds(&labels)? {
            let oracle = SyntheticOracle::new(config);
            let mut table = LabeledTable::new(format!("config-{config}"));
            for (pos, &id) in pool.ids().iter().enumerate() {
                table.insert(id, oracle.evaluate(pool.row(pos))?)?;
            }
            io::write_labeled_table(&args.out.join(format!("config-{config}.csv")), &table)?;
        }
    }
    Ok(EXIT_OK)
}

/// Parse `args` (program name first) and execute; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // help and version requests are not errors
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Encode(a) => encode(a),
        Command::GeneratePool(a) => generate(a),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        if e.is_input_error() {
            EXIT_INPUT
        } else {
            EXIT_RUN
        }
    })
}
