use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pfbench::harness::report::{rank_tables, report, ReportKind};
use pfbench::harness::{
    load_artifacts, run_attributions, run_benchmark, run_characterization, ExperimentConfig, Precision, SetupArtifact,
    SetupFailure,
};
use pfbench::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

#[derive(Parser)]
#[command(name = "pfbench", version, about = "Pixel-flipping benchmarks for superpixel attributions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the worker count.
    #[arg(long)]
    workers: Option<usize>,
    /// Persistent occlusion cache directory.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// R-OMS / NR-OMS at several occlusion fractions per setup.
    Characterize(Common),
    /// Attributions of every method, setup and image.
    Attribute(Common),
    /// Full grid: baseline, attributions, PF curves and measures.
    Benchmark {
        #[command(flatten)]
        common: Common,
        /// Keep setups already finished under the output directory.
        #[arg(long)]
        resume: bool,
    },
    /// Method rankings per setup and distinct-ranking counts.
    Rank(Common),
    /// Report tables from finished setups.
    Report {
        #[command(flatten)]
        common: Common,
        /// rankings, consistency, boxplot, matching-imputer or all.
        #[arg(long, default_value = "all")]
        kind: String,
        /// Target directory; `<output_dir>/reports` by default.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(common: &Common) -> Result<ExperimentConfig, Error> {
    let mut config = ExperimentConfig::load(&common.config).map_err(|e| match e {
        Error::Config(_) => e,
        other => Error::Config(format!("{}: {other}", common.config.display())),
    })?;
    if let Some(seed) = common.seed {
        config.master_seed = seed;
    }
    if let Some(w) = common.workers {
        config.workers = w;
    }
    if let Some(dir) = &common.cache_dir {
        config.cache_dir = Some(dir.clone());
    }
    config.validate()?;
    Ok(config)
}

fn finished(output_dir: &Path) -> Result<Vec<pfbench::measures::SetupResult<f64>>, Error> {
    let artifacts: Vec<SetupArtifact<f64>> = load_artifacts(output_dir)?;
    Ok(artifacts.into_iter().map(|a| a.result).collect())
}

fn summarize(failures: &[SetupFailure]) -> ExitCode {
    if failures.is_empty() {
        return ExitCode::SUCCESS;
    }
    for f in failures {
        eprintln!("setup {} failed: {}", f.setup_id, f.reason);
    }
    ExitCode::from(EXIT_PARTIAL)
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Characterize(common) => {
            let config = load(&common)?;
            let (rows, failures) = match config.precision {
                Precision::F32 => run_characterization::<f32>(&config)?,
                Precision::F64 => run_characterization::<f64>(&config)?,
            };
            println!("{} rows written to {}", rows.len(), config.output_dir.join("characterize.csv").display());
            Ok(summarize(&failures))
        }
        Command::Attribute(common) => {
            let config = load(&common)?;
            let (records, failures) = match config.precision {
                Precision::F32 => run_attributions::<f32>(&config)?,
                Precision::F64 => run_attributions::<f64>(&config)?,
            };
            println!("{} attributions written to {}", records.len(), config.output_dir.display());
            Ok(summarize(&failures))
        }
        Command::Benchmark { common, resume } => {
            let config = load(&common)?;
            let failures = match config.precision {
                Precision::F32 => run_benchmark::<f32>(&config, resume)?.failures,
                Precision::F64 => run_benchmark::<f64>(&config, resume)?.failures,
            };
            println!(
                "{} of {} setups finished, results in {}",
                config.grid_len() - failures.len(),
                config.grid_len(),
                config.output_dir.display()
            );
            Ok(summarize(&failures))
        }
        Command::Rank(common) => {
            let config = load(&common)?;
            for p in rank_tables(&finished(&config.output_dir)?, &config.output_dir)? {
                println!("{}", p.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { common, kind, out } => {
            let config = load(&common)?;
            let kinds = if kind == "all" {
                ReportKind::ALL.to_vec()
            } else {
                vec![kind.parse()?]
            };
            let results = finished(&config.output_dir)?;
            let dir = out.unwrap_or_else(|| config.output_dir.join("reports"));
            let mut partial = false;
            for k in kinds {
                match report(&results, k, &dir, config.master_seed) {
                    Ok(paths) => paths.iter().for_each(|p| println!("{}", p.display())),
                    Err(e) if kind == "all" => {
                        eprintln!("{} report skipped: {e}", k.name());
                        partial = true;
                    }
                    Err(e) => return Err(e),
                }
            }
            Ok(if partial { ExitCode::from(EXIT_PARTIAL) } else { ExitCode::SUCCESS })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e @ (Error::Config(_) | Error::InvalidArgument(_))) => {
            eprintln!("configuration error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
