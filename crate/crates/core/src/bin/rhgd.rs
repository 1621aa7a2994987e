use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rhgd::experiment::check::{check_grad, Corruption};
use rhgd::experiment::config::{ExperimentConfig, SweepSpec};
use rhgd::experiment::ot_demo::{ot_demo, write_ot_outputs};
use rhgd::experiment::run::run_experiment;
use rhgd::experiment::sweep::{run_sweep, SUMMARY_FILE};
use rhgd::Error;

/// Bilevel optimization on Riemannian manifolds.
#[derive(Debug, Parser)]
#[command(name = "rhgd", version)]
struct Cli {
    /// Directory for traces and reports (overrides the config).
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweeps.
    #[arg(long, global = true, default_value_t = 1)]
    parallelism: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one experiment and write its trace.
    Run { config: PathBuf },
    /// Run a grid of estimator settings and write a summary.
    Sweep { spec: PathBuf },
    /// Compare analytic derivatives with finite differences.
    CheckGrad {
        config: PathBuf,
        /// Scale one analytic gradient by 1.1 (fault-injection fixture).
        #[arg(long, hide = true)]
        corrupt: Option<String>,
    },
    /// Learn a transport plan and metric between two synthetic domains.
    OtDemo { config: PathBuf },
}

enum Failure {
    Error(Error),
    ChecksFailed,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

fn resolve(cli: &Cli, cfg: &mut ExperimentConfig) -> PathBuf {
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cli.output_dir
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn load(path: &Path) -> Result<ExperimentConfig, Error> {
    ExperimentConfig::load(path)
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Run { config } => {
            let mut cfg = load(config)?;
            let out = resolve(cli, &mut cfg);
            let result = run_experiment(&cfg, &out)?;
            for (path, trace) in &result.traces {
                if let Some(last) = trace.records.last() {
                    println!(
                        "{}: K={} final upper objective {:.6e}, hypergradient norm {:.3e}",
                        path.display(),
                        trace.len(),
                        last.upper_obj,
                        last.hypergrad_norm
                    );
                }
            }
        }
        Command::Sweep { spec } => {
            let mut spec = SweepSpec::load(spec)?;
            let out = resolve(cli, &mut spec.base);
            let rows = run_sweep(&spec, &out, cli.parallelism)?;
            let failed = rows.iter().filter(|r| r.error.is_some()).count();
            println!(
                "{} cells ({} failed), summary in {}",
                rows.len(),
                failed,
                out.join(SUMMARY_FILE).display()
            );
        }
        Command::CheckGrad { config, corrupt } => {
            let mut cfg = load(config)?;
            let out = resolve(cli, &mut cfg);
            let corrupt = corrupt.as_deref().map(str::parse::<Corruption>).transpose()?;
            let report = check_grad(&cfg, corrupt)?;
            std::fs::create_dir_all(&out).map_err(Error::from)?;
            std::fs::write(out.join("grad_check.csv"), report.to_string()).map_err(Error::from)?;
            print!("{report}");
            if !report.all_passed() {
                return Err(Failure::ChecksFailed);
            }
        }
        Command::OtDemo { config } => {
            let mut cfg = load(config)?;
            let out = resolve(cli, &mut cfg);
            let report = ot_demo(&cfg)?;
            write_ot_outputs(&report, &out)?;
            println!(
                "marginal residual {:.3e}, metric relative error {:.3e}, 1-NN label accuracy {:.1}%",
                report.marginal_residual,
                report.metric_rel_err,
                100.0 * report.label_accuracy
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::ChecksFailed) => ExitCode::from(1),
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            if e.is_numeric() {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
