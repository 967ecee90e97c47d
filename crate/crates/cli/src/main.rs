//! `permsbl`: generate problem instances, solve them, and run seeded sweeps.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration error,
//! 3 numerical failure (including a sweep over its failure budget).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use permsbl::harness::{self, Algorithm, SolverSettings, SweepSpec};
use permsbl::io::{matrix_to_rows, parse_config};
use permsbl::pmsbl::{DEFAULT_MAX_ITER, DEFAULT_TOL};
use permsbl::{gen_problem, Error, ProblemInstance};
use serde_json::json;

const SEED_VAR: &str = "PERMSBL_SEED";

#[derive(Parser)]
#[command(name = "permsbl", version, about = "Sparse recovery with unknown row permutations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a problem instance from a config and write it as JSON.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one algorithm on an instance and write estimates and scores.
    Solve {
        #[arg(long = "in")]
        input: PathBuf,
        /// pmsbl-shared, pmsbl-indep, pksbl or somp.
        #[arg(long)]
        alg: Algorithm,
        /// Assume one permutation for all columns (pksbl, somp).
        #[arg(long)]
        shared_perm: bool,
        /// AR coefficient for pksbl; defaults to the instance's.
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
        max_iter: usize,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        /// Use anchors for initialization only.
        #[arg(long)]
        free_anchors: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a sweep spec and write the aggregated CSV.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; defaults to the available parallelism.
        #[arg(long)]
        workers: Option<usize>,
        /// Override the trial count of the spec.
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Turn a sweep CSV into one columnar text file per curve.
    Plotdata {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => 1,
        Error::Numerical(_) | Error::DegenerateSignal(_) | Error::FailureBudget { .. } => 3,
        _ => 2,
    }
}

fn seed_override() -> Result<Option<u64>, Error> {
    match std::env::var(SEED_VAR) {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("{SEED_VAR}={s:?} is not an unsigned integer"))),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(Error::Config(format!("{SEED_VAR}: {e}"))),
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Generate { config, out } => {
            let mut config = parse_config(&std::fs::read_to_string(config)?)?;
            if let Some(seed) = seed_override()? {
                config.seed = seed;
            }
            gen_problem(&config)?.save(&out)
        }
        Command::Solve { input, alg, shared_perm, rho, max_iter, tol, free_anchors, out } => {
            let inst = ProblemInstance::load(&input)?;
            let shared = match alg {
                Algorithm::PmsblShared => true,
                Algorithm::PmsblIndep if shared_perm => {
                    return Err(Error::Config("--shared-perm contradicts pmsbl-indep".into()));
                }
                Algorithm::PmsblIndep => false,
                Algorithm::Pksbl | Algorithm::Somp => shared_perm || inst.config.shared_perm,
            };
            let rho = rho.unwrap_or(inst.config.rho);
            let settings = SolverSettings { max_iter, tol, anchors_enforced: !free_anchors };
            let sol = harness::solve(&inst, alg, shared, rho, &settings)?;
            let (nmse, perm_exact, row_accuracy) = harness::score(&inst, &sol.x_hat, &sol.perms)?;
            let doc = json!({
                "algorithm": alg,
                "shared_perm": shared,
                "rho": rho,
                "x_hat": matrix_to_rows(&sol.x_hat),
                "perms": sol.perms,
                "iters": sol.iters,
                "log_evidence_trace": sol.log_evidence_trace,
                "nmse_db": 10.0 * nmse.log10(),
                "perm_exact": perm_exact,
                "row_accuracy": row_accuracy,
            });
            std::fs::write(out, serde_json::to_string_pretty(&doc)?)?;
            Ok(())
        }
        Command::Sweep { spec, out, workers, trials } => {
            let mut spec = SweepSpec::from_json(&std::fs::read_to_string(spec)?)?;
            if let Some(seed) = seed_override()? {
                spec.master_seed = seed;
            }
            if let Some(t) = trials {
                spec.trials = t;
            }
            let workers = workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            if workers == 0 {
                return Err(Error::Config("--workers must be at least 1".into()));
            }
            let rows = harness::run_sweep(&spec, workers)?;
            harness::write_csv(&rows, &out)
        }
        Command::Plotdata { input, out } => {
            let rows = harness::parse_csv(&std::fs::read_to_string(input)?)?;
            for path in harness::emit_plot_data(&rows, &out)? {
                println!("{}", path.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
