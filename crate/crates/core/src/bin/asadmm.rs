use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use asadmm::bench::{build_problem, compute_reference, run_benchmark, run_solver};
use asadmm::io::config::load_config;
use asadmm::io::{write_libsvm, write_metrics_csv};
use asadmm::models::synthetic_instance;
use asadmm::problem::SaddleReference;

#[derive(Parser)]
#[command(
    name = "asadmm",
    about = "Accelerated stochastic ADMM solver and benchmark harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured solver once and write its trace CSV.
    Solve {
        /// TOML run configuration; missing sections take defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// RNG seed (overrides the first entry of run.seeds).
        #[arg(long)]
        seed: Option<u64>,
        /// Trace output path (default: <output_dir>/trace_<solver>_<seed>.csv).
        #[arg(long)]
        output: Option<PathBuf>,
        /// Reference solution JSON; computed on the fly when absent.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Run every configured (solver, seed) pair and write traces,
    /// aggregates, and plot data.
    Benchmark {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override run.output_dir.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Compute a high-accuracy reference solution and store it as JSON.
    Reference {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Outer-iteration budget (overrides run.reference_budget).
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Generate a synthetic dataset and write it in LIBSVM format.
    GenData {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 500)]
        samples: usize,
        #[arg(long, default_value_t = 50)]
        features: usize,
        #[arg(long, default_value_t = 0.1)]
        sparsity: f64,
        #[arg(long)]
        output: PathBuf,
    },
}

fn load(config: &Option<PathBuf>) -> asadmm::Result<asadmm::io::RunConfig> {
    match config {
        Some(path) => load_config(path),
        None => Ok(asadmm::io::RunConfig::default()),
    }
}

fn run() -> asadmm::Result<bool> {
    let cli = Cli::parse();
    match cli.command {
        Command::Solve {
            config,
            seed,
            output,
            reference,
        } => {
            let cfg = load(&config)?;
            let problem = build_problem(&cfg)?;
            let reference: SaddleReference = match reference {
                Some(path) => {
                    let text = std::fs::read_to_string(path)?;
                    serde_json::from_str(&text).map_err(|e| {
                        asadmm::Error::invalid_config("reference", format!("bad JSON: {e}"))
                    })?
                }
                None => compute_reference(&problem, cfg.run.reference_budget)?,
            };
            reference.validate(&problem, cfg.solver.feas_tol.max(1e-6))?;
            let seed = seed.unwrap_or(cfg.run.seeds[0]);
            let result = run_solver(cfg.solver.kind, &cfg, &problem, seed, Some(&reference))?;
            let path = output.unwrap_or_else(|| {
                cfg.run
                    .output_dir
                    .join(format!("trace_{}_{}.csv", cfg.solver.kind.label(), seed))
            });
            if let Some(dir) = path.parent() {
                std::fs::create_dir_all(dir)?;
            }
            write_metrics_csv(&result.trace, &path)?;
            let last = result.trace.iter().rev().find(|r| r.ergodic_flag);
            let raw = result.trace.iter().rev().find(|r| !r.ergodic_flag);
            println!(
                "solver={} seed={} outer={} grad_components={} converged={}",
                cfg.solver.kind.label(),
                seed,
                result.state.k,
                result.diagnostics.grad_components,
                result.converged
            );
            if let Some(r) = raw {
                println!(
                    "final raw:     obj_err={:.6e} equ_err={:.6e} opt_err={:.6e}",
                    r.obj_err, r.equ_err, r.opt_err
                );
            }
            if let Some(r) = last {
                println!(
                    "final ergodic: obj_err={:.6e} equ_err={:.6e} opt_err={:.6e}",
                    r.obj_err, r.equ_err, r.opt_err
                );
            }
            println!("trace: {}", path.display());
            Ok(true)
        }
        Command::Benchmark { config, output_dir } => {
            let mut cfg = load(&config)?;
            if let Some(dir) = output_dir {
                cfg.run.output_dir = dir;
            }
            let outcome = run_benchmark(&cfg)?;
            for f in &outcome.trace_files {
                println!("trace: {}", f.display());
            }
            for f in &outcome.aggregate_files {
                println!("aggregate: {}", f.display());
            }
            for f in &outcome.plot_files {
                println!("plot: {}", f.display());
            }
            for (ctx, err) in &outcome.failures {
                eprintln!("FAILED {ctx}: {err}");
            }
            Ok(outcome.all_succeeded())
        }
        Command::Reference {
            config,
            budget,
            output,
        } => {
            let cfg = load(&config)?;
            let problem = build_problem(&cfg)?;
            let budget = budget.unwrap_or(cfg.run.reference_budget);
            let reference = compute_reference(&problem, budget)?;
            let json = serde_json::to_string_pretty(&reference).map_err(|e| {
                asadmm::Error::invalid_config("reference", format!("serialization failed: {e}"))
            })?;
            if let Some(dir) = output.parent() {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(&output, json)?;
            println!("f_star={:.12e} -> {}", reference.f_star, output.display());
            Ok(true)
        }
        Command::GenData {
            seed,
            samples,
            features,
            sparsity,
            output,
        } => {
            let inst = synthetic_instance(seed, samples, features, sparsity)?;
            if let Some(dir) = output.parent() {
                std::fs::create_dir_all(dir)?;
            }
            write_libsvm(&inst.dataset, &output)?;
            println!(
                "wrote {} samples x {} features -> {}",
                samples,
                features,
                output.display()
            );
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
