use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use vqe_robust::ansatz::{local_surjectivity_rank, su_dimension};
use vqe_robust::engine::train;
use vqe_robust::experiments::config::load_json;
use vqe_robust::experiments::sweep::{noise_model, shared_initial_theta, with_placement};
use vqe_robust::experiments::{
    fit_loglog_slope, run_sweep, verify_all, write_csv, SurjectivityConfig, SweepConfig, TrainConfig, VerifyOptions,
};
use vqe_robust::Error;

const EXIT_VALIDATION: u8 = 1;
const EXIT_VERIFY: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

#[derive(Parser)]
#[command(name = "vqe-robust", version, about = "Noisy VQE training, noise-equivalence checks and robustness sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one problem and write its trace as JSON lines.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a perturbation-level sweep and write the CSV.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the invariant suites; exit code 2 on any failure.
    Verify {
        /// Write the report as JSON to this path.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Include a channel whose weights sum to 0.9.
        #[arg(long)]
        corrupt_channel: bool,
    },
    /// Local-surjectivity rank at random parameters.
    Surjectivity {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn open_out(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn resolve_out(cli: Option<PathBuf>, config: &Option<String>) -> Option<PathBuf> {
    cli.or_else(|| config.as_ref().map(PathBuf::from))
}

fn cmd_train(config: &Path, out: Option<PathBuf>, seed: Option<u64>) -> Result<(), Error> {
    let mut cfg: TrainConfig = load_json(config)?;
    if let Some(s) = seed {
        cfg.override_seed(s);
    }
    let mut problem = cfg.problem.build()?;
    if let Some(spec) = &cfg.noise {
        problem = with_placement(&problem, spec.placement)?;
        let model = noise_model(&problem, spec.kind, spec.epsilon)?;
        problem = problem.with_noise(model)?;
    }
    let theta0 = match &cfg.init_theta {
        Some(t) => t.clone(),
        None => shared_initial_theta(problem.num_params(), cfg.init_seed),
    };
    let trace = train(&problem, &theta0, &cfg.optimizer)?;
    let path = resolve_out(out, &cfg.output_path);
    trace.write_jsonl(open_out(path.as_deref())?, cfg.snapshot_every)?;
    eprintln!(
        "final cost {:.6e} after {} iterations ({:?})",
        trace.final_cost, trace.iterations_run, trace.stop_reason
    );
    Ok(())
}

fn cmd_sweep(config: &Path, out: Option<PathBuf>, seed: Option<u64>) -> Result<(), Error> {
    let mut cfg: SweepConfig = load_json(config)?;
    if let Some(s) = seed {
        cfg.override_seed(s);
    }
    let records = run_sweep(&cfg)?;
    let path = resolve_out(out, &cfg.output_path);
    let mut sink = open_out(path.as_deref())?;
    write_csv(&records, &mut sink)?;
    sink.flush()?;
    match fit_loglog_slope(&records) {
        Ok(fit) => eprintln!(
            "slope {:.4} intercept {:.4} r^2 {:.4} ({} points, {} excluded)",
            fit.slope, fit.intercept, fit.r_squared, fit.n_points, fit.excluded
        ),
        Err(e) => eprintln!("no slope fit: {e}"),
    }
    Ok(())
}

#[derive(Serialize)]
struct RankReport {
    dim: usize,
    target_rank: usize,
    ranks: Vec<usize>,
    locally_surjective: bool,
}

fn cmd_surjectivity(config: &Path, out: Option<PathBuf>, seed: Option<u64>) -> Result<(), Error> {
    let mut cfg: SurjectivityConfig = load_json(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let circuit = cfg.circuit.build()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let ranks = (0..cfg.samples)
        .map(|_| {
            let theta: Vec<f64> = (0..circuit.total_params())
                .map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
                .collect();
            local_surjectivity_rank(&circuit, &theta)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let target = su_dimension(circuit.dim());
    let report = RankReport {
        dim: circuit.dim(),
        target_rank: target,
        locally_surjective: !ranks.is_empty() && ranks.iter().all(|&r| r == target),
        ranks,
    };
    let path = resolve_out(out, &cfg.output_path);
    let mut sink = open_out(path.as_deref())?;
    serde_json::to_writer_pretty(&mut sink, &report)?;
    writeln!(sink)?;
    Ok(())
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        Error::Diverged { .. } => ExitCode::from(EXIT_DIVERGED),
        _ => ExitCode::from(EXIT_VALIDATION),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Train { config, out, seed } => cmd_train(&config, out, seed),
        Command::Sweep { config, out, seed } => cmd_sweep(&config, out, seed).map_err(|e| match e {
            // divergence outside `train` is a plain failure
            Error::Diverged { what, iteration } => {
                Error::InvalidArgument(format!("clean training diverged: non-finite {what} at iteration {iteration}"))
            }
            other => other,
        }),
        Command::Surjectivity { config, out, seed } => cmd_surjectivity(&config, out, seed),
        Command::Verify { out, corrupt_channel } => {
            let report = verify_all(&VerifyOptions { corrupt_channel });
            // a closed pipe is not a verification failure
            let _ = write!(io::stdout().lock(), "{report}");
            if let Some(path) = out {
                let written = File::create(&path)
                    .map_err(Error::from)
                    .and_then(|f| serde_json::to_writer_pretty(f, &report).map_err(Error::from));
                if let Err(e) = written {
                    return fail(&e);
                }
            }
            return if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_VERIFY)
            };
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}
