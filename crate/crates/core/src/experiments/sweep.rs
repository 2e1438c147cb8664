//! Perturbation-level sweeps: one clean training and one noisy training per
//! level, all from the same initial parameters.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{cost, train, tune_step_size, OptimizerConfig, VQEProblem};
use crate::error::{Error, Result};
use crate::experiments::config::{NoiseKind, Placement, SweepConfig};
use crate::noise::{bit_flip_prob_for_epsilon, CoherentError, ControlErrorSpec, KrausChannel, NoiseModel};
use crate::pauli::{Pauli, PauliString};

/// Distances below this are treated as zero.
pub const DEGENERATE_DISTANCE: f64 = 1e-12;

/// Iterations used by the step-size search.
const STEP_PROBE_ITERS: usize = 50;

pub const CSV_HEADER: [&str; 9] = [
    "problem_id",
    "noise_kind",
    "epsilon",
    "distance_l2",
    "distance_linf",
    "final_cost_noisy",
    "final_cost_clean",
    "iterations",
    "flag",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowFlag {
    Ok,
    /// Distance below [`DEGENERATE_DISTANCE`]; excluded from slope fits.
    Degenerate,
    /// Noisy training hit a non-finite value.
    Diverged,
}

/// One CSV row. `final_cost_clean` is the clean cost at the noisy optimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub problem_id: String,
    pub noise_kind: String,
    pub epsilon: f64,
    pub distance_l2: f64,
    pub distance_linf: f64,
    pub final_cost_noisy: f64,
    pub final_cost_clean: f64,
    pub iterations: usize,
    pub flag: RowFlag,
}

/// Initial parameters uniform in `[-pi, pi)`.
pub fn shared_initial_theta(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
        .collect()
}

/// The problem with its circuit split into single gates when requested.
pub fn with_placement(problem: &VQEProblem, placement: Placement) -> Result<VQEProblem> {
    match placement {
        Placement::PerLayer => Ok(problem.clean()),
        Placement::PerGate => VQEProblem::new(
            problem.observable().clone(),
            problem.input_state().clone(),
            problem.circuit().split_gates(),
        )?
        .with_cost_shift(problem.cost_shift()),
    }
}

/// Noise of the given kind at level `epsilon`, one slot per layer of the
/// problem's circuit.
pub fn noise_model(problem: &VQEProblem, kind: NoiseKind, epsilon: f64) -> Result<NoiseModel> {
    let circuit = problem.circuit();
    let n = circuit.qubits().get();
    let depth = circuit.depth();
    let mut model = NoiseModel::new();
    match kind {
        NoiseKind::CoherentZ => {
            let z = PauliString::single(n, 0, Pauli::Z, 0.5)?.to_operator();
            for j in 0..depth {
                model = model.with_coherent(CoherentError::new(j, z.clone(), epsilon)?);
            }
        }
        NoiseKind::BitFlip | NoiseKind::Depolarizing => {
            let p = bit_flip_prob_for_epsilon(epsilon, depth)?;
            let qubits: Vec<usize> = (0..n).collect();
            for j in 0..depth {
                let ch = if kind == NoiseKind::BitFlip {
                    KrausChannel::bit_flip(n, p, &qubits)?
                } else {
                    KrausChannel::depolarizing(n, p)?
                };
                model = model.with_channel(j, ch)?;
            }
        }
        NoiseKind::Control => {
            model = model.with_control(ControlErrorSpec::uniform(circuit.total_params(), epsilon)?);
        }
    }
    Ok(model)
}

fn distances(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut l2 = 0.0;
    let mut linf = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        let d = (x - y).abs();
        l2 += d * d;
        linf = linf.max(d);
    }
    (l2.sqrt(), linf)
}

/// Optimizer settings after the optional step-size search.
pub fn resolve_optimizer(config: &SweepConfig, clean: &VQEProblem, theta0: &[f64]) -> Result<OptimizerConfig> {
    let mut opt = config.optimizer.clone();
    if config.tune_step {
        opt.step_size = tune_step_size(clean, theta0, opt.step_size, STEP_PROBE_ITERS)?;
    }
    Ok(opt)
}

pub fn run_sweep(config: &SweepConfig) -> Result<Vec<SweepRecord>> {
    config.validate()?;
    let epsilons = config.epsilons.values()?;
    let clean = with_placement(&config.problem.build()?, config.placement)?;
    let theta0 = match &config.init_theta {
        Some(t) => {
            clean.circuit().check_params(t)?;
            t.clone()
        }
        None => shared_initial_theta(clean.num_params(), config.shared_init_seed),
    };
    // Fail early on noise that cannot be attached to this circuit.
    noise_model(&clean, config.noise_kind, epsilons[0])?.validate_for(clean.circuit())?;
    let opt = resolve_optimizer(config, &clean, &theta0)?;
    let reference = train(&clean, &theta0, &opt)?;
    let problem_id = config.problem.id();

    let run = |&eps: &f64| -> Result<SweepRecord> {
        let noisy = clean.clone().with_noise(noise_model(&clean, config.noise_kind, eps)?)?;
        let mut record = SweepRecord {
            problem_id: problem_id.clone(),
            noise_kind: config.noise_kind.as_str().to_string(),
            epsilon: eps,
            distance_l2: f64::NAN,
            distance_linf: f64::NAN,
            final_cost_noisy: f64::NAN,
            final_cost_clean: f64::NAN,
            iterations: 0,
            flag: RowFlag::Diverged,
        };
        match train(&noisy, &theta0, &opt) {
            Ok(trace) => {
                let (l2, linf) = distances(&trace.final_theta, &reference.final_theta);
                record.distance_l2 = l2;
                record.distance_linf = linf;
                record.final_cost_noisy = trace.final_cost;
                record.final_cost_clean = cost(&clean, &trace.final_theta)?;
                record.iterations = trace.iterations_run;
                record.flag = if l2 < DEGENERATE_DISTANCE {
                    RowFlag::Degenerate
                } else {
                    RowFlag::Ok
                };
            }
            Err(Error::Diverged { .. }) => {}
            Err(e) => return Err(e),
        }
        Ok(record)
    };
    if config.parallel {
        epsilons.par_iter().map(run).collect()
    } else {
        epsilons.iter().map(run).collect()
    }
}

pub fn write_csv<W: Write>(records: &[SweepRecord], out: W) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    writer.write_record(CSV_HEADER)?;
    for r in records {
        writer.serialize(r)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<SweepRecord>> {
    let mut reader = csv::Reader::from_reader(input);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(Error::Config(format!("unexpected CSV header {header:?}")));
    }
    reader.deserialize().map(|r| r.map_err(Error::from)).collect()
}
