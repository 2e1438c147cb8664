//! Cost, analytic gradient and fixed-step gradient descent.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::ansatz::Circuit;
use crate::error::{Error, Result};
use crate::noise::{LoweredCircuit, NoiseModel};
use crate::operators::{ground_energy, trace_product, CMatrix, DensityMatrix, HermitianOperator};

/// `min_theta Tr[O E_theta(rho0)] - cost_shift`.
#[derive(Debug, Clone)]
pub struct VQEProblem {
    observable: HermitianOperator,
    input_state: DensityMatrix,
    circuit: Circuit,
    noise: Option<NoiseModel>,
    lowered: LoweredCircuit,
    cost_shift: f64,
}

impl VQEProblem {
    /// Noise-free problem with `cost_shift = lambda_min(O)`.
    pub fn new(observable: HermitianOperator, input_state: DensityMatrix, circuit: Circuit) -> Result<Self> {
        let dim = circuit.dim();
        for found in [observable.dim(), input_state.dim()] {
            if found != dim {
                return Err(Error::DimensionMismatch { expected: dim, found });
            }
        }
        let cost_shift = ground_energy(&observable);
        let lowered = NoiseModel::new().lower(&circuit)?;
        Ok(Self {
            observable,
            input_state,
            circuit,
            noise: None,
            lowered,
            cost_shift,
        })
    }

    /// Same problem under `noise`; the cost shift is kept.
    pub fn with_noise(mut self, noise: NoiseModel) -> Result<Self> {
        self.lowered = noise.lower(&self.circuit)?;
        self.noise = Some(noise);
        Ok(self)
    }

    pub fn with_cost_shift(mut self, shift: f64) -> Result<Self> {
        if !shift.is_finite() {
            return Err(Error::InvalidArgument(format!("cost shift {shift} is not finite")));
        }
        self.cost_shift = shift;
        Ok(self)
    }

    /// The noise-free problem with the same observable, state and shift.
    pub fn clean(&self) -> Self {
        let mut out = self.clone();
        out.noise = None;
        out.lowered = NoiseModel::new().lower(&self.circuit).expect("empty noise always lowers");
        out
    }

    pub fn observable(&self) -> &HermitianOperator {
        &self.observable
    }

    pub fn input_state(&self) -> &DensityMatrix {
        &self.input_state
    }

    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }

    pub fn noise(&self) -> Option<&NoiseModel> {
        self.noise.as_ref()
    }

    pub fn cost_shift(&self) -> f64 {
        self.cost_shift
    }

    pub fn num_params(&self) -> usize {
        self.circuit.total_params()
    }
}

pub fn cost(problem: &VQEProblem, theta: &[f64]) -> Result<f64> {
    problem.circuit.check_params(theta)?;
    let theta_eff = problem.lowered.effective_params(theta)?;
    let (_, _, out) = problem.lowered.forward(&theta_eff, problem.input_state.matrix());
    Ok(trace_product(problem.observable.matrix(), &out).re - problem.cost_shift)
}

/// Exact gradient by back-propagating the observable through the noisy
/// circuit in the Heisenberg picture.
///
/// With `Q` the observable seen right after layer `j` (adjoint channels and
/// later layers already applied) and `rho_j` the state entering layer `j`,
/// `d cost / d theta_{j,k} = 2 Re Tr[rho_j U_j^dagger Q dU_j/d theta_{j,k}]`.
pub fn gradient(problem: &VQEProblem, theta: &[f64]) -> Result<Vec<f64>> {
    cost_and_gradient(problem, theta).map(|(_, g)| g)
}

/// [`cost`] and [`gradient`] from a single forward pass.
pub fn cost_and_gradient(problem: &VQEProblem, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
    problem.circuit.check_params(theta)?;
    let lowered = &problem.lowered;
    let theta_eff = lowered.effective_params(theta)?;
    let (units, inputs, out) = lowered.forward(&theta_eff, problem.input_state.matrix());
    let value = trace_product(problem.observable.matrix(), &out).re - problem.cost_shift;
    let circuit = &lowered.circuit;
    let mut grad = vec![0.0; theta.len()];
    let mut q: CMatrix = problem.observable.matrix().clone();
    for j in (0..circuit.depth()).rev() {
        if let Some(ch) = &lowered.channels[j] {
            q = ch.apply_adjoint(&q);
        }
        let range = circuit.param_range(j);
        let u_dag = units[j].adjoint();
        if !range.is_empty() {
            let x = &inputs[j] * &u_dag * &q;
            let local = circuit.layers()[j].pair_derivatives(&theta_eff[range.clone()], &x);
            grad[range].copy_from_slice(&local);
        }
        if j > 0 {
            q = &u_dag * q * &units[j];
        }
    }
    if let Some(spec) = &lowered.control {
        for (g, eta) in grad.iter_mut().zip(spec.relative_errors()) {
            *g *= 1.0 + eta;
        }
    }
    Ok((value, grad))
}

/// Central finite differences of [`cost`].
pub fn fd_gradient(problem: &VQEProblem, theta: &[f64], step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!("finite-difference step {step} must be > 0")));
    }
    problem.circuit.check_params(theta)?;
    let mut probe = theta.to_vec();
    let mut out = Vec::with_capacity(theta.len());
    for k in 0..theta.len() {
        probe[k] = theta[k] + step;
        let plus = cost(problem, &probe)?;
        probe[k] = theta[k] - step;
        let minus = cost(problem, &probe)?;
        probe[k] = theta[k];
        out.push((plus - minus) / (2.0 * step));
    }
    Ok(out)
}

fn default_max_iters() -> usize {
    1000
}

fn default_grad_tol() -> f64 {
    1e-9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub step_size: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_grad_tol")]
    pub grad_tol: f64,
    /// Plain gradient descent draws no random numbers; the seed is carried so
    /// that harnesses drawing `theta0` stay reproducible.
    #[serde(default)]
    pub seed: u64,
}

impl OptimizerConfig {
    pub fn new(step_size: f64) -> Self {
        Self {
            step_size,
            max_iters: default_max_iters(),
            grad_tol: default_grad_tol(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0) || !self.step_size.is_finite() {
            return Err(Error::InvalidArgument(format!("step size {} must be > 0", self.step_size)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be positive".into()));
        }
        if !(self.grad_tol >= 0.0) {
            return Err(Error::InvalidArgument(format!("grad_tol {} must be >= 0", self.grad_tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxIters,
    GradTol,
}

/// `thetas[i]` and `costs[i]` are the iterate after `i` updates; index 0 is
/// the initial point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingTrace {
    pub thetas: Vec<Vec<f64>>,
    pub costs: Vec<f64>,
    pub final_theta: Vec<f64>,
    pub final_cost: f64,
    pub iterations_run: usize,
    pub stop_reason: StopReason,
}

#[derive(Serialize)]
struct TraceLine<'a> {
    iteration: usize,
    cost: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    theta: Option<&'a [f64]>,
}

impl TrainingTrace {
    /// One JSON object per line: `iteration`, `cost`, and `theta` on every
    /// `snapshot_every`-th line (never when 0). The last line always
    /// carries `theta`.
    pub fn write_jsonl<W: Write>(&self, mut out: W, snapshot_every: usize) -> Result<()> {
        let last = self.costs.len().saturating_sub(1);
        for (i, (c, t)) in self.costs.iter().zip(&self.thetas).enumerate() {
            let snap = i == last || (snapshot_every > 0 && i % snapshot_every == 0);
            let line = TraceLine {
                iteration: i,
                cost: *c,
                theta: snap.then_some(t.as_slice()),
            };
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

fn check_finite(values: &[f64], what: &'static str, iteration: usize) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Diverged { what, iteration })
    }
}

/// Fixed-step gradient descent `theta <- theta - s grad`.
pub fn train(problem: &VQEProblem, theta0: &[f64], config: &OptimizerConfig) -> Result<TrainingTrace> {
    config.validate()?;
    problem.circuit.check_params(theta0)?;
    let mut theta = theta0.to_vec();
    let (mut c, mut g) = cost_and_gradient(problem, &theta)?;
    check_finite(&[c], "cost", 0)?;
    let mut thetas = vec![theta.clone()];
    let mut costs = vec![c];
    let mut stop_reason = StopReason::MaxIters;
    let mut iterations = 0;
    while iterations < config.max_iters {
        check_finite(&g, "gradient", iterations)?;
        let g_max = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if g_max < config.grad_tol {
            stop_reason = StopReason::GradTol;
            break;
        }
        for (t, gk) in theta.iter_mut().zip(&g) {
            *t -= config.step_size * gk;
        }
        iterations += 1;
        check_finite(&theta, "parameter", iterations)?;
        (c, g) = cost_and_gradient(problem, &theta)?;
        check_finite(&[c], "cost", iterations)?;
        thetas.push(theta.clone());
        costs.push(c);
    }
    Ok(TrainingTrace {
        final_theta: theta,
        final_cost: c,
        thetas,
        costs,
        iterations_run: iterations,
        stop_reason,
    })
}

/// Largest step `initial / 2^k` for which `probe_iters` descent steps from
/// `theta0` give a non-increasing cost sequence.
pub fn tune_step_size(problem: &VQEProblem, theta0: &[f64], initial: f64, probe_iters: usize) -> Result<f64> {
    const MAX_HALVINGS: usize = 40;
    let mut step = initial;
    for _ in 0..MAX_HALVINGS {
        let config = OptimizerConfig {
            step_size: step,
            max_iters: probe_iters.max(1),
            grad_tol: 0.0,
            seed: 0,
        };
        match train(problem, theta0, &config) {
            Ok(trace) if trace.costs.windows(2).all(|w| w[1] <= w[0] + 1e-12) => return Ok(step),
            Ok(_) | Err(Error::Diverged { .. }) => step *= 0.5,
            Err(e) => return Err(e),
        }
    }
    Err(Error::InvalidArgument(format!(
        "no monotone step size found from {initial} after {MAX_HALVINGS} halvings"
    )))
}
