//! Coherent errors, coherent control errors and Kraus channels, plus exact
//! noisy propagation of a circuit.
//!
//! Every noisy layer `j` is applied as: the gate `U_j(theta_j)`, then the
//! coherent error unitaries attached to layer `j`, then the channel attached
//! to layer `j`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ansatz::Circuit;
use crate::error::{Error, Result};
use crate::operators::{
    exp_i_hermitian, hermitian_eigen, identity, max_abs_diff, CMatrix, DensityMatrix,
    HermitianOperator, VALIDATION_TOL,
};
use crate::pauli::{Pauli, PauliString};

/// Trace-preservation tolerance for channel validation.
pub const TRACE_PRESERVATION_TOL: f64 = 1e-8;

/// Unitary error `exp(-i angle H)` applied right after layer `layer`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherentError {
    pub layer: usize,
    pub generator: HermitianOperator,
    pub angle: f64,
}

impl CoherentError {
    pub fn new(layer: usize, generator: HermitianOperator, angle: f64) -> Result<Self> {
        if !angle.is_finite() {
            return Err(Error::InvalidNoise(format!("non-finite angle {angle}")));
        }
        Ok(Self {
            layer,
            generator,
            angle,
        })
    }

    pub fn unitary(&self) -> CMatrix {
        exp_i_hermitian(self.generator.matrix(), self.angle)
    }
}

/// Multiplicative parameter errors: gate `k` runs at `(1 + eta_k) theta_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlErrorSpec {
    relative_errors: Vec<f64>,
}

impl ControlErrorSpec {
    pub fn new(relative_errors: Vec<f64>) -> Result<Self> {
        for (k, &eta) in relative_errors.iter().enumerate() {
            if !eta.is_finite() || eta <= -1.0 {
                return Err(Error::InvalidNoise(format!(
                    "control error {k} = {eta} must be finite and > -1"
                )));
            }
        }
        Ok(Self { relative_errors })
    }

    /// Same relative error on all `len` parameters.
    pub fn uniform(len: usize, eta: f64) -> Result<Self> {
        Self::new(vec![eta; len])
    }

    pub fn relative_errors(&self) -> &[f64] {
        &self.relative_errors
    }

    pub fn max_abs(&self) -> f64 {
        self.relative_errors.iter().fold(0.0, |m, e| m.max(e.abs()))
    }
}

/// `theta_k -> (1 + eta_k) theta_k`.
pub fn control_error_cost_map(theta: &[f64], spec: &ControlErrorSpec) -> Result<Vec<f64>> {
    if theta.len() != spec.relative_errors.len() {
        return Err(Error::ParameterLength {
            expected: spec.relative_errors.len(),
            found: theta.len(),
        });
    }
    Ok(theta
        .iter()
        .zip(&spec.relative_errors)
        .map(|(t, e)| (1.0 + e) * t)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelForm {
    /// `(1 - p) rho + p sum_k w_k E_k rho E_k^dagger` with `sum_k w_k = 1`.
    Mixture,
    /// Plain Kraus sum `sum_k K_k rho K_k^dagger` (no identity branch).
    Standard,
}

/// Trace-preserving map `rho -> q rho + sum_k c_k E_k rho E_k^dagger`.
///
/// In mixture form `q = 1 - p` and `c_k = p w_k`; in standard form `q = 0` and
/// `c_k = 1`. Invariants are checked at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausChannel {
    form: ChannelForm,
    identity_weight: f64,
    terms: Vec<(f64, CMatrix)>,
}

/// Spectral norm of a general complex matrix.
pub fn operator_norm(m: &CMatrix) -> f64 {
    let gram = m.adjoint() * m;
    hermitian_eigen(&gram).0.iter().copied().fold(0.0, f64::max).max(0.0).sqrt()
}

impl KrausChannel {
    /// Mixture form with error probability `p`, weights and operators.
    pub fn mixture(error_prob: f64, weights: Vec<f64>, operators: Vec<CMatrix>) -> Result<Self> {
        if !(0.0..1.0).contains(&error_prob) {
            return Err(Error::InvalidChannel(format!(
                "error probability {error_prob} outside [0, 1)"
            )));
        }
        if weights.len() != operators.len() || operators.is_empty() {
            return Err(Error::InvalidChannel(format!(
                "{} weights for {} operators",
                weights.len(),
                operators.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidChannel(format!("negative or non-finite weight {w}")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > VALIDATION_TOL {
            return Err(Error::InvalidChannel(format!("weights sum to {total}, not 1")));
        }
        for (k, e) in operators.iter().enumerate() {
            let norm = operator_norm(e);
            if norm > 1.0 + VALIDATION_TOL {
                return Err(Error::InvalidChannel(format!(
                    "operator {k} has norm {norm} > 1"
                )));
            }
        }
        let channel = Self {
            form: ChannelForm::Mixture,
            identity_weight: 1.0 - error_prob,
            terms: weights
                .into_iter()
                .map(|w| w * error_prob)
                .zip(operators)
                .collect(),
        };
        channel.check_shapes()?;
        channel.check_trace_preserving()?;
        Ok(channel)
    }

    /// Standard Kraus form `sum_k K_k rho K_k^dagger`.
    pub fn standard(operators: Vec<CMatrix>) -> Result<Self> {
        if operators.is_empty() {
            return Err(Error::InvalidChannel("no Kraus operators".into()));
        }
        let channel = Self {
            form: ChannelForm::Standard,
            identity_weight: 0.0,
            terms: operators.into_iter().map(|k| (1.0, k)).collect(),
        };
        channel.check_shapes()?;
        channel.check_trace_preserving()?;
        Ok(channel)
    }

    /// Built from already-validated pieces (composition and conjugation).
    pub(crate) fn from_parts(form: ChannelForm, identity_weight: f64, terms: Vec<(f64, CMatrix)>) -> Self {
        Self {
            form,
            identity_weight,
            terms,
        }
    }

    /// Bit flip with probability `p` on one uniformly chosen qubit of `qubits`.
    pub fn bit_flip(n: usize, error_prob: f64, qubits: &[usize]) -> Result<Self> {
        if qubits.is_empty() {
            return Err(Error::InvalidChannel("bit flip without target qubits".into()));
        }
        let ops = qubits
            .iter()
            .map(|&q| PauliString::single(n, q, Pauli::X, 1.0).map(|p| p.matrix()))
            .collect::<Result<Vec<_>>>()?;
        let w = 1.0 / qubits.len() as f64;
        Self::mixture(error_prob, vec![w; qubits.len()], ops)
    }

    /// Depolarizing channel `(1 - p) rho + p Tr[rho] I / N`, written as a
    /// uniform mixture over all `N^2` Pauli strings.
    pub fn depolarizing(n: usize, error_prob: f64) -> Result<Self> {
        let ops: Vec<CMatrix> = PauliString::all(n).map(|p| p.matrix()).collect();
        let w = 1.0 / ops.len() as f64;
        Self::mixture(error_prob, vec![w; ops.len()], ops)
    }

    /// Amplitude damping with decay probability `gamma` on `qubit`, in its
    /// standard two-operator Kraus form.
    pub fn amplitude_damping(n: usize, gamma: f64, qubit: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidChannel(format!("damping {gamma} outside [0, 1]")));
        }
        if qubit >= n {
            return Err(Error::IndexOutOfRange {
                what: "qubit",
                index: qubit,
                len: n,
            });
        }
        use num_complex::Complex64 as C;
        let k0 = CMatrix::from_row_slice(
            2,
            2,
            &[C::new(1.0, 0.0), C::new(0.0, 0.0), C::new(0.0, 0.0), C::new((1.0 - gamma).sqrt(), 0.0)],
        );
        let k1 = CMatrix::from_row_slice(
            2,
            2,
            &[C::new(0.0, 0.0), C::new(gamma.sqrt(), 0.0), C::new(0.0, 0.0), C::new(0.0, 0.0)],
        );
        let embed = |k: &CMatrix| {
            (0..n).fold(CMatrix::identity(1, 1), |acc, q| {
                if q == qubit {
                    acc.kronecker(k)
                } else {
                    acc.kronecker(&identity(2))
                }
            })
        };
        Self::standard(vec![embed(&k0), embed(&k1)])
    }

    fn check_shapes(&self) -> Result<()> {
        let dim = self.terms[0].1.nrows();
        for (_, e) in &self.terms {
            if e.nrows() != dim || e.ncols() != dim {
                return Err(Error::InvalidChannel(format!(
                    "operator shape {}x{} does not match {dim}x{dim}",
                    e.nrows(),
                    e.ncols()
                )));
            }
        }
        Ok(())
    }

    /// The adjoint map must send `I` to `I`; this is trace preservation on
    /// every operator.
    fn check_trace_preserving(&self) -> Result<()> {
        let dim = self.dim();
        let dev = max_abs_diff(&self.apply_adjoint(&identity(dim)), &identity(dim));
        if dev > TRACE_PRESERVATION_TOL {
            return Err(Error::InvalidChannel(format!(
                "not trace preserving: max |E*(I) - I| = {dev:.3e}"
            )));
        }
        Ok(())
    }

    pub fn form(&self) -> ChannelForm {
        self.form
    }

    pub fn dim(&self) -> usize {
        self.terms[0].1.nrows()
    }

    /// `p = 1 - q`; 1 for standard-form channels.
    pub fn error_prob(&self) -> f64 {
        1.0 - self.identity_weight
    }

    pub fn identity_weight(&self) -> f64 {
        self.identity_weight
    }

    /// Mixture weights `w_k = c_k / p` (for standard form, the raw `c_k = 1`).
    pub fn weights(&self) -> Vec<f64> {
        let p = self.error_prob();
        self.terms
            .iter()
            .map(|(c, _)| match self.form {
                ChannelForm::Mixture if p > 0.0 => c / p,
                ChannelForm::Mixture => 1.0 / self.terms.len() as f64,
                ChannelForm::Standard => *c,
            })
            .collect()
    }

    pub fn operators(&self) -> impl Iterator<Item = &CMatrix> {
        self.terms.iter().map(|(_, e)| e)
    }

    pub fn terms(&self) -> &[(f64, CMatrix)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Schrodinger picture on a raw matrix.
    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let mut out = rho.scale(self.identity_weight);
        for (c, e) in &self.terms {
            if *c != 0.0 {
                out += (e * rho * e.adjoint()).scale(*c);
            }
        }
        out
    }

    /// Heisenberg picture: `q O + sum_k c_k E_k^dagger O E_k`.
    pub fn apply_adjoint(&self, o: &CMatrix) -> CMatrix {
        let mut out = o.scale(self.identity_weight);
        for (c, e) in &self.terms {
            if *c != 0.0 {
                out += (e.adjoint() * o * e).scale(*c);
            }
        }
        out
    }

    /// Same channel with every operator replaced by `V E V^dagger`.
    pub fn conjugated_by(&self, v: &CMatrix) -> Self {
        Self {
            form: self.form,
            identity_weight: self.identity_weight,
            terms: self
                .terms
                .iter()
                .map(|(c, e)| (*c, v * e * v.adjoint()))
                .collect(),
        }
    }
}

pub fn apply_channel(channel: &KrausChannel, rho: &DensityMatrix) -> Result<DensityMatrix> {
    if channel.dim() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: channel.dim(),
            found: rho.dim(),
        });
    }
    Ok(DensityMatrix::from_matrix_unchecked(channel.apply(rho.matrix())))
}

/// Per-layer attachment of coherent errors, channels and control errors.
#[derive(Debug, Clone, Default)]
pub struct NoiseModel {
    coherent: Vec<CoherentError>,
    channels: BTreeMap<usize, KrausChannel>,
    control: Option<ControlErrorSpec>,
    allow_mixed: bool,
}

impl NoiseModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_coherent(mut self, error: CoherentError) -> Self {
        self.coherent.push(error);
        self
    }

    /// Attaches `channel` after layer `layer`; at most one channel per layer.
    pub fn with_channel(mut self, layer: usize, channel: KrausChannel) -> Result<Self> {
        if self.channels.insert(layer, channel).is_some() {
            return Err(Error::InvalidNoise(format!("layer {layer} already has a channel")));
        }
        Ok(self)
    }

    pub fn with_control(mut self, spec: ControlErrorSpec) -> Self {
        self.control = Some(spec);
        self
    }

    /// Permits control errors together with per-layer errors.
    pub fn allow_mixed(mut self) -> Self {
        self.allow_mixed = true;
        self
    }

    pub fn coherent(&self) -> &[CoherentError] {
        &self.coherent
    }

    pub fn channels(&self) -> &BTreeMap<usize, KrausChannel> {
        &self.channels
    }

    pub fn control(&self) -> Option<&ControlErrorSpec> {
        self.control.as_ref()
    }

    pub fn is_empty(&self) -> bool {
        self.coherent.is_empty() && self.channels.is_empty() && self.control.is_none()
    }

    /// Checks layer indices, dimensions and the control-error restrictions
    /// against `circuit`.
    pub fn validate_for(&self, circuit: &Circuit) -> Result<()> {
        let depth = circuit.depth();
        let dim = circuit.dim();
        for e in &self.coherent {
            if e.layer >= depth {
                return Err(Error::IndexOutOfRange {
                    what: "coherent error layer",
                    index: e.layer,
                    len: depth,
                });
            }
            if e.generator.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: e.generator.dim(),
                });
            }
        }
        for (&layer, ch) in &self.channels {
            if layer >= depth {
                return Err(Error::IndexOutOfRange {
                    what: "channel layer",
                    index: layer,
                    len: depth,
                });
            }
            if ch.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: ch.dim(),
                });
            }
        }
        if let Some(spec) = &self.control {
            if !self.allow_mixed && (!self.coherent.is_empty() || !self.channels.is_empty()) {
                return Err(Error::InvalidNoise(
                    "control errors combined with per-layer errors; call allow_mixed() to permit".into(),
                ));
            }
            if !circuit.is_product_only() {
                return Err(Error::InvalidNoise(
                    "control errors require product layers with one generator per parameter".into(),
                ));
            }
            if spec.relative_errors.len() != circuit.total_params() {
                return Err(Error::ParameterLength {
                    expected: circuit.total_params(),
                    found: spec.relative_errors.len(),
                });
            }
        }
        Ok(())
    }

    /// The circuit with coherent errors spliced in as fixed layers, and the
    /// channel following each layer of that circuit.
    pub(crate) fn lower(&self, circuit: &Circuit) -> Result<LoweredCircuit> {
        self.validate_for(circuit)?;
        let dim = circuit.dim();
        let mut after: Vec<Option<CMatrix>> = vec![None; circuit.depth()];
        for e in &self.coherent {
            let u = e.unitary();
            let slot = &mut after[e.layer];
            *slot = Some(match slot.take() {
                Some(prev) => u * prev,
                None => u,
            });
        }
        let spliced = circuit.with_fixed_after(&after);
        let mut channels = Vec::with_capacity(spliced.depth());
        for j in 0..circuit.depth() {
            let ch = self.channels.get(&j).cloned();
            if after[j].is_some() {
                channels.push(None);
            }
            channels.push(ch);
        }
        debug_assert_eq!(channels.len(), spliced.depth());
        debug_assert!(dim == spliced.dim());
        Ok(LoweredCircuit {
            circuit: spliced,
            channels,
            control: self.control.clone(),
        })
    }
}

/// Noise reduced to fixed unitary layers plus per-layer channels.
#[derive(Debug, Clone)]
pub(crate) struct LoweredCircuit {
    pub circuit: Circuit,
    /// Channel applied after each layer of `circuit`.
    pub channels: Vec<Option<KrausChannel>>,
    pub control: Option<ControlErrorSpec>,
}

impl LoweredCircuit {
    /// Parameters actually seen by the gates.
    pub fn effective_params(&self, theta: &[f64]) -> Result<Vec<f64>> {
        match &self.control {
            Some(spec) => control_error_cost_map(theta, spec),
            None => Ok(theta.to_vec()),
        }
    }

    /// States entering each layer, and the final output state.
    pub fn forward(&self, theta_eff: &[f64], rho0: &CMatrix) -> (Vec<CMatrix>, Vec<CMatrix>, CMatrix) {
        let units = self.circuit.layer_unitaries(theta_eff);
        let mut inputs = Vec::with_capacity(units.len());
        let mut rho = rho0.clone();
        for (u, ch) in units.iter().zip(&self.channels) {
            inputs.push(rho.clone());
            rho = u * &rho * u.adjoint();
            if let Some(ch) = ch {
                rho = ch.apply(&rho);
            }
        }
        (units, inputs, rho)
    }
}

/// Exact interleaved propagation of `rho0` through the noisy circuit.
pub fn noisy_apply(
    circuit: &Circuit,
    theta: &[f64],
    noise: &NoiseModel,
    rho0: &DensityMatrix,
) -> Result<DensityMatrix> {
    circuit.check_params(theta)?;
    if rho0.dim() != circuit.dim() {
        return Err(Error::DimensionMismatch {
            expected: circuit.dim(),
            found: rho0.dim(),
        });
    }
    let lowered = noise.lower(circuit)?;
    let theta_eff = lowered.effective_params(theta)?;
    let (_, _, out) = lowered.forward(&theta_eff, rho0.matrix());
    Ok(DensityMatrix::from_matrix_unchecked(out))
}

/// Per-layer bit-flip probability giving perturbation level `epsilon` after
/// `depth` layers: `p = 1 - (1 / (1 + epsilon))^(1 / depth)`.
pub fn bit_flip_prob_for_epsilon(epsilon: f64, depth: usize) -> Result<f64> {
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "perturbation level {epsilon} must be finite and >= 0"
        )));
    }
    if depth == 0 {
        return Err(Error::InvalidArgument("depth must be >= 1".into()));
    }
    Ok(1.0 - (1.0 / (1.0 + epsilon)).powf(1.0 / depth as f64))
}
