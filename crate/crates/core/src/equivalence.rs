//! Rewriting noisy circuits as noise at the output and as perturbed
//! observables.
//!
//! Layer indices are 0-based. `suffix_unitary(j)` is `U_{L-1} ... U_j`. An
//! error attached to layer `j` acts after `U_j`, so moving it to the output
//! conjugates it by the layers that follow, `suffix_unitary(j + 1)`.

use std::fmt;
use std::sync::Arc;

use crate::ansatz::{apply, Circuit};
use crate::error::{Error, Result};
use crate::noise::{ChannelForm, CoherentError, KrausChannel, NoiseModel};
use crate::operators::{
    exp_i_hermitian, identity, max_abs_diff, trace_product, CMatrix, DensityMatrix, HermitianOperator,
    UnitaryOperator, I, VALIDATION_TOL,
};

/// Upper bound on the number of operators a composed channel may carry.
pub const MAX_PUSHED_OPERATORS: usize = 4096;

/// `U_{L-1} ... U_j` for `j < L`.
pub fn suffix_unitary(circuit: &Circuit, theta: &[f64], j: usize) -> Result<UnitaryOperator> {
    circuit.check_params(theta)?;
    circuit.check_layer(j)?;
    Ok(UnitaryOperator::from_matrix_unchecked(suffix_after(circuit, theta, j)))
}

/// `U_{L-1} ... U_j`, the identity when `j = L`.
fn suffix_after(circuit: &Circuit, theta: &[f64], j: usize) -> CMatrix {
    (j..circuit.depth()).fold(identity(circuit.dim()), |acc, m| {
        circuit.layer_unitary(theta, m) * acc
    })
}

/// All suffixes at once: `out[j] = U_{L-1} ... U_j`, with `out[L] = I`.
fn all_suffixes(circuit: &Circuit, theta: &[f64]) -> Vec<CMatrix> {
    let depth = circuit.depth();
    let mut out = vec![identity(circuit.dim()); depth + 1];
    for j in (0..depth).rev() {
        out[j] = &out[j + 1] * circuit.layer_unitary(theta, j);
    }
    out
}

fn check_errors(circuit: &Circuit, errors: &[CoherentError]) -> Result<()> {
    for e in errors {
        circuit.check_layer(e.layer)?;
        if e.generator.dim() != circuit.dim() {
            return Err(Error::DimensionMismatch {
                expected: circuit.dim(),
                found: e.generator.dim(),
            });
        }
    }
    Ok(())
}

/// Errors in the order they act: by layer, ties in list order.
fn acting_order(errors: &[CoherentError]) -> Vec<&CoherentError> {
    let mut ordered: Vec<&CoherentError> = errors.iter().collect();
    ordered.sort_by_key(|e| e.layer);
    ordered
}

/// Output-frame generators `V H_e V^dagger`, one per error and in the order
/// given, with `V` the clean layers after the error's layer.
pub fn push_coherent_to_last(
    circuit: &Circuit,
    theta: &[f64],
    errors: &[CoherentError],
) -> Result<Vec<HermitianOperator>> {
    circuit.check_params(theta)?;
    check_errors(circuit, errors)?;
    let suffixes = all_suffixes(circuit, theta);
    Ok(errors
        .iter()
        .map(|e| e.generator.conjugated_by(&suffixes[e.layer + 1]))
        .collect())
}

/// Clean circuit followed by the pushed error unitaries.
pub fn pushed_coherent_apply(
    circuit: &Circuit,
    theta: &[f64],
    errors: &[CoherentError],
    rho0: &DensityMatrix,
) -> Result<DensityMatrix> {
    let clean = apply(circuit, theta, rho0)?;
    check_errors(circuit, errors)?;
    let suffixes = all_suffixes(circuit, theta);
    let mut rho = clean.into_matrix();
    for e in acting_order(errors) {
        let h = e.generator.conjugated_by(&suffixes[e.layer + 1]);
        let u = exp_i_hermitian(h.matrix(), e.angle);
        rho = &u * rho * u.adjoint();
    }
    Ok(DensityMatrix::from_matrix_unchecked(rho))
}

/// A channel whose operators may depend on the circuit parameters. The error
/// probability is fixed.
#[derive(Clone)]
pub struct ParametricChannel {
    error_prob: f64,
    build: Arc<dyn Fn(&[f64]) -> Result<KrausChannel> + Send + Sync>,
}

impl ParametricChannel {
    pub fn new<F>(error_prob: f64, build: F) -> Self
    where
        F: Fn(&[f64]) -> Result<KrausChannel> + Send + Sync + 'static,
    {
        Self {
            error_prob,
            build: Arc::new(build),
        }
    }

    pub fn error_prob(&self) -> f64 {
        self.error_prob
    }

    /// The channel at `theta`; its error probability must match.
    pub fn at(&self, theta: &[f64]) -> Result<KrausChannel> {
        let ch = (self.build)(theta)?;
        if (ch.error_prob() - self.error_prob).abs() > 1e-12 {
            return Err(Error::InvalidChannel(format!(
                "channel at theta has error probability {}, expected {}",
                ch.error_prob(),
                self.error_prob
            )));
        }
        Ok(ch)
    }
}

impl fmt::Debug for ParametricChannel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ParametricChannel")
            .field("error_prob", &self.error_prob)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum PerturbationSource {
    None,
    Coherent {
        circuit: Circuit,
        errors: Vec<CoherentError>,
    },
    Channel(KrausChannel),
    Parametric(ParametricChannel),
}

/// `scale * Tr[(O + level * O~(theta)) rho(theta)]` with `rho(theta)` the
/// clean circuit output.
#[derive(Debug, Clone)]
pub struct PerturbedObservable {
    base: HermitianOperator,
    level: f64,
    scale: f64,
    source: PerturbationSource,
}

impl PerturbedObservable {
    pub fn base(&self) -> &HermitianOperator {
        &self.base
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn source(&self) -> &PerturbationSource {
        &self.source
    }

    /// True when `O~` varies with `theta`.
    pub fn depends_on_theta(&self) -> bool {
        match &self.source {
            PerturbationSource::None | PerturbationSource::Channel(_) => false,
            PerturbationSource::Coherent { circuit, errors } => errors.iter().any(|e| {
                // the last layer's errors are not conjugated
                e.layer + 1 < circuit.depth()
            }),
            PerturbationSource::Parametric(_) => true,
        }
    }

    /// `O~(theta)`.
    pub fn perturbation(&self, theta: &[f64]) -> Result<HermitianOperator> {
        let dim = self.base.dim();
        let o = self.base.matrix();
        match &self.source {
            PerturbationSource::None => Ok(HermitianOperator::zeros(dim)),
            PerturbationSource::Coherent { circuit, errors } => {
                let pushed = push_coherent_to_last(circuit, theta, errors)?;
                let mut acc = CMatrix::zeros(dim, dim);
                for (e, h) in errors.iter().zip(&pushed) {
                    let comm = h.matrix() * o - o * h.matrix();
                    acc += comm * (I * (e.angle / self.level));
                }
                Ok(HermitianOperator::from_matrix_unchecked(acc))
            }
            PerturbationSource::Channel(ch) => Ok(channel_perturbation(o, ch)),
            PerturbationSource::Parametric(pc) => Ok(channel_perturbation(o, &pc.at(theta)?)),
        }
    }

    /// `scale * (Tr[O rho] + level * Tr[O~ rho])` at the clean output of
    /// `circuit`.
    pub fn cost(&self, circuit: &Circuit, theta: &[f64], rho0: &DensityMatrix) -> Result<f64> {
        let rho = apply(circuit, theta, rho0)?;
        let nominal = trace_product(self.base.matrix(), rho.matrix()).re;
        let term = if self.level == 0.0 {
            0.0
        } else {
            trace_product(self.perturbation(theta)?.matrix(), rho.matrix()).re
        };
        Ok(self.scale * (nominal + self.level * term))
    }
}

/// `sum_k w_k E_k^dagger O E_k`.
fn channel_perturbation(o: &CMatrix, ch: &KrausChannel) -> HermitianOperator {
    let dim = o.nrows();
    let mut acc = CMatrix::zeros(dim, dim);
    for (w, e) in ch.weights().into_iter().zip(ch.operators()) {
        acc += (e.adjoint() * o * e).scale(w);
    }
    HermitianOperator::from_matrix_unchecked(acc)
}

/// First-order observable for coherent errors with angles `eta_j`:
/// level `max |eta_j|` and `O~ = i sum_j (eta_j / level) [H^_j, O]`.
///
/// The factor `i` makes `O~` Hermitian and matches
/// `e^{i eta H} O e^{-i eta H} = O + i eta [H, O] + O(eta^2)`.
pub fn first_order_observable(
    observable: &HermitianOperator,
    circuit: &Circuit,
    errors: &[CoherentError],
) -> Result<PerturbedObservable> {
    if observable.dim() != circuit.dim() {
        return Err(Error::DimensionMismatch {
            expected: circuit.dim(),
            found: observable.dim(),
        });
    }
    check_errors(circuit, errors)?;
    let level = errors.iter().fold(0.0f64, |m, e| m.max(e.angle.abs()));
    let source = if level == 0.0 {
        PerturbationSource::None
    } else {
        PerturbationSource::Coherent {
            circuit: circuit.clone(),
            errors: errors.to_vec(),
        }
    };
    Ok(PerturbedObservable {
        base: observable.clone(),
        level,
        scale: 1.0,
        source,
    })
}

fn level_for_prob(p: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::SingularPerturbation(p));
    }
    Ok(p / (1.0 - p))
}

/// Exact rewriting of a mixture channel at the circuit output: level
/// `p / (1 - p)`, `O~ = sum_k w_k E_k^dagger O E_k`, scale `1 - p`.
pub fn incoherent_to_observable(
    observable: &HermitianOperator,
    channel: &KrausChannel,
) -> Result<PerturbedObservable> {
    if channel.form() != ChannelForm::Mixture {
        return Err(Error::SingularPerturbation(channel.error_prob()));
    }
    if observable.dim() != channel.dim() {
        return Err(Error::DimensionMismatch {
            expected: channel.dim(),
            found: observable.dim(),
        });
    }
    let p = channel.error_prob();
    Ok(PerturbedObservable {
        base: observable.clone(),
        level: level_for_prob(p)?,
        scale: 1.0 - p,
        source: PerturbationSource::Channel(channel.clone()),
    })
}

/// As [`incoherent_to_observable`] for a channel depending on `theta`.
pub fn parametric_to_observable(
    observable: &HermitianOperator,
    channel: ParametricChannel,
) -> Result<PerturbedObservable> {
    let p = channel.error_prob();
    Ok(PerturbedObservable {
        base: observable.clone(),
        level: level_for_prob(p)?,
        scale: 1.0 - p,
        source: PerturbationSource::Parametric(channel),
    })
}

/// Every channel of a noise model moved to the output and composed.
#[derive(Debug, Clone)]
pub struct PushedChannel {
    channel: KrausChannel,
}

impl PushedChannel {
    pub fn channel(&self) -> &KrausChannel {
        &self.channel
    }

    pub fn into_channel(self) -> KrausChannel {
        self.channel
    }

    pub fn error_prob(&self) -> f64 {
        self.channel.error_prob()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.channel.weights()
    }

    pub fn operators(&self) -> impl Iterator<Item = &CMatrix> {
        self.channel.operators()
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        crate::noise::apply_channel(&self.channel, rho)
    }
}

/// `(c, E)` pairs that differ only by a global phase describe the same
/// branch; they are merged to keep compositions small.
fn same_up_to_phase(a: &CMatrix, b: &CMatrix) -> bool {
    let Some((idx, pivot)) = a.iter().enumerate().find(|(_, z)| z.norm() > 1e-9) else {
        return b.iter().all(|z| z.norm() <= 1e-12);
    };
    let other = b.as_slice()[idx];
    if (other.norm() - pivot.norm()).abs() > 1e-12 {
        return false;
    }
    let phase = other / pivot;
    max_abs_diff(&a.map(|z| z * phase), b) < 1e-12
}

fn merge_term(terms: &mut Vec<(f64, CMatrix)>, c: f64, e: CMatrix) {
    if c == 0.0 {
        return;
    }
    if let Some(slot) = terms.iter_mut().find(|(_, f)| same_up_to_phase(f, &e)) {
        slot.0 += c;
    } else {
        terms.push((c, e));
    }
}

/// Channel equal to applying `first` and then `second`.
pub fn compose_channels(first: &KrausChannel, second: &KrausChannel) -> Result<KrausChannel> {
    if first.dim() != second.dim() {
        return Err(Error::DimensionMismatch {
            expected: first.dim(),
            found: second.dim(),
        });
    }
    let (qa, qb) = (first.identity_weight(), second.identity_weight());
    let mut terms: Vec<(f64, CMatrix)> = Vec::new();
    for (c, e) in first.terms() {
        merge_term(&mut terms, qb * c, e.clone());
    }
    for (c, f) in second.terms() {
        merge_term(&mut terms, qa * c, f.clone());
    }
    for (cf, f) in second.terms() {
        for (ce, e) in first.terms() {
            merge_term(&mut terms, cf * ce, f * e);
            if terms.len() > MAX_PUSHED_OPERATORS {
                return Err(Error::Unsupported(format!(
                    "composed channel exceeds {MAX_PUSHED_OPERATORS} operators"
                )));
            }
        }
    }
    let form = if first.form() == ChannelForm::Standard || second.form() == ChannelForm::Standard {
        ChannelForm::Standard
    } else {
        ChannelForm::Mixture
    };
    Ok(KrausChannel::from_parts(form, qa * qb, terms))
}

/// Single output channel equivalent to all channels of `noise` interleaved
/// with the clean circuit. Noise models with coherent or control errors are
/// rejected.
pub fn push_channel_to_last(circuit: &Circuit, theta: &[f64], noise: &NoiseModel) -> Result<PushedChannel> {
    circuit.check_params(theta)?;
    noise.validate_for(circuit)?;
    if !noise.coherent().is_empty() || noise.control().is_some() {
        return Err(Error::Unsupported(
            "only channels can be pushed; coherent and control errors must be handled separately".into(),
        ));
    }
    let dim = circuit.dim();
    let suffixes = all_suffixes(circuit, theta);
    let mut acc: Option<KrausChannel> = None;
    for (&j, ch) in noise.channels() {
        let moved = ch.conjugated_by(&suffixes[j + 1]);
        acc = Some(match acc {
            None => moved,
            Some(prev) => compose_channels(&prev, &moved)?,
        });
    }
    let channel = match acc {
        Some(ch) => ch,
        None => KrausChannel::mixture(0.0, vec![1.0], vec![identity(dim)])?,
    };
    let dev = max_abs_diff(&channel.apply_adjoint(&identity(dim)), &identity(dim));
    debug_assert!(dev < 1e3 * VALIDATION_TOL, "composed channel lost trace: {dev}");
    Ok(PushedChannel { channel })
}

/// `epsilon(L) = (1 - p)^(-L) - 1` for a per-layer error probability `p`.
pub fn perturbation_level_for_depth(p: f64, depth: usize) -> Result<f64> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::SingularPerturbation(p));
    }
    let depth = i32::try_from(depth).map_err(|_| Error::InvalidArgument(format!("depth {depth} too large")))?;
    Ok((1.0 - p).powi(-depth) - 1.0)
}
