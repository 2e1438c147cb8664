//! Parameterized circuit families, their unitaries and tangent directions.
//!
//! A [`Circuit`] is an ordered list of layers; layer 0 acts first, so
//! `U(theta) = U_{L-1} ... U_1 U_0`. Within a [`ProductLayer`] the generators
//! are applied in order as well: `U_j = e^{-i t_p H_p} ... e^{-i t_1 H_1}`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{
    exp_i_hermitian, hermitian_eigen, identity, trace, trace_product, CMatrix, DensityMatrix,
    HermitianOperator, QubitCount, UnitaryOperator, I, MAX_QUBITS,
};
use crate::pauli::{pauli_sum, Pauli, PauliString};

/// Relative singular-value cutoff used by [`local_surjectivity_rank`].
pub const RANK_RTOL: f64 = 1e-8;

/// Largest register for which the dense SU(N)-type builders are offered.
pub const MAX_DENSE_BUILDER_QUBITS: usize = 5;

/// Largest depth accepted by the builders.
pub const MAX_BUILDER_DEPTH: usize = 1000;

/// A generator with its cached eigen-decomposition.
#[derive(Debug, Clone)]
struct Generator {
    op: HermitianOperator,
    values: DVector<f64>,
    vectors: CMatrix,
    /// Diagonal of `op` when `op` is diagonal.
    diagonal: Option<Vec<f64>>,
}

impl Generator {
    fn new(op: HermitianOperator) -> Self {
        let (values, vectors) = hermitian_eigen(op.matrix());
        let m = op.matrix();
        let is_diagonal = (0..m.nrows()).all(|r| (0..m.ncols()).all(|c| r == c || m[(r, c)] == Complex64::new(0.0, 0.0)));
        let diagonal = is_diagonal.then(|| (0..m.nrows()).map(|i| m[(i, i)].re).collect());
        Self {
            op,
            values,
            vectors,
            diagonal,
        }
    }

    /// `exp(-i t H)` from the cached spectrum.
    fn exp(&self, t: f64) -> CMatrix {
        if t == 0.0 {
            return CMatrix::identity(self.vectors.nrows(), self.vectors.nrows());
        }
        if let Some(d) = &self.diagonal {
            let phases = d.iter().map(|h| Complex64::from_polar(1.0, -t * h));
            return CMatrix::from_diagonal(&DVector::from_iterator(d.len(), phases));
        }
        let mut scaled = self.vectors.clone();
        for (c, lambda) in self.values.iter().enumerate() {
            let phase = Complex64::from_polar(1.0, -t * lambda);
            scaled.column_mut(c).iter_mut().for_each(|z| *z *= phase);
        }
        scaled * self.vectors.adjoint()
    }
}

/// Layer `prod_k exp(-i theta_k H_k)` with one parameter per generator.
#[derive(Debug, Clone)]
pub struct ProductLayer {
    generators: Vec<Generator>,
}

impl ProductLayer {
    pub fn new(generators: Vec<HermitianOperator>) -> Result<Self> {
        check_generator_dims(&generators)?;
        Ok(Self {
            generators: generators.into_iter().map(Generator::new).collect(),
        })
    }

    pub fn generators(&self) -> impl Iterator<Item = &HermitianOperator> {
        self.generators.iter().map(|g| &g.op)
    }

    pub fn param_count(&self) -> usize {
        self.generators.len()
    }
}

/// Layer `exp(-i sum_k theta_k H_k)` over traceless generators.
#[derive(Debug, Clone)]
pub struct SunLayer {
    generators: Vec<HermitianOperator>,
}

impl SunLayer {
    pub fn new(generators: Vec<HermitianOperator>) -> Result<Self> {
        check_generator_dims(&generators)?;
        if let Some(k) = generators.iter().position(|g| !g.is_traceless()) {
            return Err(Error::InvalidArgument(format!(
                "SU(N) generator {k} is not traceless"
            )));
        }
        Ok(Self { generators })
    }

    pub fn generators(&self) -> &[HermitianOperator] {
        &self.generators
    }

    pub fn param_count(&self) -> usize {
        self.generators.len()
    }

    fn combination(&self, theta: &[f64]) -> CMatrix {
        let dim = self.generators[0].dim();
        let mut a = CMatrix::zeros(dim, dim);
        for (g, &t) in self.generators.iter().zip(theta) {
            a += g.matrix().scale(t);
        }
        a
    }
}

fn check_generator_dims(generators: &[HermitianOperator]) -> Result<()> {
    let Some(first) = generators.first() else {
        return Err(Error::InvalidArgument("layer without generators".into()));
    };
    for g in generators {
        if g.dim() != first.dim() {
            return Err(Error::DimensionMismatch {
                expected: first.dim(),
                found: g.dim(),
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub enum Layer {
    Product(ProductLayer),
    Sun(SunLayer),
    /// Parameter-free unitary, used to splice coherent errors into a circuit.
    Fixed(UnitaryOperator),
}

impl Layer {
    pub fn param_count(&self) -> usize {
        match self {
            Layer::Product(l) => l.param_count(),
            Layer::Sun(l) => l.param_count(),
            Layer::Fixed(_) => 0,
        }
    }

    fn dim(&self) -> usize {
        match self {
            Layer::Product(l) => l.generators[0].op.dim(),
            Layer::Sun(l) => l.generators[0].dim(),
            Layer::Fixed(u) => u.dim(),
        }
    }

    /// Layer unitary at the layer's own parameter slice.
    pub fn unitary(&self, theta: &[f64]) -> CMatrix {
        match self {
            Layer::Product(l) => {
                let dim = self.dim();
                l.generators
                    .iter()
                    .zip(theta)
                    .fold(identity(dim), |acc, (g, &t)| g.exp(t) * acc)
            }
            Layer::Sun(l) => exp_i_hermitian(&l.combination(theta), 1.0),
            Layer::Fixed(u) => u.matrix().clone(),
        }
    }

    /// `dU_j / d theta_k` for parameter `k` of this layer.
    pub fn derivative(&self, theta: &[f64], k: usize) -> CMatrix {
        match self {
            Layer::Product(l) => {
                let dim = self.dim();
                let mut acc = identity(dim);
                for (idx, (g, &t)) in l.generators.iter().zip(theta).enumerate() {
                    acc = g.exp(t) * acc;
                    if idx == k {
                        acc = g.op.matrix() * acc * (-I);
                    }
                }
                acc
            }
            Layer::Sun(l) => {
                let (values, vectors) = hermitian_eigen(&l.combination(theta));
                let f = divided_differences(&values);
                let h = vectors.adjoint() * l.generators[k].matrix() * &vectors;
                let inner = h.component_mul(&f);
                &vectors * inner * vectors.adjoint()
            }
            Layer::Fixed(_) => panic!("fixed layers have no parameters"),
        }
    }

    /// `2 Re Tr[X dU_j/d theta_k]` for every parameter `k` of this layer.
    pub(crate) fn pair_derivatives(&self, theta: &[f64], x: &CMatrix) -> Vec<f64> {
        match self {
            Layer::Product(l) => {
                let dim = self.dim();
                let gates: Vec<CMatrix> = l
                    .generators
                    .iter()
                    .zip(theta)
                    .map(|(g, &t)| g.exp(t))
                    .collect();
                // prefix[k] = G_k ... G_1, suffix[k] = G_p ... G_{k+1}
                let mut prefix = Vec::with_capacity(gates.len());
                let mut acc = identity(dim);
                for g in &gates {
                    acc = g * acc;
                    prefix.push(acc.clone());
                }
                let mut suffix = vec![identity(dim); gates.len()];
                for k in (0..gates.len().saturating_sub(1)).rev() {
                    suffix[k] = &suffix[k + 1] * &gates[k + 1];
                }
                l.generators
                    .iter()
                    .enumerate()
                    .map(|(k, g)| {
                        let m = if k + 1 == gates.len() {
                            &prefix[k] * x
                        } else {
                            &prefix[k] * x * &suffix[k]
                        };
                        2.0 * (trace_product(&m, g.op.matrix()) * (-I)).re
                    })
                    .collect()
            }
            Layer::Sun(l) => {
                let (values, vectors) = hermitian_eigen(&l.combination(theta));
                let f = divided_differences(&values);
                let xt = vectors.adjoint() * x * &vectors;
                let g = &vectors * xt.component_mul(&f.transpose()) * vectors.adjoint();
                l.generators
                    .iter()
                    .map(|h| 2.0 * trace_product(&g, h.matrix()).re)
                    .collect()
            }
            Layer::Fixed(_) => Vec::new(),
        }
    }
}

/// Divided differences of `t -> exp(-i t)` on a spectrum:
/// `F_ab = (e^{-i l_a} - e^{-i l_b}) / (l_a - l_b)`, `F_aa = -i e^{-i l_a}`.
fn divided_differences(values: &DVector<f64>) -> CMatrix {
    let n = values.len();
    CMatrix::from_fn(n, n, |a, b| {
        let (la, lb) = (values[a], values[b]);
        let half = 0.5 * (la - lb);
        let sinc = if half.abs() < 1e-8 {
            1.0 - half * half / 6.0
        } else {
            half.sin() / half
        };
        -I * Complex64::from_polar(1.0, -0.5 * (la + lb)) * sinc
    })
}

/// Ordered sequence of layers acting on an `n`-qubit register.
#[derive(Debug, Clone)]
pub struct Circuit {
    n: QubitCount,
    layers: Vec<Layer>,
    offsets: Vec<usize>,
}

impl Circuit {
    pub fn new(n: QubitCount, layers: Vec<Layer>) -> Result<Self> {
        let mut offsets = Vec::with_capacity(layers.len() + 1);
        offsets.push(0);
        for layer in &layers {
            if layer.dim() != n.dim() {
                return Err(Error::DimensionMismatch {
                    expected: n.dim(),
                    found: layer.dim(),
                });
            }
            offsets.push(offsets.last().unwrap() + layer.param_count());
        }
        Ok(Self { n, layers, offsets })
    }

    /// Circuit made of product layers, one list of generators per layer.
    pub fn from_product_layers(n: QubitCount, layers: Vec<Vec<HermitianOperator>>) -> Result<Self> {
        let layers = layers
            .into_iter()
            .map(|g| ProductLayer::new(g).map(Layer::Product))
            .collect::<Result<Vec<_>>>()?;
        Self::new(n, layers)
    }

    pub fn qubits(&self) -> QubitCount {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.n.dim()
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn total_params(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Indices into the parameter vector owned by layer `j`.
    pub fn param_range(&self, j: usize) -> std::ops::Range<usize> {
        self.offsets[j]..self.offsets[j + 1]
    }

    /// Layer owning global parameter `idx`, and the local index within it.
    pub fn locate_param(&self, idx: usize) -> Result<(usize, usize)> {
        if idx >= self.total_params() {
            return Err(Error::IndexOutOfRange {
                what: "parameter",
                index: idx,
                len: self.total_params(),
            });
        }
        let j = self.offsets.partition_point(|&o| o <= idx) - 1;
        Ok((j, idx - self.offsets[j]))
    }

    pub fn check_params(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.total_params() {
            return Err(Error::ParameterLength {
                expected: self.total_params(),
                found: theta.len(),
            });
        }
        if let Some(i) = theta.iter().position(|t| !t.is_finite()) {
            return Err(Error::NonFiniteParameter(i));
        }
        Ok(())
    }

    pub fn check_layer(&self, j: usize) -> Result<()> {
        if j >= self.depth() {
            return Err(Error::IndexOutOfRange {
                what: "layer",
                index: j,
                len: self.depth(),
            });
        }
        Ok(())
    }

    /// Unitary of layer `j` at the full parameter vector.
    pub fn layer_unitary(&self, theta: &[f64], j: usize) -> CMatrix {
        self.layers[j].unitary(&theta[self.param_range(j)])
    }

    /// All layer unitaries, in application order.
    pub fn layer_unitaries(&self, theta: &[f64]) -> Vec<CMatrix> {
        (0..self.depth()).map(|j| self.layer_unitary(theta, j)).collect()
    }

    /// Splits every product layer into single-generator layers. The unitary
    /// and the parameter order are unchanged.
    pub fn split_gates(&self) -> Self {
        let mut layers = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Product(p) if p.param_count() > 1 => {
                    for g in &p.generators {
                        layers.push(Layer::Product(ProductLayer {
                            generators: vec![g.clone()],
                        }));
                    }
                }
                other => layers.push(other.clone()),
            }
        }
        Self::new(self.n, layers).expect("split preserves dimensions")
    }

    /// Copy with a fixed unitary inserted right after selected layers.
    /// `after[j]`, when present, follows layer `j`.
    pub fn with_fixed_after(&self, after: &[Option<CMatrix>]) -> Self {
        let mut layers = Vec::with_capacity(self.depth() * 2);
        for (j, layer) in self.layers.iter().enumerate() {
            layers.push(layer.clone());
            if let Some(Some(u)) = after.get(j) {
                layers.push(Layer::Fixed(UnitaryOperator::from_matrix_unchecked(u.clone())));
            }
        }
        Self::new(self.n, layers).expect("fixed layers share the register dimension")
    }

    pub fn is_product_only(&self) -> bool {
        self.layers
            .iter()
            .all(|l| matches!(l, Layer::Product(_) | Layer::Fixed(_)))
    }
}

/// `U(theta) = U_{L-1} ... U_0`.
pub fn unitary(circuit: &Circuit, theta: &[f64]) -> Result<UnitaryOperator> {
    circuit.check_params(theta)?;
    let u = circuit
        .layer_unitaries(theta)
        .into_iter()
        .fold(identity(circuit.dim()), |acc, u| u * acc);
    Ok(UnitaryOperator::from_matrix_unchecked(u))
}

/// `rho(theta) = U(theta) rho0 U(theta)^dagger`.
pub fn apply(circuit: &Circuit, theta: &[f64], rho0: &DensityMatrix) -> Result<DensityMatrix> {
    if rho0.dim() != circuit.dim() {
        return Err(Error::DimensionMismatch {
            expected: circuit.dim(),
            found: rho0.dim(),
        });
    }
    let u = unitary(circuit, theta)?;
    let m = u.matrix() * rho0.matrix() * u.matrix().adjoint();
    Ok(DensityMatrix::from_matrix_unchecked(m))
}

/// Prefix `U_{j-1} ... U_0` and suffix `U_{L-1} ... U_{j+1}` around layer `j`.
fn split_at_layer(circuit: &Circuit, units: &[CMatrix], j: usize) -> (CMatrix, CMatrix) {
    let dim = circuit.dim();
    let before = units[..j].iter().fold(identity(dim), |acc, u| u * acc);
    let after = units[j + 1..].iter().fold(identity(dim), |acc, u| u * acc);
    (before, after)
}

/// `dU/d theta_idx` of the full circuit.
pub fn unitary_derivative(circuit: &Circuit, theta: &[f64], idx: usize) -> Result<CMatrix> {
    circuit.check_params(theta)?;
    let (j, k) = circuit.locate_param(idx)?;
    let units = circuit.layer_unitaries(theta);
    let (before, after) = split_at_layer(circuit, &units, j);
    let d = circuit.layers[j].derivative(&theta[circuit.param_range(j)], k);
    Ok(after * d * before)
}

/// `Omega_idx = U^dagger dU/d theta_idx`; anti-Hermitian.
pub fn omega(circuit: &Circuit, theta: &[f64], idx: usize) -> Result<CMatrix> {
    circuit.check_params(theta)?;
    let (j, k) = circuit.locate_param(idx)?;
    let units = circuit.layer_unitaries(theta);
    let (before, _) = split_at_layer(circuit, &units, j);
    let d = circuit.layers[j].derivative(&theta[circuit.param_range(j)], k);
    Ok(before.adjoint() * units[j].adjoint() * d * before)
}

/// All `Omega_j`, sharing the layer products.
pub fn omegas(circuit: &Circuit, theta: &[f64]) -> Result<Vec<CMatrix>> {
    circuit.check_params(theta)?;
    let units = circuit.layer_unitaries(theta);
    let mut out = Vec::with_capacity(circuit.total_params());
    let mut before = identity(circuit.dim());
    for (j, layer) in circuit.layers.iter().enumerate() {
        let local = &theta[circuit.param_range(j)];
        let left = before.adjoint() * units[j].adjoint();
        for k in 0..layer.param_count() {
            out.push(&left * layer.derivative(local, k) * &before);
        }
        before = &units[j] * before;
    }
    Ok(out)
}

/// Dimension of the real span of the traceless parts of `{Omega_j}`.
///
/// Each traceless `Omega_j` is flattened into a real vector of length `2N^2`
/// (real parts, then imaginary parts) and the rank of the stacked vectors is
/// read from the singular values, counting those above
/// `RANK_RTOL * sigma_max`.
pub fn local_surjectivity_rank(circuit: &Circuit, theta: &[f64]) -> Result<usize> {
    let dirs = omegas(circuit, theta)?;
    if dirs.is_empty() {
        return Ok(0);
    }
    let dim = circuit.dim();
    let n2 = dim * dim;
    let mut stack = DMatrix::<f64>::zeros(dirs.len(), 2 * n2);
    for (row, w) in dirs.iter().enumerate() {
        let shift = trace(w) / dim as f64;
        let mut t = w.clone();
        for d in 0..dim {
            t[(d, d)] -= shift;
        }
        for (c, z) in t.iter().enumerate() {
            stack[(row, c)] = z.re;
            stack[(row, n2 + c)] = z.im;
        }
    }
    let sv = stack.singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return Ok(0);
    }
    Ok(sv.iter().filter(|&&s| s > RANK_RTOL * max).count())
}

/// `dim su(N) = N^2 - 1`.
pub fn su_dimension(dim: usize) -> usize {
    dim * dim - 1
}

pub fn is_locally_surjective(circuit: &Circuit, theta: &[f64]) -> Result<bool> {
    Ok(local_surjectivity_rank(circuit, theta)? == su_dimension(circuit.dim()))
}

/// Generalized Gell-Mann basis: `N^2 - 1` traceless Hermitian matrices,
/// orthogonal with `Tr[G_a G_b] = 2 delta_ab`.
pub fn gell_mann_basis(dim: usize) -> Vec<HermitianOperator> {
    let mut out = Vec::with_capacity(dim * dim - 1);
    for j in 0..dim {
        for k in j + 1..dim {
            let mut s = CMatrix::zeros(dim, dim);
            s[(j, k)] = Complex64::new(1.0, 0.0);
            s[(k, j)] = Complex64::new(1.0, 0.0);
            out.push(HermitianOperator::from_matrix_unchecked(s));
            let mut a = CMatrix::zeros(dim, dim);
            a[(j, k)] = -I;
            a[(k, j)] = I;
            out.push(HermitianOperator::from_matrix_unchecked(a));
        }
    }
    for l in 1..dim {
        let norm = (2.0 / (l * (l + 1)) as f64).sqrt();
        let mut d = CMatrix::zeros(dim, dim);
        for m in 0..l {
            d[(m, m)] = Complex64::new(norm, 0.0);
        }
        d[(l, l)] = Complex64::new(-(l as f64) * norm, 0.0);
        out.push(HermitianOperator::from_matrix_unchecked(d));
    }
    out
}

fn check_builder(n: usize, depth: usize, max_n: usize) -> Result<QubitCount> {
    if n == 0 || n > max_n {
        return Err(Error::Unsupported(format!(
            "qubit count {n} (builder supports 1..={max_n})"
        )));
    }
    if depth == 0 || depth > MAX_BUILDER_DEPTH {
        return Err(Error::Unsupported(format!(
            "depth {depth} (builder supports 1..={MAX_BUILDER_DEPTH})"
        )));
    }
    QubitCount::new(n)
}

fn pauli_op(n: usize, ops: &[(usize, Pauli)], coefficient: f64) -> HermitianOperator {
    PauliString::sparse(n, ops, coefficient)
        .expect("qubit indices generated in range")
        .to_operator()
}

/// Hardware-efficient ansatz. Each of the `depth` product layers holds, in
/// order: `Y_q / 2` for every qubit, `Z_q / 2` for every qubit, then
/// `Z_q Z_{q+1} / 2` for every neighbouring pair. Parameters per layer:
/// `2n + (n - 1)`.
pub fn build_hardware_efficient(n: usize, depth: usize) -> Result<Circuit> {
    let q = check_builder(n, depth, MAX_QUBITS)?;
    let mut gens = Vec::with_capacity(3 * n);
    for qubit in 0..n {
        gens.push(pauli_op(n, &[(qubit, Pauli::Y)], 0.5));
    }
    for qubit in 0..n {
        gens.push(pauli_op(n, &[(qubit, Pauli::Z)], 0.5));
    }
    for qubit in 0..n.saturating_sub(1) {
        gens.push(pauli_op(n, &[(qubit, Pauli::Z), (qubit + 1, Pauli::Z)], 0.5));
    }
    Circuit::from_product_layers(q, vec![gens; depth])
}

/// Validates an undirected simple graph on `n` vertices.
pub fn check_graph(n: usize, edges: &[(usize, usize)]) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for &(a, b) in edges {
        if a == b {
            return Err(Error::InvalidGraph(format!("self-loop on vertex {a}")));
        }
        if a >= n || b >= n {
            return Err(Error::InvalidGraph(format!(
                "edge ({a}, {b}) references a vertex outside 0..{n}"
            )));
        }
        if !seen.insert((a.min(b), a.max(b))) {
            return Err(Error::InvalidGraph(format!("duplicate edge ({a}, {b})")));
        }
    }
    Ok(())
}

/// MaxCut cost Hamiltonian `C = sum_{(a,b)} Z_a Z_b`. Its ground states are
/// the maximum cuts: `<C> = |E| - 2 * cut`.
pub fn maxcut_hamiltonian(n: usize, edges: &[(usize, usize)]) -> Result<HermitianOperator> {
    check_graph(n, edges)?;
    let terms: Vec<PauliString> = edges
        .iter()
        .map(|&(a, b)| PauliString::sparse(n, &[(a, Pauli::Z), (b, Pauli::Z)], 1.0))
        .collect::<Result<_>>()?;
    if terms.is_empty() {
        return Ok(HermitianOperator::zeros(1 << n));
    }
    pauli_sum(n, &terms)
}

/// Transverse-field mixer `B = sum_i X_i`.
pub fn mixer_hamiltonian(n: usize) -> HermitianOperator {
    let terms: Vec<PauliString> = (0..n)
        .map(|q| PauliString::single(n, q, Pauli::X, 1.0).expect("in range"))
        .collect();
    pauli_sum(n, &terms).expect("consistent sizes")
}

/// QAOA: `depth` rounds of `e^{-i gamma C}` followed by `e^{-i beta B}`,
/// each a single-generator product layer (`2 * depth` parameters, ordered
/// `gamma_1, beta_1, gamma_2, ...`).
pub fn build_qaoa(n: usize, edges: &[(usize, usize)], depth: usize) -> Result<Circuit> {
    let q = check_builder(n, depth, MAX_QUBITS)?;
    let cost = maxcut_hamiltonian(n, edges)?;
    let mixer = mixer_hamiltonian(n);
    let mut layers = Vec::with_capacity(2 * depth);
    for _ in 0..depth {
        layers.push(vec![cost.clone()]);
        layers.push(vec![mixer.clone()]);
    }
    Circuit::from_product_layers(q, layers)
}

/// SU(N)-type ansatz over the one-local Pauli strings and the nearest
/// neighbour two-local strings: `3n + 9(n - 1)` generators per layer. For
/// `n <= 2` this is a complete basis of `su(N)`.
pub fn build_sun(n: usize, depth: usize) -> Result<Circuit> {
    let q = check_builder(n, depth, MAX_DENSE_BUILDER_QUBITS)?;
    let paulis = [Pauli::X, Pauli::Y, Pauli::Z];
    let mut gens = Vec::new();
    for qubit in 0..n {
        for &p in &paulis {
            gens.push(pauli_op(n, &[(qubit, p)], 1.0));
        }
    }
    for qubit in 0..n.saturating_sub(1) {
        for &a in &paulis {
            for &b in &paulis {
                gens.push(pauli_op(n, &[(qubit, a), (qubit + 1, b)], 1.0));
            }
        }
    }
    let layer = SunLayer::new(gens)?;
    Circuit::new(q, vec![Layer::Sun(layer); depth])
}

/// SU(N) layers over the full generalized Gell-Mann basis (`N^2 - 1`
/// parameters per layer); locally surjective at generic parameters.
pub fn build_locally_surjective(n: usize, depth: usize) -> Result<Circuit> {
    let q = check_builder(n, depth, MAX_DENSE_BUILDER_QUBITS)?;
    let layer = SunLayer::new(gell_mann_basis(q.dim()))?;
    Circuit::new(q, vec![Layer::Sun(layer); depth])
}

/// Serializable description of a circuit family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CircuitSpec {
    HardwareEfficient {
        n: usize,
        layers: usize,
    },
    Qaoa {
        n: usize,
        edges: Vec<(usize, usize)>,
        layers: usize,
    },
    Sun {
        n: usize,
        layers: usize,
    },
    LocallySurjective {
        n: usize,
        layers: usize,
    },
    /// One layer per entry; each entry lists Pauli strings such as `"XZ"`.
    /// Product layers use generator `coefficient * P`; SU(N) layers require
    /// non-identity strings.
    Pauli {
        n: usize,
        layers: Vec<Vec<String>>,
        #[serde(default = "one")]
        coefficient: f64,
        #[serde(default)]
        sun: bool,
    },
}

fn one() -> f64 {
    1.0
}

impl CircuitSpec {
    pub fn build(&self) -> Result<Circuit> {
        match self {
            CircuitSpec::HardwareEfficient { n, layers } => build_hardware_efficient(*n, *layers),
            CircuitSpec::Qaoa { n, edges, layers } => build_qaoa(*n, edges, *layers),
            CircuitSpec::Sun { n, layers } => build_sun(*n, *layers),
            CircuitSpec::LocallySurjective { n, layers } => build_locally_surjective(*n, *layers),
            CircuitSpec::Pauli {
                n,
                layers,
                coefficient,
                sun,
            } => {
                let q = QubitCount::new(*n)?;
                let mut built = Vec::with_capacity(layers.len());
                for strings in layers {
                    let gens = strings
                        .iter()
                        .map(|s| {
                            let p: PauliString = s.parse()?;
                            if p.num_qubits() != *n {
                                return Err(Error::DimensionMismatch {
                                    expected: *n,
                                    found: p.num_qubits(),
                                });
                            }
                            Ok(PauliString::new(p.letters().to_vec(), *coefficient).to_operator())
                        })
                        .collect::<Result<Vec<_>>>()?;
                    built.push(if *sun {
                        Layer::Sun(SunLayer::new(gens)?)
                    } else {
                        Layer::Product(ProductLayer::new(gens)?)
                    });
                }
                Circuit::new(q, built)
            }
        }
    }
}

/// Imaginary-part check used by tests and the verification report.
pub fn anti_hermitian_deviation(w: &CMatrix) -> f64 {
    let sum = w + w.adjoint();
    sum.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
