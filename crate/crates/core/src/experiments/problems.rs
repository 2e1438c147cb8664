//! Problem generators for the sweeps and the CLI.

use serde::{Deserialize, Serialize};

use crate::ansatz::{build_locally_surjective, build_qaoa, maxcut_hamiltonian, Circuit, Layer, ProductLayer};
use crate::engine::VQEProblem;
use crate::error::Result;
use crate::operators::{random_hermitian, DensityMatrix, QubitCount};
use crate::pauli::{Pauli, PauliString};

/// Random Hermitian observable with the locally surjective ansatz, from
/// `|0...0>`.
pub fn make_random_vqe(n: usize, depth: usize, seed: u64) -> Result<VQEProblem> {
    let circuit = build_locally_surjective(n, depth)?;
    let q = circuit.qubits();
    VQEProblem::new(random_hermitian(q, seed), DensityMatrix::zero_state(q), circuit)
}

/// MaxCut QAOA with cost `sum_{(a,b)} Z_a Z_b` and mixer `sum_i X_i`, from
/// `|+...+>`. Minimizing the cost maximizes the cut.
pub fn make_qaoa_maxcut(n: usize, edges: &[(usize, usize)], depth: usize) -> Result<VQEProblem> {
    let circuit = build_qaoa(n, edges, depth)?;
    let q = circuit.qubits();
    VQEProblem::new(maxcut_hamiltonian(n, edges)?, DensityMatrix::plus_state(q), circuit)
}

/// One qubit, generator `Y/2`, observable `Z`, input `|0>`:
/// cost `cos(theta) + 1` with minimum at `pi`.
pub fn make_closed_form() -> Result<VQEProblem> {
    let q = QubitCount::new(1)?;
    let y = PauliString::single(1, 0, Pauli::Y, 0.5)?.to_operator();
    let z = PauliString::single(1, 0, Pauli::Z, 1.0)?.to_operator();
    let circuit = Circuit::new(q, vec![Layer::Product(ProductLayer::new(vec![y])?)])?;
    VQEProblem::new(z, DensityMatrix::zero_state(q), circuit)
}

fn default_random_depth() -> usize {
    2
}

fn default_qaoa_depth() -> usize {
    30
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemSpec {
    RandomVqe {
        n: usize,
        #[serde(default = "default_random_depth")]
        layers: usize,
        #[serde(default)]
        seed: u64,
    },
    QaoaMaxcut {
        n: usize,
        edges: Vec<(usize, usize)>,
        #[serde(default = "default_qaoa_depth")]
        layers: usize,
    },
    ClosedForm,
}

impl ProblemSpec {
    pub fn build(&self) -> Result<VQEProblem> {
        match self {
            ProblemSpec::RandomVqe { n, layers, seed } => make_random_vqe(*n, *layers, *seed),
            ProblemSpec::QaoaMaxcut { n, edges, layers } => make_qaoa_maxcut(*n, edges, *layers),
            ProblemSpec::ClosedForm => make_closed_form(),
        }
    }

    /// Short identifier written to the `problem_id` column.
    pub fn id(&self) -> String {
        match self {
            ProblemSpec::RandomVqe { n, layers, seed } => format!("random_vqe_n{n}_L{layers}_s{seed}"),
            ProblemSpec::QaoaMaxcut { n, edges, layers } => {
                format!("qaoa_maxcut_n{n}_e{}_L{layers}", edges.len())
            }
            ProblemSpec::ClosedForm => "closed_form".to_string(),
        }
    }

    pub fn set_seed(&mut self, new_seed: u64) {
        if let ProblemSpec::RandomVqe { seed, .. } = self {
            *seed = new_seed;
        }
    }
}
