//! Dense complex linear algebra for n-qubit systems.
//!
//! Operators are stored as dense `N x N` matrices with `N = 2^n`. The three
//! role types ([`HermitianOperator`], [`UnitaryOperator`], [`DensityMatrix`])
//! validate their invariants on construction and are immutable afterwards.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Absolute max-entry tolerance for Hermiticity, unitarity and trace checks.
pub const VALIDATION_TOL: f64 = 1e-10;

/// Lower bound on the smallest eigenvalue of a valid density matrix.
pub const POSITIVITY_TOL: f64 = -1e-8;

/// Largest supported register size.
pub const MAX_QUBITS: usize = 10;

pub(crate) const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
pub(crate) const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };
pub(crate) const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Number of qubits in a register.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QubitCount(usize);

impl QubitCount {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_QUBITS {
            return Err(Error::Unsupported(format!(
                "qubit count {n} (supported: 1..={MAX_QUBITS})"
            )));
        }
        Ok(Self(n))
    }

    pub fn get(self) -> usize {
        self.0
    }

    /// Hilbert-space dimension `2^n`.
    pub fn dim(self) -> usize {
        1 << self.0
    }

    /// Inverse of [`QubitCount::dim`]; fails when `dim` is not a power of two.
    pub fn from_dim(dim: usize) -> Result<Self> {
        if !dim.is_power_of_two() || dim < 2 {
            return Err(Error::InvalidArgument(format!(
                "dimension {dim} is not 2^n with n >= 1"
            )));
        }
        Self::new(dim.trailing_zeros() as usize)
    }
}

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

/// Largest absolute entry.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest absolute entry of `a - b`.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// `U A U^dagger`.
pub fn conjugate(u: &CMatrix, a: &CMatrix) -> CMatrix {
    u * a * u.adjoint()
}

fn check_square(m: &CMatrix) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(())
}

fn check_same_dim(a: &CMatrix, b: &CMatrix) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: b.nrows(),
        });
    }
    Ok(())
}

/// Location and size of the largest deviation from Hermiticity.
fn hermitian_deviation(m: &CMatrix) -> (f64, usize, usize) {
    let n = m.nrows();
    let mut worst = (0.0, 0, 0);
    for r in 0..n {
        for c in r..n {
            let d = (m[(r, c)] - m[(c, r)].conj()).norm();
            if d > worst.0 {
                worst = (d, r, c);
            }
        }
    }
    worst
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted ascending.
///
/// Columns of the returned matrix are the corresponding orthonormal eigenvectors.
pub(crate) fn hermitian_eigen(m: &CMatrix) -> (DVector<f64>, CMatrix) {
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(order.len(), order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vectors = CMatrix::zeros(m.nrows(), m.ncols());
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Hermitian `N x N` operator: observables, generators, perturbation observables.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    matrix: CMatrix,
}

impl HermitianOperator {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        check_square(&matrix)?;
        let (max_dev, row, col) = hermitian_deviation(&matrix);
        if max_dev > VALIDATION_TOL {
            return Err(Error::NotHermitian { max_dev, row, col });
        }
        Ok(Self { matrix })
    }

    /// Wraps a matrix that is Hermitian by construction, removing rounding asymmetry.
    pub(crate) fn from_matrix_unchecked(matrix: CMatrix) -> Self {
        let sym = (&matrix + matrix.adjoint()).scale(0.5);
        Self { matrix: sym }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            matrix: CMatrix::zeros(dim, dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: identity(dim),
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigen(&self.matrix).0.iter().copied().collect()
    }

    /// Largest absolute eigenvalue.
    pub fn spectral_norm(&self) -> f64 {
        let ev = self.eigenvalues();
        ev.first()
            .map(|lo| lo.abs().max(ev[ev.len() - 1].abs()))
            .unwrap_or(0.0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            matrix: self.matrix.scale(factor),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_same_dim(&self.matrix, &other.matrix)?;
        Ok(Self {
            matrix: &self.matrix + &other.matrix,
        })
    }

    /// `U H U^dagger`; Hermitian for any unitary `U`.
    pub fn conjugated_by(&self, u: &CMatrix) -> Self {
        Self::from_matrix_unchecked(conjugate(u, &self.matrix))
    }

    pub fn is_traceless(&self) -> bool {
        trace(&self.matrix).norm() <= VALIDATION_TOL
    }
}

/// Unitary `N x N` operator.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryOperator {
    matrix: CMatrix,
}

impl UnitaryOperator {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        check_square(&matrix)?;
        let dev = unitarity_deviation(&matrix);
        if dev > VALIDATION_TOL {
            return Err(Error::NotUnitary(dev));
        }
        Ok(Self { matrix })
    }

    pub(crate) fn from_matrix_unchecked(matrix: CMatrix) -> Self {
        Self { matrix }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: identity(dim),
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn dagger(&self) -> Self {
        Self {
            matrix: self.matrix.adjoint(),
        }
    }

    /// `self * other` (`other` acts first).
    pub fn compose(&self, other: &Self) -> Result<Self> {
        check_same_dim(&self.matrix, &other.matrix)?;
        Ok(Self {
            matrix: &self.matrix * &other.matrix,
        })
    }
}

/// `max |U^dagger U - I|`.
pub fn unitarity_deviation(u: &CMatrix) -> f64 {
    max_abs_diff(&(u.adjoint() * u), &identity(u.nrows()))
}

/// Mixed or pure quantum state.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        check_square(&matrix)?;
        validate_density(&matrix)?;
        Ok(Self { matrix })
    }

    /// Wraps a matrix produced by a trace-preserving map of a valid state.
    pub(crate) fn from_matrix_unchecked(matrix: CMatrix) -> Self {
        Self { matrix }
    }

    /// `|psi><psi|` for a normalized state vector.
    pub fn from_state_vector(psi: &DVector<Complex64>) -> Result<Self> {
        let norm = psi.norm();
        if (norm - 1.0).abs() > VALIDATION_TOL {
            return Err(Error::InvalidDensity(format!(
                "state vector norm {norm} is not 1"
            )));
        }
        Self::new(psi * psi.adjoint())
    }

    /// Computational basis state `|index><index|`.
    pub fn basis_state(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::IndexOutOfRange {
                what: "basis state",
                index,
                len: dim,
            });
        }
        let mut m = CMatrix::zeros(dim, dim);
        m[(index, index)] = ONE;
        Ok(Self { matrix: m })
    }

    /// `|0...0><0...0|`.
    pub fn zero_state(n: QubitCount) -> Self {
        let mut m = CMatrix::zeros(n.dim(), n.dim());
        m[(0, 0)] = ONE;
        Self { matrix: m }
    }

    /// `|+...+><+...+|`, all entries `1/N`.
    pub fn plus_state(n: QubitCount) -> Self {
        let dim = n.dim();
        let v = Complex64::new(1.0 / dim as f64, 0.0);
        Self {
            matrix: CMatrix::from_element(dim, dim, v),
        }
    }

    /// `I / N`.
    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            matrix: identity(dim).scale(1.0 / dim as f64),
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        trace(&self.matrix).re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigen(&self.matrix).0[0]
    }

    /// Re-checks every density-matrix invariant.
    pub fn validate(&self) -> Result<()> {
        validate_density(&self.matrix)
    }
}

fn validate_density(m: &CMatrix) -> Result<()> {
    let (max_dev, row, col) = hermitian_deviation(m);
    if max_dev > VALIDATION_TOL {
        return Err(Error::InvalidDensity(format!(
            "not Hermitian: deviation {max_dev:.3e} at ({row}, {col})"
        )));
    }
    let tr = trace(m);
    if (tr.re - 1.0).abs() > VALIDATION_TOL || tr.im.abs() > VALIDATION_TOL {
        return Err(Error::InvalidDensity(format!("trace {tr} is not 1")));
    }
    let min_ev = hermitian_eigen(m).0[0];
    if min_ev < POSITIVITY_TOL {
        return Err(Error::InvalidDensity(format!(
            "negative eigenvalue {min_ev:.3e}"
        )));
    }
    Ok(())
}

/// `exp(-i * scale * H)` via the eigen-decomposition of `H`.
pub fn hermitian_exp(h: &HermitianOperator, scale: f64) -> UnitaryOperator {
    UnitaryOperator::from_matrix_unchecked(exp_i_hermitian(h.matrix(), scale))
}

/// Matrix-level kernel of [`hermitian_exp`]; `h` must be Hermitian.
pub(crate) fn exp_i_hermitian(h: &CMatrix, scale: f64) -> CMatrix {
    let dim = h.nrows();
    if scale == 0.0 {
        return identity(dim);
    }
    let (values, vectors) = hermitian_eigen(h);
    let mut scaled = vectors.clone();
    for (c, lambda) in values.iter().enumerate() {
        let phase = Complex64::from_polar(1.0, -scale * lambda);
        for r in 0..dim {
            scaled[(r, c)] *= phase;
        }
    }
    scaled * vectors.adjoint()
}

/// `Tr[O rho]`, discarding the (rounding-level) imaginary part.
pub fn expectation(o: &HermitianOperator, rho: &DensityMatrix) -> Result<f64> {
    check_same_dim(o.matrix(), rho.matrix())?;
    Ok(trace_product(o.matrix(), rho.matrix()).re)
}

/// `Tr[A B]` without forming the product.
pub(crate) fn trace_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for r in 0..n {
        for c in 0..n {
            acc += a[(r, c)] * b[(c, r)];
        }
    }
    acc
}

/// `[A, B] = AB - BA`.
pub fn commutator(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    check_square(a)?;
    check_same_dim(a, b)?;
    Ok(a * b - b * a)
}

/// Hilbert-Schmidt inner product `Tr[A^dagger B]`.
pub fn hs_inner(a: &CMatrix, b: &CMatrix) -> Result<Complex64> {
    check_same_dim(a, b)?;
    Ok(a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum())
}

/// Seeded random Hermitian matrix `(A + A^dagger) / 2` with i.i.d. standard
/// normal real and imaginary parts in `A`.
pub fn random_hermitian(n: QubitCount, seed: u64) -> HermitianOperator {
    let dim = n.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = CMatrix::from_fn(dim, dim, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        Complex64::new(re, im)
    });
    HermitianOperator::from_matrix_unchecked(a)
}

/// Smallest eigenvalue of `O`.
pub fn ground_energy(o: &HermitianOperator) -> f64 {
    hermitian_eigen(o.matrix()).0[0]
}
