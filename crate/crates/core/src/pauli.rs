//! Pauli strings as a compact way to build generators and observables.
//!
//! Qubit 0 is the leftmost tensor factor, so `|q0 q1 ... q_{n-1}>` indexes the
//! computational basis with qubit 0 as the most significant bit.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operators::{CMatrix, HermitianOperator, I, ONE, ZERO};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn matrix(self) -> CMatrix {
        match self {
            Pauli::I => CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, ONE]),
            Pauli::X => CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
            Pauli::Y => CMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]),
            Pauli::Z => CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
        }
    }

    fn letter(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// `coefficient * P_0 ⊗ P_1 ⊗ ... ⊗ P_{n-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliString {
    letters: Vec<Pauli>,
    coefficient: f64,
}

impl PauliString {
    pub fn new(letters: Vec<Pauli>, coefficient: f64) -> Self {
        Self {
            letters,
            coefficient,
        }
    }

    /// `coefficient * P` acting on `qubit` of an `n`-qubit register.
    pub fn single(n: usize, qubit: usize, p: Pauli, coefficient: f64) -> Result<Self> {
        Self::sparse(n, &[(qubit, p)], coefficient)
    }

    /// Identity everywhere except the listed `(qubit, letter)` pairs.
    pub fn sparse(n: usize, ops: &[(usize, Pauli)], coefficient: f64) -> Result<Self> {
        let mut letters = vec![Pauli::I; n];
        for &(q, p) in ops {
            if q >= n {
                return Err(Error::IndexOutOfRange {
                    what: "qubit",
                    index: q,
                    len: n,
                });
            }
            letters[q] = p;
        }
        Ok(Self::new(letters, coefficient))
    }

    pub fn num_qubits(&self) -> usize {
        self.letters.len()
    }

    pub fn letters(&self) -> &[Pauli] {
        &self.letters
    }

    pub fn coefficient(&self) -> f64 {
        self.coefficient
    }

    pub fn is_identity(&self) -> bool {
        self.letters.iter().all(|&p| p == Pauli::I)
    }

    pub fn matrix(&self) -> CMatrix {
        let mut acc = CMatrix::from_element(1, 1, Complex64::new(self.coefficient, 0.0));
        for p in &self.letters {
            acc = acc.kronecker(&p.matrix());
        }
        acc
    }

    pub fn to_operator(&self) -> HermitianOperator {
        HermitianOperator::from_matrix_unchecked(self.matrix())
    }

    /// All `4^n` unit-coefficient strings in lexicographic `I < X < Y < Z` order.
    pub fn all(n: usize) -> impl Iterator<Item = PauliString> {
        (0..4usize.pow(n as u32)).map(move |mut code| {
            let mut letters = vec![Pauli::I; n];
            for slot in letters.iter_mut().rev() {
                *slot = Pauli::ALL[code % 4];
                code /= 4;
            }
            PauliString::new(letters, 1.0)
        })
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}*", self.coefficient)?;
        for p in &self.letters {
            write!(f, "{}", p.letter())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    /// Parses a letter sequence such as `"XZI"` with coefficient 1.
    fn from_str(s: &str) -> Result<Self> {
        let letters = s
            .chars()
            .map(|c| match c.to_ascii_uppercase() {
                'I' => Ok(Pauli::I),
                'X' => Ok(Pauli::X),
                'Y' => Ok(Pauli::Y),
                'Z' => Ok(Pauli::Z),
                other => Err(Error::InvalidArgument(format!(
                    "invalid Pauli letter '{other}'"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        if letters.is_empty() {
            return Err(Error::InvalidArgument("empty Pauli string".into()));
        }
        Ok(Self::new(letters, 1.0))
    }
}

/// Sum of Pauli strings as a Hermitian operator on `n` qubits.
pub fn pauli_sum(n: usize, terms: &[PauliString]) -> Result<HermitianOperator> {
    let dim = 1usize << n;
    let mut acc = CMatrix::zeros(dim, dim);
    for t in terms {
        if t.num_qubits() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: t.num_qubits(),
            });
        }
        acc += t.matrix();
    }
    Ok(HermitianOperator::from_matrix_unchecked(acc))
}
