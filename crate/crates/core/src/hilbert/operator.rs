use super::{
    hermiticity_defect, permutation_map, state::check_order, CMatrix, HilbertSpace, C64, I, MAX_OPERATOR_SIDE, ONE,
    ZERO,
};
use crate::{Error, Result};

const HERMITIAN_TOLERANCE: f64 = 1e-12;

/// Dense linear operator. The Hermitian flag is set on construction when
/// the matrix equals its adjoint to within `1e-12`.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    space: HilbertSpace,
    matrix: CMatrix,
    hermitian: bool,
}

impl Operator {
    pub fn new(space: HilbertSpace, matrix: CMatrix) -> Result<Self> {
        let n = space.total_dim();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::arg(format!(
                "{}x{} matrix for a space of dimension {n}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if n > MAX_OPERATOR_SIDE {
            return Err(Error::Capacity {
                what: "dense operator side",
                requested: n,
                limit: MAX_OPERATOR_SIDE,
            });
        }
        let hermitian = hermiticity_defect(&matrix) <= HERMITIAN_TOLERANCE;
        Ok(Operator {
            space,
            matrix,
            hermitian,
        })
    }

    /// Like [`Operator::new`] but fails unless the matrix is Hermitian.
    pub fn hermitian(space: HilbertSpace, matrix: CMatrix) -> Result<Self> {
        let op = Self::new(space, matrix)?;
        if !op.hermitian {
            return Err(Error::contract(format!(
                "matrix is not Hermitian (defect {:.3e})",
                hermiticity_defect(&op.matrix)
            )));
        }
        Ok(op)
    }

    /// Single-subsystem operator from a square matrix.
    pub fn from_matrix(matrix: CMatrix) -> Result<Self> {
        let space = HilbertSpace::single(matrix.nrows())?;
        Self::new(space, matrix)
    }

    pub fn identity(space: HilbertSpace) -> Self {
        let n = space.total_dim();
        Operator {
            space,
            matrix: CMatrix::identity(n, n),
            hermitian: true,
        }
    }

    pub fn zero(space: HilbertSpace) -> Self {
        let n = space.total_dim();
        Operator {
            space,
            matrix: CMatrix::zeros(n, n),
            hermitian: true,
        }
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn tensor(&self, other: &Operator) -> Result<Operator> {
        let space = self.space.tensor(&other.space)?;
        Self::new(space, self.matrix.kronecker(&other.matrix))
    }

    pub fn adjoint(&self) -> Operator {
        Operator {
            space: self.space.clone(),
            matrix: self.matrix.adjoint(),
            hermitian: self.hermitian,
        }
    }

    pub fn scale(&self, factor: f64) -> Operator {
        Operator {
            space: self.space.clone(),
            matrix: &self.matrix * C64::new(factor, 0.0),
            hermitian: self.hermitian,
        }
    }

    pub fn add(&self, other: &Operator) -> Result<Operator> {
        self.same_space(other)?;
        Self::new(self.space.clone(), &self.matrix + &other.matrix)
    }

    pub fn mul(&self, other: &Operator) -> Result<Operator> {
        self.same_space(other)?;
        Self::new(self.space.clone(), &self.matrix * &other.matrix)
    }

    /// `[self, other] / (i ħ)`, Hermitian whenever both inputs are.
    pub fn commutator_over_ihbar(&self, other: &Operator, hbar: f64) -> Result<Operator> {
        self.same_space(other)?;
        let comm = &self.matrix * &other.matrix - &other.matrix * &self.matrix;
        Self::new(self.space.clone(), comm * (-I / hbar))
    }

    /// Largest deviation of `U†U` from the identity.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.matrix.nrows();
        let prod = self.matrix.adjoint() * &self.matrix;
        super::max_abs_diff(&prod, &CMatrix::identity(n, n))
    }

    /// Reorders subsystems on both indices.
    pub fn permute(&self, order: &[usize]) -> Result<Operator> {
        check_order(&self.space, order)?;
        let map = permutation_map(&self.space, order);
        let n = map.len();
        let matrix = CMatrix::from_fn(n, n, |i, j| self.matrix[(map[i], map[j])]);
        Ok(Operator {
            space: self.space.select(order)?,
            matrix,
            hermitian: self.hermitian,
        })
    }

    fn same_space(&self, other: &Operator) -> Result<()> {
        if self.space != other.space {
            return Err(Error::arg("operators act on different spaces"));
        }
        Ok(())
    }
}

fn qubit(entries: [C64; 4]) -> Operator {
    Operator {
        space: HilbertSpace { dims: vec![2] },
        matrix: CMatrix::from_row_slice(2, 2, &entries),
        hermitian: true,
    }
}

pub fn pauli_x() -> Operator {
    qubit([ZERO, ONE, ONE, ZERO])
}

pub fn pauli_y() -> Operator {
    qubit([ZERO, -I, I, ZERO])
}

pub fn pauli_z() -> Operator {
    qubit([ONE, ZERO, ZERO, -ONE])
}
