use nalgebra::SymmetricEigen;

use super::{
    hermiticity_defect, permutation_map, state::check_order, CMatrix, HilbertSpace, Operator, QuantumState, C64,
    MAX_OPERATOR_SIDE,
};
use crate::{Error, Result};

const HERMITIAN_TOLERANCE: f64 = 1e-10;
const TRACE_TOLERANCE: f64 = 1e-10;
const POSITIVITY_TOLERANCE: f64 = 1e-8;

/// Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    space: HilbertSpace,
    matrix: CMatrix,
}

impl DensityOperator {
    /// Validates hermiticity, trace and positivity.
    pub fn new(space: HilbertSpace, matrix: CMatrix) -> Result<Self> {
        let rho = Self::unchecked(space, matrix)?;
        let defect = hermiticity_defect(&rho.matrix);
        if defect > HERMITIAN_TOLERANCE {
            return Err(Error::contract(format!(
                "density matrix not Hermitian (defect {defect:.3e})"
            )));
        }
        let tr = rho.trace();
        if (tr - 1.0).abs() > TRACE_TOLERANCE {
            return Err(Error::contract(format!("density matrix has trace {tr}")));
        }
        let min = rho.eigenvalues().into_iter().fold(f64::INFINITY, f64::min);
        if min < -POSITIVITY_TOLERANCE {
            return Err(Error::contract(format!("density matrix has eigenvalue {min:.3e}")));
        }
        Ok(rho)
    }

    /// Shape checks only; for matrices produced by trace-preserving maps.
    pub(crate) fn unchecked(space: HilbertSpace, matrix: CMatrix) -> Result<Self> {
        let n = space.total_dim();
        if n > MAX_OPERATOR_SIDE {
            return Err(Error::Capacity {
                what: "density matrix side",
                requested: n,
                limit: MAX_OPERATOR_SIDE,
            });
        }
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::arg(format!(
                "{}x{} matrix for a space of dimension {n}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(DensityOperator { space, matrix })
    }

    pub fn pure(state: &QuantumState) -> Result<Self> {
        Self::unchecked(state.space().clone(), state.outer())
    }

    /// Convex combination `Σ w_i ρ_i`; weights must be nonnegative and sum to one.
    pub fn mixture(weights: &[f64], states: &[DensityOperator]) -> Result<Self> {
        if weights.len() != states.len() || states.is_empty() {
            return Err(Error::arg("mixture needs one weight per state"));
        }
        if weights.iter().any(|&w| w < 0.0) {
            return Err(Error::arg("negative mixture weight"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::arg(format!("mixture weights sum to {total}")));
        }
        let space = states[0].space.clone();
        let n = space.total_dim();
        let mut acc = CMatrix::zeros(n, n);
        for (w, rho) in weights.iter().zip(states) {
            if rho.space != space {
                return Err(Error::arg("mixture of states on different spaces"));
            }
            acc += &rho.matrix * C64::new(*w, 0.0);
        }
        Self::unchecked(space, acc)
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn purity(&self) -> f64 {
        // tr ρ² = Σ_ij |ρ_ij|² for Hermitian ρ
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.matrix)
    }

    pub fn tensor(&self, other: &DensityOperator) -> Result<DensityOperator> {
        let space = self.space.tensor(&other.space)?;
        Self::unchecked(space, self.matrix.kronecker(&other.matrix))
    }

    /// `U ρ U†`.
    pub fn conjugate(&self, u: &Operator) -> Result<DensityOperator> {
        if u.space() != &self.space {
            return Err(Error::arg("unitary acts on a different space"));
        }
        Self::unchecked(self.space.clone(), u.matrix() * &self.matrix * u.matrix().adjoint())
    }

    pub fn permute(&self, order: &[usize]) -> Result<DensityOperator> {
        check_order(&self.space, order)?;
        let map = permutation_map(&self.space, order);
        let n = map.len();
        let matrix = CMatrix::from_fn(n, n, |i, j| self.matrix[(map[i], map[j])]);
        Self::unchecked(self.space.select(order)?, matrix)
    }

    /// Reduced state on the subsystems in `keep` (kept in their original
    /// relative order).
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityOperator> {
        if keep.is_empty() {
            return Err(Error::arg("partial trace must keep at least one subsystem"));
        }
        let traced = self.space.complement(keep)?;
        let mut keep_sorted = keep.to_vec();
        keep_sorted.sort_unstable();
        let kept = self.space.offsets(&keep_sorted);
        let inner = self.space.offsets(&traced);
        let n = kept.len();
        let matrix = CMatrix::from_fn(n, n, |i, j| {
            let (ri, cj) = (kept[i], kept[j]);
            inner.iter().map(|&t| self.matrix[(ri + t, cj + t)]).sum()
        });
        Self::unchecked(self.space.select(&keep_sorted)?, matrix)
    }

    pub fn max_abs_diff(&self, other: &DensityOperator) -> f64 {
        super::max_abs_diff(&self.matrix, &other.matrix)
    }
}

pub(crate) fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let sym = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let mut ev: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}
