use super::{permutation_map, CMatrix, CVector, HilbertSpace, Operator, C64, ONE, ZERO};
use crate::{Error, Result};

const NORM_TOLERANCE: f64 = 1e-12;

/// Normalised pure state on a composite space.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumState {
    space: HilbertSpace,
    amplitudes: CVector,
}

impl QuantumState {
    /// Wraps amplitudes that are already normalised.
    pub fn new(space: HilbertSpace, amplitudes: CVector) -> Result<Self> {
        check_len(&space, amplitudes.len())?;
        let norm_sqr = amplitudes.norm_squared();
        if (norm_sqr - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::contract(format!(
                "state has squared norm {norm_sqr}, expected 1"
            )));
        }
        Ok(QuantumState { space, amplitudes })
    }

    /// Normalises the given amplitudes.
    pub fn normalized(space: HilbertSpace, amplitudes: CVector) -> Result<Self> {
        check_len(&space, amplitudes.len())?;
        let norm = amplitudes.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::contract(format!("cannot normalise a vector of norm {norm}")));
        }
        Ok(QuantumState {
            space,
            amplitudes: amplitudes.unscale(norm),
        })
    }

    pub fn from_slice(space: HilbertSpace, amplitudes: &[C64]) -> Result<Self> {
        Self::normalized(space, CVector::from_column_slice(amplitudes))
    }

    pub fn basis(space: HilbertSpace, index: usize) -> Result<Self> {
        let n = space.total_dim();
        if index >= n {
            return Err(Error::arg(format!("basis index {index} out of range {n}")));
        }
        let mut amplitudes = CVector::from_element(n, ZERO);
        amplitudes[index] = ONE;
        Ok(QuantumState { space, amplitudes })
    }

    /// Product of single-subsystem states, in order.
    pub fn product(factors: &[QuantumState]) -> Result<Self> {
        let (first, rest) = factors
            .split_first()
            .ok_or_else(|| Error::arg("product of zero states"))?;
        rest.iter().try_fold(first.clone(), |acc, f| acc.tensor(f))
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> CVector {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn tensor(&self, other: &QuantumState) -> Result<QuantumState> {
        let space = self.space.tensor(&other.space)?;
        Ok(QuantumState {
            space,
            amplitudes: self.amplitudes.kronecker(&other.amplitudes),
        })
    }

    pub fn inner(&self, other: &QuantumState) -> Result<C64> {
        if self.space != other.space {
            return Err(Error::arg("inner product between different spaces"));
        }
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// `|⟨self|other⟩|`.
    pub fn fidelity(&self, other: &QuantumState) -> Result<f64> {
        Ok(self.inner(other)?.norm())
    }

    /// `⟨ψ|A|ψ⟩`, real part only when `A` is Hermitian.
    pub fn expectation(&self, op: &Operator) -> Result<C64> {
        if op.space() != &self.space {
            return Err(Error::arg("operator and state live on different spaces"));
        }
        Ok(self.amplitudes.dotc(&(op.matrix() * &self.amplitudes)))
    }

    /// Reorders subsystems: subsystem `order[i]` of `self` becomes subsystem `i`.
    pub fn permute(&self, order: &[usize]) -> Result<QuantumState> {
        check_order(&self.space, order)?;
        let map = permutation_map(&self.space, order);
        let space = self.space.select(order)?;
        let amplitudes = CVector::from_iterator(map.len(), map.iter().map(|&i| self.amplitudes[i]));
        Ok(QuantumState { space, amplitudes })
    }

    /// Amplitudes reshaped into a `left × right` matrix for the given leading
    /// subsystems (after reordering `order`).
    pub(crate) fn bipartite_matrix(&self, order: &[usize], dl: usize, dr: usize) -> Result<CMatrix> {
        let p = self.permute(order)?;
        Ok(CMatrix::from_fn(dl, dr, |i, j| p.amplitudes[i * dr + j]))
    }

    pub fn outer(&self) -> CMatrix {
        &self.amplitudes * self.amplitudes.adjoint()
    }
}

fn check_len(space: &HilbertSpace, len: usize) -> Result<()> {
    if space.total_dim() != len {
        return Err(Error::arg(format!(
            "{} amplitudes for a space of dimension {}",
            len,
            space.total_dim()
        )));
    }
    Ok(())
}

pub(crate) fn check_order(space: &HilbertSpace, order: &[usize]) -> Result<()> {
    if order.len() != space.num_subsystems() || !space.complement(order)?.is_empty() {
        return Err(Error::arg(format!(
            "{order:?} is not a permutation of {} subsystems",
            space.num_subsystems()
        )));
    }
    Ok(())
}
