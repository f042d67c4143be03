//! Dense finite-dimensional quantum mechanics.
//!
//! Subsystems are ordered and composite indices are row major: the first
//! subsystem is the most significant digit, which matches the Kronecker
//! product convention `a ⊗ b`.

mod density;
mod entanglement;
mod expm;
mod operator;
pub mod random;
mod state;

pub use density::DensityOperator;
pub use entanglement::{negativity, schmidt, EntanglementReport};
pub use expm::{expm_apply, unitary};
pub use operator::{pauli_x, pauli_y, pauli_z, Operator};
pub use state::QuantumState;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Largest total dimension of a state vector.
pub const MAX_TOTAL_DIM: usize = 1 << 20;
/// Largest side of a dense operator matrix.
pub const MAX_OPERATOR_SIDE: usize = 4096;
/// Largest side for which exponentials go through a full eigendecomposition.
pub const EIGEN_EXPM_LIMIT: usize = 1024;
/// Values at or below this are treated as zero for ranks and entropies.
pub const ZERO_FLOOR: f64 = 1e-12;

pub(crate) const I: C64 = C64 { re: 0.0, im: 1.0 };
pub(crate) const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub(crate) const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Ordered list of subsystem dimensions.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct HilbertSpace {
    dims: Vec<usize>,
}

impl HilbertSpace {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::arg("a Hilbert space needs at least one subsystem"));
        }
        if let Some(pos) = dims.iter().position(|&d| d == 0) {
            return Err(Error::arg(format!("subsystem {pos} has dimension 0")));
        }
        let mut total: usize = 1;
        for &d in &dims {
            total = total
                .checked_mul(d)
                .filter(|&t| t <= MAX_TOTAL_DIM)
                .ok_or(Error::Capacity {
                    what: "Hilbert space dimension",
                    requested: dims.iter().fold(1usize, |a, &d| a.saturating_mul(d)),
                    limit: MAX_TOTAL_DIM,
                })?;
        }
        Ok(HilbertSpace { dims })
    }

    pub fn single(dim: usize) -> Result<Self> {
        Self::new(vec![dim])
    }

    pub fn qubits(n: usize) -> Result<Self> {
        Self::new(vec![2; n])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn num_subsystems(&self) -> usize {
        self.dims.len()
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    /// Space of `self ⊗ other`.
    pub fn tensor(&self, other: &HilbertSpace) -> Result<HilbertSpace> {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        HilbertSpace::new(dims)
    }

    /// Subspace made of the listed subsystems, in the listed order.
    pub fn select(&self, subsystems: &[usize]) -> Result<HilbertSpace> {
        let dims = subsystems
            .iter()
            .map(|&s| {
                self.dims
                    .get(s)
                    .copied()
                    .ok_or_else(|| Error::arg(format!("subsystem {s} out of range for {} subsystems", self.dims.len())))
            })
            .collect::<Result<Vec<_>>>()?;
        HilbertSpace::new(dims)
    }

    /// Composite index of every basis state of the selected subsystems,
    /// embedded in the full space with all other digits zero.
    pub(crate) fn offsets(&self, subsystems: &[usize]) -> Vec<usize> {
        let strides = self.strides();
        let mut offsets = vec![0usize];
        for &s in subsystems {
            let mut next = Vec::with_capacity(offsets.len() * self.dims[s]);
            for &o in &offsets {
                for digit in 0..self.dims[s] {
                    next.push(o + digit * strides[s]);
                }
            }
            offsets = next;
        }
        offsets
    }

    pub(crate) fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1usize; self.dims.len()];
        for i in (0..self.dims.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.dims[i + 1];
        }
        strides
    }

    /// Subsystems not listed in `keep`, in ascending order. Validates `keep`.
    pub(crate) fn complement(&self, keep: &[usize]) -> Result<Vec<usize>> {
        let n = self.dims.len();
        let mut seen = vec![false; n];
        for &k in keep {
            if k >= n {
                return Err(Error::arg(format!("subsystem {k} out of range for {n} subsystems")));
            }
            if seen[k] {
                return Err(Error::arg(format!("subsystem {k} listed twice")));
            }
            seen[k] = true;
        }
        Ok((0..n).filter(|&i| !seen[i]).collect())
    }
}

/// Split of the subsystems into a left group and its complement.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bipartition {
    left: Vec<usize>,
}

impl Bipartition {
    pub fn new(left: Vec<usize>) -> Self {
        Bipartition { left }
    }

    /// First `n` subsystems against the rest.
    pub fn first(n: usize) -> Self {
        Bipartition { left: (0..n).collect() }
    }

    pub fn left(&self) -> &[usize] {
        &self.left
    }

    /// Permutation bringing the left group to the front, plus the left and
    /// right dimensions after the permutation.
    pub(crate) fn resolve(&self, space: &HilbertSpace) -> Result<(Vec<usize>, usize, usize)> {
        let right = space.complement(&self.left)?;
        if self.left.is_empty() || right.is_empty() {
            return Err(Error::arg("both sides of a bipartition must be nonempty"));
        }
        let dl: usize = self.left.iter().map(|&i| space.dims()[i]).product();
        let dr: usize = right.iter().map(|&i| space.dims()[i]).product();
        let mut order = self.left.clone();
        order.extend(right);
        Ok((order, dl, dr))
    }
}

/// Index map for reordering subsystems: entry `i` of the result is the old
/// composite index of new composite index `i`.
pub(crate) fn permutation_map(space: &HilbertSpace, order: &[usize]) -> Vec<usize> {
    space.offsets(order)
}

pub(crate) fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub(crate) fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}
