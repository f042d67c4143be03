use nalgebra::SymmetricEigen;

use super::{CMatrix, CVector, Operator, QuantumState, C64, EIGEN_EXPM_LIMIT, I};
use crate::{Error, Result};

/// `e^{-itH/ħ} |ψ⟩` for Hermitian `H`.
///
/// Up to [`EIGEN_EXPM_LIMIT`] the exponential goes through a Hermitian
/// eigendecomposition. Larger operators use a truncated Taylor series of the
/// action on the vector, with the time interval split so that every substep
/// has `‖τH/ħ‖₁ ≤ 1`.
pub fn expm_apply(h: &Operator, t: f64, psi: &QuantumState, hbar: f64) -> Result<QuantumState> {
    if !h.is_hermitian() {
        return Err(Error::contract("time evolution requires a Hermitian generator"));
    }
    if h.space() != psi.space() {
        return Err(Error::arg("Hamiltonian and state live on different spaces"));
    }
    if t == 0.0 {
        return Ok(psi.clone());
    }
    let out = if h.space().total_dim() <= EIGEN_EXPM_LIMIT {
        let eig = SymmetricEigen::new(h.matrix().clone());
        let coeffs = eig.eigenvectors.adjoint() * psi.amplitudes();
        let phased = CVector::from_iterator(
            coeffs.len(),
            coeffs
                .iter()
                .zip(eig.eigenvalues.iter())
                .map(|(c, &lambda)| c * (-I * (t * lambda / hbar)).exp()),
        );
        &eig.eigenvectors * phased
    } else {
        taylor_action(h.matrix(), C64::new(0.0, -t / hbar), psi.amplitudes())
    };
    let drift = (out.norm() - 1.0).abs();
    if drift > 1e-10 {
        return Err(Error::contract(format!(
            "exponential lost unitarity (norm drift {drift:.3e})"
        )));
    }
    QuantumState::normalized(psi.space().clone(), out)
}

/// Dense `e^{-itH/ħ}` for Hermitian `H`, via eigendecomposition.
pub fn unitary(h: &Operator, t: f64, hbar: f64) -> Result<Operator> {
    if !h.is_hermitian() {
        return Err(Error::contract("time evolution requires a Hermitian generator"));
    }
    let eig = SymmetricEigen::new(h.matrix().clone());
    let phases = CVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| (-I * (t * l / hbar)).exp()),
    );
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (j, p) in phases.iter().enumerate() {
        for i in 0..scaled.nrows() {
            scaled[(i, j)] *= p;
        }
    }
    Operator::new(h.space().clone(), scaled * v.adjoint())
}

fn one_norm(m: &CMatrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `e^{zA} v` by substepped Taylor series.
fn taylor_action(a: &CMatrix, z: C64, v: &CVector) -> CVector {
    let scale = z.norm() * one_norm(a);
    let steps = scale.ceil().max(1.0) as usize;
    let tau = z / steps as f64;
    let mut out = v.clone();
    for _ in 0..steps {
        let mut term = out.clone();
        let mut acc = out.clone();
        for k in 1..200 {
            term = (a * &term) * (tau / k as f64);
            acc += &term;
            if term.norm() <= 1e-17 * acc.norm() {
                break;
            }
        }
        out = acc;
    }
    out
}
