//! Seeded random states, unitaries and observables.

use rand::Rng;
use rand_distr::StandardNormal;

use super::{CMatrix, CVector, DensityOperator, HilbertSpace, Operator, QuantumState, C64};

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

fn ginibre<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(n, n, |_, _| gaussian(rng))
}

/// Haar-distributed unitary: QR of a complex Ginibre matrix with the phases
/// of `R`'s diagonal moved into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let qr = ginibre(n, rng).qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            C64::new(1.0, 0.0)
        };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

pub fn haar_operator<R: Rng + ?Sized>(space: &HilbertSpace, rng: &mut R) -> Operator {
    Operator::new(space.clone(), haar_unitary(space.total_dim(), rng)).expect("dimensions match by construction")
}

/// Uniformly distributed pure state.
pub fn random_state<R: Rng + ?Sized>(space: &HilbertSpace, rng: &mut R) -> QuantumState {
    let n = space.total_dim();
    let v = CVector::from_fn(n, |_, _| gaussian(rng));
    QuantumState::normalized(space.clone(), v).expect("gaussian vector is nonzero")
}

/// Full-rank mixed state `G G† / tr(G G†)` on a single subsystem.
pub fn random_density<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DensityOperator {
    let g = ginibre(n, rng);
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    DensityOperator::unchecked(HilbertSpace::single(n).expect("n ≥ 1"), m.unscale(tr)).expect("shape matches")
}

/// GUE-like Hermitian matrix `(G + G†)/2`.
pub fn random_hermitian<R: Rng + ?Sized>(space: &HilbertSpace, rng: &mut R) -> Operator {
    let g = ginibre(space.total_dim(), rng);
    let h = (&g + g.adjoint()) * C64::new(0.5, 0.0);
    Operator::hermitian(space.clone(), h).expect("symmetrised matrix is Hermitian")
}
