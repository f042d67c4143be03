use serde::{Deserialize, Serialize};

use super::density::hermitian_eigenvalues;
use super::{Bipartition, CMatrix, DensityOperator, QuantumState, ZERO_FLOOR};
use crate::{Error, Result};

const PURE_NORM_TOLERANCE: f64 = 1e-10;

/// Entanglement across one bipartition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntanglementReport {
    /// Schmidt coefficients, descending. Empty for mixed-state reports.
    pub schmidt_values: Vec<f64>,
    /// Von Neumann entropy of either reduced state, in nats.
    pub entropy: f64,
    pub negativity: f64,
    /// Purity of the reduced state.
    pub purity: f64,
}

impl EntanglementReport {
    /// Report for a mixed state: only negativity and the global purity are
    /// meaningful.
    pub fn mixed(rho: &DensityOperator, cut: &Bipartition) -> Result<Self> {
        Ok(EntanglementReport {
            schmidt_values: Vec::new(),
            entropy: 0.0,
            negativity: negativity(rho, cut)?,
            purity: rho.purity(),
        })
    }

    pub fn schmidt_rank(&self) -> usize {
        self.schmidt_values.iter().filter(|&&s| s > ZERO_FLOOR).count()
    }
}

/// Schmidt decomposition of a pure state across `cut`.
///
/// For a pure state the negativity follows from the Schmidt coefficients,
/// `((Σλ)² − 1)/2`, which is what is reported; it equals the partial
/// transpose value of `|ψ⟩⟨ψ|` without forming that matrix.
pub fn schmidt(psi: &QuantumState, cut: &Bipartition) -> Result<EntanglementReport> {
    let norm_sqr = psi.amplitudes().norm_squared();
    if (norm_sqr - 1.0).abs() > PURE_NORM_TOLERANCE {
        return Err(Error::contract(format!("state has squared norm {norm_sqr}")));
    }
    let (order, dl, dr) = cut.resolve(psi.space())?;
    let m = psi.bipartite_matrix(&order, dl, dr)?;
    Ok(report_from_matrix(m))
}

/// Report from a `left × right` amplitude matrix of a normalised state.
pub(crate) fn report_from_matrix(m: CMatrix) -> EntanglementReport {
    let mut values: Vec<f64> = m.svd(false, false).singular_values.iter().copied().collect();
    values.sort_by(|a, b| b.total_cmp(a));
    let mut entropy = 0.0;
    let mut sum = 0.0;
    let mut purity = 0.0;
    for &l in &values {
        if l > ZERO_FLOOR {
            let p = l * l;
            entropy -= p * p.ln();
            sum += l;
            purity += p * p;
        }
    }
    EntanglementReport {
        schmidt_values: values,
        entropy: entropy.max(0.0),
        negativity: ((sum * sum - 1.0) / 2.0).max(0.0),
        purity,
    }
}

/// `(‖ρ^{T_B}‖₁ − 1)/2` with `B` the right side of `cut`.
pub fn negativity(rho: &DensityOperator, cut: &Bipartition) -> Result<f64> {
    let (order, dl, dr) = cut.resolve(rho.space())?;
    let p = rho.permute(&order)?;
    let m = p.matrix();
    let pt = CMatrix::from_fn(dl * dr, dl * dr, |row, col| {
        let (a, b) = (row / dr, row % dr);
        let (a2, b2) = (col / dr, col % dr);
        m[(a * dr + b2, a2 * dr + b)]
    });
    let trace_norm: f64 = hermitian_eigenvalues(&pt).iter().map(|l| l.abs()).sum();
    Ok(((trace_norm - 1.0) / 2.0).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::random::{haar_operator, random_density, random_state};
    use crate::hilbert::{HilbertSpace, Operator, C64};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_1_SQRT_2, LN_2};

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn bell() -> QuantumState {
        QuantumState::from_slice(HilbertSpace::qubits(2).unwrap(), &[c(1.0), c(0.0), c(0.0), c(1.0)]).unwrap()
    }

    /// Partial transpose spectrum written out entry by entry on a 4x4 matrix.
    fn brute_negativity_2x2(m: &CMatrix) -> f64 {
        let mut pt = CMatrix::zeros(4, 4);
        for a in 0..2 {
            for b in 0..2 {
                for a2 in 0..2 {
                    for b2 in 0..2 {
                        pt[(2 * a + b, 2 * a2 + b2)] = m[(2 * a + b2, 2 * a2 + b)];
                    }
                }
            }
        }
        let ev = nalgebra::SymmetricEigen::new(pt).eigenvalues;
        -ev.iter().filter(|&&l| l < 0.0).sum::<f64>()
    }

    #[test]
    fn product_state_report() {
        let q = HilbertSpace::single(2).unwrap();
        let psi = QuantumState::basis(q.clone(), 0)
            .unwrap()
            .tensor(&QuantumState::from_slice(q, &[c(1.0), c(1.0)]).unwrap())
            .unwrap();
        let r = schmidt(&psi, &Bipartition::first(1)).unwrap();
        assert!(r.entropy.abs() < 1e-14);
        assert!(r.negativity.abs() < 1e-14);
        assert!((r.purity - 1.0).abs() < 1e-14);
        assert_eq!(r.schmidt_rank(), 1);
    }

    #[test]
    fn bell_state_report() {
        let r = schmidt(&bell(), &Bipartition::first(1)).unwrap();
        for s in &r.schmidt_values {
            assert!((s - FRAC_1_SQRT_2).abs() < 1e-14);
        }
        assert!((r.entropy - LN_2).abs() < 1e-14);
        assert!((r.negativity - 0.5).abs() < 1e-14);
        let rho = DensityOperator::pure(&bell()).unwrap();
        assert!((brute_negativity_2x2(rho.matrix()) - 0.5).abs() < 1e-14);
        assert!((negativity(&rho, &Bipartition::first(1)).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn separable_mixture_has_zero_negativity() {
        let q2 = HilbertSpace::qubits(2).unwrap();
        let p00 = DensityOperator::pure(&QuantumState::basis(q2.clone(), 0).unwrap()).unwrap();
        let p11 = DensityOperator::pure(&QuantumState::basis(q2, 3).unwrap()).unwrap();
        let mix = DensityOperator::mixture(&[0.5, 0.5], &[p00, p11]).unwrap();
        assert!(negativity(&mix, &Bipartition::first(1)).unwrap() < 1e-14);
    }

    #[test]
    fn product_of_mixed_states_has_zero_negativity() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let rho = random_density(3, &mut rng)
            .tensor(&random_density(2, &mut rng))
            .unwrap();
        assert!(negativity(&rho, &Bipartition::first(1)).unwrap() < 1e-10);
    }

    #[test]
    fn non_contiguous_cut() {
        // Bell pair on subsystems 0 and 2 with |0⟩ in the middle
        let mut amps = vec![c(0.0); 8];
        amps[0] = c(1.0);
        amps[5] = c(1.0);
        let psi = QuantumState::from_slice(HilbertSpace::qubits(3).unwrap(), &amps).unwrap();
        let r = schmidt(&psi, &Bipartition::new(vec![0, 1])).unwrap();
        assert!((r.entropy - LN_2).abs() < 1e-14);
        let r = schmidt(&psi, &Bipartition::new(vec![1])).unwrap();
        assert!(r.entropy < 1e-14);
    }

    #[test]
    fn local_unitaries_keep_product_states_ppt() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let q = HilbertSpace::single(2).unwrap();
        let q3 = HilbertSpace::single(3).unwrap();
        for _ in 0..20 {
            let rho = random_density(2, &mut rng)
                .tensor(&random_density(3, &mut rng))
                .unwrap();
            let u: Operator = haar_operator(&q, &mut rng)
                .tensor(&haar_operator(&q3, &mut rng))
                .unwrap();
            let out = rho.conjugate(&u).unwrap();
            assert!(negativity(&out, &Bipartition::first(1)).unwrap() < 1e-10);
        }
    }

    #[test]
    fn pure_state_formula_agrees_with_partial_transpose() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for dims in [vec![2, 2], vec![2, 3], vec![3, 3], vec![2, 2, 2]] {
            let space = HilbertSpace::new(dims).unwrap();
            let psi = random_state(&space, &mut rng);
            let cut = Bipartition::first(1);
            let r = schmidt(&psi, &cut).unwrap();
            let n = negativity(&DensityOperator::pure(&psi).unwrap(), &cut).unwrap();
            assert!((r.negativity - n).abs() < 1e-10, "{} vs {}", r.negativity, n);
            let sum_sq: f64 = r.schmidt_values.iter().map(|s| s * s).sum();
            assert!((sum_sq - 1.0).abs() < 1e-12);
        }
    }
}
