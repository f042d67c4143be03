//! Arbitrary quantum systems coupled through a classical particle.
//!
//! The ensemble Hamiltonian is equivalent to the linear Schrödinger equation
//! with `Ĥ = M ⊗ 1 ⊗ x̂ + 1 ⊗ N ⊗ k̂`. Since `[x̂, k̂] = iħ` the exponential
//! factorises as
//!
//! ```text
//! e^{−itĤ/ħ} = e^{−itx̂M/ħ} e^{−itk̂N/ħ} e^{it²MN/(2ħ)}
//! ```
//!
//! The grid for `C` is periodic with spectral momentum, so `e^{−itνk̂/ħ}` is an
//! exact translation by `tν`. Results are only faithful to the continuum while
//! the wavefunction stays away from the periodic seam, which is guarded.
//!
//! With a Gaussian `ψ_C` the reduced state of `Q ⊗ Q'` stays separable: the
//! mediator then has a positive Wigner function and the couplings are linear
//! in `x̂` and `k̂`, so the whole evolution has a classical stochastic model.
//! [`PacketShape::Hermite1`] gives a mediator whose Wigner function is
//! negative, for which the reduced state does become entangled.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::Span;
use crate::ensemble::GaussianPacket;
use crate::hilbert::{
    expm_apply, unitary, Bipartition, CMatrix, CVector, DensityOperator, EntanglementReport, HilbertSpace, Operator,
    QuantumState, C64, I,
};
use crate::{Error, Result};

/// Points at each end of the `C` grid that must stay empty.
pub const GUARD_MARGIN: usize = 3;
/// Largest probability tolerated within the guard margin.
pub const GUARD_MASS: f64 = 1e-10;
/// Largest total dimension for the dense oracle.
pub const DIRECT_DIM_LIMIT: usize = 4096;
const NORM_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PacketShape {
    /// Gaussian envelope.
    #[default]
    Gaussian,
    /// First Hermite function: the Gaussian envelope times `(x − μ)/σ`.
    Hermite1,
}

/// Initial state of the mediator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediatorPacket {
    #[serde(flatten)]
    pub packet: GaussianPacket,
    #[serde(default)]
    pub shape: PacketShape,
}

impl MediatorPacket {
    pub fn gaussian(width: f64) -> Self {
        MediatorPacket {
            packet: GaussianPacket {
                mean: 0.0,
                width,
                momentum: 0.0,
            },
            shape: PacketShape::Gaussian,
        }
    }

    pub fn amplitude(&self, x: f64, hbar: f64) -> C64 {
        let g = self.packet.psi(x, hbar);
        match self.shape {
            PacketShape::Gaussian => g,
            PacketShape::Hermite1 => g * ((x - self.packet.mean) / self.packet.width),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneralScenario {
    m: Operator,
    n: Operator,
    x: Span,
    t: f64,
    psi_q: QuantumState,
    psi_q_prime: QuantumState,
    psi_c: MediatorPacket,
    hbar: f64,
}

impl GeneralScenario {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        m: Operator,
        n: Operator,
        x: Span,
        t: f64,
        psi_q: QuantumState,
        psi_q_prime: QuantumState,
        psi_c: MediatorPacket,
        hbar: f64,
    ) -> Result<Self> {
        if !m.is_hermitian() || !n.is_hermitian() {
            return Err(Error::contract("M and N must be Hermitian"));
        }
        if m.space().total_dim() != psi_q.space().total_dim() {
            return Err(Error::arg("M and psi_q have different dimensions"));
        }
        if n.space().total_dim() != psi_q_prime.space().total_dim() {
            return Err(Error::arg("N and psi_q_prime have different dimensions"));
        }
        if !t.is_finite() {
            return Err(Error::arg(format!("t must be finite, got {t}")));
        }
        if !(hbar > 0.0) || !hbar.is_finite() {
            return Err(Error::arg(format!("hbar must be positive, got {hbar}")));
        }
        x.axis("x_grid")?;
        let p = psi_c.packet;
        GaussianPacket::new(p.mean, p.width, p.momentum).map_err(|e| Error::arg(format!("psi_c: {e}")))?;
        let s = GeneralScenario {
            m,
            n,
            x,
            t,
            psi_q,
            psi_q_prime,
            psi_c,
            hbar,
        };
        s.space()?;
        s.guard(&s.initial_state()?)?;
        Ok(s)
    }

    /// `M = N = σ_z`, `t²/2 = π/4`, `ψ_Q = ψ_Q' = |+⟩`, Gaussian `ψ_C` of the
    /// given width on `[-16, 16]` with 256 points.
    pub fn sigma_z(width: f64) -> Result<Self> {
        Self::sigma_z_with(MediatorPacket::gaussian(width), (PI / 2.0).sqrt())
    }

    pub fn sigma_z_with(psi_c: MediatorPacket, t: f64) -> Result<Self> {
        let q = HilbertSpace::single(2)?;
        let plus = QuantumState::from_slice(
            q,
            &[C64::new(1.0, 0.0), C64::new(1.0, 0.0)].map(|z| z * std::f64::consts::FRAC_1_SQRT_2),
        )?;
        Self::new(
            crate::hilbert::pauli_z(),
            crate::hilbert::pauli_z(),
            Span::new(-16.0, 16.0, 256),
            t,
            plus.clone(),
            plus,
            psi_c,
            crate::DEFAULT_HBAR,
        )
    }

    pub fn with_t(&self, t: f64) -> Result<Self> {
        Self::new(
            self.m.clone(),
            self.n.clone(),
            self.x,
            t,
            self.psi_q.clone(),
            self.psi_q_prime.clone(),
            self.psi_c,
            self.hbar,
        )
    }

    pub fn m(&self) -> &Operator {
        &self.m
    }

    pub fn n(&self) -> &Operator {
        &self.n
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn x_grid(&self) -> Span {
        self.x
    }

    pub fn psi_c(&self) -> MediatorPacket {
        self.psi_c
    }

    /// `Q ⊗ Q' ⊗ C` as a three-factor space.
    pub fn space(&self) -> Result<HilbertSpace> {
        HilbertSpace::new(vec![
            self.psi_q.space().total_dim(),
            self.psi_q_prime.space().total_dim(),
            self.x.points,
        ])
    }

    fn xs(&self) -> Vec<f64> {
        (0..self.x.points)
            .map(|i| self.x.min + i as f64 * self.x.spacing())
            .collect()
    }

    /// Mediator wavefunction sampled on the grid as a unit vector.
    pub fn mediator_vector(&self) -> Result<CVector> {
        let v = CVector::from_iterator(
            self.x.points,
            self.xs().iter().map(|&x| self.psi_c.amplitude(x, self.hbar)),
        );
        let norm = v.norm();
        if !(norm > 0.0) {
            return Err(Error::contract("psi_c vanishes on the grid"));
        }
        Ok(v.unscale(norm))
    }

    pub fn initial_state(&self) -> Result<QuantumState> {
        let c = QuantumState::new(HilbertSpace::single(self.x.points)?, self.mediator_vector()?)?;
        let qq = self.psi_q.tensor(&self.psi_q_prime)?;
        let full = qq.tensor(&c)?;
        QuantumState::new(self.space()?, full.into_amplitudes())
    }

    /// Wavenumbers of the periodic grid in FFT order.
    fn wavenumbers(&self) -> Vec<f64> {
        let n = self.x.points;
        let period = n as f64 * self.x.spacing();
        (0..n)
            .map(|m| {
                let f = if m < n.div_ceil(2) {
                    m as f64
                } else {
                    m as f64 - n as f64
                };
                2.0 * PI * f / period
            })
            .collect()
    }

    /// Errors if the wavefunction reaches the periodic seam.
    pub fn guard(&self, psi: &QuantumState) -> Result<()> {
        let n = self.x.points;
        let a = psi.amplitudes();
        let mut edge = 0.0;
        for (z, v) in a.iter().enumerate() {
            let i = z % n;
            if i < GUARD_MARGIN || i >= n - GUARD_MARGIN {
                edge += v.norm_sqr();
            }
        }
        if edge > GUARD_MASS {
            return Err(Error::WrapContamination { margin: GUARD_MARGIN });
        }
        Ok(())
    }
}

fn eigh(op: &Operator) -> (Vec<f64>, CMatrix) {
    let e = SymmetricEigen::new(op.matrix().clone());
    (e.eigenvalues.iter().copied().collect(), e.eigenvectors)
}

/// Applies `u` to the `Q` factor of a `[dq, dq', n]` amplitude vector.
fn apply_on_q(v: &CVector, u: &CMatrix, dims: [usize; 3]) -> CVector {
    let [dq, dqp, n] = dims;
    let block = dqp * n;
    let mut out = CVector::zeros(v.len());
    for a in 0..dq {
        for k in 0..dq {
            let coef = u[(a, k)];
            for r in 0..block {
                out[a * block + r] += coef * v[k * block + r];
            }
        }
    }
    out
}

/// `e^{−itĤ/ħ}` applied as three factors, rightmost first.
pub fn evolve_general_bch(s: &GeneralScenario) -> Result<QuantumState> {
    let psi0 = s.initial_state()?;
    if s.t == 0.0 {
        return Ok(psi0);
    }
    let (t, hbar) = (s.t, s.hbar);
    let dq = s.psi_q.space().total_dim();
    let dqp = s.psi_q_prime.space().total_dim();
    let n = s.x.points;
    let dims = [dq, dqp, n];

    // e^{it²MN/(2ħ)} on Q ⊗ Q', as e^{−iH/ħ} with H = −(t²/2) M⊗N
    let mn = s.m.tensor(&s.n)?.scale(-0.5 * t * t);
    let u1 = unitary(&mn, 1.0, hbar)?;
    let qq = s.psi_q.tensor(&s.psi_q_prime)?;
    let chi = u1.matrix() * qq.amplitudes();

    // e^{−itk̂N/ħ}: translate ψ_C by tν_j in the eigenbasis of N
    let (nu, vn) = eigh(&s.n);
    let chi = DMatrix::from_row_slice(dq, dqp, chi.as_slice());
    let chi_eig = chi * &vn; // [a, j] = Σ_b χ[a,b] V[b,j]
    let c0 = s.mediator_vector()?;
    let kappa = s.wavenumbers();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut spectrum: Vec<C64> = c0.iter().copied().collect();
    fwd.process(&mut spectrum);
    let shifted: Vec<Vec<C64>> = nu
        .iter()
        .map(|&v| {
            let d = t * v;
            let mut buf: Vec<C64> = spectrum
                .iter()
                .zip(&kappa)
                .map(|(c, &k)| c * (-I * (k * d)).exp())
                .collect();
            inv.process(&mut buf);
            buf.iter().map(|z| z / n as f64).collect()
        })
        .collect();
    let mut psi = CVector::zeros(dq * dqp * n);
    for a in 0..dq {
        for b in 0..dqp {
            let base = (a * dqp + b) * n;
            for (j, sh) in shifted.iter().enumerate() {
                let coef = chi_eig[(a, j)] * vn[(b, j)].conj();
                for x in 0..n {
                    psi[base + x] += coef * sh[x];
                }
            }
        }
    }

    // e^{−itx̂M/ħ}: pointwise phases in the eigenbasis of M
    let (mu, um) = eigh(&s.m);
    let mut psi = apply_on_q(&psi, &um.adjoint(), dims);
    let xs = s.xs();
    for (i, &m) in mu.iter().enumerate() {
        for b in 0..dqp {
            let base = (i * dqp + b) * n;
            for (x, &xv) in xs.iter().enumerate() {
                psi[base + x] *= (-I * (t * m * xv / hbar)).exp();
            }
        }
    }
    let psi = apply_on_q(&psi, &um, dims);

    let drift = (psi.norm() - 1.0).abs();
    if drift > NORM_TOLERANCE {
        return Err(Error::contract(format!("factorised evolution lost norm ({drift:.3e})")));
    }
    let out = QuantumState::normalized(s.space()?, psi)?;
    s.guard(&out)?;
    Ok(out)
}

/// Dense spectral momentum `F† diag(ħκ) F` on the periodic grid.
pub fn momentum_matrix(s: &GeneralScenario) -> CMatrix {
    let n = s.x.points;
    let kappa = s.wavenumbers();
    let k = CMatrix::from_fn(n, n, |j, l| {
        let d = j as f64 - l as f64;
        let sum: C64 = kappa
            .iter()
            .enumerate()
            .map(|(m, &km)| C64::from_polar(km, 2.0 * PI * m as f64 * d / n as f64))
            .sum();
        sum * (s.hbar / n as f64)
    });
    (&k + k.adjoint()) * C64::new(0.5, 0.0)
}

/// Dense exponential of `M ⊗ 1 ⊗ x̂ + 1 ⊗ N ⊗ k̂`, as an independent check of
/// [`evolve_general_bch`].
pub fn evolve_general_direct(s: &GeneralScenario) -> Result<QuantumState> {
    let space = s.space()?;
    let dim = space.total_dim();
    if dim > DIRECT_DIM_LIMIT {
        return Err(Error::Capacity {
            what: "dense oracle dimension",
            requested: dim,
            limit: DIRECT_DIM_LIMIT,
        });
    }
    let psi0 = s.initial_state()?;
    if s.t == 0.0 {
        return Ok(psi0);
    }
    let cx = HilbertSpace::single(s.x.points)?;
    let xop = Operator::new(
        cx.clone(),
        CMatrix::from_diagonal(&DVector::from_iterator(
            s.x.points,
            s.xs().iter().map(|&x| C64::new(x, 0.0)),
        )),
    )?;
    let kop = Operator::new(cx, momentum_matrix(s))?;
    let id_q = Operator::identity(s.m.space().clone());
    let id_qp = Operator::identity(s.n.space().clone());
    let h1 = s.m.tensor(&id_qp)?.tensor(&xop)?;
    let h2 = id_q.tensor(&s.n)?.tensor(&kop)?;
    let h = Operator::new(space, h1.add(&h2)?.into_matrix())?;
    let out = expm_apply(&h, s.t, &psi0, s.hbar)?;
    s.guard(&out)?;
    Ok(out)
}

/// `Tr_C |ψ⟩⟨ψ|` on `Q ⊗ Q'`.
pub fn reduced_qq(s: &GeneralScenario, psi: &QuantumState) -> Result<DensityOperator> {
    let space = s.space()?;
    if psi.space() != &space {
        return Err(Error::arg("state does not live on the scenario's space"));
    }
    let dims = space.dims();
    let (dqq, n) = (dims[0] * dims[1], dims[2]);
    let a = DMatrix::from_row_slice(dqq, n, psi.amplitudes().as_slice());
    let rho = &a * a.adjoint();
    DensityOperator::new(HilbertSpace::new(vec![dims[0], dims[1]])?, rho)
}

/// Negativity and purity of `Tr_C |ψ_t⟩⟨ψ_t|` across `Q | Q'`.
pub fn general_entanglement(s: &GeneralScenario, psi: &QuantumState) -> Result<EntanglementReport> {
    EntanglementReport::mixed(&reduced_qq(s, psi)?, &Bipartition::first(1))
}

/// One point of a mediator-width sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WidthPoint {
    pub width: f64,
    /// `false` if the seam guard rejected this width.
    pub guarded: bool,
    pub negativity: Option<f64>,
    /// `|⟨ψ_direct|ψ_bch⟩|`.
    pub fidelity: Option<f64>,
}

/// Evolves the scenario for each mediator width with both methods.
pub fn width_sweep(base: &GeneralScenario, widths: &[f64]) -> Result<Vec<WidthPoint>> {
    widths
        .par_iter()
        .map(|&width| {
            let mut packet = base.psi_c;
            packet.packet.width = width;
            let built = GeneralScenario::new(
                base.m.clone(),
                base.n.clone(),
                base.x,
                base.t,
                base.psi_q.clone(),
                base.psi_q_prime.clone(),
                packet,
                base.hbar,
            );
            let run = built.and_then(|s| {
                let bch = evolve_general_bch(&s)?;
                let direct = evolve_general_direct(&s)?;
                Ok((general_entanglement(&s, &bch)?.negativity, direct.fidelity(&bch)?))
            });
            match run {
                Ok((neg, fid)) => Ok(WidthPoint {
                    width,
                    guarded: true,
                    negativity: Some(neg),
                    fidelity: Some(fid),
                }),
                Err(Error::WrapContamination { .. }) => Ok(WidthPoint {
                    width,
                    guarded: false,
                    negativity: None,
                    fidelity: None,
                }),
                Err(e) => Err(e),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{pauli_x, pauli_z, schmidt};

    fn small(m: Operator, n: Operator, width: f64, t: f64) -> GeneralScenario {
        let q = HilbertSpace::single(2).unwrap();
        let plus = QuantumState::from_slice(
            q,
            &[C64::new(1.0, 0.0), C64::new(1.0, 0.0)].map(|z| z * std::f64::consts::FRAC_1_SQRT_2),
        )
        .unwrap();
        GeneralScenario::new(
            m,
            n,
            Span::new(-12.0, 12.0, 128),
            t,
            plus.clone(),
            plus,
            MediatorPacket::gaussian(width),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn zero_time_is_initial_state() {
        let s = small(pauli_z(), pauli_x(), 1.0, 0.0);
        let init = s.initial_state().unwrap();
        assert_eq!(evolve_general_bch(&s).unwrap(), init);
        assert_eq!(evolve_general_direct(&s).unwrap(), init);
        assert!(general_entanglement(&s, &init).unwrap().negativity < 1e-12);
    }

    #[test]
    fn zero_generators_are_identity() {
        let q = HilbertSpace::single(2).unwrap();
        let s = small(Operator::zero(q.clone()), Operator::zero(q), 1.0, 0.9);
        let init = s.initial_state().unwrap();
        assert!(evolve_general_direct(&s).unwrap().fidelity(&init).unwrap() > 1.0 - 1e-12);
        assert!(evolve_general_bch(&s).unwrap().fidelity(&init).unwrap() > 1.0 - 1e-12);
    }

    #[test]
    fn translation_is_exact_shift() {
        // N = 1 on Q' moves ψ_C by t with M = 0; a shift of 5Δ
        // on the periodic grid is an index rotation
        let q = HilbertSpace::single(2).unwrap();
        let span = Span::new(-12.0, 12.0, 128);
        let s = GeneralScenario::new(
            Operator::zero(q.clone()),
            Operator::identity(q.clone()),
            span,
            5.0 * span.spacing(),
            QuantumState::basis(q.clone(), 0).unwrap(),
            QuantumState::basis(q, 1).unwrap(),
            MediatorPacket::gaussian(1.0),
            1.0,
        )
        .unwrap();
        let init = s.initial_state().unwrap();
        let out = evolve_general_bch(&s).unwrap();
        let (a, b) = (init.amplitudes(), out.amplitudes());
        let base = 128; // |0⟩|1⟩ block
        for x in 5..128 {
            assert!((b[base + x] - a[base + x - 5]).norm() < 1e-12);
        }
    }

    #[test]
    fn no_translation_leaves_q_prime_pure() {
        let q = HilbertSpace::single(2).unwrap();
        let s = small(pauli_z(), Operator::zero(q), 1.0, 1.1);
        let psi = evolve_general_bch(&s).unwrap();
        let rho = reduced_qq(&s, &psi).unwrap();
        let rho_qp = rho.partial_trace(&[1]).unwrap();
        assert!((rho_qp.purity() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn rightmost_factor_is_maximally_entangling() {
        // e^{iπ/4 σz⊗σz}|++⟩ written out by hand
        let t = (PI / 2.0).sqrt();
        let mn = pauli_z().tensor(&pauli_z()).unwrap().scale(-0.5 * t * t);
        let u = unitary(&mn, 1.0, 1.0).unwrap();
        let plus2 = QuantumState::from_slice(HilbertSpace::qubits(2).unwrap(), &[C64::new(0.5, 0.0); 4]).unwrap();
        let out = QuantumState::new(plus2.space().clone(), u.matrix() * plus2.amplitudes()).unwrap();
        let e = (I * (PI / 4.0)).exp();
        let oracle = [e, e.conj(), e.conj(), e].map(|z| z * 0.5);
        for (a, b) in out.amplitudes().iter().zip(oracle) {
            assert!((a - b).norm() < 1e-14);
        }
        let r = schmidt(&out, &Bipartition::first(1)).unwrap();
        assert!((r.entropy - 2f64.ln()).abs() < 1e-12);
        assert!((r.negativity - 0.5).abs() < 1e-12);
    }

    #[test]
    fn bch_matches_dense_exponential() {
        let s = small(pauli_z(), pauli_z(), 1.0, (PI / 2.0).sqrt());
        let a = evolve_general_bch(&s).unwrap();
        let b = evolve_general_direct(&s).unwrap();
        assert!(a.fidelity(&b).unwrap() > 1.0 - 1e-6, "{}", a.fidelity(&b).unwrap());
        let s = small(pauli_z(), pauli_x(), 0.8, 0.7);
        let a = evolve_general_bch(&s).unwrap();
        let b = evolve_general_direct(&s).unwrap();
        assert!(a.fidelity(&b).unwrap() > 1.0 - 1e-6);
    }

    #[test]
    fn wrap_guard_fires() {
        let q = HilbertSpace::single(2).unwrap();
        let s = GeneralScenario::new(
            Operator::zero(q.clone()),
            pauli_z(),
            Span::new(-12.0, 12.0, 128),
            9.0,
            QuantumState::basis(q.clone(), 0).unwrap(),
            QuantumState::basis(q, 0).unwrap(),
            MediatorPacket::gaussian(1.0),
            1.0,
        )
        .unwrap();
        assert!(matches!(evolve_general_bch(&s), Err(Error::WrapContamination { .. })));
        assert!(small(pauli_z(), pauli_z(), 1.0, 1.0).with_t(1.0).is_ok());
        let q = HilbertSpace::single(2).unwrap();
        let wide = GeneralScenario::new(
            pauli_z(),
            pauli_z(),
            Span::new(-12.0, 12.0, 128),
            1.0,
            QuantumState::basis(q.clone(), 0).unwrap(),
            QuantumState::basis(q, 0).unwrap(),
            MediatorPacket::gaussian(3.0),
            1.0,
        );
        assert!(matches!(wide, Err(Error::WrapContamination { .. })));
    }

    #[test]
    fn direct_capacity() {
        let q = HilbertSpace::single(4).unwrap();
        let psi = QuantumState::basis(q.clone(), 0).unwrap();
        let s = GeneralScenario::new(
            Operator::zero(q.clone()),
            Operator::zero(q),
            Span::new(-12.0, 12.0, 512),
            0.5,
            psi.clone(),
            psi,
            MediatorPacket::gaussian(1.0),
            1.0,
        )
        .unwrap();
        assert!(matches!(evolve_general_direct(&s), Err(Error::Capacity { .. })));
    }

    #[test]
    fn gaussian_mediator_gives_separable_state() {
        for t in [0.5, 1.0, (PI / 2.0).sqrt()] {
            for w in [0.5, 1.0, 1.5] {
                let s = small(pauli_z(), pauli_z(), w, t);
                let psi = evolve_general_bch(&s).unwrap();
                assert!(general_entanglement(&s, &psi).unwrap().negativity < 1e-10);
            }
        }
    }

    #[test]
    fn hermite_mediator_entangles() {
        let mut packet = MediatorPacket::gaussian(std::f64::consts::FRAC_1_SQRT_2);
        packet.shape = PacketShape::Hermite1;
        let q = HilbertSpace::single(2).unwrap();
        let plus =
            QuantumState::from_slice(q, &[C64::new(1.0, 0.0); 2].map(|z| z * std::f64::consts::FRAC_1_SQRT_2)).unwrap();
        let s = GeneralScenario::new(
            pauli_z(),
            pauli_z(),
            Span::new(-12.0, 12.0, 128),
            1.0,
            plus.clone(),
            plus,
            packet,
            1.0,
        )
        .unwrap();
        let a = evolve_general_bch(&s).unwrap();
        let neg = general_entanglement(&s, &a).unwrap().negativity;
        assert!(neg > 0.03, "{neg}");
        let b = evolve_general_direct(&s).unwrap();
        assert!(a.fidelity(&b).unwrap() > 1.0 - 1e-6);
    }
}
