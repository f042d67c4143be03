//! Koopman-type hybrid dynamics.
//!
//! The classical system is a commuting observable `Ĉ = Σ_c c Π_c` on a
//! Hilbert space `H_C = ⊕_c H_c`. States and interactions are diagonal in the
//! labels `c`, so they are stored sector by sector: a weight `p(c)`, a state
//! of the two quantum systems and a state of the classical sector. Any
//! interaction therefore acts on `QQ'` as a label-dependent product of local
//! unitaries, and the reduced state is a convex combination of locally
//! transformed sectors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::hilbert::random::{haar_operator, random_density, random_state};
use crate::hilbert::{
    negativity, schmidt, Bipartition, CMatrix, DensityOperator, HilbertSpace, Operator, QuantumState, C64,
};
use crate::{Error, Result};

const UNITARY_TOLERANCE: f64 = 1e-10;
const MIN_POSTSELECT_PROBABILITY: f64 = 1e-15;

/// Eigenvalues of the classical observable and the dimension of each
/// eigenspace.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassicalSpectrum {
    labels: Vec<f64>,
    sector_dims: Vec<usize>,
}

impl ClassicalSpectrum {
    pub fn new(labels: Vec<f64>, sector_dims: Vec<usize>) -> Result<Self> {
        if labels.is_empty() || labels.len() != sector_dims.len() {
            return Err(Error::arg("need one sector dimension per classical label"));
        }
        for (i, a) in labels.iter().enumerate() {
            if labels[..i].contains(a) {
                return Err(Error::arg(format!("classical label {a} repeated")));
            }
        }
        if sector_dims.contains(&0) {
            return Err(Error::arg("sector dimensions must be positive"));
        }
        Ok(ClassicalSpectrum { labels, sector_dims })
    }

    /// Labels `0, 1, …, n-1`, each with a sector of dimension `sector_dim`.
    pub fn uniform(n: usize, sector_dim: usize) -> Result<Self> {
        Self::new((0..n).map(|c| c as f64).collect(), vec![sector_dim; n])
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn sector_dims(&self) -> &[usize] {
        &self.sector_dims
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: f64) -> Option<usize> {
        self.labels.iter().position(|&l| l == label)
    }

    pub fn total_dim(&self) -> usize {
        self.sector_dims.iter().sum()
    }
}

/// `⊕_c p(c) ρ_QQ'(c) ⊗ ρ_C(c)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalHybridState {
    spectrum: ClassicalSpectrum,
    p: Vec<f64>,
    rho_qq: Vec<DensityOperator>,
    rho_c: Vec<DensityOperator>,
}

impl DiagonalHybridState {
    pub fn new(
        spectrum: ClassicalSpectrum,
        p: Vec<f64>,
        rho_qq: Vec<DensityOperator>,
        rho_c: Vec<DensityOperator>,
    ) -> Result<Self> {
        let n = spectrum.len();
        if p.len() != n || rho_qq.len() != n || rho_c.len() != n {
            return Err(Error::arg("need p, ρ_QQ' and ρ_C for every classical label"));
        }
        if p.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::arg("label probabilities must be nonnegative"));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::arg(format!("label probabilities sum to {total}")));
        }
        let qq_space = rho_qq[0].space().clone();
        if qq_space.num_subsystems() != 2 {
            return Err(Error::arg("sector states must live on H_Q ⊗ H_Q'"));
        }
        for (c, (rqq, rc)) in rho_qq.iter().zip(&rho_c).enumerate() {
            if rqq.space() != &qq_space {
                return Err(Error::arg(format!("sector {c} has a different quantum space")));
            }
            if rc.space().total_dim() != spectrum.sector_dims[c] {
                return Err(Error::arg(format!(
                    "classical state of sector {c} has dimension {}, expected {}",
                    rc.space().total_dim(),
                    spectrum.sector_dims[c]
                )));
            }
            DensityOperator::new(rqq.space().clone(), rqq.matrix().clone())?;
            DensityOperator::new(rc.space().clone(), rc.matrix().clone())?;
        }
        Ok(DiagonalHybridState {
            spectrum,
            p,
            rho_qq,
            rho_c,
        })
    }

    pub fn spectrum(&self) -> &ClassicalSpectrum {
        &self.spectrum
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    pub fn sector_state(&self, c: usize) -> &DensityOperator {
        &self.rho_qq[c]
    }

    pub fn classical_state(&self, c: usize) -> &DensityOperator {
        &self.rho_c[c]
    }

    pub fn quantum_space(&self) -> &HilbertSpace {
        self.rho_qq[0].space()
    }

    /// Full density matrix on `H_Q ⊗ H_Q' ⊗ H_C`, with `H_C` the direct sum
    /// of the sectors in label order.
    pub fn to_dense(&self) -> Result<DensityOperator> {
        let dq = self.quantum_space().total_dim();
        let dc = self.spectrum.total_dim();
        let mut m = CMatrix::zeros(dq * dc, dq * dc);
        let mut offset = 0;
        for c in 0..self.spectrum.len() {
            let block = embed_block(self.rho_c[c].matrix(), offset, dc);
            m += self.rho_qq[c].matrix().kronecker(&block) * C64::new(self.p[c], 0.0);
            offset += self.spectrum.sector_dims[c];
        }
        let mut dims = self.quantum_space().dims().to_vec();
        dims.push(dc);
        DensityOperator::new(HilbertSpace::new(dims)?, m)
    }
}

/// Which quantum system a diagonal interaction acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Target {
    Q,
    QPrime,
}

/// `⊕_c U_Q(c) ⊗ 1_Q' ⊗ U_C(c)` (or the mirror image acting on `Q'`).
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalInteraction {
    target: Target,
    u_quantum: Vec<Operator>,
    u_classical: Vec<Operator>,
}

impl DiagonalInteraction {
    pub fn new(target: Target, u_quantum: Vec<Operator>, u_classical: Vec<Operator>) -> Result<Self> {
        if u_quantum.len() != u_classical.len() || u_quantum.is_empty() {
            return Err(Error::arg("need one quantum and one classical unitary per label"));
        }
        for (c, u) in u_quantum.iter().chain(&u_classical).enumerate() {
            let defect = u.unitarity_defect();
            if defect > UNITARY_TOLERANCE {
                return Err(Error::contract(format!(
                    "interaction matrix {c} is not unitary (defect {defect:.3e})"
                )));
            }
        }
        Ok(DiagonalInteraction {
            target,
            u_quantum,
            u_classical,
        })
    }

    pub fn identity(target: Target, spectrum: &ClassicalSpectrum, quantum_dim: usize) -> Result<Self> {
        let q = HilbertSpace::single(quantum_dim)?;
        let u_quantum = vec![Operator::identity(q); spectrum.len()];
        let u_classical = spectrum
            .sector_dims()
            .iter()
            .map(|&d| HilbertSpace::single(d).map(Operator::identity))
            .collect::<Result<Vec<_>>>()?;
        Self::new(target, u_quantum, u_classical)
    }

    /// Haar-random unitaries on every label.
    pub fn random<R: Rng + ?Sized>(
        target: Target,
        spectrum: &ClassicalSpectrum,
        quantum_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let q = HilbertSpace::single(quantum_dim)?;
        let mut u_quantum = Vec::with_capacity(spectrum.len());
        let mut u_classical = Vec::with_capacity(spectrum.len());
        for &d in spectrum.sector_dims() {
            u_quantum.push(haar_operator(&q, rng));
            u_classical.push(haar_operator(&HilbertSpace::single(d)?, rng));
        }
        Self::new(target, u_quantum, u_classical)
    }

    pub fn target(&self) -> Target {
        self.target
    }

    pub fn len(&self) -> usize {
        self.u_quantum.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u_quantum.is_empty()
    }

    /// Local unitary on `H_Q ⊗ H_Q'` for label `c`.
    fn local(&self, c: usize, qq: &HilbertSpace) -> Result<Operator> {
        let dims = qq.dims();
        match self.target {
            Target::Q => self.u_quantum[c].tensor(&Operator::identity(HilbertSpace::single(dims[1])?)),
            Target::QPrime => Operator::identity(HilbertSpace::single(dims[0])?).tensor(&self.u_quantum[c]),
        }
    }

    /// Block-diagonal unitary on `H_Q ⊗ H_Q' ⊗ H_C`.
    pub fn to_dense(&self, quantum: &HilbertSpace, spectrum: &ClassicalSpectrum) -> Result<Operator> {
        let dq = quantum.total_dim();
        let dc = spectrum.total_dim();
        let mut m = CMatrix::zeros(dq * dc, dq * dc);
        let mut offset = 0;
        for c in 0..spectrum.len() {
            let block = embed_block(self.u_classical[c].matrix(), offset, dc);
            m += self.local(c, quantum)?.matrix().kronecker(&block);
            offset += spectrum.sector_dims()[c];
        }
        let mut dims = quantum.dims().to_vec();
        dims.push(dc);
        Operator::new(HilbertSpace::new(dims)?, m)
    }
}

fn embed_block(block: &CMatrix, offset: usize, total: usize) -> CMatrix {
    let mut out = CMatrix::zeros(total, total);
    out.view_mut((offset, offset), block.shape()).copy_from(block);
    out
}

/// Conjugates every sector by its label's local unitary. Label weights are
/// untouched.
pub fn apply_interaction(state: &DiagonalHybridState, u: &DiagonalInteraction) -> Result<DiagonalHybridState> {
    let spectrum = &state.spectrum;
    if u.len() != spectrum.len() {
        return Err(Error::arg(format!(
            "interaction has {} labels, state has {}",
            u.len(),
            spectrum.len()
        )));
    }
    let qq = state.quantum_space().clone();
    let target_dim = match u.target {
        Target::Q => qq.dims()[0],
        Target::QPrime => qq.dims()[1],
    };
    let mut rho_qq = Vec::with_capacity(spectrum.len());
    let mut rho_c = Vec::with_capacity(spectrum.len());
    for c in 0..spectrum.len() {
        if u.u_quantum[c].space().total_dim() != target_dim
            || u.u_classical[c].space().total_dim() != spectrum.sector_dims()[c]
        {
            return Err(Error::arg(format!("interaction dimensions do not match sector {c}")));
        }
        rho_qq.push(state.rho_qq[c].conjugate(&u.local(c, &qq)?)?);
        let uc = Operator::new(state.rho_c[c].space().clone(), u.u_classical[c].matrix().clone())?;
        rho_c.push(state.rho_c[c].conjugate(&uc)?);
    }
    Ok(DiagonalHybridState {
        spectrum: spectrum.clone(),
        p: state.p.clone(),
        rho_qq,
        rho_c,
    })
}

/// `Σ_c p(c) ρ_QQ'(c)`.
pub fn reduce_qq(state: &DiagonalHybridState) -> Result<DensityOperator> {
    DensityOperator::mixture(&state.p, &state.rho_qq)
}

/// State of `QQ'` conditioned on observing label index `c`.
pub fn postselect_classical(state: &DiagonalHybridState, c: usize) -> Result<DensityOperator> {
    let p = *state
        .p
        .get(c)
        .ok_or_else(|| Error::arg(format!("label index {c} out of range")))?;
    if p <= MIN_POSTSELECT_PROBABILITY {
        return Err(Error::Domain(format!("label {c} has probability {p:e}")));
    }
    Ok(state.rho_qq[c].clone())
}

/// Initial sector states for a scenario.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SectorInput {
    /// Random pure product state per sector.
    ProductPure,
    /// Random mixed product state per sector.
    ProductMixed,
    /// `(|00⟩ + |11⟩)/√2` in every sector (qubits only).
    Bell,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InteractionKind {
    Identity,
    Haar,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KoopmanScenario {
    pub dim_q: usize,
    pub dim_q_prime: usize,
    pub num_labels: usize,
    pub sector_dim: usize,
    /// Each round applies one interaction on `Q` and then one on `Q'`.
    pub rounds: usize,
    pub input: SectorInput,
    pub interaction: InteractionKind,
    pub seed: u64,
}

impl Default for KoopmanScenario {
    fn default() -> Self {
        KoopmanScenario {
            dim_q: 2,
            dim_q_prime: 2,
            num_labels: 2,
            sector_dim: 2,
            rounds: 2,
            input: SectorInput::ProductPure,
            interaction: InteractionKind::Haar,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KoopmanReport {
    pub probabilities: Vec<f64>,
    pub initial_sector_negativity: Vec<f64>,
    pub final_sector_negativity: Vec<f64>,
    /// Entanglement entropy of pure sectors; empty for mixed inputs.
    pub initial_sector_entropy: Vec<f64>,
    pub final_sector_entropy: Vec<f64>,
    pub initial_reduced_negativity: f64,
    pub final_reduced_negativity: f64,
    /// Largest negativity over post-selected final sectors.
    pub max_postselected_negativity: f64,
}

impl KoopmanReport {
    pub fn reduced_negativity_delta(&self) -> f64 {
        self.final_reduced_negativity - self.initial_reduced_negativity
    }
}

/// Initial state and interaction sequence of a scenario, without running it.
pub fn build_scenario(cfg: &KoopmanScenario) -> Result<(DiagonalHybridState, Vec<DiagonalInteraction>)> {
    if cfg.num_labels == 0 || cfg.dim_q == 0 || cfg.dim_q_prime == 0 || cfg.sector_dim == 0 {
        return Err(Error::arg("scenario dimensions and label count must be positive"));
    }
    if cfg.input == SectorInput::Bell && (cfg.dim_q != 2 || cfg.dim_q_prime != 2) {
        return Err(Error::arg("Bell sector input needs qubits"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let spectrum = ClassicalSpectrum::uniform(cfg.num_labels, cfg.sector_dim)?;
    let raw: Vec<f64> = (0..cfg.num_labels).map(|_| rng.random::<f64>() + 0.05).collect();
    let total: f64 = raw.iter().sum();
    let mut p: Vec<f64> = raw.iter().map(|w| w / total).collect();
    // make the weights sum to one to the last bit
    let head: f64 = p[..p.len() - 1].iter().sum();
    *p.last_mut().expect("nonempty") = 1.0 - head;

    let q = HilbertSpace::single(cfg.dim_q)?;
    let qp = HilbertSpace::single(cfg.dim_q_prime)?;
    let mut rho_qq = Vec::with_capacity(cfg.num_labels);
    let mut rho_c = Vec::with_capacity(cfg.num_labels);
    for _ in 0..cfg.num_labels {
        let sector = match cfg.input {
            SectorInput::ProductPure => {
                let psi = random_state(&q, &mut rng).tensor(&random_state(&qp, &mut rng))?;
                DensityOperator::pure(&psi)?
            }
            SectorInput::ProductMixed => {
                random_density(cfg.dim_q, &mut rng).tensor(&random_density(cfg.dim_q_prime, &mut rng))?
            }
            SectorInput::Bell => {
                let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
                let z = C64::new(0.0, 0.0);
                DensityOperator::pure(&QuantumState::from_slice(q.tensor(&qp)?, &[s, z, z, s])?)?
            }
        };
        rho_qq.push(sector);
        rho_c.push(random_density(cfg.sector_dim, &mut rng));
    }
    let state = DiagonalHybridState::new(spectrum.clone(), p, rho_qq, rho_c)?;

    let mut interactions = Vec::with_capacity(2 * cfg.rounds);
    for _ in 0..cfg.rounds {
        for (target, dim) in [(Target::Q, cfg.dim_q), (Target::QPrime, cfg.dim_q_prime)] {
            interactions.push(match cfg.interaction {
                InteractionKind::Identity => DiagonalInteraction::identity(target, &spectrum, dim)?,
                InteractionKind::Haar => DiagonalInteraction::random(target, &spectrum, dim, &mut rng)?,
            });
        }
    }
    Ok((state, interactions))
}

fn pure_entropy(rho: &DensityOperator) -> Result<Option<f64>> {
    if (rho.purity() - 1.0).abs() > 1e-10 {
        return Ok(None);
    }
    // leading eigenvector of a rank-one projector
    let eig = nalgebra::SymmetricEigen::new(rho.matrix().clone());
    let top = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("nonempty");
    let v = eig.eigenvectors.column(top).into_owned();
    let psi = QuantumState::normalized(rho.space().clone(), v)?;
    Ok(Some(schmidt(&psi, &Bipartition::first(1))?.entropy))
}

/// Runs a scenario and reports negativities before and after.
pub fn run_koopman_scenario(cfg: &KoopmanScenario) -> Result<KoopmanReport> {
    let (initial, interactions) = build_scenario(cfg)?;
    let state = interactions
        .iter()
        .try_fold(initial.clone(), |s, u| apply_interaction(&s, u))?;
    let cut = Bipartition::first(1);
    let sector_neg =
        |s: &DiagonalHybridState| -> Result<Vec<f64>> { s.rho_qq.iter().map(|r| negativity(r, &cut)).collect() };
    let sector_entropy = |s: &DiagonalHybridState| -> Result<Vec<f64>> {
        let mut out = Vec::new();
        for r in &s.rho_qq {
            match pure_entropy(r)? {
                Some(e) => out.push(e),
                None => return Ok(Vec::new()),
            }
        }
        Ok(out)
    };
    let mut max_post: f64 = 0.0;
    for c in 0..state.spectrum.len() {
        max_post = max_post.max(negativity(&postselect_classical(&state, c)?, &cut)?);
    }
    Ok(KoopmanReport {
        probabilities: state.p.clone(),
        initial_sector_negativity: sector_neg(&initial)?,
        final_sector_negativity: sector_neg(&state)?,
        initial_sector_entropy: sector_entropy(&initial)?,
        final_sector_entropy: sector_entropy(&state)?,
        initial_reduced_negativity: negativity(&reduce_qq(&initial)?, &cut)?,
        final_reduced_negativity: negativity(&reduce_qq(&state)?, &cut)?,
        max_postselected_negativity: max_post,
    })
}

/// Runs a scenario both sector-wise and as a dense block-diagonal simulation
/// on `H_Q ⊗ H_Q' ⊗ H_C`, returning the largest elementwise difference of
/// the reduced `QQ'` states and of the per-label projections.
pub fn dense_equivalence_defect(cfg: &KoopmanScenario) -> Result<f64> {
    let (initial, interactions) = build_scenario(cfg)?;
    let sectors = interactions
        .iter()
        .try_fold(initial.clone(), |s, u| apply_interaction(&s, u))?;
    let qq = initial.quantum_space().clone();
    let mut dense = initial.to_dense()?;
    for u in &interactions {
        dense = dense.conjugate(&u.to_dense(&qq, &initial.spectrum)?)?;
    }
    let reduced_dense = dense.partial_trace(&[0, 1])?;
    let mut worst = reduced_dense.max_abs_diff(&reduce_qq(&sectors)?);

    // per-label block: tr_C[(1 ⊗ Π_c) ρ (1 ⊗ Π_c)] = p(c) ρ_QQ'(c)
    let dq = qq.total_dim();
    let dc = initial.spectrum.total_dim();
    let mut offset = 0;
    for c in 0..initial.spectrum.len() {
        let d = initial.spectrum.sector_dims()[c];
        let mut block = CMatrix::zeros(dq, dq);
        for i in 0..dq {
            for j in 0..dq {
                for k in offset..offset + d {
                    block[(i, j)] += dense.matrix()[(i * dc + k, j * dc + k)];
                }
            }
        }
        let expect = sectors.rho_qq[c].matrix() * C64::new(sectors.p[c], 0.0);
        worst = worst.max(crate::hilbert::max_abs_diff(&block, &expect));
        offset += d;
    }
    Ok(worst)
}
