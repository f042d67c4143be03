//! Mean-field hybrid dynamics.
//!
//! A quantum state evolves under `Ĥ(x, k)` while the classical point `(x, k)`
//! follows Hamilton's equations for `H̄ = ⟨ψ|Ĥ(x, k)|ψ⟩`:
//!
//! ```text
//! iħ dψ/dt = Ĥ(x,k) ψ,   dx/dt = ⟨ψ|∇_k Ĥ|ψ⟩,   dk/dt = −⟨ψ|∇_x Ĥ|ψ⟩
//! ```
//!
//! The coupled system is integrated with fixed-step RK4. RK4 is not unitary,
//! so the state is renormalised after each step and the drift is recorded.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::hilbert::{CMatrix, CVector, HilbertSpace, Operator, QuantumState, C64, I};
use crate::{Error, Result};

const STATE_NORM_TOLERANCE: f64 = 1e-10;
/// Largest norm change tolerated in a single RK4 step.
pub const MAX_STEP_DRIFT: f64 = 1e-6;
const GRADIENT_TOLERANCE: f64 = 1e-6;

/// Hamiltonian operator parameterised by a classical phase-space point.
pub trait ParamHamiltonian: Send + Sync {
    /// Space the operator acts on, usually `H_Q ⊗ H_Q'`.
    fn space(&self) -> &HilbertSpace;

    /// Number of classical degrees of freedom (length of `x` and of `k`).
    fn num_coords(&self) -> usize;

    fn eval(&self, x: &[f64], k: &[f64]) -> Operator;

    /// `∂Ĥ/∂x_i` for every `i`.
    fn grad_x(&self, x: &[f64], k: &[f64]) -> Vec<Operator>;

    /// `∂Ĥ/∂k_i` for every `i`.
    fn grad_k(&self, x: &[f64], k: &[f64]) -> Vec<Operator>;

    /// `(Ĥ_Q, Ĥ_Q')` when `Ĥ = Ĥ_Q ⊗ 1 + 1 ⊗ Ĥ_Q'`.
    fn separable_split(&self, _x: &[f64], _k: &[f64]) -> Option<(Operator, Operator)> {
        None
    }
}

/// Quadratic classical energy `Σ k²/(2m) + m ω² x²/2`, added as a multiple
/// of the identity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Kinetic {
    pub mass: f64,
    pub omega: f64,
}

impl Kinetic {
    fn energy(&self, x: f64, k: f64) -> f64 {
        k * k / (2.0 * self.mass) + 0.5 * self.mass * self.omega * self.omega * x * x
    }
}

/// `(Ĥ_Q, Ĥ_Q')` pair for one term of a separable Hamiltonian.
pub type LocalPair = (Operator, Operator);

/// `Ĥ(x, k) = Ĥ₀ + Σ_i x_i Â_i + Σ_i k_i B̂_i` plus an optional classical
/// kinetic term.
#[derive(Clone, Debug)]
pub struct LinearHamiltonian {
    name: String,
    space: HilbertSpace,
    h0: Operator,
    a: Vec<Operator>,
    b: Vec<Operator>,
    split: Option<(LocalPair, Vec<LocalPair>, Vec<LocalPair>)>,
    kinetic: Option<Kinetic>,
}

fn lift(pair: &LocalPair) -> Result<Operator> {
    let (hq, hqp) = pair;
    let left = hq.tensor(&Operator::identity(hqp.space().clone()))?;
    let right = Operator::identity(hq.space().clone()).tensor(hqp)?;
    left.add(&right)
}

impl LinearHamiltonian {
    /// General (possibly entangling) form on an arbitrary space.
    pub fn new(name: &str, h0: Operator, a: Vec<Operator>, b: Vec<Operator>) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::arg("need as many x-couplings as k-couplings"));
        }
        let space = h0.space().clone();
        for op in std::iter::once(&h0).chain(&a).chain(&b) {
            if op.space() != &space {
                return Err(Error::arg("all terms must act on the same space"));
            }
            if !op.is_hermitian() {
                return Err(Error::contract("Hamiltonian terms must be Hermitian"));
            }
        }
        Ok(LinearHamiltonian {
            name: name.to_string(),
            space,
            h0,
            a,
            b,
            split: None,
            kinetic: None,
        })
    }

    /// `Ĥ_Q(x,k) ⊗ 1 + 1 ⊗ Ĥ_Q'(x,k)` with each side linear in `(x, k)`.
    pub fn separable(name: &str, h0: LocalPair, a: Vec<LocalPair>, b: Vec<LocalPair>) -> Result<Self> {
        let full_h0 = lift(&h0)?;
        let full_a = a.iter().map(lift).collect::<Result<Vec<_>>>()?;
        let full_b = b.iter().map(lift).collect::<Result<Vec<_>>>()?;
        let mut h = Self::new(name, full_h0, full_a, full_b)?;
        h.split = Some((h0, a, b));
        Ok(h)
    }

    pub fn with_kinetic(mut self, kinetic: Kinetic) -> Self {
        self.kinetic = Some(kinetic);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    fn classical_energy(&self, x: &[f64], k: &[f64]) -> f64 {
        self.kinetic
            .map(|kin| x.iter().zip(k).map(|(&xi, &ki)| kin.energy(xi, ki)).sum())
            .unwrap_or(0.0)
    }

    fn combine(base: &Operator, terms: &[Operator], coeffs: &[f64]) -> Operator {
        let mut m = base.matrix().clone();
        for (op, &c) in terms.iter().zip(coeffs) {
            m += op.matrix() * C64::new(c, 0.0);
        }
        Operator::new(base.space().clone(), m).expect("same space as base")
    }
}

impl ParamHamiltonian for LinearHamiltonian {
    fn space(&self) -> &HilbertSpace {
        &self.space
    }

    fn num_coords(&self) -> usize {
        self.a.len()
    }

    fn eval(&self, x: &[f64], k: &[f64]) -> Operator {
        let h = Self::combine(&Self::combine(&self.h0, &self.a, x), &self.b, k);
        let e = self.classical_energy(x, k);
        if e == 0.0 {
            return h;
        }
        let n = self.space.total_dim();
        let shifted = h.matrix() + CMatrix::identity(n, n) * C64::new(e, 0.0);
        Operator::new(self.space.clone(), shifted).expect("same space")
    }

    fn grad_x(&self, x: &[f64], _k: &[f64]) -> Vec<Operator> {
        self.a
            .iter()
            .zip(x)
            .map(|(a, &xi)| match self.kinetic {
                Some(kin) => shift(a, kin.mass * kin.omega * kin.omega * xi),
                None => a.clone(),
            })
            .collect()
    }

    fn grad_k(&self, _x: &[f64], k: &[f64]) -> Vec<Operator> {
        self.b
            .iter()
            .zip(k)
            .map(|(b, &ki)| match self.kinetic {
                Some(kin) => shift(b, ki / kin.mass),
                None => b.clone(),
            })
            .collect()
    }

    fn separable_split(&self, x: &[f64], k: &[f64]) -> Option<(Operator, Operator)> {
        let (h0, a, b) = self.split.as_ref()?;
        let mut hq = h0.0.matrix().clone();
        let mut hqp = h0.1.matrix().clone();
        for ((pa, pb), (&xi, &ki)) in a.iter().zip(b).zip(x.iter().zip(k)) {
            hq += pa.0.matrix() * C64::new(xi, 0.0) + pb.0.matrix() * C64::new(ki, 0.0);
            hqp += pa.1.matrix() * C64::new(xi, 0.0) + pb.1.matrix() * C64::new(ki, 0.0);
        }
        // the classical energy is attributed to the Q side
        let e = self.classical_energy(x, k);
        let n = hq.nrows();
        hq += CMatrix::identity(n, n) * C64::new(e, 0.0);
        Some((
            Operator::new(h0.0.space().clone(), hq).ok()?,
            Operator::new(h0.1.space().clone(), hqp).ok()?,
        ))
    }
}

fn shift(op: &Operator, c: f64) -> Operator {
    let n = op.space().total_dim();
    Operator::new(
        op.space().clone(),
        op.matrix() + CMatrix::identity(n, n) * C64::new(c, 0.0),
    )
    .expect("same space")
}

/// Names accepted by [`named_hamiltonian`].
pub const REGISTRY: &[&str] = &["linear-coupling", "negative-control", "precession", "zero"];

/// Registry of Hamiltonians used by scenarios.
///
/// * `linear-coupling`: `x σ_z ⊗ 1 + k 1 ⊗ σ_x` (separable)
/// * `negative-control`: `x σ_z ⊗ σ_z` (entangling)
/// * `precession`: `σ_z` on a single qubit, no classical dependence
/// * `zero`: `0` on two qubits
pub fn named_hamiltonian(name: &str, kinetic: Option<Kinetic>) -> Result<LinearHamiltonian> {
    use crate::hilbert::{pauli_x, pauli_z};
    let q = HilbertSpace::single(2)?;
    let zero = Operator::zero(q.clone());
    let h = match name {
        "linear-coupling" => LinearHamiltonian::separable(
            name,
            (zero.clone(), zero.clone()),
            vec![(pauli_z(), zero.clone())],
            vec![(zero.clone(), pauli_x())],
        )?,
        "negative-control" => {
            let qq = HilbertSpace::qubits(2)?;
            LinearHamiltonian::new(
                name,
                Operator::zero(qq.clone()),
                vec![pauli_z().tensor(&pauli_z())?],
                vec![Operator::zero(qq)],
            )?
        }
        "precession" => LinearHamiltonian::new(name, pauli_z(), vec![zero.clone()], vec![zero])?,
        "zero" => LinearHamiltonian::separable(
            name,
            (zero.clone(), zero.clone()),
            vec![(zero.clone(), zero.clone())],
            vec![(zero.clone(), zero)],
        )?,
        other => {
            return Err(Error::arg(format!(
                "unknown Hamiltonian `{other}`; known: {}",
                REGISTRY.join(", ")
            )))
        }
    };
    Ok(match kinetic {
        Some(kin) => h.with_kinetic(kin),
        None => h,
    })
}

/// Largest relative deviation between the supplied gradients and central
/// finite differences of `eval`, plus a hermiticity check, at `probes`
/// random points.
pub fn gradient_defect(h: &dyn ParamHamiltonian, probes: usize, seed: u64) -> Result<f64> {
    let n = h.num_coords();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..probes {
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let k: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        if !h.eval(&x, &k).is_hermitian() {
            return Err(Error::contract("Hamiltonian evaluates to a non-Hermitian operator"));
        }
        let gx = h.grad_x(&x, &k);
        let gk = h.grad_k(&x, &k);
        if gx.len() != n || gk.len() != n {
            return Err(Error::contract(
                "gradient length differs from the number of coordinates",
            ));
        }
        for i in 0..n {
            for (coords_is_x, analytic) in [(true, &gx[i]), (false, &gk[i])] {
                let (mut xp, mut kp) = (x.clone(), k.clone());
                let (mut xm, mut km) = (x.clone(), k.clone());
                if coords_is_x {
                    xp[i] += step;
                    xm[i] -= step;
                } else {
                    kp[i] += step;
                    km[i] -= step;
                }
                let fd = (h.eval(&xp, &kp).matrix() - h.eval(&xm, &km).matrix()) / C64::new(2.0 * step, 0.0);
                let scale = 1.0 + analytic.matrix().iter().map(|z| z.norm()).fold(0.0, f64::max);
                let diff = crate::hilbert::max_abs_diff(&fd, analytic.matrix());
                worst = worst.max(diff / scale);
            }
        }
    }
    Ok(worst)
}

/// Quantum state together with the classical phase-space point.
#[derive(Clone, Debug, PartialEq)]
pub struct MeanFieldState {
    pub psi: QuantumState,
    pub x: Vec<f64>,
    pub k: Vec<f64>,
    pub t: f64,
}

impl MeanFieldState {
    pub fn new(psi: QuantumState, x: Vec<f64>, k: Vec<f64>) -> Result<Self> {
        if x.len() != k.len() {
            return Err(Error::arg("x and k must have the same length"));
        }
        if (psi.norm() - 1.0).abs() > STATE_NORM_TOLERANCE {
            return Err(Error::contract("mean-field state must be normalised"));
        }
        Ok(MeanFieldState { psi, x, k, t: 0.0 })
    }

    fn check(&self, h: &dyn ParamHamiltonian) -> Result<()> {
        if self.psi.space() != h.space() {
            return Err(Error::arg("state and Hamiltonian live on different spaces"));
        }
        if self.x.len() != h.num_coords() || self.k.len() != h.num_coords() {
            return Err(Error::arg(format!(
                "Hamiltonian has {} classical coordinates, state has {}",
                h.num_coords(),
                self.x.len()
            )));
        }
        Ok(())
    }
}

/// `H̄(x, k) = ⟨ψ|Ĥ(x, k)|ψ⟩`.
pub fn mean_hamiltonian(h: &dyn ParamHamiltonian, s: &MeanFieldState) -> Result<f64> {
    s.check(h)?;
    Ok(expect(&h.eval(&s.x, &s.k), s.psi.amplitudes()))
}

fn expect(op: &Operator, v: &CVector) -> f64 {
    v.dotc(&(op.matrix() * v)).re
}

/// Time derivative of the joint state.
#[derive(Clone, Debug, PartialEq)]
pub struct Derivative {
    pub dpsi: CVector,
    pub dx: Vec<f64>,
    pub dk: Vec<f64>,
}

fn raw_derivative(h: &dyn ParamHamiltonian, psi: &CVector, x: &[f64], k: &[f64], hbar: f64) -> Derivative {
    let dpsi = (h.eval(x, k).matrix() * psi) * (-I / hbar);
    // the state need not be normalised inside an RK4 stage
    let n2 = psi.norm_squared();
    let dx = h.grad_k(x, k).iter().map(|g| expect(g, psi) / n2).collect();
    let dk = h.grad_x(x, k).iter().map(|g| -expect(g, psi) / n2).collect();
    Derivative { dpsi, dx, dk }
}

pub fn derivative(h: &dyn ParamHamiltonian, s: &MeanFieldState, hbar: f64) -> Result<Derivative> {
    s.check(h)?;
    Ok(raw_derivative(h, s.psi.amplitudes(), &s.x, &s.k, hbar))
}

/// One recorded point of a trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub state: MeanFieldState,
    pub energy: f64,
    /// Norm of the state before renormalisation at this step.
    pub norm: f64,
    /// Purity of the reduced state of the first subsystem; 1 for a single
    /// subsystem.
    pub purity_q: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    /// Largest per-step norm drift removed by renormalisation.
    pub max_step_drift: f64,
    /// Largest `1 − purity(ρ_Q)` over every integration step.
    pub max_purity_deficit: f64,
    pub steps: usize,
}

impl Trajectory {
    pub fn last(&self) -> &Sample {
        self.samples
            .last()
            .expect("trajectories hold at least the initial sample")
    }

    pub fn max_energy_drift(&self) -> f64 {
        let e0 = self.samples[0].energy;
        self.samples.iter().map(|s| (s.energy - e0).abs()).fold(0.0, f64::max)
    }

    pub fn max_norm_drift(&self) -> f64 {
        self.samples.iter().map(|s| (s.norm - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Plot-ready table: `t, x_0.., k_0.., energy, norm, purity_q`.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        let n = self.samples.first().map(|s| s.state.x.len()).unwrap_or(0);
        let mut header = vec!["t".to_string()];
        header.extend((0..n).map(|i| format!("x{i}")));
        header.extend((0..n).map(|i| format!("k{i}")));
        header.extend(["energy", "norm", "purity_q"].map(String::from));
        writeln!(out, "{}", header.join(","))?;
        for s in &self.samples {
            let mut row = vec![s.state.t];
            row.extend(&s.state.x);
            row.extend(&s.state.k);
            row.extend([s.energy, s.norm, s.purity_q]);
            let cells: Vec<String> = row.iter().map(|v| crate::table::format_g17(*v)).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

fn purity_first(space: &HilbertSpace, psi: &CVector) -> f64 {
    if space.num_subsystems() < 2 {
        return 1.0;
    }
    let dq = space.dims()[0];
    let rest = space.total_dim() / dq;
    let a = CMatrix::from_fn(dq, rest, |i, j| psi[i * rest + j]);
    let rho = &a * a.adjoint();
    let n2 = psi.norm_squared();
    rho.iter().map(|z| z.norm_sqr()).sum::<f64>() / (n2 * n2)
}

/// Integration settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
    pub dt: f64,
    pub t_end: f64,
    /// Record every `sample_every`-th step (the final step is always kept).
    pub sample_every: usize,
    pub hbar: f64,
}

impl EvolveOptions {
    pub fn new(dt: f64, t_end: f64) -> Self {
        EvolveOptions {
            dt,
            t_end,
            sample_every: 1,
            hbar: crate::DEFAULT_HBAR,
        }
    }
}

/// Fixed-step RK4 integration of the coupled system from `s0.t` to `t_end`.
pub fn evolve(h: &dyn ParamHamiltonian, s0: &MeanFieldState, opts: &EvolveOptions) -> Result<Trajectory> {
    s0.check(h)?;
    if !(opts.dt > 0.0) {
        return Err(Error::arg(format!("dt must be positive, got {}", opts.dt)));
    }
    if !(opts.t_end >= s0.t) {
        return Err(Error::arg(format!(
            "t_end {} precedes the start time {}",
            opts.t_end, s0.t
        )));
    }
    if opts.sample_every == 0 {
        return Err(Error::arg("sample_every must be at least 1"));
    }
    let defect = gradient_defect(h, 3, 0x5eed)?;
    if defect > GRADIENT_TOLERANCE {
        return Err(Error::contract(format!(
            "supplied gradients disagree with finite differences ({defect:.3e})"
        )));
    }
    let hbar = opts.hbar;
    let space = h.space().clone();
    let span = opts.t_end - s0.t;
    let steps = ((span / opts.dt) - 1e-9).ceil().max(0.0) as usize;

    let sample = |psi: &CVector, x: &[f64], k: &[f64], t: f64, norm: f64| -> Result<Sample> {
        let state = MeanFieldState {
            psi: QuantumState::normalized(space.clone(), psi.clone())?,
            x: x.to_vec(),
            k: k.to_vec(),
            t,
        };
        Ok(Sample {
            energy: expect(&h.eval(x, k), state.psi.amplitudes()),
            purity_q: purity_first(&space, psi),
            state,
            norm,
        })
    };

    let mut psi = s0.psi.amplitudes().clone();
    let mut x = s0.x.clone();
    let mut k = s0.k.clone();
    let mut t = s0.t;
    let mut samples = vec![sample(&psi, &x, &k, t, psi.norm())?];
    let mut max_drift: f64 = 0.0;
    let mut max_deficit: f64 = 1.0 - samples[0].purity_q;

    let axpy = |base: &[f64], d: &[f64], c: f64| -> Vec<f64> { base.iter().zip(d).map(|(b, v)| b + c * v).collect() };

    for step in 1..=steps {
        let dt = if step == steps { opts.t_end - t } else { opts.dt };
        let c = |v: f64| C64::new(v, 0.0);
        let k1 = raw_derivative(h, &psi, &x, &k, hbar);
        let k2 = raw_derivative(
            h,
            &(&psi + &k1.dpsi * c(dt / 2.0)),
            &axpy(&x, &k1.dx, dt / 2.0),
            &axpy(&k, &k1.dk, dt / 2.0),
            hbar,
        );
        let k3 = raw_derivative(
            h,
            &(&psi + &k2.dpsi * c(dt / 2.0)),
            &axpy(&x, &k2.dx, dt / 2.0),
            &axpy(&k, &k2.dk, dt / 2.0),
            hbar,
        );
        let k4 = raw_derivative(
            h,
            &(&psi + &k3.dpsi * c(dt)),
            &axpy(&x, &k3.dx, dt),
            &axpy(&k, &k3.dk, dt),
            hbar,
        );
        psi += (&k1.dpsi + &k2.dpsi * c(2.0) + &k3.dpsi * c(2.0) + &k4.dpsi) * c(dt / 6.0);
        for i in 0..x.len() {
            x[i] += dt / 6.0 * (k1.dx[i] + 2.0 * k2.dx[i] + 2.0 * k3.dx[i] + k4.dx[i]);
            k[i] += dt / 6.0 * (k1.dk[i] + 2.0 * k2.dk[i] + 2.0 * k3.dk[i] + k4.dk[i]);
        }
        t = if step == steps {
            opts.t_end
        } else {
            s0.t + step as f64 * opts.dt
        };

        let norm = psi.norm();
        let drift = (norm - 1.0).abs();
        if drift > MAX_STEP_DRIFT {
            return Err(Error::StepSize { drift, t, dt });
        }
        max_drift = max_drift.max(drift);
        psi.unscale_mut(norm);
        max_deficit = max_deficit.max(1.0 - purity_first(&space, &psi));
        if step % opts.sample_every == 0 || step == steps {
            samples.push(sample(&psi, &x, &k, t, norm)?);
        }
    }
    log::debug!("mean-field run: {steps} steps, max per-step norm drift {max_drift:.3e}");
    Ok(Trajectory {
        samples,
        max_step_drift: max_drift,
        max_purity_deficit: max_deficit,
        steps,
    })
}

/// Largest `1 − purity(ρ_Q)` along a trajectory started from a product
/// state under a separable Hamiltonian. Should stay at integrator error.
pub fn factorization_check(h: &dyn ParamHamiltonian, s0: &MeanFieldState, opts: &EvolveOptions) -> Result<f64> {
    s0.check(h)?;
    if h.separable_split(&s0.x, &s0.k).is_none() {
        return Err(Error::arg("factorization check needs a separable Hamiltonian"));
    }
    if h.space().num_subsystems() != 2 {
        return Err(Error::arg("factorization check needs exactly two quantum subsystems"));
    }
    let p = purity_first(h.space(), s0.psi.amplitudes());
    if (1.0 - p) > 1e-12 {
        return Err(Error::arg(format!("initial state is not a product state (purity {p})")));
    }
    Ok(evolve(h, s0, opts)?.max_purity_deficit)
}

/// Result of evolving a superposition versus superposing evolutions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonlinearityWitness {
    /// `|⟨evolve(ψ₀+φ₀) | evolve(ψ₀)+evolve(φ₀)⟩|`, both normalised.
    pub cross_fidelity: f64,
}

/// Evolves `ψ₀`, `φ₀` and their normalised sum from the same classical
/// starting point and compares the sum of the first two with the third.
pub fn nonlinearity_witness(
    h: &dyn ParamHamiltonian,
    psi0: &QuantumState,
    phi0: &QuantumState,
    x0: &[f64],
    k0: &[f64],
    opts: &EvolveOptions,
) -> Result<NonlinearityWitness> {
    let run = |psi: &QuantumState| -> Result<QuantumState> {
        let s = MeanFieldState::new(psi.clone(), x0.to_vec(), k0.to_vec())?;
        Ok(evolve(h, &s, opts)?.last().state.psi.clone())
    };
    let sum0 = QuantumState::normalized(psi0.space().clone(), psi0.amplitudes() + phi0.amplitudes())?;
    let together = run(&sum0)?;
    let a = run(psi0)?;
    let b = run(phi0)?;
    let separately = QuantumState::normalized(a.space().clone(), a.amplitudes() + b.amplitudes())?;
    Ok(NonlinearityWitness {
        cross_fidelity: together.fidelity(&separately)?,
    })
}

/// The documented witness: `linear-coupling`, `ψ₀ = |00⟩`, `φ₀ = |11⟩`,
/// `(x, k) = (1, 0)`, evolved to `t = 2` with `dt = 10⁻³`.
pub fn default_nonlinearity_witness() -> Result<NonlinearityWitness> {
    let h = named_hamiltonian("linear-coupling", None)?;
    let qq = HilbertSpace::qubits(2)?;
    let psi0 = QuantumState::basis(qq.clone(), 0)?;
    let phi0 = QuantumState::basis(qq, 3)?;
    nonlinearity_witness(&h, &psi0, &phi0, &[1.0], &[0.0], &EvolveOptions::new(1e-3, 2.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{pauli_x, pauli_z};

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn qubit(a: f64, b: f64) -> QuantumState {
        QuantumState::from_slice(HilbertSpace::single(2).unwrap(), &[c(a), c(b)]).unwrap()
    }

    fn x_sigma_z() -> LinearHamiltonian {
        let q = HilbertSpace::single(2).unwrap();
        LinearHamiltonian::new(
            "x-sigma-z",
            Operator::zero(q.clone()),
            vec![pauli_z()],
            vec![Operator::zero(q)],
        )
        .unwrap()
    }

    #[test]
    fn mean_hamiltonian_examples() {
        let h = named_hamiltonian("precession", None).unwrap();
        let s = MeanFieldState::new(qubit(1.0, 0.0), vec![0.3], vec![0.1]).unwrap();
        assert!((mean_hamiltonian(&h, &s).unwrap() - 1.0).abs() < 1e-15);

        let h = x_sigma_z();
        for x in [-2.0, 0.5, 7.0] {
            let s = MeanFieldState::new(qubit(1.0, 1.0), vec![x], vec![0.0]).unwrap();
            assert!(mean_hamiltonian(&h, &s).unwrap().abs() < 1e-15);
        }

        // ⟨00| 2 σz⊗1 + 3 1⊗σx |00⟩ = 2·1 + 3·0
        let h = named_hamiltonian("linear-coupling", None).unwrap();
        let psi = qubit(1.0, 0.0).tensor(&qubit(1.0, 0.0)).unwrap();
        let s = MeanFieldState::new(psi, vec![2.0], vec![3.0]).unwrap();
        assert!((mean_hamiltonian(&h, &s).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn derivative_examples() {
        let h = named_hamiltonian("precession", None).unwrap();
        let s = MeanFieldState::new(qubit(1.0, 1.0), vec![1.0], vec![1.0]).unwrap();
        let d = derivative(&h, &s, 1.0).unwrap();
        assert_eq!((d.dx[0], d.dk[0]), (0.0, 0.0));

        let h = x_sigma_z();
        let s = MeanFieldState::new(qubit(1.0, 0.0), vec![0.4], vec![0.0]).unwrap();
        let d = derivative(&h, &s, 1.0).unwrap();
        assert_eq!(d.dx[0], 0.0);
        assert!((d.dk[0] + 1.0).abs() < 1e-15);

        let s = MeanFieldState::new(qubit(1.0, 1.0), vec![0.4], vec![0.0]).unwrap();
        assert!(derivative(&h, &s, 1.0).unwrap().dk[0].abs() < 1e-15);
    }

    #[test]
    fn zero_hamiltonian_is_static() {
        let h = named_hamiltonian("zero", None).unwrap();
        let psi = qubit(0.6, 0.8).tensor(&qubit(1.0, 1.0)).unwrap();
        let s = MeanFieldState::new(psi.clone(), vec![0.2], vec![-1.0]).unwrap();
        let traj = evolve(&h, &s, &EvolveOptions::new(0.01, 1.0)).unwrap();
        let last = traj.last();
        assert_eq!(last.state.x, vec![0.2]);
        assert_eq!(last.state.k, vec![-1.0]);
        assert!((last.state.psi.amplitudes() - psi.amplitudes()).norm() < 1e-15);
        assert!(factorization_check(&h, &s, &EvolveOptions::new(0.01, 1.0)).unwrap() < 1e-14);
    }

    #[test]
    fn precession_phase_matches_closed_form() {
        let h = named_hamiltonian("precession", None).unwrap();
        let s = MeanFieldState::new(qubit(1.0, 1.0), vec![0.5], vec![0.25]).unwrap();
        let t_end = 1.7;
        let traj = evolve(&h, &s, &EvolveOptions::new(1e-3, t_end)).unwrap();
        let a = traj.last().state.psi.amplitudes();
        let relative = a[0] / a[1];
        let expect = (-I * (2.0 * t_end)).exp();
        assert!((relative - expect).norm() < 1e-9);
        assert_eq!(traj.last().state.x, vec![0.5]);
        assert_eq!(traj.last().state.t, t_end);
    }

    fn linear_start() -> MeanFieldState {
        let psi = qubit(1.0, 1.0).tensor(&qubit(1.0, 0.0)).unwrap();
        MeanFieldState::new(psi, vec![1.0], vec![0.5]).unwrap()
    }

    #[test]
    fn rk4_self_convergence_is_fourth_order() {
        let h = named_hamiltonian("linear-coupling", None).unwrap();
        let s = linear_start();
        let run = |dt: f64| {
            let last = evolve(&h, &s, &EvolveOptions::new(dt, 2.0)).unwrap().last().clone();
            let mut v: Vec<f64> = last.state.x.clone();
            v.extend(&last.state.k);
            v.extend(last.state.psi.amplitudes().iter().flat_map(|z| [z.re, z.im]));
            v
        };
        let (a, b, c) = (run(0.04), run(0.02), run(0.01));
        let diff = |u: &[f64], w: &[f64]| u.iter().zip(w).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        let order = (diff(&a, &b) / diff(&b, &c)).log2();
        assert!(order > 3.7 && order < 4.3, "observed order {order}");
    }

    #[test]
    fn separable_hamiltonian_preserves_products() {
        let h = named_hamiltonian("linear-coupling", None).unwrap();
        let opts = EvolveOptions::new(1e-3, 5.0);
        let traj = evolve(&h, &linear_start(), &opts).unwrap();
        assert!(traj.max_purity_deficit <= 1e-8);
        assert!(traj.max_energy_drift() <= 1e-6 * (1.0 + traj.samples[0].energy.abs()));
        assert!(factorization_check(&h, &linear_start(), &opts).unwrap() <= 1e-8);
    }

    #[test]
    fn kinetic_terms_conserve_energy() {
        let h = named_hamiltonian("linear-coupling", Some(Kinetic { mass: 2.0, omega: 1.5 })).unwrap();
        assert!(gradient_defect(&h, 5, 1).unwrap() < 1e-6);
        let traj = evolve(&h, &linear_start(), &EvolveOptions::new(1e-3, 3.0)).unwrap();
        assert!(traj.max_energy_drift() <= 1e-6 * (1.0 + traj.samples[0].energy.abs()));
        assert!(traj.max_purity_deficit <= 1e-8);
    }

    #[test]
    fn negative_control_entangles() {
        let h = named_hamiltonian("negative-control", None).unwrap();
        assert!(factorization_check(&h, &linear_start(), &EvolveOptions::new(1e-3, 1.0)).is_err());
        let psi = qubit(1.0, 1.0).tensor(&qubit(1.0, 1.0)).unwrap();
        let s = MeanFieldState::new(psi, vec![1.0], vec![0.0]).unwrap();
        let traj = evolve(&h, &s, &EvolveOptions::new(1e-3, 1.0)).unwrap();
        assert!(traj.max_purity_deficit > 0.01);
    }

    #[test]
    fn factorization_check_rejects_entangled_start() {
        let h = named_hamiltonian("linear-coupling", None).unwrap();
        let bell =
            QuantumState::from_slice(HilbertSpace::qubits(2).unwrap(), &[c(1.0), c(0.0), c(0.0), c(1.0)]).unwrap();
        let s = MeanFieldState::new(bell, vec![0.0], vec![0.0]).unwrap();
        assert!(factorization_check(&h, &s, &EvolveOptions::new(1e-2, 1.0)).is_err());
    }

    #[test]
    fn coarse_step_is_rejected() {
        let q = HilbertSpace::single(2).unwrap();
        let h = LinearHamiltonian::new(
            "big",
            pauli_x().scale(50.0),
            vec![Operator::zero(q.clone())],
            vec![Operator::zero(q)],
        )
        .unwrap();
        let s = MeanFieldState::new(qubit(1.0, 0.0), vec![0.0], vec![0.0]).unwrap();
        let err = evolve(&h, &s, &EvolveOptions::new(0.1, 1.0)).unwrap_err();
        assert!(matches!(err, Error::StepSize { .. }));
    }

    #[test]
    fn superposition_does_not_evolve_linearly() {
        let w = default_nonlinearity_witness().unwrap();
        assert!(w.cross_fidelity < 1.0 - 1e-6, "fidelity {}", w.cross_fidelity);
    }

    #[test]
    fn csv_has_expected_columns() {
        let h = named_hamiltonian("linear-coupling", None).unwrap();
        let mut opts = EvolveOptions::new(0.01, 0.1);
        opts.sample_every = 5;
        let traj = evolve(&h, &linear_start(), &opts).unwrap();
        assert_eq!(traj.samples.len(), 3);
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,x0,k0,energy,norm,purity_q");
        let first: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(first[1], 1.0);
        assert_eq!(first[2], 0.5);
    }

    #[test]
    fn unknown_registry_name() {
        assert!(named_hamiltonian("nope", None).is_err());
        for name in REGISTRY {
            let h = named_hamiltonian(name, None).unwrap();
            assert!(gradient_defect(&h, 2, 0).unwrap() < 1e-6);
        }
    }
}
