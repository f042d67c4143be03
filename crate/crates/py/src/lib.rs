//! Python bindings for `mediator-core`.

use mediator_core::counterexamples::{
    evolve_general_bch, general_entanglement, mixture_density, postselect_x, propagate_particle, GeneralScenario,
    MediatorPacket, PacketShape, ParticleScenario, Span,
};
use mediator_core::ensemble::GaussianPacket;
use mediator_core::hilbert::{negativity, schmidt, Bipartition, DensityOperator, HilbertSpace, QuantumState};
use mediator_core::koopman::{
    dense_equivalence_defect, run_koopman_scenario, InteractionKind, KoopmanScenario, SectorInput,
};
use mediator_core::meanfield::{evolve, named_hamiltonian, nonlinearity_witness, EvolveOptions, MeanFieldState};
use mediator_core::Error;
use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(mediator, CapacityError, PyException, "A size limit was exceeded.");
create_exception!(mediator, NumericalError, PyException, "A numerical guard tripped.");

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Argument(_) | Error::Contract(_) | Error::Domain(_) => PyValueError::new_err(e.to_string()),
        Error::Capacity { .. } => CapacityError::new_err(e.to_string()),
        _ => NumericalError::new_err(e.to_string()),
    }
}

trait OrPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> OrPy<T> for mediator_core::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

/// Pure state on a tensor product of finite-dimensional spaces.
#[pyclass(name = "QuantumState", module = "mediator", skip_from_py_object)]
#[derive(Clone)]
struct PyQuantumState {
    inner: QuantumState,
}

#[pymethods]
impl PyQuantumState {
    /// Normalizes `amplitudes`, ordered with the last subsystem fastest.
    #[new]
    fn new(dims: Vec<usize>, amplitudes: Vec<Complex64>) -> PyResult<Self> {
        let space = HilbertSpace::new(dims).py()?;
        let v = mediator_core::hilbert::CVector::from_vec(amplitudes);
        Ok(PyQuantumState {
            inner: QuantumState::normalized(space, v).py()?,
        })
    }

    #[staticmethod]
    fn product(factors: Vec<PyRef<'_, PyQuantumState>>) -> PyResult<Self> {
        let states: Vec<QuantumState> = factors.iter().map(|f| f.inner.clone()).collect();
        Ok(PyQuantumState {
            inner: QuantumState::product(&states).py()?,
        })
    }

    #[getter]
    fn dims(&self) -> Vec<usize> {
        self.inner.space().dims().to_vec()
    }

    #[getter]
    fn amplitudes(&self) -> Vec<Complex64> {
        self.inner.amplitudes().iter().copied().collect()
    }

    fn norm(&self) -> f64 {
        self.inner.norm()
    }

    fn tensor(&self, other: &PyQuantumState) -> PyResult<Self> {
        Ok(PyQuantumState {
            inner: self.inner.tensor(&other.inner).py()?,
        })
    }

    fn fidelity(&self, other: &PyQuantumState) -> PyResult<f64> {
        self.inner.fidelity(&other.inner).py()
    }

    /// Schmidt coefficients across the cut `left | rest`.
    fn schmidt_values(&self, left: Vec<usize>) -> PyResult<Vec<f64>> {
        Ok(schmidt(&self.inner, &Bipartition::new(left)).py()?.schmidt_values)
    }

    /// Entanglement entropy in nats across `left | rest`.
    fn entropy(&self, left: Vec<usize>) -> PyResult<f64> {
        Ok(schmidt(&self.inner, &Bipartition::new(left)).py()?.entropy)
    }

    fn negativity(&self, left: Vec<usize>) -> PyResult<f64> {
        Ok(schmidt(&self.inner, &Bipartition::new(left)).py()?.negativity)
    }

    fn density(&self) -> PyResult<PyDensityOperator> {
        Ok(PyDensityOperator {
            inner: DensityOperator::pure(&self.inner).py()?,
        })
    }

    fn __repr__(&self) -> String {
        format!("QuantumState(dims={:?})", self.inner.space().dims())
    }
}

#[pyclass(name = "DensityOperator", module = "mediator", skip_from_py_object)]
#[derive(Clone)]
struct PyDensityOperator {
    inner: DensityOperator,
}

#[pymethods]
impl PyDensityOperator {
    #[getter]
    fn dims(&self) -> Vec<usize> {
        self.inner.space().dims().to_vec()
    }

    fn trace(&self) -> f64 {
        self.inner.trace()
    }

    fn purity(&self) -> f64 {
        self.inner.purity()
    }

    fn eigenvalues(&self) -> Vec<f64> {
        self.inner.eigenvalues()
    }

    fn partial_trace(&self, keep: Vec<usize>) -> PyResult<Self> {
        Ok(PyDensityOperator {
            inner: self.inner.partial_trace(&keep).py()?,
        })
    }

    fn negativity(&self, left: Vec<usize>) -> PyResult<f64> {
        negativity(&self.inner, &Bipartition::new(left)).py()
    }

    /// Row-major matrix entries.
    fn matrix(&self) -> Vec<Vec<Complex64>> {
        let m = self.inner.matrix();
        (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
    }

    fn __repr__(&self) -> String {
        format!("DensityOperator(dims={:?})", self.inner.space().dims())
    }
}

fn packet(mean: f64, width: f64, momentum: f64) -> PyResult<GaussianPacket> {
    GaussianPacket::new(mean, width, momentum).py()
}

/// Particle counterexample on a product grid for `(q, q', x)`.
#[pyclass(name = "ParticleScenario", module = "mediator", skip_from_py_object)]
#[derive(Clone)]
struct PyParticleScenario {
    inner: ParticleScenario,
}

#[pymethods]
impl PyParticleScenario {
    #[new]
    #[pyo3(signature = (g1=1.0, g2=1.0, t=1.0, width_q=1.0, width_q_prime=1.0, width_c=1.0, q_points=129, x_points=257, hbar=1.0))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        g1: f64,
        g2: f64,
        t: f64,
        width_q: f64,
        width_q_prime: f64,
        width_c: f64,
        q_points: usize,
        x_points: usize,
        hbar: f64,
    ) -> PyResult<Self> {
        let base = ParticleScenario::default();
        let s = ParticleScenario {
            g1,
            g2,
            t,
            hbar,
            psi_q: packet(0.0, width_q, 0.0)?,
            psi_q_prime: packet(0.0, width_q_prime, 0.0)?,
            psi_c: packet(0.0, width_c, 0.0)?,
            q_grid: Span {
                points: q_points,
                ..base.q_grid
            },
            q_prime_grid: Span {
                points: q_points,
                ..base.q_prime_grid
            },
            x_grid: Span {
                points: x_points,
                ..base.x_grid
            },
            ..base
        };
        s.validate().py()?;
        Ok(PyParticleScenario { inner: s })
    }

    /// Quadrature mass of the propagated density before renormalization.
    fn raw_mass(&self) -> PyResult<f64> {
        Ok(propagate_particle(&self.inner).py()?.raw_mass)
    }

    /// Conditional `(q, q')` state at `x = a`: probability, entropy, negativity.
    fn postselect<'py>(&self, py: Python<'py>, a: f64) -> PyResult<Bound<'py, PyDict>> {
        let post = postselect_x(&self.inner, a).py()?;
        let d = PyDict::new(py);
        d.set_item("a", post.a)?;
        d.set_item("probability", post.probability)?;
        d.set_item("entropy", post.report.entropy)?;
        d.set_item("negativity", post.report.negativity)?;
        d.set_item("schmidt_values", post.report.schmidt_values)?;
        Ok(d)
    }

    /// Reduced `(q, q')` density after integrating out `x` on the coarse grid.
    fn mixture<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let m = mixture_density(&self.inner).py()?;
        let d = PyDict::new(py);
        d.set_item("negativity", m.negativity)?;
        d.set_item("purity", m.rho.purity())?;
        d.set_item("trace_error", m.trace_error)?;
        d.set_item("weight_sum", m.weight_sum)?;
        d.set_item("slices", m.slices)?;
        Ok(d)
    }
}

/// Negativity of the reduced `QQ'` state for `M = N = σz`, `|+⟩|+⟩` and a
/// mediator packet of the given width and shape (`"gaussian"` or `"hermite1"`).
#[pyfunction]
#[pyo3(signature = (width, t, shape="gaussian", points=256, extent=16.0, hbar=1.0))]
fn general_negativity(width: f64, t: f64, shape: &str, points: usize, extent: f64, hbar: f64) -> PyResult<f64> {
    let shape = match shape {
        "gaussian" => PacketShape::Gaussian,
        "hermite1" => PacketShape::Hermite1,
        other => return Err(PyValueError::new_err(format!("unknown shape `{other}`"))),
    };
    let psi_c = MediatorPacket {
        packet: packet(0.0, width, 0.0)?,
        shape,
    };
    let plus = QuantumState::normalized(
        HilbertSpace::single(2).py()?,
        mediator_core::hilbert::CVector::from_vec(vec![Complex64::new(1.0, 0.0); 2]),
    )
    .py()?;
    let z = mediator_core::hilbert::pauli_z();
    let s = GeneralScenario::new(
        z.clone(),
        z,
        Span::new(-extent, extent, points),
        t,
        plus.clone(),
        plus,
        psi_c,
        hbar,
    )
    .py()?;
    let psi = evolve_general_bch(&s).py()?;
    Ok(general_entanglement(&s, &psi).py()?.negativity)
}

fn sector_input(name: &str) -> PyResult<SectorInput> {
    match name {
        "product-pure" => Ok(SectorInput::ProductPure),
        "product-mixed" => Ok(SectorInput::ProductMixed),
        "bell" => Ok(SectorInput::Bell),
        other => Err(PyValueError::new_err(format!("unknown sector input `{other}`"))),
    }
}

fn interaction_kind(name: &str) -> PyResult<InteractionKind> {
    match name {
        "haar" => Ok(InteractionKind::Haar),
        "identity" => Ok(InteractionKind::Identity),
        other => Err(PyValueError::new_err(format!("unknown interaction `{other}`"))),
    }
}

/// Runs one block-diagonal Koopman scenario and returns its negativities.
#[pyfunction]
#[pyo3(signature = (num_labels=3, sector_dim=2, rounds=2, seed=0, input="product-pure", interaction="haar", dense=false))]
#[allow(clippy::too_many_arguments)]
fn koopman<'py>(
    py: Python<'py>,
    num_labels: usize,
    sector_dim: usize,
    rounds: usize,
    seed: u64,
    input: &str,
    interaction: &str,
    dense: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = KoopmanScenario {
        dim_q: 2,
        dim_q_prime: 2,
        num_labels,
        sector_dim,
        rounds,
        input: sector_input(input)?,
        interaction: interaction_kind(interaction)?,
        seed,
    };
    let r = run_koopman_scenario(&cfg).py()?;
    let d = PyDict::new(py);
    d.set_item("initial_reduced_negativity", r.initial_reduced_negativity)?;
    d.set_item("final_reduced_negativity", r.final_reduced_negativity)?;
    d.set_item("max_postselected_negativity", r.max_postselected_negativity)?;
    d.set_item("initial_sector_negativity", r.initial_sector_negativity)?;
    d.set_item("final_sector_negativity", r.final_sector_negativity)?;
    d.set_item("probabilities", r.probabilities)?;
    if dense {
        d.set_item("dense_defect", dense_equivalence_defect(&cfg).py()?)?;
    }
    Ok(d)
}

/// Mean-field evolution under a registered Hamiltonian.
#[pyfunction]
#[pyo3(signature = (hamiltonian, psi, x, k, dt=1e-3, t_end=1.0, hbar=1.0))]
#[allow(clippy::too_many_arguments)]
fn meanfield<'py>(
    py: Python<'py>,
    hamiltonian: &str,
    psi: &PyQuantumState,
    x: Vec<f64>,
    k: Vec<f64>,
    dt: f64,
    t_end: f64,
    hbar: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let h = named_hamiltonian(hamiltonian, None).py()?;
    let s0 = MeanFieldState::new(psi.inner.clone(), x, k).py()?;
    let opts = EvolveOptions {
        hbar,
        ..EvolveOptions::new(dt, t_end)
    };
    let traj = evolve(&h, &s0, &opts).py()?;
    let last = traj.last();
    let d = PyDict::new(py);
    d.set_item("t", last.state.t)?;
    d.set_item("x", last.state.x.clone())?;
    d.set_item("k", last.state.k.clone())?;
    d.set_item(
        "psi",
        PyQuantumState {
            inner: last.state.psi.clone(),
        },
    )?;
    d.set_item("max_purity_deficit", traj.max_purity_deficit)?;
    d.set_item("max_energy_drift", traj.max_energy_drift())?;
    d.set_item("max_norm_drift", traj.max_norm_drift())?;
    d.set_item("steps", traj.steps)?;
    Ok(d)
}

/// Fidelity between the evolved normalized sum `ψ + φ` and the normalized sum
/// of the separately evolved states.
#[pyfunction]
#[pyo3(signature = (hamiltonian, psi, phi, x, k, dt=1e-3, t_end=1.0, hbar=1.0))]
#[allow(clippy::too_many_arguments)]
fn cross_fidelity(
    hamiltonian: &str,
    psi: &PyQuantumState,
    phi: &PyQuantumState,
    x: Vec<f64>,
    k: Vec<f64>,
    dt: f64,
    t_end: f64,
    hbar: f64,
) -> PyResult<f64> {
    let h = named_hamiltonian(hamiltonian, None).py()?;
    let opts = EvolveOptions {
        hbar,
        ..EvolveOptions::new(dt, t_end)
    };
    let w = nonlinearity_witness(&h, &psi.inner, &phi.inner, &x, &k, &opts).py()?;
    Ok(w.cross_fidelity)
}

#[pymodule]
fn mediator(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyQuantumState>()?;
    m.add_class::<PyDensityOperator>()?;
    m.add_class::<PyParticleScenario>()?;
    m.add_function(wrap_pyfunction!(koopman, m)?)?;
    m.add_function(wrap_pyfunction!(meanfield, m)?)?;
    m.add_function(wrap_pyfunction!(cross_fidelity, m)?)?;
    m.add_function(wrap_pyfunction!(general_negativity, m)?)?;
    m.add("CapacityError", m.py().get_type::<CapacityError>())?;
    m.add("NumericalError", m.py().get_type::<NumericalError>())?;
    m.add("HAMILTONIANS", mediator_core::meanfield::REGISTRY.to_vec())?;
    Ok(())
}
