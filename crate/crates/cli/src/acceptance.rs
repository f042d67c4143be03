//! The acceptance suite: eight criteria with parameters and tolerances from
//! `presets/acceptance.toml`.

use std::time::Instant;

use mediator_core::counterexamples::{
    mixture_density, postselect_x, propagate_particle, width_sweep, GeneralScenario, MediatorPacket, ParticleScenario,
    Span,
};
use mediator_core::hilbert::{pauli_z, QuantumState};
use mediator_core::koopman::{
    dense_equivalence_defect, run_koopman_scenario, InteractionKind, KoopmanScenario, SectorInput,
};
use mediator_core::meanfield::{evolve, named_hamiltonian, nonlinearity_witness, EvolveOptions, MeanFieldState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{parse_toml, Amplitudes, RunConfig, Scenario, StateSpec};
use crate::error::{CliError, CliResult};
use crate::report::{content_hash, Check, Relation};
use crate::scenarios::{cb_sweep, invariant_axes, moment_shift, qb_sweep, refined, refinement_check, relative_change};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcceptanceConfig {
    pub seed: u64,
    pub koopman_nogo: KoopmanNoGo,
    pub koopman_dense: KoopmanDense,
    pub factorization: Factorization,
    pub nonlinearity: Nonlinearity,
    pub brackets: Brackets,
    pub particles: Particles,
    pub general: General,
    pub mixture: Mixture,
}

/// Inclusive ranges for random Koopman scenarios.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KoopmanNoGo {
    pub trials: usize,
    pub labels: [usize; 2],
    pub rounds: [usize; 2],
    pub sector_dims: [usize; 2],
    pub negativity: f64,
    pub runtime: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KoopmanDense {
    pub trials: usize,
    pub labels: [usize; 2],
    pub rounds: [usize; 2],
    pub sector_dims: [usize; 2],
    pub defect: f64,
    pub runtime: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Factorization {
    pub hamiltonian: String,
    pub control: String,
    pub psi_q: Vec<f64>,
    pub psi_q_prime: Vec<f64>,
    pub control_psi_q_prime: Vec<f64>,
    pub x0: Vec<f64>,
    pub k0: Vec<f64>,
    pub dt: f64,
    pub t_end: f64,
    pub purity: f64,
    pub energy: f64,
    pub norm: f64,
    pub control_purity: f64,
    pub runtime: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Nonlinearity {
    pub hamiltonian: String,
    pub psi0: Vec<f64>,
    pub phi0: Vec<f64>,
    pub x0: Vec<f64>,
    pub k0: Vec<f64>,
    pub dt: f64,
    pub t_end: f64,
    pub fidelity_gap: f64,
    pub runtime: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Brackets {
    pub qb_pairs: usize,
    pub levels: Vec<usize>,
    pub qb_states: usize,
    pub qb: f64,
    pub cb_points: Vec<usize>,
    pub min_order: f64,
    pub runtime: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Particles {
    pub postselect_a: f64,
    pub min_entropy: f64,
    pub refinement: f64,
    pub control_entropy: f64,
    pub mass: f64,
    pub moments: f64,
    pub moment_order: u32,
    pub runtime: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct General {
    pub t: f64,
    pub widths: Vec<f64>,
    pub x_grid: Span,
    pub min_negativity: f64,
    pub fidelity_gap: f64,
    pub runtime: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mixture {
    pub trace: f64,
    pub probability: f64,
    pub runtime: f64,
}

impl AcceptanceConfig {
    pub fn preset() -> Self {
        parse_toml(crate::presets::ACCEPTANCE).expect("acceptance preset parses")
    }

    pub fn from_toml(text: &str) -> CliResult<Self> {
        parse_toml(text)
    }

    /// Copy with one numeric entry replaced, e.g. `general.min_negativity`.
    pub fn with_value(&self, name: &str, value: f64) -> CliResult<Self> {
        let mut tree = serde_json::to_value(self).expect("configs serialize");
        crate::config::set_numeric(&mut tree, name, value)?;
        serde_path_to_error::deserialize(tree)
            .map_err(|e| CliError::schema(e.path().to_string(), e.inner().to_string()))
    }

    fn particle_model() -> ParticleScenario {
        let cfg =
            RunConfig::from_toml(crate::presets::get("particles").expect("particles preset")).expect("preset parses");
        match cfg.scenario {
            Scenario::Particles(p) => p.model,
            _ => unreachable!("particles preset has kind = particles"),
        }
    }
}

pub const TITLES: [&str; 8] = [
    "Koopman no-go",
    "Koopman dense-oracle equivalence",
    "mean-field factorization",
    "mean-field nonlinearity witness",
    "bracket isomorphisms",
    "particle counterexample",
    "general counterexample",
    "mixture computation",
];

/// Numeric outcome of one criterion; identical across repeated runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u8,
    pub title: String,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Timed {
    pub result: CriterionResult,
    pub seconds: f64,
    pub limit: f64,
}

impl Timed {
    pub fn within_runtime(&self) -> bool {
        self.seconds <= self.limit
    }

    pub fn passed(&self) -> bool {
        self.result.passed && self.within_runtime()
    }

    /// `criterion N PASS|FAIL title (s / limit s) | check; check; ...`
    pub fn line(&self) -> String {
        let mut parts: Vec<String> = self.result.checks.iter().map(Check::to_string).collect();
        if let Some(e) = &self.result.error {
            parts.push(format!("error: {e}"));
        }
        if !self.within_runtime() {
            parts.push("runtime limit exceeded".into());
        }
        format!(
            "criterion {} {} {} ({:.2} s / {} s) | {}",
            self.result.id,
            if self.passed() { "PASS" } else { "FAIL" },
            self.result.title,
            self.seconds,
            self.limit,
            parts.join("; ")
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceReport {
    pub seed: u64,
    pub config_hash: String,
    pub criteria: Vec<CriterionResult>,
    pub passed: bool,
}

impl AcceptanceReport {
    pub fn new(cfg: &AcceptanceConfig, timed: &[Timed]) -> Self {
        let criteria: Vec<CriterionResult> = timed.iter().map(|t| t.result.clone()).collect();
        AcceptanceReport {
            seed: cfg.seed,
            config_hash: content_hash(&serde_json::to_value(cfg).expect("configs serialize")),
            passed: criteria.iter().all(|c| c.passed),
            criteria,
        }
    }
}

fn runtime_limit(cfg: &AcceptanceConfig, id: u8) -> f64 {
    match id {
        1 => cfg.koopman_nogo.runtime,
        2 => cfg.koopman_dense.runtime,
        3 => cfg.factorization.runtime,
        4 => cfg.nonlinearity.runtime,
        5 => cfg.brackets.runtime,
        6 => cfg.particles.runtime,
        7 => cfg.general.runtime,
        _ => cfg.mixture.runtime,
    }
}

/// Runs criterion `id` (1 to 8). Errors become a failed result.
pub fn run_criterion(cfg: &AcceptanceConfig, id: u8) -> Timed {
    assert!((1..=8).contains(&id), "criteria are numbered 1 to 8");
    let start = Instant::now();
    let outcome = match id {
        1 => koopman_nogo(cfg),
        2 => koopman_dense(cfg),
        3 => factorization(cfg),
        4 => nonlinearity(cfg),
        5 => brackets(cfg),
        6 => particles(cfg),
        7 => general(cfg),
        _ => mixture(cfg),
    };
    let seconds = start.elapsed().as_secs_f64();
    let (checks, error) = match outcome {
        Ok(c) => (c, None),
        Err(e) => (Vec::new(), Some(e.to_string())),
    };
    let passed = error.is_none() && !checks.is_empty() && checks.iter().all(|c| c.passed);
    Timed {
        result: CriterionResult {
            id,
            title: TITLES[id as usize - 1].to_string(),
            checks,
            error,
            passed,
        },
        seconds,
        limit: runtime_limit(cfg, id),
    }
}

/// Runs the selected criteria in order.
pub fn run_all(cfg: &AcceptanceConfig, only: &[u8]) -> Vec<Timed> {
    let ids: Vec<u8> = if only.is_empty() {
        (1..=8).collect()
    } else {
        only.to_vec()
    };
    ids.into_iter().map(|id| run_criterion(cfg, id)).collect()
}

fn random_koopman(
    count: usize,
    labels: [usize; 2],
    rounds: [usize; 2],
    sector_dims: [usize; 2],
    seed: u64,
) -> Vec<KoopmanScenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| KoopmanScenario {
            dim_q: 2,
            dim_q_prime: 2,
            num_labels: rng.random_range(labels[0]..=labels[1]),
            sector_dim: rng.random_range(sector_dims[0]..=sector_dims[1]),
            rounds: rng.random_range(rounds[0]..=rounds[1]),
            input: if i % 2 == 0 {
                SectorInput::ProductPure
            } else {
                SectorInput::ProductMixed
            },
            interaction: InteractionKind::Haar,
            seed: rng.random(),
        })
        .collect()
}

fn koopman_nogo(cfg: &AcceptanceConfig) -> CliResult<Vec<Check>> {
    let c = &cfg.koopman_nogo;
    let scenarios = random_koopman(c.trials, c.labels, c.rounds, c.sector_dims, cfg.seed);
    let reports = scenarios
        .par_iter()
        .map(run_koopman_scenario)
        .collect::<mediator_core::Result<Vec<_>>>()?;
    let reduced = reports.iter().map(|r| r.final_reduced_negativity).fold(0.0, f64::max);
    let post = reports
        .iter()
        .map(|r| r.max_postselected_negativity)
        .fold(0.0, f64::max);
    Ok(vec![
        Check::at_least("scenarios", reports.len() as f64, c.trials as f64),
        Check::at_most("max reduced negativity", reduced, c.negativity),
        Check::at_most("max post-selected negativity", post, c.negativity),
    ])
}

fn koopman_dense(cfg: &AcceptanceConfig) -> CliResult<Vec<Check>> {
    let c = &cfg.koopman_dense;
    let scenarios = random_koopman(c.trials, c.labels, c.rounds, c.sector_dims, cfg.seed.wrapping_add(1));
    let defects = scenarios
        .par_iter()
        .map(dense_equivalence_defect)
        .collect::<mediator_core::Result<Vec<_>>>()?;
    Ok(vec![
        Check::at_least("scenarios", defects.len() as f64, c.trials as f64),
        Check::at_most(
            "max elementwise defect",
            defects.iter().copied().fold(0.0, f64::max),
            c.defect,
        ),
    ])
}

fn qubits(a: &[f64], b: &[f64]) -> CliResult<QuantumState> {
    Ok(StateSpec {
        factors: vec![Amplitudes::real(a), Amplitudes::real(b)],
    }
    .state()?)
}

fn factorization(cfg: &AcceptanceConfig) -> CliResult<Vec<Check>> {
    let c = &cfg.factorization;
    let opts = EvolveOptions::new(c.dt, c.t_end);
    let run = |name: &str, second: &[f64]| -> CliResult<_> {
        let h = named_hamiltonian(name, None)?;
        let s0 = MeanFieldState::new(qubits(&c.psi_q, second)?, c.x0.clone(), c.k0.clone())?;
        Ok(evolve(&h, &s0, &opts)?)
    };
    let (main, control) = rayon::join(
        || run(&c.hamiltonian, &c.psi_q_prime),
        || run(&c.control, &c.control_psi_q_prime),
    );
    let (main, control) = (main?, control?);
    Ok(vec![
        Check::at_least("final time", main.last().state.t, c.t_end - 0.5 * c.dt),
        Check::at_most("max purity deficit of rho_Q", main.max_purity_deficit, c.purity),
        Check::at_most("energy drift", main.max_energy_drift(), c.energy),
        Check::at_most("norm drift", main.max_norm_drift(), c.norm),
        Check::above(
            "negative-control purity deficit",
            control.max_purity_deficit,
            c.control_purity,
        ),
    ])
}

fn nonlinearity(cfg: &AcceptanceConfig) -> CliResult<Vec<Check>> {
    let c = &cfg.nonlinearity;
    let h = named_hamiltonian(&c.hamiltonian, None)?;
    let psi0 = Amplitudes::real(&c.psi0).state()?;
    let phi0 = Amplitudes::real(&c.phi0).state()?;
    let split = |s: QuantumState| -> CliResult<QuantumState> {
        let dims = h_dims(&h);
        Ok(QuantumState::new(
            mediator_core::hilbert::HilbertSpace::new(dims)?,
            s.into_amplitudes(),
        )?)
    };
    let w = nonlinearity_witness(
        &h,
        &split(psi0)?,
        &split(phi0)?,
        &c.x0,
        &c.k0,
        &EvolveOptions::new(c.dt, c.t_end),
    )?;
    Ok(vec![Check::below(
        "cross fidelity",
        w.cross_fidelity,
        1.0 - c.fidelity_gap,
    )])
}

fn h_dims(h: &mediator_core::meanfield::LinearHamiltonian) -> Vec<usize> {
    use mediator_core::meanfield::ParamHamiltonian;
    h.space().dims().to_vec()
}

fn brackets(cfg: &AcceptanceConfig) -> CliResult<Vec<Check>> {
    let c = &cfg.brackets;
    let (qb, cb) = rayon::join(
        || {
            qb_sweep(
                &c.levels,
                c.qb_pairs,
                c.qb_states,
                mediator_core::DEFAULT_HBAR,
                cfg.seed,
            )
        },
        || cb_sweep(&c.cb_points),
    );
    let mut checks = vec![Check::at_most("max quantum bracket deviation", qb?, c.qb)];
    checks.extend(cb?.iter().map(|r| refinement_check(r, c.min_order)));
    Ok(checks)
}

fn particles(cfg: &AcceptanceConfig) -> CliResult<Vec<Check>> {
    let c = &cfg.particles;
    let model = AcceptanceConfig::particle_model();
    let a = c.postselect_a;
    let mut checks = Vec::new();

    let post = postselect_x(&model, a)?;
    let fine = postselect_x(&refined(&model), a)?;
    checks.push(Check::above("entropy of psi_t|a", post.report.entropy, c.min_entropy));
    checks.push(Check::at_most(
        "relative entropy change on refined grid",
        relative_change(post.report.entropy, fine.report.entropy),
        c.refinement,
    ));

    let controls = [
        (
            "g1 = 0",
            ParticleScenario {
                g1: 0.0,
                ..model.clone()
            },
        ),
        (
            "g2 = 0",
            ParticleScenario {
                g2: 0.0,
                ..model.clone()
            },
        ),
    ];
    for (label, s) in &controls {
        checks.push(Check::at_most(
            format!("entropy with {label}"),
            postselect_x(s, a)?.report.entropy,
            c.control_entropy,
        ));
    }

    let start = propagate_particle(&ParticleScenario {
        t: 0.0,
        ..model.clone()
    })?;
    for (label, s) in std::iter::once(("default", model.clone())).chain(controls) {
        let prop = propagate_particle(&s)?;
        checks.push(Check::at_most(
            format!("quadrature mass defect ({label})"),
            (prop.raw_mass - 1.0).abs(),
            c.mass,
        ));
        let axes = invariant_axes(&s);
        if !axes.is_empty() {
            let shift = moment_shift(&prop.state, &start.state, &axes, c.moment_order)?;
            checks.push(Check::at_most(
                format!("invariant marginal moments ({label})"),
                shift,
                c.moments,
            ));
        }
    }
    Ok(checks)
}

fn general(cfg: &AcceptanceConfig) -> CliResult<Vec<Check>> {
    let c = &cfg.general;
    let plus = Amplitudes::real(&[1.0, 1.0]).state()?;
    let first = *c
        .widths
        .first()
        .ok_or_else(|| CliError::schema("general.widths", "no widths"))?;
    let base = GeneralScenario::new(
        pauli_z(),
        pauli_z(),
        c.x_grid,
        c.t,
        plus.clone(),
        plus,
        MediatorPacket::gaussian(first),
        mediator_core::DEFAULT_HBAR,
    )?;
    let points = width_sweep(&base, &c.widths)?;
    let guarded: Vec<_> = points.iter().filter(|p| p.guarded).collect();
    let negativity: Vec<f64> = guarded.iter().filter_map(|p| p.negativity).collect();
    let increment = negativity.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let fidelity = guarded.iter().filter_map(|p| p.fidelity).fold(f64::INFINITY, f64::min);
    Ok(vec![
        Check::at_least("guarded widths", guarded.len() as f64, 2.0),
        Check::above("smallest negativity increment between widths", increment, 0.0),
        Check::above(
            "negativity at widest guarded width",
            negativity.last().copied().unwrap_or(f64::NAN),
            c.min_negativity,
        ),
        Check::at_least("smallest BCH versus direct fidelity", fidelity, 1.0 - c.fidelity_gap),
    ])
}

fn mixture(cfg: &AcceptanceConfig) -> CliResult<Vec<Check>> {
    let c = &cfg.mixture;
    let model = AcceptanceConfig::particle_model();
    let first = mixture_density(&model)?;
    let second = mixture_density(&model)?;
    let differing = first
        .rho
        .matrix()
        .iter()
        .zip(second.rho.matrix().iter())
        .filter(|(a, b)| a.re.to_bits() != b.re.to_bits() || a.im.to_bits() != b.im.to_bits())
        .count();
    Ok(vec![
        Check::at_most("trace error", first.trace_error, c.trace),
        Check::at_most("sum of p(a) minus one", (first.weight_sum - 1.0).abs(), c.probability),
        Check::new(
            "negativity on repeat",
            second.negativity,
            Relation::Identical,
            first.negativity,
        ),
        Check::at_most("density-matrix entries differing on repeat", differing as f64, 0.0),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_parses_and_overrides() {
        let cfg = AcceptanceConfig::preset();
        assert_eq!(cfg.koopman_nogo.trials, 100);
        let tighter = cfg.with_value("general.min_negativity", 0.49).unwrap();
        assert_eq!(tighter.general.min_negativity, 0.49);
        assert!(cfg.with_value("runtime", 1.0).is_err());
    }

    #[test]
    fn random_koopman_respects_ranges() {
        for s in random_koopman(50, [2, 3], [1, 3], [1, 3], 9) {
            assert!((2..=3).contains(&s.num_labels));
            assert!((1..=3).contains(&s.rounds));
            assert!((1..=3).contains(&s.sector_dim));
        }
    }

    #[test]
    fn fast_criteria_pass() {
        let cfg = AcceptanceConfig::preset();
        for id in [1, 2, 4] {
            let t = run_criterion(&cfg, id);
            assert!(t.result.passed, "{}", t.line());
        }
    }
}
