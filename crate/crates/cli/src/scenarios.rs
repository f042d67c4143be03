//! Execution of a [`RunConfig`] into a report and tabular artifacts.

use std::collections::BTreeMap;

use mediator_core::counterexamples::{
    evolve_general_bch, evolve_general_direct, general_entanglement, marginal_moments, mixture_density, postselect_x,
    propagate_particle, reduced_qq, GeneralScenario, ParticleScenario,
};
use mediator_core::ensemble::{
    bracket_registry, cb_refinement, verify_qb, write_snapshot, Axis, ConfigurationGrid, EnsembleState, Refinement,
    ROUNDOFF_FLOOR,
};
use mediator_core::hilbert::random::random_hermitian;
use mediator_core::hilbert::HilbertSpace;
use mediator_core::koopman::{dense_equivalence_defect, run_koopman_scenario, KoopmanReport, KoopmanScenario};
use mediator_core::meanfield::{evolve, named_hamiltonian, EvolveOptions, MeanFieldState};
use mediator_core::table::format_g17;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{
    BracketsRun, Expectation, GeneralRun, KoopmanRun, MeanfieldRun, ParticlesRun, RunConfig, Scenario,
};
use crate::error::{at, CliError, CliResult};
use crate::report::{Check, RunReport};

/// A CSV table produced by a run.
#[derive(Clone, Debug, PartialEq)]
pub struct Artifact {
    pub file_name: String,
    pub contents: String,
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub report: RunReport,
    pub artifacts: Vec<Artifact>,
}

type Metrics = BTreeMap<String, f64>;

pub fn execute(config: &RunConfig) -> CliResult<Outcome> {
    let seed = config.seed;
    let (metrics, checks, artifacts) = match &config.scenario {
        Scenario::Koopman(k) => koopman(k, seed)?,
        Scenario::Meanfield(m) => meanfield(m)?,
        Scenario::Particles(p) => particles(p)?,
        Scenario::General(g) => general(g)?,
        Scenario::Brackets(b) => brackets(b, seed)?,
    };
    Ok(Outcome {
        report: RunReport::new(config.scenario.kind(), seed, config.echo(), metrics, checks),
        artifacts,
    })
}

fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Seed, report and dense-oracle defect of one Koopman trial.
type Trial = (u64, KoopmanReport, Option<f64>);

fn koopman(k: &KoopmanRun, seed: u64) -> CliResult<(Metrics, Vec<Check>, Vec<Artifact>)> {
    if k.trials == 0 {
        return Err(CliError::schema("scenario.trials", "must be at least 1"));
    }
    let trials: Vec<Trial> = (0..k.trials as u64)
        .into_par_iter()
        .map(|i| {
            let cfg = KoopmanScenario {
                dim_q: k.dim_q,
                dim_q_prime: k.dim_q_prime,
                num_labels: k.num_labels,
                sector_dim: k.sector_dim,
                rounds: k.rounds,
                input: k.input,
                interaction: k.interaction,
                seed: seed.wrapping_add(i),
            };
            let report = run_koopman_scenario(&cfg).map_err(at("scenario"))?;
            let dense = if k.dense_check {
                Some(dense_equivalence_defect(&cfg)?)
            } else {
                None
            };
            Ok((cfg.seed, report, dense))
        })
        .collect::<CliResult<_>>()?;

    let max = |f: &dyn Fn(&Trial) -> f64| trials.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
    let increase = max(&|t| t.1.reduced_negativity_delta());
    let post_excess =
        max(&|t| t.1.max_postselected_negativity - t.1.initial_sector_negativity.iter().copied().fold(0.0, f64::max));
    let mut metrics = Metrics::new();
    metrics.insert("max_reduced_negativity_increase".into(), increase);
    metrics.insert(
        "max_final_reduced_negativity".into(),
        max(&|t| t.1.final_reduced_negativity),
    );
    metrics.insert(
        "max_postselected_negativity".into(),
        max(&|t| t.1.max_postselected_negativity),
    );
    metrics.insert("trials".into(), k.trials as f64);
    let mut checks = vec![
        Check::at_most("reduced negativity increase", increase, k.tolerance.negativity),
        Check::at_most(
            "post-selected negativity above input sectors",
            post_excess,
            k.tolerance.negativity,
        ),
    ];
    if k.dense_check {
        let defect = max(&|t| t.2.unwrap_or(f64::NAN));
        metrics.insert("max_dense_defect".into(), defect);
        checks.push(Check::at_most("dense oracle defect", defect, k.tolerance.dense));
    }
    let table = csv_table(
        &[
            "trial",
            "seed",
            "initial_reduced_negativity",
            "final_reduced_negativity",
            "max_postselected_negativity",
            "dense_defect",
        ],
        trials.iter().enumerate().map(|(i, (s, r, d))| {
            vec![
                i.to_string(),
                s.to_string(),
                format_g17(r.initial_reduced_negativity),
                format_g17(r.final_reduced_negativity),
                format_g17(r.max_postselected_negativity),
                d.map(format_g17).unwrap_or_default(),
            ]
        }),
    );
    Ok((
        metrics,
        checks,
        vec![Artifact {
            file_name: "koopman.csv".into(),
            contents: table,
        }],
    ))
}

fn meanfield(m: &MeanfieldRun) -> CliResult<(Metrics, Vec<Check>, Vec<Artifact>)> {
    let h = named_hamiltonian(&m.hamiltonian, m.kinetic).map_err(at("scenario.hamiltonian"))?;
    let psi = m.psi0.state().map_err(at("scenario.psi0"))?;
    let s0 = MeanFieldState::new(psi, m.x0.clone(), m.k0.clone()).map_err(at("scenario"))?;
    let opts = EvolveOptions {
        dt: m.dt,
        t_end: m.t_end,
        sample_every: m.sample_every,
        hbar: m.hbar,
    };
    let traj = evolve(&h, &s0, &opts).map_err(at("scenario"))?;
    let tol = &m.tolerance;
    let mut metrics = Metrics::new();
    metrics.insert("max_energy_drift".into(), traj.max_energy_drift());
    metrics.insert("max_norm_drift".into(), traj.max_norm_drift());
    metrics.insert("max_purity_deficit".into(), traj.max_purity_deficit);
    metrics.insert("max_step_drift".into(), traj.max_step_drift);
    metrics.insert("final_energy".into(), traj.last().energy);
    metrics.insert("steps".into(), traj.steps as f64);
    let mut checks = vec![
        Check::at_most("energy drift", traj.max_energy_drift(), tol.energy),
        Check::at_most("norm drift", traj.max_norm_drift(), tol.norm),
    ];
    match m.expect {
        Expectation::Factorizes => checks.push(Check::at_most(
            "purity deficit of rho_Q",
            traj.max_purity_deficit,
            tol.purity,
        )),
        Expectation::Entangles => checks.push(Check::above(
            "purity deficit of rho_Q",
            traj.max_purity_deficit,
            tol.entangling,
        )),
        Expectation::None => {}
    }
    let mut csv = Vec::new();
    traj.write_csv(&mut csv)
        .map_err(|e| CliError::io("trajectory.csv", e))?;
    Ok((
        metrics,
        checks,
        vec![Artifact {
            file_name: "trajectory.csv".into(),
            contents: String::from_utf8(csv).expect("CSV is UTF-8"),
        }],
    ))
}

/// Largest difference of the marginal moments `1..=order` along `axes`.
pub fn moment_shift(a: &EnsembleState, b: &EnsembleState, axes: &[usize], order: u32) -> CliResult<f64> {
    let mut worst: f64 = 0.0;
    for &axis in axes {
        let (ma, mb) = (marginal_moments(a, axis, order)?, marginal_moments(b, axis, order)?);
        worst = ma.iter().zip(&mb).map(|(x, y)| (x - y).abs()).fold(worst, f64::max);
    }
    Ok(worst)
}

/// Axes whose marginal moments are checked for invariance: `q'` without the
/// second coupling and `q` without the first.
pub fn invariant_axes(s: &ParticleScenario) -> Vec<usize> {
    let mut axes = Vec::new();
    if s.g1 == 0.0 {
        axes.push(0);
    }
    if s.g2 == 0.0 {
        axes.push(1);
    }
    axes
}

pub fn refined(s: &ParticleScenario) -> ParticleScenario {
    ParticleScenario {
        q_grid: s.q_grid.refined(),
        q_prime_grid: s.q_prime_grid.refined(),
        ..s.clone()
    }
}

pub fn relative_change(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        b.abs()
    } else {
        ((b - a) / a).abs()
    }
}

fn particles(p: &ParticlesRun) -> CliResult<(Metrics, Vec<Check>, Vec<Artifact>)> {
    let s = &p.model;
    s.validate().map_err(at("scenario.model"))?;
    let tol = &p.tolerance;
    let coupled = s.g1 != 0.0 && s.g2 != 0.0 && s.t != 0.0;

    let prop = propagate_particle(s)?;
    let axes = invariant_axes(s);
    let shift = if axes.is_empty() {
        None
    } else {
        let start = propagate_particle(&ParticleScenario { t: 0.0, ..s.clone() })?;
        Some(moment_shift(&prop.state, &start.state, &axes, tol.moment_order)?)
    };
    let post = postselect_x(s, p.postselect_a).map_err(at("scenario.postselect_a"))?;

    let mut metrics = Metrics::new();
    metrics.insert("quadrature_mass".into(), prop.raw_mass);
    metrics.insert("postselect_a".into(), post.a);
    metrics.insert("postselect_probability".into(), post.probability);
    metrics.insert("entropy".into(), post.report.entropy);
    metrics.insert("postselected_negativity".into(), post.report.negativity);
    let mut checks = vec![Check::at_most(
        "quadrature mass defect",
        (prop.raw_mass - 1.0).abs(),
        tol.mass,
    )];
    if let Some(shift) = shift {
        metrics.insert("invariant_moment_shift".into(), shift);
        checks.push(Check::at_most("invariant marginal moments", shift, tol.moments));
    }
    if coupled {
        checks.push(Check::above(
            "post-selected entropy",
            post.report.entropy,
            tol.min_entropy,
        ));
    } else {
        checks.push(Check::at_most(
            "post-selected entropy without coupling",
            post.report.entropy,
            tol.control_entropy,
        ));
    }
    if p.refine {
        let fine = postselect_x(&refined(s), p.postselect_a)?;
        let change = relative_change(post.report.entropy, fine.report.entropy);
        metrics.insert("refined_entropy".into(), fine.report.entropy);
        metrics.insert("refinement_change".into(), change);
        if coupled {
            checks.push(Check::at_most(
                "relative entropy change under refinement",
                change,
                tol.refinement,
            ));
        }
    }
    if p.mixture {
        let mix = mixture_density(s)?;
        metrics.insert("mixture_negativity".into(), mix.negativity);
        metrics.insert("mixture_purity".into(), mix.rho.purity());
        metrics.insert("mixture_weight_sum".into(), mix.weight_sum);
        metrics.insert("mixture_trace_error".into(), mix.trace_error);
        checks.push(Check::at_most("mixture trace error", mix.trace_error, tol.trace));
        checks.push(Check::at_most(
            "sum of p(a) minus one",
            (mix.weight_sum - 1.0).abs(),
            tol.probability,
        ));
    }

    let grid = ConfigurationGrid::new(vec![s.q_grid.axis("q_grid")?, s.q_prime_grid.axis("q_prime_grid")?])?;
    let slice = EnsembleState::from_amplitudes(grid, post.state.amplitudes().as_slice(), s.hbar)?;
    let mut csv = Vec::new();
    write_snapshot(&slice, &mut csv)?;
    Ok((
        metrics,
        checks,
        vec![Artifact {
            file_name: "postselected.csv".into(),
            contents: String::from_utf8(csv).expect("CSV is UTF-8"),
        }],
    ))
}

/// Builds a general scenario from its run configuration.
pub fn general_scenario(g: &GeneralRun) -> CliResult<GeneralScenario> {
    let m = g.m.operator().map_err(at("scenario.m"))?;
    let n = g.n.operator().map_err(at("scenario.n"))?;
    let psi_q = g.psi_q.state().map_err(at("scenario.psi_q"))?;
    let psi_qp = g.psi_q_prime.state().map_err(at("scenario.psi_q_prime"))?;
    GeneralScenario::new(m, n, g.x_grid, g.t, psi_q, psi_qp, g.psi_c, g.hbar).map_err(at("scenario"))
}

fn general(g: &GeneralRun) -> CliResult<(Metrics, Vec<Check>, Vec<Artifact>)> {
    let s = general_scenario(g)?;
    let psi = evolve_general_bch(&s)?;
    let report = general_entanglement(&s, &psi)?;
    let rho = reduced_qq(&s, &psi)?;
    let mut metrics = Metrics::new();
    metrics.insert("negativity".into(), report.negativity);
    metrics.insert("purity".into(), rho.purity());
    let mut checks = Vec::new();
    if g.direct {
        let fidelity = evolve_general_direct(&s)?.fidelity(&psi)?;
        metrics.insert("fidelity".into(), fidelity);
        checks.push(Check::at_least(
            "BCH versus direct fidelity",
            fidelity,
            1.0 - g.tolerance.fidelity,
        ));
    }
    let d = rho.matrix().nrows();
    let table = csv_table(
        &["row", "col", "re", "im"],
        (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).map(|(i, j)| {
            let z = rho.matrix()[(i, j)];
            vec![i.to_string(), j.to_string(), format_g17(z.re), format_g17(z.im)]
        }),
    );
    Ok((
        metrics,
        checks,
        vec![Artifact {
            file_name: "reduced_qq.csv".into(),
            contents: table,
        }],
    ))
}

/// Largest `verify_qb` deviation over `pairs` random Hermitian pairs per
/// level count, each on `states` random states.
pub fn qb_sweep(levels: &[usize], pairs: usize, states: usize, hbar: f64, seed: u64) -> CliResult<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jobs: Vec<(usize, u64)> = levels
        .iter()
        .flat_map(|&d| (0..pairs).map(move |_| d))
        .map(|d| (d, rng.random()))
        .collect();
    jobs.par_iter()
        .map(|&(d, s)| {
            let mut r = ChaCha8Rng::seed_from_u64(s);
            let space = HilbertSpace::single(d).map_err(at("scenario.levels"))?;
            let (m, n) = (random_hermitian(&space, &mut r), random_hermitian(&space, &mut r));
            let grid = ConfigurationGrid::new(vec![Axis::discrete(d)])?;
            let ensemble = (0..states)
                .map(|_| EnsembleState::random(grid.clone(), &mut r))
                .collect::<mediator_core::Result<Vec<_>>>()?;
            Ok(verify_qb(&m, &n, &[0], &ensemble, hbar)?)
        })
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

/// Refinement study of every registry pair.
pub fn cb_sweep(points: &[usize]) -> CliResult<Vec<Refinement>> {
    if points.len() < 2 {
        return Err(CliError::schema(
            "scenario.cb_points",
            "at least two grid sizes are needed",
        ));
    }
    bracket_registry()
        .par_iter()
        .map(|(f, g)| cb_refinement(f, g, points).map_err(at("scenario.cb_points")))
        .collect()
}

pub fn refinement_check(r: &Refinement, min_order: f64) -> Check {
    match r.order {
        Some(order) if !r.exact => {
            let mut c = Check::at_least(format!("order of {{{}, {}}}", r.f, r.g), order, min_order);
            c.passed = r.passes(min_order);
            c
        }
        _ => {
            let worst = r.deviations.iter().copied().fold(0.0, f64::max);
            let mut c = Check::at_most(format!("roundoff of {{{}, {}}}", r.f, r.g), worst, ROUNDOFF_FLOOR);
            c.passed = r.passes(min_order);
            c
        }
    }
}

fn brackets(b: &BracketsRun, seed: u64) -> CliResult<(Metrics, Vec<Check>, Vec<Artifact>)> {
    if b.levels.iter().any(|&d| d < 2) {
        return Err(CliError::schema("scenario.levels", "levels must be at least 2"));
    }
    let qb = qb_sweep(&b.levels, b.qb_pairs, b.qb_states, b.hbar, seed)?;
    let cb = cb_sweep(&b.cb_points)?;
    let mut metrics = Metrics::new();
    metrics.insert("qb_max_deviation".into(), qb);
    let min_order = cb
        .iter()
        .filter(|r| !r.exact)
        .filter_map(|r| r.order)
        .fold(f64::INFINITY, f64::min);
    if min_order.is_finite() {
        metrics.insert("cb_min_order".into(), min_order);
    }
    metrics.insert("cb_exact_pairs".into(), cb.iter().filter(|r| r.exact).count() as f64);
    let mut checks = vec![Check::at_most("quantum bracket deviation", qb, b.tolerance.qb)];
    checks.extend(cb.iter().map(|r| refinement_check(r, b.min_order)));

    let mut header = vec!["f".to_string(), "g".to_string()];
    header.extend(b.cb_points.iter().map(|n| format!("deviation_{n}")));
    header.extend(["order".to_string(), "exact".to_string()]);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let table = csv_table(
        &header,
        cb.iter().map(|r| {
            let mut row = vec![r.f.clone(), r.g.clone()];
            row.extend(r.deviations.iter().map(|d| format_g17(*d)));
            row.push(r.order.map(format_g17).unwrap_or_default());
            row.push(r.exact.to_string());
            row
        }),
    );
    Ok((
        metrics,
        checks,
        vec![Artifact {
            file_name: "brackets.csv".into(),
            contents: table,
        }],
    ))
}
