use mediator_core::counterexamples::{
    evolve_general_bch, marginal_moments, propagate_particle, reduced_qq, GeneralScenario, MediatorPacket, PacketShape,
    ParticleScenario, Span,
};
use mediator_core::ensemble::{read_snapshot, write_snapshot, GaussianPacket};
use mediator_core::hilbert::random::haar_operator;
use mediator_core::hilbert::{negativity, Bipartition, HilbertSpace};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_particles(g1: f64, g2: f64, t: f64) -> ParticleScenario {
    ParticleScenario {
        g1,
        g2,
        t,
        q_grid: Span::new(-9.0, 9.0, 73),
        q_prime_grid: Span::new(-9.0, 9.0, 73),
        x_grid: Span::new(-12.0, 12.0, 97),
        ..ParticleScenario::default()
    }
}

fn moments_at(s: &ParticleScenario, axis: usize) -> Vec<f64> {
    let state = propagate_particle(s).unwrap().state;
    marginal_moments(&state, axis, 4).unwrap()
}

fn assert_close(a: &[f64], b: &[f64], tol: f64) {
    for (x, y) in a.iter().zip(b) {
        assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn q_prime_marginal_is_invariant_without_second_coupling(g1 in -1.5f64..1.5, t in 0.0f64..1.5) {
        let s = small_particles(g1, 0.0, t);
        let before = moments_at(&ParticleScenario { t: 0.0, ..s.clone() }, 1);
        assert_close(&moments_at(&s, 1), &before, 1e-6);
    }

    #[test]
    fn q_marginal_is_invariant_without_first_coupling(g2 in -1.5f64..1.5, t in 0.0f64..1.5) {
        let s = small_particles(0.0, g2, t);
        let before = moments_at(&ParticleScenario { t: 0.0, ..s.clone() }, 0);
        assert_close(&moments_at(&s, 0), &before, 1e-6);
    }

    #[test]
    fn reduced_negativity_is_local_unitary_invariant(seed in any::<u64>()) {
        let packet = MediatorPacket {
            packet: GaussianPacket::new(0.0, std::f64::consts::FRAC_1_SQRT_2, 0.0).unwrap(),
            shape: PacketShape::Hermite1,
        };
        let s = GeneralScenario::sigma_z_with(packet, 1.0).unwrap();
        let rho = reduced_qq(&s, &evolve_general_bch(&s).unwrap()).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let q = HilbertSpace::single(2).unwrap();
        let u = haar_operator(&q, &mut r).tensor(&haar_operator(&q, &mut r)).unwrap();
        let cut = Bipartition::first(1);
        let before = negativity(&rho, &cut).unwrap();
        let after = negativity(&rho.conjugate(&u).unwrap(), &cut).unwrap();
        prop_assert!(before > 0.01);
        prop_assert!((before - after).abs() <= 1e-10);
    }
}

#[test]
fn marginal_moments_match_closed_form() {
    let s = small_particles(1.0, 1.0, 1.0);
    let state = propagate_particle(&s).unwrap().state;
    for (axis, m) in s.marginals().iter().enumerate() {
        let got = marginal_moments(&state, axis, 2).unwrap();
        assert!((got[0] - m.mean).abs() <= 1e-6, "axis {axis}");
        assert!((got[1] - got[0] * got[0] - m.variance).abs() <= 1e-6, "axis {axis}");
    }
}

#[test]
fn snapshot_round_trips_propagated_state() {
    let s = ParticleScenario {
        q_grid: Span::new(-9.0, 9.0, 21),
        q_prime_grid: Span::new(-9.0, 9.0, 21),
        x_grid: Span::new(-12.0, 12.0, 31),
        ..ParticleScenario::default()
    };
    let grid = s.grid().unwrap();
    let state = mediator_core::ensemble::EnsembleState::from_fn(grid.clone(), |c| {
        let (q, qp, x) = (c[0], c[1], c[2]);
        let psi = s.psi_t(q, qp, x);
        (psi.norm_sqr(), psi.arg())
    })
    .unwrap();
    let mut buf = Vec::new();
    write_snapshot(&state, &mut buf).unwrap();
    let back = read_snapshot(&grid, buf.as_slice()).unwrap();
    assert_eq!(back.p(), state.p());
    assert_eq!(back.s(), state.s());
}
