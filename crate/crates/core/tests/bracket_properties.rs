use mediator_core::ensemble::{
    poisson_bracket, verify_cb, verify_qb, Axis, ClassicalObservable, ConfigurationGrid, EnsembleState, Functional,
    Polynomial, QuantumObservable,
};
use mediator_core::hilbert::random::random_hermitian;
use mediator_core::hilbert::HilbertSpace;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_state(axes: Vec<Axis>, seed: u64) -> EnsembleState {
    let grid = ConfigurationGrid::new(axes).unwrap();
    EnsembleState::random(grid, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn quantum(dims: Vec<usize>, axes: Vec<usize>, seed: u64) -> QuantumObservable {
    let s = HilbertSpace::new(dims).unwrap();
    let m = random_hermitian(&s, &mut ChaCha8Rng::seed_from_u64(seed));
    QuantumObservable::new(m, axes, 1.0).unwrap()
}

/// `α A + β B` for testing bilinearity.
struct Combination<'a> {
    a: &'a dyn Functional,
    b: &'a dyn Functional,
    alpha: f64,
    beta: f64,
}

impl Functional for Combination<'_> {
    fn value(&self, state: &EnsembleState) -> mediator_core::Result<f64> {
        Ok(self.alpha * self.a.value(state)? + self.beta * self.b.value(state)?)
    }

    fn gradient(&self, state: &EnsembleState) -> mediator_core::Result<mediator_core::ensemble::Gradient> {
        let (ga, gb) = (self.a.gradient(state)?, self.b.gradient(state)?);
        let mix = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(x, y)| self.alpha * x + self.beta * y).collect();
        Ok(mediator_core::ensemble::Gradient {
            dp: mix(&ga.dp, &gb.dp),
            ds: mix(&ga.ds, &gb.ds),
        })
    }

    fn label(&self) -> String {
        "combination".into()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn bracket_is_antisymmetric(seed in any::<u64>()) {
        let state = random_state(vec![Axis::discrete(3)], seed);
        let a = quantum(vec![3], vec![0], seed ^ 1);
        let b = quantum(vec![3], vec![0], seed ^ 2);
        let ab = poisson_bracket(&a, &b, &state).unwrap();
        let ba = poisson_bracket(&b, &a, &state).unwrap();
        prop_assert!((ab + ba).abs() <= 1e-12 * (1.0 + ab.abs()));
        prop_assert!(poisson_bracket(&a, &a, &state).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn bracket_is_bilinear(seed in any::<u64>(), alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
        let state = random_state(vec![Axis::continuous(-2.0, 2.0, 17), Axis::discrete(2)], seed);
        let a = ClassicalObservable::polynomial("x^2*k".parse().unwrap(), 0);
        let b = quantum(vec![2], vec![1], seed ^ 3);
        let c = ClassicalObservable::polynomial("k^2".parse().unwrap(), 0);
        let combo = Combination { a: &a, b: &b, alpha, beta };
        let lhs = poisson_bracket(&combo, &c, &state).unwrap();
        let rhs = alpha * poisson_bracket(&a, &c, &state).unwrap() + beta * poisson_bracket(&b, &c, &state).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()), "lhs {lhs}, rhs {rhs}");
    }

    #[test]
    fn quantum_brackets_extend_to_product_grids(seed in any::<u64>()) {
        let axes = vec![Axis::discrete(2), Axis::discrete(3)];
        let states = vec![random_state(axes.clone(), seed), random_state(axes, seed ^ 7)];
        let s = HilbertSpace::new(vec![2, 3]).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(seed ^ 11);
        let (m, n) = (random_hermitian(&s, &mut r), random_hermitian(&s, &mut r));
        prop_assert!(verify_qb(&m, &n, &[0, 1], &states, 1.0).unwrap() <= 1e-8);

        let left = quantum(vec![2], vec![0], seed ^ 13);
        let right = quantum(vec![3], vec![1], seed ^ 17);
        let cross = poisson_bracket(&left, &right, &states[0]).unwrap();
        prop_assert!(cross.abs() <= 1e-10, "disjoint factors give {cross}");
    }

    #[test]
    fn classical_brackets_extend_to_product_grids(seed in any::<u64>()) {
        let axes = vec![Axis::continuous(-3.0, 3.0, 33), Axis::discrete(2)];
        let states = vec![random_state(axes, seed)];
        let (x, k): (Polynomial, Polynomial) = (Polynomial::x(), Polynomial::k());
        prop_assert!(verify_cb(&x, &k, 0, &states).unwrap() <= 1e-10);

        let cx = ClassicalObservable::polynomial(Polynomial::x(), 0);
        let q = quantum(vec![2], vec![1], seed ^ 5);
        let cross = poisson_bracket(&cx, &q, &states[0]).unwrap();
        prop_assert!(cross.abs() <= 1e-10, "classical and quantum factors give {cross}");
    }
}
