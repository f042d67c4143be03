"""Smoke test for the `mediator` extension module."""

import math

import mediator


def test_states():
    bell = mediator.QuantumState([2, 2], [1, 0, 0, 1])
    assert abs(bell.norm() - 1.0) < 1e-12
    assert abs(bell.negativity([0]) - 0.5) < 1e-12
    assert abs(bell.entropy([0]) - math.log(2)) < 1e-12
    rho = bell.density()
    assert abs(rho.purity() - 1.0) < 1e-12
    assert abs(rho.partial_trace([0]).purity() - 0.5) < 1e-12

    plus = mediator.QuantumState([2], [1, 1])
    prod = mediator.QuantumState.product([plus, plus])
    assert prod.dims == [2, 2]
    assert prod.negativity([0]) < 1e-12
    assert len(prod.amplitudes) == 4


def test_errors():
    try:
        mediator.QuantumState([2], [1, 0, 0])
    except ValueError:
        pass
    else:
        raise AssertionError("dimension mismatch accepted")


def test_koopman():
    r = mediator.koopman(num_labels=3, sector_dim=2, rounds=2, seed=7, dense=True)
    assert r["final_reduced_negativity"] - r["initial_reduced_negativity"] <= 1e-9
    assert r["dense_defect"] <= 1e-10


def test_meanfield():
    psi = mediator.QuantumState.product(
        [mediator.QuantumState([2], [1, 1]), mediator.QuantumState([2], [1, 0])]
    )
    out = mediator.meanfield("linear-coupling", psi, [0.5], [-0.3], dt=1e-3, t_end=1.0)
    assert out["max_purity_deficit"] <= 1e-8
    zero = mediator.QuantumState([2, 2], [1, 0, 0, 0])
    one = mediator.QuantumState([2, 2], [0, 0, 0, 1])
    f = mediator.cross_fidelity("linear-coupling", zero, one, [1.0], [0.0], dt=1e-3, t_end=2.0)
    assert f < 1 - 1e-6


def test_particles():
    s = mediator.ParticleScenario()
    assert abs(s.raw_mass() - 1.0) < 1e-6
    assert s.postselect(0.0)["entropy"] > 0.01
    assert mediator.ParticleScenario(g1=0.0).postselect(0.0)["entropy"] <= 1e-8
    m = s.mixture()
    assert m["trace_error"] <= 1e-8


def test_general():
    t = math.sqrt(math.pi / 2)
    assert mediator.general_negativity(1.0, t, points=64) < 1e-9
    assert mediator.general_negativity(math.sqrt(0.5), 1.0, shape="hermite1", points=64) > 0.01


if __name__ == "__main__":
    for name, fn in list(globals().items()):
        if name.startswith("test_"):
            fn()
            print(f"{name}: ok")
