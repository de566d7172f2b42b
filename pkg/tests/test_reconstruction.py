import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from projphase import injectivity as inj
from projphase.errors import DimensionMismatch, InvalidInput
from projphase.projections import sample_collection
from projphase.reconstruction import (
    MeasurementVector,
    ReconstructionBudget,
    _descend,
    objective_and_gradient,
    reconstruct,
    recovery_error,
)
from projphase.rng import substream


def injective_3x5(seed):
    return sample_collection(3, [1, 2, 2, 1, 2], substream(seed))


def test_objective_at_truth():
    c = injective_3x5(1)
    x = np.array([0.3, -1.2, 0.7])
    F, g = objective_and_gradient(c, MeasurementVector.of(c, x), x)
    assert F < 1e-28 and np.max(np.abs(g)) < 1e-13
    F0, g0 = objective_and_gradient(c, np.zeros(5), np.zeros(3))
    assert F0 == 0.0 and not g0.any()


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_gradient_matches_central_differences(seed):
    rng = np.random.default_rng(seed)
    M = int(rng.integers(2, 6))
    c = sample_collection(M, [int(r) for r in rng.integers(1, M, size=5)], rng)
    b = inj.measurement_map(c, rng.standard_normal(M))
    z = rng.standard_normal(M)
    _, g = objective_and_gradient(c, b, z)
    h = 1e-6
    fd = np.array([
        (objective_and_gradient(c, b, z + h * e)[0] - objective_and_gradient(c, b, z - h * e)[0])
        / (2 * h)
        for e in np.eye(M)
    ])
    assert np.linalg.norm(g - fd) <= 1e-6 * max(np.linalg.norm(g), 1.0)


def test_dimension_mismatch():
    c = injective_3x5(2)
    with pytest.raises(DimensionMismatch):
        objective_and_gradient(c, np.zeros(4), np.zeros(3))
    with pytest.raises(DimensionMismatch):
        objective_and_gradient(c, np.zeros(5), np.zeros(2))
    with pytest.raises(DimensionMismatch):
        recovery_error(np.zeros(2), np.zeros(3))


def test_measurement_vector_clamps_noise():
    assert MeasurementVector([1.0, -1e-12]).values[1] == 0.0
    with pytest.raises(InvalidInput):
        MeasurementVector([1.0, -1e-3])


def test_descent_is_monotone():
    c = injective_3x5(3)
    b = inj.measurement_map(c, np.array([1.0, 2.0, -0.5]))
    history = []
    _descend(c.stack, b, np.array([0.1, -0.3, 2.0]), ReconstructionBudget(), 1e-10, history)
    assert len(history) > 2
    assert all(b <= a for a, b in zip(history, history[1:]))


def test_recovers_ground_truth():
    c = injective_3x5(4)
    assert inj.certify_injective(c, grid_spacing=1e-2, rng=substream(0)).status == inj.CERTIFIED
    x0 = np.array([0.4, -1.1, 2.3])
    r = reconstruct(c, MeasurementVector.of(c, x0), rng=substream(5))
    assert r.converged and recovery_error(r.x_hat, x0) <= 1e-6
    assert r.alternatives == []


def test_sign_canonicalization():
    c = injective_3x5(6)
    x = np.array([-0.8, 0.2, 1.5])
    a = reconstruct(c, inj.measurement_map(c, x), rng=substream(7))
    b = reconstruct(c, inj.measurement_map(c, -x), rng=substream(7))
    assert a.x_hat.tobytes() == b.x_hat.tobytes()
    assert a.x_hat[0] > 0


def test_zero_measurements():
    c = injective_3x5(8)
    r = reconstruct(c, np.zeros(5), rng=substream(0))
    assert r.converged and not r.x_hat.any()


def test_recovery_error_examples():
    x = np.array([1.0, -2.0, 3.0])
    assert recovery_error(-x, x) == 0.0
    eps = 1e-7
    assert recovery_error(x + eps * np.eye(3)[0], x) == pytest.approx(eps, rel=1e-6)
    rng = substream(9)
    for _ in range(20):
        a, b = rng.standard_normal(4), rng.standard_normal(4)
        assert recovery_error(a, b) == min(np.linalg.norm(a - b), np.linalg.norm(a + b))


def test_collision_is_ambiguous():
    c = sample_collection(3, [1, 2, 1, 2], substream(10))
    pair = inj.collision_from_witness(c, inj.find_witness(c, rng=substream(11)))
    r = reconstruct(c, inj.measurement_map(c, pair.u), rng=substream(12))
    assert r.converged
    candidates = [r.x_hat, *r.alternatives]
    assert min(min(recovery_error(z, pair.u), recovery_error(z, pair.v)) for z in candidates) <= 1e-6


def test_result_serializes():
    c = injective_3x5(13)
    d = reconstruct(c, inj.measurement_map(c, np.ones(3)), rng=substream(0)).to_dict()
    assert set(d) == {"x_hat", "residual", "restarts_used", "converged", "iterations", "alternatives"}
