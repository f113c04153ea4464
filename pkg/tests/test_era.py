import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qhid.accessible import evolve_accessible
from qhid.era import era, select_order, transfer_function
from qhid.errors import IdentificationError, NyquistError, ValidationError
from qhid.pipeline import protocol_dynamics, simulate_protocol, true_values

from conftest import tce_spec


def test_cosine_order_two():
    dt = 1e-3
    y = np.cos(2 * np.pi * 100 * dt * np.arange(100))
    R = era(y, dt, svd_rel_tol=1e-8)
    assert R.order == 2
    lam = np.sort_complex(np.linalg.eigvals(R.A))
    np.testing.assert_allclose(lam, [-2j * np.pi * 100, 2j * np.pi * 100], rtol=1e-6, atol=1e-6 * 2 * np.pi * 100)


def test_constant_order_one():
    R = era(np.full(40, 0.7), 1e-3)
    assert R.order == 1
    assert abs(R.A[0, 0]) < 1e-10
    assert R.C @ R.x0 == pytest.approx(0.7)


def test_tce_reconstruction():
    spec = tce_spec()
    rd = protocol_dynamics(spec)
    a = true_values(spec)
    dt = rd.default_dt(a)
    y = evolve_accessible(rd, a, dt, 1600)
    R = era(y, dt)
    assert np.max(np.abs(R.response(1600) - y)) <= 1e-8


def test_zero_trace_and_bad_input():
    with pytest.raises(IdentificationError):
        era(np.zeros(20), 1e-3)
    with pytest.raises(ValidationError):
        era([1.0, 2.0], 1e-3)
    with pytest.raises(ValidationError):
        era([1.0, np.nan, 2.0, 3.0], 1e-3)
    with pytest.raises(ValidationError):
        era(np.ones(10), 1e-3, order=20)


def test_growth_rejected():
    y = np.exp(5.0 * 1e-2 * np.arange(40))
    with pytest.raises(IdentificationError, match="grow"):
        era(y, 1e-2)


def test_nyquist_eigenvalue_rejected():
    y = (-1.0) ** np.arange(40)
    with pytest.raises(NyquistError):
        era(y, 1e-3)


def test_select_order_knee():
    s = np.array([1.0, 0.5, 0.3, 1e-4, 5e-5])
    assert select_order(s, 1e-8) == 3
    assert select_order(s, 1e-2) == 3
    assert select_order(np.zeros(3), 1e-8) == 0


def test_two_by_two_transfer_function():
    a = 3.0
    tf = transfer_function([1.0, 0.0], [[0.0, -2 * a], [2 * a, 0.0]], [1.0, 0.0])
    np.testing.assert_allclose(tf.den, [1.0, 0.0, 4 * a * a], atol=1e-12)
    np.testing.assert_allclose(tf.num, [1.0, 0.0], atol=1e-12)
    s = np.array([0.3 + 1j, 2.0 - 5j])
    np.testing.assert_allclose(tf(s), s / (s**2 + 4 * a * a), rtol=1e-12)


def test_integrator_transfer_function():
    tf = transfer_function([1.0], [[0.0]], [1.0])
    s = np.array([1.0, 2j, 3 - 1j])
    np.testing.assert_allclose(tf(s), 1 / s)
    np.testing.assert_allclose(tf.evaluate_poly(s), 1 / s)


def test_transfer_function_shape_check():
    with pytest.raises(ValidationError):
        transfer_function([1.0, 0.0], np.eye(3), [1.0, 0.0, 0.0])


def _random_system(rng, max_pairs=6, with_dc=None):
    pairs = int(rng.integers(1, max_pairs + 1))
    while True:
        f = np.sort(rng.uniform(0.05, 0.45, pairs))  # cycles per sample
        if pairs == 1 or np.min(np.diff(f)) > 0.02:
            break
    amps = rng.uniform(0.5, 2.0, pairs)
    phases = rng.uniform(0, 2 * np.pi, pairs)
    dc = rng.uniform(0.5, 1.5) if (with_dc if with_dc is not None else rng.random() < 0.3) else 0.0
    order = 2 * pairs + (dc != 0)
    return f, amps, phases, dc, order


@given(st.integers(0, 10_000))
def test_realization_invariance_random(seed):
    """Any two realizations of one signal share the transfer function."""
    rng = np.random.default_rng(seed)
    f, amps, phases, dc, order = _random_system(rng)
    dt = 1e-3
    j = np.arange(4 * order + 4)
    y = dc + (amps * np.cos(2 * np.pi * f * j[:, None] + phases)).sum(axis=1)
    R1 = era(y, dt)
    R2 = era(y, dt, rows=len(y) // 3)
    assert R1.order == R2.order == order
    s = 1j * rng.uniform(-np.pi / dt, np.pi / dt, 20) + rng.uniform(1, 100, 20)
    t1, t2 = R1.transfer_function()(s), R2.transfer_function()(s)
    np.testing.assert_allclose(t1, t2, rtol=1e-6)


@given(st.integers(0, 10_000))
def test_conjugate_symmetric_poles(seed):
    rng = np.random.default_rng(seed)
    f, amps, phases, dc, order = _random_system(rng)
    j = np.arange(4 * order)
    y = dc + (amps * np.cos(2 * np.pi * f * j[:, None] + phases)).sum(axis=1)
    lam = np.linalg.eigvals(era(y, 1e-3).A)
    for p in lam:
        assert np.min(np.abs(lam - p.conj())) < 1e-8 * max(1.0, abs(p))


def test_tce_model_vs_era_transfer_function():
    spec = tce_spec()
    rd = protocol_dynamics(spec)
    a = true_values(spec)
    dt = rd.default_dt(a)
    _, total = simulate_protocol(spec, dt, 1600)
    tf_hat = era(total.real, dt).transfer_function()
    tf = transfer_function(rd.output_row, rd.generator(a), rd.x0)
    np.testing.assert_allclose(tf.den, np.poly(rd.generator(a)), rtol=1e-12, atol=1e-6)
    rng = np.random.default_rng(1)
    s = 1j * rng.uniform(-4000, 4000, 20) + rng.uniform(10, 500, 20)
    np.testing.assert_allclose(tf_hat(s), tf(s), rtol=1e-6)
    np.testing.assert_allclose(tf.evaluate_poly(s), tf(s), rtol=1e-8)
