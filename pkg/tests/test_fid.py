import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qhid.accessible import evolve_accessible, reduce
from qhid.errors import ValidationError
from qhid.fid import (
    ObservablePair,
    TimeTrace,
    apply_dead_time,
    apply_decoherence,
    preprocess,
    simulate_fid,
)
from qhid.hamiltonian import MoleculeSpec, dense_hamiltonian, nmr_model
from qhid.pauli import WeightedSum

from conftest import tce_spec

ONE = nmr_model(MoleculeSpec(1, (100.0,)))
TCE = nmr_model(tce_spec())
DT = 1e-3


def test_single_spin_precession():
    tr = simulate_fid(ONE, "X", [1], DT, 64)
    np.testing.assert_allclose(tr.samples, np.exp(-1j * 2 * np.pi * 100 * DT * np.arange(64)), atol=1e-12)


def test_tce_real_part_matches_reduced_dynamics():
    rd = reduce(nmr_model(tce_spec(), with_values=False), ["IX"], WeightedSum({"IX": 1.0}))
    dt = rd.default_dt(TCE.values)
    tr = simulate_fid(TCE, "IX", [2], dt, 300)
    np.testing.assert_allclose(tr.real, evolve_accessible(rd, TCE.values, dt, 300), atol=1e-10)


def test_gain_linearity():
    a = simulate_fid(TCE, "IX", [2], 1e-4, 100)
    b = simulate_fid(TCE, "IX", [2], 1e-4, 100, gain=2.5)
    np.testing.assert_array_equal(b.samples, 2.5 * a.samples)


def test_non_hermitian_state_rejected():
    rho = np.array([[0, 1], [0, 0]])
    with pytest.raises(ValidationError):
        simulate_fid(ONE, rho, [1], DT, 4)


def test_uniform_decay_envelope():
    t2 = 0.05
    dt = t2 / 50
    clean = simulate_fid(ONE, "X", [1], dt, 51)
    decayed = apply_decoherence(ONE, "X", [1], dt, 51, 1.0 / t2)
    assert abs(decayed.samples[50]) == pytest.approx(abs(clean.samples[50]) * np.exp(-1), rel=1e-12)
    assert decayed.t2 == pytest.approx(t2)
    np.testing.assert_allclose(simulate_fid(ONE, "X", [1], dt, 51, t2=t2).samples, decayed.samples, atol=1e-14)


def test_zero_rates_match_clean():
    clean = simulate_fid(TCE, "IX", [2], 1e-4, 100)
    same = apply_decoherence(TCE, "IX", [2], 1e-4, 100, np.zeros((4, 4)))
    np.testing.assert_allclose(same.samples, clean.samples, atol=1e-14)
    with pytest.raises(ValidationError):
        apply_decoherence(TCE, "IX", [2], 1e-4, 10, -1.0)


def test_tce_linewidth():
    from qhid.ft import find_peaks, spectrum

    tr = simulate_fid(TCE, "IX", [2], 1e-4, 1 << 14, t2=0.05)
    peaks = find_peaks(spectrum(tr, 4), 0.05)
    # the two inner lines sit 4.6 Hz apart and merge at this width; the outer ones stand alone
    assert len(peaks) == 3
    for p in (peaks[0], peaks[-1]):
        assert p.width == pytest.approx(1 / (np.pi * 0.05), rel=0.1)


def test_dead_time_identity_and_single_phase():
    tr = simulate_fid(ONE, "X", [1], DT, 64)
    assert apply_dead_time(tr, 0.0) is tr
    shifted = apply_dead_time(tr, 2.5e-3)
    np.testing.assert_allclose(shifted.samples, tr.samples * np.exp(-1j * 2 * np.pi * 100 * 2.5e-3), atol=1e-9)
    assert shifted.dead_time == 2.5e-3
    with pytest.raises(ValidationError):
        apply_dead_time(tr, -1.0)


def test_tce_dead_time_matches_eigenbasis_phases():
    """Delayed trace against the eigenbasis sum with phases ``exp(i w_rs tau)``."""
    tau, dt, N = 1e-3, 1e-4, 400
    tr = simulate_fid(TCE, "IX", [2], dt, N)
    E, V = np.linalg.eigh(dense_hamiltonian(TCE))
    obs = ObservablePair.on_qubits(2, [2])
    F = V.conj().T @ obs.f_minus @ V
    rho = V.conj().T @ WeightedSum({"IX": 1.0}).to_dense() @ V
    w = E[:, None] - E[None, :]
    t = tau + dt * np.arange(N)
    oracle = np.einsum("rs,rs,trs->t", F, rho.T / 4, np.exp(1j * w[None] * t[:, None, None]))
    np.testing.assert_allclose(apply_dead_time(tr, tau).samples, oracle, atol=1e-9)
    native = simulate_fid(TCE, "IX", [2], dt, N, dead_time=tau)
    np.testing.assert_allclose(native.samples, oracle, atol=1e-12)


def test_preprocess_scales_first_sample():
    tr = simulate_fid(TCE, "IX", [2], 1e-4, 100, gain=2.5)
    out = preprocess(tr, 1.0)
    assert out.samples[0].real == pytest.approx(1.0, rel=1e-15)
    assert out.gain == 1.0 and out.dead_time == 0.0


def test_preprocess_zero_reference_warns():
    tr = simulate_fid(TCE, "IX", [2], 1e-4, 100, gain=3.0)
    with pytest.warns(UserWarning, match="unit-energy"):
        out = preprocess(tr, 0.0)
    assert np.mean(np.abs(out.samples) ** 2) == pytest.approx(1.0)


def test_preprocess_rewinds_dead_time():
    clean = simulate_fid(TCE, "IX", [2], 1e-4, 1600)
    delayed = simulate_fid(TCE, "IX", [2], 1e-4, 1600, gain=3.0, dead_time=1e-3)
    out = preprocess(delayed, 1.0)
    assert np.max(np.abs(out.samples - clean.samples)) < 1e-8


def test_phase_ramp_exact_for_periodic_trace():
    # 10 whole cycles in the window, so the circular shift is exact
    clean = simulate_fid(ONE, "X", [1], DT, 100)
    delayed = simulate_fid(ONE, "X", [1], DT, 100, gain=2.0, dead_time=2.5e-3)
    out = preprocess(delayed, 1.0, method="phase_ramp")
    np.testing.assert_allclose(out.samples, clean.samples, atol=1e-10)


def test_preprocess_unknown_method():
    tr = simulate_fid(ONE, "X", [1], DT, 16, dead_time=1e-3)
    with pytest.raises(ValidationError):
        preprocess(tr, 1.0, method="magic")


def test_csv_roundtrip(tmp_path):
    tr = simulate_fid(TCE, "IX", [2], 1e-4, 50, gain=1.5, dead_time=2e-4, t2=0.3)
    path = tmp_path / "t.csv"
    tr.to_csv(path)
    back = TimeTrace.from_csv(path)
    np.testing.assert_array_equal(back.samples, tr.samples)
    assert (back.dt, back.gain, back.dead_time, back.t2) == (tr.dt, tr.gain, tr.dead_time, tr.t2)
    assert TimeTrace.from_csv(tr.to_csv()).N == 50


def test_csv_malformed():
    with pytest.raises(ValidationError):
        TimeTrace.from_csv("dt,1\nN,3\nj,re,im\n0,1,0\n")
    with pytest.raises(ValidationError):
        TimeTrace.from_csv("dt,1\nN,1\n0,1,0\n")


def test_trace_validation():
    with pytest.raises(ValidationError):
        TimeTrace(0.0, [1.0])
    with pytest.raises(ValidationError):
        TimeTrace(1.0, [1.0]) + TimeTrace(2.0, [1.0])


@given(st.floats(0.5, 5.0), st.floats(-3, 3))
def test_gain_and_dead_time_inverse(gain, log_tau):
    tau = 1e-4 * 10 ** (log_tau / 3)
    clean = simulate_fid(TCE, "IX", [2], 1e-4, 400)
    distorted = simulate_fid(TCE, "IX", [2], 1e-4, 400, gain=gain, dead_time=tau)
    out = preprocess(distorted, clean.samples[0].real)
    np.testing.assert_allclose(out.samples, clean.samples, atol=1e-7)
