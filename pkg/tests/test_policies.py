import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_unit
from tsbeam.channel import ArrayGeometry, ChannelRealization, ScenarioConfig, sample_scenario, steering_vector
from tsbeam.errors import DegenerateSampleError, InvalidArgumentError, NumericalDegeneracyError
from tsbeam.policies import (
    UNCONSTRAINED_SLOT_CAP,
    ConvergenceDetector,
    SchemeKind,
    check_convergence,
    data_beam,
    run_training,
    select_codebook_beam,
    select_continuous_beam,
)
from tsbeam.posterior import GaussianBelief, PriorConfig, rbf_prior, update, Observation
from tsbeam.transform import dft_matrix, polar_codebook, ring_distance


@pytest.fixture
def setup16(geom16):
    return dft_matrix(16), polar_codebook(geom16, 1.1, 3)


def _channel(n, L=4, seed=0):
    geom = ArrayGeometry.half_wavelength(n, 0.01)
    return sample_scenario(ScenarioConfig(geom, n_paths=L), np.random.default_rng(seed))


# -- detector ---------------------------------------------------------------

def _first_true(det, seq):
    for i, x in enumerate(seq, 1):
        if check_convergence(det, x):
            return i
    return None


def test_detector_constant_sequence_fires_on_eleventh():
    det = ConvergenceDetector(1e-7, 10)
    assert _first_true(det, [0.3] * 20) == 11


def test_detector_alternating_never_fires():
    det = ConvergenceDetector(0.5, 3)
    assert _first_true(det, [0.0, 1.0] * 20) is None
    det = ConvergenceDetector(0.5, 3, relative=True)
    assert _first_true(det, [0.0, 1.0] * 20) is None


def test_detector_infinite_tolerance():
    assert _first_true(ConvergenceDetector(np.inf, 1), [1.0, 5.0]) == 2
    assert _first_true(ConvergenceDetector(np.inf, 1, relative=True), [0.0, 5.0]) == 2


def test_detector_resets_on_miss():
    det = ConvergenceDetector(0.1, 3)
    seq = [1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 2.0]
    assert _first_true(det, seq) == 7
    assert 0 <= det.counter <= 3


def test_detector_relative_tolerance():
    det = ConvergenceDetector(0.1, 2, relative=True)
    # steps of 5% pass, 20% fails
    assert _first_true(det, [100.0, 105.0, 110.0]) == 3
    det.reset()
    assert _first_true(det, [100.0, 120.0, 144.0]) is None


# -- selection ----------------------------------------------------------------

def test_codebook_selects_basis_angle(setup16):
    F, cb = setup16
    for k in (0, 7, 15):
        w, idx = select_codebook_beam(np.eye(16)[k].astype(complex), F, cb)
        assert cb.angle_index[idx] == k and cb.ring_index[idx] == 0


def test_codebook_self_match(setup16, geom16):
    F, cb = setup16
    for row in (4, 20, 47):
        g = F.matrix @ cb.words[row]
        _, idx = select_codebook_beam(g, F, cb)
        assert idx == row


def test_codebook_matches_bruteforce(setup16, rng):
    F, cb = setup16
    for _ in range(50):
        g = rng.standard_normal(16) + 1j * rng.standard_normal(16)
        h_tilde = F.matrix.conj().T @ g
        scores = [abs(np.vdot(h_tilde, w)) for w in cb.words]
        _, idx = select_codebook_beam(g, F, cb)
        assert idx == int(np.argmax(scores))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), mag=st.floats(1e-3, 1e3), ang=st.floats(-np.pi, np.pi))
def test_codebook_selection_scale_invariant(seed, mag, ang):
    geom = ArrayGeometry.half_wavelength(16, 0.01)
    F, cb = dft_matrix(16), polar_codebook(geom, 1.1, 3)
    rng = np.random.default_rng(seed)
    g = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    _, a = select_codebook_beam(g, F, cb)
    _, b = select_codebook_beam(mag * np.exp(1j * ang) * g, F, cb)
    assert a == b


def test_codebook_empty_rejected(setup16):
    F, cb = setup16
    empty = type(cb)(cb.words[:0], cb.angle_index[:0], cb.ring_index[:0], cb.theta[:0], cb.distance[:0], 1.1)
    with pytest.raises(InvalidArgumentError):
        select_codebook_beam(np.ones(16, complex), F, empty)


def test_continuous_beam(rng):
    F = dft_matrix(16)
    h = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    w = select_continuous_beam(F.matrix @ h, F)
    np.testing.assert_allclose(w, h / np.linalg.norm(h), atol=1e-13)
    c = 3.7 * np.exp(0.9j)
    w2 = select_continuous_beam(c * (F.matrix @ h), F)
    np.testing.assert_allclose(w2, np.exp(0.9j) * w, atol=1e-13)
    assert np.linalg.norm(w2) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(DegenerateSampleError):
        select_continuous_beam(np.zeros(16, complex), F)


def test_data_beam(rng):
    F = dft_matrix(8)
    h = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    b = GaussianBelief(F.matrix @ h, np.eye(8, dtype=complex))
    w = data_beam(b, F)
    np.testing.assert_allclose(w, h / np.linalg.norm(h), atol=1e-13)
    with pytest.raises(NumericalDegeneracyError):
        data_beam(GaussianBelief(np.zeros(8, complex), np.eye(8, dtype=complex)), F)


def test_data_beam_after_noiseless_updates_is_matched_filter(rng):
    F = dft_matrix(8)
    h = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    g = F.matrix @ h
    b = rbf_prior(8, PriorConfig(0.3))
    for k in range(8):
        w = F.beams[:, k]
        b = update(b, Observation.from_measurement(F, w, np.vdot(h, w), 1e-12))
    np.testing.assert_allclose(b.mean, g, atol=1e-6)
    w = data_beam(b, F)
    assert abs(np.vdot(w, h)) == pytest.approx(np.linalg.norm(h), rel=1e-9)


# -- training loop --------------------------------------------------------------

def _run(scheme, ch, F, cb, noise_var=0.03, budget=100, seed=1, **kw):
    prior = rbf_prior(F.n)
    return run_training(scheme, ch, F, cb, prior, noise_var, budget, 0.06, 10,
                        np.random.default_rng(seed), **kw)


def test_zero_budget_falls_back_to_boresight(setup16):
    F, cb = setup16
    ch = _channel(16)
    out = _run(SchemeKind.HYBRID, ch, F, cb, budget=0)
    assert out.pilots_used == 0 and not out.converged and out.used_fallback
    boresight = cb.words[(cb.angle_index == 8) & (cb.ring_index == 0)][0]
    np.testing.assert_array_equal(out.w_data, boresight)


def test_noiseless_continuous_identifies_channel():
    F = dft_matrix(8)
    ch = _channel(8, L=1, seed=3)
    out = _run(SchemeKind.CONTINUOUS, ch, F, None, noise_var=1e-12, unconstrained=True)
    assert out.converged
    assert abs(np.vdot(out.w_data, ch.h)) / np.linalg.norm(ch.h) >= 0.999


@pytest.mark.parametrize("scheme", list(SchemeKind))
def test_training_invariants(scheme, setup16):
    F, cb = setup16
    ch = _channel(16, seed=4)
    out = _run(scheme, ch, F, cb, budget=60)
    assert out.pilots_used <= 60
    assert np.linalg.norm(out.w_data) == pytest.approx(1.0, abs=1e-10)
    assert len(out.trace) == out.pilots_used
    assert [r.slot for r in out.trace] == list(range(1, out.pilots_used + 1))
    if scheme is SchemeKind.HYBRID:
        stage2 = sum(r.stage == 2 for r in out.trace)
        assert out.stage1_pilots + stage2 == out.pilots_used
        assert all(r.codeword is not None for r in out.trace if r.stage == 1)
        assert all(r.codeword is None for r in out.trace if r.stage == 2)
    elif scheme is SchemeKind.CODEBOOK:
        assert all(r.codeword is not None for r in out.trace)
        assert out.stage1_pilots == 0
    else:
        assert all(r.codeword is None for r in out.trace)


def test_training_deterministic(setup16):
    F, cb = setup16
    ch = _channel(16, seed=5)
    a = _run(SchemeKind.HYBRID, ch, F, cb, seed=9)
    b = _run(SchemeKind.HYBRID, ch, F, cb, seed=9)
    assert a.trace == b.trace
    assert a.w_data.tobytes() == b.w_data.tobytes()
    assert (a.pilots_used, a.converged, a.stage1_pilots) == (b.pilots_used, b.converged, b.stage1_pilots)


def test_codebook_scheme_converges_on_repeated_codeword(setup16):
    F, cb = setup16
    ch = _channel(16, seed=6)
    out = _run(SchemeKind.CODEBOOK, ch, F, cb, budget=500, noise_var=1e-3)
    assert out.converged
    assert out.pilots_used >= 11


def test_every_probe_is_unit_norm(setup16, monkeypatch):
    F, cb = setup16
    ch = _channel(16, seed=7)
    seen = []
    import tsbeam.policies as pol

    real = pol.Observation.from_measurement

    def spy(F_, w, y, nv):
        seen.append(np.linalg.norm(w))
        return real(F_, w, y, nv)

    monkeypatch.setattr(pol.Observation, "from_measurement", staticmethod(spy))
    _run(SchemeKind.HYBRID, ch, F, cb, budget=80)
    assert seen and np.allclose(seen, 1.0, atol=1e-10)


def test_log_det_non_increasing(setup16, monkeypatch):
    F, cb = setup16
    ch = _channel(16, seed=8)
    import tsbeam.policies as pol

    dets = []
    real = pol.update

    def spy(belief, obs, inplace=False):
        out = real(belief, obs, inplace)
        dets.append(np.linalg.slogdet(out.cov + 1e-12 * np.eye(F.n))[1])
        return out

    monkeypatch.setattr(pol, "update", spy)
    _run(SchemeKind.CONTINUOUS, ch, F, cb, budget=80)
    assert np.all(np.diff(dets) <= 1e-9)


def test_unconstrained_ignores_budget(setup16):
    F, _ = setup16
    ch = _channel(16, seed=2)
    out = _run(SchemeKind.CONTINUOUS, ch, F, None, budget=1, unconstrained=True)
    assert out.pilots_used > 1
    assert out.pilots_used <= UNCONSTRAINED_SLOT_CAP


def test_requires_codebook(setup16):
    F, _ = setup16
    with pytest.raises(InvalidArgumentError):
        _run(SchemeKind.HYBRID, _channel(16), F, None)
    with pytest.raises(InvalidArgumentError):
        _run(SchemeKind.CONTINUOUS, _channel(16), F, None, noise_var=0.0)
