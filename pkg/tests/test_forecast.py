import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from dtfnet.core import LabeledSeries, RunConfig, Rng
from dtfnet.dtf import compute_reward
from dtfnet.forecast import (
    Forecaster,
    SeriesTooShort,
    decompose,
    dlinear_predict,
    make_windows,
    nlinear_predict,
    phi_pretrain,
    train_forecaster,
)
from dtfnet.nn import ShapeMismatch

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def series_of(values):
    return LabeledSeries(np.asarray(values, dtype=np.float64))


def test_nlinear_zero_weights_repeat_last_value():
    m = Forecaster.create("nlinear", 2, 6, 3)
    w = np.random.default_rng(0).normal(size=(2, 6))
    np.testing.assert_array_equal(nlinear_predict(m, w), np.full(3, w[0, -1]))
    np.testing.assert_array_equal(nlinear_predict(m, np.full((2, 6), 7.5)), np.full(3, 7.5))


@given(arrays(np.float64, (2, 5), elements=finite), st.floats(-100, 100))
def test_nlinear_level_shift_equivariant(window, c):
    m = Forecaster.create("nlinear", 2, 5, 2)
    m.nets[0].weights[0][:] = np.random.default_rng(1).normal(size=(2, 10))
    scale = 1 + np.abs(window).max() + abs(c)
    np.testing.assert_allclose(m.predict(window + c), m.predict(window) + c, atol=1e-9 * scale * 10)


def test_dlinear_repeat_mean_constant():
    m = Forecaster.create("dlinear", 1, 30, 4)
    out = dlinear_predict(m, np.full((1, 30), -1.25))
    np.testing.assert_allclose(out, -1.25, atol=1e-12)
    assert np.ptp(out) == 0.0


def test_dlinear_kernel_one_has_no_remainder():
    x = np.random.default_rng(2).normal(size=(3, 1, 12))
    trend, rem = decompose(x[:, 0, :], 1)
    np.testing.assert_array_equal(rem, 0.0)
    np.testing.assert_array_equal(trend, x[:, 0, :])


@settings(max_examples=50)
@given(arrays(np.float64, (3, 40), elements=st.floats(1.0, 2.0, exclude_max=True)), st.sampled_from([1, 3, 5, 25]))
def test_dlinear_decomposition_exact_within_one_binade(x, k):
    # trend and input share an exponent, so the remainder is computed exactly
    trend, rem = decompose(x, k)
    np.testing.assert_array_equal(trend + rem, x)


@settings(max_examples=50)
@given(arrays(np.float64, (3, 40), elements=finite), st.sampled_from([1, 3, 5, 25]))
def test_dlinear_decomposition_within_an_ulp(x, k):
    # exact equality is impossible once |trend| > 2|x|: both parts then live on
    # a coarser grid than x
    trend, rem = decompose(x, k)
    bound = np.spacing(np.maximum(np.abs(trend), np.abs(rem)))
    assert np.all(np.abs(trend + rem - x) <= bound)


def test_wrong_kind_and_shape():
    with pytest.raises(Exception):
        dlinear_predict(Forecaster.create("nlinear", 1, 4, 2), np.zeros((1, 4)))
    with pytest.raises(ShapeMismatch):
        Forecaster.create("nlinear", 1, 4, 2).predict(np.zeros((2, 4)))


@given(arrays(np.float64, (2, 8), elements=finite), st.sampled_from(["nlinear", "dlinear", "mlp"]))
def test_output_length_and_finite(window, kind):
    m = Forecaster.create(kind, 2, 8, 3, Rng(0), hidden=8, kernel=5)
    out = m.predict(window)
    assert out.shape == (3,) and np.all(np.isfinite(out))


def test_make_windows_layout():
    ch = np.vstack([np.arange(10.0), -np.arange(10.0)])
    X, Y, starts = make_windows(ch, 3, 2)
    assert X.shape == (6, 2, 3) and Y.shape == (6, 2)
    np.testing.assert_array_equal(X[2], [[2, 3, 4], [-2, -3, -4]])
    np.testing.assert_array_equal(Y[2], [5, 6])
    _, _, s = make_windows(ch, 3, 2, target_start=7)
    assert s[0] == 4
    with pytest.raises(SeriesTooShort):
        make_windows(ch, 8, 3)


def test_training_reduces_loss(synthetic):
    m = Forecaster.create("nlinear", 1, 16, 4)
    curve = train_forecaster(m, synthetic, epochs=15, lr=1e-3, rng=Rng(0))
    assert curve[-1] < curve[0]
    assert curve[-1] <= curve[1]


def test_zero_epochs_leave_parameters():
    m = Forecaster.create("mlp", 1, 8, 2, Rng(1), hidden=8)
    before = [p.copy() for p in m.params]
    train_forecaster(m, series_of(np.sin(np.arange(60.0))), epochs=0, rng=Rng(1))
    for a, b in zip(before, m.params):
        np.testing.assert_array_equal(a, b)


def test_linear_series_is_realisable():
    m = Forecaster.create("nlinear", 1, 8, 3)
    curve = train_forecaster(m, series_of(0.5 + 0.02 * np.arange(300)), epochs=200, lr=1e-2, rng=Rng(2))
    assert curve[-1] < 1e-6


def test_training_deterministic(synthetic):
    curves, params = [], []
    for _ in range(2):
        m = Forecaster.create("mlp", 1, 16, 4, Rng(3), hidden=16)
        curves.append(train_forecaster(m, synthetic, epochs=2, rng=Rng(3)))
        params.append(m.params)
    np.testing.assert_array_equal(curves[0], curves[1])
    for a, b in zip(*params):
        np.testing.assert_array_equal(a, b)


def test_too_short_series():
    with pytest.raises(SeriesTooShort):
        train_forecaster(Forecaster.create("nlinear", 1, 8, 3), series_of(np.arange(11.0)))
    with pytest.raises(SeriesTooShort):
        phi_pretrain(series_of(np.arange(10.0)), RunConfig(h=8, p=2))


@pytest.fixture(scope="module")
def phi(synthetic):
    return phi_pretrain(synthetic, RunConfig(), Rng(0))


def test_phi_shape_and_determinism(synthetic, phi):
    cfg = RunConfig()
    assert (phi.channels, phi.h, phi.p) == (2, cfg.h, cfg.p)
    again = phi_pretrain(synthetic, cfg, Rng(0))
    for a, b in zip(phi.params, again.params):
        np.testing.assert_array_equal(a, b)


def _vertex_actions(n, start, h, edges=(500, 700)):
    acts = np.zeros(n, dtype=np.int64)
    for e in edges:
        if start <= e < start + h:
            acts[e] = 1
            if e - 1 >= start:
                acts[e - 1] = 1
    return acts


def test_phi_prefers_true_vertices_on_mean_shift(synthetic, phi):
    cfg = RunConfig()
    h, p, n = cfg.h, cfg.p, synthetic.n
    zero = np.zeros(n, dtype=np.int64)
    rng = np.random.default_rng(0)
    starts = rng.integers(500 - h + 1, 700 - p, size=200)
    wins = 0
    gains = []
    for s in starts:
        acts = _vertex_actions(n, s, h)
        t = s + h + p
        r1 = compute_reward(synthetic, acts, t, phi, cfg)
        r0 = compute_reward(synthetic, zero, t, phi, cfg)
        wins += r1 >= r0
        if acts.any():
            gains.append(r1 - r0)
    assert wins >= 0.6 * len(starts)
    # windows that actually contain a shift edge: marking it helps on average
    assert np.mean(gains) > 0
