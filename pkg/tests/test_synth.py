import numpy as np
import pytest

from dtfnet.core import LabeledSeries, Rng
from dtfnet.synth import LABEL_KINDS, NoLabels, SynthSpec, clean_signal, describe_labels, generate_synthetic


def test_zero_noise_equals_clean():
    s = generate_synthetic(SynthSpec(noise_std=0.0, seed=3))
    np.testing.assert_array_equal(s.target, s.clean)


def test_shape_landmarks():
    s = generate_synthetic(SynthSpec())
    c = s.clean
    assert s.n == 1000 and s.values.shape == (1000, 1)
    assert c[100] == pytest.approx(-2.0)
    assert c[99] == 0.0 and c[101] == 0.0  # single-sample drop
    assert c[790:810].min() == pytest.approx(-5.0)
    assert np.mean(c[550:651]) == pytest.approx(4.0, abs=0.05)
    # one full sine cycle on [800, 1000): back to zero at the end
    sine = c[801:1000]
    assert sine.max() == pytest.approx(2.0, abs=1e-3) and sine.min() == pytest.approx(-2.0, abs=1e-3)


def test_plateau_has_enlarged_variance():
    c = clean_signal()[0]
    assert np.var(c[500:700]) == pytest.approx(3 * 0.2**2 - 0.2**2, rel=0.05)


def test_labels():
    s = generate_synthetic(SynthSpec())
    labels = describe_labels(s)
    assert len(labels) == 11
    assert [i for i, _ in labels] == sorted(i for i, _ in labels)
    assert {k for _, k in labels} == set(LABEL_KINDS)
    idx = [i for i, _ in labels]
    assert {100, 800, 500, 700} <= set(idx)


def test_no_labels():
    with pytest.raises(NoLabels):
        describe_labels(LabeledSeries([1.0, 2.0]))


def test_determinism():
    a = generate_synthetic(SynthSpec(seed=4))
    b = generate_synthetic(SynthSpec(seed=4))
    c = generate_synthetic(SynthSpec(seed=5))
    np.testing.assert_array_equal(a.target, b.target)
    np.testing.assert_array_equal(a.clean, c.clean)
    assert not np.array_equal(a.target, c.target)
    # explicit Rng overrides the spec seed
    d = generate_synthetic(SynthSpec(seed=4), Rng(5))
    np.testing.assert_array_equal(d.target, c.target)


@pytest.mark.parametrize("seed", range(20))
def test_residual_std_band(seed):
    s = generate_synthetic(SynthSpec(seed=seed))
    assert 0.18 <= np.std(s.target - s.clean) <= 0.22


def test_short_series_truncates_labels():
    s = generate_synthetic(SynthSpec(n_points=300))
    assert s.n == 300
    assert all(i < 300 for i in s.abrupt_indices)
    assert s.abrupt_indices == (100, 200)
