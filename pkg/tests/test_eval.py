import numpy as np
import pytest
from hypothesis import given, strategies as st

from dtfnet.core import LabeledSeries, LengthMismatch, NoGroundTruth, RunConfig, Rng, load_csv
from dtfnet.dtf import PolicyModel
from dtfnet.eval import (
    HorizonTooLong,
    UnknownMethod,
    abrupt_index_set,
    comparison_table,
    model_checksum,
    parse_method,
    split_borders,
    trend_metrics,
    tsf_experiment,
    write_plot_csv,
    write_table_csv,
)


def test_metrics_perfect_and_identity(synthetic):
    m = trend_metrics(synthetic.clean, synthetic)
    assert (m.mse_full, m.mae_full, m.mse_abrupt, m.mae_abrupt, m.noise_reduction) == (0, 0, 0, 0, 1)
    m = trend_metrics(synthetic.target, synthetic)
    assert m.noise_reduction == 0.0
    assert m.mse_full == pytest.approx(0.04, rel=0.15)


def test_metrics_errors(synthetic):
    with pytest.raises(NoGroundTruth):
        trend_metrics(np.zeros(5), LabeledSeries(np.zeros(5)))
    with pytest.raises(LengthMismatch):
        trend_metrics(np.zeros(5), synthetic)


def test_union_window_hand_enumerated():
    idx = abrupt_index_set([10, 20], 100, 30)
    np.testing.assert_array_equal(idx, np.arange(0, 36))
    np.testing.assert_array_equal(abrupt_index_set([98], 100, 30), np.arange(83, 100))


@given(st.lists(st.integers(0, 199), max_size=8), st.integers(0, 10**6))
def test_abrupt_metrics_match_brute_force(labels, seed):
    rng = np.random.default_rng(seed)
    clean = rng.normal(size=200)
    series = LabeledSeries(clean + rng.normal(size=200), clean=clean, abrupt_indices=sorted(set(labels)) or [0])
    trend = rng.normal(size=200)
    chosen = sorted({t for i in series.abrupt_indices for t in range(i - 15, i + 16) if 0 <= t < 200})
    err = trend - clean
    m = trend_metrics(trend, series)
    assert m.mse_abrupt == float(np.mean(err[chosen] ** 2))
    assert m.mae_abrupt == float(np.mean(np.abs(err[chosen])))


def test_parse_method():
    assert parse_method("l1") == ("l1", 0.1)
    assert parse_method("L1:5e-4") == ("l1", 5e-4)
    assert parse_method("median:7") == ("median", 7)
    with pytest.raises(UnknownMethod):
        parse_method("emd")


def test_comparison_table_shape_and_permutation(synthetic):
    cfg = RunConfig()
    assert comparison_table(synthetic, [], cfg) == []
    methods = ["hp", "l1", "median", "ma", "haar"]
    rows = dict(comparison_table(synthetic, methods, cfg))
    rev = dict(comparison_table(synthetic, methods[::-1], cfg))
    assert len(rows) == 5 and rows == rev
    with pytest.raises(UnknownMethod):
        comparison_table(synthetic, ["hp", "nope"], cfg)


def test_comparison_table_dtf_permutation(synthetic):
    cfg = RunConfig(rl_steps=500)
    a = dict(comparison_table(synthetic, ["dtf", "hp"], cfg))
    b = dict(comparison_table(synthetic, ["hp", "dtf"], cfg))
    assert a == b


def test_table_and_plot_csv(tmp_path, synthetic):
    rows = comparison_table(synthetic, ["hp", "ma"], RunConfig())
    write_table_csv(rows, tmp_path / "t.csv")
    header = (tmp_path / "t.csv").read_text().splitlines()
    assert header[0] == "method,mse_full,mae_full,mse_abrupt,mae_abrupt,noise_reduction"
    assert len(header) == 3
    write_plot_csv(tmp_path / "p.csv", synthetic, synthetic.clean, np.zeros(synthetic.n, int))
    back = load_csv(tmp_path / "p.csv", "raw")
    assert back.n == synthetic.n
    assert (tmp_path / "p.csv").read_text().splitlines()[0] == "t,raw,clean,trend,action"


def test_split_borders():
    b = split_borders(1000, 16)
    assert b == {"train": (0, 700), "val": (684, 800), "test": (784, 1000)}


@pytest.fixture(scope="module")
def tsf_base(synthetic):
    return tsf_experiment(synthetic, None, "nlinear", [24], RunConfig(), Rng(0))


def test_tsf_copy_channel_is_redundant(synthetic, tsf_base):
    copy = tsf_experiment(synthetic, synthetic.target, "nlinear", [24], RunConfig(), Rng(0))
    assert copy[24][0] == pytest.approx(tsf_base[24][0], rel=0.05)


def test_tsf_oracle_trend_does_not_hurt(synthetic, tsf_base):
    oracle = tsf_experiment(synthetic, synthetic.clean, "nlinear", [24], RunConfig(), Rng(0))
    assert oracle[24][0] <= tsf_base[24][0]


def test_tsf_deterministic(synthetic, tsf_base):
    assert tsf_experiment(synthetic, None, "nlinear", [24], RunConfig(), Rng(0)) == tsf_base


def test_tsf_horizon_too_long(synthetic):
    # test split holds 200 points; horizons may not exceed 200 - h
    with pytest.raises(HorizonTooLong):
        tsf_experiment(synthetic, None, "nlinear", [185], RunConfig(), Rng(0))
    assert 184 in tsf_experiment(synthetic, None, "nlinear", [184], RunConfig(forecaster_epochs=1), Rng(0))


@pytest.mark.parametrize("kind", ["nlinear", "dlinear"])
def test_tsf_no_test_leakage(synthetic, kind):
    # scrambling everything after the validation split leaves every trained model unchanged
    cfg = RunConfig(forecaster_epochs=3)
    policy = PolicyModel.create("PPO", cfg, Rng(5))
    scrambled = synthetic.target.copy()
    scrambled[800:] = np.random.default_rng(0).normal(size=200) * 10
    other = LabeledSeries(scrambled, clean=synthetic.clean, abrupt_indices=synthetic.abrupt_indices)
    for trend in (None, policy):
        _, m1 = tsf_experiment(synthetic, trend, kind, [4, 24], cfg, Rng(1), return_models=True)
        _, m2 = tsf_experiment(other, trend, kind, [4, 24], cfg, Rng(1), return_models=True)
        for p in (4, 24):
            assert model_checksum(m1[p]) == model_checksum(m2[p])
