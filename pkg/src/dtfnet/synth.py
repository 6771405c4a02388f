"""Synthetic abrupt-change benchmark signal with ground-truth labels."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DataError, LabeledSeries, Rng, as_rng

# Shape constants. Only the positions of the drops, the plateau and the sine
# segment are dictated by the benchmark; the magnitudes below are fixed here.
SPIKE_1 = (100, -2.0)
SPIKE_2 = (800, -5.0)
PLATEAU = (500, 700, 4.0)
PLATEAU_WIGGLE_AMPLITUDE = 0.4  # 3x the default noise variance on the plateau
PLATEAU_WIGGLE_PERIOD = 25
SINE_START = 800
SINE_AMPLITUDE = 2.0
BUMP = ((200, 0.0), (300, 2.0), (400, 0.0))
DIP = ((720, 0.0), (760, -1.0), (800, 0.0))

LABEL_KINDS = ("drop", "shift_start", "shift_end", "sine_vertex", "slope_change")


class NoLabels(DataError):
    pass


@dataclass(frozen=True)
class SynthSpec:
    n_points: int = 1000
    noise_std: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.n_points < 1:
            raise DataError("n_points must be >= 1")
        if not self.noise_std >= 0:
            raise DataError("noise_std must be >= 0")


def clean_signal(n_points: int = 1000):
    """Noise-free signal and its labels ``[(index, kind), ...]``.

    The layout is defined on a 1000-sample grid; other lengths truncate it or
    extend the sine segment's final value.
    """
    t = np.arange(max(n_points, 1000), dtype=np.float64)
    x = np.zeros_like(t)
    labels = []

    # triangular bump and dip: piecewise-linear slope changes
    for knots in (BUMP, DIP):
        for (t0, v0), (t1, v1) in zip(knots, knots[1:]):
            seg = (t >= t0) & (t < t1)
            x[seg] = v0 + (v1 - v0) * (t[seg] - t0) / (t1 - t0)
    labels += [(k, "slope_change") for k, _ in BUMP + DIP[:2]]

    start, stop, level = PLATEAU
    seg = (t >= start) & (t < stop)
    x[seg] = level + PLATEAU_WIGGLE_AMPLITUDE * np.sin(2 * np.pi * (t[seg] - start) / PLATEAU_WIGGLE_PERIOD)
    labels += [(start, "shift_start"), (stop, "shift_end")]

    seg = t >= SINE_START
    x[seg] = SINE_AMPLITUDE * np.sin(2 * np.pi * (t[seg] - SINE_START) / 200.0)
    labels += [(SINE_START + 50, "sine_vertex"), (SINE_START + 150, "sine_vertex")]

    for idx, depth in (SPIKE_1, SPIKE_2):
        x[idx] += depth
        labels.append((idx, "drop"))

    labels.sort()
    x = x[:n_points]
    return x, [(i, k) for i, k in labels if i < n_points]


def generate_synthetic(spec: SynthSpec | None = None, rng: Rng | int | None = None) -> LabeledSeries:
    """Noisy benchmark series: clean signal plus i.i.d. Gaussian noise."""
    spec = spec or SynthSpec()
    rng = as_rng(spec.seed if rng is None else rng).split("synth-noise")
    clean, labels = clean_signal(spec.n_points)
    noisy = clean + rng.normal(0.0, 1.0, spec.n_points) * spec.noise_std
    return LabeledSeries(
        noisy,
        clean=clean,
        abrupt_indices=tuple(i for i, _ in labels),
        label_kinds=tuple(k for _, k in labels),
        name=f"synthetic-seed{spec.seed}",
    )


def describe_labels(series: LabeledSeries):
    """Sorted ``(index, kind)`` pairs for the labelled abrupt changes."""
    if not series.abrupt_indices:
        raise NoLabels(f"series {series.name!r} carries no abrupt-change labels")
    kinds = series.label_kinds or ("slope_change",) * len(series.abrupt_indices)
    return sorted(zip(series.abrupt_indices, kinds))
