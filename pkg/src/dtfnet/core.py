"""Shared types, seeded random streams, run configuration and file I/O."""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
import tempfile
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np


# --- errors -------------------------------------------------------------------


class DtfError(Exception):
    """Base class for every error raised by dtfnet."""


class DataError(DtfError, ValueError):
    """Input data is malformed or has the wrong shape."""


class ConfigError(DtfError, ValueError):
    """A configuration value is invalid."""


class NumericalError(DtfError, ArithmeticError):
    """A numerical routine failed to produce a usable answer."""


class MissingColumn(DataError):
    def __init__(self, column, available):
        super().__init__(f"column {column!r} not found; available: {', '.join(available)}")
        self.column = column


class NonNumericCell(DataError):
    def __init__(self, row, column, text):
        super().__init__(f"non-numeric cell at row {row}, column {column!r}: {text!r}")
        self.row = row
        self.column = column


class EmptyFile(DataError):
    pass


class LengthMismatch(DataError):
    pass


class TooShort(DataError):
    pass


class NonFiniteInput(DataError):
    pass


class NoGroundTruth(DataError):
    pass


class NonConvergence(NumericalError):
    """Iterative solver hit its iteration cap; ``best`` holds the best iterate."""

    def __init__(self, message, best=None, iterations=0):
        super().__init__(message)
        self.best = best
        self.iterations = iterations


# --- random streams -----------------------------------------------------------


class Rng:
    """Seeded counter-based (Philox) generator that can be split by purpose.

    ``Rng(7).split("env")`` always yields the same stream regardless of how much
    the parent or any sibling has been consumed, so adding RL steps never
    perturbs data generation.
    """

    def __init__(self, seed: int, path: tuple = ()):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.path = tuple(path)
        words = [self.seed & 0xFFFFFFFF, self.seed >> 32] + [
            zlib.crc32(str(p).encode()) for p in self.path
        ]
        self.generator = np.random.Generator(np.random.Philox(np.random.SeedSequence(words)))

    def split(self, purpose) -> "Rng":
        return Rng(self.seed, self.path + (purpose,))

    def __getattr__(self, name):
        return getattr(self.generator, name)

    def __repr__(self):
        return f"Rng(seed={self.seed}, path={self.path})"


def as_rng(rng) -> Rng:
    if isinstance(rng, Rng):
        return rng
    if rng is None:
        return Rng(int(os.environ.get("DTF_SEED", "0")))
    return Rng(int(rng))


# --- domain types ------------------------------------------------------------


@dataclass(frozen=True)
class LabeledSeries:
    """A (N, D) series with an optional noise-free signal and change labels."""

    values: np.ndarray
    target_dim: int = 0
    clean: np.ndarray | None = None
    abrupt_indices: tuple = ()
    name: str = "series"
    label_kinds: tuple = ()

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise DataError(f"values must be a non-empty (N, D) matrix, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise NonFiniteInput("series contains NaN or Inf")
        if not 0 <= self.target_dim < values.shape[1]:
            raise DataError(f"target_dim {self.target_dim} out of range for D={values.shape[1]}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if self.clean is not None:
            clean = np.asarray(self.clean, dtype=np.float64).copy()
            if clean.shape != (values.shape[0],):
                raise LengthMismatch(f"clean has shape {clean.shape}, expected ({values.shape[0]},)")
            if not np.all(np.isfinite(clean)):
                raise NonFiniteInput("clean signal contains NaN or Inf")
            clean.setflags(write=False)
            object.__setattr__(self, "clean", clean)
        idx = tuple(int(i) for i in self.abrupt_indices)
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise DataError("abrupt_indices must be strictly increasing")
        if idx and (idx[0] < 0 or idx[-1] >= values.shape[0]):
            raise DataError("abrupt_indices out of range")
        object.__setattr__(self, "abrupt_indices", idx)
        object.__setattr__(self, "label_kinds", tuple(self.label_kinds))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def target(self) -> np.ndarray:
        return self.values[:, self.target_dim]

    def head(self, n: int) -> "LabeledSeries":
        """First ``n`` rows, labels and clean signal cut accordingly."""
        keep = [(i, k) for i, k in zip(self.abrupt_indices, self.label_kinds or [""] * len(self.abrupt_indices)) if i < n]
        return LabeledSeries(
            self.values[:n],
            self.target_dim,
            None if self.clean is None else self.clean[:n],
            tuple(i for i, _ in keep),
            self.name,
            tuple(k for _, k in keep) if self.label_kinds else (),
        )


def as_actions(actions, length: int | None = None) -> np.ndarray:
    """Validate a 0/1 action trace and return it as an int64 array."""
    arr = np.asarray(actions)
    if arr.ndim != 1:
        raise DataError("action trace must be one-dimensional")
    if arr.size and not np.all((arr == 0) | (arr == 1)):
        raise DataError("action trace may only contain 0 and 1")
    if length is not None and arr.size != length:
        raise LengthMismatch(f"action trace has length {arr.size}, expected {length}")
    return arr.astype(np.int64)


def as_trend(values, length: int | None = None) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise DataError("trend must be one-dimensional")
    if length is not None and arr.size != length:
        raise LengthMismatch(f"trend has length {arr.size}, expected {length}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInput("trend contains NaN or Inf")
    return arr


# --- configuration -----------------------------------------------------------

AGENTS = ("PPO", "DQN", "A2C")
REWARD_MODES = ("random_interval", "equal_interval")


@dataclass
class RunConfig:
    """Every hyperparameter of a run; field names double as config-file keys."""

    h: int = 16
    p: int = 4
    H: int = 200
    reward_ratio: float = 0.4
    reward_mode: str = "random_interval"
    d_model: int = 4
    rl_steps: int = 10000
    episodes_max: int = 10
    learning_rate_agent: float = 5e-4
    learning_rate_forecaster: float = 1e-3
    forecaster_epochs: int = 15
    seed: int = 2023
    agent: str = "PPO"
    gamma: float = 0.95
    hidden: int = 64
    batch_size: int = 32

    def __post_init__(self):
        self.agent = str(self.agent).upper()
        self.validate()

    def validate(self):
        if self.h < 1 or self.p < 1:
            raise ConfigError("h and p must be positive")
        if self.H < self.h + self.p:
            raise ConfigError(f"H={self.H} must be at least h + p = {self.h + self.p}")
        if not 0 < self.reward_ratio <= 1:
            raise ConfigError("reward_ratio must lie in (0, 1]")
        if self.reward_mode not in REWARD_MODES:
            raise ConfigError(f"reward_mode must be one of {REWARD_MODES}")
        if self.agent not in AGENTS:
            raise ConfigError(f"agent must be one of {AGENTS}")
        if not 0 < self.gamma <= 1:
            raise ConfigError("gamma must lie in (0, 1]")
        if self.d_model < 2 or self.d_model % 2:
            raise ConfigError("d_model must be an even integer >= 2")
        if self.rl_steps < 0 or self.episodes_max < 1 or self.forecaster_epochs < 0:
            raise ConfigError("rl_steps, episodes_max and forecaster_epochs must be non-negative")
        if self.hidden < 1 or self.batch_size < 1:
            raise ConfigError("hidden and batch_size must be positive")

    @property
    def window(self) -> int:
        return self.h + self.p

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def to_text(self) -> str:
        return "".join(f"{f.name}={getattr(self, f.name)}\n" for f in dataclasses.fields(self))

    @classmethod
    def from_mapping(cls, items: Mapping[str, object]) -> "RunConfig":
        types = {f.name: f.type for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, raw in items.items():
            if key not in types:
                raise ConfigError(f"unknown config key {key!r}")
            kind = types[key]
            try:
                if kind == "int":
                    kwargs[key] = int(float(raw)) if isinstance(raw, str) and "e" in raw.lower() else int(raw)
                elif kind == "float":
                    kwargs[key] = float(raw)
                else:
                    kwargs[key] = str(raw)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {key}: {raw!r}") from exc
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path, **overrides) -> "RunConfig":
        items = {}
        text = Path(path).read_text(encoding="utf-8")
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            items[key] = value
        items.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_mapping(items)


# --- file I/O -----------------------------------------------------------------


def atomic_write_text(path, text: str) -> None:
    """Write ``text`` to a temporary sibling and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_csv(path, target_column: str, columns: Sequence[str] | None = None) -> LabeledSeries:
    """Read a comma-separated file with a header row into a LabeledSeries.

    Every column except an optional leading time column is parsed as a float.
    Column ``time``/``t``/``date``/``timestamp`` values are carried but not used.
    Row numbers in errors are 1-based data rows (the header is row 0).
    """
    path = Path(path)
    with path.open(encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or not any(cell.strip() for cell in rows[0]):
        raise EmptyFile(f"{path}: file is empty")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if any(cell.strip() for cell in r)]
    if not body:
        raise EmptyFile(f"{path}: header present but no data rows")
    if target_column not in header:
        raise MissingColumn(target_column, header)
    if columns is None:
        skip = {"t", "time", "date", "timestamp"}
        columns = [h for h in header if h.lower() not in skip or h == target_column]
    for col in columns:
        if col not in header:
            raise MissingColumn(col, header)
    index = [header.index(c) for c in columns]
    data = np.empty((len(body), len(columns)))
    for r, row in enumerate(body, 1):
        for j, (c, col) in enumerate(zip(index, columns)):
            text = row[c].strip() if c < len(row) else ""
            try:
                data[r - 1, j] = float(text)
            except ValueError:
                raise NonNumericCell(r, col, text) from None
            if not math.isfinite(data[r - 1, j]):
                raise NonNumericCell(r, col, text)
    return LabeledSeries(data, target_dim=list(columns).index(target_column), name=path.stem)


def write_csv(path, columns: Mapping[str, Iterable]) -> None:
    names = list(columns)
    cols = [list(v) for v in columns.values()]
    n = len(cols[0]) if cols else 0
    if any(len(c) != n for c in cols):
        raise LengthMismatch("all CSV columns must have the same length")
    lines = [",".join(names)]
    for i in range(n):
        lines.append(",".join(_fmt(c[i]) for c in cols))
    atomic_write_text(path, "\n".join(lines) + "\n")


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def save_trend_json(trend, actions, metrics: Mapping[str, float], path) -> None:
    trend = as_trend(trend)
    actions = as_actions(actions)
    if trend.size != actions.size:
        raise LengthMismatch(f"trend length {trend.size} != actions length {actions.size}")
    doc = {
        "trend": [float(v) for v in trend],
        "actions": [int(a) for a in actions],
        "metrics": {str(k): float(v) for k, v in metrics.items()},
    }
    # json uses repr() for floats: shortest string that round-trips exactly
    atomic_write_text(path, json.dumps(doc, indent=1) + "\n")


def load_trend_json(path):
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return np.asarray(doc["trend"], dtype=np.float64), as_actions(doc["actions"]), dict(doc["metrics"])
