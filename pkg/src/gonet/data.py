"""Dataset ingestion and synthetic sources.

CSV is the single ingestion format: a header row naming the dimensions,
comma-separated decimal floats, and an optional trailing ``label`` column
of 0/1 (UTF-8, LF line endings).

Two generators cover the desk-scale experiments: an unordered
two-dimensional Gaussian sampler (Box-Muller plus a Cholesky transform)
and a fault-injected multivariate trace where fault episodes of several
types start after Poisson-distributed quiet gaps and carry ground-truth
labels.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, IoError
from .windows import TimeSeries

LABEL_COLUMN = "label"

BASE_SINUSOID_MIX = "sinusoid_mix"
BASE_RANDOM_WALK = "random_walk"

GAP_END_TO_START = "end_to_start"
GAP_START_TO_START = "start_to_start"


def load_csv(path, has_labels: bool = False) -> TimeSeries:
    """Read a series; the header row gives dim names. With ``has_labels``
    the final column must be named ``label`` and hold only 0/1."""
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if has_labels:
            if not header or header[-1] != LABEL_COLUMN:
                raise DataError(
                    f"{path}: expected a trailing '{LABEL_COLUMN}' column, "
                    f"header is {header}"
                )
            dim_names = header[:-1]
        else:
            dim_names = list(header)
        if not dim_names:
            raise DataError(f"{path}: no value columns")

        rows = []
        labels = []
        n_cols = len(header)
        for i, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != n_cols:
                raise DataError(
                    f"{path}: row {i} has {len(row)} cells, expected {n_cols}"
                )
            vals = []
            for j, cell in enumerate(row[: len(dim_names)]):
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise DataError(
                        f"{path}: row {i}, column {j + 1} ({header[j]}): "
                        f"non-numeric cell {cell!r}"
                    ) from None
            rows.append(vals)
            if has_labels:
                cell = row[-1].strip()
                if cell not in ("0", "1"):
                    raise DataError(
                        f"{path}: row {i}: label must be 0 or 1, got {cell!r}"
                    )
                labels.append(cell == "1")

    if not rows:
        raise DataError(f"{path}: no data rows")
    values = np.asarray(rows, dtype=np.float64)
    return TimeSeries(values, dim_names, np.asarray(labels, bool) if has_labels else None)


def save_csv(series: TimeSeries, path) -> None:
    try:
        fh = open(path, "w", encoding="utf-8", newline="\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    with fh:
        header = list(series.dim_names)
        if series.labels is not None:
            header.append(LABEL_COLUMN)
        fh.write(",".join(header) + "\n")
        for i in range(series.n_timesteps):
            cells = [repr(v) for v in series.values[i]]
            if series.labels is not None:
                cells.append("1" if series.labels[i] else "0")
            fh.write(",".join(cells) + "\n")


@dataclass(frozen=True)
class GaussianConfig:
    n_samples: int = 1000
    mean: tuple[float, float] = (0.0, 0.0)
    covariance: tuple[tuple[float, float], tuple[float, float]] = ((1.0, 0.0), (0.0, 1.0))
    seed: int = 0

    def __post_init__(self):
        if self.n_samples < 1:
            raise ConfigError("n_samples must be >= 1")


def synth_gaussian(config: GaussianConfig) -> TimeSeries:
    """n two-dimensional Gaussian samples, treated as an unordered set.

    Standard normals come from the Box-Muller transform (one (u1, u2)
    pair yields one 2-d point) and correlation from the Cholesky factor
    of the covariance.
    """
    cov = np.asarray(config.covariance, dtype=np.float64)
    if cov.shape != (2, 2) or not np.allclose(cov, cov.T, atol=1e-12):
        raise DataError(f"covariance must be a symmetric 2x2 matrix, got {cov}")
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise DataError(f"covariance is not positive-definite: {cov.tolist()}") from None

    rng = np.random.default_rng(config.seed)
    u1 = 1.0 - rng.random(config.n_samples)  # (0, 1]: keeps the log finite
    u2 = rng.random(config.n_samples)
    r = np.sqrt(-2.0 * np.log(u1))
    z = np.column_stack([r * np.cos(2.0 * np.pi * u2), r * np.sin(2.0 * np.pi * u2)])
    samples = np.asarray(config.mean, dtype=np.float64) + z @ chol.T
    return TimeSeries(samples, ["x", "y"])


@dataclass(frozen=True)
class FaultSpec:
    """One fault type: a perturbation template plus a duration range."""

    name: str
    kind: str  # level_shift | noise_burst | ramp | spike_train
    magnitude: float
    duration_range: tuple[int, int]

    def __post_init__(self):
        lo, hi = self.duration_range
        if lo < 1 or hi < lo:
            raise ConfigError(f"bad duration range {self.duration_range}")


# magnitudes exceed the base signal's full swing so that every fault row
# saturates clear of the normal band, like a hogged resource pinning at max
DEFAULT_FAULTS: tuple[FaultSpec, ...] = (
    FaultSpec("cpu_overload", "level_shift", 5.0, (2, 4)),
    FaultSpec("ram_contention", "noise_burst", 4.5, (2, 4)),
    FaultSpec("disk_attack", "ramp", 5.0, (2, 4)),
    FaultSpec("ddos_attack", "spike_train", 5.0, (2, 4)),
)


@dataclass(frozen=True)
class SynthFaultConfig:
    n_timesteps: int = 5000
    n_dims: int = 3
    base_signal: str = BASE_SINUSOID_MIX
    fault_types: tuple[FaultSpec, ...] = DEFAULT_FAULTS
    interarrival_mean: float = 5.0
    gap_semantics: str = GAP_END_TO_START
    seed: int = 0

    def __post_init__(self):
        if self.n_timesteps < self.interarrival_mean:
            raise ConfigError("n_timesteps must be at least the mean quiet gap")
        if self.n_dims < 1:
            raise ConfigError("n_dims must be >= 1")
        if self.base_signal not in (BASE_SINUSOID_MIX, BASE_RANDOM_WALK):
            raise ConfigError(f"unknown base signal {self.base_signal!r}")
        if not self.fault_types:
            raise ConfigError("at least one fault type must be enabled")
        if self.gap_semantics not in (GAP_END_TO_START, GAP_START_TO_START):
            raise ConfigError(f"unknown gap semantics {self.gap_semantics!r}")


def _base_signal(config: SynthFaultConfig, rng: np.random.Generator) -> np.ndarray:
    n, d = config.n_timesteps, config.n_dims
    t = np.arange(n)[:, None]
    if config.base_signal == BASE_SINUSOID_MIX:
        f1 = rng.uniform(1 / 200, 1 / 40, d)
        f2 = rng.uniform(1 / 40, 1 / 15, d)
        ph1 = rng.uniform(0, 2 * np.pi, d)
        ph2 = rng.uniform(0, 2 * np.pi, d)
        sig = np.sin(2 * np.pi * f1 * t + ph1) + 0.5 * np.sin(2 * np.pi * f2 * t + ph2)
        sig += rng.normal(0.0, 0.05, (n, d))
        return sig
    return np.cumsum(rng.normal(0.0, 0.05, (n, d)), axis=0)


def _apply_fault(values: np.ndarray, spec: FaultSpec, start: int, stop: int,
                 rng: np.random.Generator) -> None:
    # every labeled row must be displaced in value, otherwise the label
    # and the signal disagree and no pointwise detector can match them
    seg = values[start:stop]
    m = spec.magnitude
    if spec.kind == "level_shift":
        seg += m
    elif spec.kind == "noise_burst":
        # upward bursts with a magnitude floor: contention only raises usage
        seg += rng.uniform(0.7 * m, m, seg.shape)
    elif spec.kind == "ramp":
        # saturation ramp: already elevated at onset, climbing to full
        seg += np.linspace(0.7 * m, m, seg.shape[0])[:, None]
    elif spec.kind == "spike_train":
        # sawtooth of full and partial spikes
        seg += 0.7 * m
        seg[::2] += 0.3 * m
    else:
        raise ConfigError(f"unknown fault kind {spec.kind!r}")


def synth_faults(config: SynthFaultConfig) -> TimeSeries:
    """Base signal with labeled fault episodes injected.

    Quiet gaps between the end of one fault and the start of the next
    (or start-to-start, per ``gap_semantics``) are i.i.d. Poisson with
    the configured mean; the fault type is uniform over the enabled set
    and its duration uniform over that type's range. Values are
    renormalized to [0, 1] per dimension at the end.
    """
    rng = np.random.default_rng(config.seed)
    values = _base_signal(config, rng)
    n = config.n_timesteps
    labels = np.zeros(n, dtype=bool)

    t = int(rng.poisson(config.interarrival_mean))
    while t < n:
        spec = config.fault_types[int(rng.integers(len(config.fault_types)))]
        lo, hi = spec.duration_range
        duration = int(rng.integers(lo, hi + 1))
        stop = min(t + duration, n)
        _apply_fault(values, spec, t, stop, rng)
        labels[t:stop] = True
        gap = int(rng.poisson(config.interarrival_mean))
        if config.gap_semantics == GAP_END_TO_START:
            t = stop + gap
        else:
            # start-to-start reading: next start measured from this start,
            # never before the current fault ends
            t = max(t + gap, stop)

    lo = values.min(axis=0)
    hi = values.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    values = (values - lo) / span
    names = [f"m{j}" for j in range(config.n_dims)]
    return TimeSeries(values, names, labels)
