"""Sliding-window construction over multivariate series and the
reconstruction-based anomaly score.

A series of T rows and d dimensions becomes T windows of K rows each,
flattened row-major to length K*d. The window at time t covers rows
[t-K+1, t]; positions before the start of the series replicate row 0, so
every timestep owns a window and the window's last d entries are always
exactly row t.

The anomaly score of a window is the Euclidean distance between its
final time-step slice and that of its reconstruction, where the
reconstruction is the endpoint of a generation run started (by default)
from the window itself.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError, DataError
from .gon import GenerationConfig, generate_batch, generate_sample, sample_noise
from .neural import Discriminator

RECON_INIT_INPUT = "input"
RECON_INIT_NOISE = "noise"


@dataclass
class TimeSeries:
    """A T x d series with named dimensions and optional boolean labels."""

    values: np.ndarray
    dim_names: list[str]
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise DataError("series values must be a 2-d array (time x dims)")
        if not np.all(np.isfinite(self.values)):
            raise DataError("series contains non-finite values")
        if len(self.dim_names) != self.values.shape[1]:
            raise DataError(
                f"{len(self.dim_names)} dim names for {self.values.shape[1]} columns"
            )
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=bool)
            if self.labels.shape != (self.values.shape[0],):
                raise DataError("labels length must equal the number of timesteps")

    @property
    def n_timesteps(self) -> int:
        return self.values.shape[0]

    @property
    def n_dims(self) -> int:
        return self.values.shape[1]


@dataclass
class WindowedSeries:
    window_len: int
    n_dims: int
    windows: np.ndarray  # shape (T, window_len * n_dims)

    @property
    def n_windows(self) -> int:
        return self.windows.shape[0]


def make_windows(values, K: int) -> WindowedSeries:
    """One flattened window per timestep, replication-padded at the start."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2 or values.shape[0] == 0:
        raise DataError("need a non-empty 2-d value array")
    if K < 1:
        raise ConfigError(f"window length must be >= 1, got {K}")
    T, d = values.shape
    # row index of window element j at time t is t - K + 1 + j, floored at 0
    idx = np.arange(T)[:, None] + (np.arange(K) - K + 1)[None, :]
    np.maximum(idx, 0, out=idx)
    windows = values[idx].reshape(T, K * d)
    return WindowedSeries(K, d, np.ascontiguousarray(windows))


def anomaly_score(x_t, x_hat, K: int, d: int) -> float:
    """Euclidean norm of the difference restricted to the final time-step
    slice (the last d entries); earlier rows of the window are ignored."""
    x_t = np.asarray(x_t, dtype=np.float64)
    x_hat = np.asarray(x_hat, dtype=np.float64)
    if x_t.shape != (K * d,) or x_hat.shape != (K * d,):
        raise ConfigError(
            f"score inputs must both have length K*d = {K * d}, "
            f"got {x_t.shape} and {x_hat.shape}"
        )
    diff = x_t[-d:] - x_hat[-d:]
    return float(np.sqrt(np.dot(diff, diff)))


def anomaly_scores_batch(X, X_hat, K: int, d: int) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    X_hat = np.asarray(X_hat, dtype=np.float64)
    if X.shape != X_hat.shape or X.ndim != 2 or X.shape[1] != K * d:
        raise ConfigError("score batches must share shape (n, K*d)")
    diff = X[:, -d:] - X_hat[:, -d:]
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


def reconstruct(
    disc: Discriminator,
    x_t,
    gen_config: GenerationConfig,
    rng: Optional[np.random.Generator] = None,
    init: str = RECON_INIT_INPUT,
) -> np.ndarray:
    """Reconstruction of one window: the generation endpoint starting from
    the window itself (default) or from fresh noise."""
    x_t = np.asarray(x_t, dtype=np.float64)
    if init == RECON_INIT_INPUT:
        z0 = x_t
    elif init == RECON_INIT_NOISE:
        if rng is None:
            rng = np.random.default_rng()
        z0 = sample_noise(rng, x_t.shape, gen_config.noise_init)
    else:
        raise ConfigError(f"unknown reconstruction init {init!r}")
    return generate_sample(disc, z0, gen_config, rng).z_star


def reconstruct_batch(
    disc: Discriminator,
    X,
    gen_config: GenerationConfig,
    rng: Optional[np.random.Generator] = None,
    init: str = RECON_INIT_INPUT,
) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=np.float64)
    if init == RECON_INIT_INPUT:
        Z0 = X
    elif init == RECON_INIT_NOISE:
        if rng is None:
            rng = np.random.default_rng()
        Z0 = sample_noise(rng, X.shape, gen_config.noise_init)
    else:
        raise ConfigError(f"unknown reconstruction init {init!r}")
    Z_star, _, _ = generate_batch(disc, Z0, gen_config, rng)
    return Z_star


@dataclass
class MinMaxScaler:
    """Per-dimension min-max map to [0, 1], fitted on the training split
    only. Constant dimensions map to 0."""

    lo: np.ndarray
    hi: np.ndarray

    @classmethod
    def fit(cls, values: np.ndarray) -> "MinMaxScaler":
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] == 0:
            raise DataError("scaler needs a non-empty 2-d array")
        return cls(values.min(axis=0), values.max(axis=0))

    @property
    def _span(self) -> np.ndarray:
        span = self.hi - self.lo
        return np.where(span > 0.0, span, 1.0)

    def transform(self, values: np.ndarray) -> np.ndarray:
        return (np.asarray(values, dtype=np.float64) - self.lo) / self._span

    def inverse_transform(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values, dtype=np.float64) * self._span + self.lo
