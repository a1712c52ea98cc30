"""Automatic anomaly thresholding via Peaks-Over-Threshold.

An initial threshold t is placed at an empirical quantile of the score
series so that a small fraction (``init_level``) of scores exceed it.
The excesses over t are fitted with a Generalized Pareto distribution --
maximum likelihood through Grimshaw's root-finding reduction, with a
method-of-moments fallback when the root search finds nothing -- and the
final threshold is the extrapolated quantile at risk level q:

    z_q = t + (sigma/xi) * ((q*n/N_t)^(-xi) - 1)        (xi != 0)
    z_q = t + sigma * log(N_t / (q*n))                  (xi -> 0)

Scores strictly above z_q are labeled anomalous. The fit is static (one
pass over the full score series) and fully deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigError, DataError

FIT_GRIMSHAW = "grimshaw-ml"
FIT_MOMENTS = "moments"

_XI_ZERO_TOL = 1e-9


@dataclass(frozen=True)
class PotConfig:
    risk: float = 1e-4
    init_level: float = 0.02  # fraction of scores above the initial threshold

    def __post_init__(self):
        if not 0.0 < self.risk < 1.0:
            raise ConfigError(f"risk must be in (0, 1), got {self.risk}")
        if not 0.0 < self.init_level < 1.0:
            raise ConfigError(f"init_level must be in (0, 1), got {self.init_level}")


@dataclass
class GpdFit:
    shape: float
    scale: float
    log_likelihood: float
    method: str


@dataclass
class PotModel:
    init_threshold: float
    peaks: np.ndarray
    gpd_shape: float
    gpd_scale: float
    risk: float
    n_total: int
    n_peaks: int
    final_threshold: float
    fit_method: str


def _gpd_log_likelihood(y: np.ndarray, xi: float, sigma: float) -> float:
    if sigma <= 0.0 or not math.isfinite(sigma) or not math.isfinite(xi):
        return -np.inf
    n = y.size
    if abs(xi) < _XI_ZERO_TOL:
        return -n * math.log(sigma) - float(np.sum(y)) / sigma
    w = 1.0 + xi * y / sigma
    if np.any(w <= 0.0):
        return -np.inf
    return -n * math.log(sigma) - (1.0 + 1.0 / xi) * float(np.sum(np.log(w)))


def _grimshaw_w(y: np.ndarray, t: float) -> float:
    s = 1.0 + t * y
    u = 1.0 + float(np.mean(np.log(s)))
    v = float(np.mean(1.0 / s))
    return u * v - 1.0


def _scan_roots(y: np.ndarray, lo: float, hi: float, n_grid: int = 64) -> list[float]:
    if not lo < hi:
        return []
    xs = np.linspace(lo, hi, n_grid)
    ws = np.array([_grimshaw_w(y, x) for x in xs])
    roots = []
    for i in range(n_grid - 1):
        if ws[i] == 0.0:
            roots.append(float(xs[i]))
        elif ws[i] * ws[i + 1] < 0.0:
            roots.append(float(brentq(lambda t: _grimshaw_w(y, t), xs[i], xs[i + 1])))
    if ws[-1] == 0.0:
        roots.append(float(xs[-1]))
    return roots


def _moments_fit(y: np.ndarray) -> GpdFit:
    mean = float(np.mean(y))
    var = float(np.var(y))
    if var <= 0.0:
        xi = 0.5
    else:
        xi = 0.5 * (1.0 - mean * mean / var)
    sigma = mean * (1.0 - xi)
    return GpdFit(xi, sigma, _gpd_log_likelihood(y, xi, sigma), FIT_MOMENTS)


def gpd_fit(excesses) -> GpdFit:
    """Fit GPD shape/scale to positive excesses. Grimshaw's procedure
    searches the two bounded intervals that can contain likelihood roots;
    an empty search falls back to the method of moments."""
    y = np.asarray(excesses, dtype=np.float64)
    if y.ndim != 1 or y.size < 2:
        raise DataError("need at least 2 excesses to fit a tail")
    if np.any(y <= 0.0):
        raise DataError("excesses must be strictly positive")

    y_min = float(y.min())
    y_max = float(y.max())
    y_mean = float(np.mean(y))

    eps = 1e-8
    a = -1.0 / y_max
    if abs(a) < 2.0 * eps:
        eps = abs(a) / 64.0
    b = 2.0 * (y_mean - y_min) / (y_mean * y_min)
    c = 2.0 * (y_mean - y_min) / (y_min * y_min)

    roots = _scan_roots(y, a + eps, -eps) + _scan_roots(y, b, c)
    if not roots:
        return _moments_fit(y)

    # xi = 0 (exponential tail) is always an admissible candidate
    best = GpdFit(0.0, y_mean, _gpd_log_likelihood(y, 0.0, y_mean), FIT_GRIMSHAW)
    for t in roots:
        xi = float(np.mean(np.log(1.0 + t * y)))
        if xi == 0.0:
            continue
        sigma = xi / t
        ll = _gpd_log_likelihood(y, xi, sigma)
        if ll > best.log_likelihood:
            best = GpdFit(xi, sigma, ll, FIT_GRIMSHAW)
    return best


def _extrapolated_threshold(t: float, xi: float, sigma: float, risk: float,
                            n_total: int, n_peaks: int) -> float:
    r = risk * n_total / n_peaks
    if abs(xi) < _XI_ZERO_TOL:
        return t - sigma * math.log(r)
    return t + (sigma / xi) * (r ** (-xi) - 1.0)


def fit_pot(scores, config: PotConfig) -> PotModel:
    """Calibrate the POT model on a score series.

    The initial threshold is the empirical (1 - init_level) quantile, so
    about init_level of the scores become peaks.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 1 or scores.size < 30:
        raise DataError(f"POT needs at least 30 scores, got {scores.size}")
    if not np.all(np.isfinite(scores)):
        raise DataError("scores contain non-finite values")
    if float(scores.min()) == float(scores.max()):
        raise DataError("degenerate score series: all values equal")

    t = float(np.quantile(scores, 1.0 - config.init_level))
    peaks = scores[scores > t] - t
    if peaks.size < 2:
        raise DataError(
            f"only {peaks.size} scores exceed the initial threshold {t:.6g}; "
            "adjust init_level so that more scores fall above it"
        )

    fit = gpd_fit(peaks)
    z_q = _extrapolated_threshold(
        t, fit.shape, fit.scale, config.risk, scores.size, peaks.size
    )
    return PotModel(
        init_threshold=t,
        peaks=peaks,
        gpd_shape=fit.shape,
        gpd_scale=fit.scale,
        risk=config.risk,
        n_total=scores.size,
        n_peaks=peaks.size,
        final_threshold=z_q,
        fit_method=fit.method,
    )


def label(scores, model: PotModel) -> np.ndarray:
    """Boolean anomaly labels: strictly above the final threshold."""
    scores = np.asarray(scores, dtype=np.float64)
    return scores > model.final_threshold
