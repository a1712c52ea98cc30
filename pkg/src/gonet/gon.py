"""Sample generation by gradient ascent in input space, and the
single-network adversarial training loop built on it.

Generation starts from a noise vector z and repeatedly applies an Adam
step on log D(z), so the iterate climbs toward a local mode of the
learned score surface. Training alternates that generation step with one
parameter update that pushes D(real) up and D(generated) down, using the
minibatch objective

    (1/m) * sum_i [ log D(x_i) + log(1 - D(z*_i)) ].
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import backend, neural
from .errors import ConfigError, DataError
from .neural import Discriminator
from .optim import AdamState, LrSchedule, adam_step, cosine_lr

MODE_FIXED = "fixed"
MODE_STOCHASTIC = "stochastic"
NOISE_UNIFORM = "uniform"
NOISE_NORMAL = "normal"

_STOP_CODES = {MODE_FIXED: backend.STOP_FIXED, MODE_STOCHASTIC: backend.STOP_STOCHASTIC}


@dataclass(frozen=True)
class GenerationConfig:
    """Controls one ascent run.

    gamma is the Adam learning rate of the ascent. The run stops at
    max_iters, when |delta log D| per step falls below convergence_tol
    (fixed mode), or -- in stochastic mode -- after any step with
    probability D(z). clip_bounds, when set, projects the iterate (and
    the start point) into [lo, hi] elementwise after every step.
    """

    gamma: float = 0.01
    max_iters: int = 100
    convergence_tol: float = 1e-6
    clip_bounds: Optional[tuple[float, float]] = None
    mode: str = MODE_FIXED
    noise_init: str = NOISE_UNIFORM

    def __post_init__(self):
        if self.gamma <= 0:
            raise ConfigError(f"gamma must be > 0, got {self.gamma}")
        if self.max_iters < 1:
            raise ConfigError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.convergence_tol < 0:
            raise ConfigError("convergence_tol must be >= 0")
        if self.clip_bounds is not None:
            lo, hi = self.clip_bounds
            if not lo < hi:
                raise ConfigError(f"clip bounds need lo < hi, got [{lo}, {hi}]")
        if self.mode not in _STOP_CODES:
            raise ConfigError(f"unknown generation mode {self.mode!r}")
        if self.noise_init not in (NOISE_UNIFORM, NOISE_NORMAL):
            raise ConfigError(f"unknown noise_init {self.noise_init!r}")


@dataclass
class GenerationResult:
    z_star: np.ndarray
    final_score: float
    iters_used: int
    trajectory_log_d: np.ndarray


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 64
    epochs: int = 10
    lr_schedule: LrSchedule = field(default_factory=LrSchedule)
    gen_config: GenerationConfig = field(default_factory=GenerationConfig)
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")


@dataclass
class EpochStats:
    epoch: int
    objective: float
    mean_d_real: float
    mean_d_fake: float
    lr: float
    seconds: float
    n_updates: int


def sample_noise(rng: np.random.Generator, shape, kind: str = NOISE_UNIFORM) -> np.ndarray:
    if kind == NOISE_UNIFORM:
        return rng.random(shape)
    if kind == NOISE_NORMAL:
        return rng.normal(0.0, 1.0, shape)
    raise ConfigError(f"unknown noise_init {kind!r}")


def _clip_args(config: GenerationConfig) -> tuple[float, float, int]:
    if config.clip_bounds is None:
        return 0.0, 0.0, 0
    lo, hi = config.clip_bounds
    return float(lo), float(hi), 1


def generate_sample(
    disc: Discriminator,
    z0,
    config: GenerationConfig,
    rng: Optional[np.random.Generator] = None,
) -> GenerationResult:
    """Run the ascent from z0 and return the best iterate seen, so the
    final score never falls below D at the start point. In fixed mode the
    result is a pure function of (disc, z0, config); stochastic mode
    draws its stop decisions from rng."""
    z0 = np.asarray(z0, dtype=np.float64)
    if z0.ndim != 1 or z0.size != disc.input_dim:
        raise ConfigError(
            f"z0 length {z0.size if z0.ndim == 1 else z0.shape} does not match "
            f"input dim {disc.input_dim}"
        )
    stop_mode = _STOP_CODES[config.mode]
    if stop_mode == backend.STOP_STOCHASTIC:
        if rng is None:
            rng = np.random.default_rng()
        stop_u = rng.random(config.max_iters)
    else:
        stop_u = np.empty(0)
    lo, hi, use_clip = _clip_args(config)
    z_best, p_best, iters, traj = backend.kernels().ascend(
        disc.theta,
        disc.sizes_arr,
        z0.copy(),
        disc.act_code,
        disc.act_param,
        float(config.gamma),
        int(config.max_iters),
        float(config.convergence_tol),
        lo,
        hi,
        use_clip,
        stop_mode,
        stop_u,
    )
    return GenerationResult(z_best, float(p_best), int(iters), traj)


def generate_batch(
    disc: Discriminator,
    Z0: np.ndarray,
    config: GenerationConfig,
    rng: Optional[np.random.Generator] = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Row-wise generation; returns (Z_star, scores, iters_used)."""
    Z0 = np.ascontiguousarray(Z0, dtype=np.float64)
    if Z0.ndim != 2 or Z0.shape[1] != disc.input_dim:
        raise ConfigError(f"start batch shape {Z0.shape} does not match input dim")
    stop_mode = _STOP_CODES[config.mode]
    if stop_mode == backend.STOP_STOCHASTIC:
        if rng is None:
            rng = np.random.default_rng()
        stop_u = rng.random((Z0.shape[0], config.max_iters))
    else:
        stop_u = np.empty((Z0.shape[0], 0))
    lo, hi, use_clip = _clip_args(config)
    return backend.kernels().ascend_batch(
        disc.theta,
        disc.sizes_arr,
        Z0,
        disc.act_code,
        disc.act_param,
        float(config.gamma),
        int(config.max_iters),
        float(config.convergence_tol),
        lo,
        hi,
        use_clip,
        stop_mode,
        stop_u,
    )


def discriminator_objective(disc: Discriminator, real_batch, fake_batch) -> float:
    """Mean of log D(real) + log(1 - D(fake)) over a paired batch, with
    the probability clamp keeping every term finite."""
    real = np.ascontiguousarray(real_batch, dtype=np.float64)
    fake = np.ascontiguousarray(fake_batch, dtype=np.float64)
    if real.ndim != 2 or fake.ndim != 2 or real.shape[0] == 0:
        raise DataError("objective needs non-empty 2-d batches")
    if real.shape[0] != fake.shape[0]:
        raise DataError(
            f"real and fake batches must have equal size, got {real.shape[0]} "
            f"and {fake.shape[0]}"
        )
    p_real = neural.forward_batch(disc, real)
    p_fake = neural.forward_batch(disc, fake)
    return float(np.mean(np.log(p_real) + np.log(1.0 - p_fake)))


def train_epoch(
    disc: Discriminator,
    dataset: np.ndarray,
    config: TrainConfig,
    epoch_index: int,
    rng: np.random.Generator,
    adam_state: Optional[AdamState] = None,
) -> EpochStats:
    """One pass over the dataset: per minibatch, generate one fake sample
    per noise draw, then take a single Adam ascent step on the objective.
    Real rows are visited without replacement within the epoch. Pass a
    persistent adam_state to keep optimizer momentum across epochs."""
    dataset = np.ascontiguousarray(dataset, dtype=np.float64)
    if dataset.ndim != 2 or dataset.shape[0] == 0:
        raise DataError("training dataset must be a non-empty 2-d array of rows")
    if dataset.shape[1] != disc.input_dim:
        raise ConfigError(
            f"dataset row length {dataset.shape[1]} does not match input dim "
            f"{disc.input_dim}"
        )
    if adam_state is None:
        adam_state = AdamState.for_vars(disc.theta)

    n = dataset.shape[0]
    m = config.batch_size
    gen = config.gen_config
    lr = cosine_lr(config.lr_schedule, epoch_index)
    wd = config.lr_schedule.weight_decay

    start = time.perf_counter()
    perm = rng.permutation(n)
    total_obj = 0.0
    total_pr = 0.0
    total_pf = 0.0
    n_updates = 0
    seen = 0
    for lo_idx in range(0, n, m):
        idx = perm[lo_idx : lo_idx + m]
        real = np.ascontiguousarray(dataset[idx])
        mb = real.shape[0]
        z0 = sample_noise(rng, (mb, disc.input_dim), gen.noise_init)
        fake, _, _ = generate_batch(disc, z0, gen, rng)
        grad, obj, mean_pr, mean_pf = backend.kernels().objective_grad_batch(
            disc.theta, disc.sizes_arr, real, fake, disc.act_code, disc.act_param
        )
        adam_step(adam_state, disc.theta, grad, lr=lr, weight_decay=wd, maximize=True)
        total_obj += obj * mb
        total_pr += mean_pr * mb
        total_pf += mean_pf * mb
        n_updates += 1
        seen += mb
    return EpochStats(
        epoch=epoch_index,
        objective=total_obj / seen,
        mean_d_real=total_pr / seen,
        mean_d_fake=total_pf / seen,
        lr=lr,
        seconds=time.perf_counter() - start,
        n_updates=n_updates,
    )


def train(
    disc: Discriminator,
    dataset: np.ndarray,
    config: TrainConfig,
    rng: Optional[np.random.Generator] = None,
) -> list[EpochStats]:
    """Full training run with persistent Adam state. Deterministic per
    config.seed when rng is not supplied."""
    if rng is None:
        rng = np.random.default_rng(config.seed)
    adam_state = AdamState.for_vars(disc.theta)
    return [
        train_epoch(disc, dataset, config, epoch, rng, adam_state)
        for epoch in range(config.epochs)
    ]
