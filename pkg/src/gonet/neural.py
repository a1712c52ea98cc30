"""Fully-connected discriminator with exact reverse-mode gradients.

The network maps a flat input vector to a single probability through a
stack of affine layers: LeakyReLU or tanh on the hidden layers, sigmoid
on the scalar output. Gradients of log D and log(1 - D) are available
with respect to both the parameters and the input; the input gradient is
what drives sample generation.

Parameters are stored in one flat float64 vector (see gonet.backend for
the layout); ``weights`` / ``biases`` expose per-layer views into it.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from . import backend
from .backend import PROB_EPS
from .errors import ConfigError, DataError, NumericError

LEAKY_RELU = "leaky_relu"
TANH = "tanh"
DEFAULT_LEAKY_SLOPE = 0.01

_ACT_CODES = {LEAKY_RELU: backend.ACT_LEAKY_RELU, TANH: backend.ACT_TANH}

CHECKPOINT_MAGIC = b"GON1"
_ACT_TAGS = {LEAKY_RELU: 0, TANH: 1}
_TAG_ACTS = {v: k for k, v in _ACT_TAGS.items()}


@dataclass
class Discriminator:
    """The scoring network D(. ; theta).

    Immutable during forward/gradient calls and safe to share read-only
    across threads; training updates write into ``theta`` and require
    exclusive access.
    """

    layer_sizes: tuple[int, ...]
    theta: np.ndarray
    activation: str = LEAKY_RELU
    leaky_slope: float = DEFAULT_LEAKY_SLOPE
    sizes_arr: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.sizes_arr = np.asarray(self.layer_sizes, dtype=np.int64)

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_layers(self) -> int:
        return len(self.layer_sizes) - 1

    @property
    def n_params(self) -> int:
        return self.theta.size

    @property
    def act_code(self) -> int:
        return _ACT_CODES[self.activation]

    @property
    def act_param(self) -> float:
        return self.leaky_slope if self.activation == LEAKY_RELU else 0.0

    @property
    def weights(self) -> list[np.ndarray]:
        """Per-layer weight matrices as writable views into theta."""
        out = []
        for li, (w_off, b_off) in enumerate(backend.layer_offsets(self.layer_sizes)):
            r, c = self.layer_sizes[li + 1], self.layer_sizes[li]
            out.append(self.theta[w_off:b_off].reshape(r, c))
        return out

    @property
    def biases(self) -> list[np.ndarray]:
        out = []
        for li, (w_off, b_off) in enumerate(backend.layer_offsets(self.layer_sizes)):
            out.append(self.theta[b_off : b_off + self.layer_sizes[li + 1]])
        return out


@dataclass
class ForwardTrace:
    """Cached per-layer values from one forward pass, consumed by the
    parameter-gradient pass. ``acts`` holds the input followed by every
    post-activation output (flat); ``pres`` the pre-activations."""

    layer_sizes: tuple[int, ...]
    acts: np.ndarray
    pres: np.ndarray

    @property
    def n_layers(self) -> int:
        return len(self.layer_sizes) - 1

    def activation(self, i: int) -> np.ndarray:
        """Post-activation output of layer i (i = -1 gives the input)."""
        widths = self.layer_sizes
        start = sum(widths[: i + 1])
        return self.acts[start : start + widths[i + 1]]

    def pre_activation(self, i: int) -> np.ndarray:
        widths = self.layer_sizes[1:]
        start = sum(widths[:i])
        return self.pres[start : start + widths[i]]


def param_count(layer_sizes) -> int:
    return backend.param_count(layer_sizes)


def init_discriminator(layer_sizes, activation: str = LEAKY_RELU, seed: int = 0,
                       leaky_slope: float = DEFAULT_LEAKY_SLOPE) -> Discriminator:
    """Glorot-uniform weights, zero biases, deterministic per seed.

    Each weight matrix is drawn from U(-a, a) with a = sqrt(6 / (fan_in +
    fan_out)).
    """
    sizes = tuple(int(s) for s in layer_sizes)
    if len(sizes) < 2:
        raise ConfigError("layer_sizes needs at least an input and an output width")
    if any(s <= 0 for s in sizes):
        raise ConfigError(f"zero or negative layer width in {sizes}")
    if sizes[-1] != 1:
        raise ConfigError(f"output layer width must be 1, got {sizes[-1]}")
    if activation not in _ACT_CODES:
        raise ConfigError(f"unknown activation {activation!r}")

    rng = np.random.default_rng(seed)
    theta = np.zeros(param_count(sizes))
    for li, (w_off, b_off) in enumerate(backend.layer_offsets(sizes)):
        fan_in, fan_out = sizes[li], sizes[li + 1]
        a = np.sqrt(6.0 / (fan_in + fan_out))
        theta[w_off:b_off] = rng.uniform(-a, a, fan_out * fan_in)
        # biases stay zero
    return Discriminator(sizes, theta, activation, leaky_slope)


def _check_input(disc: Discriminator, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size != disc.input_dim:
        raise ConfigError(
            f"input length {x.size if x.ndim == 1 else x.shape} does not match "
            f"network input dim {disc.input_dim}"
        )
    if not np.all(np.isfinite(x)):
        raise NumericError("non-finite input to forward pass")
    return x


def forward(disc: Discriminator, x) -> tuple[float, ForwardTrace]:
    """Probability that x belongs to the data distribution, plus the trace
    needed for either backward pass. The probability is clamped into
    [PROB_EPS, 1 - PROB_EPS] so it is strictly inside (0, 1)."""
    x = _check_input(disc, x)
    p, acts, pres = backend.kernels().forward_trace(
        disc.theta, disc.sizes_arr, x, disc.act_code, disc.act_param
    )
    return float(p), ForwardTrace(disc.layer_sizes, acts, pres)


def forward_prob(disc: Discriminator, x) -> float:
    """Forward pass without keeping the trace."""
    x = _check_input(disc, x)
    p, _, _ = backend.kernels().forward_trace(
        disc.theta, disc.sizes_arr, x, disc.act_code, disc.act_param
    )
    return float(p)


def forward_batch(disc: Discriminator, X) -> np.ndarray:
    """Probabilities for a batch of row vectors."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != disc.input_dim:
        raise ConfigError(f"batch shape {X.shape} does not match input dim {disc.input_dim}")
    if not np.all(np.isfinite(X)):
        raise NumericError("non-finite input batch")
    return backend.kernels().forward_batch(
        disc.theta, disc.sizes_arr, X, disc.act_code, disc.act_param
    )


def grad_params_log_d(disc: Discriminator, trace: ForwardTrace, sign: int = 1) -> np.ndarray:
    """Exact gradient of log D (sign=+1) or log(1 - D) (sign=-1) with
    respect to theta, in the flat parameter layout."""
    if trace.layer_sizes != disc.layer_sizes:
        raise ConfigError("trace does not match this discriminator's layer sizes")
    if sign not in (1, -1):
        raise ConfigError(f"sign must be +1 or -1, got {sign}")
    return backend.kernels().param_grad(
        disc.theta, disc.sizes_arr, trace.acts, trace.pres,
        disc.act_code, disc.act_param, sign,
    )


def grad_input_log_d(disc: Discriminator, x, sign: int = 1) -> np.ndarray:
    """Exact gradient of log D (sign=+1) or log(1 - D) (sign=-1) with
    respect to the input vector."""
    x = _check_input(disc, x)
    if sign not in (1, -1):
        raise ConfigError(f"sign must be +1 or -1, got {sign}")
    g, _ = backend.kernels().input_grad(
        disc.theta, disc.sizes_arr, x, disc.act_code, disc.act_param, sign
    )
    return g


def as_layer_grads(disc: Discriminator, flat: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Split a flat theta-shaped vector into per-layer (dW, db) views."""
    if flat.size != disc.n_params:
        raise ConfigError("flat vector does not match parameter count")
    out = []
    for li, (w_off, b_off) in enumerate(backend.layer_offsets(disc.layer_sizes)):
        r, c = disc.layer_sizes[li + 1], disc.layer_sizes[li]
        out.append((flat[w_off:b_off].reshape(r, c), flat[b_off : b_off + r]))
    return out


def save_checkpoint(disc: Discriminator, path) -> None:
    """Binary checkpoint: magic "GON1", layer count and layer sizes as
    64-bit little-endian unsigned ints, one activation tag byte, then all
    weights and biases as 64-bit little-endian floats in layer order,
    row-major. Round-trips bit-exactly."""
    if disc.activation == LEAKY_RELU and disc.leaky_slope != DEFAULT_LEAKY_SLOPE:
        raise ConfigError(
            "checkpoint format stores only the activation tag; "
            f"LeakyReLU slope must be the default {DEFAULT_LEAKY_SLOPE}"
        )
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<Q", len(disc.layer_sizes)))
        for s in disc.layer_sizes:
            fh.write(struct.pack("<Q", s))
        fh.write(struct.pack("<B", _ACT_TAGS[disc.activation]))
        fh.write(disc.theta.astype("<f8", copy=False).tobytes())


def load_checkpoint(path) -> Discriminator:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != CHECKPOINT_MAGIC:
        raise DataError(f"{path}: not a GON1 checkpoint (bad magic)")
    pos = 4
    (n_sizes,) = struct.unpack_from("<Q", blob, pos)
    pos += 8
    if n_sizes < 2 or n_sizes > 1024:
        raise DataError(f"{path}: implausible layer count {n_sizes}")
    sizes = struct.unpack_from(f"<{n_sizes}Q", blob, pos)
    pos += 8 * n_sizes
    (tag,) = struct.unpack_from("<B", blob, pos)
    pos += 1
    if tag not in _TAG_ACTS:
        raise DataError(f"{path}: unknown activation tag {tag}")
    n = param_count(sizes)
    expected = pos + 8 * n
    if len(blob) != expected:
        raise DataError(f"{path}: expected {expected} bytes, file has {len(blob)}")
    theta = np.frombuffer(blob, dtype="<f8", count=n, offset=pos).astype(np.float64)
    return Discriminator(tuple(int(s) for s in sizes), theta, _TAG_ACTS[tag])
