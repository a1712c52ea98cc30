"""Hot numeric kernels: MLP forward/backward and the input-space ascent loop.

Every kernel exists in two interchangeable flavours built from the same
source functions: a numba ``@njit`` compiled set and a plain numpy set.
The active set is chosen once at import time from the ``GON_BACKEND``
environment variable (``"numba"`` or ``"numpy"``; default is numba when
importable, numpy otherwise). ``benchmarks/bench_backends.py`` compares
the two.

Conventions shared by all kernels:

* Network parameters live in ONE flat float64 vector ``theta`` laid out
  layer by layer: weight matrix (rows = fan_out, cols = fan_in, row-major)
  followed by the bias vector.
* ``sizes`` is an int64 array of layer widths, input first, output last
  (output width is always 1).
* Probabilities are sigmoid outputs clamped to [PROB_EPS, 1 - PROB_EPS]
  before storage and before any log. Gradients are exact derivatives of
  the clamped expression (zero inside the clamp region), so they agree
  with finite differences everywhere and stay finite even when the raw
  sigmoid saturates to 0.0 or 1.0 in float64.
* Kernels never touch a random number generator; callers pre-draw any
  random input (noise vectors, stochastic-stop uniforms).
"""

from __future__ import annotations

import os
from typing import Callable, NamedTuple

import numpy as np

from .errors import ConfigError

# Probability clamp applied before any log, identical in training and
# generation.
PROB_EPS = 1e-7

# Adam defaults, shared with gonet.optim.
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

# Hidden activation codes.
ACT_LEAKY_RELU = 0
ACT_TANH = 1

# Ascent stop-rule codes.
STOP_FIXED = 0
STOP_STOCHASTIC = 1


class Kernels(NamedTuple):
    """One complete kernel set (either jit-compiled or plain numpy)."""

    name: str
    forward_trace: Callable
    forward_batch: Callable
    input_grad: Callable
    param_grad: Callable
    ascend: Callable
    ascend_batch: Callable
    objective_grad_batch: Callable


def _build_kernels(jit) -> "Kernels":
    """Instantiate the kernel set, optionally wrapping each function in a
    jit compiler. Kernels call each other through closure references,
    which numba resolves to the compiled dispatchers."""

    wrap = jit if jit is not None else (lambda f: f)

    @wrap
    def _act(h, kind, param):
        if kind == ACT_LEAKY_RELU:
            return np.where(h > 0.0, h, param * h)
        return np.tanh(h)

    @wrap
    def _act_deriv(pre, kind, param):
        if kind == ACT_LEAKY_RELU:
            return np.where(pre > 0.0, 1.0, param)
        t = np.tanh(pre)
        return 1.0 - t * t

    @wrap
    def _sigmoid_clamped(u):
        # exp of a non-positive argument only: no overflow either side
        if u >= 0.0:
            p = 1.0 / (1.0 + np.exp(-u))
        else:
            e = np.exp(u)
            p = e / (1.0 + e)
        if p < PROB_EPS:
            p = PROB_EPS
        elif p > 1.0 - PROB_EPS:
            p = 1.0 - PROB_EPS
        return p

    @wrap
    def _output_grad_factor(p, sign):
        # d/du of log(clamp(sigmoid(u))) for sign=+1, of log(1 - clamp(...))
        # for sign=-1. Zero inside the clamp region: the clamped value is
        # constant there, which keeps the derivative consistent with
        # finite differences of the clamped expression.
        if p <= PROB_EPS or p >= 1.0 - PROB_EPS:
            return 0.0
        if sign > 0:
            return 1.0 - p
        return -p

    @wrap
    def forward_trace(theta, sizes, x, kind, param):
        """Single-sample forward pass.

        Returns (p, acts, pres) where acts is the flat concatenation of
        the input and every post-activation layer output (the last entry
        is the clamped probability) and pres is the flat concatenation of
        every pre-activation.
        """
        nl = sizes.size - 1
        n_acts = 0
        for i in range(sizes.size):
            n_acts += sizes[i]
        acts = np.empty(n_acts)
        pres = np.empty(n_acts - sizes[0])

        acts[: sizes[0]] = x
        a = x
        w_off = 0
        a_off = sizes[0]
        p_off = 0
        p = 0.0
        for li in range(nl):
            fan_in = sizes[li]
            fan_out = sizes[li + 1]
            W = theta[w_off : w_off + fan_out * fan_in].reshape(fan_out, fan_in)
            w_off += fan_out * fan_in
            b = theta[w_off : w_off + fan_out]
            w_off += fan_out
            pre = np.dot(W, a) + b
            pres[p_off : p_off + fan_out] = pre
            p_off += fan_out
            if li < nl - 1:
                a = _act(pre, kind, param)
            else:
                p = _sigmoid_clamped(pre[0])
                a = np.empty(1)
                a[0] = p
            acts[a_off : a_off + fan_out] = a
            a_off += fan_out
        return p, acts, pres

    @wrap
    def forward_batch(theta, sizes, X, kind, param):
        """Probabilities for a batch of row-vector inputs."""
        nl = sizes.size - 1
        A = X
        w_off = 0
        for li in range(nl):
            fan_in = sizes[li]
            fan_out = sizes[li + 1]
            W = theta[w_off : w_off + fan_out * fan_in].reshape(fan_out, fan_in)
            w_off += fan_out * fan_in
            b = theta[w_off : w_off + fan_out]
            w_off += fan_out
            pre = np.dot(A, W.T) + b
            if li < nl - 1:
                A = _act(pre, kind, param)
            else:
                A = pre
        u = A[:, 0]
        e = np.exp(-np.abs(u))
        p = np.where(u >= 0.0, 1.0 / (1.0 + e), e / (1.0 + e))
        return np.minimum(np.maximum(p, PROB_EPS), 1.0 - PROB_EPS)

    @wrap
    def input_grad(theta, sizes, x, kind, param, sign):
        """Gradient of log D (sign=+1) or log(1-D) (sign=-1) w.r.t. x.

        Returns (grad, p).
        """
        nl = sizes.size - 1
        n_pre = 0
        for i in range(1, sizes.size):
            n_pre += sizes[i]
        pres = np.empty(n_pre)

        # forward, keeping pre-activations only
        a = x
        w_off = 0
        p_off = 0
        p = 0.0
        for li in range(nl):
            fan_in = sizes[li]
            fan_out = sizes[li + 1]
            W = theta[w_off : w_off + fan_out * fan_in].reshape(fan_out, fan_in)
            w_off += fan_out * fan_in
            b = theta[w_off : w_off + fan_out]
            w_off += fan_out
            pre = np.dot(W, a) + b
            pres[p_off : p_off + fan_out] = pre
            p_off += fan_out
            if li < nl - 1:
                a = _act(pre, kind, param)
            else:
                p = _sigmoid_clamped(pre[0])

        # backward to the input
        delta = np.empty(1)
        delta[0] = _output_grad_factor(p, sign)
        for li in range(nl - 1, 0, -1):
            fan_in = sizes[li]
            fan_out = sizes[li + 1]
            p_off -= fan_out
            w_off -= fan_out + fan_out * fan_in
            W = theta[w_off : w_off + fan_out * fan_in].reshape(fan_out, fan_in)
            da = np.dot(W.T, delta)
            pre_prev = pres[p_off - fan_in : p_off]
            delta = da * _act_deriv(pre_prev, kind, param)
        fan_in = sizes[0]
        fan_out = sizes[1]
        W0 = theta[: fan_out * fan_in].reshape(fan_out, fan_in)
        return np.dot(W0.T, delta), p

    @wrap
    def param_grad(theta, sizes, acts, pres, kind, param, sign):
        """Gradient of log D (sign=+1) or log(1-D) (sign=-1) w.r.t. theta,
        from a forward trace. Same flat layout as theta."""
        nl = sizes.size - 1
        grad = np.zeros(theta.size)

        p = acts[acts.size - 1]
        delta = np.empty(1)
        delta[0] = _output_grad_factor(p, sign)

        # offsets of the LAST layer's weights / trace slices
        w_off = theta.size
        a_off = acts.size - sizes[nl]
        p_off = pres.size - sizes[nl]
        for li in range(nl - 1, -1, -1):
            fan_in = sizes[li]
            fan_out = sizes[li + 1]
            w_off -= fan_out + fan_out * fan_in
            a_prev = acts[a_off - fan_in : a_off]
            gW = grad[w_off : w_off + fan_out * fan_in].reshape(fan_out, fan_in)
            gW[:, :] = np.outer(delta, a_prev)
            grad[w_off + fan_out * fan_in : w_off + fan_out * fan_in + fan_out] = delta
            if li > 0:
                W = theta[w_off : w_off + fan_out * fan_in].reshape(fan_out, fan_in)
                da = np.dot(W.T, delta)
                pre_prev = pres[p_off - fan_in : p_off]
                delta = da * _act_deriv(pre_prev, kind, param)
                a_off -= fan_in
                p_off -= fan_in
        return grad

    @wrap
    def ascend(
        theta,
        sizes,
        z0,
        kind,
        param,
        gamma,
        max_iters,
        tol,
        clip_lo,
        clip_hi,
        use_clip,
        stop_mode,
        stop_u,
    ):
        """Adam-driven gradient ascent of log D in input space.

        Tracks the best iterate by probability. Stops after ``max_iters``
        steps, when |delta log D| drops below ``tol`` (fixed rule), or --
        under the stochastic rule -- after any step with probability
        D(z), decided against the pre-drawn uniforms ``stop_u``.

        Returns (z_best, p_best, iters_used, traj) where traj holds
        log D after the start point and after every step.
        """
        d = z0.size
        z = z0.copy()
        if use_clip == 1:
            z = np.minimum(np.maximum(z, clip_lo), clip_hi)

        traj = np.empty(max_iters + 1)
        g, p = input_grad(theta, sizes, z, kind, param, 1)
        logd = np.log(p)
        traj[0] = logd
        z_best = z.copy()
        p_best = p

        m = np.zeros(d)
        v = np.zeros(d)
        iters_used = 0
        for t in range(1, max_iters + 1):
            m = ADAM_BETA1 * m + (1.0 - ADAM_BETA1) * g
            v = ADAM_BETA2 * v + (1.0 - ADAM_BETA2) * g * g
            mh = m / (1.0 - ADAM_BETA1**t)
            vh = v / (1.0 - ADAM_BETA2**t)
            z = z + gamma * mh / (np.sqrt(vh) + ADAM_EPS)
            if use_clip == 1:
                z = np.minimum(np.maximum(z, clip_lo), clip_hi)
            g, p = input_grad(theta, sizes, z, kind, param, 1)
            logd_new = np.log(p)
            traj[t] = logd_new
            iters_used = t
            if p > p_best:
                p_best = p
                z_best = z.copy()
            if stop_mode == STOP_STOCHASTIC:
                if stop_u[t - 1] < p:
                    break
            elif np.abs(logd_new - logd) < tol:
                break
            logd = logd_new
        return z_best, p_best, iters_used, traj[: iters_used + 1].copy()

    @wrap
    def ascend_batch(
        theta,
        sizes,
        Z0,
        kind,
        param,
        gamma,
        max_iters,
        tol,
        clip_lo,
        clip_hi,
        use_clip,
        stop_mode,
        stop_u,
    ):
        """Row-wise ascent for a batch of start points."""
        n = Z0.shape[0]
        Z = np.empty_like(Z0)
        P = np.empty(n)
        iters = np.empty(n, dtype=np.int64)
        for i in range(n):
            zb, pb, it, _ = ascend(
                theta,
                sizes,
                Z0[i].copy(),
                kind,
                param,
                gamma,
                max_iters,
                tol,
                clip_lo,
                clip_hi,
                use_clip,
                stop_mode,
                stop_u[i],
            )
            Z[i] = zb
            P[i] = pb
            iters[i] = it
        return Z, P, iters

    @wrap
    def objective_grad_batch(theta, sizes, X_real, Z_fake, kind, param):
        """Value and parameter gradient of the minibatch objective

            (1/m) * sum_i [ log D(x_i) + log(1 - D(z_i)) ]

        plus the mean probabilities on each half of the batch.
        """
        m = X_real.shape[0]
        grad = np.zeros(theta.size)
        obj = 0.0
        sum_pr = 0.0
        sum_pf = 0.0
        for i in range(m):
            p, acts, pres = forward_trace(theta, sizes, X_real[i], kind, param)
            obj += np.log(p)
            sum_pr += p
            grad += param_grad(theta, sizes, acts, pres, kind, param, 1)

            p, acts, pres = forward_trace(theta, sizes, Z_fake[i], kind, param)
            obj += np.log(1.0 - p)
            sum_pf += p
            grad += param_grad(theta, sizes, acts, pres, kind, param, -1)
        return grad / m, obj / m, sum_pr / m, sum_pf / m

    return Kernels(
        name="numba" if jit is not None else "numpy",
        forward_trace=forward_trace,
        forward_batch=forward_batch,
        input_grad=input_grad,
        param_grad=param_grad,
        ascend=ascend,
        ascend_batch=ascend_batch,
        objective_grad_batch=objective_grad_batch,
    )


numpy_kernels = _build_kernels(None)

try:
    import numba

    numba_kernels = _build_kernels(numba.njit(cache=False))
except ImportError:  # pragma: no cover - exercised only without numba
    numba_kernels = None


def available_backends() -> tuple[str, ...]:
    return ("numba", "numpy") if numba_kernels is not None else ("numpy",)


def _select_initial() -> Kernels:
    choice = os.environ.get("GON_BACKEND", "").strip().lower()
    if choice == "numpy":
        return numpy_kernels
    if choice == "numba":
        if numba_kernels is None:
            raise ConfigError("GON_BACKEND=numba but numba is not importable")
        return numba_kernels
    if choice == "":
        return numba_kernels if numba_kernels is not None else numpy_kernels
    raise ConfigError(f"unknown GON_BACKEND value {choice!r} (use 'numba' or 'numpy')")


_active = _select_initial()


def kernels() -> Kernels:
    """The kernel set every higher-level module dispatches through."""
    return _active


def set_backend(name: str) -> None:
    """Override the active backend ('numba' or 'numpy'). Mostly for tests
    and the benchmark; normal use sets GON_BACKEND instead."""
    global _active
    if name == "numpy":
        _active = numpy_kernels
    elif name == "numba":
        if numba_kernels is None:
            raise ConfigError("numba backend requested but numba is not importable")
        _active = numba_kernels
    else:
        raise ConfigError(f"unknown backend {name!r} (use 'numba' or 'numpy')")


def backend_name() -> str:
    return _active.name


def param_count(layer_sizes) -> int:
    """Flat parameter count: sum over layers of fan_out * (fan_in + 1)."""
    total = 0
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        total += fan_out * (fan_in + 1)
    return total


def layer_offsets(layer_sizes) -> list[tuple[int, int]]:
    """(weight_offset, bias_offset) into the flat theta vector, per layer."""
    offs = []
    pos = 0
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        offs.append((pos, pos + fan_out * fan_in))
        pos += fan_out * (fan_in + 1)
    return offs
