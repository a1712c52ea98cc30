"""Backend kernels: numpy/numba equivalence and correctness against
independent references."""

import numpy as np
import pytest

from gonet import backend
from gonet.errors import ConfigError

from conftest import kernel_sets

ACT = backend.ACT_LEAKY_RELU
SLOPE = 0.01


def random_net(rng, sizes):
    sizes = np.asarray(sizes, dtype=np.int64)
    theta = rng.normal(0.0, 0.5, backend.param_count(sizes))
    return theta, sizes


def logd_via_forward(ks, theta, sizes, x, kind, param, sign):
    p, _, _ = ks.forward_trace(theta, sizes, x, kind, param)
    return np.log(p) if sign > 0 else np.log(1.0 - p)


@pytest.mark.parametrize("ks", kernel_sets(), ids=lambda k: k.name)
def test_forward_trace_shapes_and_prob(ks):
    rng = np.random.default_rng(1)
    theta, sizes = random_net(rng, [3, 5, 4, 1])
    x = rng.normal(size=3)
    p, acts, pres = ks.forward_trace(theta, sizes, x, ACT, SLOPE)
    assert 0.0 < p < 1.0
    assert acts.size == 3 + 5 + 4 + 1
    assert pres.size == 5 + 4 + 1
    assert acts[-1] == p
    np.testing.assert_array_equal(acts[:3], x)


def test_backends_agree_exactly():
    if backend.numba_kernels is None:
        pytest.skip("numba not available")
    rng = np.random.default_rng(2)
    theta, sizes = random_net(rng, [4, 8, 8, 1])
    x = rng.normal(size=4)
    X = rng.normal(size=(6, 4))
    a = backend.numpy_kernels
    b = backend.numba_kernels

    pa, acts_a, pres_a = a.forward_trace(theta, sizes, x, ACT, SLOPE)
    pb, acts_b, pres_b = b.forward_trace(theta, sizes, x, ACT, SLOPE)
    assert pa == pb
    np.testing.assert_array_equal(acts_a, acts_b)
    np.testing.assert_array_equal(pres_a, pres_b)

    ga, _ = a.input_grad(theta, sizes, x, ACT, SLOPE, 1)
    gb, _ = b.input_grad(theta, sizes, x, ACT, SLOPE, 1)
    np.testing.assert_allclose(ga, gb, rtol=1e-13, atol=1e-15)

    np.testing.assert_allclose(
        a.forward_batch(theta, sizes, X, ACT, SLOPE),
        b.forward_batch(theta, sizes, X, ACT, SLOPE),
        rtol=1e-13,
    )

    su = np.empty(0)
    za, pa_, ia, ta = a.ascend(theta, sizes, x.copy(), ACT, SLOPE, 0.05, 40, 1e-9,
                               0.0, 1.0, 0, backend.STOP_FIXED, su)
    zb, pb_, ib, tb = b.ascend(theta, sizes, x.copy(), ACT, SLOPE, 0.05, 40, 1e-9,
                               0.0, 1.0, 0, backend.STOP_FIXED, su)
    assert ia == ib
    np.testing.assert_allclose(za, zb, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(ta, tb, rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("ks", kernel_sets(), ids=lambda k: k.name)
@pytest.mark.parametrize("kind,param", [(backend.ACT_LEAKY_RELU, 0.01),
                                        (backend.ACT_TANH, 0.0)])
@pytest.mark.parametrize("sign", [1, -1])
def test_input_grad_matches_finite_differences(ks, kind, param, sign):
    rng = np.random.default_rng(3)
    theta, sizes = random_net(rng, [5, 7, 1])
    x = rng.normal(size=5)
    g, p = ks.input_grad(theta, sizes, x, kind, param, sign)
    assert 0 < p < 1
    h = 1e-6
    for j in range(5):
        e = np.zeros(5)
        e[j] = h
        fd = (logd_via_forward(ks, theta, sizes, x + e, kind, param, sign)
              - logd_via_forward(ks, theta, sizes, x - e, kind, param, sign)) / (2 * h)
        np.testing.assert_allclose(g[j], fd, rtol=1e-5, atol=1e-8)


@pytest.mark.parametrize("ks", kernel_sets(), ids=lambda k: k.name)
@pytest.mark.parametrize("sign", [1, -1])
def test_param_grad_matches_finite_differences(ks, sign):
    rng = np.random.default_rng(4)
    theta, sizes = random_net(rng, [3, 6, 1])
    x = rng.normal(size=3)
    p, acts, pres = ks.forward_trace(theta, sizes, x, ACT, SLOPE)
    g = ks.param_grad(theta, sizes, acts, pres, ACT, SLOPE, sign)
    h = 1e-6
    for j in range(theta.size):
        tp = theta.copy()
        tp[j] += h
        tm = theta.copy()
        tm[j] -= h
        fd = (logd_via_forward(ks, tp, sizes, x, ACT, SLOPE, sign)
              - logd_via_forward(ks, tm, sizes, x, ACT, SLOPE, sign)) / (2 * h)
        np.testing.assert_allclose(g[j], fd, rtol=1e-5, atol=1e-8)


@pytest.mark.parametrize("ks", kernel_sets(), ids=lambda k: k.name)
def test_objective_grad_matches_per_sample_recomputation(ks):
    rng = np.random.default_rng(5)
    theta, sizes = random_net(rng, [4, 6, 1])
    Xr = rng.normal(size=(5, 4))
    Zf = rng.normal(size=(5, 4))
    g, obj, mr, mf = ks.objective_grad_batch(theta, sizes, Xr, Zf, ACT, SLOPE)

    g_ref = np.zeros_like(theta)
    obj_ref = 0.0
    prs, pfs = [], []
    for i in range(5):
        p, acts, pres = ks.forward_trace(theta, sizes, Xr[i], ACT, SLOPE)
        obj_ref += np.log(p)
        prs.append(p)
        g_ref += ks.param_grad(theta, sizes, acts, pres, ACT, SLOPE, 1)
        p, acts, pres = ks.forward_trace(theta, sizes, Zf[i], ACT, SLOPE)
        obj_ref += np.log(1 - p)
        pfs.append(p)
        g_ref += ks.param_grad(theta, sizes, acts, pres, ACT, SLOPE, -1)
    np.testing.assert_allclose(obj, obj_ref / 5, rtol=1e-12)
    np.testing.assert_allclose(g, g_ref / 5, rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose(mr, np.mean(prs), rtol=1e-12)
    np.testing.assert_allclose(mf, np.mean(pfs), rtol=1e-12)


@pytest.mark.parametrize("ks", kernel_sets(), ids=lambda k: k.name)
def test_ascend_matches_python_reference_loop(ks):
    # the in-kernel Adam must walk exactly like optim.adam_step applied to
    # grad_input, so generation and the optimizer share one arithmetic
    from gonet.optim import AdamState, adam_step

    rng = np.random.default_rng(6)
    theta, sizes = random_net(rng, [3, 5, 1])
    z0 = rng.normal(size=3)
    gamma, iters = 0.03, 25
    zk, pk, ik, traj = ks.ascend(theta, sizes, z0.copy(), ACT, SLOPE, gamma, iters,
                                 0.0, 0.0, 0.0, 0, backend.STOP_FIXED, np.empty(0))
    assert ik == iters

    z = z0.copy()
    state = AdamState.for_vars(z)
    best_z, best_p = z.copy(), None
    g, p = ks.input_grad(theta, sizes, z, ACT, SLOPE, 1)
    best_p = p
    for _ in range(iters):
        adam_step(state, z, g, lr=gamma, maximize=True)
        g, p = ks.input_grad(theta, sizes, z, ACT, SLOPE, 1)
        if p > best_p:
            best_p = p
            best_z = z.copy()
    np.testing.assert_array_equal(zk, best_z)
    assert pk == best_p


@pytest.mark.parametrize("ks", kernel_sets(), ids=lambda k: k.name)
def test_ascend_clip_and_trajectory(ks):
    rng = np.random.default_rng(7)
    theta, sizes = random_net(rng, [2, 6, 1])
    z0 = np.array([5.0, -3.0])  # outside bounds: projected on entry
    z, p, it, traj = ks.ascend(theta, sizes, z0, ACT, SLOPE, 0.05, 30, 0.0,
                               0.0, 1.0, 1, backend.STOP_FIXED, np.empty(0))
    assert np.all(z >= 0.0) and np.all(z <= 1.0)
    assert traj.size == it + 1
    assert np.log(p) >= traj[0] - 1e-15


@pytest.mark.parametrize("ks", kernel_sets(), ids=lambda k: k.name)
def test_ascend_batch_matches_rowwise(ks):
    rng = np.random.default_rng(8)
    theta, sizes = random_net(rng, [3, 4, 1])
    Z0 = rng.random((4, 3))
    su = np.empty((4, 0))
    Z, P, iters = ks.ascend_batch(theta, sizes, Z0, ACT, SLOPE, 0.02, 15, 1e-9,
                                  0.0, 1.0, 1, backend.STOP_FIXED, su)
    for i in range(4):
        zi, pi, ii, _ = ks.ascend(theta, sizes, Z0[i].copy(), ACT, SLOPE, 0.02, 15,
                                  1e-9, 0.0, 1.0, 1, backend.STOP_FIXED, np.empty(0))
        np.testing.assert_array_equal(Z[i], zi)
        assert P[i] == pi and iters[i] == ii


def test_param_count_and_offsets():
    sizes = (4, 128, 1)
    assert backend.param_count(sizes) == 4 * 128 + 128 + 128 * 1 + 1 == 769
    offs = backend.layer_offsets(sizes)
    assert offs == [(0, 512), (640, 768)]


def test_backend_selection():
    original = backend.backend_name()
    try:
        backend.set_backend("numpy")
        assert backend.kernels() is backend.numpy_kernels
        if backend.numba_kernels is not None:
            backend.set_backend("numba")
            assert backend.kernels() is backend.numba_kernels
        with pytest.raises(ConfigError):
            backend.set_backend("cuda")
    finally:
        backend.set_backend(original)


def test_prob_clamp_bounds_forward():
    # a giant output bias saturates the sigmoid; the clamp keeps the
    # probability strictly inside (0, 1)
    sizes = np.array([2, 2, 1], dtype=np.int64)
    theta = np.zeros(backend.param_count(sizes))
    theta[-1] = 1000.0
    for ks in kernel_sets():
        p, _, _ = ks.forward_trace(theta, sizes, np.zeros(2), ACT, SLOPE)
        assert p == 1.0 - backend.PROB_EPS
        theta[-1] = -1000.0
        p, _, _ = ks.forward_trace(theta, sizes, np.zeros(2), ACT, SLOPE)
        assert p == backend.PROB_EPS
        theta[-1] = 1000.0
