import numpy as np
import pytest

from gonet import backend


def kernel_sets():
    sets = [backend.numpy_kernels]
    if backend.numba_kernels is not None:
        sets.append(backend.numba_kernels)
    return sets


@pytest.fixture(scope="session")
def warm_kernels():
    """Trigger jit compilation once so timed tests measure compute only."""
    sizes = np.array([3, 4, 1], dtype=np.int64)
    theta = np.random.default_rng(0).normal(0, 0.3, backend.param_count(sizes))
    x = np.zeros(3)
    X = np.zeros((2, 3))
    su1 = np.empty(0)
    su2 = np.empty((2, 0))
    for ks in kernel_sets():
        ks.forward_trace(theta, sizes, x, 0, 0.01, )
        ks.forward_batch(theta, sizes, X, 0, 0.01)
        ks.input_grad(theta, sizes, x, 0, 0.01, 1)
        p, acts, pres = ks.forward_trace(theta, sizes, x, 1, 0.0)
        ks.param_grad(theta, sizes, acts, pres, 1, 0.0, -1)
        ks.ascend(theta, sizes, x.copy(), 0, 0.01, 0.01, 3, 1e-6, 0.0, 1.0, 1,
                  backend.STOP_FIXED, su1)
        ks.ascend_batch(theta, sizes, X, 0, 0.01, 0.01, 3, 1e-6, 0.0, 1.0, 1,
                        backend.STOP_FIXED, su2)
        ks.objective_grad_batch(theta, sizes, X, X, 0, 0.01)
    return True
