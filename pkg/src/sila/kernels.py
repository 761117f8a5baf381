"""Hot numeric kernels with numba acceleration and a pure-numpy fallback.

Set ``SILA_NUMBA=0`` to force the numpy path (useful for debugging and for
the benchmark in ``benchmarks/bench_kernels.py``).
"""

import os

import numpy as np

USE_NUMBA = os.environ.get("SILA_NUMBA", "1") not in ("0", "false", "no")

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        if args and callable(args[0]):
            return args[0]
        return wrap


def _mhd_numpy(a, b):
    # modified Hausdorff: max of the two mean nearest-neighbour distances
    d2 = ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2)
    d = np.sqrt(d2)
    return max(d.min(axis=1).mean(), d.min(axis=0).mean())


@njit(cache=True)
def _mhd_numba(a, b):  # pragma: no cover - exercised via dispatch
    na, nb = a.shape[0], b.shape[0]
    s_ab = 0.0
    for i in range(na):
        best = np.inf
        for j in range(nb):
            dx = a[i, 0] - b[j, 0]
            dy = a[i, 1] - b[j, 1]
            d = dx * dx + dy * dy
            if d < best:
                best = d
        s_ab += np.sqrt(best)
    s_ba = 0.0
    for j in range(nb):
        best = np.inf
        for i in range(na):
            dx = a[i, 0] - b[j, 0]
            dy = a[i, 1] - b[j, 1]
            d = dx * dx + dy * dy
            if d < best:
                best = d
        s_ba += np.sqrt(best)
    return max(s_ab / na, s_ba / nb)


def _nn_cd_numpy(G, b, lam, c, max_sweeps, tol):
    # min_{c>=0} ||y - Dc||^2 + lam*sum(c), via cyclic coordinate descent.
    # G = D^T D, b = D^T y.  Stationary point per coordinate:
    #   c_j = max(0, (b_j - sum_{k!=j} G_jk c_k - lam/2) / G_jj)
    L = G.shape[0]
    for _ in range(max_sweeps):
        delta = 0.0
        for j in range(L):
            gjj = G[j, j]
            if gjj <= 0.0:
                c[j] = 0.0
                continue
            r = b[j] - G[j] @ c + gjj * c[j] - 0.5 * lam
            new = r / gjj
            if new < 0.0:
                new = 0.0
            delta = max(delta, abs(new - c[j]))
            c[j] = new
        if delta < tol:
            break
    return c


@njit(cache=True)
def _nn_cd_numba(G, b, lam, c, max_sweeps, tol):  # pragma: no cover
    L = G.shape[0]
    for _ in range(max_sweeps):
        delta = 0.0
        for j in range(L):
            gjj = G[j, j]
            if gjj <= 0.0:
                c[j] = 0.0
                continue
            acc = 0.0
            for k in range(L):
                acc += G[j, k] * c[k]
            r = b[j] - acc + gjj * c[j] - 0.5 * lam
            new = r / gjj
            if new < 0.0:
                new = 0.0
            d = abs(new - c[j])
            if d > delta:
                delta = d
            c[j] = new
        if delta < tol:
            break
    return c


if USE_NUMBA and HAVE_NUMBA:
    mhd_points = _mhd_numba
    nn_coordinate_descent = _nn_cd_numba
else:
    mhd_points = _mhd_numpy
    nn_coordinate_descent = _nn_cd_numpy
