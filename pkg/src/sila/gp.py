"""Sparse GP flow fields mapping 2D position to velocity.

Each transition carries two independent GPs (one per velocity axis) with a
squared-exponential ARD kernel.  Training uses the FITC pseudo-input
approximation: the marginal likelihood is maximised jointly over kernel
hyperparameters and pseudo-input locations (L-BFGS on analytic gradients,
parameters in log space).  With pseudo-inputs fixed at the training inputs
the model reduces to an exact GP, which is also the fallback for tiny
datasets.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np
from scipy.cluster.vq import kmeans2
from scipy.linalg import cho_factor, cho_solve, cholesky
from scipy.optimize import minimize

from .errors import DataError

log = logging.getLogger(__name__)

JITTER = 1e-8
NOISE_FLOOR = 1e-8
MIN_PSEUDO_SEP = 1e-8
LOG2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class GPHyperparams:
    lengthscale_a: float
    lengthscale_b: float
    signal_var: float
    noise_var: float

    def __post_init__(self):
        if min(self.lengthscale_a, self.lengthscale_b, self.signal_var, self.noise_var) <= 0:
            raise DataError("GP hyperparameters must be strictly positive")


@dataclass
class SparseGP:
    pseudo_inputs: np.ndarray  # (M, 2)
    hyper: GPHyperparams
    mean_weights: np.ndarray  # (M,): predictive mean = k(x,Z) @ mean_weights
    cov_correction: np.ndarray  # (M, M): Kmm^-1 - Qmm^-1

    @property
    def M(self) -> int:
        return self.pseudo_inputs.shape[0]


@dataclass
class FlowField:
    gp_x: SparseGP
    gp_y: SparseGP
    training_count: int


# ---------------------------------------------------------------------------
# kernel and marginal likelihood


def _k_cross(X, Z, la, lb, s2):
    da = (X[:, 0:1] - Z[None, :, 0]) / la
    db = (X[:, 1:2] - Z[None, :, 1]) / lb
    return s2 * np.exp(-0.5 * (da * da + db * db))


def _nlml_and_grad(X, y, Z, la, lb, s2, n2, extra_noise, want_z_grad):
    """FITC negative log marginal likelihood and gradients.

    Returns (nlml, grad_log_hyp (4,), grad_Z (M,2)).  Gradients are taken
    with respect to log(la), log(lb), log(s2), log(n2) and the raw Z.
    """
    n, M = X.shape[0], Z.shape[0]
    Knm = _k_cross(X, Z, la, lb, s2)
    Kmm_nj = _k_cross(Z, Z, la, lb, s2)
    Kmm = Kmm_nj + JITTER * s2 * np.eye(M)
    cf = cho_factor(Kmm, lower=True)
    A = cho_solve(cf, Knm.T)  # (M, n) = Kmm^-1 Kmn
    Q = Knm @ A  # (n, n) low-rank part
    lam = s2 - np.diag(Q) + n2
    if extra_noise is not None:
        lam = lam + extra_noise
    lam = np.maximum(lam, 1e-12)
    Sigma = Q + np.diag(lam)
    Ls = cholesky(Sigma, lower=True)
    alpha = cho_solve((Ls, True), y)
    nlml = 0.5 * float(y @ alpha) + float(np.log(np.diag(Ls)).sum()) + 0.5 * n * LOG2PI

    Sigma_inv = cho_solve((Ls, True), np.eye(n))
    W = Sigma_inv - np.outer(alpha, alpha)
    w = np.diag(W).copy()
    B = W - np.diag(w)
    F_nm = B @ A.T  # coefficient of dKnm (factor 1/2 * 2 folded in)
    F_mm = -0.5 * (A @ B @ A.T)  # coefficient of dKmm
    half_w = 0.5 * w

    Dnm_a = (X[:, 0:1] - Z[None, :, 0]) ** 2
    Dnm_b = (X[:, 1:2] - Z[None, :, 1]) ** 2
    Dmm_a = (Z[:, 0:1] - Z[None, :, 0]) ** 2
    Dmm_b = (Z[:, 1:2] - Z[None, :, 1]) ** 2

    PK = F_nm * Knm
    QK = F_mm * Kmm_nj
    g_la = float((PK * Dnm_a).sum() + (QK * Dmm_a).sum()) / la**2
    g_lb = float((PK * Dnm_b).sum() + (QK * Dmm_b).sum()) / lb**2
    g_s2 = float(PK.sum() + QK.sum() + half_w.sum() * s2)
    g_n2 = float(half_w.sum() * n2)
    grad_hyp = np.array([g_la, g_lb, g_s2, g_n2])

    grad_Z = np.zeros_like(Z)
    if want_z_grad:
        for d, (ld, Xd, Zd) in enumerate(((la, X[:, 0], Z[:, 0]), (lb, X[:, 1], Z[:, 1]))):
            gz = (PK.T @ Xd - Zd * PK.sum(axis=0)) / ld**2
            gz += 2.0 * (QK @ Zd - Zd * QK.sum(axis=1)) / ld**2
            grad_Z[:, d] = gz
    return nlml, grad_hyp, grad_Z


def _posterior_cache(X, y, Z, la, lb, s2, n2, extra_noise):
    """FITC posterior: mean weights a and covariance correction B."""
    M = Z.shape[0]
    Knm = _k_cross(X, Z, la, lb, s2)
    Kmm = _k_cross(Z, Z, la, lb, s2) + JITTER * s2 * np.eye(M)
    Lm = cholesky(Kmm, lower=True)
    V = np.linalg.solve(Lm, Knm.T)  # (M, n)
    q_diag = np.einsum("ji,ji->i", V, V)
    lam = s2 - q_diag + n2
    if extra_noise is not None:
        lam = lam + extra_noise
    lam = np.maximum(lam, 1e-12)
    # Qmm = Lm (I + V Lam^-1 V^T) Lm^T; the inner matrix is well conditioned
    inner = np.eye(M) + (V / lam) @ V.T
    ci = cho_factor(inner, lower=True)
    a = np.linalg.solve(Lm.T, cho_solve(ci, V @ (y / lam)))
    mid = np.eye(M) - cho_solve(ci, np.eye(M))
    B = np.linalg.solve(Lm.T, np.linalg.solve(Lm.T, mid.T).T)
    return a, 0.5 * (B + B.T)


# ---------------------------------------------------------------------------
# fitting


def _init_hyper(X, y):
    span = np.maximum(X.max(axis=0) - X.min(axis=0), 1e-2)
    s2 = max(float(np.var(y)), 1e-4)
    return GPHyperparams(0.5 * span[0], 0.5 * span[1], s2, max(0.05 * s2, 1e-4))


def _separate_points(Z, rng, min_sep=MIN_PSEUDO_SEP):
    """Nudge coincident pseudo-inputs apart (deterministic given rng)."""
    for _ in range(10):
        d = np.linalg.norm(Z[:, None, :] - Z[None, :, :], axis=2)
        np.fill_diagonal(d, np.inf)
        if d.min() >= min_sep:
            return Z
        Z = Z + rng.normal(scale=10 * min_sep, size=Z.shape)
    return Z


def fit_sparse_gp(X, y, M, rng, extra_noise=None, init_hyper=None, init_Z=None,
                  max_iters=100) -> SparseGP:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    hyp = init_hyper or _init_hyper(X, y)

    if init_Z is not None and n > M:
        Z0 = np.asarray(init_Z, dtype=float).copy()
        opt_z = True
    elif n <= M:
        Z0 = X.copy()
        opt_z = False
    else:
        Z0, _ = kmeans2(X, M, minit="++", seed=int(rng.integers(2**31 - 1)))
        opt_z = True
    Z0 = _separate_points(Z0, rng)
    M_eff = Z0.shape[0]

    th0 = np.log([hyp.lengthscale_a, hyp.lengthscale_b, hyp.signal_var, hyp.noise_var])
    x0 = np.concatenate([th0, Z0.ravel()]) if opt_z else th0
    lo, hi = np.log(1e-4), np.log(1e6)
    bounds = [(lo, hi), (lo, hi), (lo, hi), (np.log(NOISE_FLOOR), hi)]
    if opt_z:
        bounds += [(None, None)] * (2 * M_eff)

    def fun(x):
        la, lb, s2, n2 = np.exp(x[:4])
        Z = x[4:].reshape(M_eff, 2) if opt_z else Z0
        nlml, gh, gz = _nlml_and_grad(X, y, Z, la, lb, s2, n2, extra_noise, opt_z)
        g = np.concatenate([gh, gz.ravel()]) if opt_z else gh
        return nlml, g

    res = minimize(fun, x0, jac=True, method="L-BFGS-B", bounds=bounds,
                   options={"maxiter": max_iters, "ftol": 1e-9})
    xf = res.x if np.isfinite(res.fun) else x0
    la, lb, s2, n2 = np.exp(xf[:4])
    Z = xf[4:].reshape(M_eff, 2) if opt_z else Z0
    Z = _separate_points(Z, rng)
    a, B = _posterior_cache(X, y, Z, la, lb, s2, n2, extra_noise)
    return SparseGP(Z, GPHyperparams(la, lb, s2, n2), a, B)


def gp_predict(gp: SparseGP, Xq: np.ndarray):
    """Pointwise predictive mean and variance (variance includes noise)."""
    Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
    h = gp.hyper
    k = _k_cross(Xq, gp.pseudo_inputs, h.lengthscale_a, h.lengthscale_b, h.signal_var)
    mean = k @ gp.mean_weights
    var = h.signal_var - np.einsum("ij,jk,ik->i", k, gp.cov_correction, k) + h.noise_var
    return mean, np.maximum(var, h.noise_var)


def gp_log_density(gp: SparseGP, Xq, yq) -> float:
    mean, var = gp_predict(gp, Xq)
    r = np.asarray(yq, dtype=float) - mean
    return float(-0.5 * (r * r / var + np.log(2.0 * np.pi * var)).sum())


# ---------------------------------------------------------------------------
# flow fields


def _check_data(data):
    data = np.asarray(data, dtype=float)
    if data.size == 0:
        raise DataError("empty flow-field data")
    if data.ndim != 2 or data.shape[1] != 4:
        raise DataError("flow-field data must be (n, 4): x, y, vx, vy")
    if not np.all(np.isfinite(data)):
        raise DataError("non-finite flow-field data")
    return data


def train_flowfield(data, M: int = 15, seed: int = 0, max_points: int = 400,
                    max_iters: int = 100, warm_start: FlowField | None = None,
                    extra_noise=None) -> FlowField:
    """Fit the (GP_x, GP_y) pair on (x, y, vx, vy) samples."""
    data = _check_data(data)
    rng = np.random.default_rng(seed)
    count = data.shape[0]
    if data.shape[0] > max_points:
        keep = np.sort(rng.choice(data.shape[0], size=max_points, replace=False))
        data = data[keep]
        extra_noise = extra_noise[keep] if extra_noise is not None else None
    X = data[:, :2]
    gps = []
    for axis in (2, 3):
        init_h = init_z = None
        if warm_start is not None:
            old = warm_start.gp_x if axis == 2 else warm_start.gp_y
            init_h = old.hyper
            init_z = old.pseudo_inputs if X.shape[0] > old.M else None
        gps.append(fit_sparse_gp(X, data[:, axis], M, rng, extra_noise=extra_noise,
                                 init_hyper=init_h, init_Z=init_z, max_iters=max_iters))
    return FlowField(gps[0], gps[1], count)


def predict_velocity(ff: FlowField, p):
    """(mean velocity, variance), each a length-2 array."""
    mx, vx = gp_predict(ff.gp_x, p)
    my, vy = gp_predict(ff.gp_y, p)
    return np.array([mx[0], my[0]]), np.array([vx[0], vy[0]])


def predict_velocities(ff: FlowField, pts):
    mx, vx = gp_predict(ff.gp_x, pts)
    my, vy = gp_predict(ff.gp_y, pts)
    return np.column_stack([mx, my]), np.column_stack([vx, vy])


def log_likelihood(ff: FlowField, data) -> float:
    """Sum over both axes of the predictive log density of the velocities."""
    data = _check_data(data)
    X = data[:, :2]
    return gp_log_density(ff.gp_x, X, data[:, 2]) + gp_log_density(ff.gp_y, X, data[:, 3])


def surrogate_data(ff: FlowField):
    """Represent the posterior as weighted pseudo-observations.

    Returns (data (M,4), extra_noise (M, 2)) where extra_noise carries the
    per-axis predictive variances; positions are gp_x's pseudo-inputs.
    """
    Z = ff.gp_x.pseudo_inputs
    mx, vx = gp_predict(ff.gp_x, Z)
    my, vy = gp_predict(ff.gp_y, Z)
    data = np.column_stack([Z, mx, my])
    return data, np.column_stack([vx, vy])


def incremental_update(ff_old: FlowField, d2, M: int | None = None, seed: int = 0,
                       max_iters: int = 100) -> FlowField:
    """Fold new samples into a trained flow field.

    The old posterior is summarised as surrogate observations at its
    pseudo-inputs (predictive means as targets, predictive variances as
    per-point noise) and refit jointly with the new data, warm-started
    from the old hyperparameters.
    """
    d2 = np.asarray(d2, dtype=float)
    if d2.size == 0:
        return ff_old
    d2 = _check_data(d2)
    M = M or ff_old.gp_x.M
    rng = np.random.default_rng(seed)
    gps = []
    for axis, gp in ((2, ff_old.gp_x), (3, ff_old.gp_y)):
        Z = gp.pseudo_inputs
        t, r = gp_predict(gp, Z)
        X = np.vstack([Z, d2[:, :2]])
        y = np.concatenate([t, d2[:, axis]])
        extra = np.concatenate([r, np.zeros(d2.shape[0])])
        init_z = Z if X.shape[0] > M else None
        gps.append(fit_sparse_gp(X, y, M, rng, extra_noise=extra, init_hyper=gp.hyper,
                                 init_Z=init_z, max_iters=max_iters))
    return FlowField(gps[0], gps[1], ff_old.training_count + d2.shape[0])


def gradient_check(data, M: int = 5, seed: int = 0, step: float = 1e-5):
    """Max relative error of analytic vs central-difference gradients.

    Returns None when the targets have zero variance (check not meaningful).
    """
    data = _check_data(data)
    if data.shape[0] > 30:
        raise DataError("gradient check is meant for small instances (<= 30 points)")
    X, y = data[:, :2], data[:, 2]
    if np.var(y) < 1e-14:
        return None
    rng = np.random.default_rng(seed)
    M = min(M, X.shape[0] - 1) or 1
    Z0, _ = kmeans2(X, M, minit="++", seed=int(rng.integers(2**31 - 1)))
    Z0 = _separate_points(Z0, rng)
    hyp = _init_hyper(X, y)
    th = np.concatenate([
        np.log([hyp.lengthscale_a, hyp.lengthscale_b, hyp.signal_var, hyp.noise_var]),
        Z0.ravel(),
    ])
    m = Z0.shape[0]

    def f(x):
        la, lb, s2, n2 = np.exp(x[:4])
        Z = x[4:].reshape(m, 2)
        return _nlml_and_grad(X, y, Z, la, lb, s2, n2, None, True)

    nlml, gh, gz = f(th)
    g = np.concatenate([gh, gz.ravel()])
    g_fd = np.empty_like(g)
    for i in range(len(th)):
        hi = th.copy()
        lo = th.copy()
        hi[i] += step
        lo[i] -= step
        g_fd[i] = (f(hi)[0] - f(lo)[0]) / (2 * step)
    denom = np.maximum(np.abs(g_fd), 1e-6)
    return float(np.max(np.abs(g - g_fd) / denom))
