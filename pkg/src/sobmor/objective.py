"""Leveled least-squares objective and its analytic gradient.

For a sample set ``S`` and level ``gamma > 0`` the objective is::

    L(gamma, theta) = 1/gamma * sum_i sum_j ([sigma_j(G(s_i) - G_r(s_i, theta)) - gamma]_+)**2

Its gradient is a weighted sum of singular value gradients. Each singular
value gradient is linear in the rank-one matrix ``v u^H`` built from the
singular vectors, so all active ``(i, j)`` terms of one sample are folded into
one weight matrix ``W_i = sum_j w_ij v_ij u_ij^H`` before the blockwise
reshaping. The blocks follow the trace identities of the reshaping maps.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateSingularValueWarning, SingularPencilError
from .param import Layout, ParamVector, system_matrices
from .reshape import ftv, sutv, utv

__all__ = [
    "LossValue",
    "ErrorSamples",
    "loss",
    "loss_tilde",
    "lsq",
    "grad_loss",
    "grad_loss_tilde",
    "grad_lsq",
    "grad_sigma_ph",
    "grad_sigma_sso",
    "loss_and_grad",
    "SIMPLE_GAP",
]

SIMPLE_GAP = 1e-10


@dataclass(frozen=True)
class LossValue:
    value: float
    gamma: float
    active_count: int

    def __float__(self):
        return self.value


def _batched_inv(F, points):
    try:
        Finv = np.linalg.inv(F)
    except np.linalg.LinAlgError:
        for Fi, s in zip(F, points):
            if np.linalg.matrix_rank(Fi) < Fi.shape[0]:
                raise SingularPencilError(complex(s)) from None
        raise
    bad = ~np.isfinite(Finv).all(axis=(1, 2))
    if bad.any():
        raise SingularPencilError(complex(points[np.argmax(bad)]))
    return Finv


class ErrorSamples:
    """ROM response, error matrices and their SVDs at a set of points.

    Parameters
    ----------
    points : complex array, shape (k,)
    values : complex array, shape (k, n_u, n_u)
        Full-order transfer function at ``points``.
    layout : Layout
    data : real array, shape (n_theta,)
    reg : float
        Ridge added to the semidefinite factors on assembly.
    """

    def __init__(self, points, values, layout, data, reg=0.0):
        self.points = np.asarray(points, dtype=complex).ravel()
        self.layout = layout
        self.data = np.asarray(data, dtype=float)
        self.mats, self.factors = system_matrices(layout, self.data, reg)
        s = self.points[:, None, None]
        n = layout.n_x
        m = self.mats
        if layout.structure == "ph":
            self.JR = m["J"] - m["R"]
            F = s * np.eye(n) - (self.JR @ m["Q"])[None]
        else:
            F = s * s * m["M"] + s * m["D"] + m["K"]
        self.Finv = _batched_inv(F, self.points)
        B = m["B"]
        self.X = self.Finv @ B
        if layout.structure == "ph":
            BtQ = B.T @ m["Q"]
            self.Z = BtQ @ self.Finv
            self.Gr = BtQ @ self.X
        else:
            self.Gr = B.T @ self.X
        self.E = np.asarray(values) - self.Gr
        self.U, self.sigma, self.Vh = np.linalg.svd(self.E)

    def gradient(self, weights):
        """Return ``sum_ij weights[i, j] * grad sigma_j(E_i)``."""
        weights = np.asarray(weights, dtype=float)
        rows = np.flatnonzero(np.any(weights != 0, axis=1))
        grad = np.zeros(self.layout.size)
        if rows.size == 0:
            return grad
        U, Vh, w = self.U[rows], self.Vh[rows], weights[rows]
        V = Vh.conj().transpose(0, 2, 1) * w[:, None, :]
        Uh = U.conj().transpose(0, 2, 1)
        X = self.X[rows]
        # X is huge when the pencil is nearly singular while X v and X conj(u)
        # stay moderate, so contract with the singular vectors first
        XV = X @ V
        sl = self.layout.slices
        f = self.factors
        m = self.mats
        if self.layout.structure == "ph":
            UZ = Uh @ self.Z[rows]
            P = np.einsum("kab,kbc->ac", XV, UZ)
            Sxw = (XV @ Uh).sum(axis=0)
            Y1 = -m["Q"] @ P
            Y2 = Sxw @ m["B"].T + P @ self.JR
            grad[sl["J"]] = np.real(sutv(Y1 - Y1.T))
            grad[sl["R"]] = -np.real(utv(f["R"] @ (Y1 + Y1.T)))
            grad[sl["Q"]] = -np.real(utv(f["Q"] @ (Y2 + Y2.T)))
            WZ = np.einsum("kab,kbc->ac", V, UZ)
            grad[sl["B"]] = -np.real(ftv(WZ.T + m["Q"] @ Sxw))
        else:
            s = self.points[rows]
            XU = X @ U.conj()
            Yk = XV @ XU.transpose(0, 2, 1)
            Y = {"M": np.tensordot(s * s, Yk, axes=1), "D": np.tensordot(s, Yk, axes=1), "K": Yk.sum(axis=0)}
            for name in ("D", "K"):
                grad[sl[name]] = np.real(utv(f[name] @ (Y[name] + Y[name].T)))
            if self.layout.structure == "sso-diag":
                # chain rule through M = diag(theta_M)**2
                grad[sl["M"]] = 2.0 * self.data[sl["M"]] * np.real(np.diag(Y["M"]))
            else:
                grad[sl["M"]] = np.real(utv(f["M"] @ (Y["M"] + Y["M"].T)))
            XW = XV @ Uh + XU @ V.transpose(0, 2, 1)
            grad[sl["B"]] = -np.real(ftv(XW.sum(axis=0)))
        return grad


def _samples_args(samples):
    if not samples.has_values:
        raise ValueError("sample set has no cached full-order values; run sample_fom first")
    return samples.points, samples.values


def _errors(samples, theta, reg):
    pts, vals = _samples_args(samples)
    return ErrorSamples(pts, vals, theta.layout, theta.data, reg)


def _level_weights(sigma, gamma, top_only):
    excess = sigma - gamma
    if top_only:
        excess = excess.copy()
        excess[:, 1:] = 0.0
    return np.where(excess > 0, excess, 0.0)


def _check_gamma(gamma):
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")


def _loss_from(err, gamma, top_only=False):
    ex = _level_weights(err.sigma, gamma, top_only)
    return LossValue(float(np.sum(ex * ex) / gamma), float(gamma), int(np.count_nonzero(ex)))


def loss(gamma, samples, theta, reg=0.0):
    """Leveled least-squares value summing over all singular values."""
    _check_gamma(gamma)
    return _loss_from(_errors(samples, theta, reg), gamma)


def loss_tilde(gamma, samples, theta, reg=0.0):
    """Variant using only the spectral norm of each error sample."""
    _check_gamma(gamma)
    return _loss_from(_errors(samples, theta, reg), gamma, top_only=True)


def lsq(samples, theta, reg=0.0):
    """Sum of squared spectral norms of the sampled errors."""
    err = _errors(samples, theta, reg)
    return float(np.sum(err.sigma[:, 0] ** 2))


def grad_loss(gamma, samples, theta, reg=0.0):
    _check_gamma(gamma)
    err = _errors(samples, theta, reg)
    return err.gradient(2.0 / gamma * _level_weights(err.sigma, gamma, False))


def grad_loss_tilde(gamma, samples, theta, reg=0.0):
    _check_gamma(gamma)
    err = _errors(samples, theta, reg)
    return err.gradient(2.0 / gamma * _level_weights(err.sigma, gamma, True))


def grad_lsq(samples, theta, reg=0.0):
    err = _errors(samples, theta, reg)
    w = np.zeros_like(err.sigma)
    w[:, 0] = 2.0 * err.sigma[:, 0]
    return err.gradient(w)


def loss_and_grad(kind, layout, points, values, data, gamma=None, reg=0.0):
    """Objective value, gradient and active count in one evaluation.

    ``kind`` is ``"loss"``, ``"loss_tilde"`` or ``"lsq"``. This is the hot
    path used by the optimizer; it works on raw arrays.
    """
    err = ErrorSamples(points, values, layout, data, reg)
    if kind == "lsq":
        w = np.zeros_like(err.sigma)
        w[:, 0] = 2.0 * err.sigma[:, 0]
        return float(np.sum(err.sigma[:, 0] ** 2)), err.gradient(w), err.sigma.shape[0]
    ex = _level_weights(err.sigma, gamma, kind == "loss_tilde")
    value = float(np.sum(ex * ex) / gamma)
    return value, err.gradient(2.0 / gamma * ex), int(np.count_nonzero(ex))


def _grad_sigma(theta, s0, Gs0, j, structures, reg):
    if theta.layout.structure not in structures:
        raise ValueError(f"layout {theta.layout.structure!r} not supported here")
    Gs0 = np.atleast_2d(np.asarray(Gs0, dtype=complex))
    err = ErrorSamples([s0], Gs0[None], theta.layout, theta.data, reg)
    sig = err.sigma[0]
    if not 0 <= j < sig.size:
        raise IndexError(f"singular value index {j} out of range")
    scale = max(sig[0], 1e-300)
    gaps = np.abs(np.delete(sig, j) - sig[j]) / scale
    if sig[j] <= SIMPLE_GAP * max(scale, 1.0) or (gaps.size and gaps.min() <= SIMPLE_GAP):
        warnings.warn(
            f"singular value {j} at s={s0} is zero or not simple; gradient is one branch only",
            DegenerateSingularValueWarning,
            stacklevel=3,
        )
    w = np.zeros((1, sig.size))
    w[0, j] = 1.0
    return err.gradient(w)


def grad_sigma_ph(theta, s0, Gs0, j, reg=0.0):
    """Gradient of ``theta -> sigma_j(G(s0) - G_pH(s0, theta))`` (``j`` is 0-based)."""
    return _grad_sigma(theta, s0, Gs0, j, ("ph",), reg)


def grad_sigma_sso(theta, s0, Gs0, j, reg=0.0):
    """Gradient of ``theta -> sigma_j(G(s0) - G_sso(s0, theta))`` (``j`` is 0-based)."""
    return _grad_sigma(theta, s0, Gs0, j, ("sso", "sso-diag"), reg)
