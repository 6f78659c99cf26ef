"""Classical reducers: balanced truncation, its pH and second-order variants, pH-IRKA."""

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .exceptions import NumericalFailureError, ReductionWarning
from .lyapunov import lyap_solve
from .models import (
    PHModel,
    SSOModel,
    StateSpaceModel,
    freqresp,
    ph_to_state_space,
    sso_to_first_order,
)

__all__ = [
    "BalancingData",
    "IRKAInfo",
    "lyap_solve",
    "gramian_factor",
    "gramians",
    "balance",
    "balanced_truncation",
    "ph_bt",
    "ph_irka",
    "ph_project",
    "so_gramians",
    "so_bt",
]

TIE_TOL = 1e-12
CLIP_TOL = 1e-10
REG = 1e-12


@dataclass(frozen=True, eq=False)
class BalancingData:
    T: np.ndarray
    Tinv: np.ndarray
    hankel: np.ndarray


def gramian_factor(P, name="Gramian"):
    """``F`` with ``F F^T = P`` from a clipped symmetric eigendecomposition."""
    P = 0.5 * (P + P.T)
    ev, V = linalg.eigh(P)
    top = max(abs(ev[-1]), 1e-300) if ev.size else 1.0
    if ev.size and ev[0] < -CLIP_TOL * top:
        raise NumericalFailureError(f"{name} is indefinite (min eigenvalue {ev[0]:.3e})")
    ev = np.clip(ev, 0.0, None)
    return (V * np.sqrt(ev))[:, ::-1]


def gramians(ss):
    """Controllability and observability Gramians of an explicit model."""
    ss = ss.explicit()
    return lyap_solve(ss.A, ss.B @ ss.B.T), lyap_solve(ss.A.T, ss.C.T @ ss.C)


def _square_root(ss):
    P, Qo = gramians(ss)
    R, L = gramian_factor(P, "controllability Gramian"), gramian_factor(Qo, "observability Gramian")
    U, hsv, Vt = linalg.svd(L.T @ R)
    return R, L, U, hsv, Vt.T


def _check_r(r, n):
    if int(r) != r or not 1 <= r <= n:
        raise ValueError(f"r must be an integer in [1, {n}], got {r}")
    return int(r)


def _truncation_bases(R, L, U, hsv, V, r):
    n = hsv.size
    if r < n and hsv[r - 1] - hsv[r] <= TIE_TOL * hsv[0]:
        raise ValueError(
            f"Hankel singular values {r} and {r + 1} coincide ({hsv[r - 1]:.6e}); choose a different r"
        )
    if not hsv[r - 1] > 0:
        raise NumericalFailureError(f"Hankel singular value {r} is zero; the model has lower order")
    s = hsv[:r] ** -0.5
    T = (R @ V[:, :r]) * s
    Wt = (U[:, :r] * s).T @ L.T
    return T, Wt


def balance(ss):
    """Full balancing transformation; requires a minimal realization."""
    ss = ss.explicit()
    R, L, U, hsv, V = _square_root(ss)
    if not hsv[-1] > 0:
        raise NumericalFailureError("realization is not minimal; the balancing transformation is singular")
    s = hsv**-0.5
    return BalancingData((R @ V) * s, (U * s).T @ L.T, hsv)


def balanced_truncation(fom, r):
    """Square-root balanced truncation.

    Returns the reduced :class:`StateSpaceModel` and the error bound
    ``2 * sum_{j>r} hankel_j``.
    """
    ss = fom.explicit()
    r = _check_r(r, ss.order)
    R, L, U, hsv, V = _square_root(ss)
    T, Wt = _truncation_bases(R, L, U, hsv, V, r)
    rom = StateSpaceModel(Wt @ ss.A @ T, Wt @ ss.B, ss.C @ T, ss.D)
    return rom, float(2.0 * hsv[r:].sum())


def _sym(X):
    return 0.5 * (X + X.T)


def ph_bt(fom, r):
    """Effort-constraint balanced truncation of a pH model.

    ``J`` and ``R`` are truncated in balanced coordinates and ``Q`` is
    replaced by the Schur complement of its truncated block. With ``Q``
    invertible this equals ``(W_r^T Q^{-1} W_r)^{-1}``, which is evaluated
    instead to avoid forming the full balancing transformation.
    """
    if not isinstance(fom, PHModel):
        raise TypeError("ph_bt expects a PHModel")
    n = fom.order
    r = _check_r(r, n)
    R, L, U, hsv, V = _square_root(ph_to_state_space(fom))
    T, Wt = _truncation_bases(R, L, U, hsv, V, r)
    W = Wt.T
    Jr = Wt @ fom.J @ W
    Rr = Wt @ fom.R @ W
    Br = Wt @ fom.B
    cq = np.linalg.cond(fom.Q)
    if cq < 1e12:
        Qr = np.linalg.inv(Wt @ np.linalg.solve(fom.Q, W))
    else:
        if not hsv[-1] > 0:
            raise NumericalFailureError("singular Q with a non-minimal realization is not supported")
        s = hsv**-0.5
        Tf = (R @ V) * s
        Qb = Tf.T @ fom.Q @ Tf
        Q22 = Qb[r:, r:]
        if r < n and np.linalg.cond(Q22) > 1e12:
            raise NumericalFailureError("truncated block Q22 is singular")
        Qr = Qb[:r, :r]
        if r < n:
            Qr = Qr - Qb[:r, r:] @ np.linalg.solve(Q22, Qb[r:, :r])
    return PHModel(0.5 * (Jr - Jr.T), _sym(Rr), _sym(Qr), Br)


def ph_project(fom, T):
    """pH-preserving projection with ``W = Q T (T^T Q T)^{-1}``."""
    QT = fom.Q @ T
    G = _sym(T.T @ QT)
    if np.linalg.cond(G) > 1e12:
        warnings.warn("T^T Q T is nearly singular; adding 1e-12*I", ReductionWarning, stacklevel=2)
        G = G + REG * np.eye(G.shape[0])
    W = np.linalg.solve(G, QT.T).T
    Jr = W.T @ fom.J @ W
    return PHModel(0.5 * (Jr - Jr.T), _sym(W.T @ fom.R @ W), G, W.T @ fom.B)


@dataclass
class IRKAInfo:
    converged: bool
    iterations: int
    shifts: np.ndarray
    directions: np.ndarray
    history: list = field(default_factory=list)


def _real_basis(A, B, shifts, dirs):
    n = A.shape[0]
    cols = []
    for s, b in zip(shifts, dirs):
        if s.imag < 0:
            continue
        v = np.linalg.solve(s * np.eye(n) - A, B @ b)
        cols.append(v.real)
        if s.imag > 0:
            cols.append(v.imag)
    V = np.column_stack(cols)
    Qf, Rf = linalg.qr(V, mode="economic")
    return Qf


def _pair_up(vals):
    """Clean near-real values and force exact conjugate symmetry."""
    vals = np.where(np.abs(vals.imag) <= 1e-10 * np.abs(vals), vals.real + 0j, vals)
    return vals


def ph_irka(fom, r, max_fp_iters=100, fp_tol=1e-6, return_info=False):
    """pH-preserving iterative rational Krylov algorithm.

    Interpolation points start log-spaced on the positive real axis across
    the magnitude range of the full-order poles, with the dominant right
    singular vectors of ``G`` as directions. Each step projects with
    ``W = Q T (T^T Q T)^{-1}`` and mirrors the reduced poles. The returned
    model satisfies ``G(s_i) b_i = G_r(s_i) b_i`` at the points and directions
    reported in the info record.
    """
    if not isinstance(fom, PHModel):
        raise TypeError("ph_irka expects a PHModel")
    n = fom.order
    r = _check_r(r, n)
    A = (fom.J - fom.R) @ fom.Q
    lam = np.abs(np.linalg.eigvals(A))
    lam = lam[lam > 0]
    lo, hi = (lam.min(), lam.max()) if lam.size else (1.0, 1.0)
    shifts = np.geomspace(lo, hi, r).astype(complex)
    G0 = freqresp(fom, shifts)
    dirs = np.array([linalg.svd(g.real)[2][0] for g in G0]).astype(complex)

    converged = False
    history = []
    it = 0
    rom = None
    while True:
        T = _real_basis(A, fom.B, shifts, dirs)
        if T.shape[1] < r:
            raise NumericalFailureError("interpolation basis lost rank")
        rom = ph_project(fom, T)
        used_shifts, used_dirs = shifts, dirs
        if converged or it >= max_fp_iters:
            break
        Ar = (rom.J - rom.R) @ rom.Q
        ev, yl = linalg.eig(Ar, left=True, right=False)
        ev = _pair_up(ev)
        order = np.lexsort((ev.imag, ev.real))
        ev, yl = ev[order], yl[:, order]
        new_shifts = -ev
        new_dirs = (rom.B.T @ yl.conj()).T
        for i, s in enumerate(new_shifts):
            if s.imag == 0:
                new_dirs[i] = new_dirs[i].real
        change = np.linalg.norm(np.sort_complex(new_shifts) - np.sort_complex(shifts)) / np.linalg.norm(new_shifts)
        history.append(float(change))
        shifts, dirs = new_shifts, new_dirs
        it += 1
        if change < fp_tol:
            converged = True
    if not converged:
        warnings.warn(f"pH-IRKA did not converge in {max_fp_iters} iterations", ReductionWarning, stacklevel=2)
    if return_info:
        return rom, IRKAInfo(converged, it, used_shifts, used_dirs, history)
    return rom


def so_gramians(fom):
    """Position controllability Gramian ``P_p`` and velocity observability Gramian ``Q_v``.

    ``Q_v`` is the velocity block of the observability Gramian of the
    descriptor embedding with ``E = diag(I, M)``, i.e. ``M^{-1} Q_vv M^{-1}``
    in terms of the explicit embedding.
    """
    if not isinstance(fom, SSOModel):
        raise TypeError("so_gramians expects an SSOModel")
    n = fom.order
    for name in ("M", "K"):
        if np.linalg.cond(getattr(fom, name)) > 1e14:
            raise NumericalFailureError(f"{name} is singular")
    fo = sso_to_first_order(fom, explicit=True)
    P = lyap_solve(fo.A, fo.B @ fo.B.T)
    Qe = lyap_solve(fo.A.T, fo.C.T @ fo.C)
    Mi = np.linalg.inv(fom.M)
    return _sym(P[:n, :n]), _sym(Mi @ Qe[n:, n:] @ Mi)


def so_bt(fom, r):
    """Second-order balanced truncation by one-sided congruence.

    With ``P_p = R_p R_p^T`` and ``R_p^T M R_p = U S U^T``, the congruence
    ``T = R_p U_r S_r^{-1/2}`` is applied to ``M``, ``D``, ``K`` and ``B``.
    """
    if not isinstance(fom, SSOModel):
        raise TypeError("so_bt expects an SSOModel")
    n = fom.order
    r = _check_r(r, n)
    for name in ("M", "K"):
        if np.linalg.cond(getattr(fom, name)) > 1e14:
            raise NumericalFailureError(f"{name} is singular")
    fo = sso_to_first_order(fom, explicit=True)
    P = lyap_solve(fo.A, fo.B @ fo.B.T)
    Rp = gramian_factor(P[:n, :n], "position Gramian")
    ev, U = linalg.eigh(_sym(Rp.T @ fom.M @ Rp))
    ev, U = ev[::-1], U[:, ::-1]
    if not ev[r - 1] > 0:
        raise NumericalFailureError(f"position Gramian has rank below {r}")
    T = (Rp @ U[:, :r]) * ev[:r] ** -0.5
    return SSOModel(_sym(T.T @ fom.M @ T), _sym(T.T @ fom.D @ T), _sym(T.T @ fom.K @ T), T.T @ fom.B)
