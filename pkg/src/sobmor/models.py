"""Realizations of first-order, port-Hamiltonian and symmetric second-order systems.

Models are immutable containers of dense real matrices. Transfer functions are
evaluated pointwise by one LU solve per evaluation point; :func:`freqresp`
evaluates many points at once in chunks.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import SingularPencilError, StructureError

__all__ = [
    "StateSpaceModel",
    "PHModel",
    "SSOModel",
    "FrequencySampleSet",
    "eval_tf",
    "eval_tf_ph",
    "eval_tf_sso",
    "freqresp",
    "ph_to_state_space",
    "sso_to_first_order",
    "is_psd",
    "check_structure",
]

SYM_TOL = 1e-12
PSD_TOL = 1e-10
_CHUNK_ENTRIES = 2_000_000


def _frozen(X, name, ndim=2):
    X = np.array(X, dtype=float, ndmin=ndim)
    if X.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {X.shape}")
    X.setflags(write=False)
    return X


def _square(X, name):
    if X.shape[0] != X.shape[1]:
        raise ValueError(f"{name} must be square, got shape {X.shape}")


def is_psd(X, tol=PSD_TOL):
    """Symmetric (to ``SYM_TOL``) with smallest eigenvalue ``>= -tol * ||X||_2``."""
    X = np.asarray(X)
    scale = max(1.0, np.abs(X).max(initial=0.0))
    if np.abs(X - X.T).max(initial=0.0) > SYM_TOL * scale:
        return False
    if X.size == 0:
        return True
    ev = np.linalg.eigvalsh(X)
    return ev[0] >= -tol * max(abs(ev[0]), abs(ev[-1]))


@dataclass(frozen=True, eq=False)
class StateSpaceModel:
    """``E x' = A x + B u``, ``y = C x + D u``; ``E=None`` means identity."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray = None
    E: np.ndarray = None

    def __post_init__(self):
        set_ = object.__setattr__
        A = _frozen(self.A, "A")
        B = _frozen(self.B, "B")
        C = _frozen(self.C, "C")
        _square(A, "A")
        n = A.shape[0]
        if B.shape[0] != n or C.shape[1] != n:
            raise ValueError(f"inconsistent dimensions A{A.shape}, B{B.shape}, C{C.shape}")
        D = np.zeros((C.shape[0], B.shape[1])) if self.D is None else self.D
        D = _frozen(D, "D")
        if D.shape != (C.shape[0], B.shape[1]):
            raise ValueError(f"D has shape {D.shape}, expected {(C.shape[0], B.shape[1])}")
        E = None if self.E is None else _frozen(self.E, "E")
        if E is not None and E.shape != A.shape:
            raise ValueError(f"E has shape {E.shape}, expected {A.shape}")
        for k, v in dict(A=A, B=B, C=C, D=D, E=E).items():
            set_(self, k, v)

    @property
    def order(self):
        return self.A.shape[0]

    @property
    def n_inputs(self):
        return self.B.shape[1]

    @property
    def n_outputs(self):
        return self.C.shape[0]

    def poles(self):
        if self.E is None:
            return np.linalg.eigvals(self.A)
        from scipy.linalg import eigvals

        return eigvals(self.A, self.E)

    def explicit(self):
        """Return the equivalent model with ``E = I`` (requires invertible ``E``)."""
        if self.E is None:
            return self
        try:
            EiA = np.linalg.solve(self.E, self.A)
            EiB = np.linalg.solve(self.E, self.B)
        except np.linalg.LinAlgError:
            raise SingularPencilError(np.inf, "E is singular; keep the generalized form") from None
        return StateSpaceModel(EiA, EiB, self.C, self.D)


@dataclass(frozen=True, eq=False)
class PHModel:
    """Port-Hamiltonian system ``x' = (J - R) Q x + B u``, ``y = B^T Q x``."""

    J: np.ndarray
    R: np.ndarray
    Q: np.ndarray
    B: np.ndarray
    validate: bool = True

    def __post_init__(self):
        mats = {k: _frozen(getattr(self, k), k) for k in ("J", "R", "Q", "B")}
        n = mats["J"].shape[0]
        for k in ("J", "R", "Q"):
            if mats[k].shape != (n, n):
                raise ValueError(f"{k} has shape {mats[k].shape}, expected {(n, n)}")
        if mats["B"].shape[0] != n:
            raise ValueError(f"B has {mats['B'].shape[0]} rows, expected {n}")
        for k, v in mats.items():
            object.__setattr__(self, k, v)
        if self.validate:
            check_structure(self)

    @property
    def order(self):
        return self.J.shape[0]

    @property
    def n_inputs(self):
        return self.B.shape[1]

    n_outputs = n_inputs

    def poles(self):
        return np.linalg.eigvals((self.J - self.R) @ self.Q)


@dataclass(frozen=True, eq=False)
class SSOModel:
    """Symmetric second-order system ``M x'' + D x' + K x = B u``, ``y = B^T x``."""

    M: np.ndarray
    D: np.ndarray
    K: np.ndarray
    B: np.ndarray
    validate: bool = True

    def __post_init__(self):
        mats = {k: _frozen(getattr(self, k), k) for k in ("M", "D", "K", "B")}
        n = mats["M"].shape[0]
        for k in ("M", "D", "K"):
            if mats[k].shape != (n, n):
                raise ValueError(f"{k} has shape {mats[k].shape}, expected {(n, n)}")
        if mats["B"].shape[0] != n:
            raise ValueError(f"B has {mats['B'].shape[0]} rows, expected {n}")
        for k, v in mats.items():
            object.__setattr__(self, k, v)
        if self.validate:
            check_structure(self)

    @property
    def order(self):
        return self.M.shape[0]

    @property
    def n_inputs(self):
        return self.B.shape[1]

    n_outputs = n_inputs

    def poles(self):
        return sso_to_first_order(self).poles()


def check_structure(model):
    """Raise :class:`StructureError` unless ``model`` satisfies its structural invariants."""
    if isinstance(model, PHModel):
        J = model.J
        if np.abs(J + J.T).max(initial=0.0) > SYM_TOL * max(1.0, np.abs(J).max(initial=0.0)):
            raise StructureError("J is not skew-symmetric")
        for k in ("R", "Q"):
            if not is_psd(getattr(model, k)):
                raise StructureError(f"{k} is not symmetric positive semidefinite")
    elif isinstance(model, SSOModel):
        for k in ("M", "D", "K"):
            if not is_psd(getattr(model, k)):
                raise StructureError(f"{k} is not symmetric positive semidefinite")
    elif not isinstance(model, StateSpaceModel):
        raise TypeError(f"unsupported model type {type(model).__name__}")
    return model


def ph_to_state_space(model):
    A = (model.J - model.R) @ model.Q
    return StateSpaceModel(A, model.B, model.B.T @ model.Q)


def sso_to_first_order(model, explicit=False):
    """First-order embedding with state ``(x, x')``.

    The generalized form has ``E = diag(I, M)``, ``A = [[0, I], [-K, -D]]``,
    ``B = [0; B]`` and ``C = [B^T, 0]``. With ``explicit=True`` the second
    block row is multiplied by ``M^{-1}`` and ``E`` is dropped.
    """
    n, m = model.order, model.n_inputs
    Z, I = np.zeros((n, n)), np.eye(n)
    A = np.block([[Z, I], [-model.K, -model.D]])
    B = np.vstack([np.zeros((n, m)), model.B])
    C = np.hstack([model.B.T, np.zeros((m, n))])
    if not explicit:
        return StateSpaceModel(A, B, C, E=np.block([[I, Z], [Z, model.M]]))
    try:
        lower = np.linalg.solve(model.M, np.hstack([-model.K, -model.D, model.B]))
    except np.linalg.LinAlgError:
        raise SingularPencilError(
            np.inf, "M is singular; use the generalized form (explicit=False)"
        ) from None
    if not np.isfinite(lower).all():
        raise SingularPencilError(np.inf, "M is singular; use the generalized form (explicit=False)")
    A[n:] = lower[:, : 2 * n]
    B[n:] = lower[:, 2 * n :]
    return StateSpaceModel(A, B, C)


def _pencil_data(model):
    """Return ``(coeffs, B, C, D)`` with pencil ``sum_k s^k coeffs[k]``."""
    if isinstance(model, PHModel):
        A = (model.J - model.R) @ model.Q
        return (-A, np.eye(model.order)), model.B, model.B.T @ model.Q, None
    if isinstance(model, SSOModel):
        return (model.K, model.D, model.M), model.B, model.B.T, None
    if isinstance(model, StateSpaceModel):
        E = np.eye(model.order) if model.E is None else model.E
        D = model.D if np.any(model.D) else None
        return (-model.A, E), model.B, model.C, D
    raise TypeError(f"unsupported model type {type(model).__name__}")


def freqresp(model, s):
    """Transfer function values at the points ``s``, shape ``(len(s), n_y, n_u)``."""
    s = np.atleast_1d(np.asarray(s, dtype=complex))
    coeffs, B, C, D = _pencil_data(model)
    n = B.shape[0]
    out = np.empty((s.size, C.shape[0], B.shape[1]), dtype=complex)
    chunk = max(1, _CHUNK_ENTRIES // max(1, n * n))
    for lo in range(0, s.size, chunk):
        sc = s[lo : lo + chunk]
        F = coeffs[0][None].astype(complex)
        for k, Ck in enumerate(coeffs[1:], start=1):
            F = F + sc[:, None, None] ** k * Ck
        out[lo : lo + chunk] = C @ _solve_stack(F, B, sc)
    if D is not None:
        out += D
    return out


def _solve_stack(F, B, points):
    try:
        X = np.linalg.solve(F, B)
    except np.linalg.LinAlgError:
        for Fi, si in zip(F, points):
            try:
                np.linalg.solve(Fi, B)
            except np.linalg.LinAlgError:
                raise SingularPencilError(complex(si)) from None
        raise
    bad = ~np.isfinite(X).all(axis=(-2, -1))
    if bad.any():
        raise SingularPencilError(complex(points[np.argmax(bad)]))
    return X


def eval_tf(model, s):
    """``G(s) = C (sE - A)^{-1} B + D`` for any supported model type."""
    return freqresp(model, [s])[0]


def eval_tf_ph(model, s):
    if not isinstance(model, PHModel):
        raise TypeError("eval_tf_ph expects a PHModel")
    return eval_tf(model, s)


def eval_tf_sso(model, s):
    if not isinstance(model, SSOModel):
        raise TypeError("eval_tf_sso expects an SSOModel")
    return eval_tf(model, s)


@dataclass(frozen=True, eq=False)
class FrequencySampleSet:
    """Sample points ``s_i = i*omega_i`` with optionally cached FOM values.

    ``omegas`` are nonnegative and strictly increasing. ``values`` has shape
    ``(len(omegas), n_y, n_u)`` when present.
    """

    omegas: np.ndarray
    values: np.ndarray = None

    def __post_init__(self):
        w = _frozen(self.omegas, "omegas", ndim=1)
        if w.size == 0:
            raise ValueError("a sample set needs at least one point")
        if w[0] < 0 or not np.isfinite(w).all():
            raise ValueError("frequencies must be finite and nonnegative")
        if np.any(np.diff(w) <= 0):
            raise ValueError("frequencies must be strictly increasing")
        object.__setattr__(self, "omegas", w)
        if self.values is not None:
            v = np.array(self.values, dtype=complex)
            if v.ndim != 3 or v.shape[0] != w.size:
                raise ValueError(f"values must have shape ({w.size}, n_y, n_u), got {v.shape}")
            v.setflags(write=False)
            object.__setattr__(self, "values", v)

    @property
    def points(self):
        return 1j * self.omegas

    @property
    def has_values(self):
        return self.values is not None

    def __len__(self):
        return self.omegas.size

    def with_values(self, values):
        return FrequencySampleSet(self.omegas, values)
