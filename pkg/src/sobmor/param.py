"""Structured models from flat parameter vectors and back.

A pH model is parametrized by ``(theta_J, theta_R, theta_Q, theta_B)`` with
``J = S^T - S`` for the strictly upper triangular ``S = vtsu(theta_J)``,
``R = U_R^T U_R``, ``Q = U_Q^T U_Q`` for upper triangular factors and
``B = vtf(theta_B)``. SSO models use ``(theta_M, theta_D, theta_K, theta_B)``
with the same triangular-factor construction, or ``M = diag(theta_M)**2`` for
the diagonal-mass layout. Every real vector yields a valid structured model.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import linalg

from .exceptions import StructureError, StructureMismatchError
from .models import PSD_TOL, PHModel, SSOModel
from .reshape import ftv, sutv, utv, vtf, vtsu, vtu

__all__ = [
    "STRUCTURES",
    "Layout",
    "ParamVector",
    "assemble",
    "assemble_ph",
    "assemble_sso",
    "extract_theta",
    "extract_theta_ph",
    "extract_theta_sso",
    "upper_factor",
]

STRUCTURES = ("ph", "sso", "sso-diag")
_BLOCKS = {"ph": ("J", "R", "Q", "B"), "sso": ("M", "D", "K", "B"), "sso-diag": ("M", "D", "K", "B")}


@dataclass(frozen=True)
class Layout:
    structure: str
    n_x: int
    n_u: int

    def __post_init__(self):
        if self.structure not in STRUCTURES:
            raise ValueError(f"unknown structure {self.structure!r}; choose from {STRUCTURES}")
        if self.n_x < 1 or self.n_u < 1:
            raise ValueError("n_x and n_u must be positive")

    def block_sizes(self):
        n, m = self.n_x, self.n_u
        tri = n * (n + 1) // 2
        if self.structure == "ph":
            return dict(J=n * (n - 1) // 2, R=tri, Q=tri, B=n * m)
        return dict(M=n if self.structure == "sso-diag" else tri, D=tri, K=tri, B=n * m)

    @cached_property
    def slices(self):
        out, lo = {}, 0
        for name, size in self.block_sizes().items():
            out[name] = slice(lo, lo + size)
            lo += size
        return out

    @property
    def size(self):
        return sum(self.block_sizes().values())


@dataclass(frozen=True, eq=False)
class ParamVector:
    data: np.ndarray
    layout: Layout

    def __post_init__(self):
        data = np.array(self.data, dtype=float).ravel()
        if data.size != self.layout.size:
            raise ValueError(f"parameter vector has length {data.size}, layout needs {self.layout.size}")
        object.__setattr__(self, "data", data)

    def block(self, name):
        return self.data[self.layout.slices[name]]

    @property
    def structure(self):
        return self.layout.structure

    def __len__(self):
        return self.data.size


def _factors(layout, data):
    """Triangular factors and B for a raw parameter array."""
    sl = layout.slices
    out = {"B": vtf(data[sl["B"]], layout.n_u)}
    if layout.structure == "ph":
        out["J"] = vtsu(data[sl["J"]])
        out["R"] = vtu(data[sl["R"]])
        out["Q"] = vtu(data[sl["Q"]])
    else:
        out["M"] = np.diag(data[sl["M"]]) if layout.structure == "sso-diag" else vtu(data[sl["M"]])
        out["D"] = vtu(data[sl["D"]])
        out["K"] = vtu(data[sl["K"]])
    return out


def system_matrices(layout, data, reg=0.0):
    """Return the structured matrices (and the factors) for a raw parameter array."""
    f = _factors(layout, data)
    ridge = reg * np.eye(layout.n_x)
    if layout.structure == "ph":
        S = f["J"]
        mats = dict(J=S.T - S, R=f["R"].T @ f["R"] + ridge, Q=f["Q"].T @ f["Q"] + ridge, B=f["B"])
    else:
        mats = {k: f[k].T @ f[k] + ridge for k in ("M", "D", "K")}
        mats["B"] = f["B"]
    return mats, f


def assemble_ph(theta, reg=0.0):
    if theta.layout.structure != "ph":
        raise StructureMismatchError(f"layout {theta.layout.structure!r} is not a pH layout")
    mats, _ = system_matrices(theta.layout, theta.data, reg)
    return PHModel(**mats, validate=False)


def assemble_sso(theta, reg=0.0):
    if theta.layout.structure not in ("sso", "sso-diag"):
        raise StructureMismatchError(f"layout {theta.layout.structure!r} is not an SSO layout")
    mats, _ = system_matrices(theta.layout, theta.data, reg)
    return SSOModel(**mats, validate=False)


def assemble(theta, reg=0.0):
    """Assemble the structured model matching ``theta.layout``."""
    if theta.layout.structure == "ph":
        return assemble_ph(theta, reg)
    return assemble_sso(theta, reg)


def upper_factor(X, name="matrix"):
    """Upper triangular ``U`` with ``U^T U = X`` for symmetric PSD ``X``.

    Tries Cholesky first; semidefinite input falls back to an eigenvalue
    square root (negative eigenvalues above ``-PSD_TOL*||X||`` clipped to 0)
    followed by QR. The diagonal of ``U`` is made nonnegative.
    """
    X = np.asarray(X, dtype=float)
    X = 0.5 * (X + X.T)
    try:
        U = linalg.cholesky(X, lower=False)
    except linalg.LinAlgError:
        ev, V = linalg.eigh(X)
        if ev.size and ev[0] < -PSD_TOL * max(abs(ev[0]), abs(ev[-1])):
            raise StructureError(f"{name} is indefinite (min eigenvalue {ev[0]:.3e})") from None
        S = np.sqrt(np.clip(ev, 0.0, None))[:, None] * V.T
        U = linalg.qr(S, mode="r")[0]
    sign = np.where(np.diag(U) < 0, -1.0, 1.0)
    return sign[:, None] * U


def extract_theta_ph(model):
    if not isinstance(model, PHModel):
        raise StructureMismatchError("extract_theta_ph expects a PHModel")
    layout = Layout("ph", model.order, model.n_inputs)
    data = np.concatenate(
        [
            -sutv(model.J),
            utv(upper_factor(model.R, "R")),
            utv(upper_factor(model.Q, "Q")),
            ftv(model.B),
        ]
    )
    return ParamVector(data, layout)


def extract_theta_sso(model, structure="sso"):
    if not isinstance(model, SSOModel):
        raise StructureMismatchError("extract_theta_sso expects an SSOModel")
    if structure not in ("sso", "sso-diag"):
        raise StructureMismatchError(f"{structure!r} is not an SSO layout")
    layout = Layout(structure, model.order, model.n_inputs)
    M = model.M
    if structure == "sso-diag":
        off = M - np.diag(np.diag(M))
        if np.abs(off).max(initial=0.0) > 1e-12 * max(1.0, np.abs(M).max()):
            raise StructureError("diagonal-mass layout requires a diagonal M")
        d = np.diag(M)
        if d.min() < -PSD_TOL * max(1.0, d.max()):
            raise StructureError("M has a negative diagonal entry")
        theta_M = np.sqrt(np.clip(d, 0.0, None))
    else:
        theta_M = utv(upper_factor(M, "M"))
    data = np.concatenate(
        [theta_M, utv(upper_factor(model.D, "D")), utv(upper_factor(model.K, "K")), ftv(model.B)]
    )
    return ParamVector(data, layout)


def extract_theta(model, structure=None):
    if isinstance(model, PHModel):
        return extract_theta_ph(model)
    return extract_theta_sso(model, structure or "sso")
