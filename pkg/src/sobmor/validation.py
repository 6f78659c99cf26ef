"""Input checks shared by the estimators and the command line."""

import numpy as np

from .exceptions import StructureMismatchError
from .models import PHModel, SSOModel, StateSpaceModel

__all__ = ["check_model", "check_order", "check_omegas"]

_KINDS = {"ph": PHModel, "sso": SSOModel, "ss": StateSpaceModel}


def check_model(model, kind=None):
    """Return ``model`` if it is a supported model (of type ``kind`` when given)."""
    if not isinstance(model, (PHModel, SSOModel, StateSpaceModel)):
        raise TypeError(f"expected a PHModel, SSOModel or StateSpaceModel, got {type(model).__name__}")
    if kind is not None and not isinstance(model, _KINDS[kind]):
        raise StructureMismatchError(f"this method needs a {_KINDS[kind].__name__}, got {type(model).__name__}")
    return model


def check_order(r, n):
    if isinstance(r, bool) or int(r) != r or not 1 <= r <= n:
        raise ValueError(f"reduced order must be an integer in [1, {n}], got {r!r}")
    return int(r)


def check_omegas(omegas):
    w = np.atleast_1d(np.asarray(omegas, dtype=float))
    if w.ndim != 1 or not np.isfinite(w).all():
        raise ValueError("frequencies must be a finite 1-d array")
    return w
