"""Dense Lyapunov solver with a stability precheck and a residual check."""

import numpy as np
from scipy import linalg

from .exceptions import NumericalFailureError

__all__ = ["lyap_solve", "RESIDUAL_TOL"]

RESIDUAL_TOL = 1e-8


def lyap_solve(A, W):
    """Solve ``A X + X A^T + W = 0`` for symmetric ``X``.

    ``A`` must be Hurwitz. Uses the Bartels-Stewart algorithm (real Schur
    form of ``A``) and verifies
    ``||A X + X A^T + W||_F <= RESIDUAL_TOL * (||A|| ||X|| + ||W||)``.
    """
    A = np.asarray(A, dtype=float)
    W = np.asarray(W, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or W.shape != A.shape:
        raise ValueError(f"A and W must be square of equal size, got {A.shape} and {W.shape}")
    if A.size == 0:
        return np.zeros_like(A)
    abscissa = np.linalg.eigvals(A).real.max()
    if not abscissa < 0:
        raise ValueError(f"A is not Hurwitz (spectral abscissa {abscissa:.3e})")
    W = 0.5 * (W + W.T)
    X = linalg.solve_continuous_lyapunov(A, -W)
    X = 0.5 * (X + X.T)
    res = np.linalg.norm(A @ X + X @ A.T + W)
    scale = np.linalg.norm(A) * np.linalg.norm(X) + np.linalg.norm(W)
    if not np.isfinite(res) or res > RESIDUAL_TOL * scale:
        raise NumericalFailureError(f"Lyapunov residual {res:.3e} exceeds tolerance (scale {scale:.3e})")
    return X
