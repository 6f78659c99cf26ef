"""Exception and warning classes shared across the package."""

import numpy as np


class StructureError(ValueError):
    """A matrix violates a structural constraint (skew, symmetric, PSD)."""


class StructureMismatchError(ValueError):
    """An operation received a model or layout of the wrong structure class."""


class SingularPencilError(np.linalg.LinAlgError):
    """The (shifted) pencil is singular at the evaluation point ``s``."""

    def __init__(self, s, msg=None):
        self.s = s
        super().__init__(msg or f"singular pencil at s = {s!r}")


class NumericalFailureError(ArithmeticError):
    """A numerical routine produced a result failing its accuracy check."""


class DegenerateSingularValueWarning(RuntimeWarning):
    """A singular value used in a gradient is zero or not simple."""


class ReductionWarning(RuntimeWarning):
    """Non-fatal issue during a reduction (regularization, non-convergence)."""
