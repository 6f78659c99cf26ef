"""Estimator-style wrappers around the reducers.

``fit`` takes a full-order model and stores the reduced model in ``rom_``;
``predict`` evaluates the reduced transfer function at real frequencies.
Hyperparameters follow the scikit-learn conventions, so ``get_params`` and
``clone`` work as usual.
"""

import time

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .baselines import balanced_truncation, ph_bt, ph_irka, so_bt
from .driver import GammaSchedule, sobmor_reduce
from .metrics import GridSpec, to_state_space
from .models import freqresp
from .optimizer import OptimOptions
from .validation import check_model, check_omegas, check_order

__all__ = [
    "Reducer",
    "SOBMOR",
    "BalancedTruncation",
    "PHBalancedTruncation",
    "PHIRKA",
    "SOBalancedTruncation",
    "METHODS",
    "make_reducer",
]


class Reducer(BaseEstimator):
    def fit(self, fom, y=None):
        t0 = time.perf_counter()
        self._reduce(fom)
        self.runtime_ = time.perf_counter() - t0
        return self

    def predict(self, omegas):
        check_is_fitted(self, "rom_")
        return freqresp(self.rom_, 1j * check_omegas(omegas))


class BalancedTruncation(Reducer):
    def __init__(self, r=1):
        self.r = r

    def _reduce(self, fom):
        ss = to_state_space(check_model(fom))
        self.rom_, self.bound_ = balanced_truncation(ss, check_order(self.r, ss.order))


class PHBalancedTruncation(Reducer):
    def __init__(self, r=1):
        self.r = r

    def _reduce(self, fom):
        check_model(fom, "ph")
        self.rom_ = ph_bt(fom, check_order(self.r, fom.order))


class PHIRKA(Reducer):
    def __init__(self, r=1, max_fp_iters=100, fp_tol=1e-6):
        self.r = r
        self.max_fp_iters = max_fp_iters
        self.fp_tol = fp_tol

    def _reduce(self, fom):
        check_model(fom, "ph")
        r = check_order(self.r, fom.order)
        self.rom_, self.info_ = ph_irka(fom, r, self.max_fp_iters, self.fp_tol, return_info=True)


class SOBalancedTruncation(Reducer):
    def __init__(self, r=1):
        self.r = r

    def _reduce(self, fom):
        check_model(fom, "sso")
        self.rom_ = so_bt(fom, check_order(self.r, fom.order))


class SOBMOR(Reducer):
    """Structured optimization-based reduction.

    ``schedule`` is ``"fixed"`` (300 levels from 1e-1 to 1e-14), ``"bisection"``
    or a :class:`GammaSchedule`. ``grid`` is a :class:`GridSpec`; ``None``
    picks the default for the structure.
    """

    def __init__(
        self,
        r=1,
        structure=None,
        init="greedy",
        schedule="fixed",
        grid=None,
        seed=0,
        max_iters=2000,
        grad_tol=1e-10,
        kind="loss",
        verify_factor=10,
        compute_h2=True,
    ):
        self.r = r
        self.structure = structure
        self.init = init
        self.schedule = schedule
        self.grid = grid
        self.seed = seed
        self.max_iters = max_iters
        self.grad_tol = grad_tol
        self.kind = kind
        self.verify_factor = verify_factor
        self.compute_h2 = compute_h2

    def _schedule(self):
        if isinstance(self.schedule, GammaSchedule):
            return self.schedule
        if self.schedule == "fixed":
            return GammaSchedule.fixed()
        if self.schedule == "bisection":
            return GammaSchedule.bisection()
        raise ValueError(f"unknown schedule {self.schedule!r}")

    def _reduce(self, fom):
        check_model(fom)
        r = check_order(self.r, fom.order)
        if self.grid is not None and not isinstance(self.grid, GridSpec):
            raise TypeError("grid must be a GridSpec")
        self.report_ = sobmor_reduce(
            fom,
            r,
            structure=self.structure,
            grid=self.grid,
            schedule=self._schedule(),
            init=self.init,
            opts=OptimOptions(max_iters=self.max_iters, grad_tol=self.grad_tol),
            seed=self.seed,
            kind=self.kind,
            verify_factor=self.verify_factor,
            compute_h2=self.compute_h2,
        )
        self.rom_ = self.report_.rom
        self.theta_ = self.report_.theta


METHODS = {
    "sobmor": SOBMOR,
    "bt": BalancedTruncation,
    "ph-bt": PHBalancedTruncation,
    "ph-irka": PHIRKA,
    "so-bt": SOBalancedTruncation,
}


def make_reducer(method, **params):
    try:
        cls = METHODS[method]
    except KeyError:
        raise ValueError(f"unknown method {method!r}; choose from {sorted(METHODS)}") from None
    return cls(**params)
