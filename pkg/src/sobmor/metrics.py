"""Frequency grids, full-order sampling and error norms."""

import csv
import weakref
from dataclasses import dataclass

import numpy as np

from .lyapunov import lyap_solve
from .models import (
    FrequencySampleSet,
    PHModel,
    SSOModel,
    StateSpaceModel,
    freqresp,
    ph_to_state_space,
    sso_to_first_order,
)

__all__ = [
    "GridSpec",
    "make_grid",
    "sample_fom",
    "solve_count",
    "clear_sample_cache",
    "seed_sample_cache",
    "error_curve",
    "hinf_estimate",
    "hinf_error",
    "h2_norm",
    "h2_error",
    "to_state_space",
    "write_error_curve",
]

PH_EXTRAS = (0.0, 1e-8, 1e-7, 1e-6, 1e4, 1e5, 1e6)
SSO_EXTRAS = (0.0, 1e-8, 1e-7, 1e-6, 1e-4, 1e4, 1e5, 1e6)
_DEDUP_RTOL = 1e-12
_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0
# a bracket that starts at 0 shrinks geometrically but never reaches rtol
_MAX_GOLDEN = 200


@dataclass(frozen=True)
class GridSpec:
    """``count`` log-spaced frequencies on ``[lo, hi]`` plus ``extras``."""

    lo: float = 1e-4
    hi: float = 1e3
    count: int = 800
    extras: tuple = PH_EXTRAS

    def __post_init__(self):
        if not (0 < self.lo <= self.hi) or not np.isfinite(self.hi):
            raise ValueError("need 0 < lo <= hi < inf")
        if int(self.count) != self.count or self.count < 2:
            raise ValueError("count must be an integer >= 2")
        extras = tuple(float(e) for e in self.extras)
        if any(not (e >= 0 and np.isfinite(e)) for e in extras):
            raise ValueError("extra frequencies must be finite and nonnegative")
        object.__setattr__(self, "extras", extras)
        object.__setattr__(self, "count", int(self.count))

    @classmethod
    def ph_default(cls):
        return cls(1e-4, 1e3, 800, PH_EXTRAS)

    @classmethod
    def sso_default(cls):
        return cls(1e-4, 1e3, 300, SSO_EXTRAS)

    def densified(self, factor=10):
        """Same range and extras with ``factor`` times as many log points."""
        return GridSpec(self.lo, self.hi, self.count * int(factor), self.extras)


def make_grid(spec):
    w = np.concatenate([np.geomspace(spec.lo, spec.hi, spec.count), spec.extras])
    w = np.sort(w)
    keep = np.ones(w.size, dtype=bool)
    keep[1:] = np.diff(w) > _DEDUP_RTOL * np.maximum(np.abs(w[1:]), 1e-300)
    return FrequencySampleSet(w[keep])


_cache = weakref.WeakKeyDictionary()
_solves = [0]


def solve_count():
    """Number of full-order transfer function evaluations performed so far."""
    return _solves[0]


def clear_sample_cache():
    _cache.clear()


def seed_sample_cache(fom, samples):
    """Register previously computed samples of ``fom`` (e.g. loaded from disk)."""
    if not samples.has_values:
        raise ValueError("sample set has no values")
    vals = np.array(samples.values)
    vals.setflags(write=False)
    _cache.setdefault(fom, {})[samples.omegas.tobytes()] = vals


def sample_fom(fom, grid):
    """Return ``grid`` with the full-order values ``G(i*omega)`` attached.

    Values are cached per model object and frequency vector, so repeated
    calls on the same pair perform no solves.
    """
    key = grid.omegas.tobytes()
    per_model = _cache.setdefault(fom, {})
    vals = per_model.get(key)
    if vals is None:
        vals = freqresp(fom, grid.points)
        _solves[0] += grid.omegas.size
        vals.setflags(write=False)
        per_model[key] = vals
    return grid.with_values(vals)


def _sigma_max(E):
    return np.linalg.svd(E, compute_uv=False)[..., 0]


def error_curve(fom, rom, omegas, fom_values=None):
    """Largest singular value of ``G(i*w) - G_r(i*w)`` for each ``w``."""
    s = 1j * np.asarray(omegas, dtype=float)
    G = freqresp(fom, s) if fom_values is None else fom_values
    return _sigma_max(G - freqresp(rom, s))


def _eval(err, w):
    return float(np.asarray(err(np.atleast_1d(float(w))), dtype=float).ravel()[0])


def hinf_estimate(err, grid, rtol=1e-6):
    """Grid maximum of ``err`` refined by golden-section search.

    ``err`` maps an array of frequencies to the error norms there. The search
    runs on the interval spanned by the neighbours of the grid maximizer, in
    log scale when the interval excludes 0. Returns ``(value, omega)``.
    """
    w = grid.omegas if isinstance(grid, FrequencySampleSet) else np.asarray(grid, dtype=float)
    vals = np.asarray(err(w), dtype=float)
    k = int(np.argmax(vals))
    best, w_best = float(vals[k]), float(w[k])
    lo, hi = w[max(k - 1, 0)], w[min(k + 1, w.size - 1)]
    if hi <= lo:
        return best, w_best
    log = lo > 0
    fwd = np.log if log else (lambda x: x)
    inv = np.exp if log else (lambda x: x)

    def f(t):
        return _eval(err, inv(t))

    a, b = fwd(lo), fwd(hi)
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(_MAX_GOLDEN):
        if inv(b) - inv(a) <= rtol * inv(b):
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    for t, ft in ((c, fc), (d, fd)):
        if ft > best:
            best, w_best = ft, float(inv(t))
    return best, w_best


def hinf_error(fom, rom, grid, fom_values=None):
    """Refined grid estimate of the H-infinity error between two models."""
    w = grid.omegas if isinstance(grid, FrequencySampleSet) else np.asarray(grid, dtype=float)
    if fom_values is None and isinstance(grid, FrequencySampleSet) and grid.has_values:
        fom_values = grid.values

    def err(omegas):
        omegas = np.asarray(omegas, dtype=float)
        if fom_values is not None and omegas.shape == w.shape and np.array_equal(omegas, w):
            return error_curve(fom, rom, omegas, fom_values)
        return error_curve(fom, rom, omegas)

    return hinf_estimate(err, w)


def to_state_space(model):
    """Explicit first-order realization of any supported model."""
    if isinstance(model, PHModel):
        return ph_to_state_space(model)
    if isinstance(model, SSOModel):
        return sso_to_first_order(model, explicit=True)
    if isinstance(model, StateSpaceModel):
        return model.explicit()
    raise TypeError(f"unsupported model type {type(model).__name__}")


def _stacked_error(fom, rom):
    a, b = to_state_space(fom), to_state_space(rom)
    if a.B.shape[1] != b.B.shape[1] or a.C.shape[0] != b.C.shape[0]:
        raise ValueError("models have different input/output dimensions")
    if not np.allclose(a.D, b.D, rtol=0, atol=1e-14 * max(1.0, np.abs(a.D).max(initial=0))):
        raise ValueError("feedthrough terms differ, so the H2 error is infinite")
    n1, n2 = a.order, b.order
    A = np.zeros((n1 + n2, n1 + n2))
    A[:n1, :n1] = a.A
    A[n1:, n1:] = b.A
    return A, np.vstack([a.B, b.B]), np.hstack([a.C, -b.C])


def _h2(A, B, C):
    P = lyap_solve(A, B @ B.T)
    return float(np.sqrt(max(np.trace(C @ P @ C.T), 0.0)))


def h2_norm(model):
    ss = to_state_space(model)
    if np.any(ss.D):
        raise ValueError("nonzero feedthrough, so the H2 norm is infinite")
    return _h2(ss.A, ss.B, ss.C)


def h2_error(fom, rom):
    """H2 norm of ``G - G_r`` from the controllability Gramian of the stacked error system."""
    return _h2(*_stacked_error(fom, rom))


def write_error_curve(path, omegas, errors):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["omega", "sigma_max_error"])
        for w, e in zip(omegas, errors):
            out.writerow([f"{w:.17g}", f"{e:.17g}"])
