"""Structured reduction by leveled least-squares optimization.

A reduction has three steps: an initial reduced model (greedy interpolation,
random, or a least-squares fit), a sequence of cut-off levels ``gamma``, and
one warm-started BFGS run per level. Levels come either from a fixed
decreasing list, which stops at the first level whose optimal loss stays
positive, or from bisection on the achievable level.
"""

import time
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import linalg

from .baselines import ph_project
from .exceptions import ReductionWarning, SingularPencilError
from .metrics import GridSpec, h2_error, hinf_error, make_grid, sample_fom
from .models import PHModel, SSOModel, StateSpaceModel, freqresp
from .objective import loss_and_grad
from .optimizer import OptimOptions, minimize
from .param import Layout, ParamVector, assemble, extract_theta

__all__ = [
    "GammaSchedule",
    "LevelRecord",
    "ReductionReport",
    "INIT_METHODS",
    "default_structure",
    "init_greedy",
    "init_random",
    "init_lsq",
    "run_fixed_sequence",
    "run_bisection",
    "sobmor_reduce",
]

INIT_METHODS = ("greedy", "random", "lsq")
FIXED, BISECTION = "fixed-sequence", "bisection"
_MAX_BISECTION_LEVELS = 200


@dataclass(frozen=True)
class GammaSchedule:
    """Cut-off levels for the reduction loop.

    ``mode="fixed-sequence"`` uses ``gammas`` (strictly decreasing, positive)
    with termination tolerance ``epsilon``. ``mode="bisection"`` starts from
    the upper bound ``gamma_upper`` with bisection tolerance ``eps1`` and
    termination tolerance ``eps2``.
    """

    mode: str = FIXED
    gammas: tuple = ()
    epsilon: float = 1e-14
    gamma_upper: float = None
    eps1: float = 1e-3
    eps2: float = 1e-14

    def __post_init__(self):
        if self.mode not in (FIXED, BISECTION):
            raise ValueError(f"unknown schedule mode {self.mode!r}")
        g = tuple(float(x) for x in self.gammas)
        object.__setattr__(self, "gammas", g)
        if self.mode == FIXED:
            if not g:
                raise ValueError("a fixed schedule needs at least one level")
            if g[-1] <= 0 or any(a <= b for a, b in zip(g, g[1:])):
                raise ValueError("levels must be positive and strictly decreasing")
            if not self.epsilon > 0:
                raise ValueError("epsilon must be positive")
        else:
            if self.gamma_upper is not None and not self.gamma_upper > 0:
                raise ValueError("gamma_upper must be positive")
            if not (self.eps1 > 0 and self.eps2 > 0):
                raise ValueError("bisection tolerances must be positive")

    @classmethod
    def fixed(cls, hi=1e-1, lo=1e-14, count=300, epsilon=1e-14):
        """``count`` log-spaced levels from ``hi`` down to ``lo``."""
        return cls(FIXED, tuple(np.geomspace(hi, lo, count)), epsilon)

    @classmethod
    def bisection(cls, gamma_upper=None, eps1=1e-3, eps2=1e-14):
        return cls(BISECTION, (), gamma_upper=gamma_upper, eps1=eps1, eps2=eps2)

    def scaled(self, factor):
        if self.mode == FIXED:
            return replace(self, gammas=tuple(g * factor for g in self.gammas))
        return replace(self, gamma_upper=None if self.gamma_upper is None else self.gamma_upper * factor)


@dataclass(frozen=True)
class LevelRecord:
    gamma: float
    loss: float
    iterations: int
    seconds: float
    termination: str
    active: int


@dataclass
class ReductionReport:
    levels: list
    theta: ParamVector
    mode: str
    init_method: str = "given"
    rom: object = None
    exhausted: bool = False
    first_level_failed: bool = False
    grid_max_error: float = None
    hinf_estimate: float = None
    hinf_omega: float = None
    h2_error: float = None
    runtime_seconds: float = 0.0
    notes: list = field(default_factory=list)


def default_structure(model):
    if isinstance(model, PHModel):
        return "ph"
    if isinstance(model, SSOModel):
        return "sso"
    raise ValueError("pass structure= explicitly for unstructured models")


def _fg(kind, layout, points, values, gamma=None, reg=0.0):
    def fg(x):
        try:
            f, g, _ = loss_and_grad(kind, layout, points, values, x, gamma, reg)
        except SingularPencilError:
            return np.inf, np.full(x.size, np.nan)
        return f, g

    return fg


def _samples(samples):
    if not samples.has_values:
        raise ValueError("sample set has no cached full-order values; run sample_fom first")
    return samples.points, samples.values


def _orth_extend(T, V, tol=1e-10):
    """Columns of ``V`` orthonormalized against ``T`` (twice), dropping dependent ones."""
    scale = max(np.linalg.norm(V, axis=0).max(initial=0.0), 1e-300)
    for _ in range(2):
        if T.shape[1]:
            V = V - T @ (T.T @ V)
    U, s, _ = linalg.svd(V, full_matrices=False)
    return U[:, s > tol * scale], s[s > tol * scale]


def _modal_sso(M, D, K, B):
    """Congruence making ``M = I`` and ``K`` diagonal; leaves the transfer function unchanged."""
    lam, V = linalg.eigh(K, M)
    return np.eye(M.shape[0]), V.T @ D @ V, np.diag(lam), V.T @ B


def init_greedy(samples, fom, r, structure=None):
    """Greedy interpolatory start.

    Repeatedly adds the real and imaginary parts of the state response
    ``(s* E - A)^{-1} B`` at the grid point ``s*`` of largest sampled error to
    an orthonormal basis, then projects structure-preservingly (``W = Q T
    (T^T Q T)^{-1}`` for pH, congruence for SSO). If a block overflows ``r``
    columns, its dominant ``r - k`` directions are kept. When every sample
    point has been used the basis is completed from the orthogonal complement.
    """
    structure = structure or default_structure(fom)
    pts, vals = _samples(samples)
    if structure == "ph":
        if not isinstance(fom, PHModel):
            raise ValueError("greedy pH initialization needs a PHModel; use init='random' or 'lsq'")
        A = (fom.J - fom.R) @ fom.Q
        n = A.shape[0]

        def state(s):
            return np.linalg.solve(s * np.eye(n) - A, fom.B)

        def project(T):
            return ph_project(fom, T)

    elif structure in ("sso", "sso-diag"):
        if not isinstance(fom, SSOModel):
            raise ValueError("greedy SSO initialization needs an SSOModel; use init='random' or 'lsq'")
        n = fom.order

        def state(s):
            return np.linalg.solve(s * s * fom.M + s * fom.D + fom.K, fom.B)

        def project(T):
            mats = [T.T @ X @ T for X in (fom.M, fom.D, fom.K)] + [T.T @ fom.B]
            return SSOModel(*_modal_sso(*mats), validate=False)

    else:
        raise ValueError(f"unknown structure {structure!r}")
    r = int(r)
    if not 1 <= r <= n:
        raise ValueError(f"r must lie in [1, {n}]")
    T = np.zeros((n, 0))
    used = np.zeros(len(pts), dtype=bool)
    rom = None
    while T.shape[1] < r:
        Gr = 0.0 if rom is None else freqresp(rom, pts)
        err = np.linalg.svd(vals - Gr, compute_uv=False)[:, 0]
        err[used] = -np.inf
        if not np.isfinite(err).any():
            # the sampled responses span fewer than r directions numerically;
            # fill up with the leading directions of the orthogonal complement
            T = np.hstack([T, _orth_extend(T, np.eye(n))[0][:, : r - T.shape[1]]])
            rom = project(T)
            break
        k = int(np.argmax(err))
        used[k] = True
        X = state(pts[k])
        Vnew, _ = _orth_extend(T, np.hstack([X.real, X.imag]))
        Vnew = Vnew[:, : r - T.shape[1]]
        if Vnew.shape[1] == 0:
            continue
        T = np.hstack([T, Vnew])
        rom = project(T)
    return extract_theta(rom, structure)


def init_random(structure, n_x, n_u, seed=None, samples=None):
    """Standard-normal parameters, with ``B`` rescaled to the sampled magnitude.

    With ``samples`` given, ``theta_B`` is scaled so that ``||G_r(i w)||``
    equals ``||G(i w)||`` at the median sample frequency (the transfer
    function is quadratic in ``B``).
    """
    layout = Layout(structure, int(n_x), int(n_u))
    rng = np.random.default_rng(seed)
    data = rng.standard_normal(layout.size)
    if samples is not None and samples.has_values:
        k = len(samples) // 2
        target = np.linalg.norm(samples.values[k], 2)
        try:
            rom = assemble(ParamVector(data, layout))
            cur = np.linalg.norm(freqresp(rom, samples.points[k : k + 1])[0], 2)
        except SingularPencilError:
            cur = 0.0
        if cur > 0 and target > 0:
            data[layout.slices["B"]] *= np.sqrt(target / cur)
    return ParamVector(data, layout)


def init_lsq(samples, structure, r, seed=None, opts=None, reg=0.0):
    """Least-squares fit of the sampled spectral norms from a random start."""
    pts, vals = _samples(samples)
    theta0 = init_random(structure, r, vals.shape[2], seed, samples)
    fg = _fg("lsq", theta0.layout, pts, vals, reg=reg)
    return minimize(None, None, theta0, opts or OptimOptions(), fg=fg).theta_min


def _level(points, values, theta, gamma, opts, kind, reg):
    t0 = time.perf_counter()
    fg = _fg(kind, theta.layout, points, values, gamma, reg)
    res = minimize(None, None, theta, opts, fg=fg)
    _, _, active = loss_and_grad(kind, theta.layout, points, values, res.theta_min.data, gamma, reg)
    rec = LevelRecord(
        float(gamma), res.f_min, res.iterations, time.perf_counter() - t0, res.termination.value, active
    )
    return res.theta_min, rec


def run_fixed_sequence(samples, theta0, schedule, opts=None, kind="loss", reg=0.0, callback=None):
    """Decreasing levels until one cannot be met; returns the last met level's minimizer.

    If the first level already fails the initial parameters are returned and
    ``first_level_failed`` is set.
    """
    if schedule.mode != FIXED:
        raise ValueError("run_fixed_sequence needs a fixed-sequence schedule")
    pts, vals = _samples(samples)
    opts = opts or OptimOptions()
    theta = theta0
    levels = []
    exhausted = True
    for gamma in schedule.gammas:
        theta_new, rec = _level(pts, vals, theta, gamma, opts, kind, reg)
        levels.append(rec)
        if callback is not None:
            callback(rec)
        if rec.loss > schedule.epsilon:
            exhausted = False
            break
        theta = theta_new
    report = ReductionReport(levels, theta, FIXED, exhausted=exhausted)
    report.first_level_failed = not exhausted and len(levels) == 1
    if report.first_level_failed:
        report.notes.append("first level failed; returning the initial parameters")
    if exhausted:
        report.notes.append("schedule exhausted with every level met")
    return report


def run_bisection(samples, theta0, schedule, opts=None, kind="loss", reg=0.0, callback=None):
    """Bisection on the achievable level, warm-starting every solve.

    Stops when ``(gu - gl) / (gu + gl) <= eps1``. While no level has failed
    (``gl = 0``) that ratio is 1, so the run also stops once ``gu`` has
    shrunk to ``eps1`` times its initial value.
    """
    if schedule.mode != BISECTION:
        raise ValueError("run_bisection needs a bisection schedule")
    if schedule.gamma_upper is None or not schedule.gamma_upper > 0:
        raise ValueError("bisection needs a positive gamma_upper")
    pts, vals = _samples(samples)
    opts = opts or OptimOptions()
    gu0 = gu = float(schedule.gamma_upper)
    gl = 0.0
    theta = theta0
    levels = []
    while (gu - gl) / (gu + gl) > schedule.eps1 and len(levels) < _MAX_BISECTION_LEVELS:
        if gl == 0.0 and gu <= schedule.eps1 * gu0:
            break
        gamma = 0.5 * (gu + gl)
        theta, rec = _level(pts, vals, theta, gamma, opts, kind, reg)
        levels.append(rec)
        if callback is not None:
            callback(rec)
        if rec.loss > schedule.eps2:
            gl = gamma
        else:
            gu = gamma
    report = ReductionReport(levels, theta, BISECTION)
    report.notes.append(f"final bracket [{gl:.17g}, {gu:.17g}]")
    return report


def _check_stable(fom):
    if fom.order > 2000:
        return
    try:
        ab = np.max(fom.poles().real)
    except (np.linalg.LinAlgError, ValueError):
        return
    if not ab < 0:
        warnings.warn(
            f"full-order model is not asymptotically stable (spectral abscissa {ab:.3e})",
            ReductionWarning,
            stacklevel=3,
        )


def sobmor_reduce(
    fom,
    r,
    structure=None,
    grid=None,
    schedule=None,
    init="greedy",
    opts=None,
    seed=0,
    kind="loss",
    reg=0.0,
    verify_factor=10,
    compute_h2=True,
    callback=None,
):
    """Reduce ``fom`` to a structured model of order ``r``.

    Samples the full-order model once on ``grid``, builds the start with
    ``init``, runs the level loop given by ``schedule`` and attaches the
    H-infinity estimate on a ``verify_factor`` times denser grid and,
    optionally, the H2 error.
    """
    t0 = time.perf_counter()
    if not isinstance(fom, (PHModel, SSOModel, StateSpaceModel)):
        raise TypeError(f"unsupported model type {type(fom).__name__}")
    structure = structure or default_structure(fom)
    if init not in INIT_METHODS:
        raise ValueError(f"unknown init method {init!r}; choose from {INIT_METHODS}")
    _check_stable(fom)
    if grid is None:
        grid = GridSpec.ph_default() if structure == "ph" else GridSpec.sso_default()
    samples = sample_fom(fom, make_grid(grid))
    n_u = samples.values.shape[2]
    opts = opts or OptimOptions()
    if init == "greedy":
        theta0 = init_greedy(samples, fom, r, structure)
    elif init == "random":
        theta0 = init_random(structure, r, n_u, seed, samples)
    else:
        theta0 = init_lsq(samples, structure, r, seed, opts, reg)

    e0 = _grid_max(samples, theta0, reg)
    notes = []
    if schedule is None:
        schedule = GammaSchedule.fixed()
    if schedule.mode == FIXED:
        if schedule.gammas[0] < e0 and e0 > 1e-1:
            schedule = schedule.scaled(e0 / schedule.gammas[0])
            notes.append(f"levels rescaled by initial error {e0:.6g}")
        report = run_fixed_sequence(samples, theta0, schedule, opts, kind, reg, callback)
    else:
        if schedule.gamma_upper is None:
            schedule = replace(schedule, gamma_upper=e0)
        report = run_bisection(samples, theta0, schedule, opts, kind, reg, callback)
    report.notes = notes + report.notes
    report.init_method = init
    report.rom = assemble(report.theta, reg)
    report.grid_max_error = _grid_max(samples, report.theta, reg)
    if verify_factor:
        dense = sample_fom(fom, make_grid(grid.densified(verify_factor)))
        report.hinf_estimate, report.hinf_omega = hinf_error(fom, report.rom, dense)
    if compute_h2:
        try:
            report.h2_error = h2_error(fom, report.rom)
        except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            report.notes.append(f"H2 error unavailable: {exc}")
    report.runtime_seconds = time.perf_counter() - t0
    return report


def _grid_max(samples, theta, reg=0.0):
    rom = assemble(theta, reg)
    return float(np.linalg.svd(samples.values - freqresp(rom, samples.points), compute_uv=False)[:, 0].max())
