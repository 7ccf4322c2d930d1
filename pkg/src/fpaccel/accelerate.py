"""Picard, Anderson(m), EDIIS(m) and smoothing Anderson iteration engines.

All engines share the same bookkeeping: a sliding window of
``(u_j, G_j, F_j[, mu_j])`` tuples ordered oldest to newest, trimmed to the
current depth ``m_k + 1``. The stopping test always uses the residual of the
original (nonsmooth) map relative to ``||F(u_0)||``.
"""

import math
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .composite_map import eval_G
from .errors import (
    EvaluationError,
    InsufficientDataError,
    InvalidInputError,
    InvalidParameterError,
    InvalidScheduleError,
)
from .numkernel import mid, solve_anderson_coeffs, solve_ediis_coeffs
from .smoothing import SmoothedMapHandle, eval_smoothed_G, get_kernel

VARIANTS = ("anderson", "ediis")
METHODS = ("picard", "anderson", "ediis", "s-anderson")

CONVERGED = "converged"
MAX_ITER = "max-iter"
ABORTED = "aborted"


@dataclass(frozen=True)
class DepthPolicy:
    """Fixed depth ``m`` or the residual-driven dynamic rule with bounds ``m1 <= m2``."""

    m: int = 0
    m1: Optional[int] = None
    m2: Optional[int] = None

    def __post_init__(self):
        if self.m1 is None and self.m2 is None:
            if self.m < 0:
                raise InvalidParameterError(f"depth must be >= 0, got {self.m}")
        elif self.m1 is None or self.m2 is None or not (1 <= self.m1 <= self.m2):
            raise InvalidParameterError(
                f"dynamic depth needs 1 <= m1 <= m2, got m1={self.m1}, m2={self.m2}"
            )

    @classmethod
    def fixed(cls, m):
        return cls(m=m)

    @classmethod
    def dynamic(cls, m1, m2):
        return cls(m1=m1, m2=m2)

    @property
    def is_dynamic(self):
        return self.m1 is not None

    @property
    def max_depth(self):
        return self.m2 if self.is_dynamic else self.m

    def label(self):
        return f"m{self.m1}-{self.m2}" if self.is_dynamic else f"m{self.m}"


def depth_next(policy, k, res_norm):
    """Depth ``m_k`` used at iteration ``k``.

    Fixed policies give ``min(m, k)``. Dynamic ones give
    ``median(m1, ceil(-log10 ||F_k||), m2)`` capped at ``k``; a zero residual
    maps to ``m2``.
    """
    if not policy.is_dynamic:
        return min(policy.m, k)
    if k < 1:
        raise InvalidInputError("dynamic depth is defined for k >= 1")
    if res_norm < 0:
        raise InvalidInputError("res_norm must be nonnegative")
    if res_norm == 0.0:
        return min(policy.m2, k)
    m_tilde = math.ceil(-math.log10(res_norm))
    return min(mid(policy.m1, m_tilde, policy.m2), k)


@dataclass(frozen=True)
class StoppingRule:
    rel_residual_tol: float = 1e-14
    max_iter: int = 7000

    def __post_init__(self):
        if not self.rel_residual_tol > 0:
            raise InvalidParameterError("rel_residual_tol must be positive")
        if self.max_iter < 1:
            raise InvalidParameterError("max_iter must be >= 1")


@dataclass(frozen=True)
class MuSchedule:
    """Parameters of the smoothing-parameter update.

    ``mu_0 = gamma ||F_0||^2``; afterwards ``mu`` is kept when the true
    residual shrank by ``sigma1`` and otherwise becomes
    ``max(epsilon, sigma2 * mu)``. ``gamma=None`` means ``1/n``.
    """

    epsilon: float = 1e-10
    gamma: Optional[float] = None
    sigma1: float = 0.6
    sigma2: float = 0.6

    def __post_init__(self):
        if not self.epsilon > 0:
            raise InvalidParameterError("epsilon must be positive")
        if self.gamma is not None and not self.gamma > 0:
            raise InvalidParameterError("gamma must be positive")
        for name in ("sigma1", "sigma2"):
            s = getattr(self, name)
            if not 0.0 < s < 1.0:
                raise InvalidParameterError(f"{name} must lie in (0, 1), got {s}")

    def initial_mu(self, res0_norm, n):
        gamma = self.gamma if self.gamma is not None else 1.0 / n
        # Kernels are defined for mu in (0, 1].
        return min(1.0, gamma * res0_norm**2)

    def update(self, mu_prev, res_norm, res_prev_norm):
        if res_norm <= self.sigma1 * res_prev_norm:
            return mu_prev
        return max(self.epsilon, self.sigma2 * mu_prev)


@dataclass
class IterationRecord:
    k: int
    res_rel: float
    res_smooth: float = math.nan
    mu: float = math.nan
    depth: int = 0
    alpha_l1: float = math.nan
    wall_ns: int = 0


@dataclass
class RunReport:
    """Convergence history and outcome of one solver run.

    ``res_smooth`` in the records is ``||F(u_k, mu_k)|| / ||F(u_0)||`` for
    smoothing runs and NaN otherwise. ``coefficients[k]`` holds the weights
    used to form ``u_{k+1}``.
    """

    method: str
    records: list = field(default_factory=list)
    coefficients: list = field(default_factory=list)
    status: str = MAX_ITER
    iterations: int = 0
    terminal_rate: float = math.nan
    res0_norm: float = math.nan
    error_vs_planted: Optional[float] = None
    contraction_c: Optional[float] = None
    failure_stage: Optional[str] = None
    message: str = ""
    run_id: str = ""
    seed: Optional[int] = None
    u_final: Optional[np.ndarray] = None

    @property
    def res_rel(self):
        return np.array([r.res_rel for r in self.records])

    @property
    def mu_history(self):
        return np.array([r.mu for r in self.records])

    @property
    def converged(self):
        return self.status == CONVERGED


def _solve_coeffs(variant, residuals):
    if variant == "ediis":
        return solve_ediis_coeffs(residuals)
    return solve_anderson_coeffs(residuals)


def _combine(alpha, values):
    if len(values) == 1:
        return values[0].copy()
    return np.stack(values, axis=1) @ alpha


def _finish(report, k, rel, status, u):
    report.status = status
    report.iterations = k
    report.u_final = u
    if k >= 1:
        report.terminal_rate = 0.0 if rel == 0.0 else rel ** (1.0 / k)
    return report


def _abort(report, k, exc, u):
    report.failure_stage = exc.stage
    report.message = str(exc)
    return _finish(report, k, report.records[-1].res_rel if report.records else math.nan, ABORTED, u)


def _check_variant(variant):
    if variant not in VARIANTS:
        raise InvalidInputError(f"variant must be one of {VARIANTS}, got {variant!r}")


def anderson_run(
    cmap,
    u0,
    policy=DepthPolicy(),
    stop=StoppingRule(),
    variant="anderson",
    callback: Optional[Callable] = None,
):
    """Run Anderson(m) or EDIIS(m) on ``G = cmap``.

    Depth 0 is the Picard iteration ``u_{k+1} = G(u_k)``, reproduced
    bitwise. ``callback(k, u_k)`` is called once per iterate.

    Returns
    -------
    RunReport
        ``status`` is ``"converged"``, ``"max-iter"`` or ``"aborted"``
        (the last when ``G`` produced non-finite values).
    """
    _check_variant(variant)
    u = np.array(u0, dtype=float)
    if not np.all(np.isfinite(u)):
        raise InvalidInputError("u0 must be finite")
    name = variant if policy.max_depth > 0 or policy.is_dynamic else "picard"
    report = RunReport(method=name)
    t0 = time.perf_counter_ns()

    if callback is not None:
        callback(0, u)
    try:
        g = eval_G(cmap, u)
    except EvaluationError as exc:
        return _abort(report, 0, exc, u)
    f = g - u
    nf0 = float(np.linalg.norm(f))
    report.res0_norm = nf0
    if nf0 == 0.0:
        report.records.append(IterationRecord(0, 0.0, wall_ns=time.perf_counter_ns() - t0))
        return _finish(report, 0, 0.0, CONVERGED, u)

    report.records.append(
        IterationRecord(0, 1.0, depth=0, alpha_l1=1.0, wall_ns=time.perf_counter_ns() - t0)
    )
    report.coefficients.append(np.ones(1))
    window = deque([(g, f)])
    u = g.copy()

    k = 0
    while True:
        k += 1
        if callback is not None:
            callback(k, u)
        try:
            g = eval_G(cmap, u)
        except EvaluationError as exc:
            return _abort(report, k, exc, u)
        f = g - u
        nf = float(np.linalg.norm(f))
        rel = nf / nf0
        m_k = depth_next(policy, k, nf)
        window.append((g, f))
        while len(window) > m_k + 1:
            window.popleft()
        rec = IterationRecord(k, rel, depth=len(window) - 1)
        report.records.append(rec)

        if rel <= stop.rel_residual_tol:
            rec.wall_ns = time.perf_counter_ns() - t0
            return _finish(report, k, rel, CONVERGED, u)
        if k >= stop.max_iter:
            rec.wall_ns = time.perf_counter_ns() - t0
            return _finish(report, k, rel, MAX_ITER, u)

        alpha = _solve_coeffs(variant, [w[1] for w in window])
        u = _combine(alpha, [w[0] for w in window])
        report.coefficients.append(alpha)
        rec.alpha_l1 = float(np.abs(alpha).sum())
        rec.wall_ns = time.perf_counter_ns() - t0


def s_anderson_run(
    handle,
    u0,
    policy=DepthPolicy(),
    stop=StoppingRule(),
    schedule=MuSchedule(),
    variant="anderson",
    callback: Optional[Callable] = None,
):
    """Smoothing Anderson(m): Anderson(m) on ``G(., mu_k)`` with an adaptive ``mu_k``.

    Each step evaluates the true residual ``F_k = G(u_k) - u_k`` to drive the
    ``mu`` update and the stopping test, then the smoothed residual
    ``G(u_k, mu_k) - u_k`` for the coefficient solve. The new iterate
    combines the stored smoothed values, each evaluated at its own ``mu``.

    Raises
    ------
    InvalidScheduleError
        If ``schedule.epsilon >= mu_0``.
    """
    _check_variant(variant)
    cmap = handle.base
    u = np.array(u0, dtype=float)
    if not np.all(np.isfinite(u)):
        raise InvalidInputError("u0 must be finite")
    report = RunReport(method="s-anderson" if variant == "anderson" else "s-ediis")
    t0 = time.perf_counter_ns()

    if callback is not None:
        callback(0, u)
    try:
        g = eval_G(cmap, u)
    except EvaluationError as exc:
        return _abort(report, 0, exc, u)
    nf0 = float(np.linalg.norm(g - u))
    report.res0_norm = nf0
    if nf0 == 0.0:
        report.records.append(IterationRecord(0, 0.0, wall_ns=time.perf_counter_ns() - t0))
        return _finish(report, 0, 0.0, CONVERGED, u)

    mu = schedule.initial_mu(nf0, cmap.n)
    if not schedule.epsilon < mu:
        raise InvalidScheduleError(
            f"epsilon={schedule.epsilon} must be below mu_0={mu}"
        )
    try:
        sg = eval_smoothed_G(handle, u, mu)
    except EvaluationError as exc:
        return _abort(report, 0, exc, u)
    sf = sg - u
    report.records.append(
        IterationRecord(
            0, 1.0, res_smooth=float(np.linalg.norm(sf)) / nf0, mu=mu,
            depth=0, alpha_l1=1.0, wall_ns=time.perf_counter_ns() - t0,
        )
    )
    report.coefficients.append(np.ones(1))
    window = deque([(sg, sf)])
    u = sg.copy()
    nf_prev = nf0

    k = 0
    while True:
        k += 1
        if callback is not None:
            callback(k, u)
        try:
            g = eval_G(cmap, u)
        except EvaluationError as exc:
            return _abort(report, k, exc, u)
        nf = float(np.linalg.norm(g - u))
        rel = nf / nf0
        mu = schedule.update(mu, nf, nf_prev)
        nf_prev = nf
        rec = IterationRecord(k, rel, mu=mu)
        report.records.append(rec)

        if rel <= stop.rel_residual_tol:
            rec.depth = min(len(window), depth_next(policy, k, nf))
            rec.wall_ns = time.perf_counter_ns() - t0
            return _finish(report, k, rel, CONVERGED, u)
        if k >= stop.max_iter:
            rec.depth = min(len(window), depth_next(policy, k, nf))
            rec.wall_ns = time.perf_counter_ns() - t0
            return _finish(report, k, rel, MAX_ITER, u)

        try:
            sg = eval_smoothed_G(handle, u, mu)
        except EvaluationError as exc:
            return _abort(report, k, exc, u)
        sf = sg - u
        rec.res_smooth = float(np.linalg.norm(sf)) / nf0

        m_k = depth_next(policy, k, nf)
        window.append((sg, sf))
        while len(window) > m_k + 1:
            window.popleft()
        rec.depth = len(window) - 1

        alpha = _solve_coeffs(variant, [w[1] for w in window])
        u = _combine(alpha, [w[0] for w in window])
        report.coefficients.append(alpha)
        rec.alpha_l1 = float(np.abs(alpha).sum())
        rec.wall_ns = time.perf_counter_ns() - t0


def tail_qfactor(report, tail_fraction=0.5):
    """Largest one-step residual ratio over the tail of a run.

    Only steps whose starting residual exceeds ``100 * eps * ||F_0||`` are
    considered, so the rounding floor does not pollute the estimate. Accepts
    a :class:`RunReport` or a plain sequence of relative residuals.
    """
    if not 0.0 < tail_fraction <= 0.5:
        raise InvalidParameterError("tail_fraction must lie in (0, 0.5]")
    res = report.res_rel if isinstance(report, RunReport) else np.asarray(report, dtype=float)
    if res.size < 3:
        raise InsufficientDataError(f"need at least 3 residuals, got {res.size}")
    floor = 1e2 * np.finfo(float).eps * res[0]
    ratios = [res[k + 1] / res[k] for k in range(res.size - 1) if res[k] > floor]
    if len(ratios) < 2:
        raise InsufficientDataError("fewer than 2 usable residual ratios")
    take = max(1, math.ceil(tail_fraction * len(ratios)))
    return float(max(ratios[-take:]))


def run_method(problem_map, u0, method, policy, stop, schedule=MuSchedule(), kernel=None, callback=None):
    """Dispatch on a method name: ``picard``, ``anderson``, ``ediis`` or ``s-anderson``."""
    if method == "picard":
        return anderson_run(problem_map, u0, DepthPolicy.fixed(0), stop, callback=callback)
    if method in ("anderson", "ediis"):
        return anderson_run(problem_map, u0, policy, stop, variant=method, callback=callback)
    if method == "s-anderson":
        handle = SmoothedMapHandle(problem_map, kernel or get_kernel("psi-new"))
        return s_anderson_run(handle, u0, policy, stop, schedule, callback=callback)
    raise InvalidInputError(f"unknown method {method!r}; expected one of {METHODS}")
