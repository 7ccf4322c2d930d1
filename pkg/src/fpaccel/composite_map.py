"""Composite-max maps ``G(u) = H(P_box(Q(u)))`` and their residuals."""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import EvaluationError, InvalidInputError


@dataclass(frozen=True, eq=False)
class ExtendedBox:
    """Box ``{w : lower <= w <= upper}`` with ``-inf``/``+inf`` bounds allowed.

    Infinite bounds are stored as IEEE infinities; the projection never does
    arithmetic with them, it only consults the finite masks.
    """

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.array(self.lower, dtype=float).ravel()
        hi = np.array(self.upper, dtype=float).ravel()
        if lo.shape != hi.shape:
            raise InvalidInputError(
                f"lower has {lo.size} entries but upper has {hi.size}"
            )
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)):
            raise InvalidInputError("box bounds must not be NaN")
        if np.any(lo == np.inf) or np.any(hi == -np.inf):
            raise InvalidInputError("lower bounds cannot be +inf, upper cannot be -inf")
        bad = np.flatnonzero(~(lo < hi))
        if bad.size:
            raise InvalidInputError(f"box needs lower < upper; violated at index {bad[0]}")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "_lo_finite", np.isfinite(lo))
        object.__setattr__(self, "_hi_finite", np.isfinite(hi))

    @property
    def dim(self):
        return self.lower.size

    @property
    def lower_finite(self):
        return self._lo_finite

    @property
    def upper_finite(self):
        return self._hi_finite

    @classmethod
    def nonnegative(cls, dim):
        return cls(np.zeros(dim), np.full(dim, np.inf))

    @classmethod
    def unbounded(cls, dim):
        return cls(np.full(dim, -np.inf), np.full(dim, np.inf))

    @classmethod
    def concat(cls, *boxes):
        return cls(
            np.concatenate([b.lower for b in boxes]),
            np.concatenate([b.upper for b in boxes]),
        )


def project_box(w, box):
    """Euclidean projection of ``w`` onto ``box``.

    Equivalent to ``max(lower - w, 0) + w - max(w - upper, 0)`` but written as
    a clamp so the result lies in the box exactly and infinite bounds are
    skipped.
    """
    w = np.asarray(w, dtype=float)
    if w.shape != (box.dim,):
        raise InvalidInputError(f"w has shape {w.shape}, box dimension is {box.dim}")
    out = w.copy()
    lo, hi = box.lower_finite, box.upper_finite
    out[lo] = np.maximum(out[lo], box.lower[lo])
    out[hi] = np.minimum(out[hi], box.upper[hi])
    return out


@dataclass(frozen=True, eq=False)
class CompositeMaxMap:
    """The triple ``(Q, H, box)`` defining ``G(u) = H(P_box(Q(u)))``.

    Parameters
    ----------
    q_map : callable
        ``R^n -> R^l``.
    h_map : callable
        ``R^l -> R^n``.
    box : ExtendedBox
        Dimension ``l``.
    n : int
        Dimension of ``u``.
    lipschitz_c : float, optional
        Known contraction factor of ``G`` (``0 <= c < 1``).
    h_lipschitz : float, optional
        Lipschitz constant of ``H``; used for the smoothing error bound.
    q_jac, h_jac : callable, optional
        Jacobians, only used by test utilities.
    metadata : dict
        Free-form extra data (scalings, generation details).
    """

    q_map: Callable[[np.ndarray], np.ndarray]
    h_map: Callable[[np.ndarray], np.ndarray]
    box: ExtendedBox
    n: int
    lipschitz_c: Optional[float] = None
    h_lipschitz: Optional[float] = None
    q_jac: Optional[Callable] = None
    h_jac: Optional[Callable] = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 1:
            raise InvalidInputError("n must be positive")
        c = self.lipschitz_c
        if c is not None and not (0.0 <= c < 1.0):
            raise InvalidInputError(f"lipschitz_c must lie in [0, 1), got {c}")

    @property
    def l(self):
        return self.box.dim

    def __call__(self, u):
        return eval_G(self, u)


def _check_u(cmap, u):
    u = np.asarray(u, dtype=float)
    if u.shape != (cmap.n,):
        raise InvalidInputError(f"u has shape {u.shape}, expected ({cmap.n},)")
    return u


def _finite_or_raise(x, stage):
    if not np.all(np.isfinite(x)):
        raise EvaluationError(stage)
    return x


def eval_q(cmap, u):
    u = _check_u(cmap, u)
    v = np.asarray(cmap.q_map(u), dtype=float)
    if v.shape != (cmap.l,):
        raise InvalidInputError(f"Q returned shape {v.shape}, expected ({cmap.l},)")
    return _finite_or_raise(v, "Q")


def eval_h(cmap, w):
    out = np.asarray(cmap.h_map(w), dtype=float)
    if out.shape != (cmap.n,):
        raise InvalidInputError(f"H returned shape {out.shape}, expected ({cmap.n},)")
    return _finite_or_raise(out, "H")


def eval_G(cmap, u):
    """Evaluate ``H(P_box(Q(u)))``; raises :class:`EvaluationError` tagged by stage."""
    v = eval_q(cmap, u)
    w = _finite_or_raise(project_box(v, cmap.box), "projection")
    return eval_h(cmap, w)


@dataclass(frozen=True, eq=False)
class ResidualValue:
    g_of_u: np.ndarray
    f_of_u: np.ndarray
    norm_f: float


def residual(cmap, u):
    """``G(u)``, ``F(u) = G(u) - u`` and ``||F(u)||``."""
    u = _check_u(cmap, u)
    g = eval_G(cmap, u)
    f = g - u
    return ResidualValue(g, f, float(np.linalg.norm(f)))
