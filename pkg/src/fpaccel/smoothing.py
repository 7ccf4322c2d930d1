"""Smoothing of ``max(t, 0)`` and of box projections built from it.

Five kernels are provided. Four are the classical ones (log-exp, square-root
shift, piecewise quadratic, split exponential). The fifth, ``exact_outside``,
is a C^1 piecewise quadratic that coincides with ``max(t, 0)`` for ``t <= 0``
and for ``t >= mu + 2 sqrt(mu)``. Because of that, the smoothed composite map
shares its fixed point with the nonsmooth one once ``mu`` is small enough.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .composite_map import CompositeMaxMap, eval_h, eval_q
from .errors import EvaluationError, InvalidInputError, InvalidParameterError

KINDS = ("log_exp", "sqrt_shift", "piecewise_quadratic", "exp_split", "exact_outside")

# Error constants sup_t |psi(t, mu) - max(t, 0)| / mu. All five are attained at t = 0;
# tests/test_smoothing.py recomputes them on a dense grid.
KAPPA = {
    "log_exp": math.log(2.0),
    "sqrt_shift": 1.0,
    "piecewise_quadratic": 0.25,
    "exp_split": 0.5,
    "exact_outside": 0.5,
}

NAMES = {
    "psi1": "log_exp",
    "psi2": "sqrt_shift",
    "psi3": "piecewise_quadratic",
    "psi4": "exp_split",
    "psi-new": "exact_outside",
}


@dataclass(frozen=True)
class SmoothingKernel:
    kind: str
    kappa_psi: float

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInputError(f"unknown kernel kind {self.kind!r}")
        if not self.kappa_psi > 0:
            raise InvalidInputError("kappa_psi must be positive")

    def value(self, t, mu):
        return kernel_value(self, t, mu)

    def deriv(self, t, mu):
        return kernel_deriv(self, t, mu)

    def exact_threshold(self, mu):
        """Right end of the interval on which an ``exact_outside`` kernel smooths."""
        return mu + 2.0 * math.sqrt(mu)


def get_kernel(name):
    """Kernel by config name (``"psi1"``..``"psi4"``, ``"psi-new"``) or by kind."""
    kind = NAMES.get(name, name)
    if kind not in KINDS:
        raise InvalidInputError(
            f"unknown kernel {name!r}; expected one of {sorted(NAMES)}"
        )
    return SmoothingKernel(kind, KAPPA[kind])


def _check_mu(mu):
    if not (0.0 < mu <= 1.0):
        raise InvalidParameterError(f"mu must lie in (0, 1], got {mu}")


def _psi(kind, t, mu):
    # t finite ndarray
    if kind == "log_exp":
        return np.maximum(t, 0.0) + mu * np.log1p(np.exp(-np.abs(t) / mu))
    if kind == "sqrt_shift":
        s = np.sqrt(t * t + 4.0 * mu * mu)
        # for t < 0 rewrite to avoid cancellation in t + s
        return np.where(t >= 0, 0.5 * (t + s), 2.0 * mu * mu / np.where(t >= 0, 1.0, s - t))
    if kind == "piecewise_quadratic":
        return np.where(np.abs(t) > mu, np.maximum(t, 0.0), (t + mu) ** 2 / (4.0 * mu))
    if kind == "exp_split":
        e = np.exp(-np.abs(t) / mu)
        return np.where(t > 0, t + 0.5 * mu * e, 0.5 * mu * e)
    # exact_outside; branches upper-inclusive
    r = math.sqrt(mu)
    b1, b2, b3 = mu, mu + r, mu + 2.0 * r
    return np.select(
        [t <= 0, t <= b1, t <= b2, t <= b3],
        [
            np.zeros_like(t),
            t * t / (2.0 * mu),
            0.25 * (t - mu) ** 2 + t - 0.5 * mu,
            -0.25 * (t - b3) ** 2 + t,
        ],
        default=t,
    )


def _dpsi(kind, t, mu):
    if kind == "log_exp":
        return expit(t / mu)
    if kind == "sqrt_shift":
        s = np.sqrt(t * t + 4.0 * mu * mu)
        return np.where(t >= 0, 0.5 * (1.0 + t / s), 2.0 * mu * mu / (s * (s - np.minimum(t, 0.0))))
    if kind == "piecewise_quadratic":
        return np.where(np.abs(t) > mu, (t > 0).astype(float), (t + mu) / (2.0 * mu))
    if kind == "exp_split":
        e = np.exp(-np.abs(t) / mu)
        return np.where(t > 0, 1.0 - 0.5 * e, 0.5 * e)
    r = math.sqrt(mu)
    b1, b2, b3 = mu, mu + r, mu + 2.0 * r
    return np.select(
        [t <= 0, t <= b1, t <= b2, t <= b3],
        [np.zeros_like(t), t / mu, 0.5 * (t - mu) + 1.0, -0.5 * (t - b3) + 1.0],
        default=1.0,
    )


def _apply(fn, kernel, t, mu, at_neg_inf, at_pos_inf):
    _check_mu(mu)
    arr = np.asarray(t, dtype=float)
    if np.any(np.isnan(arr)):
        raise InvalidInputError("t must not be NaN")
    flat = np.atleast_1d(arr)
    out = np.empty_like(flat)
    fin = np.isfinite(flat)
    out[fin] = fn(kernel.kind, flat[fin], mu)
    out[flat == -np.inf] = at_neg_inf
    out[flat == np.inf] = at_pos_inf
    if arr.ndim == 0:
        return float(out[0])
    return out.reshape(arr.shape)


def kernel_value(kernel, t, mu):
    """``psi(t, mu)`` elementwise; ``mu`` must lie in ``(0, 1]``."""
    return _apply(_psi, kernel, t, mu, 0.0, np.inf)


def kernel_deriv(kernel, t, mu):
    """``d psi / d t`` elementwise."""
    return _apply(_dpsi, kernel, t, mu, 0.0, 1.0)


def smoothed_projection(box, kernel, v, mu):
    """Componentwise ``psi(lo - t) + t - psi(t - hi)``.

    Infinite bounds contribute nothing. For the ``exact_outside`` kernel the
    components lying in the exactness region are returned as the plain clamp,
    which is the same value without the rounding of ``(lo - t) + t``.
    """
    _check_mu(mu)
    v = np.asarray(v, dtype=float)
    if v.shape != (box.dim,):
        raise InvalidInputError(f"v has shape {v.shape}, box dimension is {box.dim}")
    lo_f, hi_f = box.lower_finite, box.upper_finite
    out = v.copy()
    out[lo_f] += _psi(kernel.kind, box.lower[lo_f] - v[lo_f], mu)
    out[hi_f] -= _psi(kernel.kind, v[hi_f] - box.upper[hi_f], mu)

    if kernel.kind == "exact_outside":
        w = kernel.exact_threshold(mu)
        exact = np.ones(box.dim, dtype=bool)
        with np.errstate(invalid="ignore"):
            exact &= ~lo_f | (v >= box.lower) | (v <= box.lower - w)
            exact &= ~hi_f | (v <= box.upper) | (v >= box.upper + w)
        out[exact] = np.clip(v[exact], box.lower[exact], box.upper[exact])
    return out


def smoothed_projection_deriv(box, kernel, v, mu):
    """Diagonal of the Jacobian of :func:`smoothed_projection` at ``v``."""
    _check_mu(mu)
    v = np.asarray(v, dtype=float)
    lo_f, hi_f = box.lower_finite, box.upper_finite
    d = np.ones(box.dim)
    d[lo_f] -= _dpsi(kernel.kind, box.lower[lo_f] - v[lo_f], mu)
    d[hi_f] -= _dpsi(kernel.kind, v[hi_f] - box.upper[hi_f], mu)
    return d


@dataclass(frozen=True, eq=False)
class SmoothedMapHandle:
    """A composite-max map paired with a kernel: ``G(u, mu) = H(Phi(Q(u), mu))``."""

    base: CompositeMaxMap
    kernel: SmoothingKernel

    @property
    def kappa_G(self):
        """Bound ``kappa`` in ``||G(u, mu) - G(u)|| <= kappa * mu``; None if ``c_H`` unknown.

        For ``exact_outside`` at most one of the two one-sided terms is active
        per component, giving ``c_H sqrt(l) / 2``; otherwise both may be,
        giving ``2 c_H kappa_psi sqrt(l)``.
        """
        c_h = self.base.h_lipschitz
        if c_h is None:
            return None
        rl = math.sqrt(self.base.l)
        if self.kernel.kind == "exact_outside":
            return c_h * rl / 2.0
        return 2.0 * c_h * self.kernel.kappa_psi * rl

    def __call__(self, u, mu):
        return eval_smoothed_G(self, u, mu)


def eval_smoothed_G(handle, u, mu):
    v = eval_q(handle.base, u)
    w = smoothed_projection(handle.base.box, handle.kernel, v, mu)
    if not np.all(np.isfinite(w)):
        raise EvaluationError("smoothing")
    return eval_h(handle.base, w)


@dataclass(frozen=True)
class MuBarData:
    varpi1: float
    varpi2: float
    eta: float
    mu_bar: float


def compute_mu_bar(cmap, u_star, eta=1.0):
    """Threshold below which the ``exact_outside`` smoothing keeps ``u_star`` fixed.

    ``varpi1``/``varpi2`` are the smallest lower/upper bound violations of
    ``Q(u_star)``, capped at 3 (an empty violation set gives 3). ``eta``
    defaults to 1, valid whenever ``H`` is defined on all of ``R^l``.
    """
    if not (0.0 < eta <= 1.0):
        raise InvalidParameterError(f"eta must lie in (0, 1], got {eta}")
    q = eval_q(cmap, u_star)
    box = cmap.box
    lo_gap = np.where(box.lower_finite, box.lower - q, -np.inf)
    hi_gap = np.where(box.upper_finite, q - box.upper, -np.inf)
    viol1 = lo_gap[lo_gap > 0]
    viol2 = hi_gap[hi_gap > 0]
    varpi1 = float(min(3.0, viol1.min())) if viol1.size else 3.0
    varpi2 = float(min(3.0, viol2.min())) if viol2.size else 3.0
    mu_bar = min(eta, (varpi1 / 3.0) ** 2, (varpi2 / 3.0) ** 2)
    return MuBarData(varpi1, varpi2, float(eta), float(mu_bar))

