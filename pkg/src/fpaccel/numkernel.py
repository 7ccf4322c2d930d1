"""Dense least-squares and coefficient solvers used by the accelerators.

Matrices are plain 2-D float ndarrays and coefficient vectors plain 1-D
ndarrays. Everything here is a pure function of its inputs.
"""

import itertools
import warnings

import numpy as np

from .errors import InvalidInputError, UnsupportedDepthError

DEFAULT_REL_TOL = 1e-12
EDIIS_MAX_DEPTH = 12

# Column norms below this fraction of ||F_k|| count as a vanished difference matrix.
_DEGENERATE_COLUMN_TOL = 1e-13
# EDIIS feasibility slack on each coefficient before clamping.
_EDIIS_NEG_TOL = 1e-14
# Relative slack in the EDIIS optimality test.
_EDIIS_KKT_TOL = 1e-12


def _as_finite_matrix(A, name="A"):
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    if A.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-D, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return A


def ls_pinv(A, b, rel_tol=DEFAULT_REL_TOL):
    """Minimum-norm least-squares solution of ``A @ theta ~= b``.

    Singular values below ``rel_tol * sigma_max`` are discarded, so
    rank-deficient systems return the minimum-norm minimizer.

    Parameters
    ----------
    A : array_like, shape (r, c)
    b : array_like, shape (r,)
    rel_tol : float
        Relative singular-value cutoff, must be positive.

    Returns
    -------
    theta : ndarray, shape (c,)
    """
    A = _as_finite_matrix(A)
    b = np.asarray(b, dtype=float)
    if A.shape[1] < 1:
        raise InvalidInputError("A must have at least one column")
    if b.shape != (A.shape[0],):
        raise InvalidInputError(f"b has shape {b.shape}, expected ({A.shape[0]},)")
    if not np.all(np.isfinite(b)):
        raise InvalidInputError("b has non-finite entries")
    if not rel_tol > 0:
        raise InvalidInputError("rel_tol must be positive")

    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros(A.shape[1])
    keep = s > rel_tol * s[0]
    coef = (U[:, keep].T @ b) / s[keep]
    return Vt[keep].T @ coef


def _stack_window(residual_window):
    if len(residual_window) == 0:
        raise InvalidInputError("residual window is empty")
    vecs = [np.asarray(f, dtype=float).ravel() for f in residual_window]
    n = vecs[0].size
    for j, v in enumerate(vecs):
        if v.size != n:
            raise InvalidInputError(
                f"residual {j} has length {v.size}, expected {n}"
            )
    F = np.column_stack(vecs)
    if not np.all(np.isfinite(F)):
        raise InvalidInputError("residual window has non-finite entries")
    return F


def _picard_coeffs(size):
    alpha = np.zeros(size)
    alpha[-1] = 1.0
    return alpha


def solve_anderson_coeffs(residual_window, rel_tol=DEFAULT_REL_TOL):
    """Affine weights minimizing ``||sum_j alpha_j F_j||`` with ``sum alpha = 1``.

    The window is ordered oldest to newest. The problem is solved in the
    difference form ``min ||F_k - D theta||`` where column ``j`` of ``D`` is
    ``F_{j+1} - F_j``, then mapped back to ``alpha``.

    Parameters
    ----------
    residual_window : sequence of array_like
        ``m_k + 1`` residual vectors of equal length.
    rel_tol : float
        Singular-value cutoff passed to :func:`ls_pinv`.

    Returns
    -------
    alpha : ndarray, shape (m_k + 1,)
    """
    F = _stack_window(residual_window)
    m = F.shape[1] - 1
    if m == 0:
        return np.ones(1)

    f_new = F[:, -1]
    D = np.diff(F, axis=1)
    col_norms = np.linalg.norm(D, axis=0)
    if col_norms.max() < _DEGENERATE_COLUMN_TOL * np.linalg.norm(f_new):
        return _picard_coeffs(m + 1)

    theta = ls_pinv(D, f_new, rel_tol)
    alpha = np.empty(m + 1)
    alpha[0] = theta[0]
    alpha[1:m] = np.diff(theta)
    alpha[m] = 1.0 - theta[m - 1]
    return alpha


def _affine_ls_on_support(R, support, rel_tol):
    """Affine-constrained LS restricted to the columns in ``support``."""
    base = support[-1]
    rest = support[:-1]
    a = np.zeros(R.shape[1])
    if not rest:
        a[base] = 1.0
        return a
    D = R[:, rest] - R[:, [base]]
    theta = ls_pinv(D, -R[:, base], rel_tol)
    a[list(rest)] = theta
    a[base] = 1.0 - theta.sum()
    return a


def solve_ediis_coeffs(residual_window, rel_tol=DEFAULT_REL_TOL, method="active-set"):
    """Simplex-constrained weights minimizing ``||sum_j alpha_j F_j||``.

    Work is done on the triangular factor of a thin QR of the window, so
    each subproblem costs O(m^3) regardless of the vector length.

    Parameters
    ----------
    residual_window : sequence of array_like
        ``m + 1`` residual vectors, oldest first.
    rel_tol : float
        Singular-value cutoff for the subproblem solves.
    method : {"active-set", "enumerate"}
        ``"active-set"`` runs a primal active-set method and returns its
        point only once the KKT conditions hold there; otherwise it falls
        back to enumeration. ``"enumerate"`` solves the equality-constrained
        problem on every support and keeps the best feasible candidate.

    Raises
    ------
    UnsupportedDepthError
        If the window is deeper than ``EDIIS_MAX_DEPTH + 1`` vectors.
    """
    if method not in ("active-set", "enumerate"):
        raise InvalidInputError(f"unknown EDIIS method {method!r}")
    F = _stack_window(residual_window)
    m = F.shape[1] - 1
    if m > EDIIS_MAX_DEPTH:
        raise UnsupportedDepthError(
            f"EDIIS supports depth <= {EDIIS_MAX_DEPTH}, got {m}"
        )
    if m == 0:
        return np.ones(1)

    # ||F a|| == ||R a|| for the thin QR F = Q R.
    R = np.linalg.qr(F, mode="r")
    idx = tuple(range(m + 1))

    # Convex problem: a feasible unconstrained optimum is the answer.
    a_full = _affine_ls_on_support(R, idx, rel_tol)
    if np.all(a_full >= -_EDIIS_NEG_TOL):
        return _clamp_simplex(a_full)

    if method == "active-set":
        a = _ediis_active_set(R, rel_tol)
        if a is not None:
            return _clamp_simplex(a)

    best, best_obj = None, np.inf
    for size in range(1, m + 2):
        for support in itertools.combinations(idx, size):
            a = _affine_ls_on_support(R, support, rel_tol)
            if np.any(a < -_EDIIS_NEG_TOL):
                continue
            obj = np.linalg.norm(R @ a)
            if obj < best_obj:
                best, best_obj = a, obj
    return _clamp_simplex(best)


def _ediis_active_set(R, rel_tol, max_iter=200):
    """Primal active-set method on the simplex; None unless KKT is certified.

    At an optimum ``a`` every off-support gradient entry ``(G a)_j`` must be
    at least the simplex multiplier ``a' G a``, with ``G = R' R``.
    """
    G = R.T @ R
    slack = _EDIIS_KKT_TOL * max(float(np.max(np.diag(G))), np.finfo(float).tiny)
    start = int(np.argmin(np.diag(G)))
    support = {start}
    a = np.zeros(R.shape[1])
    a[start] = 1.0

    for _ in range(max_iter):
        g = G @ a
        off = [j for j in range(a.size) if j not in support]
        if not off:
            return a
        j = min(off, key=lambda i: g[i])
        if g[j] >= a @ g - slack:
            return a
        support.add(j)

        for _inner in range(a.size + 1):
            sup = sorted(support)
            z = _affine_ls_on_support(R, tuple(sup), rel_tol)
            if np.all(z[sup] > _EDIIS_NEG_TOL):
                a = z
                break
            # walk from a toward z until the first coordinate hits zero
            t = min(a[i] / (a[i] - z[i]) for i in sup if z[i] <= _EDIIS_NEG_TOL)
            a = a + t * (z - a)
            for i in sup:
                if a[i] <= _EDIIS_NEG_TOL:
                    a[i] = 0.0
                    support.discard(i)
            if not support:
                return None
        else:
            return None
    return None


def _clamp_simplex(a):
    a = np.where(a < 0.0, 0.0, a)
    return a / a.sum()


def mid(lo, x, hi):
    """Median of ``lo <= hi`` and ``x``: ``x`` clipped to ``[lo, hi]``."""
    if lo > hi:
        raise InvalidInputError(f"mid requires lo <= hi, got lo={lo}, hi={hi}")
    if x < lo:
        return lo
    if x > hi:
        return hi
    return x


def spectral_norm(A, tol=1e-10, max_iter=10_000, seed=0):
    """Largest singular value of ``A`` by power iteration on ``A^T A``.

    ``A`` may be a dense ndarray or anything exposing ``@`` and ``.T``
    (scipy sparse matrices work). Iteration stops when the estimate changes
    by less than ``tol`` relative. If ``max_iter`` is exhausted the best
    estimate is returned with a :class:`RuntimeWarning`.
    """
    if not tol > 0:
        raise InvalidInputError("tol must be positive")
    if hasattr(A, "toarray") or hasattr(A, "tocsr"):
        op = A
    else:
        op = _as_finite_matrix(A)
    ncols = op.shape[1]
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(ncols)
    v /= np.linalg.norm(v)

    est = 0.0
    for _ in range(max_iter):
        w = op.T @ (op @ v)
        lam = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        new = np.sqrt(max(lam, 0.0))
        if abs(new - est) <= tol * new:
            # One more Rayleigh quotient on the refreshed vector.
            Av = op @ v
            return float(max(new, np.linalg.norm(Av)))
        est = new
    warnings.warn(
        f"spectral_norm: no convergence after {max_iter} iterations",
        RuntimeWarning,
        stacklevel=2,
    )
    return float(np.linalg.norm(op @ v))
