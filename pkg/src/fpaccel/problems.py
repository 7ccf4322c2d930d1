"""Seeded benchmark problems with planted solutions.

Families
--------
nash
    Projected-gradient map of a box-constrained two-player quadratic game.
lcp-option
    Linear complementarity problem from an American-option finite-difference
    operator, written as ``u = max((I - eta M) u - eta q, 0)``.
dirichlet
    Five-point finite-difference discretization of a Dirichlet problem with a
    ``max`` nonlinearity on the unit square.
toy
    Two-dimensional map ``(max(u1/2, 0), 1 - u2/4)``.

Randomness comes from ``numpy.random.default_rng`` (PCG64). Each generator
spawns independent child streams from ``SeedSequence(seed)``, one per random
component, so changing one component's size does not shift the others.
"""

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .composite_map import CompositeMaxMap, ExtendedBox, residual
from .errors import (
    AmbiguousSolutionError,
    InvalidInputError,
    InvalidParameterError,
    NoSolutionError,
)
from .numkernel import spectral_norm

FAMILIES = ("nash", "lcp-option", "dirichlet", "toy")


@dataclass(eq=False)
class LcpData:
    """``LCP(q, M)``: find ``v >= 0`` with ``M v + q >= 0`` and ``v . (M v + q) = 0``."""

    M: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        self.M = np.asarray(self.M.toarray() if sp.issparse(self.M) else self.M, dtype=float)
        self.q = np.asarray(self.q, dtype=float)
        n = self.q.size
        if self.M.shape != (n, n):
            raise InvalidInputError(f"M has shape {self.M.shape}, q has length {n}")


@dataclass(eq=False)
class ProblemInstance:
    map: CompositeMaxMap
    u0: np.ndarray
    u_star: np.ndarray
    contraction_c: float
    metadata: dict = field(default_factory=dict)
    lcp: Optional[LcpData] = None

    @property
    def n(self):
        return self.map.n

    def planted_residual(self):
        return residual(self.map, self.u_star).norm_f


def _streams(seed, count):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(count)]


def _orth(X):
    """Orthogonal factor of ``X`` with a positive diagonal in ``R``."""
    Q, R = np.linalg.qr(X)
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


def _check_planted(inst, tol=1e-10):
    r = inst.planted_residual()
    bound = tol * (1.0 + np.linalg.norm(inst.u_star))
    if r > bound:
        raise AssertionError(
            f"{inst.metadata.get('family')}: planted residual {r:.3e} exceeds {bound:.3e}"
        )
    return inst


def gen_nash(n1, n2, a=0.0, b=0.0, s1=0.3, s2=0.5, seed=0, max_retries=5):
    """Box-constrained saddle point of ``x'Ax/2 + x'By - y'Cy/2 + a'x - b'y``.

    ``A`` and ``C`` are random SPD matrices with spectra in ``[1, 1 + a]``
    and ``[2, 2 + b]``, ``B`` is sparse with density ``s1`` and unit spectral
    norm. A solution with ``ceil(s2 * n)`` zero entries is planted and the
    linear term chosen to make it exact. The map is
    ``G(u) = max(u - alpha (M u + d), 0)`` with ``alpha = tau_L / c_L^2``.
    """
    if n1 < 1 or n2 < 1:
        raise InvalidParameterError("n1 and n2 must be positive")
    if a < 0 or b < 0:
        raise InvalidParameterError("a and b must be nonnegative")
    if not (0 <= s1 <= 1 and 0 <= s2 <= 1):
        raise InvalidParameterError("s1 and s2 must lie in [0, 1]")
    n = n1 + n2
    ss = np.random.SeedSequence(seed)

    for attempt in range(max_retries):
        rA, rU1, rC, rU2, rB, rS = (np.random.default_rng(s) for s in ss.spawn(6))
        A_diag = 1.0 + a * rA.random(n1)
        U1 = _orth(rU1.random((n1, n1)))
        A = U1.T @ (A_diag[:, None] * U1)
        C_diag = 2.0 + b * rC.random(n2)
        U2 = _orth(rU2.random((n2, n2)))
        C = U2.T @ (C_diag[:, None] * U2)
        A = 0.5 * (A + A.T)
        C = 0.5 * (C + C.T)

        B = sp.random(n1, n2, density=s1, random_state=rB, data_rvs=rB.random).toarray()
        b_norm = spectral_norm(B) if B.any() else 0.0
        if b_norm > 0:
            B = B / b_norm

        M = np.block([[A, B], [-B.T, C]])
        sol = 0.1 + 0.9 * rS.random(n)
        zeros = rS.permutation(n)[: math.ceil(s2 * n)]
        sol[zeros] = 0.0
        d = -(M @ sol)

        tau_L = float(min(A_diag.min(), C_diag.min()))
        c_L = spectral_norm(M)
        if c_L > 0:
            break
    else:
        raise InvalidParameterError("degenerate draws: ||M|| = 0 on every retry")

    alpha = tau_L / c_L**2
    c = spectral_norm(np.eye(n) - alpha * M)
    J = np.eye(n) - alpha * M

    cmap = CompositeMaxMap(
        q_map=lambda u: u - alpha * (M @ u + d),
        h_map=lambda w: w,
        box=ExtendedBox.nonnegative(n),
        n=n,
        lipschitz_c=c,
        h_lipschitz=1.0,
        q_jac=lambda u: J,
        h_jac=lambda w: np.eye(n),
        metadata={"M": M, "d": d, "alpha": alpha, "tau_L": tau_L, "c_L": c_L},
    )
    meta = dict(
        family="nash", n1=n1, n2=n2, a=a, b=b, s1=s1, s2=s2, seed=seed,
        retries=attempt, tau_L=tau_L, c_L=c_L, alpha=alpha,
    )
    inst = ProblemInstance(cmap, np.zeros(n), sol, c, meta)
    return _check_planted(inst)


def option_matrix(n, gamma_coeff=1000.0, tau_coeff=-1.0):
    """Tridiagonal centered-difference matrix of ``-V'' + tau V' + gamma V`` on ``n`` nodes."""
    h = 1.0 / (n + 1)
    diag = np.full(n, 2.0 + gamma_coeff * h * h)
    sub = np.full(n - 1, -1.0 - 0.5 * h * tau_coeff)
    sup = np.full(n - 1, -1.0 + 0.5 * h * tau_coeff)
    return sp.diags([sub, diag, sup], [-1, 0, 1], format="csr")


def gen_lcp_option(n, theta=0.4, gamma_coeff=1000.0, tau_coeff=-1.0, seed=0):
    """American-option LCP with planted solution ``max(rand - theta, 0)``.

    About ``theta * n`` components of the solution sit on the kink of the
    ``max``. The contraction factor is ``2 eta`` with
    ``eta = 1 / (2 + gamma h^2)``.
    """
    if n < 2:
        raise InvalidParameterError("n must be at least 2")
    if not 0.0 < theta < 1.0:
        raise InvalidParameterError("theta must lie in (0, 1)")
    if not gamma_coeff > 0:
        raise InvalidParameterError("gamma_coeff must be positive")
    if not abs(tau_coeff) < 2 * (n + 1):
        raise InvalidParameterError("|tau_coeff| must be below 2(n+1) for diagonal dominance")

    h = 1.0 / (n + 1)
    M = option_matrix(n, gamma_coeff, tau_coeff)
    eta = 1.0 / (2.0 + gamma_coeff * h * h)
    (rng,) = _streams(seed, 1)
    sol = np.maximum(rng.random(n) - theta, 0.0)
    q = -(M @ sol)
    c = 2.0 * eta

    cmap = CompositeMaxMap(
        # (I - eta M) u - eta q, grouped so that Q(u*) = u* exactly
        q_map=lambda u: u - eta * (M @ u + q),
        h_map=lambda w: w,
        box=ExtendedBox.nonnegative(n),
        n=n,
        lipschitz_c=c,
        h_lipschitz=1.0,
        q_jac=lambda u: np.eye(n) - eta * M.toarray(),
        h_jac=lambda w: np.eye(n),
        metadata={"eta": eta},
    )
    meta = dict(
        family="lcp-option", n=n, theta=theta, gamma_coeff=gamma_coeff,
        tau_coeff=tau_coeff, seed=seed, eta=eta,
    )
    inst = ProblemInstance(cmap, np.full(n, 0.5), sol, c, meta, lcp=LcpData(M, q))
    return _check_planted(inst)


def _dominance_violation(M):
    diag = np.diag(M)
    off = np.abs(M) - np.diag(np.abs(diag))
    for i in range(M.shape[0]):
        if not diag[i] > 0:
            return f"diagonal entry {i} is not positive"
        if not off[i].sum() < diag[i]:
            return f"row {i} is not strictly diagonally dominant"
        if not off[:, i].sum() < diag[i]:
            return f"column {i} is not strictly diagonally dominant"
    return None


def lcp_rescale(data):
    """Fixed-point map ``u = max((I - M L^-1) u - q, 0)`` with ``L = diag(M)``.

    Requires strict row and column diagonal dominance with positive diagonal.
    The LCP solution is ``v = u / diag(M)``; see :func:`lcp_recover`.
    """
    M, q = data.M, data.q
    bad = _dominance_violation(M)
    if bad:
        raise InvalidInputError(bad)
    lam = np.diag(M).copy()
    Ms = M / lam[None, :]
    E = np.eye(M.shape[0]) - Ms
    c = math.sqrt(np.abs(E).sum(axis=0).max() * np.abs(E).sum(axis=1).max())
    n = q.size
    return CompositeMaxMap(
        q_map=lambda u: u - (Ms @ u + q),
        h_map=lambda w: w,
        box=ExtendedBox.nonnegative(n),
        n=n,
        lipschitz_c=c,
        h_lipschitz=1.0,
        q_jac=lambda u: E,
        metadata={"lambda_diag": lam, "contraction_c": c},
    )


def lcp_recover(cmap, u):
    return np.asarray(u, dtype=float) / cmap.metadata["lambda_diag"]


def lcp_bruteforce(data, tol=1e-9):
    """Solve a small LCP by enumerating all ``2^n`` complementary supports.

    Raises
    ------
    NoSolutionError
        No support yields a verified solution.
    AmbiguousSolutionError
        Two distinct verified solutions exist.
    """
    M, q = data.M, data.q
    n = q.size
    if n > 12:
        raise InvalidInputError(f"brute force is limited to n <= 12, got {n}")

    found = []
    for size in range(n + 1):
        for S in itertools.combinations(range(n), size):
            v = np.zeros(n)
            if S:
                idx = list(S)
                try:
                    v[idx] = np.linalg.solve(M[np.ix_(idx, idx)], -q[idx])
                except np.linalg.LinAlgError:
                    continue
            w = M @ v + q
            scale = 1.0 + np.abs(q).max()
            if v.min() < -tol * scale or w.min() < -tol * scale:
                continue
            if abs(v @ w) > tol * scale * scale:
                continue
            if not any(np.allclose(v, f, atol=tol * scale, rtol=0) for f in found):
                found.append(np.maximum(v, 0.0))
    if not found:
        raise NoSolutionError("no complementary support gives a solution")
    if len(found) > 1:
        raise AmbiguousSolutionError(f"{len(found)} distinct solutions found")
    return found[0]


def random_dominant_lcp(n, seed=0, margin=0.1):
    """Random LCP whose matrix is strictly diagonally dominant by rows and columns."""
    (rng,) = _streams(seed, 1)
    M = rng.uniform(-1.0, 1.0, (n, n))
    np.fill_diagonal(M, 0.0)
    need = np.maximum(np.abs(M).sum(axis=0), np.abs(M).sum(axis=1))
    np.fill_diagonal(M, need * (1.0 + margin + rng.random(n)) + margin)
    q = rng.standard_normal(n)
    return LcpData(M, q)


def stencil_adjacency(sqrt_n):
    """``L + U`` of the five-point stencil: 1 for each grid neighbour, row-major ordering."""
    T = sp.diags([np.ones(sqrt_n - 1), np.ones(sqrt_n - 1)], [-1, 1])
    I = sp.identity(sqrt_n)
    return (sp.kron(I, T) + sp.kron(T, I)).tocsr()


def gen_dirichlet(sqrt_n, lambda_coeff=1.0, beta_coeff=2.0, seed=0):
    """Discretized ``-Lap v + beta v = lambda max(v - phi, 0) + psi`` on the unit square.

    The planted solution samples ``max(0.5 - sin(pi x) sin(pi y), 0)`` on the
    interior grid. To fit the composite-max form, ``Q`` stacks ``(u, u + p)``
    into ``R^{2n}``, only the second block is constrained to ``[0, inf)``, and
    ``H`` applies the stencil to the first block and adds the ``max`` term.
    """
    if sqrt_n < 1:
        raise InvalidParameterError("sqrt_n must be positive")
    if not beta_coeff > abs(lambda_coeff):
        raise InvalidParameterError("beta_coeff must exceed |lambda_coeff|")
    N = sqrt_n
    n = N * N
    h = 1.0 / (N + 1)
    h2 = h * h
    x = h * np.arange(1, N + 1)
    X, Y = np.meshgrid(x, x, indexing="ij")
    u_star = np.maximum(-np.sin(np.pi * X) * np.sin(np.pi * Y) + 0.5, 0.0).ravel()

    r_p, r_u0 = _streams(seed, 2)
    p = -0.4 * r_p.random(n)
    u0 = 0.5 * r_u0.random(n)

    A = stencil_adjacency(N)
    denom = 4.0 + beta_coeff * h2
    lam_h2 = lambda_coeff * h2
    q = denom * u_star - A @ u_star - lam_h2 * np.maximum(u_star + p, 0.0)

    c = (4.0 + abs(lambda_coeff) * h2) / denom
    rho = 4.0 * math.cos(math.pi * h) if N > 1 else 0.0
    c_h = math.sqrt(rho**2 + lam_h2**2) / denom

    def q_map(u):
        return np.concatenate([u, u + p])

    def h_map(w):
        return (A @ w[:n] + lam_h2 * w[n:] + q) / denom

    cmap = CompositeMaxMap(
        q_map=q_map,
        h_map=h_map,
        box=ExtendedBox.concat(ExtendedBox.unbounded(n), ExtendedBox.nonnegative(n)),
        n=n,
        lipschitz_c=c,
        h_lipschitz=c_h,
        q_jac=lambda u: np.vstack([np.eye(n), np.eye(n)]),
        h_jac=lambda w: np.hstack([A.toarray(), lam_h2 * np.eye(n)]) / denom,
        metadata={"p": p, "q": q, "h": h},
    )
    meta = dict(
        family="dirichlet", sqrt_n=sqrt_n, n=n, lambda_coeff=lambda_coeff,
        beta_coeff=beta_coeff, seed=seed, h=h,
    )
    inst = ProblemInstance(cmap, u0, u_star, c, meta)
    return _check_planted(inst)


def toy_remark():
    """``G(u) = (max(u1/2, 0), 1 - u2/4)``, fixed point ``(0, 4/5)``, factor 1/2.

    Encoded as ``Q(u) = (u1/2, u1/2, 1 - u2/4)`` with the middle coordinate
    bounded above by 0 and ``H(v) = (v1 - v2, v3)``, since
    ``max(t, 0) = t - min(t, 0)``. Smoothing the upper bound then yields
    exactly ``psi(u1/2, mu)`` in the first component.
    """
    box = ExtendedBox(np.full(3, -np.inf), np.array([np.inf, 0.0, np.inf]))
    Jq = np.array([[0.5, 0.0], [0.5, 0.0], [0.0, -0.25]])
    Jh = np.array([[1.0, -1.0, 0.0], [0.0, 0.0, 1.0]])
    cmap = CompositeMaxMap(
        q_map=lambda u: np.array([0.5 * u[0], 0.5 * u[0], 1.0 - 0.25 * u[1]]),
        h_map=lambda v: np.array([v[0] - v[1], v[2]]),
        box=box,
        n=2,
        lipschitz_c=0.5,
        h_lipschitz=math.sqrt(2.0),
        q_jac=lambda u: Jq,
        h_jac=lambda v: Jh,
    )
    inst = ProblemInstance(
        cmap, np.array([1.0, 1.0]), np.array([0.0, 0.8]), 0.5, {"family": "toy"}
    )
    return _check_planted(inst)


def make_problem(family, seed=0, **params):
    """Build a family instance by name (``nash``, ``lcp-option``, ``dirichlet``, ``toy``)."""
    if family == "nash":
        return gen_nash(seed=seed, **params)
    if family == "lcp-option":
        return gen_lcp_option(seed=seed, **params)
    if family == "dirichlet":
        return gen_dirichlet(seed=seed, **params)
    if family == "toy":
        if params:
            raise InvalidInputError(f"toy takes no parameters, got {sorted(params)}")
        return toy_remark()
    raise InvalidInputError(f"unknown family {family!r}; expected one of {FAMILIES}")
