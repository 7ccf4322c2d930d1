import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from fpaccel.accelerate import DepthPolicy, StoppingRule, anderson_run
from fpaccel.composite_map import eval_G
from fpaccel.errors import (
    AmbiguousSolutionError,
    InvalidInputError,
    InvalidParameterError,
    NoSolutionError,
)
from fpaccel.problems import (
    LcpData,
    gen_dirichlet,
    gen_lcp_option,
    gen_nash,
    lcp_bruteforce,
    lcp_recover,
    lcp_rescale,
    make_problem,
    option_matrix,
    random_dominant_lcp,
    stencil_adjacency,
    toy_remark,
)


def tridiag(lo, d, up, n):
    return d * np.eye(n) + lo * np.eye(n, k=-1) + up * np.eye(n, k=1)


def assert_planted(inst):
    r = np.linalg.norm(eval_G(inst.map, inst.u_star) - inst.u_star)
    assert r <= 1e-10 * (1 + np.linalg.norm(inst.u_star))
    assert 0 < inst.contraction_c < 1


def assert_same_instance(a, b):
    np.testing.assert_array_equal(a.u0, b.u0)
    np.testing.assert_array_equal(a.u_star, b.u_star)
    assert a.contraction_c == b.contraction_c
    u = np.random.default_rng(0).standard_normal(a.n)
    np.testing.assert_array_equal(eval_G(a.map, u), eval_G(b.map, u))


def sampled_lipschitz_ok(inst, pairs=200, seed=0):
    rng = np.random.default_rng(seed)
    for _ in range(pairs):
        u = inst.u_star + rng.standard_normal(inst.n)
        v = u + rng.standard_normal(inst.n) * rng.choice([1e-4, 0.1, 1.0])
        lhs = np.linalg.norm(eval_G(inst.map, u) - eval_G(inst.map, v))
        assert lhs <= inst.contraction_c * np.linalg.norm(u - v) * (1 + 1e-8)


# nash

def test_nash_desk_scale():
    inst = gen_nash(20, 10, seed=3)
    assert_planted(inst)
    assert inst.n == 30
    np.testing.assert_array_equal(inst.u0, np.zeros(30))
    assert np.sum(inst.u_star == 0) == math.ceil(0.5 * 30)
    nz = inst.u_star[inst.u_star > 0]
    assert np.all((nz >= 0.1) & (nz < 1.0))
    sampled_lipschitz_ok(inst)


def test_nash_strong_monotonicity():
    inst = gen_nash(20, 10, a=1.0, b=2.0, seed=4)
    M, d, tau = inst.map.metadata["M"], inst.map.metadata["d"], inst.map.metadata["tau_L"]
    rng = np.random.default_rng(1)
    for _ in range(100):
        u, v = rng.standard_normal((2, inst.n))
        lhs = (M @ u + d - M @ v - d) @ (u - v)
        assert lhs >= tau * np.linalg.norm(u - v) ** 2 * (1 - 1e-8)


def test_nash_constants_consistent():
    inst = gen_nash(15, 8, seed=0)
    M = inst.map.metadata["M"]
    md = inst.map.metadata
    assert md["c_L"] == pytest.approx(np.linalg.norm(M, 2), rel=1e-8)
    assert md["alpha"] == pytest.approx(md["tau_L"] / md["c_L"] ** 2)
    c_ref = np.linalg.norm(np.eye(inst.n) - md["alpha"] * M, 2)
    assert inst.contraction_c == pytest.approx(c_ref, rel=1e-8)
    # diagonal draws bound the spectra of A and C from below
    A = M[:15, :15]
    assert np.linalg.eigvalsh(A).min() >= md["tau_L"] - 1e-10


def test_nash_deterministic():
    assert_same_instance(gen_nash(12, 6, seed=9), gen_nash(12, 6, seed=9))
    assert not np.array_equal(gen_nash(12, 6, seed=9).u_star, gen_nash(12, 6, seed=10).u_star)


def test_nash_zero_density_B():
    inst = gen_nash(6, 4, s1=0.0, seed=0)
    assert_planted(inst)
    assert np.all(inst.map.metadata["M"][:6, 6:] == 0)


def test_nash_validation():
    with pytest.raises(InvalidParameterError):
        gen_nash(0, 3)
    with pytest.raises(InvalidParameterError):
        gen_nash(3, 3, s1=1.5)
    with pytest.raises(InvalidParameterError):
        gen_nash(3, 3, a=-1.0)


def test_nash_full_scale_contraction():
    # Table row a,b = 0,0 reports c = 0.835
    inst = gen_nash(1000, 500, seed=0)
    assert inst.contraction_c == pytest.approx(0.835, abs=0.01)


# lcp-option

def test_lcp_option_contraction_closed_form():
    inst = gen_lcp_option(200, gamma_coeff=1000.0, seed=0)
    assert inst.contraction_c == pytest.approx(2 / (2 + 1000 / 201**2), rel=1e-15)
    assert inst.contraction_c == pytest.approx(0.98777, abs=1e-5)
    assert_planted(inst)
    np.testing.assert_array_equal(inst.u0, np.full(200, 0.5))


def test_lcp_option_matrix_orientation():
    M = option_matrix(4, gamma_coeff=10.0, tau_coeff=-1.0).toarray()
    h = 0.2
    assert M[1, 0] == pytest.approx(-1 - 0.5 * h * -1.0)
    assert M[0, 1] == pytest.approx(-1 + 0.5 * h * -1.0)
    assert M[0, 0] == pytest.approx(2 + 10 * h * h)


def test_lcp_option_active_fraction():
    inst = gen_lcp_option(2000, theta=0.4, seed=1)
    frac = np.mean(inst.u_star == 0)
    assert frac == pytest.approx(0.4, abs=0.04)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 60), st.floats(-50, 50), st.floats(0.1, 5000))
def test_lcp_option_dominance(n, tau, gamma):
    if not abs(tau) < 2 * (n + 1):
        with pytest.raises(InvalidParameterError):
            gen_lcp_option(n, gamma_coeff=gamma, tau_coeff=tau)
        return
    inst = gen_lcp_option(n, gamma_coeff=gamma, tau_coeff=tau)
    M = inst.lcp.M
    off = np.abs(M) - np.diag(np.abs(np.diag(M)))
    assert np.all(np.diag(M) > 0)
    assert np.all(off.sum(axis=1) < np.diag(M))
    assert np.all(off.sum(axis=0) < np.diag(M))
    assert_planted(inst)


def test_lcp_option_planted_is_lcp_solution():
    inst = gen_lcp_option(50, seed=2)
    v = inst.u_star
    w = inst.lcp.M @ v + inst.lcp.q
    assert v.min() >= 0 and w.min() >= -1e-14
    assert abs(v @ w) <= 1e-13


def test_lcp_option_validation():
    with pytest.raises(InvalidParameterError):
        gen_lcp_option(10, tau_coeff=22.0)
    with pytest.raises(InvalidParameterError):
        gen_lcp_option(10, theta=1.0)
    with pytest.raises(InvalidParameterError):
        gen_lcp_option(10, gamma_coeff=0.0)


def test_lcp_option_deterministic_and_lipschitz():
    assert_same_instance(gen_lcp_option(30, seed=4), gen_lcp_option(30, seed=4))
    sampled_lipschitz_ok(gen_lcp_option(30, seed=4))


# lcp_rescale / lcp_bruteforce

def test_rescale_identity():
    data = LcpData(np.eye(3), np.array([-1.0, 0.0, 2.0]))
    cmap = lcp_rescale(data)
    assert cmap.lipschitz_c == 0.0
    u = np.random.default_rng(0).standard_normal(3)
    np.testing.assert_array_equal(eval_G(cmap, u), [1.0, 0.0, 0.0])
    rep = anderson_run(cmap, u, DepthPolicy.fixed(0))
    assert rep.iterations == 1


def test_rescale_tridiag_solution():
    data = LcpData(tridiag(-1.0, 3.0, -1.0, 3), -np.ones(3))
    cmap = lcp_rescale(data)
    assert 0 < cmap.lipschitz_c < 1
    rep = anderson_run(cmap, np.zeros(3), DepthPolicy.fixed(2))
    np.testing.assert_allclose(lcp_recover(cmap, rep.u_final), [4 / 7, 5 / 7, 4 / 7], atol=1e-14)


def test_rescale_rejects_weak_dominance():
    with pytest.raises(InvalidInputError, match="row 1"):
        lcp_rescale(LcpData(tridiag(-1.0, 2.0, -1.0, 3), -np.ones(3)))
    M = np.array([[3.0, 0.5], [3.5, 4.0]])
    with pytest.raises(InvalidInputError, match="column 0"):
        lcp_rescale(LcpData(M, np.zeros(2)))
    with pytest.raises(InvalidInputError, match="diagonal"):
        lcp_rescale(LcpData(-np.eye(2), np.zeros(2)))


def test_rescale_contraction_formula_bounds_map():
    data = random_dominant_lcp(6, seed=3)
    cmap = lcp_rescale(data)
    rng = np.random.default_rng(0)
    for _ in range(200):
        u, v = rng.standard_normal((2, 6))
        lhs = np.linalg.norm(eval_G(cmap, u) - eval_G(cmap, v))
        assert lhs <= cmap.lipschitz_c * np.linalg.norm(u - v) * (1 + 1e-12)


def test_bruteforce_examples():
    np.testing.assert_array_equal(lcp_bruteforce(LcpData(np.eye(3), np.array([-1.0, 0.0, 1.0]))), [1, 0, 0])
    np.testing.assert_array_equal(lcp_bruteforce(LcpData(np.eye(3), np.ones(3))), np.zeros(3))
    v = lcp_bruteforce(LcpData(tridiag(-1.0, 3.0, -1.0, 3), -np.ones(3)))
    np.testing.assert_allclose(v, np.array([4, 5, 4]) / 7, atol=1e-14)
    # residual verification of the oracle itself
    M = tridiag(-1.0, 3.0, -1.0, 3)
    w = M @ v - 1
    assert np.all(w >= -1e-14) and abs(v @ w) < 1e-14


def test_bruteforce_errors():
    with pytest.raises(NoSolutionError):
        lcp_bruteforce(LcpData(np.array([[-1.0]]), np.array([-1.0])))
    with pytest.raises(AmbiguousSolutionError):
        lcp_bruteforce(LcpData(np.array([[-1.0]]), np.array([1.0])))
    with pytest.raises(InvalidInputError):
        lcp_bruteforce(LcpData(np.eye(13), np.ones(13)))


def test_lcp_data_shape_and_sparse():
    with pytest.raises(InvalidInputError):
        LcpData(np.eye(2), np.ones(3))
    d = LcpData(sp.identity(2), np.ones(2))
    assert isinstance(d.M, np.ndarray)


@pytest.mark.parametrize("seed", range(10))
def test_rescaled_anderson_recovers_bruteforce(seed):
    data = random_dominant_lcp(2 + seed % 9, seed=seed)
    cmap = lcp_rescale(data)
    rep = anderson_run(cmap, np.zeros(data.q.size), DepthPolicy.fixed(3), StoppingRule(1e-14))
    assert rep.converged
    assert np.abs(lcp_recover(cmap, rep.u_final) - lcp_bruteforce(data)).max() <= 1e-8


# dirichlet

def test_dirichlet_contraction_matches_table():
    inst = gen_dirichlet(64, 1.0, 2.0, seed=0)
    assert 1 - inst.contraction_c == pytest.approx(5.916e-5, abs=5e-8)
    for N, ref in [(16, 8.635e-4), (32, 2.294e-4), (128, 1.502e-5)]:
        h2 = 1 / (N + 1) ** 2
        assert 1 - (4 + h2) / (4 + 2 * h2) == pytest.approx(ref, rel=1e-3)


def test_dirichlet_stencil_two_by_two():
    A = stencil_adjacency(2).toarray()
    np.testing.assert_array_equal(A.sum(axis=1), [2, 2, 2, 2])
    np.testing.assert_array_equal(A, [[0, 1, 1, 0], [1, 0, 0, 1], [1, 0, 0, 1], [0, 1, 1, 0]])


def test_dirichlet_stencil_counts():
    A = stencil_adjacency(4).toarray()
    counts = sorted(A.sum(axis=1))
    assert counts == [2] * 4 + [3] * 8 + [4] * 4
    np.testing.assert_array_equal(A, A.T)


def test_dirichlet_planted_and_lipschitz():
    inst = gen_dirichlet(8, 1.0, 2.0, seed=1)
    assert_planted(inst)
    sampled_lipschitz_ok(inst)
    assert np.all((inst.u0 >= 0) & (inst.u0 < 0.5))
    p = inst.map.metadata["p"]
    assert np.all((p <= 0) & (p > -0.4))


def test_dirichlet_h_lipschitz():
    inst = gen_dirichlet(5, -1.5, 2.0, seed=0)
    J = inst.map.h_jac(None)
    assert inst.map.h_lipschitz == pytest.approx(np.linalg.norm(J, 2), rel=1e-12)


def test_dirichlet_negative_lambda_and_validation():
    assert_planted(gen_dirichlet(6, -1.0, 2.0, seed=0))
    with pytest.raises(InvalidParameterError):
        gen_dirichlet(6, 2.0, 2.0)
    with pytest.raises(InvalidParameterError):
        gen_dirichlet(0)


def test_dirichlet_deterministic():
    assert_same_instance(gen_dirichlet(6, seed=2), gen_dirichlet(6, seed=2))


# toy

def test_toy():
    inst = toy_remark()
    np.testing.assert_array_equal(inst.u_star, [0.0, 0.8])
    np.testing.assert_array_equal(eval_G(inst.map, np.array([1.0, 0.0])), [0.5, 1.0])
    assert inst.contraction_c == 0.5
    assert_planted(inst)
    iterates = []
    anderson_run(inst.map, np.array([1.0, 1.0]), DepthPolicy.fixed(0), callback=lambda k, u: iterates.append(u))
    errs = [np.linalg.norm(u - inst.u_star) for u in iterates]
    for a, b in zip(errs, errs[1:]):
        assert b <= 0.5 * a * (1 + 1e-12)


def test_make_problem():
    assert make_problem("toy").n == 2
    assert make_problem("dirichlet", seed=1, sqrt_n=3).n == 9
    with pytest.raises(InvalidInputError):
        make_problem("heat")
    with pytest.raises(InvalidInputError):
        make_problem("toy", n=3)
