from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from conftest import with_singular_values
from numuon.diagnostics import kyfan_norm
from numuon.errors import InvalidInput, InvalidRank, ZeroInput
from numuon.lmo import (
    KrylovParams,
    NormBudget,
    brute_force_lp,
    capped_simplex_lp,
    capped_simplex_vertices,
    dist_to_feasible,
    numuon_lmo,
    project_nuclear_ball,
    project_spectral_ball,
    rank_bound,
    rms_scale,
    spectral_lmo,
)


@pytest.mark.parametrize(
    "tau, s_star, obj",
    [(2.0, [1, 1, 0], 5.0), (3.0, [1, 1, 1], 6.0), (7.5, [1, 1, 1], 6.0), (1.5, [1, 0.5, 0], 4.0)],
)
def test_capped_simplex_examples(tau, s_star, obj):
    sol = capped_simplex_lp([3.0, 2.0, 1.0], NormBudget(rho=1.0, tau=tau))
    np.testing.assert_allclose(sol.s, s_star)
    assert sol.objective == pytest.approx(obj, abs=1e-14)
    assert brute_force_lp([3.0, 2.0, 1.0], NormBudget(1.0, tau)) == pytest.approx(obj, abs=1e-12)


def test_capped_simplex_unbounded_budget():
    sol = capped_simplex_lp([4.0, 1.0], NormBudget(rho=0.5))
    np.testing.assert_allclose(sol.s, [0.5, 0.5])
    assert sol.active_rank == 2


def test_capped_simplex_rejects_unsorted():
    with pytest.raises(InvalidInput):
        capped_simplex_lp([1.0, 2.0], NormBudget(1.0, 1.0))
    with pytest.raises(InvalidInput):
        capped_simplex_lp([1.0, -0.5], NormBudget(1.0, 1.0))


def test_vertices_are_feasible():
    V = capped_simplex_vertices(5, 0.7, 2.0)
    assert np.all(V >= -1e-15) and np.all(V <= 0.7 + 1e-15)
    assert np.all(V.sum(axis=1) <= 2.0 + 1e-12)


@settings(max_examples=200, deadline=None)
@given(
    sigma=st.lists(st.floats(0, 10, allow_nan=False), min_size=1, max_size=8),
    rho=st.floats(0.05, 3),
    tau=st.floats(0.01, 20),
)
def test_lp_matches_linprog(sigma, rho, tau):
    sigma = np.sort(np.array(sigma))[::-1]
    sol = capped_simplex_lp(sigma, NormBudget(rho, tau))
    q = sigma.size
    res = linprog(-sigma, A_ub=np.ones((1, q)), b_ub=[tau], bounds=[(0, rho)] * q, method="highs")
    assert res.status == 0
    assert sol.objective == pytest.approx(-res.fun, abs=1e-8 * max(1.0, abs(res.fun)))
    assert sol.objective == pytest.approx(brute_force_lp(sigma, NormBudget(rho, tau)), abs=1e-10)
    assert sol.active_rank <= rank_bound(rho, tau, q)
    assert np.all(sol.s <= rho) and sol.s.sum() <= tau + 1e-12


def test_rank_bound():
    assert rank_bound(1.0, 2.5, 10) == 3
    assert rank_bound(1.0, 2.0, 10) == 2
    assert rank_bound(1.0, 50.0, 4) == 4
    assert rank_bound(1.0, None, 4) == 4


def test_spectral_lmo_examples(rng):
    u, v = rng.standard_normal(5), rng.standard_normal(3)
    u, v = u / np.linalg.norm(u), v / np.linalg.norm(v)
    np.testing.assert_allclose(spectral_lmo(4.0 * np.outer(u, v), rho=0.5), -0.5 * np.outer(u, v), atol=1e-12)
    np.testing.assert_allclose(spectral_lmo(np.eye(2), rho=2.0), -2 * np.eye(2), atol=1e-14)
    with pytest.raises(ZeroInput):
        spectral_lmo(np.zeros((2, 3)))


def _random_spectral_feasible(rng, shape, rho):
    X = rng.standard_normal(shape)
    return rho * X / np.linalg.norm(X, 2)


def test_spectral_lmo_beats_random_candidates(rng):
    M = rng.standard_normal((6, 4))
    D = spectral_lmo(M, rho=1.0)
    best = np.sum(M * D)
    cands = [np.sum(M * _random_spectral_feasible(rng, M.shape, 1.0)) for _ in range(10_000)]
    assert best <= min(cands)
    assert best == pytest.approx(-np.linalg.svd(M, compute_uv=False).sum(), rel=1e-12)


def test_numuon_full_rank_is_spectral(rng):
    for shape in [(7, 7), (12, 5), (5, 12)]:
        M = rng.standard_normal(shape)
        np.testing.assert_allclose(numuon_lmo(M, 1.3, min(shape), "exact"), spectral_lmo(M, 1.3), atol=1e-8)


def test_numuon_rank_one(rng):
    M = np.outer(rng.standard_normal(6), rng.standard_normal(4))
    np.testing.assert_allclose(numuon_lmo(M, 2.0, 1, "exact"), 2.0 * spectral_lmo(M, 1.0), atol=1e-12)


def test_numuon_kyfan_alignment(rng):
    M = rng.standard_normal((32, 16))
    D = numuon_lmo(M, rho=0.7, k=4, svd_mode="exact")
    assert np.sum(M * D) == pytest.approx(-0.7 * kyfan_norm(M, 4), rel=1e-8)


def test_numuon_krylov_mode(rng):
    M = with_singular_values(rng, 40, 30, np.concatenate([[20.0, 15.0, 10.0], np.geomspace(2, 0.1, 27)]))
    D = numuon_lmo(M, 1.0, 3, "krylov", KrylovParams(iters=2, block=8, seed=1))
    np.testing.assert_allclose(D, numuon_lmo(M, 1.0, 3, "exact"), atol=1e-4)


def test_numuon_errors(rng):
    M = rng.standard_normal((4, 3))
    with pytest.raises(InvalidRank):
        numuon_lmo(M, 1.0, 4)
    with pytest.raises(InvalidRank):
        numuon_lmo(M, 1.0, 0)
    with pytest.raises(ZeroInput):
        numuon_lmo(np.zeros((4, 3)), 1.0, 1)
    with pytest.raises(InvalidInput):
        numuon_lmo(M, 1.0, 1, svd_mode="power")


def test_numuon_interpolation_and_scale(rng):
    M = rng.standard_normal((10, 6))
    vals = [np.sum(M * numuon_lmo(M, 1.0, k, "exact")) for k in range(1, 7)]
    assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))
    for c in (0.01, 3.0, 1e4):
        np.testing.assert_allclose(numuon_lmo(c * M, 1.0, 3, "exact"), numuon_lmo(M, 1.0, 3, "exact"), atol=1e-10)


def test_numuon_rank_from_tau(rng):
    M = rng.standard_normal((9, 7))
    for rho, tau in itertools.product([0.5, 1.0], [0.6, 1.7, 3.2, 100.0]):
        k = rank_bound(rho, tau, 7)
        D = numuon_lmo(M, rho, k, "exact")
        assert np.linalg.matrix_rank(D, tol=1e-9) <= min(7, int(np.ceil(tau / rho)))


def test_rms_scale():
    assert rms_scale(4, 4) == 1.0
    assert rms_scale(9, 4) == 1.5
    assert rms_scale(1, 4) == 0.5
    with pytest.raises(InvalidInput):
        rms_scale(0, 3)


def test_projections(rng):
    X = with_singular_values(rng, 6, 5, [5.0, 3.0, 1.0, 0.5, 0.1])
    np.testing.assert_allclose(np.linalg.svd(project_spectral_ball(X, 2.0), compute_uv=False), [2, 2, 1, 0.5, 0.1])
    s = np.linalg.svd(project_nuclear_ball(X, 4.0), compute_uv=False)
    assert s.sum() == pytest.approx(4.0)
    # soft threshold by theta = 2: (3, 1, 0, ...)
    np.testing.assert_allclose(s, [3, 1, 0, 0, 0], atol=1e-12)


def test_dist_to_feasible(rng):
    X = with_singular_values(rng, 5, 4, [3.0, 2.0, 0.5, 0.2])
    # spectral cap alone: (3-1)^2 + (2-1)^2
    assert dist_to_feasible(X, 1.0, None) == pytest.approx(np.sqrt(5.0))
    inside = with_singular_values(rng, 5, 4, [0.5, 0.3, 0.1, 0.0])
    assert dist_to_feasible(inside, 1.0, 1.0) == pytest.approx(0.0, abs=1e-12)
    # the intersection is spectral-equivariant, so the answer is the vector distance
    # from (3, 2, 0.5, 0.2) to {0 <= s <= 1, sum s <= 1.5}: clip(sigma - 1.5, 0, 1) = (1, 0.5, 0, 0)
    want = np.linalg.norm(np.array([3, 2, 0.5, 0.2]) - [1, 0.5, 0, 0])
    assert dist_to_feasible(X, 1.0, 1.5) == pytest.approx(want, abs=1e-9)


def closed_form_dist(X, rho, tau):
    """Distance to the capped set via its spectral form: clip(sigma - theta, 0, rho)."""
    s = np.linalg.svd(X, compute_uv=False)
    proj = lambda th: np.clip(s - th, 0.0, rho)
    if proj(0.0).sum() <= tau:
        return np.linalg.norm(s - proj(0.0))
    lo, hi = 0.0, s.max()
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if proj(mid).sum() > tau else (lo, mid)
    return np.linalg.norm(s - proj(hi))


def test_dykstra_matches_closed_form(rng):
    for _ in range(20):
        m, n = rng.integers(2, 9, 2)
        X = 3 * rng.standard_normal((m, n))
        rho, tau = rng.uniform(0.2, 2.0), rng.uniform(0.3, 5.0)
        assert dist_to_feasible(X, rho, tau) == pytest.approx(closed_form_dist(X, rho, tau), abs=1e-9)
