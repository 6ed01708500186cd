"""Linear minimization oracles over spectral / nuclear norm balls.

The NuMuon oracle minimizes ``<M, D>`` over ``{D : ||D||_2 <= rho, ||D||_* <= tau}``.
Rotating into the singular basis of ``M`` turns this into a linear program over
the capped simplex ``{s : 0 <= s_i <= rho, sum(s) <= tau}`` whose maximizer is
the greedy fill-in, so the oracle is ``-rho * U_k @ V_k.T`` for ``k = tau / rho``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput, InvalidRank
from .linalg import SvdTriple, _require_nonzero, as_matrix, block_krylov_topk, polar_factor_exact, thin_svd, topk_svd_exact


@dataclass(frozen=True)
class NormBudget:
    """Spectral cap ``rho`` and nuclear budget ``tau`` (``None`` means unbounded)."""

    rho: float = 1.0
    tau: float | None = None

    def __post_init__(self):
        if not self.rho > 0:
            raise InvalidInput(f"rho must be positive, got {self.rho}")
        if self.tau is not None and not self.tau > 0:
            raise InvalidInput(f"tau must be positive or None, got {self.tau}")

    @property
    def bounded(self) -> bool:
        return self.tau is not None and math.isfinite(self.tau)


@dataclass(frozen=True)
class CappedSimplexSolution:
    s: np.ndarray
    active_rank: int
    objective: float


@dataclass(frozen=True)
class KrylovParams:
    iters: int = 2
    block: int | None = None
    seed: int = 0


def _check_sigma(sigma) -> np.ndarray:
    sigma = np.asarray(sigma, dtype=np.float64).ravel()
    if sigma.size == 0 or not np.all(np.isfinite(sigma)):
        raise InvalidInput("sigma must be a non-empty finite vector")
    if np.any(sigma < 0):
        raise InvalidInput("sigma must be nonnegative")
    if np.any(np.diff(sigma) > 0):
        raise InvalidInput("sigma must be sorted nonincreasing")
    return sigma


def capped_simplex_lp(sigma, budget: NormBudget) -> CappedSimplexSolution:
    """Maximize ``sigma @ s`` over the capped simplex by greedy fill-in.

    Full blocks of ``rho`` go to the leading coordinates, the residual
    ``tau - floor(tau/rho) * rho`` to the next one, zeros after that.
    """
    sigma = _check_sigma(sigma)
    q = sigma.size
    rho = float(budget.rho)
    s = np.zeros(q)
    if not budget.bounded:
        s[:] = rho
    else:
        tau = float(budget.tau)
        k = int(math.floor(tau / rho))
        s[: min(k, q)] = rho
        if k < q:
            s[k] = min(max(tau - k * rho, 0.0), rho)
    return CappedSimplexSolution(s=s, active_rank=int(np.count_nonzero(s > 0)), objective=float(sigma @ s))


def capped_simplex_vertices(q: int, rho: float, tau: float | None) -> np.ndarray:
    """All vertices of ``{0 <= s_i <= rho, sum(s) <= tau}`` in R^q (brute force, small q)."""
    if tau is None or not math.isfinite(tau):
        tau = q * rho
    verts = []
    for pattern in itertools.product((0, 1), repeat=q):
        full = np.array(pattern, dtype=float) * rho
        used = full.sum()
        if used <= tau + 1e-12:
            verts.append(full)
            rest = tau - used
            if 0 < rest < rho:
                for j in np.flatnonzero(np.array(pattern) == 0):
                    v = full.copy()
                    v[j] = rest
                    verts.append(v)
    return np.unique(np.array(verts), axis=0)


def brute_force_lp(sigma, budget: NormBudget) -> float:
    """LP optimum by evaluating the objective at every vertex."""
    sigma = _check_sigma(sigma)
    V = capped_simplex_vertices(sigma.size, budget.rho, budget.tau)
    return float(np.max(V @ sigma))


def rank_bound(rho: float, tau: float | None, q: int) -> int:
    if tau is None or not math.isfinite(tau):
        return q
    return min(q, math.ceil(tau / rho))


def spectral_lmo(M, rho: float = 1.0) -> np.ndarray:
    """``argmin <M, D>`` over the spectral ball of radius ``rho``: ``-rho * U @ V.T``."""
    return -rho * polar_factor_exact(as_matrix(M, "M"))


def topk_factors(
    M,
    k: int,
    svd_mode: str = "krylov",
    krylov: KrylovParams | None = None,
    warm_start=None,
    rng: np.random.Generator | None = None,
) -> SvdTriple:
    M = as_matrix(M, "M")
    if not 1 <= k <= min(M.shape):
        raise InvalidRank(f"k={k} outside [1, {min(M.shape)}]")
    if svd_mode == "exact":
        return topk_svd_exact(M, k)
    if svd_mode != "krylov":
        raise InvalidInput(f"unknown svd_mode {svd_mode!r}")
    p = krylov or KrylovParams()
    return block_krylov_topk(
        M, k, block=p.block, iters=p.iters, warm_start=warm_start, seed=rng if rng is not None else p.seed
    )


def numuon_lmo(
    M,
    rho: float = 1.0,
    k: int = 1,
    svd_mode: str = "krylov",
    krylov: KrylovParams | None = None,
) -> np.ndarray:
    """Top-``k`` singular-direction oracle ``-rho * U_k @ V_k.T``."""
    M = as_matrix(M, "M")
    if not 1 <= k <= min(M.shape):
        raise InvalidRank(f"k={k} outside [1, {min(M.shape)}]")
    _require_nonzero(M, "M")
    t = topk_factors(M, k, svd_mode=svd_mode, krylov=krylov)
    return -rho * (t.U @ t.V.T)


def rms_scale(d_out: int, d_in: int) -> float:
    """Shape factor ``sqrt(d_out / d_in)`` matching per-entry update RMS across aspect ratios."""
    if d_out < 1 or d_in < 1:
        raise InvalidInput("dimensions must be positive")
    return math.sqrt(d_out / d_in)


# --- projections used to measure distance to the feasible set -------------------


def _project_l1_nonneg(sigma: np.ndarray, tau: float) -> np.ndarray:
    """Euclidean projection of a nonnegative vector onto ``{s >= 0, sum(s) <= tau}``."""
    if sigma.sum() <= tau:
        return sigma.copy()
    u = np.sort(sigma)[::-1]
    css = np.cumsum(u) - tau
    idx = np.arange(1, u.size + 1)
    cond = u - css / idx > 0
    r = idx[cond][-1]
    theta = css[r - 1] / r
    return np.maximum(sigma - theta, 0.0)


def project_spectral_ball(X, rho: float) -> np.ndarray:
    t = thin_svd(X)
    return (t.U * np.minimum(t.s, rho)) @ t.V.T


def project_nuclear_ball(X, tau: float) -> np.ndarray:
    t = thin_svd(X)
    return (t.U * _project_l1_nonneg(t.s, tau)) @ t.V.T


def dist_to_feasible(X, rho: float, tau: float | None, tol: float = 1e-12, max_iter: int = 100_000) -> float:
    """Frobenius distance from ``X`` to ``{||D||_2 <= rho, ||D||_* <= tau}``.

    Computed by Dykstra's alternating projections between the two balls, which
    converges to the projection onto the intersection (plain alternation would
    only find some feasible point).
    """
    X = as_matrix(X, "X")
    if tau is None or not math.isfinite(tau):
        return float(np.linalg.norm(X - project_spectral_ball(X, rho)))
    x = X.copy()
    p = np.zeros_like(X)
    q = np.zeros_like(X)
    for _ in range(max_iter):
        y = project_spectral_ball(x + p, rho)
        p = x + p - y
        x_new = project_nuclear_ball(y + q, tau)
        q = y + q - x_new
        done = np.linalg.norm(x_new - x) <= tol and np.linalg.norm(x_new - y) <= tol
        x = x_new
        if done:
            break
    return float(np.linalg.norm(X - x))
