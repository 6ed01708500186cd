"""Dense linear-algebra kernels: thin SVD, QR, polar factors, Newton-Schulz, block Krylov.

Everything works in float64. Matrices are plain 2-D numpy arrays; the helpers
here validate them on entry rather than wrapping them in a custom type.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput, InvalidRank, RankDeficient, ZeroInput

# Quintic with p(1) = 1 and p'(1) = 0, so singular values converge quadratically
# to one. The popular Muon quintic below maximises slope at zero instead and
# settles in a band around 0.7-1.2 without ever reaching the polar factor.
DEFAULT_NS_COEFFS = (2.5, -2.5, 1.0)
MUON_QUINTIC_COEFFS = (3.4445, -4.7750, 2.0315)

_RANK_TOL = 1e-12


@dataclass(frozen=True)
class SvdTriple:
    """Factors of a thin or truncated SVD, ``A ~= U @ diag(s) @ V.T``."""

    U: np.ndarray
    s: np.ndarray
    V: np.ndarray

    @property
    def r(self) -> int:
        return int(self.s.shape[0])

    def truncate(self, k: int) -> SvdTriple:
        if not 1 <= k <= self.r:
            raise InvalidRank(f"k={k} outside [1, {self.r}]")
        return SvdTriple(self.U[:, :k], self.s[:k], self.V[:, :k])

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.s) @ self.V.T


def as_matrix(A, name: str = "A") -> np.ndarray:
    """Return ``A`` as a finite 2-D float64 array, raising InvalidInput otherwise."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise InvalidInput(f"{name} must be a non-empty 2-D matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInput(f"{name} has non-finite entries")
    return A


def _require_nonzero(A: np.ndarray, name: str = "A") -> None:
    if not np.any(A):
        raise ZeroInput(f"{name} is the zero matrix")


def _fix_signs(U: np.ndarray, V: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # first nonzero entry of each left singular vector is made nonnegative
    if U.shape[1] == 0:
        return U, V
    nz = np.abs(U) > 1e-14
    first = np.argmax(nz, axis=0)
    lead = U[first, np.arange(U.shape[1])]
    flip = np.where(lead < 0, -1.0, 1.0)
    return U * flip, V * flip


def _round_robin(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Pairings of ``n`` (even) indices into n-1 rounds of n/2 disjoint pairs."""
    order = list(range(n))
    rounds = []
    for _ in range(n - 1):
        p = np.array(order[: n // 2])
        q = np.array(order[::-1][: n // 2])
        rounds.append((p, q))
        order = [order[0]] + [order[-1]] + order[1:-1]
    return rounds


def _jacobi_square(R: np.ndarray, tol: float, max_sweeps: int):
    """One-sided Jacobi on the columns of a square-ish ``R`` (rows >= cols)."""
    B = R.copy()
    n = B.shape[1]
    pad = n % 2
    if pad:
        B = np.hstack([B, np.zeros((B.shape[0], 1))])
    N = B.shape[1]
    V = np.eye(N)
    rounds = _round_robin(N) if N > 1 else []
    for _ in range(max_sweeps):
        off = 0.0
        for p, q in rounds:
            Bp, Bq = B[:, p], B[:, q]
            alpha = np.einsum("ij,ij->j", Bp, Bp)
            beta = np.einsum("ij,ij->j", Bq, Bq)
            gamma = np.einsum("ij,ij->j", Bp, Bq)
            scale = np.sqrt(alpha * beta)
            active = (scale > 0) & (np.abs(gamma) > tol * scale)
            if not np.any(active):
                continue
            off = max(off, float(np.max(np.abs(gamma[active]) / scale[active])))
            g = np.where(active, gamma, 1.0)
            zeta = (beta - alpha) / (2.0 * g)
            t = np.where(zeta >= 0, 1.0, -1.0) / (np.abs(zeta) + np.sqrt(1.0 + zeta * zeta))
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = c * t
            c = np.where(active, c, 1.0)
            s = np.where(active, s, 0.0)
            B[:, p], B[:, q] = c * Bp - s * Bq, s * Bp + c * Bq
            Vp, Vq = V[:, p], V[:, q]
            V[:, p], V[:, q] = c * Vp - s * Vq, s * Vp + c * Vq
        if off <= tol:
            break
    if pad:
        B, V = B[:, :n], V[:n, :n]
    return B, V


def jacobi_svd(A, tol: float = 1e-15, max_sweeps: int = 80) -> SvdTriple:
    """Thin SVD by one-sided Jacobi rotations on the smaller Gram dimension.

    Dependency-free route used to cross-check the LAPACK path. Pairs are swept in
    round-robin order so each round rotates n/2 disjoint column pairs at once.
    """
    A = as_matrix(A)
    m, n = A.shape
    if m < n:
        t = jacobi_svd(A.T, tol=tol, max_sweeps=max_sweeps)
        U, V = _fix_signs(t.V, t.U)
        return SvdTriple(U, t.s, V)
    Q, R = np.linalg.qr(A)
    B, V = _jacobi_square(R, tol, max_sweeps)
    s = np.linalg.norm(B, axis=0)
    order = np.argsort(-s, kind="stable")
    s, B, V = s[order], B[:, order], V[:, order]
    smax = s[0] if s.size else 0.0
    good = s > max(smax * 1e-150, np.finfo(float).tiny)
    UR = np.zeros_like(B)
    UR[:, good] = B[:, good] / s[good]
    if not np.all(good):
        r0 = int(good.sum())
        full, _ = np.linalg.qr(UR[:, :r0], mode="complete") if r0 else (np.eye(n), None)
        UR[:, r0:] = full[:, r0:n]
    U, V = _fix_signs(Q @ UR, V)
    return SvdTriple(U, s, V)


def thin_svd(A, method: str = "lapack") -> SvdTriple:
    """Thin SVD with r = min(rows, cols) and a deterministic sign convention.

    ``method`` is ``"lapack"`` (numpy's divide-and-conquer driver, the default)
    or ``"jacobi"`` (see :func:`jacobi_svd`).
    """
    A = as_matrix(A)
    if method == "jacobi":
        return jacobi_svd(A)
    if method != "lapack":
        raise InvalidInput(f"unknown SVD method {method!r}")
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    U, V = _fix_signs(U, Vt.T)
    return SvdTriple(U, s, V)


def topk_svd_exact(A, k: int) -> SvdTriple:
    A = as_matrix(A)
    if not 1 <= k <= min(A.shape):
        raise InvalidRank(f"k={k} outside [1, {min(A.shape)}]")
    return thin_svd(A).truncate(k)


def qr_orthonormalize(A) -> np.ndarray:
    """Orthonormal basis (same column count) for the column space of a full-rank ``A``."""
    A = as_matrix(A)
    if A.shape[1] > A.shape[0]:
        raise InvalidInput(f"need cols <= rows, got shape {A.shape}")
    Q, R = np.linalg.qr(A)
    sv = np.linalg.svd(R, compute_uv=False)
    if sv[0] == 0.0 or sv[-1] <= _RANK_TOL * sv[0]:
        raise RankDeficient(f"numerical rank below {A.shape[1]} columns")
    d = np.sign(np.diag(R))
    d[d == 0] = 1.0
    return Q * d


def polar_factor_exact(A) -> np.ndarray:
    """``U @ V.T`` over the numerical range of ``A``.

    Singular directions with ``s_i <= max(m, n) * eps * s_1`` are dropped, so a
    rank-deficient input maps its null space to zero as Newton-Schulz does.
    """
    A = as_matrix(A)
    _require_nonzero(A)
    t = thin_svd(A)
    r = int(np.sum(t.s > max(A.shape) * np.finfo(float).eps * t.s[0]))
    return t.U[:, :r] @ t.V[:, :r].T


def newton_schulz(A, iters: int = 5, coeffs: tuple[float, float, float] = DEFAULT_NS_COEFFS) -> np.ndarray:
    """Odd-polynomial iteration toward the polar factor of ``A``.

    Starts from ``A / ||A||_F`` and applies
    ``X <- a X + b (X X^T) X + c (X X^T)^2 X`` exactly ``iters`` times. Tall
    inputs use the algebraically identical right-Gram form ``X (b S + c S^2)``
    with ``S = X^T X`` to keep the Gram matrix small.
    """
    A = as_matrix(A)
    _require_nonzero(A)
    if iters < 1:
        raise InvalidInput("iters must be >= 1")
    a, b, c = coeffs
    X = A / np.linalg.norm(A)
    tall = X.shape[0] > X.shape[1]
    for _ in range(iters):
        if tall:
            S = X.T @ X
            X = a * X + X @ (b * S + c * (S @ S))
        else:
            S = X @ X.T
            X = a * X + (b * S + c * (S @ S)) @ X
    return X


def _krylov_once(A: np.ndarray, B0: np.ndarray, k: int, iters: int) -> SvdTriple:
    B = qr_orthonormalize(B0)
    basis = []
    for _ in range(iters):
        T = A @ B
        B = qr_orthonormalize(A.T @ T)
        basis.append(B)
    Q = qr_orthonormalize(np.hstack(basis))
    small = thin_svd(A @ Q)
    U_k = small.U[:, :k]
    V_k = Q @ small.V[:, :k]
    U_k, V_k = _fix_signs(U_k, V_k)
    return SvdTriple(U_k, small.s[:k].copy(), V_k)


def block_krylov_topk(
    A,
    k: int,
    block: int | None = None,
    iters: int = 2,
    warm_start=None,
    seed: int | np.random.Generator | None = 0,
) -> SvdTriple:
    """Approximate top-``k`` SVD by randomized block Krylov iteration.

    Parameters
    ----------
    A : (m, n) array
    k : int
        Target rank, ``1 <= k <= min(m, n)``.
    block : int, optional
        Block width ``b >= k``; defaults to ``max(8, k)``.
    iters : int
        Number of two-sided multiplies; the Krylov basis holds ``iters * block``
        columns.
    warm_start : (n, block) array, optional
        Starting block in place of a Gaussian draw.
    seed : int or Generator
        Source for the Gaussian start block and for the one re-draw allowed
        after a degenerate QR.

    Notes
    -----
    When ``iters * block >= n`` the Krylov space is all of R^n, so the routine
    returns the exact truncated SVD instead of building an over-complete basis.
    """
    A = as_matrix(A)
    m, n = A.shape
    q = min(m, n)
    if not 1 <= k <= q:
        raise InvalidRank(f"k={k} outside [1, {q}]")
    block = max(8, k) if block is None else int(block)
    if block < k:
        raise InvalidInput(f"block={block} must be >= k={k}")
    if iters < 1:
        raise InvalidInput("iters must be >= 1")
    if iters * block >= n:
        return topk_svd_exact(A, k)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if warm_start is not None:
        B0 = as_matrix(warm_start, "warm_start")
        if B0.shape != (n, block):
            raise InvalidInput(f"warm_start must be {(n, block)}, got {B0.shape}")
    else:
        B0 = rng.standard_normal((n, block))
    try:
        return _krylov_once(A, B0, k, iters)
    except RankDeficient:
        return _krylov_once(A, rng.standard_normal((n, block)), k, iters)
