"""Spectral measurements of weights, gradients and updates."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InvalidInput, InvalidRank
from .linalg import _require_nonzero, as_matrix, thin_svd


def singular_values(A) -> np.ndarray:
    return np.linalg.svd(as_matrix(A), compute_uv=False)


def _check_k(A: np.ndarray, k: int) -> None:
    if not 1 <= k <= min(A.shape):
        raise InvalidRank(f"k={k} outside [1, {min(A.shape)}]")


def stable_rank(W) -> float:
    """``||W||_F^2 / ||W||_2^2``; lies in ``[1, min(W.shape)]``."""
    W = as_matrix(W, "W")
    _require_nonzero(W, "W")
    top = singular_values(W)[0]
    return float(np.sum(W * W) / top**2)


def normalized_stable_rank(W) -> float:
    W = as_matrix(W, "W")
    return stable_rank(W) / min(W.shape)


def kyfan_norm(A, k: int) -> float:
    """Sum of the ``k`` largest singular values."""
    A = as_matrix(A)
    _check_k(A, k)
    return float(np.sum(singular_values(A)[:k]))


def nuclear_norm(A) -> float:
    return float(np.sum(singular_values(A)))


def tail_energy_frob(G, k: int) -> float:
    """``||G - G_k||_F^2 = sum_{i>k} sigma_i^2`` for the best rank-``k`` truncation ``G_k``."""
    G = as_matrix(G, "G")
    _check_k(G, k)
    s = singular_values(G)
    return float(np.sum(s[k:] ** 2))


def tail_energy_nuclear(G, k: int) -> float:
    G = as_matrix(G, "G")
    _check_k(G, k)
    return float(np.sum(singular_values(G)[k:]))


def delta1_via_stable_rank(G) -> float:
    """Rank-one residual energy written as ``sigma_1^2 * (sr(G) - 1)``."""
    G = as_matrix(G, "G")
    _require_nonzero(G, "G")
    top = singular_values(G)[0]
    return float(top**2 * (stable_rank(G) - 1.0))


def _check_orthonormal(U: np.ndarray, name: str, tol: float = 1e-8) -> None:
    err = np.max(np.abs(U.T @ U - np.eye(U.shape[1])))
    if err > tol:
        raise InvalidInput(f"{name} columns are not orthonormal (max error {err:.2e})")


def principal_angles(U1, U2) -> np.ndarray:
    U1 = as_matrix(U1, "U1")
    U2 = as_matrix(U2, "U2")
    if U1.shape != U2.shape:
        raise InvalidInput(f"basis shapes differ: {U1.shape} vs {U2.shape}")
    _check_orthonormal(U1, "U1")
    _check_orthonormal(U2, "U2")
    C = U1.T @ U2
    # averaging the two orientations makes the result exactly symmetric in (U1, U2)
    s = 0.5 * (np.linalg.svd(C, compute_uv=False) + np.linalg.svd(C.T, compute_uv=False))
    cos = np.clip(s, 0.0, 1.0)
    return np.arccos(cos)


def grassmann_distance(U1, U2) -> float:
    """l2 norm of the principal angles between ``span(U1)`` and ``span(U2)``."""
    return float(np.linalg.norm(principal_angles(U1, U2)))


@dataclass
class SpectralReport:
    block_name: str
    step: int
    stable_rank: float
    normalized_stable_rank: float
    nuclear_norm: float
    top_singular: float
    tail_energy_k: dict[int, float] = field(default_factory=dict)
    grassmann_to_update: float | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["tail_energy_k"] = {str(k): v for k, v in self.tail_energy_k.items()}
        return d


def report_block(
    W,
    update=None,
    ks=(1,),
    subspace_k: int = 64,
    block_name: str = "",
    step: int = 0,
) -> SpectralReport:
    """Collect the spectral summary of one weight matrix.

    The Grassmann distance compares the top-``subspace_k`` left singular
    subspaces of ``W`` and ``update``; ``subspace_k`` is clamped to the smaller
    dimension and to the numerical rank of the update.
    """
    W = as_matrix(W, "W")
    _require_nonzero(W, "W")
    s = singular_values(W)
    q = min(W.shape)
    fro2 = float(np.sum(W * W))
    sr = fro2 / s[0] ** 2
    tails = {int(k): float(np.sum(s[k:] ** 2)) for k in ks if 1 <= k <= q}
    gd = None
    if update is not None:
        update = as_matrix(update, "update")
        if update.shape != W.shape:
            raise InvalidInput("update shape differs from W")
        if np.any(update):
            tu = thin_svd(update)
            urank = int(np.sum(tu.s > tu.s[0] * 1e-10))
            kk = max(1, min(subspace_k, q, urank))
            tw = thin_svd(W)
            gd = grassmann_distance(tw.U[:, :kk], tu.U[:, :kk])
    return SpectralReport(
        block_name=block_name,
        step=int(step),
        stable_rank=float(sr),
        normalized_stable_rank=float(sr / q),
        nuclear_norm=float(np.sum(s)),
        top_singular=float(s[0]),
        tail_energy_k=tails,
        grassmann_to_update=gd,
    )
