"""Truncated-SVD low-rank compression of checkpoints and evaluation of the result."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BlockTooSmall, FormatError, InvalidInput, InvalidRank
from .linalg import as_matrix, thin_svd
from .models import MlpModel, forward, loss_value


@dataclass(frozen=True)
class LowRankFactors:
    """``W ~= Wu @ Wv.T`` with singular values folded into ``Wu``."""

    Wu: np.ndarray
    Wv: np.ndarray

    @property
    def k(self) -> int:
        return int(self.Wu.shape[1])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.Wu.shape[0], self.Wv.shape[0])

    @property
    def size(self) -> int:
        return self.Wu.size + self.Wv.size

    def dense(self) -> np.ndarray:
        return self.Wu @ self.Wv.T


@dataclass
class CompressionPlan:
    rate: float
    policy: str
    per_block_rank: dict[str, int] = field(default_factory=dict)
    skipped_blocks: list[str] = field(default_factory=list)
    original_params: int = 0
    compressed_params: int = 0
    dense_params: int = 0
    rate_denominator: str = "compressed blocks only"

    @property
    def stored_params(self) -> int:
        return self.compressed_params + self.dense_params

    def to_dict(self) -> dict:
        return {
            "rate": self.rate,
            "policy": self.policy,
            "rate_denominator": self.rate_denominator,
            "per_block_rank": dict(self.per_block_rank),
            "skipped_blocks": list(self.skipped_blocks),
            "original_params": self.original_params,
            "compressed_params": self.compressed_params,
            "dense_params": self.dense_params,
            "stored_params": self.stored_params,
        }


def rate_to_rank(d_out: int, d_in: int, rate: float) -> int:
    """Largest ``k`` with ``k (d_out + d_in) <= (1 - rate) d_out d_in``."""
    if not 0 < rate < 1:
        raise InvalidInput(f"rate must lie in (0, 1), got {rate}")
    k = math.floor((1 - rate) * d_out * d_in / (d_out + d_in))
    if k < 1:
        raise BlockTooSmall(f"{d_out}x{d_in} block cannot meet rate {rate} even at rank 1")
    return k


def compress_block(W, k: int) -> LowRankFactors:
    W = as_matrix(W, "W")
    if not 1 <= k <= min(W.shape):
        raise InvalidRank(f"k={k} outside [1, {min(W.shape)}]")
    t = thin_svd(W).truncate(k)
    return LowRankFactors(Wu=t.U * t.s, Wv=t.V.copy())


def _is_weight(name: str, arr) -> bool:
    return name.endswith(".weight") and np.ndim(arr) == 2


def select_blocks(names: list[str], policy: str) -> list[str]:
    """Matrix blocks a policy compresses.

    ``body`` (default) skips the first and last layer, mirroring the usual choice
    of leaving embedding and output head dense; ``hidden`` is a synonym;
    ``all`` takes every weight matrix; otherwise a comma-separated list of names.
    """
    weights = sorted((n for n in names if n.endswith(".weight")), key=_layer_index)
    if policy in ("body", "hidden"):
        return weights[1:-1]
    if policy == "all":
        return weights
    chosen = [p.strip() for p in policy.split(",") if p.strip()]
    unknown = [c for c in chosen if c not in names]
    if unknown:
        raise InvalidInput(f"policy names unknown blocks {unknown}")
    return chosen


def _layer_index(name: str) -> int:
    head = name.split(".")[0]
    digits = "".join(ch for ch in head if ch.isdigit())
    return int(digits) if digits else 0


def compress_model(checkpoint: dict, rate: float, policy: str = "body") -> tuple[dict, CompressionPlan]:
    """Replace policy-selected weight matrices by rank-``rate_to_rank`` factors.

    Returns a new checkpoint mapping names to arrays or :class:`LowRankFactors`
    and the plan describing each decision.
    """
    if not isinstance(checkpoint, dict) or not checkpoint:
        raise FormatError("checkpoint must be a non-empty mapping of blocks")
    targets = set(select_blocks(list(checkpoint), policy))
    plan = CompressionPlan(rate=rate, policy=policy)
    out = {}
    for name, arr in checkpoint.items():
        if isinstance(arr, LowRankFactors):
            raise FormatError(f"block {name} is already factored")
        arr = np.asarray(arr, dtype=np.float64)
        if name in targets and _is_weight(name, arr):
            d_out, d_in = arr.shape
            plan.original_params += arr.size
            try:
                k = rate_to_rank(d_out, d_in, rate)
            except BlockTooSmall:
                plan.skipped_blocks.append(name)
                plan.dense_params += arr.size
                out[name] = arr
                continue
            k = min(k, min(d_out, d_in))
            f = compress_block(arr, k)
            plan.per_block_rank[name] = k
            plan.compressed_params += f.size
            out[name] = f
        else:
            plan.dense_params += arr.size
            out[name] = arr
    return out, plan


def densify(checkpoint: dict) -> dict[str, np.ndarray]:
    return {n: (v.dense() if isinstance(v, LowRankFactors) else np.asarray(v)) for n, v in checkpoint.items()}


def checkpoint_params(checkpoint: dict) -> int:
    return sum(v.size if isinstance(v, LowRankFactors) else np.asarray(v).size for v in checkpoint.values())


def eval_compressed(model: MlpModel, checkpoint: dict | None, X, Y, kind: str) -> dict[str, float]:
    """Loss of ``model`` with blocks replaced from ``checkpoint`` (dense or factored)."""
    m = model.copy()
    if checkpoint is not None:
        m.set_blocks(densify(checkpoint))
    pred, _ = forward(m, X)
    loss = loss_value(pred, np.asarray(Y), kind)
    out = {"loss": loss}
    if kind == "softmax_classification":
        out["perplexity"] = float(np.exp(loss))
        out["accuracy"] = float(np.mean(np.argmax(pred, axis=1) == np.asarray(Y)))
    return out
