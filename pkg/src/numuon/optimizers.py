"""Step rules for AdamW, Muon and NuMuon over named parameter blocks.

Matrix blocks take Muon or NuMuon; vectors (biases, gains) always take AdamW.
Step functions return the new weight and advance the block's state in place.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInput, InvalidRank, InvalidStep, MissingGradient, RankDeficient, ShapeError
from .linalg import DEFAULT_NS_COEFFS, newton_schulz, polar_factor_exact, topk_svd_exact
from .lmo import KrylovParams, rms_scale, topk_factors
from .schedules import LrSchedule, RankSchedule, lr_at, rank_at, rank_fraction_at

log = logging.getLogger(__name__)


@dataclass
class ParamBlock:
    name: str
    weight: np.ndarray
    is_matrix_param: bool | None = None

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        if self.is_matrix_param is None:
            self.is_matrix_param = self.weight.ndim == 2 and min(self.weight.shape) > 1


@dataclass
class OptimizerState:
    step: int = 0
    momentum: np.ndarray | None = None
    adam_m: np.ndarray | None = None
    adam_v: np.ndarray | None = None
    warm_block: np.ndarray | None = None
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))
    fallbacks: int = 0
    last_update: np.ndarray | None = None


@dataclass
class StepConfig:
    lr: float = 0.02
    beta: float = 0.95
    weight_decay: float = 0.1
    rho: float = 1.0
    mode: str = "muon"
    rank: int | None = None
    fw_style: bool = False
    rms_scaling: bool = True
    polar: str = "newton_schulz"
    ns_iters: int = 5
    ns_coeffs: tuple[float, float, float] = DEFAULT_NS_COEFFS
    svd_mode: str = "krylov"
    krylov_iters: int = 2
    krylov_block: int | None = None
    momentum_init: str = "zeros"
    adam_lr: float = 3e-3
    adam_betas: tuple[float, float] = (0.9, 0.95)
    adam_eps: float = 1e-8
    adam_weight_decay: float = 0.1

    def __post_init__(self):
        if not 0 <= self.beta < 1:
            raise InvalidInput(f"beta must lie in [0, 1), got {self.beta}")
        if not self.lr > 0:
            raise InvalidInput("lr must be positive")
        if self.mode not in ("muon", "numuon", "adamw"):
            raise InvalidInput(f"unknown mode {self.mode!r}")
        if self.polar not in ("newton_schulz", "exact"):
            raise InvalidInput(f"unknown polar method {self.polar!r}")
        if self.momentum_init not in ("zeros", "first_grad"):
            raise InvalidInput(f"unknown momentum_init {self.momentum_init!r}")
        if self.weight_decay < 0:
            raise InvalidInput("weight_decay must be nonnegative")
        self.ns_coeffs = tuple(self.ns_coeffs)
        self.adam_betas = tuple(self.adam_betas)


def _check_shape(ref: np.ndarray, grad: np.ndarray) -> None:
    if ref.shape != grad.shape:
        raise ShapeError(f"gradient shape {grad.shape} does not match {ref.shape}")


def momentum_update(state: OptimizerState, grad, beta: float, init: str = "zeros") -> np.ndarray:
    """EMA momentum ``M_t = beta * M_{t-1} + (1 - beta) * G_t``.

    With ``init="first_grad"`` the very first call sets ``M_0 = G_0`` instead of
    starting from a zero buffer.
    """
    grad = np.asarray(grad, dtype=np.float64)
    if state.momentum is None:
        if init == "first_grad":
            state.momentum = grad.copy()
            return state.momentum
        state.momentum = np.zeros_like(grad)
    _check_shape(state.momentum, grad)
    state.momentum = beta * state.momentum + (1.0 - beta) * grad
    return state.momentum


def _scale(cfg: StepConfig, shape) -> float:
    return rms_scale(shape[0], shape[1]) if cfg.rms_scaling else 1.0


def _apply_direction(W: np.ndarray, direction: np.ndarray, cfg: StepConfig, lr: float) -> np.ndarray:
    """Additive step with decoupled decay, or a Frank-Wolfe convex combination."""
    delta = -cfg.rho * _scale(cfg, W.shape) * direction
    if cfg.fw_style:
        return fw_step(W, delta, lr)
    return (1.0 - lr * cfg.weight_decay) * W + lr * delta


def muon_step(block: ParamBlock, state: OptimizerState, grad, cfg: StepConfig, lr: float | None = None) -> np.ndarray:
    """One Muon update: momentum, orthogonalize, decoupled weight decay, step."""
    lr = cfg.lr if lr is None else lr
    W = block.weight
    grad = np.asarray(grad, dtype=np.float64)
    _check_shape(W, grad)
    M = momentum_update(state, grad, cfg.beta, cfg.momentum_init)
    state.step += 1
    if not np.any(M):
        state.last_update = np.zeros_like(W)
        return W if cfg.fw_style else (1.0 - lr * cfg.weight_decay) * W
    if cfg.polar == "exact":
        O = polar_factor_exact(M)
    else:
        O = newton_schulz(M, cfg.ns_iters, cfg.ns_coeffs)
    new = _apply_direction(W, O, cfg, lr)
    state.last_update = new - W
    return new


def _warm_block(state: OptimizerState, n: int, block: int) -> np.ndarray | None:
    prev = state.warm_block
    if prev is None or prev.shape[0] != n:
        return None
    if prev.shape[1] >= block:
        return prev[:, :block]
    extra = state.rng.standard_normal((n, block - prev.shape[1]))
    return np.hstack([prev, extra])


def numuon_direction(state: OptimizerState, M: np.ndarray, k: int, cfg: StepConfig) -> np.ndarray:
    """``U_k @ V_k.T`` for the top-``k`` singular pairs of ``M``, with warm start and fallback."""
    if not 1 <= k <= min(M.shape):
        raise InvalidRank(f"k={k} outside [1, {min(M.shape)}]")
    if cfg.svd_mode == "exact":
        t = topk_svd_exact(M, k)
    else:
        block = cfg.krylov_block if cfg.krylov_block is not None else max(8, k)
        block = max(block, k)
        params = KrylovParams(iters=cfg.krylov_iters, block=block)
        warm = _warm_block(state, M.shape[1], block)
        try:
            t = topk_factors(M, k, "krylov", params, warm_start=warm, rng=state.rng)
        except RankDeficient:
            state.fallbacks += 1
            log.info("block Krylov QR degenerate twice; exact SVD for this step (k=%d)", k)
            t = topk_svd_exact(M, k)
    state.warm_block = t.V
    return t.U @ t.V.T


def numuon_step(
    block: ParamBlock, state: OptimizerState, grad, k: int, cfg: StepConfig, lr: float | None = None
) -> np.ndarray:
    """One NuMuon update: momentum, top-``k`` oracle direction, decoupled decay, step."""
    lr = cfg.lr if lr is None else lr
    W = block.weight
    grad = np.asarray(grad, dtype=np.float64)
    _check_shape(W, grad)
    if not 1 <= k <= min(W.shape):
        raise InvalidRank(f"k={k} outside [1, {min(W.shape)}]")
    M = momentum_update(state, grad, cfg.beta, cfg.momentum_init)
    state.step += 1
    if not np.any(M):
        state.last_update = np.zeros_like(W)
        return W if cfg.fw_style else (1.0 - lr * cfg.weight_decay) * W
    D = numuon_direction(state, M, k, cfg)
    new = _apply_direction(W, D, cfg, lr)
    state.last_update = new - W
    return new


def fw_step(weight, direction, gamma_t: float) -> np.ndarray:
    """Convex combination ``(1 - gamma) W + gamma D``."""
    if not 0 < gamma_t <= 1:
        raise InvalidStep(f"Frank-Wolfe step size must lie in (0, 1], got {gamma_t}")
    weight = np.asarray(weight, dtype=np.float64)
    direction = np.asarray(direction, dtype=np.float64)
    _check_shape(weight, direction)
    return (1.0 - gamma_t) * weight + gamma_t * direction


def adamw_step(block: ParamBlock, state: OptimizerState, grad, cfg: StepConfig, lr: float | None = None) -> np.ndarray:
    """AdamW with bias correction and decoupled weight decay."""
    lr = cfg.adam_lr if lr is None else lr
    W = block.weight
    grad = np.asarray(grad, dtype=np.float64)
    _check_shape(W, grad)
    b1, b2 = cfg.adam_betas
    if state.adam_m is None:
        state.adam_m = np.zeros_like(W)
        state.adam_v = np.zeros_like(W)
    state.step += 1
    t = state.step
    state.adam_m = b1 * state.adam_m + (1 - b1) * grad
    state.adam_v = b2 * state.adam_v + (1 - b2) * grad * grad
    m_hat = state.adam_m / (1 - b1**t)
    v_hat = state.adam_v / (1 - b2**t)
    new = (1.0 - lr * cfg.adam_weight_decay) * W - lr * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)
    state.last_update = new - W
    return new


def make_states(blocks: dict[str, ParamBlock], seed: int = 0) -> dict[str, OptimizerState]:
    """Fresh per-block states; each gets its own generator spawned from ``seed``."""
    names = sorted(blocks)
    children = np.random.SeedSequence(seed).spawn(len(names))
    return {n: OptimizerState(rng=np.random.default_rng(c)) for n, c in zip(names, children)}


def apply_step(
    blocks: dict[str, ParamBlock],
    states: dict[str, OptimizerState],
    grads: dict[str, np.ndarray],
    cfg: StepConfig,
    t: int,
    lr_schedule: LrSchedule | None = None,
    rank_schedule: RankSchedule | None = None,
) -> dict[str, int]:
    """Update every block in name order at step ``t``; returns the rank used per NuMuon block.

    The schedule scales both learning rates by ``lr_at(t) / base_lr`` so that the
    AdamW fallback follows the same profile as the matrix optimizer.
    """
    missing = [n for n in blocks if n not in grads]
    if missing:
        raise MissingGradient(f"no gradient for blocks {missing}")
    factor = lr_at(lr_schedule, t) / lr_schedule.base_lr if lr_schedule is not None else 1.0
    frac = rank_fraction_at(rank_schedule, t) if rank_schedule is not None else None
    ranks = {}
    for name in sorted(blocks):
        block, state, grad = blocks[name], states[name], grads[name]
        if cfg.mode == "adamw" or not block.is_matrix_param:
            block.weight = adamw_step(block, state, grad, cfg, cfg.adam_lr * factor)
        elif cfg.mode == "muon":
            block.weight = muon_step(block, state, grad, cfg, cfg.lr * factor)
        else:
            d_out, d_in = block.weight.shape
            if frac is not None:
                k = rank_at(frac, d_in, d_out)
            elif cfg.rank is not None:
                k = min(cfg.rank, min(d_out, d_in))
            else:
                k = min(d_out, d_in)
            ranks[name] = k
            block.weight = numuon_step(block, state, grad, k, cfg, cfg.lr * factor)
    return ranks
