"""Deterministic desk-scale training loop producing a RunRecord stream and a checkpoint."""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .config import RunConfig, resolved_json
from .diagnostics import delta1_via_stable_rank, report_block
from .errors import Diverged
from .io import record_line, write_checkpoint
from .models import Dataset, MlpModel, forward, init_mlp, loss_and_grad, loss_value, make_dataset
from .optimizers import ParamBlock, apply_step, make_states
from .schedules import lr_at, rank_fraction_at

log = logging.getLogger(__name__)

DIVERGENCE_LIMIT = 1e6


@dataclass
class TrainResult:
    config: RunConfig
    model: MlpModel
    dataset: Dataset
    records: list[dict] = field(default_factory=list)
    summary: dict = field(default_factory=dict)


def hidden_weight_names(model: MlpModel) -> list[str]:
    """Weights of the layers that produce hidden activations (everything but the head)."""
    return [f"layer{i}.weight" for i in range(model.depth - 1)]


def model_meta(cfg: RunConfig) -> dict:
    return {
        "sizes": cfg.model.sizes,
        "activation": cfg.model.activation,
        "task": cfg.task.kind,
        "task_spec": asdict(cfg.task),
        "optimizer": cfg.optimizer.mode,
        "seed": cfg.seed,
    }


def model_from_meta(meta: dict, blocks: dict) -> MlpModel:
    sizes = meta["sizes"]
    model = init_mlp(sizes, meta.get("activation", "tanh"), rng=0)
    model.set_blocks(blocks)
    return model


def dataset_loss(model: MlpModel, X, Y, kind: str) -> float:
    return loss_value(forward(model, X)[0], np.asarray(Y), kind)


def _digest(name, W, update, grad, k, cfg: RunConfig, step: int) -> dict:
    rep = report_block(
        W, update=update, ks=cfg.diagnostics.ks, subspace_k=cfg.diagnostics.subspace_k, block_name=name, step=step
    ).to_dict()
    rep.pop("step")
    rep["grad_delta1"] = delta1_via_stable_rank(grad) if np.any(grad) else 0.0
    if k is not None:
        rep["rank"] = k
    return rep


def train_run(cfg: RunConfig, out_dir=None) -> TrainResult:
    """Run the full optimization loop for ``cfg``.

    Writes ``config.json``, ``metrics.jsonl``, ``final.ckpt`` and
    ``summary.json`` under ``out_dir`` (falling back to ``cfg.output_dir``)
    when a directory is given. Raises :class:`Diverged` when the batch loss is
    non-finite or exceeds ``DIVERGENCE_LIMIT``.
    """
    out_dir = out_dir if out_dir is not None else cfg.output_dir
    out = Path(out_dir) if out_dir is not None else None
    kind = cfg.task.kind
    data = make_dataset(cfg.task, cfg.model.input_dim, cfg.model.output_dim)
    model = init_mlp(cfg.model.sizes, cfg.model.activation, rng=np.random.default_rng([cfg.seed, 1]))
    blocks = {n: ParamBlock(n, w) for n, w in model.blocks().items()}
    states = make_states(blocks, seed=cfg.seed)
    batch_rng = np.random.default_rng([cfg.seed, 2])
    hidden = set(hidden_weight_names(model))
    n_train = data.X_train.shape[0]
    metrics_fh = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.json").write_text(resolved_json(cfg), encoding="utf-8")
        metrics_fh = open(out / "metrics.jsonl", "w", encoding="utf-8")
    result = TrainResult(cfg, model, data)
    start = time.perf_counter()
    try:
        for t in range(cfg.total_steps):
            idx = batch_rng.integers(0, n_train, cfg.batch_size)
            loss, grads = loss_and_grad(model, data.X_train[idx], data.Y_train[idx], kind)
            if not math.isfinite(loss) or loss > DIVERGENCE_LIMIT:
                raise Diverged(f"loss {loss} at step {t}")
            ranks = apply_step(blocks, states, grads, cfg.optimizer, t, cfg.lr_schedule, cfg.rank_schedule)
            model.set_blocks({n: b.weight for n, b in blocks.items()})
            rec = {
                "step": t,
                "loss": loss,
                "lr": lr_at(cfg.lr_schedule, t),
                "rank_fraction": rank_fraction_at(cfg.rank_schedule, t)
                if cfg.rank_schedule is not None and cfg.optimizer.mode == "numuon"
                else 1.0,
                "blocks": [],
            }
            if t % cfg.diagnostics.every == 0 or t == cfg.total_steps - 1:
                rec["blocks"] = [
                    _digest(n, blocks[n].weight, states[n].last_update, grads[n], ranks.get(n), cfg, t)
                    for n in sorted(hidden)
                ]
            if cfg.log_wall_time:
                rec["wall_time"] = time.perf_counter() - start
            result.records.append(rec)
            if metrics_fh is not None:
                metrics_fh.write(record_line(rec))
    finally:
        if metrics_fh is not None:
            metrics_fh.close()
    final_nsr = [b["normalized_stable_rank"] for b in result.records[-1]["blocks"]]
    result.summary = {
        "mode": cfg.optimizer.mode,
        "seed": cfg.seed,
        "steps": cfg.total_steps,
        "final_batch_loss": result.records[-1]["loss"],
        "train_loss": dataset_loss(model, data.X_train, data.Y_train, kind),
        "eval_loss": dataset_loss(model, data.X_eval, data.Y_eval, kind),
        "mean_normalized_stable_rank": float(np.mean(final_nsr)),
        "krylov_fallbacks": int(sum(s.fallbacks for s in states.values())),
    }
    if out is not None:
        write_checkpoint(out / "final.ckpt", model.blocks(), meta=model_meta(cfg))
        (out / "summary.json").write_text(json.dumps(result.summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return result
