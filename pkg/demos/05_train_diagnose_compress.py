"""Train a small MLP with both optimizers, inspect spectra, then compress.

Run with ``python demos/05_train_diagnose_compress.py`` (about a minute).
The same pipeline is available as ``numuon train|diagnose|compress|eval``.
"""

# %%
from __future__ import annotations

from numuon.compression import compress_model, eval_compressed
from numuon.config import config_from_dict
from numuon.train import train_run

T = 600


def config(mode: str) -> dict:
    doc = {
        "seed": 0,
        "total_steps": T,
        "model": {"input_dim": 32, "hidden": [64, 64], "output_dim": 32},
        "task": {"teacher_rank": 8, "train_size": 2048, "eval_size": 256},
        "optimizer": {"mode": mode, "lr": 0.02},
        "lr_schedule": {"kind": "wsd", "warmup_steps": 20},
        "diagnostics": {"every": 100},
    }
    if mode == "numuon":
        doc["rank_schedule"] = {"kind": "cosine_hold", "r_end": 0.25, "hold_steps": 60, "anneal_steps": 420}
    return doc


# %%
runs = {mode: train_run(config_from_dict(config(mode))) for mode in ("muon", "numuon")}
for mode, r in runs.items():
    s = r.summary
    print(f"{mode:>7}: train {s['train_loss']:.4f}, eval {s['eval_loss']:.4f}, mean NSR {s['mean_normalized_stable_rank']:.3f}")

# %% [markdown]
# Per-block diagnostics are recorded every ``diagnostics.every`` steps.

# %%
for mode, r in runs.items():
    last = r.records[-1]["blocks"]
    for b in last:
        tails = {k: round(v, 3) for k, v in b["tail_energy_k"].items()}
        print(f"{mode:>7} {b['block_name']}: stable rank {b['stable_rank']:.2f}, tail energy {tails}, update rank {b.get('rank', '-')}")

# %% [markdown]
# Truncated-SVD compression of the hidden layers at several rates.

# %%
for rate in (0.2, 0.4, 0.6, 0.8):
    row = []
    for mode, r in runs.items():
        ckpt, plan = compress_model(r.model.blocks(), rate, policy="body")
        loss = eval_compressed(r.model, ckpt, r.dataset.X_eval, r.dataset.Y_eval, r.config.task.kind)["loss"]
        row.append(f"{mode} {loss:.4f}")
    print(f"rate {rate}: ranks {plan.per_block_rank}  " + "  ".join(row))
