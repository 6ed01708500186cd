"""Single Muon and NuMuon steps on a toy weight matrix.

Run with ``python demos/03_optimizer_steps.py``.
"""

# %%
from __future__ import annotations

import numpy as np

from numuon.diagnostics import normalized_stable_rank, stable_rank
from numuon.lmo import dist_to_feasible
from numuon.lmo import numuon_lmo
from numuon.optimizers import OptimizerState, ParamBlock, StepConfig, fw_step, momentum_update, muon_step, numuon_step

rng = np.random.default_rng(2)

# %% [markdown]
# Momentum is an exponential moving average. Starting from zeros it is biased
# towards zero early on; seeding with the first gradient removes that.

# %%
G = np.ones((2, 2))
for init in ("zeros", "first_grad"):
    st = OptimizerState()
    for _ in range(50):
        M = momentum_update(st, G, 0.95, init=init)
    print(f"{init:>10}: M_50 = {M[0, 0]:.4f}")

# %% [markdown]
# A Muon update has every singular value equal; a NuMuon update at rank k has
# exactly k equal singular values and zeros elsewhere.

# %%
W0 = rng.standard_normal((64, 32)) / 8
grad = rng.standard_normal((64, 32))
cfg = StepConfig(weight_decay=0.0, svd_mode="exact")
for name, step in [
    ("muon", lambda b, st, g: muon_step(b, st, g, cfg)),
    ("numuon k=4", lambda b, st, g: numuon_step(b, st, g, 4, cfg)),
]:
    block = ParamBlock("w", W0.copy())
    st = OptimizerState()
    step(block, st, grad)
    upd = st.last_update
    sv = np.linalg.svd(upd, compute_uv=False)
    print(f"{name:>10}: update stable rank {stable_rank(upd):5.2f}, nonzero singular values {np.sum(sv > 1e-10)}")

# %% [markdown]
# Repeated low-rank steps keep the weight's stable rank low. Compare the
# normalized stable rank after 200 steps on a random quadratic.

# %%
target = rng.standard_normal((64, 32))
cfg = StepConfig(lr=0.02)
for name, step in [
    ("muon", lambda b, st, g: muon_step(b, st, g, cfg)),
    ("numuon", lambda b, st, g: numuon_step(b, st, g, 4, cfg)),
]:
    block = ParamBlock("w", 0.1 * rng.standard_normal((64, 32)))
    st = OptimizerState(rng=np.random.default_rng(0))
    for _ in range(200):
        block.weight = step(block, st, block.weight - target)
    print(f"{name:>7}: normalized stable rank {normalized_stable_rank(block.weight):.3f}")

# %% [markdown]
# Frank-Wolfe steps toward feasible directions contract the distance to the
# feasible set by (1 - gamma) per step.

# %%
W = 4.0 * rng.standard_normal((8, 6))
d = [dist_to_feasible(W, 1.0, 3.0)]
for _ in range(10):
    W = fw_step(W, numuon_lmo(rng.standard_normal((8, 6)), 1.0, 3, svd_mode="exact"), 0.3)
    d.append(dist_to_feasible(W, 1.0, 3.0))
print("distance:", np.round(d, 4))
print("0.7^T bound:", np.round(d[0] * 0.7 ** np.arange(11), 4))
