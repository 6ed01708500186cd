"""Learning-rate and rank schedules.

Run with ``python demos/04_schedules.py``.
"""

# %%
from __future__ import annotations

from numuon.schedules import LrSchedule, RankSchedule, lr_at, rank_at, rank_fraction_at

T = 1000

# %% [markdown]
# Warmup-stable-decay keeps the peak rate for most of the run, then decays
# linearly. Cosine decays from the end of warmup.

# %%
wsd = LrSchedule(kind="wsd", base_lr=0.02, warmup_steps=30, total_steps=T, stable_fraction=0.8)
cos = LrSchedule(kind="cosine", base_lr=0.02, warmup_steps=30, total_steps=T)
for t in (0, 29, 100, 500, 800, 900, 999):
    print(f"t={t:4d}  wsd={lr_at(wsd, t):.5f}  cosine={lr_at(cos, t):.5f}")

# %% [markdown]
# The rank schedule holds full rank, then cosine-anneals to a floor. The
# fraction turns into an integer rank per block.

# %%
rs = RankSchedule(kind="cosine_hold", r_start=1.0, r_end=0.25, hold_steps=100, total_steps=T, anneal_steps=700)
for t in (0, 100, 275, 450, 625, 800, 999):
    f = rank_fraction_at(rs, t)
    print(f"t={t:4d}  fraction={f:.3f}  rank of a 128x128 block={rank_at(f, 128, 128)}")
