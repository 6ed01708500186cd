"""Linear minimization over spectral and nuclear norm budgets.

Run with ``python demos/02_linear_minimization.py``.
"""

# %%
from __future__ import annotations

import numpy as np

from numuon.diagnostics import kyfan_norm
from numuon.lmo import NormBudget, brute_force_lp, capped_simplex_lp, dist_to_feasible, numuon_lmo, spectral_lmo

rng = np.random.default_rng(1)

# %% [markdown]
# In singular-value coordinates the problem is a linear program over a capped
# simplex. Greedy fill-in solves it; the brute-force vertex search agrees.

# %%
sigma = np.array([5.0, 3.0, 2.0, 1.0])
for tau in (1.0, 2.5, 10.0):
    sol = capped_simplex_lp(sigma, NormBudget(rho=1.0, tau=tau))
    print(f"tau={tau:4.1f}: s*={sol.s}, objective={sol.objective:.2f}, vertex search={brute_force_lp(sigma, NormBudget(1.0, tau)):.2f}")

# %% [markdown]
# The matrix answer uses the top-k singular pairs. With k = min(m, n) it is
# the spectral-norm answer; with smaller k it aligns with the Ky Fan k-norm.

# %%
M = rng.standard_normal((12, 8))
full = numuon_lmo(M, rho=1.0, k=8, svd_mode="exact")
print("k = min dim matches spectral LMO:", np.allclose(full, spectral_lmo(M, 1.0)))
for k in (1, 3, 8):
    D = numuon_lmo(M, rho=1.0, k=k, svd_mode="exact")
    print(f"k={k}: <M, D> = {np.sum(M * D):8.4f}   -Ky Fan_k = {-kyfan_norm(M, k):8.4f}   ||D||_F^2 = {np.sum(D * D):.1f}")

# %% [markdown]
# Distance to the feasible set {||X||_2 <= rho, ||X||_* <= tau} by alternating
# projections.

# %%
X = 3.0 * rng.standard_normal((6, 5))
for tau in (None, 4.0, 1.0):
    print(f"tau={tau}: dist = {dist_to_feasible(X, rho=1.0, tau=tau):.4f}")
