"""Orthogonalizing a matrix three ways: exact polar factor, Newton-Schulz, block Krylov.

Run with ``python demos/01_polar_and_krylov.py``.
"""

# %%
from __future__ import annotations

import numpy as np

from numuon.linalg import MUON_QUINTIC_COEFFS, block_krylov_topk, newton_schulz, polar_factor_exact, thin_svd

rng = np.random.default_rng(0)

# %% [markdown]
# A 32x24 matrix with singular values spread over two decades. The polar
# factor keeps the singular vectors and replaces every singular value by 1.

# %%
U, _ = np.linalg.qr(rng.standard_normal((32, 24)))
V, _ = np.linalg.qr(rng.standard_normal((24, 24)))
s = np.geomspace(10.0, 0.1, 24)
A = (U * s) @ V.T

P = polar_factor_exact(A)
print("polar factor singular values:", np.round(thin_svd(P).s[[0, -1]], 12))

# %% [markdown]
# Newton-Schulz only needs matrix products. The error shrinks with more
# iterations; the quintic coefficients trade exactness for speed and settle
# in a band around 1 instead.

# %%
for iters in (3, 5, 8, 12):
    err = np.linalg.norm(newton_schulz(A, iters) - P)
    print(f"cubic NS, {iters:2d} iters: ||NS - polar||_F = {err:.2e}")

Q = newton_schulz(A, 5, coeffs=MUON_QUINTIC_COEFFS)
print("quintic NS singular values span", np.round(thin_svd(Q).s[[-1, 0]], 3))

# %% [markdown]
# When only the top-k directions matter, a randomized block Krylov solve is
# much cheaper than a full SVD. A spectral gap after index k makes it
# accurate after two iterations.

# %%
s_gap = np.concatenate([np.linspace(20, 10, 4), np.linspace(2, 0.1, 20)])
B = (U * s_gap) @ V.T
approx = block_krylov_topk(B, 4, block=8, iters=2, seed=1)
print("exact top-4:  ", np.round(s_gap[:4], 6))
print("krylov top-4: ", np.round(approx.s, 6))
