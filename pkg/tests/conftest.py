from __future__ import annotations

import numpy as np
import pytest


def orthonormal(rng, n, k):
    Q, R = np.linalg.qr(rng.standard_normal((n, k)))
    return Q * np.sign(np.diag(R))


def with_singular_values(rng, m, n, s):
    """Random ``m x n`` matrix whose singular values are exactly ``s``."""
    s = np.asarray(s, dtype=float)
    return (orthonormal(rng, m, s.size) * s) @ orthonormal(rng, n, s.size).T


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
