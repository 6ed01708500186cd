"""Orthogonalized momentum optimizers (Muon) and their rank-budgeted variant (NuMuon).

The subpackages are plain modules:

- ``linalg``: SVD routes, Newton-Schulz polar iteration, randomized block Krylov top-k SVD
- ``lmo``: linear minimization oracles and the capped-simplex spectrum LP
- ``optimizers``: momentum, Muon/NuMuon/AdamW steps, Frank-Wolfe form
- ``schedules``: learning-rate and rank-fraction schedules
- ``diagnostics``: stable rank, Ky Fan norms, tail energies, principal angles
- ``compression``: truncated-SVD checkpoint compression
- ``models``/``train``: hand-differentiated MLPs, synthetic tasks, training loop
- ``config``/``io``/``cli``: run configuration, file formats, command line
"""

from .errors import (
    BlockTooSmall,
    ConfigError,
    Diverged,
    FormatError,
    InvalidInput,
    InvalidRank,
    InvalidStep,
    MissingGradient,
    NumuonError,
    RankDeficient,
    ShapeError,
    ZeroInput,
)
from .linalg import block_krylov_topk, newton_schulz, polar_factor_exact, thin_svd
from .lmo import NormBudget, capped_simplex_lp, numuon_lmo, spectral_lmo
from .optimizers import ParamBlock, StepConfig, apply_step, muon_step, numuon_step

__version__ = "0.1.0"

__all__ = [
    "BlockTooSmall",
    "ConfigError",
    "Diverged",
    "FormatError",
    "InvalidInput",
    "InvalidRank",
    "InvalidStep",
    "MissingGradient",
    "NormBudget",
    "NumuonError",
    "ParamBlock",
    "RankDeficient",
    "ShapeError",
    "StepConfig",
    "ZeroInput",
    "apply_step",
    "block_krylov_topk",
    "capped_simplex_lp",
    "muon_step",
    "newton_schulz",
    "numuon_lmo",
    "numuon_step",
    "polar_factor_exact",
    "spectral_lmo",
    "thin_svd",
]
