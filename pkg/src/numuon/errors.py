"""Exception types shared across the package."""


class NumuonError(Exception):
    """Base class for every error raised by this package."""


class InvalidInput(NumuonError, ValueError):
    pass


class ZeroInput(NumuonError, ValueError):
    pass


class RankDeficient(NumuonError, ArithmeticError):
    pass


class InvalidRank(NumuonError, ValueError):
    pass


class ShapeError(NumuonError, ValueError):
    pass


class InvalidStep(NumuonError, ValueError):
    pass


class MissingGradient(NumuonError, KeyError):
    pass


class BlockTooSmall(NumuonError, ValueError):
    """Raised when a low-rank factorization cannot save parameters."""


class FormatError(NumuonError, ValueError):
    """Checkpoint or metrics file does not parse."""


class ConfigError(NumuonError, ValueError):
    pass


class Diverged(NumuonError, ArithmeticError):
    """Training loss blew past the divergence guard."""
