"""Exception hierarchy.

Every error carries a stable ``code`` string so that CLI output and
reports can be matched without parsing messages.
"""


class RotStarError(Exception):
    code = "ROTSTAR_ERROR"

    def __init__(self, message="", **details):
        super().__init__(message)
        self.details = details

    def __str__(self):
        msg = super().__str__()
        return f"{self.code}: {msg}" if msg else self.code


class NegativeDensityError(RotStarError, ValueError):
    code = "NEGATIVE_DENSITY"


class MalformedTableError(RotStarError, ValueError):
    code = "MALFORMED_TABLE"


class NoClassificationError(RotStarError):
    code = "NO_CLASSIFICATION"


class NotCompactError(RotStarError, ValueError):
    code = "NOT_COMPACT"


class NoBracketError(RotStarError):
    code = "NO_BRACKET"


class GridTooSmallError(RotStarError, ValueError):
    code = "GRID_TOO_SMALL"


class InadmissibleOmegaError(RotStarError, ValueError):
    code = "INADMISSIBLE_OMEGA"


class InadmissibleMomentumError(RotStarError, ValueError):
    code = "INADMISSIBLE_MOMENTUM"


class OddLmaxError(RotStarError, ValueError):
    code = "ODD_LMAX"


class EmptySupportError(RotStarError):
    code = "EMPTY_SUPPORT"


class MassUnreachableError(RotStarError):
    code = "MASS_UNREACHABLE"


class NoConvergenceError(RotStarError):
    code = "NO_CONVERGENCE"


class SeedFailureError(RotStarError):
    code = "SEED_FAILURE"


class STooSmallError(RotStarError, ValueError):
    code = "S_TOO_SMALL"


class ConfigError(RotStarError, ValueError):
    code = "CONFIG_ERROR"


class OutputError(RotStarError, OSError):
    code = "IO_ERROR"
