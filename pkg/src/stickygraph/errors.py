"""Exception taxonomy shared by all stickygraph modules."""


class StickygraphError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(StickygraphError):
    """A numeric parameter violates its admissible range."""


class ConfigError(StickygraphError):
    """A configuration document violates the schema.

    Carries the offending key path so CLI errors can name it.
    """

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"config key '{key}': {message}")


class SingularPointError(StickygraphError):
    """Curvature evaluation requested at a corner/jump of the profile."""


class AssemblyError(StickygraphError):
    """Discrete slab system could not be assembled (grid/window mismatch)."""


class DivergenceError(StickygraphError):
    """Iteration produced non-finite values; carries the iteration dump."""

    def __init__(self, message: str, history=None, iterate=None):
        self.history = list(history) if history is not None else []
        self.iterate = iterate
        super().__init__(message)


class AccuracyError(StickygraphError):
    """Grid too coarse for the requested diagnostic (e.g. trace extrapolation)."""


class DegenerateFitError(StickygraphError):
    """Exponent fit has too few usable points above the noise floor."""


class InversionError(StickygraphError):
    """Graph inversion near a sticky wall failed (non-monotone detachment)."""


class IllPosedDataError(StickygraphError):
    """Exterior datum grows too fast for the requested extension."""


class RefinementHintError(StickygraphError):
    """Discrete linear system is singular; refine the grid."""


class OutputExistsError(StickygraphError):
    """Output directory already holds a run manifest; pass --force to overwrite."""
