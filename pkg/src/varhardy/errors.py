"""Exception types shared across the library."""


class AnalysisError(Exception):
    """Base class for all library-specific failures."""


class GridError(AnalysisError):
    """Invalid grid parameters or mismatched grids."""


class UnderResolvedError(AnalysisError):
    """A rescaled kernel has fewer than the minimum samples across its support."""


class InvalidExponentError(AnalysisError):
    """Exponent samples are non-positive or non-finite."""


class ConjugateUndefinedError(AnalysisError):
    """Pointwise conjugate exponent requested for an exponent with inf <= 1."""


class ShiftUndefinedError(AnalysisError):
    """Sobolev-type exponent shift leaves the admissible range."""


class InvalidInputError(AnalysisError):
    """Non-finite samples where finite values are required."""


class DegreeError(AnalysisError):
    """Declared polynomial degree is below the required moment degree."""


class IllConditionedError(AnalysisError):
    """Weighted projection Gram matrix is numerically singular."""


class DegenerateCubeError(AnalysisError):
    """Cube carries too few grid cells to determine the requested fit."""


class RegimeError(AnalysisError):
    """Operation called outside its exponent regime (e.g. needs sup p <= 1)."""


class ConstructionError(AnalysisError):
    """A constructive decomposition failed an internal consistency check."""


class BudgetInfeasibleError(AnalysisError):
    """Requested remainder budget is unreachable at the grid resolution."""


class ResolutionError(AnalysisError):
    """Kernel values blow up beyond what the grid spacing can integrate."""


class FileFormatError(AnalysisError):
    """Malformed serialized input; the message names the offending field."""
