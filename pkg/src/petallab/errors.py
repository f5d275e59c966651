"""Exception taxonomy shared across the library.

The CLI maps PetallabError and subclasses to exit code 2 and input
parsing problems (InputFormatError, JSON and I/O errors) to exit code 3.
"""


class PetallabError(Exception):
    """Base class for domain, convergence and classification failures."""


class BranchCutError(PetallabError):
    """A principal power was requested on the slit (-inf, 0] or at 0."""


class NotInDomainError(PetallabError):
    """A point failed the membership predicate required by an operation."""


class TemplateMismatchError(PetallabError):
    """A germ does not match any of the supported lowest-order templates."""


class NotTangentToIdentityError(TemplateMismatchError):
    """Input germ is not tangent to the identity."""


class NotUnipotentError(TemplateMismatchError):
    """Input germ has a non-unipotent linear part."""


class ResonantGermError(PetallabError):
    """aM + bN = 0: the normalizing rescale does not exist."""


class InsufficientDataError(PetallabError):
    """Too few orbit steps for the requested diagnostic."""


class NoConvergenceError(PetallabError):
    """An iterative computation rejected its tail model."""


class SlowConvergenceError(NoConvergenceError):
    """The requested tolerance is unreachable within the step budget."""


class NoContractionError(NoConvergenceError):
    """The graph transform diverged (sector too large)."""


class GridResolutionError(PetallabError):
    """Interpolation error dominates the requested tolerance."""


class ExhaustedSearchError(PetallabError):
    """The exhaustion probe ran out of translates to try."""


class HypothesisNotSatisfiedError(PetallabError):
    """The germ's signature matches neither escape-analysis case."""


class DepthExceededError(PetallabError):
    """Resolution hit the depth cap; indicates a bug or bad center choice."""


class UnsupportedPointFieldError(PetallabError):
    """A singular point does not have Gaussian-rational coordinates."""


class UnsupportedGeometryError(PetallabError):
    """Local data at a classified point is outside the supported cases."""


class NotSingularError(PetallabError):
    """The vector field (or the log of the germ) is zero or nonsingular."""


class TruncationUnstableError(PetallabError):
    """Classification changed between truncation orders."""


class InputFormatError(ValueError):
    """Malformed interchange file; CLI exit code 3."""
