"""Exception hierarchy for the oqwalk package."""


class OQWalkError(Exception):
    """Base class for all domain errors raised by oqwalk."""


class DimensionMismatch(OQWalkError):
    """Operands have incompatible matrix or site dimensions."""


class ShapeMismatch(OQWalkError):
    """Channels being combined do not share (n_sites, internal_dim)."""


class ValidationError(OQWalkError):
    """A structure violates its invariants (positivity, trace, hermiticity)."""


class ColumnNotNormalized(OQWalkError):
    """A transition-matrix column fails the normalization sum."""

    def __init__(self, site: int, residual: float):
        self.site = site
        self.residual = residual
        super().__init__(
            f"column {site}: transition blocks do not sum to the identity "
            f"(residual {residual:.3e})"
        )


class NotStochastic(OQWalkError):
    """A real matrix is not column-stochastic."""


class NumericalFailure(OQWalkError):
    """A dense linear-algebra kernel failed to converge."""


class NotUnital(OQWalkError):
    """An operation requiring identity preservation got a non-unital input."""

    def __init__(self, index: int, message: str | None = None):
        self.index = index
        super().__init__(message or f"input {index} is not unital")


class NotConverged(OQWalkError):
    """An iteration exhausted its budget before meeting the tolerance."""

    def __init__(self, iterations: int, residual: float):
        self.iterations = iterations
        self.residual = residual
        super().__init__(
            f"no convergence after {iterations} iterations "
            f"(residual {residual:.3e})"
        )


class Divergent(OQWalkError):
    """A monotone iteration grows without bound at the reported site."""

    def __init__(self, site, cap: float):
        self.site = site
        self.cap = cap
        super().__init__(f"site {site}: iteration diverges (cap {cap:.1e})")


class DeadEnd(OQWalkError):
    """All branch probabilities vanished; the conditional state is corrupt."""


class WindowOverflow(OQWalkError):
    """Probability mass reached a hard-error lattice boundary."""


class NotNormal(OQWalkError):
    """A matrix expected to be normal is not."""


class NotCommuting(OQWalkError):
    """Matrices expected to commute do not."""

    def __init__(self, residual: float):
        self.residual = residual
        super().__init__(f"matrices do not commute (residual {residual:.3e})")


class NotNormalized(OQWalkError):
    """A left/right pair fails left*left + right*right = identity."""


class StartNotOrigin(OQWalkError):
    """First-visit closed forms require the walk to start at site 0."""


class SeriesUndetermined(OQWalkError):
    """A ratio series neither certifies divergence nor convergence."""


class NotASupersolution(OQWalkError):
    """A candidate fails the supersolution inequality at some site."""

    def __init__(self, site, deficit: float):
        self.site = site
        self.deficit = deficit
        super().__init__(
            f"site {site}: supersolution inequality violated by {deficit:.3e}"
        )


class ParseError(OQWalkError):
    """A model document is malformed at the reported location."""

    def __init__(self, location: str, message: str):
        self.location = location
        super().__init__(f"{location}: {message}")
