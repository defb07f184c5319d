"""Exception hierarchy for the toolkit.

Every computational failure raises a subclass of ToolkitError so the CLI
can map them to exit code 1; precondition/hypothesis rejections raise
InconclusiveError subclasses mapped to exit code 3.
"""


class ToolkitError(Exception):
    """Base class for computational errors."""


class MalformedDomainError(ToolkitError):
    """Domain evaluation produced non-finite values or invalid parameters."""


class OffSurfaceError(ToolkitError):
    """A point expected on the boundary level set is off it beyond tolerance."""


class IntegrationError(ToolkitError):
    """Flow integration failed (projection Newton divergence, blowup)."""


class SectionError(ToolkitError):
    """Surface-of-section extraction failed (transversality or no return)."""


class ResolutionError(ToolkitError):
    """Arc sampling too coarse to lift an angle unambiguously."""


class InconsistentLiftError(ToolkitError):
    """Action residual check failed for a lift."""


class BoundaryDegeneracyError(ToolkitError):
    """Hamiltonian vector field blows up near the disk boundary."""


class MonotonicityError(ToolkitError):
    """Strip map is not radially monotone."""


class InconsistentInputError(ToolkitError):
    """Mixed-partial (closedness) check failed while assembling a gradient."""


class ConditionError(ToolkitError):
    """A generating-function correspondence condition fails; says which and where."""

    def __init__(self, condition, location, margin, message=None):
        self.condition = condition
        self.location = location
        self.margin = margin
        super().__init__(
            message
            or f"condition ({condition}) fails at node {location} with margin {margin:.3e}"
        )


class ConstructionError(ToolkitError):
    """DomainAaH validation failed (positivity or collar form)."""


class ConsistencyError(ToolkitError):
    """Two independent computations of the same quantity disagree."""


class CSizeError(ToolkitError):
    """Planar map exceeds the C^1 smallness bound for generating functions."""


class InconclusiveError(Exception):
    """Hypotheses not met or search budget exhausted; not a computational error."""


class HypothesisError(InconclusiveError):
    """Input rejected because a theorem hypothesis fails (e.g. negative action)."""
