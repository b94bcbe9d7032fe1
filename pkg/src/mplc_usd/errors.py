"""Exception and warning types shared across the package."""


class InvalidArgument(ValueError):
    """A precondition on an argument was violated."""


class DegenerateInput(ValueError):
    """A state or image set does not have the rank the operation needs."""


class ConstructionViolated(ValueError):
    """The measurement construction does not apply to this state set."""


class NoSolution(ValueError):
    """The requested parameter branch has no solution."""


class ResolutionWarning(UserWarning):
    """A mode is under-sampled or not contained by the grid."""
