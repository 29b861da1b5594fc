class PreconditionError(ValueError):
    """Input violates an operation's documented precondition."""


class NotStrictlyContracting(PreconditionError):
    """Some projective map does not send [-1, 1] strictly inside itself."""


class ArcConstructionFailed(RuntimeError):
    """No certified common invariant arc was found within the halving budget."""


class PositivityFailed(RuntimeError):
    """The conjugated matrices are not all entrywise positive."""


class BudgetExceeded(PreconditionError):
    """A word enumeration would exceed its size budget."""
