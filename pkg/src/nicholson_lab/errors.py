"""Exception types shared across the package."""


class ExprError(ValueError):
    """Base class for expression-language errors."""


class ExprSyntaxError(ExprError):
    """Raised when an expression fails to parse.

    Carries the 0-based index of the offending character in ``position``.
    Also used for unknown identifiers and wrong function arity, which are
    detected during parsing.
    """

    def __init__(self, message, position, source=""):
        self.position = position
        self.source = source
        super().__init__(f"{message} (at index {position})")


class ExprDomainError(ExprError):
    """Raised when evaluating an expression leaves the real domain.

    Examples: log of a non-positive value, division by zero, overflow to
    infinity. ``t`` is the time at which evaluation failed, when known.
    """

    def __init__(self, message, t=None, source=""):
        self.t = t
        self.source = source
        if t is not None:
            message = f"{message} while evaluating {source!r} at t={t!r}"
        super().__init__(message)


class NoPositiveEquilibrium(ValueError):
    """Raised when a positive equilibrium is requested but p <= delta."""


class PositivityLoss(RuntimeError):
    """Raised when an integrated population trajectory reaches a value <= 0.

    Carries the mesh time at which the violation occurred.
    """

    def __init__(self, t, value):
        self.t = t
        self.value = value
        super().__init__(f"trajectory lost positivity at t={t!r} (x={value!r})")


class MapUndefined(ValueError):
    """Raised when the feedback interval map is not well defined.

    That happens when (1 - e^{-delta*zeta}) * f(theta) >= 1; the offending
    value is carried in ``value``.
    """

    def __init__(self, value):
        self.value = value
        super().__init__(
            "interval map undefined: (1 - e^(-delta*zeta)) * f(theta) = "
            f"{value!r} >= 1"
        )


class ScenarioError(ValueError):
    """Raised for malformed scenario or sweep files; names the field."""
