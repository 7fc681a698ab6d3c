"""Exception and warning types shared across the package."""


class PolyArgmaxError(Exception):
    """Base class for all library errors."""


class DegenerateInput(PolyArgmaxError):
    """Variance collapsed below the configured floor (e.g. an all-equal vector)."""


class InvalidParams(PolyArgmaxError, ValueError):
    pass


class RangeError(PolyArgmaxError, ValueError):
    """Plaintext input outside an approximation's guaranteed domain."""


class DomainError(PolyArgmaxError, ValueError):
    pass


class WidthMismatch(PolyArgmaxError):
    pass


class BadRotation(PolyArgmaxError):
    pass


class RangeProofViolation(PolyArgmaxError):
    """Interval analysis found an intermediate leaving a safe range."""

    def __init__(self, message, violations=()):
        super().__init__(message)
        self.violations = list(violations)


class SingularityError(PolyArgmaxError):
    pass


class FormatError(PolyArgmaxError):
    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class NonFiniteError(PolyArgmaxError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class BadSpec(PolyArgmaxError, ValueError):
    pass


class TieWarning(UserWarning):
    """Top-2 gap is below the tie tolerance; mass will split among tied entries."""


class QualityWarning(UserWarning):
    """A comparison mask landed far from {0, 1} (near-tie under approximate sign)."""


class UncheckedParamsWarning(UserWarning):
    """Parameters outside the convergence-guarantee regime (even power or small c)."""
