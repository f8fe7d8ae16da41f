"""
Error types raised by the verification services.

Every error is a ValueError so callers that only care about "bad input"
can keep catching ValueError.
"""


class RepresentationError(ValueError):
    """A Field was passed in the wrong (physical/Fourier) representation."""


class SingularityError(ValueError):
    """A symbol is not finite where it is needed, or a homogeneous
    computation received a field with a nonzero mean."""


class InfiniteMomentError(ValueError):
    """A moment integral of a Levy measure diverges."""


class ConfigError(ValueError):
    """Invalid experiment configuration.

    `field` is the dotted path of the offending key, e.g. 'check.trials'.
    """

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")
