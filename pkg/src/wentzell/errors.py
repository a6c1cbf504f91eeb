"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class WentzellError(Exception):
    """Base class for all errors raised by the package."""

    exit_code = 2
    kind = "numerical-failure"


class InvalidDomainError(WentzellError, ValueError):
    kind = "invalid-domain"


class TooCoarseError(WentzellError, ValueError):
    kind = "too-coarse"


class ShapeError(WentzellError, ValueError):
    kind = "shape-error"


class HypothesisViolation(WentzellError):
    """Coefficient data fails the standing positivity/ellipticity hypotheses."""

    exit_code = 1
    kind = "hypothesis-violation"


class NotEllipticError(HypothesisViolation):
    kind = "not-elliptic"


class AssemblyError(WentzellError):
    kind = "assembly-error"


class NotSPDError(WentzellError):
    kind = "not-spd"


class SingularSystemError(WentzellError):
    kind = "singular-system"

    def __init__(self, message, defect=None):
        super().__init__(message)
        self.defect = defect


class UnsupportedError(WentzellError):
    kind = "unsupported"


class PreconditionError(WentzellError, ValueError):
    kind = "precondition"


class ConfigError(WentzellError, ValueError):
    exit_code = 2
    kind = "config-error"


class AcceptanceFailure(WentzellError):
    exit_code = 3
    kind = "acceptance-failure"
