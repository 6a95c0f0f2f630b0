"""Exception types shared across the package."""


class CsCertifyError(Exception):
    """Base class for all library errors."""


class ParameterError(CsCertifyError, ValueError):
    """An argument is outside its documented domain."""


class CardinalityError(CsCertifyError, ValueError):
    """A requested sample count is empty, full, or otherwise unreachable."""


class DimensionMismatchError(CsCertifyError, ValueError):
    """Operands have incompatible shapes."""


class SizeCapError(CsCertifyError, ValueError):
    """Problem size exceeds the cap of a combinatorial or conic routine."""


class InfeasibleError(CsCertifyError, RuntimeError):
    """A constrained problem has no solution within tolerance."""


class ConfigError(CsCertifyError, ValueError):
    """An experiment configuration failed validation."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        lines = "; ".join(f"{path}: {msg}" for path, msg in self.diagnostics)
        super().__init__(f"invalid configuration: {lines}")
