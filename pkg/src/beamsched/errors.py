"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid system configuration (bad counts, ranges, or file contents)."""


class SingularChannel(ArithmeticError):
    """Effective channel matrix of a candidate set is singular or too
    ill-conditioned for ZF; the set is infeasible."""


class CombinatorialCapError(RuntimeError):
    """Exhaustive search refused: subset count exceeds the configured cap."""
