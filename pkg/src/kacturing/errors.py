"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Array lengths do not agree with the lattice size."""


class DomainError(ValueError):
    """An input lies outside its admissible range."""


class DegenerateKernelError(ValueError):
    """A kernel discretization produced no positive weight."""


class ConfigError(ValueError):
    """Invalid run configuration or experiment precondition."""


class InstabilityError(RuntimeError):
    """A macroscopic integration left the invariant region."""
