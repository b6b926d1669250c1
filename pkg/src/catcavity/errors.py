"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: configuration problems exit
with 2, violated numerical contracts with 3, failed oracle cross-checks
with 4.
"""


class CatCavityError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(CatCavityError):
    """A run configuration is invalid or inconsistent."""


class NumericsError(CatCavityError):
    """A numerical contract was violated during a computation."""


class TailMassError(NumericsError):
    """Fock-space population leaked into the top cutoff levels."""


class RegisterCapError(NumericsError):
    """The running atom count would exceed the configured hard cap."""


class MemoryBudgetError(NumericsError):
    """A state would exceed the configured amplitude budget."""


class OracleCheckError(CatCavityError):
    """An independent oracle disagreed with the simulation."""
