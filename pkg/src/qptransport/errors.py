"""Error taxonomy shared across the package.

Exit-code mapping lives in cli.main: ConfigError -> 3, HypothesisUnmet -> 2,
NumericalError (and subclasses) -> 4.
"""


class ConfigError(ValueError):
    """Bad or inconsistent run configuration."""


class NumericalError(RuntimeError):
    """A numerical routine failed or produced an untrustworthy result."""


class SingularEnergyError(NumericalError):
    """Resolvent requested at (numerically) an eigenvalue on the real axis."""


class UnsupportedModelError(ConfigError):
    """Operation requires model structure the given model does not have."""


class HypothesisUnmet(RuntimeError):
    """A run-level hypothesis (e.g. measured delta_hat <= delta) failed."""
