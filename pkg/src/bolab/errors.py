class BolabError(Exception):
    """Base class for errors raised by this package."""


class DegenerateStepError(BolabError, ValueError):
    """Finite-difference step is not positive or the difference Jacobian is singular."""


class QuadratureError(BolabError, ArithmeticError):
    """A radial integral did not converge to the requested tolerance."""


class DegenerateWeightsError(BolabError, ArithmeticError):
    """Importance weights collapsed onto too few samples."""

    def __init__(self, ess: float, floor: float):
        super().__init__(f"effective sample size {ess:.1f} below {floor:g}; cutoff excludes nearly all samples")
        self.ess = ess
        self.floor = floor


class DimensionMismatchError(BolabError, ValueError):
    """Sampler and flow disagree on the truncation level."""


class ConfigError(BolabError, ValueError):
    """One or more configuration violations; all of them are listed."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))
