"""Exception and warning types raised across the package."""


class IS2Error(Exception):
    """Base class for all package errors."""


class NumericalFailure(IS2Error):
    """A Monte Carlo computation produced no usable output."""


class AllWeightsZero(NumericalFailure):
    """Every importance weight is zero (or underflowed to zero)."""


class ParticleCollapse(NumericalFailure):
    """All observation densities of a particle filter underflowed at one period."""

    def __init__(self, t, message=None):
        self.t = t
        super().__init__(message or f"all particle weights underflowed at t={t}")


class NonFiniteWeight(NumericalFailure):
    """A latent importance weight evaluated to NaN or +inf."""

    def __init__(self, message, individual=None):
        self.individual = individual
        if individual is not None:
            message = f"{message} (individual {individual})"
        super().__init__(message)


class TooFewDraws(IS2Error):
    pass


class TooFewParticles(IS2Error):
    pass


class TooFewPilots(IS2Error):
    pass


class OddCount(IS2Error):
    """Antithetic sampling was asked for an odd number of draws."""


class NotConverged(NumericalFailure):
    pass


class InitFailure(NumericalFailure):
    """No admissible starting point for a Markov chain was found."""


class ConfigError(IS2Error):
    """A run configuration is malformed or inconsistent."""


class CapReachedWarning(UserWarning):
    """Particle tuning hit the particle-count cap before reaching its target."""


class DegenerateCovarianceWarning(UserWarning):
    """A fitted covariance was not positive definite; a diagonal fallback was used."""
