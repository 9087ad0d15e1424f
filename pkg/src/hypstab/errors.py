"""Exception hierarchy shared by every module."""


class HypStabError(Exception):
    """Base class for all library errors."""


class NumericalFailure(HypStabError):
    """A numerical routine could not produce a trustworthy result."""


class NonHyperbolic(NumericalFailure):
    pass


class OutOfDomain(NumericalFailure):
    pass


class BadParameter(HypStabError, ValueError):
    pass


class IntegrationFailure(NumericalFailure):
    pass


class NewtonDivergence(NumericalFailure):
    def __init__(self, message, residual=float("nan")):
        super().__init__(f"{message} (residual={residual:.3e})")
        self.residual = residual


class MeshFailure(NumericalFailure):
    pass


class QuadratureFailure(NumericalFailure):
    pass


class CollisionCascade(NumericalFailure):
    pass


class ConfigError(HypStabError):
    pass


class CriterionFailure(HypStabError):
    pass
