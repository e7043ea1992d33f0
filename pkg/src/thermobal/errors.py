"""Exception types shared across the package."""


class ThermobalError(Exception):
    """Base class for all package-specific errors."""


class ContractViolation(ThermobalError, ValueError):
    """An argument or state violates a documented precondition."""


class UnknownLabelError(ThermobalError, KeyError):
    """A boundary-configuration or region label is not defined."""


class IntegrationBlowUpError(ThermobalError, RuntimeError):
    """The integrator produced a non-finite state."""

    def __init__(self, step, message=None):
        self.step = step
        super().__init__(message or f"non-finite state at integration step {step}")


class ShellUnreachableError(ThermobalError, RuntimeError):
    """The sampler could not enter or stay on the requested energy shell."""


class EmptyRestrictionError(ThermobalError, RuntimeError):
    """The sampler never produced a point inside the requested restriction."""


class MixingGuardError(ThermobalError, RuntimeError):
    """Too few inter-region crossings to trust a ratio estimate."""

    def __init__(self, crossings, required):
        self.crossings = crossings
        self.required = required
        super().__init__(
            f"insufficient region exchange: {crossings} crossings "
            f"(need >= {required})"
        )


class QuadratureError(ThermobalError, RuntimeError):
    """Adaptive quadrature failed to converge to the requested tolerance."""


class InsufficientDataError(ThermobalError, RuntimeError):
    """Too few events or arrivals for a conclusive statistic."""


class UndefinedRatioError(ThermobalError, ZeroDivisionError):
    """A probability ratio has a zero denominator."""


class OverestimateContractError(ThermobalError, ValueError):
    """A claimed reverse-probability overestimate falls below the true value."""


class ConfigError(ThermobalError, ValueError):
    """An experiment configuration failed schema validation."""
