"""Exception types shared by the toolkit."""


class InvalidParameterError(ValueError):
    """A constructor or operation received an out-of-range parameter."""


class InvalidModeError(InvalidParameterError):
    """A Fourier mode that is not a half-integer."""


class PoleProximityError(InvalidParameterError):
    """Evaluation point lies within one grid cell of a pole."""


class NumericalFailure(RuntimeError):
    """An iterative or spectral solve did not converge.

    ``trace`` carries whatever diagnostics the failing routine collected
    (offending mode, Newton residual history, ...).
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace if trace is not None else {}


class PreconditionViolation(RuntimeError):
    """A hypothesis required by a bound or solver is not satisfied.

    ``hypothesis`` is a short human-readable name such as
    ``"no apparent horizon"``; ``witness`` is a JSON-friendly payload
    showing why it fails.
    """

    def __init__(self, hypothesis, message=None, witness=None):
        super().__init__(message or f"hypothesis violated: {hypothesis}")
        self.hypothesis = hypothesis
        self.witness = witness


class ScenarioError(ValueError):
    """Scenario input could not be parsed or validated.

    ``pointer`` is a JSON pointer (RFC 6901) to the offending location.
    """

    def __init__(self, message, pointer=""):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer
