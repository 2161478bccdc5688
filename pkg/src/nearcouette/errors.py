"""Exception types raised by the toolkit."""


class NearCouetteError(Exception):
    """Base class for toolkit errors."""


class IllConditioned(NearCouetteError):
    """A resolvent solve is too close to the discrete spectrum."""

    def __init__(self, message: str, condition: float = float("nan")):
        super().__init__(message)
        self.condition = condition


class EvansDegenerate(NearCouetteError):
    """The Evans function is too small for the corrector system to be trusted."""


class AiryEvalFailure(NearCouetteError):
    """The complex Airy evaluation did not converge."""


class StepRejected(NearCouetteError):
    """A time step drifted off the moment constraints."""


class DegenerateFit(NearCouetteError):
    """A rate fit was requested on a series without enough variation."""


class BlowupDetected(NearCouetteError):
    """A nonlinear run grew beyond the blow-up guard."""
