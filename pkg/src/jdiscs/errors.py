"""Exception hierarchy.  Every error carries the measured margin when one exists."""


class JDiscError(Exception):
    """Base class; ``margin`` is the measured violation, if any."""

    def __init__(self, message, margin=None):
        super().__init__(message)
        self.margin = margin


# geometry
class NotAStructure(JDiscError):
    pass


class SingularResolvent(JDiscError):
    pass


class NotConjugateLinear(JDiscError):
    pass


class NormTooLarge(JDiscError):
    pass


class SingularJacobianFactor(JDiscError):
    pass


class NotCentered(JDiscError):
    pass


class NotTotallyReal(JDiscError):
    pass


class DegenerateDefiningFunction(JDiscError):
    pass


class PshCertificationFailed(JDiscError):
    pass


class InverseDidNotConverge(JDiscError):
    pass


# disc operators
class TooCloseToBoundary(JDiscError):
    pass


class NonRealInput(JDiscError):
    pass


# solver
class RangeEscape(JDiscError):
    pass


class NoContraction(JDiscError):
    pass


class MaxIterExceeded(JDiscError):
    pass


class JetCorrectionFailed(JDiscError):
    pass


# family
class OutsideWedge(JDiscError):
    pass


class NewtonStalled(JDiscError):
    pass


# cli
class ConfigError(JDiscError):
    pass
