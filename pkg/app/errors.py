"""Error types shared by the analysis pipeline.

Every error carries a stable ``code`` so batch reports and HTTP responses can
refer to it without depending on the message text.
"""


class PulseSignatureError(ValueError):
    code = "PulseSignatureError"


class NonFinite(PulseSignatureError):
    code = "NonFinite"


class DominanceViolation(PulseSignatureError):
    code = "DominanceViolation"


class ZeroFundamental(PulseSignatureError):
    code = "ZeroFundamental"


class NotUnitEnergy(PulseSignatureError):
    code = "NotUnitEnergy"


class AliasingRisk(PulseSignatureError):
    code = "AliasingRisk"


class InvalidComponent(PulseSignatureError):
    code = "InvalidComponent"


class BadDof(PulseSignatureError):
    code = "BadDof"


class ZeroVariance(PulseSignatureError):
    code = "ZeroVariance"


class EmptySignal(PulseSignatureError):
    code = "EmptySignal"


class GridMismatch(PulseSignatureError):
    code = "GridMismatch"


class EmptyBand(PulseSignatureError):
    code = "EmptyBand"


class AllBelowFloor(PulseSignatureError):
    code = "AllBelowFloor"


class TooShort(PulseSignatureError):
    code = "TooShort"


class IllConditioned(PulseSignatureError):
    code = "IllConditioned"


class SingleClass(PulseSignatureError):
    code = "SingleClass"


class DimensionMismatch(PulseSignatureError):
    code = "DimensionMismatch"


class TooFewSamples(PulseSignatureError):
    code = "TooFewSamples"


class ParseError(PulseSignatureError):
    code = "ParseError"


class NonUniformSampling(PulseSignatureError):
    code = "NonUniformSampling"


class EmptyFile(PulseSignatureError):
    code = "EmptyFile"


def error_code(exc: BaseException) -> str:
    """Return the report code for an exception (class name for foreign errors)."""
    return getattr(exc, "code", type(exc).__name__)
