"""Exception hierarchy shared by every stage of the pipeline."""


class CrcEvalError(Exception):
    """Base class for all errors raised by :mod:`crceval`."""


class InputError(CrcEvalError, ValueError):
    """Invalid input data or configuration (CLI exit status 1)."""


class ParseError(InputError):
    pass


class UniquenessError(InputError):
    pass


class DomainError(InputError):
    pass


class ConfigurationError(InputError):
    pass


class ValidationError(InputError):
    pass


class PreconditionError(InputError):
    pass


class UndefinedRatioError(InputError, ZeroDivisionError):
    pass


class DegenerateLayoutError(InputError):
    pass


class EstimationError(CrcEvalError):
    """The model cannot be estimated on the given sample."""


class DegenerateModelError(EstimationError):
    pass


class UnderdeterminedError(EstimationError):
    pass


class InferenceError(EstimationError):
    pass
