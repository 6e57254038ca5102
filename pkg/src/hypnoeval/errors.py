"""Exception hierarchy shared by every module."""


class HypnoEvalError(ValueError):
    """Base class for all library errors."""


class InvalidStage(HypnoEvalError):
    pass


class ShapeError(HypnoEvalError):
    pass


class NoScoredEpochs(HypnoEvalError):
    pass


class AlignmentError(HypnoEvalError):
    pass


class _LineError(HypnoEvalError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ParseError(_LineError):
    pass


class SequenceError(_LineError):
    pass


class NormalizationError(_LineError):
    pass


class EmptyInput(HypnoEvalError):
    pass


class IoError(HypnoEvalError):
    def __init__(self, path, reason="file not found"):
        self.path = str(path)
        super().__init__(f"{reason}: {self.path}")


class EmptyBundle(HypnoEvalError):
    pass


class SerializationError(HypnoEvalError):
    def __init__(self, field):
        self.field = field
        super().__init__(f"non-finite value in field {field!r}")


class EmptyEnsemble(HypnoEvalError):
    pass


class UndefinedConsensus(HypnoEvalError):
    pass


class EmptyConsensusSet(HypnoEvalError):
    pass


class DegenerateKappa(HypnoEvalError):
    pass


class ZeroVector(HypnoEvalError):
    pass


class NoSleep(HypnoEvalError):
    pass


class TooFewMembers(HypnoEvalError):
    pass


class DegenerateCovariance(HypnoEvalError):
    pass


class DegenerateLabels(HypnoEvalError):
    pass


class NoEvaluableFolds(HypnoEvalError):
    pass


class TooFewPairs(HypnoEvalError):
    pass


class MissingCovariate(HypnoEvalError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"covariate {name!r} missing from profile")


class InvalidInflation(HypnoEvalError):
    pass


class SchemaError(_LineError):
    pass


class ConfigError(HypnoEvalError):
    pass
