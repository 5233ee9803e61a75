"""Exception types shared across the package."""


class RunvarError(Exception):
    """Base class for all domain errors."""


class CyclicPlan(RunvarError):
    """Operator DAG contains a cycle."""


class NoHistory(RunvarError):
    """No instance strictly before the requested point in time."""


class NoFuture(RunvarError):
    """No instance at or after the requested point in time."""


class InsufficientSamples(RunvarError):
    """Too few samples for the requested statistic."""


class EmptySample(RunvarError):
    """Histogram requested over zero values."""


class NonPositiveMedian(RunvarError):
    """Normalization median must be > 0."""


class SpecMismatch(RunvarError):
    """Binning specs of the operands differ."""


class TooFewGroups(RunvarError):
    """Fewer PMFs than requested clusters."""


class SchemaMismatch(RunvarError):
    """Feature schema fingerprint does not match the model's."""


class DegenerateLabels(RunvarError):
    """Training labels contain fewer than two classes."""


class EmptySplit(RunvarError):
    """A time-based split produced an empty side."""


class EmptyTest(RunvarError):
    """Evaluation requested on an empty test set."""


class EmptyJobSet(RunvarError):
    """Scenario requested on an empty job set."""


class UnknownFeature(RunvarError):
    """Intervention references a feature absent from the schema."""


class InvalidFraction(RunvarError):
    """Intervention left SKU fractions outside a valid distribution."""


class TooManyFeatures(RunvarError):
    """Exact Shapley enumeration is capped at 12 features."""


class ConfigError(RunvarError):
    """Invalid synthetic workload configuration."""


class IoError(RunvarError):
    """Dataset file could not be read or written."""


class ParseError(RunvarError):
    """A dataset line is not valid JSON."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class SchemaError(RunvarError):
    """A dataset record is missing or mistypes a field."""

    def __init__(self, field: str, message: str = "", line: int | None = None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}field '{field}'{': ' + message if message else ''}")
        self.field = field
        self.message = message
        self.line = line


class FingerprintMismatch(RunvarError):
    """Persisted model fingerprint does not match the current inputs."""
