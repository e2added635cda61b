"""Exception types raised across the package.

The class names double as the error names reported by the CLI (exit code 3).
"""


class MetricAuditError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(MetricAuditError, ValueError):
    pass


class NonFiniteScore(MetricAuditError, ValueError):
    def __init__(self, i, j, value):
        super().__init__(f"scorer returned non-finite value {value!r} at entry ({i}, {j})")
        self.i, self.j, self.value = i, j, value


class PolarityError(MetricAuditError, ValueError):
    pass


class PlanError(MetricAuditError, ValueError):
    pass


class IncompleteAudit(MetricAuditError, ValueError):
    pass


class TooFewSamples(MetricAuditError, ValueError):
    pass


class OverSampled(MetricAuditError, ValueError):
    pass


class EmptyStratum(MetricAuditError, ValueError):
    pass


class ConfigError(MetricAuditError, ValueError):
    pass


class ClaimMismatch(MetricAuditError, ValueError):
    pass


class TooFewClasses(MetricAuditError, ValueError):
    pass


class ZeroVector(MetricAuditError, ValueError):
    pass


class DegenerateModel(MetricAuditError, ValueError):
    pass


class DegenerateNeighborhood(MetricAuditError, ValueError):
    pass


class ParseError(MetricAuditError, ValueError):
    def __init__(self, line, message):
        super().__init__(f"line {line}: {message}")
        self.line = line
