"""Exception hierarchy.

Every error raised deliberately by the library derives from ``PpscError``,
which is itself a ``ValueError``: all of them signal bad inputs or an
unsatisfiable request. The CLI maps them to exit code 1.
"""


class PpscError(ValueError):
    """Base class for all library errors."""


# graph
class GraphError(PpscError):
    pass


class DisconnectedPublicGraph(GraphError):
    pass


class NonPositiveWeight(GraphError):
    pass


class UnstableWeight(GraphError):
    pass


class IsolatedNode(GraphError):
    def __init__(self, node):
        super().__init__(f"node {node} has no private neighbour")
        self.node = node


# randomness / budgets
class DeltaOutOfRange(PpscError):
    pass


class NonPositiveEpsilon(PpscError):
    pass


class NegativeSigma(PpscError):
    pass


class BudgetError(PpscError):
    pass


# ppsc
class MalformedTranscript(PpscError):
    pass


class EnumerationTooLarge(PpscError):
    pass


# planner
class ZeroLambdaPpsc(PpscError):
    pass


class RankDeficient(PpscError):
    pass


class DeltaSharpNonPositive(PpscError):
    pass


class UnboundedGradient(PpscError):
    pass


# linear equations / optimisation
class Inconsistent(PpscError):
    pass


class DimensionMismatch(PpscError):
    pass


class StructureMismatch(PpscError):
    pass


class InfeasibleStart(PpscError):
    pass


class DegenerateLabels(PpscError):
    pass


# data ingestion
class BadMagic(PpscError):
    pass


class TruncatedFile(PpscError):
    pass


class CountMismatch(PpscError):
    pass


# harness
class ConfigError(PpscError):
    """Invalid configuration; the message starts with the offending key."""


class BoundViolation(ConfigError):
    """A manual override sits below the planner's sufficient bound."""
