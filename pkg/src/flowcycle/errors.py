"""Exception hierarchy shared across the package."""

from __future__ import annotations


class FlowError(Exception):
    """Base class for all flowcycle errors (channel errors excepted)."""


# -- graph construction -------------------------------------------------------


class GraphError(FlowError):
    """Invalid workflow construction."""


class DuplicateName(GraphError):
    pass


class CycleInTree(GraphError):
    """A subgraph would end up with two parents (or contain itself)."""


class PathError(GraphError, LookupError):
    """A node, port or parameter path does not resolve."""


class TypeMismatch(GraphError):
    pass


class AlreadyConnected(GraphError):
    pass


class DirectionError(GraphError):
    pass


class NoMatch(GraphError):
    pass


class Ambiguous(GraphError):
    pass


class UnknownTarget(GraphError):
    pass


class HeterogeneousTypes(GraphError):
    pass


class UnknownKind(GraphError):
    pass


class FrozenError(GraphError):
    """Attempt to modify a workflow or parameter while it is executing."""


class ShapeError(GraphError):
    """A node does not have the port layout a pattern requires."""


# -- execution ----------------------------------------------------------------


class ValidationFailed(FlowError):
    def __init__(self, report) -> None:
        super().__init__(str(report))
        self.report = report


class NodeInterrupt(BaseException):
    """Raised inside a node body to unwind it. Not an error."""


class NodeStopped(NodeInterrupt):
    """The global stop signal was set."""


class NodeShutdown(NodeInterrupt):
    """A shutdown heuristic fired while the node was blocked."""


class NodeFailure(FlowError):
    """Error raised by a node body.

    ``retryable`` controls whether the runtime may re-invoke the body. Plain
    exceptions are treated as retryable.
    """

    retryable = True

    def __init__(self, message: str = "", *, retryable: bool | None = None) -> None:
        super().__init__(message)
        if retryable is not None:
            self.retryable = retryable


class FatalNodeError(NodeFailure):
    retryable = False


# -- serialization ------------------------------------------------------------


class SchemaError(FlowError):
    def __init__(self, message: str, position: str | None = None) -> None:
        self.position = position
        super().__init__(f"{position}: {message}" if position else message)


class VersionError(SchemaError):
    pass


class UnserializableParameterValue(FlowError):
    pass


class FlagCollision(FlowError):
    pass
