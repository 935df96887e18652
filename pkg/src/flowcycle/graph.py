"""Static workflow structure: nodes, ports, parameters, subgraphs and channels.

A :class:`Workflow` is a tree. Its leaves are :class:`Node` instances, its
interior vertices nested :class:`Workflow` objects (subgraphs). Channel edges
connect one output port to one input port anywhere below the workflow that
records them. Paths are slash-delimited with the port or parameter name after
a dot, e.g. ``"sub/node.out"``.

Nodes are declared as classes::

    class Double(Node):
        inp = Input("int")
        out = Output("int")
        factor = Parameter("int", default=2)

        def run(self):
            self.out.send(self.inp.receive() * self.factor.value)
"""

from __future__ import annotations

import copy
import logging
import os
import re
import shutil
import tempfile
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, ClassVar, Iterable, Iterator, Union

from .channels import (
    Cancelled,
    Channel,
    ChannelClosed,
    ChannelClosedAndEmpty,
    FileSet,
)
from .errors import (
    AlreadyConnected,
    Ambiguous,
    CycleInTree,
    DirectionError,
    DuplicateName,
    FrozenError,
    HeterogeneousTypes,
    NoMatch,
    PathError,
    TypeMismatch,
    UnknownKind,
    UnknownTarget,
)

WILDCARD = "any"
DEFAULT_CAPACITY = 16

_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


def check_identifier(name: str) -> str:
    if not isinstance(name, str) or not _IDENT.match(name):
        raise ValueError(f"invalid identifier {name!r}")
    return name


def _snake(name: str) -> str:
    return re.sub(r"(?<=[a-z0-9])([A-Z])", r"_\1", name).lower()


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PortType:
    """Symbolic type tag. ``"any"`` is the wildcard."""

    tag: str = WILDCARD

    @property
    def wildcard(self) -> bool:
        return self.tag == WILDCARD

    def compatible(self, other: "PortType") -> bool:
        return self.wildcard or other.wildcard or self.tag == other.tag

    def __str__(self) -> str:
        return self.tag


_PY_TYPES: dict[str, tuple[type, ...]] = {
    "int": (int,),
    "float": (int, float),
    "str": (str,),
    "string": (str,),
    "bool": (bool,),
    "path": (str, os.PathLike),
}


def value_matches(tag: str, value: Any) -> bool:
    """Loose runtime check of a parameter value against its tag."""
    if value is None or tag == WILDCARD:
        return True
    if tag in ("int", "float") and isinstance(value, bool):
        return False
    if tag in _PY_TYPES:
        return isinstance(value, _PY_TYPES[tag])
    if tag.startswith("list<") and tag.endswith(">"):
        inner = tag[5:-1]
        return isinstance(value, (list, tuple)) and all(value_matches(inner, v) for v in value)
    return True


# ---------------------------------------------------------------------------
# Ports
# ---------------------------------------------------------------------------


class _Detached:
    """Runtime stand-in used when a node runs outside the executor."""

    def cancelled(self) -> bool:
        return False

    def interrupt(self) -> None:
        raise RuntimeError("operation cancelled")

    def status(self, code) -> None:
        pass

    @property
    def work_dir(self) -> Path:
        return Path(tempfile.gettempdir())


_DETACHED = _Detached()


class Port:
    """A typed endpoint of a node.

    Declared on a node class as ``inp = Input("int")``; every node instance
    gets its own bound copy.
    """

    direction: ClassVar[str] = ""

    def __init__(self, tag: str = WILDCARD, *, optional: bool = False, doc: str | None = None) -> None:
        self.port_type = PortType(tag)
        self.optional = optional
        self.doc = doc
        self.name: str | None = None
        self.node: Node | None = None
        self.edge: ChannelEdge | None = None
        self._channel: Channel | None = None
        self.count = 0

    def __set_name__(self, owner, name: str) -> None:
        self.name = name

    def _bind(self, node: "Node", name: str) -> "Port":
        port = copy.copy(self)
        port.name = name
        port.node = node
        return port

    @property
    def tag(self) -> str:
        return self.port_type.tag

    @property
    def connected(self) -> bool:
        return self.edge is not None

    @property
    def path(self) -> str:
        return f"{self.node.path}.{self.name}"

    @property
    def channel(self) -> Channel | None:
        """The live channel while executing, else ``None``."""
        return self._channel

    def _rt(self):
        rt = self.node._rt if self.node is not None else None
        return rt if rt is not None else _DETACHED

    def close(self) -> None:
        if self._channel is not None:
            self._channel.close()

    def __repr__(self) -> str:
        where = self.path if self.node is not None else self.name
        return f"{type(self).__name__}({where!r}, {self.tag!r})"


class Input(Port):
    direction = "input"

    def _bind(self, node: "Node", name: str) -> "Port":
        port = super()._bind(node, name)
        port.reset_replay()
        return port

    def reset_replay(self) -> None:
        # Values taken by the current invocation, and values to hand out
        # again after a failed one.
        self._taken: list[Any] = []
        self._replay: deque[Any] = deque()

    def begin_invocation(self) -> None:
        self._taken.clear()

    def rewind(self) -> None:
        """Queue everything the failed invocation consumed for redelivery."""
        self._replay.extendleft(reversed(self._taken))
        self._taken.clear()

    @property
    def pending(self) -> int:
        return len(self._replay)

    def _wait(self):
        rt = self._rt()
        return dict(cancel=rt.cancelled, on_block=lambda: rt.status("waiting_input"))

    def _unwrap(self, item, rt):
        self.count += 1
        if item.is_files:
            value = self._channel.claim_files(item, rt.work_dir)
        else:
            value = item.value()
        self._taken.append(value)
        return value

    def _redeliver(self, rt):
        value = self._replay.popleft()
        if isinstance(value, FileSet):
            # Files from the failed attempt are copied into the fresh one.
            dest = Path(rt.work_dir) / f"replay-{len(self._taken)}"
            dest.mkdir(parents=True, exist_ok=True)
            copies = FileSet()
            for src in value:
                target = dest / Path(src).name
                shutil.copy2(src, target)
                copies.append(str(target))
            value = copies
        self._taken.append(value)
        return value

    def receive(self) -> Any:
        """Block for the next value (or :class:`FileSet`).

        Raises :class:`ChannelClosedAndEmpty` when no more data can arrive.
        """
        if self._replay:
            return self._redeliver(self._rt())
        if self._channel is None:
            raise ChannelClosedAndEmpty(f"{self!r} is not connected")
        rt = self._rt()
        try:
            item = self._channel.receive(**self._wait())
        except Cancelled:
            rt.interrupt()
        finally:
            rt.status("running")
        return self._unwrap(item, rt)

    def try_receive(self) -> Any | None:
        """Non-blocking receive; ``None`` if nothing is queued."""
        if self._replay:
            return self._redeliver(self._rt())
        if self._channel is None:
            raise ChannelClosedAndEmpty(f"{self!r} is not connected")
        item = self._channel.try_receive()
        if item is None:
            return None
        return self._unwrap(item, self._rt())

    def receive_files(self) -> FileSet:
        value = self.receive()
        if not isinstance(value, FileSet):
            raise TypeError(f"{self!r} received a value, expected files")
        return value

    @property
    def exhausted(self) -> bool:
        """True when closed and drained (or never connected)."""
        if self._replay:
            return False
        return self._channel is None or self._channel.exhausted

    @property
    def ready(self) -> bool:
        return bool(self._replay) or (self._channel is not None and self._channel.queued > 0)


class Output(Port):
    direction = "output"

    def _wait(self):
        rt = self._rt()
        return dict(cancel=rt.cancelled, on_block=lambda: rt.status("waiting_output"))

    def send(self, value: Any) -> None:
        """Send a value downstream, blocking while the channel is full.

        Values sent on an unconnected output are dropped. Raises
        :class:`ChannelClosed` if the consumer has gone away.
        """
        if self._channel is None:
            return
        rt = self._rt()
        try:
            self._channel.send(value, **self._wait())
        except Cancelled:
            rt.interrupt()
        finally:
            rt.status("running")
        self.count += 1

    def send_files(self, files: Iterable[str | os.PathLike]) -> None:
        if self._channel is None:
            return
        rt = self._rt()
        try:
            self._channel.send_files(list(files), **self._wait())
        except Cancelled:
            rt.interrupt()
        finally:
            rt.status("running")
        self.count += 1

    @property
    def closed(self) -> bool:
        return self._channel is not None and self._channel.closed


# ---------------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------------

_MISSING = object()


class Parameter:
    """A static node setting, fixed for the duration of execution."""

    def __init__(
        self,
        tag: str = WILDCARD,
        default: Any = _MISSING,
        *,
        required: bool | None = None,
        doc: str | None = None,
    ) -> None:
        self.tag = tag
        self.default = default
        self.required = (default is _MISSING) if required is None else required
        self.doc = doc
        self.name: str | None = None
        self.node: Node | None = None
        self._value: Any = _MISSING
        self._frozen = False

    def __set_name__(self, owner, name: str) -> None:
        self.name = name

    def _bind(self, node: "Node", name: str) -> "Parameter":
        param = copy.copy(self)
        param.name = name
        param.node = node
        if self.default is not _MISSING:
            param.default = copy.deepcopy(self.default)
        return param

    @property
    def has_default(self) -> bool:
        return self.default is not _MISSING

    @property
    def is_set(self) -> bool:
        return self._value is not _MISSING

    @property
    def satisfied(self) -> bool:
        return self.is_set or self.has_default or not self.required

    @property
    def value(self) -> Any:
        if self._value is not _MISSING:
            return self._value
        if self.default is not _MISSING:
            return self.default
        return None

    def set(self, value: Any) -> None:
        if self._frozen:
            raise FrozenError(f"parameter {self.path} is frozen during execution")
        if not value_matches(self.tag, value):
            raise TypeError(f"parameter {self.path} expects {self.tag}, got {value!r}")
        self._value = value

    def unset(self) -> None:
        if self._frozen:
            raise FrozenError(f"parameter {self.path} is frozen during execution")
        self._value = _MISSING

    @property
    def path(self) -> str:
        owner = self.node.path if self.node is not None else "?"
        return f"{owner}.{self.name}"

    def __repr__(self) -> str:
        return f"Parameter({self.path!r}, {self.tag!r}, value={self.value!r})"


class ExposedParameter:
    """A workflow-level parameter fanning out to one or more underlying ones."""

    def __init__(self, name: str, targets: list[tuple[str, Any]], tag: str, doc: str | None = None) -> None:
        self.name = name
        # (relative reference, Parameter or ExposedParameter)
        self.targets = targets
        self.tag = tag
        self.doc = doc

    @property
    def references(self) -> list[str]:
        return [ref for ref, _ in self.targets]

    def leaves(self) -> list[Parameter]:
        out = []
        for _, target in self.targets:
            out.extend(target.leaves() if isinstance(target, ExposedParameter) else [target])
        return out

    def set(self, value: Any) -> None:
        for _, target in self.targets:
            target.set(value)

    @property
    def value(self) -> Any:
        return self.leaves()[0].value

    @property
    def default(self) -> Any:
        defaults = {repr(p.default) for p in self.leaves()}
        return self.leaves()[0].default if len(defaults) == 1 else _MISSING

    @property
    def has_default(self) -> bool:
        return self.default is not _MISSING

    @property
    def required(self) -> bool:
        return any(p.required for p in self.leaves())

    @property
    def is_set(self) -> bool:
        return all(p.is_set for p in self.leaves())

    @property
    def satisfied(self) -> bool:
        return all(p.satisfied for p in self.leaves())

    def __repr__(self) -> str:
        return f"ExposedParameter({self.name!r} -> {self.references})"


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------


class NodeRegistry(dict):
    """Maps node-kind names to node classes."""

    def register(self, cls: type["Node"]) -> type["Node"]:
        self[cls.kind] = cls
        return cls

    def resolve(self, kind: str) -> type["Node"]:
        try:
            return self[kind]
        except KeyError:
            raise UnknownKind(f"unknown node kind {kind!r}") from None


registry = NodeRegistry()


# ---------------------------------------------------------------------------
# Nodes
# ---------------------------------------------------------------------------


class Node:
    """Base class for leaf computation steps.

    Subclasses declare ports and parameters as class attributes and
    implement :meth:`run`. ``looped = True`` makes the runtime re-invoke
    ``run`` until a shutdown condition holds. Ports that depend on parameter
    values (e.g. a variable number of outputs) are created in :meth:`build`.
    """

    kind: ClassVar[str] = "Node"
    looped: ClassVar[bool] = False
    _port_decls: ClassVar[dict[str, Port]] = {}
    _param_decls: ClassVar[dict[str, Parameter]] = {}

    def __init_subclass__(cls, register: bool = True, **kwargs) -> None:
        super().__init_subclass__(**kwargs)
        cls.kind = cls.__dict__.get("kind", cls.__name__)
        ports: dict[str, Port] = {}
        params: dict[str, Parameter] = {}
        for klass in reversed(cls.__mro__):
            for name, attr in vars(klass).items():
                if isinstance(attr, Port):
                    ports[name] = attr
                elif isinstance(attr, Parameter):
                    params[name] = attr
        cls._port_decls = ports
        cls._param_decls = params
        if register:
            registry.register(cls)

    def __init__(self, name: str | None = None, *, looped: bool | None = None, max_retries: int = 0, **params: Any) -> None:
        self.name = check_identifier(name or _snake(self.kind))
        self.parent: Workflow | None = None
        self.looped = type(self).looped if looped is None else bool(looped)
        if max_retries < 0:
            raise ValueError("max_retries must be non-negative")
        self.max_retries = int(max_retries)
        self.inputs: dict[str, Input] = {}
        self.outputs: dict[str, Output] = {}
        self.parameters: dict[str, Parameter] = {}
        for pname, decl in self._param_decls.items():
            self._attach_parameter(pname, decl)
        for pname, decl in self._port_decls.items():
            self._attach_port(pname, decl)
        for key, value in params.items():
            if key not in self.parameters:
                raise UnknownTarget(f"{self.kind} has no parameter {key!r}")
            self.parameters[key].set(value)
        self.build()
        self._rt = None
        self._finished = False
        #: Free-form per-run statistics copied into the execution report.
        self.info: dict[str, Any] = {}

    def build(self) -> None:
        """Hook for creating parameter-dependent ports."""

    def run(self) -> None:
        raise NotImplementedError

    def setup(self) -> None:
        """Called once in the execution context before the first ``run``."""

    # -- declaration helpers -------------------------------------------------

    def _attach_port(self, name: str, decl: Port) -> Port:
        check_identifier(name)
        if name in self.inputs or name in self.outputs or name in self.parameters:
            raise DuplicateName(f"{self.kind}.{name} declared twice")
        port = decl._bind(self, name)
        (self.inputs if port.direction == "input" else self.outputs)[name] = port
        setattr(self, name, port)
        return port

    def _attach_parameter(self, name: str, decl: Parameter) -> Parameter:
        check_identifier(name)
        if name in self.parameters:
            raise DuplicateName(f"{self.kind}.{name} declared twice")
        param = decl._bind(self, name)
        self.parameters[name] = param
        setattr(self, name, param)
        return param

    def add_input(self, name: str, tag: str = WILDCARD, *, optional: bool = False) -> Input:
        return self._attach_port(name, Input(tag, optional=optional))

    def add_output(self, name: str, tag: str = WILDCARD) -> Output:
        return self._attach_port(name, Output(tag))

    # -- structure ------------------------------------------------------------

    @property
    def ports(self) -> dict[str, Port]:
        return {**self.inputs, **self.outputs}

    @property
    def path(self) -> str:
        parts = [self.name]
        parent = self.parent
        while parent is not None and parent.parent is not None:
            parts.append(parent.name)
            parent = parent.parent
        return "/".join(reversed(parts))

    def __repr__(self) -> str:
        return f"<{self.kind} {self.path!r}>"

    # -- runtime API -----------------------------------------------------------

    @property
    def logger(self) -> logging.Logger | logging.LoggerAdapter:
        if self._rt is not None:
            return self._rt.logger
        return logging.getLogger(f"flowcycle.node.{self.path}")

    @property
    def work_dir(self) -> Path:
        return self._rt.work_dir if self._rt is not None else _DETACHED.work_dir

    @property
    def config(self):
        """System configuration entry for this node's kind (or ``None``)."""
        return self._rt.kind_config if self._rt is not None else None

    def finish(self) -> None:
        """Complete this node once the current ``run`` returns."""
        self._finished = True

    def stop(self, reason: str = "requested by node") -> None:
        """Set the global stop signal for the whole workflow."""
        if self._rt is not None:
            self._rt.request_stop(reason)

    def wait_for_input(self, timeout: float = 0.05) -> None:
        """Block briefly until any input receives data or closes."""
        if self._rt is not None:
            self._rt.wait_for_input(timeout)

    def should_shutdown(self) -> bool:
        from .runtime import should_shutdown

        return should_shutdown(self, self._rt.stopped() if self._rt is not None else False)


# ---------------------------------------------------------------------------
# Workflows
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class ChannelEdge:
    """A recorded connection from ``source`` to ``target`` (relative paths)."""

    source: str
    target: str
    capacity: int
    source_port: Output = field(repr=False)
    target_port: Input = field(repr=False)
    owner: "Workflow | None" = field(default=None, repr=False)

    @property
    def id(self) -> str:
        prefix = self.owner.path + "/" if self.owner is not None and self.owner.path else ""
        return f"{prefix}{self.source}->{prefix}{self.target}"

    @property
    def type_tag(self) -> str:
        src, dst = self.source_port.port_type, self.target_port.port_type
        return dst.tag if src.wildcard else src.tag


@dataclass(frozen=True)
class Issue:
    severity: str  # "error" | "warning"
    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.severity.upper()} {self.path or '<workflow>'}: {self.message}"


@dataclass
class ValidationReport:
    issues: list[Issue] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not any(i.severity == "error" for i in self.issues)

    @property
    def errors(self) -> list[Issue]:
        return [i for i in self.issues if i.severity == "error"]

    @property
    def warnings(self) -> list[Issue]:
        return [i for i in self.issues if i.severity == "warning"]

    def __str__(self) -> str:
        head = "ok" if self.ok else f"{len(self.errors)} error(s)"
        return "\n".join([head, *map(str, self.issues)])


Child = Union[Node, "Workflow"]
PortRef = Union[Port, str]


class Workflow:
    """Hierarchical workflow: a tree of nodes and subgraphs plus channel edges."""

    def __init__(self, name: str = "workflow", *, doc: str | None = None) -> None:
        self.name = check_identifier(name)
        self.doc = doc
        self.parent: Workflow | None = None
        self.children: dict[str, Child] = {}
        self.channels: list[ChannelEdge] = []
        self.exposed: dict[str, ExposedParameter] = {}
        #: Boundary ports: alias -> (relative reference, leaf port).
        self.port_aliases: dict[str, tuple[str, Port]] = {}
        self._frozen = False

    def __repr__(self) -> str:
        return f"<Workflow {self.name!r}: {len(self.children)} children, {len(self.channels)} channels>"

    # -- tree --------------------------------------------------------------------

    @property
    def path(self) -> str:
        parts = []
        wf = self
        while wf.parent is not None:
            parts.append(wf.name)
            wf = wf.parent
        return "/".join(reversed(parts))

    @property
    def root(self) -> "Workflow":
        wf = self
        while wf.parent is not None:
            wf = wf.parent
        return wf

    def _check_mutable(self) -> None:
        if self.root._frozen:
            raise FrozenError(f"workflow {self.root.name!r} is frozen during execution")

    def _claim_name(self, name: str) -> None:
        if name in self.children:
            raise DuplicateName(f"{name!r} already exists in workflow {self.name!r}")

    def add(self, what, name: str | None = None, **kwargs: Any):
        """Add a node class, node instance or subgraph; returns the child."""
        if isinstance(what, Workflow):
            if name is not None:
                what.name = check_identifier(name)
            return self.add_subgraph(what)
        if isinstance(what, Node):
            if name is not None:
                what.name = check_identifier(name)
            return self.add_node(what)
        if isinstance(what, type) and issubclass(what, Node):
            self._check_mutable()
            self._claim_name(name or _snake(what.kind))
            return self.add_node(what(name, **kwargs))
        raise TypeError(f"cannot add {what!r} to a workflow")

    def add_node(self, node: Node) -> Node:
        self._check_mutable()
        if node.parent is not None:
            raise CycleInTree(f"{node!r} already belongs to a workflow")
        self._claim_name(node.name)
        node.parent = self
        self.children[node.name] = node
        return node

    def add_subgraph(self, sub: "Workflow") -> "Workflow":
        self._check_mutable()
        if sub.parent is not None:
            raise CycleInTree(f"subgraph {sub.name!r} already has a parent")
        wf: Workflow | None = self
        while wf is not None:
            if wf is sub:
                raise CycleInTree(f"subgraph {sub.name!r} would contain itself")
            wf = wf.parent
        self._claim_name(sub.name)
        sub.parent = self
        self.children[sub.name] = sub
        return sub

    def walk(self, prefix: str = "") -> Iterator[tuple[str, Child]]:
        """Yield ``(path, child)`` for every node and subgraph, depth first."""
        for name, child in self.children.items():
            path = f"{prefix}{name}"
            yield path, child
            if isinstance(child, Workflow):
                yield from child.walk(path + "/")

    def leaves(self) -> Iterator[tuple[str, Node]]:
        for path, child in self.walk():
            if isinstance(child, Node):
                yield path, child

    @property
    def nodes(self) -> list[Node]:
        return [node for _, node in self.leaves()]

    def depth(self) -> int:
        subs = [c.depth() for c in self.children.values() if isinstance(c, Workflow)]
        if not self.children:
            return 0
        return 1 + max(subs, default=0)

    def all_channels(self) -> Iterator[ChannelEdge]:
        yield from self.channels
        for child in self.children.values():
            if isinstance(child, Workflow):
                yield from child.all_channels()

    def subgraphs(self) -> list["Workflow"]:
        return [c for c in self.children.values() if isinstance(c, Workflow)]

    # -- path resolution ------------------------------------------------------------

    def get(self, path: str) -> Child:
        """Resolve a slash-delimited child path."""
        obj: Child = self
        for part in path.split("/"):
            if not isinstance(obj, Workflow) or part not in obj.children:
                raise PathError(f"no node or subgraph {path!r} in {self.name!r}")
            obj = obj.children[part]
        return obj

    __getitem__ = get

    def _relative(self, child: Node | "Workflow") -> str:
        parts = [child.name]
        parent = child.parent
        while parent is not self:
            if parent is None:
                raise PathError(f"{child!r} is not inside workflow {self.name!r}")
            parts.append(parent.name)
            parent = parent.parent
        return "/".join(reversed(parts))

    def resolve_port(self, ref: PortRef) -> tuple[str, Port]:
        """Resolve a port object or ``"path.port"`` string to ``(ref, leaf port)``."""
        if isinstance(ref, Port):
            if ref.node is None:
                raise PathError(f"{ref!r} is not bound to a node")
            return f"{self._relative(ref.node)}.{ref.name}", ref
        if not isinstance(ref, str) or "." not in ref:
            raise PathError(f"malformed port path {ref!r}")
        owner_path, port_name = ref.rsplit(".", 1)
        owner = self.get(owner_path)
        if isinstance(owner, Node):
            if port_name not in owner.ports:
                raise PathError(f"{owner_path!r} has no port {port_name!r}")
            return ref, owner.ports[port_name]
        if port_name not in owner.port_aliases:
            raise PathError(f"subgraph {owner_path!r} exposes no port {port_name!r}")
        return ref, owner.port_aliases[port_name][1]

    def resolve_parameter(self, ref) -> tuple[str, Parameter | ExposedParameter]:
        if isinstance(ref, (Parameter, ExposedParameter)):
            if isinstance(ref, Parameter):
                if ref.node is None:
                    raise UnknownTarget(f"{ref!r} is not bound")
                return f"{self._relative(ref.node)}.{ref.name}", ref
            for path, child in [("", self), *self.walk()]:
                if isinstance(child, Workflow) and child.exposed.get(ref.name) is ref:
                    return (f"{path}.{ref.name}" if path else ref.name), ref
            raise UnknownTarget(f"{ref!r} is not inside {self.name!r}")
        if isinstance(ref, tuple):
            ref = f"{ref[0]}.{ref[1]}"
        if isinstance(ref, str) and ref in self.exposed:
            return ref, self.exposed[ref]
        if not isinstance(ref, str) or "." not in ref:
            raise UnknownTarget(f"malformed parameter reference {ref!r}")
        owner_path, pname = ref.rsplit(".", 1)
        try:
            owner = self.get(owner_path)
        except PathError as exc:
            raise UnknownTarget(str(exc)) from None
        if isinstance(owner, Node):
            if pname not in owner.parameters:
                raise UnknownTarget(f"{owner_path!r} has no parameter {pname!r}")
            return ref, owner.parameters[pname]
        if pname not in owner.exposed:
            raise UnknownTarget(f"subgraph {owner_path!r} exposes no parameter {pname!r}")
        return ref, owner.exposed[pname]

    # -- connections -------------------------------------------------------------------

    def _check_pair(self, source: PortRef, target: PortRef, seen: set[int] | None = None):
        src_ref, src = self.resolve_port(source)
        dst_ref, dst = self.resolve_port(target)
        if src.direction != "output":
            raise DirectionError(f"{src_ref} is not an output port")
        if dst.direction != "input":
            raise DirectionError(f"{dst_ref} is not an input port")
        for ref, port in ((src_ref, src), (dst_ref, dst)):
            if port.connected or (seen is not None and id(port) in seen):
                raise AlreadyConnected(f"{ref} is already connected")
        if not src.port_type.compatible(dst.port_type):
            raise TypeMismatch(f"{src_ref} ({src.tag}) cannot feed {dst_ref} ({dst.tag})")
        return src_ref, src, dst_ref, dst

    def connect(self, source: PortRef, target: PortRef, capacity: int = DEFAULT_CAPACITY) -> ChannelEdge:
        """Create a channel edge from an output port to an input port."""
        self._check_mutable()
        if not isinstance(capacity, int) or capacity < 1:
            raise ValueError("capacity must be a positive integer")
        src_ref, src, dst_ref, dst = self._check_pair(source, target)
        edge = ChannelEdge(src_ref, dst_ref, capacity, src, dst, owner=self)
        src.edge = dst.edge = edge
        self.channels.append(edge)
        return edge

    def connect_all(self, *pairs, capacity: int = DEFAULT_CAPACITY) -> list[ChannelEdge]:
        """Connect several pairs atomically: either all succeed or none is made.

        Accepts ``connect_all((a.out, b.inp), (b.out, c.inp))`` or a single list.
        """
        if len(pairs) == 1 and isinstance(pairs[0], list):
            pairs = tuple(pairs[0])
        self._check_mutable()
        seen: set[int] = set()
        for index, (source, target) in enumerate(pairs):
            try:
                _, src, _, dst = self._check_pair(source, target, seen)
            except Exception as exc:
                exc.index = index
                exc.args = (f"pair {index}: {exc}",)
                raise
            seen.update((id(src), id(dst)))
        return [self.connect(s, t, capacity) for s, t in pairs]

    def _open_ports(self, obj, direction: str) -> list[tuple[str, Port]]:
        if isinstance(obj, Node):
            ports = obj.inputs if direction == "input" else obj.outputs
            return [(f"{self._relative(obj)}.{n}", p) for n, p in ports.items() if not p.connected]
        if isinstance(obj, Workflow):
            base = self._relative(obj)
            return [
                (f"{base}.{alias}", port)
                for alias, (_, port) in obj.port_aliases.items()
                if port.direction == direction and not port.connected
            ]
        raise TypeError(f"cannot auto-connect {obj!r}")

    def auto_connect(self, a: Child, b: Child, capacity: int = DEFAULT_CAPACITY) -> ChannelEdge:
        """Connect the unique type-compatible (output of ``a``, input of ``b``) pair."""
        candidates = [
            (out_ref, in_ref)
            for out_ref, out in self._open_ports(a, "output")
            for in_ref, inp in self._open_ports(b, "input")
            if not out.port_type.wildcard and not inp.port_type.wildcard and out.tag == inp.tag
        ]
        if not candidates:
            raise NoMatch(f"no type-compatible port pair between {a.name!r} and {b.name!r}")
        if len(candidates) > 1:
            listing = ", ".join(f"{s}->{t}" for s, t in candidates)
            raise Ambiguous(f"{len(candidates)} candidate pairs: {listing}")
        return self.connect(*candidates[0], capacity=capacity)

    def expose_port(self, alias: str, port: PortRef) -> Port:
        """Make an inner port addressable as ``"<this subgraph>.<alias>"``."""
        self._check_mutable()
        check_identifier(alias)
        if alias in self.port_aliases:
            raise DuplicateName(f"port alias {alias!r} already exists")
        ref, leaf = self.resolve_port(port)
        self.port_aliases[alias] = (ref, leaf)
        return leaf

    # -- parameters ------------------------------------------------------------------

    def map_parameters(self, exposed: str, targets: Iterable, doc: str | None = None) -> ExposedParameter:
        """Expose one or more inner parameters under a single name.

        ``targets`` are ``(node path, parameter name)`` tuples, ``"path.param"``
        strings or parameter objects. All must share one type tag.
        """
        self._check_mutable()
        check_identifier(exposed)
        if exposed in self.exposed:
            raise DuplicateName(f"parameter {exposed!r} is already exposed")
        resolved = [self.resolve_parameter(t) for t in targets]
        if not resolved:
            raise UnknownTarget("no targets given")
        tags = {param.tag for _, param in resolved}
        if len(tags) > 1:
            raise HeterogeneousTypes(f"cannot combine parameters of types {sorted(tags)}")
        param = ExposedParameter(exposed, resolved, tags.pop(), doc=doc)
        self.exposed[exposed] = param
        return param

    combine_parameters = map_parameters

    @property
    def parameters(self) -> dict[str, ExposedParameter]:
        return dict(self.exposed)

    def set(self, name: str, value: Any) -> None:
        """Set an exposed parameter, or any ``"path.param"`` below this workflow."""
        if name in self.exposed:
            self.exposed[name].set(value)
        else:
            self.resolve_parameter(name)[1].set(value)

    # -- freezing ----------------------------------------------------------------------

    def _set_frozen(self, frozen: bool) -> None:
        self._frozen = frozen
        for _, node in self.leaves():
            for param in node.parameters.values():
                param._frozen = frozen
        for _, child in self.walk():
            if isinstance(child, Workflow):
                child._frozen = frozen

    def freeze(self) -> None:
        self._set_frozen(True)

    def unfreeze(self) -> None:
        self._set_frozen(False)

    @property
    def frozen(self) -> bool:
        return self.root._frozen

    # -- validation & execution ---------------------------------------------------------

    def validate(self, registry: NodeRegistry | None = None) -> ValidationReport:
        return validate(self, registry)

    def execute(self, config=None, **kwargs):
        """Run the workflow; see :func:`flowcycle.runtime.execute`."""
        from .runtime import RunConfig, execute

        if config is None:
            config = RunConfig(**kwargs)
        return execute(self, config)


def validate(workflow: Workflow, reg: NodeRegistry | None = None) -> ValidationReport:
    """Check structural rules without modifying the workflow.

    Errors: unresolvable kinds, unset required parameters, unconnected
    non-optional inputs, dangling or type-incompatible channels. Unconnected
    outputs are reported as warnings. Cycles are allowed.
    """
    reg = registry if reg is None else reg
    issues: list[Issue] = []
    for path, node in workflow.leaves():
        if reg.get(node.kind) is None:
            issues.append(Issue("error", path, f"unresolvable node kind {node.kind!r}"))
        for pname, param in node.parameters.items():
            if not param.satisfied:
                issues.append(Issue("error", f"{path}.{pname}", "required parameter unset"))
        for pname, port in node.inputs.items():
            if not port.connected and not port.optional:
                issues.append(Issue("error", f"{path}.{pname}", "unconnected input"))
        for pname, port in node.outputs.items():
            if not port.connected:
                issues.append(Issue("warning", f"{path}.{pname}", "output is not connected"))

    for wf in [workflow, *(c for _, c in workflow.walk() if isinstance(c, Workflow))]:
        base = workflow._relative(wf) if wf is not workflow else ""
        for edge in wf.channels:
            where = f"{base}/{edge.source}->{edge.target}" if base else f"{edge.source}->{edge.target}"
            try:
                _, src = wf.resolve_port(edge.source)
                _, dst = wf.resolve_port(edge.target)
            except PathError as exc:
                issues.append(Issue("error", where, f"dangling channel endpoint: {exc}"))
                continue
            if src is not edge.source_port or dst is not edge.target_port or src.edge is not edge or dst.edge is not edge:
                issues.append(Issue("error", where, "dangling channel endpoint"))
                continue
            if src.direction != "output" or dst.direction != "input":
                issues.append(Issue("error", where, "channel direction reversed"))
            if not src.port_type.compatible(dst.port_type):
                issues.append(Issue("error", where, f"type mismatch: {src.tag} -> {dst.tag}"))
    return ValidationReport(issues)
