"""Subgraph factories for batching, parallel branches and iteration.

Each factory returns a :class:`Workflow` with boundary ports ``inp`` and
``out`` that can be added to a parent workflow and connected like a node::

    sub = make_parallel(Slow, workers=4)
    wf.add(sub)
    wf.connect(source.out, "parallel.inp")
"""

from __future__ import annotations

import copy
import itertools
from typing import Any, Callable

from .channels import ChannelClosedAndEmpty
from .errors import ShapeError
from .graph import Node, Parameter, Port, Workflow, WILDCARD
from .nodes import Merge, RoundRobinDistribute, predicate

__all__ = ["Chunk", "Combine", "IterCheck", "IterGate", "make_batched", "make_iterative", "make_parallel"]

Inner = Any  # Node instance, Node subclass, Workflow or zero-argument factory


def _instantiate(inner: Inner, name: str) -> Node | Workflow:
    if isinstance(inner, type) and issubclass(inner, Node):
        return inner(name)
    if isinstance(inner, (Node, Workflow)):
        if inner.parent is not None:
            raise ShapeError(f"{inner!r} already belongs to a workflow")
        obj = inner
    elif callable(inner):
        obj = inner()
        if not isinstance(obj, (Node, Workflow)):
            raise ShapeError(f"factory returned {obj!r}, expected a node or workflow")
    else:
        raise ShapeError(f"cannot use {inner!r} as a pattern body")
    obj.name = name
    return obj


def _clone(inner: Inner, name: str) -> Node | Workflow:
    """A fresh copy of ``inner`` for each parallel branch."""
    if isinstance(inner, (Node, Workflow)):
        if inner.parent is not None:
            raise ShapeError(f"{inner!r} already belongs to a workflow")
        obj = copy.deepcopy(inner)
        obj.name = name
        return obj
    return _instantiate(inner, name)


def _boundary(obj: Node | Workflow) -> tuple[dict[str, Port], dict[str, Port]]:
    """Unconnected (inputs, outputs) reachable on ``obj``'s boundary."""
    if isinstance(obj, Node):
        ins = {n: p for n, p in obj.inputs.items() if not p.connected}
        outs = {n: p for n, p in obj.outputs.items() if not p.connected}
        return ins, outs
    ins, outs = {}, {}
    for alias, (_, port) in obj.port_aliases.items():
        if port.connected:
            continue
        (ins if port.direction == "input" else outs)[alias] = port
    return ins, outs


def _single_ports(obj: Node | Workflow, what: str) -> tuple[str, Port, str, Port]:
    ins, outs = _boundary(obj)
    if len(ins) != 1 or len(outs) != 1:
        raise ShapeError(
            f"{what} needs exactly one open input and one open output, "
            f"{obj.name!r} has {len(ins)} and {len(outs)}"
        )
    (in_name, in_port), (out_name, out_port) = next(iter(ins.items())), next(iter(outs.items()))
    return in_name, in_port, out_name, out_port


def _list_inner(tag: str) -> str | None:
    if tag == WILDCARD:
        return WILDCARD
    if tag.startswith("list<") and tag.endswith(">"):
        return tag[5:-1]
    return None


# ---------------------------------------------------------------------------
# Batching
# ---------------------------------------------------------------------------


class Chunk(Node):
    """Split each incoming list into consecutive chunks of ``size``.

    The number of chunks is announced on ``count`` so that :class:`Combine`
    can reassemble the original list.
    """

    looped = True
    size = Parameter("int", default=1)
    dtype = Parameter("str", default=WILDCARD)

    def build(self) -> None:
        if self.size.value < 1:
            raise ValueError("chunk size must be >= 1")
        self.add_input("inp", self.dtype.value)
        self.add_output("out", self.dtype.value)
        self.add_output("count", "int")

    def run(self) -> None:
        items = list(self.inp.receive())
        n = self.size.value
        chunks = [items[i : i + n] for i in range(0, len(items), n)]
        self.count.send(len(chunks))
        for chunk in chunks:
            self.out.send(chunk)
        self.info.setdefault("chunk_sizes", []).append([len(c) for c in chunks])


class Combine(Node):
    """Concatenate ``count`` consecutive lists back into one."""

    looped = True
    dtype = Parameter("str", default=WILDCARD)

    def build(self) -> None:
        self.add_input("inp", self.dtype.value)
        self.add_input("count", "int")
        self.add_output("out", self.dtype.value)

    def run(self) -> None:
        n = self.count.receive()
        combined: list = []
        for _ in range(n):
            combined.extend(self.inp.receive())
        self.out.send(combined)


def make_batched(inner: Inner, batch_size: int, *, name: str = "batched") -> Workflow:
    """Wrap a list-to-list step so it processes its input in chunks.

    ``inner`` must have one open input of type ``list<T>`` and one open
    output of type ``list<U>`` (wildcards allowed). Output order matches
    input order; the last chunk may be short. A leaf ``inner`` is switched
    to looped mode because it is invoked once per chunk.
    """
    if not isinstance(batch_size, int) or batch_size < 1:
        raise ValueError("batch_size must be a positive integer")
    body = _instantiate(inner, "inner")
    in_name, in_port, out_name, out_port = _single_ports(body, "make_batched")
    if _list_inner(in_port.tag) is None or _list_inner(out_port.tag) is None:
        raise ShapeError(f"make_batched needs list ports, got {in_port.tag} -> {out_port.tag}")
    if isinstance(body, Node):
        body.looped = True

    sub = Workflow(name)
    chunk = sub.add(Chunk("chunk", size=batch_size, dtype=in_port.tag))
    combine = sub.add(Combine("combine", dtype=out_port.tag))
    sub.add(body)
    sub.connect_all((chunk.out, in_port), (out_port, combine.inp), (chunk.count, combine.count))
    sub.expose_port("inp", chunk.inp)
    sub.expose_port("out", combine.out)
    return sub


# ---------------------------------------------------------------------------
# Parallel branches
# ---------------------------------------------------------------------------


def make_parallel(inner: Inner, workers: int, *, name: str = "parallel") -> Workflow:
    """Distribute items round-robin over ``workers`` copies of ``inner``.

    Results are collected first-come, so output order is only guaranteed
    for ``workers == 1``.
    """
    if not isinstance(workers, int) or workers < 1:
        raise ValueError("workers must be a positive integer")
    branches = [_clone(inner, f"worker_{k}") for k in range(1, workers + 1)]
    ports = [_single_ports(b, "make_parallel") for b in branches]
    in_tag, out_tag = ports[0][1].tag, ports[0][3].tag

    sub = Workflow(name)
    dist = sub.add(RoundRobinDistribute("distribute", n_outputs=workers, dtype=in_tag))
    for branch in branches:
        sub.add(branch)
    sub.expose_port("inp", dist.inp)
    pairs = [(dist.outputs[f"out{k}"], p[1]) for k, p in enumerate(ports, start=1)]
    if workers == 1:
        sub.connect_all(pairs)
        sub.expose_port("out", ports[0][3])
        return sub
    merge = sub.add(Merge("merge", n_inputs=workers, dtype=out_tag))
    pairs += [(p[3], merge.inputs[f"inp{k}"]) for k, p in enumerate(ports, start=1)]
    sub.connect_all(pairs)
    sub.expose_port("out", merge.out)
    return sub


# ---------------------------------------------------------------------------
# Iteration
# ---------------------------------------------------------------------------

# Feedback envelopes exchanged between IterCheck and IterGate. The body only
# ever sees bare values; per-item counters travel on the ``meta`` channel.
_AGAIN, _DONE = "again", "done"


class IterGate(Node):
    """Entry of an iteration loop.

    Admits new items from ``inp`` (at most ``window`` in flight) and re-admits
    items coming back on ``feedback``. Completes once ``inp`` is exhausted and
    every admitted item has left the loop.
    """

    looped = True
    dtype = Parameter("str", default=WILDCARD)
    window = Parameter("int", default=8)

    def build(self) -> None:
        if self.window.value < 1:
            raise ValueError("window must be >= 1")
        self.add_input("inp", self.dtype.value)
        self.add_input("feedback", "iter-envelope")
        self.add_output("out", self.dtype.value)
        self.add_output("meta", "iter-meta")

    def setup(self) -> None:
        self._ids = itertools.count()
        self._in_flight = 0

    def _take(self, port) -> Any:
        try:
            return port.try_receive()
        except ChannelClosedAndEmpty:
            return None

    def run(self) -> None:
        envelope = self._take(self.feedback)
        if envelope is not None:
            if envelope[0] == _DONE:
                self._in_flight -= 1
            else:
                _, item_id, iteration, value = envelope
                self.out.send(value)
                self.meta.send((item_id, iteration))
        elif self._in_flight < self.window.value and not self.inp.exhausted:
            value = self._take(self.inp)
            if value is not None:
                self._in_flight += 1
                self.out.send(value)
                self.meta.send((next(self._ids), 0))
                return
        if self.inp.exhausted and self._in_flight == 0:
            self.finish()
            return
        if envelope is None:
            self.wait_for_input()


class IterCheck(Node):
    """Exit test of an iteration loop.

    Items satisfying the predicate, or that have been through the body
    ``max_iterations`` times, leave on ``out``; the rest go back to the gate.
    ``info`` records the iteration count of every finished item and how many
    hit the cap.
    """

    looped = True
    dtype = Parameter("str", default=WILDCARD)
    predicate = Parameter("str", default="truthy")
    threshold = Parameter(WILDCARD, default=None)
    field = Parameter("str", default="")
    max_iterations = Parameter("int", default=0)  # 0 = unlimited

    def build(self) -> None:
        predicate(self.predicate.value)
        if self.max_iterations.value < 0:
            raise ValueError("max_iterations must be >= 0")
        self.add_input("inp", self.dtype.value)
        self.add_input("meta", "iter-meta")
        self.add_output("out", self.dtype.value)
        self.add_output("feedback", "iter-envelope")

    def setup(self) -> None:
        self._test: Callable[[Any], bool] = predicate(
            self.predicate.value, self.threshold.value, self.field.value or None
        )
        self.info.update(iterations=[], cap_reached=0, capped_items=[])

    def run(self) -> None:
        value = self.inp.receive()
        item_id, done_before = self.meta.receive()
        iterations = done_before + 1
        cap = self.max_iterations.value
        if self._test(value):
            capped = False
        elif cap and iterations >= cap:
            capped = True
        else:
            self.feedback.send((_AGAIN, item_id, iterations, value))
            return
        self.info["iterations"].append(iterations)
        if capped:
            self.info["cap_reached"] += 1
            self.info["capped_items"].append(item_id)
            self.logger.warning("item %d reached the iteration cap (%d)", item_id, cap)
        self.out.send(value)
        self.feedback.send((_DONE, item_id))


def make_iterative(
    body: Inner,
    predicate: str = "truthy",
    threshold: Any = None,
    *,
    max_iterations: int | None = None,
    field: str | None = None,
    window: int = 8,
    name: str = "iterative",
) -> Workflow:
    """Loop items through ``body`` until a registered predicate holds.

    ``predicate``/``threshold``/``field`` select a test from
    :data:`flowcycle.nodes.PREDICATES`. Every input item yields exactly one
    output item after between 1 and ``max_iterations`` body invocations.
    """
    if max_iterations is not None and max_iterations < 1:
        raise ValueError("max_iterations must be >= 1 or None")
    inner = _instantiate(body, "body")
    _, in_port, _, out_port = _single_ports(inner, "make_iterative")
    if not in_port.port_type.compatible(out_port.port_type):
        raise ShapeError(f"iteration body must map T to T, got {in_port.tag} -> {out_port.tag}")
    tag = in_port.tag if in_port.tag != WILDCARD else out_port.tag
    if isinstance(inner, Node):
        inner.looped = True

    sub = Workflow(name)
    gate = sub.add(IterGate("gate", dtype=tag, window=window))
    sub.add(inner)
    check = sub.add(
        IterCheck(
            "check",
            dtype=tag,
            predicate=predicate,
            threshold=threshold,
            field=field or "",
            max_iterations=max_iterations or 0,
        )
    )
    sub.connect_all(
        (gate.out, in_port),
        (out_port, check.inp),
        (gate.meta, check.meta),
        (check.feedback, gate.feedback),
    )
    sub.expose_port("inp", gate.inp)
    sub.expose_port("out", check.out)
    return sub
