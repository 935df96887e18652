"""Built-in node kinds: sources, sinks, data movement, routing and commands."""

from __future__ import annotations

import operator
import time
from typing import Any, Callable

from .channels import ChannelClosed, ChannelClosedAndEmpty, FileSet
from .commands import CommandSpec, JobFailed, make_queue_backend, run_command
from .errors import NodeFailure
from .graph import Input, Node, Output, Parameter, WILDCARD, value_matches

__all__ = [
    "Accumulate",
    "ConditionalRouter",
    "Copy",
    "LoadData",
    "LogResult",
    "Merge",
    "Passthrough",
    "PREDICATES",
    "QueueSubmit",
    "RoundRobinDistribute",
    "RunCommand",
    "predicate",
]


class PredicateError(NodeFailure):
    pass


def _list_tag(tag: str) -> str:
    return WILDCARD if tag == WILDCARD else f"list<{tag}>"


class LoadData(Node):
    """Send the ``data`` parameter once, then complete.

    ``data`` takes the type given by ``dtype``.
    """

    data = Parameter(WILDCARD)
    dtype = Parameter("str", default=WILDCARD)

    def build(self) -> None:
        self.data.tag = self.dtype.value
        if self.data.is_set and not value_matches(self.data.tag, self.data.value):
            raise TypeError(f"data {self.data.value!r} does not match dtype {self.dtype.value}")
        self.add_output("out", self.dtype.value)

    def run(self) -> None:
        self.out.send(self.data.value)


class LogResult(Node):
    """Log every received item at info level."""

    looped = True
    dtype = Parameter("str", default=WILDCARD)

    def build(self) -> None:
        self.add_input("inp", self.dtype.value)

    def setup(self) -> None:
        self.info["count"] = 0
        self.info["values"] = []

    def run(self) -> None:
        item = self.inp.receive()
        if isinstance(item, FileSet):
            text = "files: " + ", ".join(str(p) for p in item)
        else:
            text = repr(item)
        self.logger.info(text)
        self.info["count"] += 1
        if len(self.info["values"]) < 1000:
            self.info["values"].append(text)


class Passthrough(Node):
    """Forward each item unchanged."""

    looped = True
    dtype = Parameter("str", default=WILDCARD)

    def build(self) -> None:
        self.add_input("inp", self.dtype.value)
        self.add_output("out", self.dtype.value)

    def run(self) -> None:
        item = self.inp.receive()
        if isinstance(item, FileSet):
            self.out.send_files(item)
        else:
            self.out.send(item)


def _forward(port: Output, item: Any) -> bool:
    """Send to ``port``; returns False if the consumer is gone."""
    try:
        if isinstance(item, FileSet):
            port.send_files(item)
        else:
            port.send(item)
    except ChannelClosed:
        return False
    return True


class Copy(Node):
    """Duplicate every item onto ``out1`` ... ``outK``."""

    looped = True
    n_outputs = Parameter("int", default=2)
    dtype = Parameter("str", default=WILDCARD)

    def build(self) -> None:
        if self.n_outputs.value < 2:
            raise ValueError("Copy needs at least two outputs")
        self.add_input("inp", self.dtype.value)
        for k in range(1, self.n_outputs.value + 1):
            self.add_output(f"out{k}", self.dtype.value)

    def run(self) -> None:
        item = self.inp.receive()
        for port in self.outputs.values():
            _forward(port, item)


class Merge(Node):
    """Forward items first-come from ``inp1`` ... ``inpK`` to ``out``."""

    looped = True
    n_inputs = Parameter("int", default=2)
    dtype = Parameter("str", default=WILDCARD)

    def build(self) -> None:
        if self.n_inputs.value < 2:
            raise ValueError("Merge needs at least two inputs")
        for k in range(1, self.n_inputs.value + 1):
            self.add_input(f"inp{k}", self.dtype.value)
        self.add_output("out", self.dtype.value)
        self._start = 0

    def run(self) -> None:
        ports = list(self.inputs.values())
        n = len(ports)
        moved = False
        for i in range(n):
            port = ports[(self._start + i) % n]
            try:
                item = port.try_receive()
            except ChannelClosedAndEmpty:
                continue
            if item is not None:
                if isinstance(item, FileSet):
                    self.out.send_files(item)
                else:
                    self.out.send(item)
                moved = True
        self._start = (self._start + 1) % n
        if not moved and not all(p.exhausted for p in ports):
            self.wait_for_input()


class RoundRobinDistribute(Node):
    """Send item *i* to output ``out{(i mod W) + 1}``."""

    looped = True
    n_outputs = Parameter("int", default=2)
    dtype = Parameter("str", default=WILDCARD)

    def build(self) -> None:
        if self.n_outputs.value < 1:
            raise ValueError("RoundRobinDistribute needs at least one output")
        self.add_input("inp", self.dtype.value)
        for k in range(1, self.n_outputs.value + 1):
            self.add_output(f"out{k}", self.dtype.value)
        self._index = 0

    def run(self) -> None:
        item = self.inp.receive()
        ports = list(self.outputs.values())
        # Skip branches whose consumer has gone; the item itself is never dropped
        # while any branch is alive.
        for _ in range(len(ports)):
            port = ports[self._index % len(ports)]
            self._index += 1
            if _forward(port, item):
                return
        raise ChannelClosed("all branches closed")


def _field(item: Any, name: str | None) -> Any:
    if not name:
        return item
    if isinstance(item, dict):
        return item[name]
    return getattr(item, name)


PREDICATES: dict[str, Callable[[Any, Any], bool]] = {
    "gt": operator.gt,
    "ge": operator.ge,
    "lt": operator.lt,
    "le": operator.le,
    "eq": operator.eq,
    "ne": operator.ne,
    "truthy": lambda x, _: bool(x),
    "falsy": lambda x, _: not x,
}


def predicate(name: str, threshold: Any = None, field: str | None = None) -> Callable[[Any], bool]:
    """Build a registered predicate; ``ge`` with ``x == threshold`` is true."""
    try:
        compare = PREDICATES[name]
    except KeyError:
        raise ValueError(f"unknown predicate {name!r}; choose from {sorted(PREDICATES)}") from None
    return lambda item: bool(compare(_field(item, field), threshold))


class ConditionalRouter(Node):
    """Route each item to ``out_true`` or ``out_false``.

    The predicate is chosen by name from :data:`PREDICATES` and compares
    ``item[field]`` (or the item itself) with ``threshold``.
    """

    looped = True
    predicate = Parameter("str", default="gt")
    threshold = Parameter("float", default=0.0)
    field = Parameter("str", default="")
    dtype = Parameter("str", default=WILDCARD)

    def build(self) -> None:
        self.add_input("inp", self.dtype.value)
        self.add_output("out_true", self.dtype.value)
        self.add_output("out_false", self.dtype.value)
        predicate(self.predicate.value)  # fail fast on unknown names

    def setup(self) -> None:
        self._test = predicate(self.predicate.value, self.threshold.value, self.field.value or None)
        self.info.update(n_true=0, n_false=0)

    def run(self) -> None:
        item = self.inp.receive()
        try:
            verdict = self._test(item)
        except Exception as exc:
            raise PredicateError(f"predicate failed on {item!r}: {exc}") from exc
        key = "n_true" if verdict else "n_false"
        self.info[key] += 1
        (self.out_true if verdict else self.out_false).send(item)


class Accumulate(Node):
    """Collect ``count`` items into one list; flush a partial list on close."""

    looped = True
    count = Parameter("int", default=1)
    dtype = Parameter("str", default=WILDCARD)

    def build(self) -> None:
        if self.count.value < 1:
            raise ValueError("count must be >= 1")
        self.add_input("inp", self.dtype.value)
        self.add_output("out", _list_tag(self.dtype.value))

    def run(self) -> None:
        buffer = []
        try:
            while len(buffer) < self.count.value:
                buffer.append(self.inp.receive())
        except ChannelClosedAndEmpty:
            if buffer:
                self.out.send(buffer)
            self.finish()
            return
        self.out.send(buffer)


class RunCommand(Node):
    """Run an external command once per received argument mapping.

    ``command`` is an argv template; ``{name}`` placeholders are filled from
    the received mapping. Without a connected input the command runs once.
    The executable, environment and prefix may be overridden per node kind
    in the system configuration.
    """

    looped = True
    inp = Input("dict", optional=True)
    out = Output("dict")
    command = Parameter("list<str>")
    timeout = Parameter("float", default=60.0)
    expected_codes = Parameter("list<int>", default=[0])
    capture = Parameter("str", default="stdout")
    check = Parameter("str", default="")

    def spec(self, values: dict[str, Any] | None = None) -> CommandSpec:
        cfg = self.config
        spec = CommandSpec(
            argv=tuple(self.command.value),
            timeout=self.timeout.value,
            expected_codes=tuple(self.expected_codes.value),
            capture=self.capture.value,
            check=self.check.value or None,
            env=dict(getattr(cfg, "env", {}) or {}),
            prefix=tuple(getattr(cfg, "prefix", ()) or ()),
        )
        return spec.bind(**(values or {}))

    def run(self) -> None:
        values = None
        if self.inp.connected:
            values = self.inp.receive()
        else:
            self.finish()
        executable = getattr(self.config, "executable", None)
        result = run_command(self.spec(values), self.work_dir, executable=executable)
        self.out.send(result.as_dict())


class QueueSubmit(Node):
    """Submit each received command to the configured batch queue and wait."""

    looped = True
    uses_queue = True
    inp = Input("command")
    out = Output("dict")
    poll_interval = Parameter("float", default=0.05)
    cpus = Parameter("int", default=1)
    memory = Parameter("str", default="1G")
    time_limit = Parameter("float", default=3600.0)

    def _backend(self):
        if self._rt is not None and self._rt.queue is not None:
            return self._rt.queue
        # Running outside the executor: use a private queue.
        if getattr(self, "_local_queue", None) is None:
            self._local_queue = make_queue_backend(None, self.work_dir)
        return self._local_queue

    def run(self) -> None:
        spec = self.inp.receive()
        if isinstance(spec, dict):
            spec = CommandSpec(**spec)
        backend = self._backend()
        job_id = backend.submit(spec, dict(cpus=self.cpus.value, memory=self.memory.value, time=self.time_limit.value))
        deadline = time.monotonic() + self.time_limit.value
        while backend.poll(job_id) not in ("done", "failed"):
            if time.monotonic() > deadline:
                backend.cancel(job_id)
                raise JobFailed(f"job {job_id} exceeded its time limit")
            if self._rt is not None and self._rt.cancelled():
                backend.cancel(job_id)
                self._rt.interrupt()
            time.sleep(self.poll_interval.value)
        job = backend.job(job_id)
        if job.state == "failed":
            raise JobFailed(job.error or f"job {job_id} failed")
        self.out.send(
            dict(
                job_id=job.id,
                state=job.state,
                submitted=job.submitted,
                started=job.started,
                finished=job.finished,
                result=job.result.as_dict() if job.result else None,
            )
        )


class Sleep(Node):
    """Forward items after a fixed delay; handy for timing experiments."""

    looped = True
    delay = Parameter("float", default=0.1)
    dtype = Parameter("str", default=WILDCARD)

    def build(self) -> None:
        self.add_input("inp", self.dtype.value)
        self.add_output("out", self.dtype.value)

    def run(self) -> None:
        item = self.inp.receive()
        time.sleep(self.delay.value)
        self.out.send(item)

