"""Workflow execution.

Every leaf node runs in its own execution context: a forked process by
default, or a thread when ``RunConfig(isolation="thread")``. A supervisor in
the calling context collects status, log and error messages over a message
bus, applies the failure policy, watches for deadlock and finally joins all
contexts.

Shutdown heuristics, evaluated between invocations of a looped node and when
a port operation fails:

* all connected inputs are closed and drained;
* all connected outputs are closed (nobody can consume anything any more);
* the global stop signal is set.

Ports are closed when a node terminates, so termination cascades through the
graph.
"""

from __future__ import annotations

import enum
import logging
import os
import queue
import shutil
import tempfile
import threading
import time
import traceback
from collections import deque
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from .channels import (
    Channel,
    ChannelClosed,
    ChannelClosedAndEmpty,
    ProcessPrimitives,
    ThreadPrimitives,
)
from .commands import QueueClient, QueueService, make_queue_backend
from .errors import NodeFailure, NodeShutdown, NodeStopped, ValidationFailed
from .graph import Node, Workflow, validate

log = logging.getLogger("flowcycle.runtime")

__all__ = [
    "ExecutionReport",
    "NodeReport",
    "NodeStatus",
    "Outcome",
    "RunConfig",
    "RuntimeMessage",
    "detect_quiescence",
    "execute",
    "live_contexts",
    "retry_node",
    "should_shutdown",
]


class NodeStatus(str, enum.Enum):
    NOT_STARTED = "NotStarted"
    RUNNING = "Running"
    WAITING_FOR_INPUT = "WaitingForInput"
    WAITING_FOR_OUTPUT = "WaitingForOutput"
    COMPLETED = "Completed"
    FAILED = "Failed"
    STOPPED = "Stopped"

    @property
    def terminal(self) -> bool:
        return self in (NodeStatus.COMPLETED, NodeStatus.FAILED, NodeStatus.STOPPED)

    @property
    def waiting(self) -> bool:
        return self in (NodeStatus.WAITING_FOR_INPUT, NodeStatus.WAITING_FOR_OUTPUT)


# Status codes stored in shared memory for cheap polling by the supervisor.
_CODES = list(NodeStatus)
_CODE = {status: i for i, status in enumerate(_CODES)}
_PORT_STATUS = {
    "running": NodeStatus.RUNNING,
    "waiting_input": NodeStatus.WAITING_FOR_INPUT,
    "waiting_output": NodeStatus.WAITING_FOR_OUTPUT,
}

# Legal lifecycle transitions reported over the bus.
_TRANSITIONS = {
    NodeStatus.NOT_STARTED: {NodeStatus.RUNNING, NodeStatus.FAILED, NodeStatus.STOPPED},
    NodeStatus.RUNNING: {NodeStatus.COMPLETED, NodeStatus.FAILED, NodeStatus.STOPPED},
}


class Outcome(str, enum.Enum):
    SUCCESS = "success"
    FAILED = "failed"
    DEADLOCK = "deadlock"
    STOPPED = "externally-stopped"

    @property
    def exit_code(self) -> int:
        return {"success": 0, "failed": 1, "deadlock": 2, "externally-stopped": 130}[self.value]


@dataclass
class RunConfig:
    """Execution settings.

    ``max_concurrent`` gates how many node contexts may be live at once
    (0 = unbounded); it is applied at launch only. ``poll_interval`` is the
    supervisor's quiescence polling period.
    """

    workdir: str | os.PathLike | None = None
    log_level: str | int = "INFO"
    max_concurrent: int = 0
    poll_interval: float = 0.25
    timeout: float | None = None
    system: Any = None
    isolation: str = "process"
    join_grace: float = 5.0

    def __post_init__(self) -> None:
        if self.poll_interval <= 0:
            raise ValueError("poll_interval must be positive")
        if self.isolation not in ("process", "thread"):
            raise ValueError("isolation must be 'process' or 'thread'")
        if self.max_concurrent < 0:
            raise ValueError("max_concurrent must be >= 0")

    @property
    def level(self) -> int:
        if isinstance(self.log_level, int):
            return self.log_level
        return logging.getLevelName(str(self.log_level).upper())


@dataclass(frozen=True)
class RuntimeMessage:
    sender: str
    timestamp: float
    kind: str  # "status" | "log" | "error" | "stop" | "final"
    payload: Any


@dataclass
class NodeReport:
    """Final per-node statistics.

    ``invocations`` counts body calls that returned or raised; a call that
    ended only because its ports were closed is not counted.
    """

    path: str
    status: NodeStatus = NodeStatus.NOT_STARTED
    invocations: int = 0
    retries: int = 0
    sent: dict[str, int] = field(default_factory=dict)
    received: dict[str, int] = field(default_factory=dict)
    wall_time: float = 0.0
    error: str | None = None
    info: dict[str, Any] = field(default_factory=dict)
    history: list[NodeStatus] = field(default_factory=list)


@dataclass
class ChannelReport:
    id: str
    source: str
    target: str
    sent: int
    received: int
    queued: int


@dataclass
class ExecutionReport:
    outcome: Outcome
    nodes: dict[str, NodeReport]
    channels: list[ChannelReport] = field(default_factory=list)
    failed_node: str | None = None
    error: str | None = None
    deadlocked: tuple[str, ...] = ()
    stop_reason: str | None = None
    wall_time: float = 0.0
    workdir: str | None = None
    logs: list[tuple[str, str, str]] = field(default_factory=list)
    live_contexts: int = 0
    ordering_violations: list[str] = field(default_factory=list)

    @property
    def success(self) -> bool:
        return self.outcome is Outcome.SUCCESS

    @property
    def exit_code(self) -> int:
        return self.outcome.exit_code

    def status(self, path: str) -> NodeStatus:
        return self.nodes[path].status

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["outcome"] = self.outcome.value
        for node in data["nodes"].values():
            node["status"] = NodeStatus(node["status"]).value
            node["history"] = [NodeStatus(s).value for s in node["history"]]
            node["info"] = {k: _jsonable(v) for k, v in node["info"].items()}
        data["deadlocked"] = list(self.deadlocked)
        return data

    def summary(self) -> str:
        lines = [f"outcome: {self.outcome.value} ({self.wall_time:.2f}s)"]
        if self.failed_node:
            lines.append(f"failed node: {self.failed_node}: {self.error}")
        if self.deadlocked:
            lines.append(f"deadlocked: {', '.join(self.deadlocked)}")
        if self.stop_reason:
            lines.append(f"stop reason: {self.stop_reason}")
        for path, node in self.nodes.items():
            lines.append(f"  {path}: {node.status.value} (invocations={node.invocations}, retries={node.retries})")
        return "\n".join(lines)


def _jsonable(value: Any) -> Any:
    if isinstance(value, (str, int, float, bool)) or value is None:
        return value
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if hasattr(value, "tolist"):
        return value.tolist()
    return repr(value)


# ---------------------------------------------------------------------------
# Policies
# ---------------------------------------------------------------------------


def shutdown_reason(node: Node, stopped: bool) -> str | None:
    """Name of the first shutdown heuristic that holds, else ``None``."""
    if stopped:
        return "stop"
    inputs = [p.channel for p in node.inputs.values() if p.channel is not None]
    pending = any(getattr(p, "pending", 0) for p in node.inputs.values())
    if inputs and not pending and all(ch.exhausted for ch in inputs):
        return "inputs-exhausted"
    outputs = [p.channel for p in node.outputs.values() if p.channel is not None]
    if outputs and all(ch.closed for ch in outputs):
        return "outputs-closed"
    return None


def should_shutdown(node: Node, stopped: bool = False) -> bool:
    return shutdown_reason(node, stopped) is not None


def retry_node(max_retries: int, failures: int, error: BaseException) -> str:
    """``"reinvoke"`` or ``"give_up"`` after the ``failures``-th consecutive failure."""
    if not getattr(error, "retryable", True):
        return "give_up"
    return "reinvoke" if failures <= max_retries else "give_up"


class QuiescenceDetector:
    """Two-poll stability check over node statuses and channel counters.

    Deadlock is declared when, for ``polls`` consecutive polls, every
    non-terminal node is waiting on a port and no channel counter moved.
    """

    def __init__(self, polls: int = 2) -> None:
        self.polls = polls
        self._streak = 0
        self._last: tuple | None = None

    def update(self, statuses: dict[str, NodeStatus], counters: tuple) -> tuple[str, tuple[str, ...]]:
        live = {p: s for p, s in statuses.items() if not s.terminal}
        blocked = bool(live) and all(s.waiting for s in live.values())
        if not blocked:
            self._streak = 0
        elif self._streak == 0 or counters != self._last:
            self._streak = 1
        else:
            self._streak += 1
        self._last = counters
        if self._streak >= self.polls:
            return "deadlock", tuple(sorted(live))
        return "progressing", ()


def detect_quiescence(detector: QuiescenceDetector, statuses, counters):
    return detector.update(statuses, counters)


# ---------------------------------------------------------------------------
# Node side
# ---------------------------------------------------------------------------


class _BusHandler(logging.LoggerAdapter):
    def __init__(self, rt: "NodeRuntime") -> None:
        super().__init__(logging.getLogger(f"flowcycle.node.{rt.path}"), {})
        self.rt = rt

    def isEnabledFor(self, level: int) -> bool:
        return level >= self.rt.level

    def log(self, level, msg, *args, **kwargs) -> None:
        if self.isEnabledFor(level):
            text = str(msg) % args if args else str(msg)
            self.rt.post("log", (level, text))


class NodeRuntime:
    """Per-node view of the runtime, handed to the node as ``node._rt``."""

    def __init__(self, node: Node, path: str, *, stop_event, bus, status, wakeup, node_dir: Path, kind_config, level: int, system=None) -> None:
        self.node = node
        self.path = path
        self.stop_event = stop_event
        self.bus = bus
        self._status = status
        self.wakeup = wakeup
        self.node_dir = node_dir
        self.kind_config = kind_config
        self.system = system
        self.queue = None
        self.level = level
        self.attempt = -1
        self.work_dir = node_dir
        self.logger = _BusHandler(self)

    def post(self, kind: str, payload: Any) -> None:
        self.bus.put(RuntimeMessage(self.path, time.monotonic(), kind, payload))

    def status(self, name: str | NodeStatus) -> None:
        status = _PORT_STATUS.get(name, name)
        code = _CODE[status]
        if self._status.value != code:
            self._status.value = code

    def lifecycle(self, status: NodeStatus) -> None:
        self.status(status)
        self.post("status", status.value)

    def stopped(self) -> bool:
        return self.stop_event.is_set()

    def cancelled(self) -> bool:
        if self.stop_event.is_set():
            return True
        outputs = [p.channel for p in self.node.outputs.values() if p.channel is not None]
        return bool(outputs) and all(ch.closed for ch in outputs)

    def interrupt(self):
        if self.stop_event.is_set():
            raise NodeStopped()
        raise NodeShutdown()

    def request_stop(self, reason: str) -> None:
        self.post("stop", reason)
        self.stop_event.set()

    def wait_for_input(self, timeout: float) -> None:
        self.status(NodeStatus.WAITING_FOR_INPUT)
        self.wakeup.wait(timeout)
        self.wakeup.clear()
        self.status(NodeStatus.RUNNING)
        if self.cancelled():
            self.interrupt()

    def new_attempt(self) -> Path:
        self.attempt += 1
        self.work_dir = self.node_dir / f"attempt-{self.attempt}"
        if self.work_dir.exists():
            shutil.rmtree(self.work_dir)
        self.work_dir.mkdir(parents=True)
        return self.work_dir


_PORT_ERRORS = (ChannelClosed, ChannelClosedAndEmpty)


def node_lifecycle(node: Node, rt: NodeRuntime) -> NodeStatus:
    """Drive one node to a terminal status inside its execution context."""
    started = time.monotonic()
    invocations = retries = failures = 0
    error: str | None = None
    status = NodeStatus.RUNNING
    rt.new_attempt()
    rt.lifecycle(NodeStatus.RUNNING)
    try:
        node.setup()
        while True:
            if rt.stopped():
                status = NodeStatus.STOPPED
                break
            invocations += 1
            for port in node.inputs.values():
                port.begin_invocation()
            try:
                node.run()
                failures = 0
            except NodeStopped:
                status = NodeStatus.STOPPED
                break
            except NodeShutdown:
                status = NodeStatus.COMPLETED
                break
            except _PORT_ERRORS:
                # A body that only observed closed ports did no work.
                invocations -= 1
                if not node.looped or node._finished:
                    status = NodeStatus.COMPLETED
                    break
                reason = shutdown_reason(node, rt.stopped())
                if reason is not None:
                    status = NodeStatus.STOPPED if reason == "stop" else NodeStatus.COMPLETED
                    break
                # One port is done but others are live; avoid spinning.
                rt.wait_for_input(0.05)
                continue
            except Exception as exc:  # noqa: BLE001 - node bodies may raise anything
                failures += 1
                decision = retry_node(node.max_retries, failures, exc)
                desc = f"{type(exc).__name__}: {exc}"
                if decision == "reinvoke":
                    retries += 1
                    rt.logger.warning("attempt %d failed (%s), retrying", rt.attempt, desc)
                    rt.new_attempt()
                    for port in node.inputs.values():
                        port.rewind()
                    continue
                error = desc
                rt.post("error", (desc, bool(getattr(exc, "retryable", True)), traceback.format_exc()))
                # Raise the stop signal before our ports close, so that
                # downstream nodes stop instead of completing normally.
                rt.stop_event.set()
                status = NodeStatus.FAILED
                break
            if node._finished or not node.looped:
                status = NodeStatus.COMPLETED
                break
            reason = shutdown_reason(node, rt.stopped())
            if reason is not None:
                status = NodeStatus.STOPPED if reason == "stop" else NodeStatus.COMPLETED
                break
    except NodeStopped:
        status = NodeStatus.STOPPED
    except NodeShutdown:
        status = NodeStatus.COMPLETED
    except BaseException as exc:  # setup failure or interpreter-level error
        error = f"{type(exc).__name__}: {exc}"
        rt.post("error", (error, False, traceback.format_exc()))
        rt.stop_event.set()
        status = NodeStatus.FAILED
    finally:
        for port in node.ports.values():
            port.close()
    rt.lifecycle(status)
    rt.post(
        "final",
        dict(
            status=status.value,
            invocations=invocations,
            retries=retries,
            sent={n: p.count for n, p in node.outputs.items()},
            received={n: p.count for n, p in node.inputs.items()},
            wall_time=time.monotonic() - started,
            error=error,
            info=dict(node.info),
        ),
    )
    return status


def _process_main(node: Node, rt: NodeRuntime) -> None:
    # Parent logging handlers are meaningless in the child.
    logging.getLogger().handlers.clear()
    try:
        node_lifecycle(node, rt)
    finally:
        os._exit(0)


# ---------------------------------------------------------------------------
# Supervisor side
# ---------------------------------------------------------------------------

_live: set[Any] = set()
_live_lock = threading.Lock()


def live_contexts() -> int:
    """Number of node execution contexts that are still alive."""
    with _live_lock:
        for ctx in list(_live):
            if not ctx.is_alive():
                _live.discard(ctx)
        return len(_live)


class _Supervisor:
    def __init__(self, workflow: Workflow, config: RunConfig) -> None:
        self.workflow = workflow
        self.config = config
        self.level = config.level

    def run(self) -> ExecutionReport:
        cfg = self.config
        if cfg.workdir is None:
            workdir = Path(tempfile.mkdtemp(prefix="flowcycle-"))
        else:
            workdir = Path(cfg.workdir)
            workdir.mkdir(parents=True, exist_ok=True)
        self.workdir = workdir
        prims = ProcessPrimitives() if cfg.isolation == "process" else ThreadPrimitives()
        self.prims = prims
        wf = self.workflow
        wf.freeze()
        leaves = list(wf.leaves())
        edges = list(wf.all_channels())
        try:
            self.stop_event = prims.event()
            self.bus = prims.queue()
            self.channels: list[tuple[Any, Channel]] = []
            for i, edge in enumerate(edges):
                ch = Channel(
                    edge.capacity,
                    type_tag=edge.type_tag,
                    staging_dir=workdir / f"channel-{i}",
                    primitives=prims,
                    name=f"channel-{i}",
                )
                edge.source_port._channel = ch
                edge.target_port._channel = ch
                self.channels.append((edge, ch))
            self.status_values = {}
            for path, node in leaves:
                status = prims.counter(_CODE[NodeStatus.NOT_STARTED])
                wakeup = prims.event()
                self.status_values[path] = status
                for port in node.inputs.values():
                    if port._channel is not None:
                        port._channel.notify = wakeup
                node._finished = False
                node.info = {}
                for port in node.ports.values():
                    port.count = 0
                for port in node.inputs.values():
                    port.reset_replay()
                node._rt = NodeRuntime(
                    node,
                    path,
                    stop_event=self.stop_event,
                    bus=self.bus,
                    status=status,
                    wakeup=wakeup,
                    node_dir=workdir.joinpath(*path.split("/")),
                    kind_config=_kind_config(cfg.system, node.kind),
                    level=self.level,
                    system=cfg.system,
                )
            self.queue_service = None
            queue_users = [(p, n) for p, n in leaves if getattr(n, "uses_queue", False)]
            if queue_users:
                settings = getattr(cfg.system, "queue", None) if cfg.system is not None else None
                requests = prims.queue()
                replies = {p: prims.queue() for p, _ in queue_users}
                backend = make_queue_backend(settings, workdir / "queue")
                self.queue_service = QueueService(backend, requests, replies)
                for p, n in queue_users:
                    n._rt.queue = QueueClient(p, requests, replies[p])
            try:
                return self._supervise(leaves)
            finally:
                if self.queue_service is not None:
                    self.queue_service.close()
        finally:
            for _, node in leaves:
                node._rt = None
                for port in node.ports.values():
                    port._channel = None
            wf.unfreeze()
            prims.shutdown()

    # -- launching -----------------------------------------------------------

    def _launch(self, path: str, node: Node) -> None:
        if self.config.isolation == "process":
            ctx = self.prims.ctx.Process(target=_process_main, args=(node, node._rt), name=f"node:{path}", daemon=True)
        else:
            ctx = threading.Thread(target=node_lifecycle, args=(node, node._rt), name=f"node:{path}", daemon=True)
        ctx.start()
        self.contexts[path] = ctx
        with _live_lock:
            _live.add(ctx)

    def _admit(self) -> None:
        limit = self.config.max_concurrent
        while self.pending:
            if limit and sum(1 for p in self.contexts if p not in self.final) >= limit:
                return
            if self.stop_event.is_set():
                path, _ = self.pending.popleft()
                self._finalize_unlaunched(path)
                continue
            path, node = self.pending.popleft()
            self._launch(path, node)

    def _finalize_unlaunched(self, path: str) -> None:
        rep = self.reports[path]
        rep.status = NodeStatus.STOPPED
        rep.history.append(NodeStatus.STOPPED)
        self.final[path] = {}
        for edge, ch in self.channels:
            if edge.source_port.node._rt.path == path or edge.target_port.node._rt.path == path:
                ch.close()

    # -- message handling ------------------------------------------------------

    def _emit(self, path: str, level: int, text: str) -> None:
        self.logs.append((path, logging.getLevelName(level), text))
        if level >= self.level:
            log.log(level, text, extra={"node": path})

    def _handle(self, msg: RuntimeMessage) -> None:
        rep = self.reports[msg.sender]
        if msg.kind == "status":
            status = NodeStatus(msg.payload)
            prev = rep.history[-1] if rep.history else NodeStatus.NOT_STARTED
            if status not in _TRANSITIONS.get(prev, set()):
                self.ordering_violations.append(f"{msg.sender}: {prev.value} -> {status.value}")
            rep.history.append(status)
            rep.status = status
            self._emit(msg.sender, logging.DEBUG, f"status {status.value}")
        elif msg.kind == "log":
            level, text = msg.payload
            self._emit(msg.sender, level, text)
        elif msg.kind == "error":
            desc, retryable, tb = msg.payload
            self._emit(msg.sender, logging.ERROR, desc)
            self._emit(msg.sender, logging.DEBUG, tb)
            if self.failure is None:
                self.failure = (msg.sender, desc)
        elif msg.kind == "stop":
            if self.stop_reason is None:
                self.stop_reason = f"{msg.sender}: {msg.payload}"
        elif msg.kind == "final":
            data = msg.payload
            rep.status = NodeStatus(data["status"])
            rep.invocations = data["invocations"]
            rep.retries = data["retries"]
            rep.sent = data["sent"]
            rep.received = data["received"]
            rep.wall_time = data["wall_time"]
            rep.error = data["error"]
            rep.info = data["info"]
            self.final[msg.sender] = data

    def _drain(self, until: float) -> None:
        while True:
            remaining = until - time.monotonic()
            try:
                msg = self.bus.get(timeout=max(remaining, 0.001)) if remaining > 0 else self.bus.get_nowait()
            except queue.Empty:
                return
            self._handle(msg)
            if len(self.final) == len(self.reports):
                return

    def _check_dead(self) -> None:
        for path, ctx in self.contexts.items():
            if path in self.final or ctx.is_alive():
                continue
            # Give in-flight messages a moment before declaring the context lost.
            self._drain(time.monotonic() + 0.05)
            if path in self.final:
                continue
            rep = self.reports[path]
            code = getattr(ctx, "exitcode", None)
            rep.status = NodeStatus.FAILED
            rep.error = f"execution context exited unexpectedly (exit code {code})"
            self.final[path] = {}
            if self.failure is None:
                self.failure = (path, rep.error)
            for edge, ch in self.channels:
                if path in (edge.source_port.node._rt.path, edge.target_port.node._rt.path):
                    ch.close()

    # -- main loop -------------------------------------------------------------

    def _supervise(self, leaves: list[tuple[str, Node]]) -> ExecutionReport:
        cfg = self.config
        start = time.monotonic()
        self.reports = {path: NodeReport(path) for path, _ in leaves}
        self.final: dict[str, dict] = {}
        self.contexts: dict[str, Any] = {}
        self.pending = deque(leaves)
        self.logs: list[tuple[str, str, str]] = []
        self.failure: tuple[str, str] | None = None
        self.stop_reason: str | None = None
        self.ordering_violations: list[str] = []
        deadlocked: tuple[str, ...] = ()
        detector = QuiescenceDetector()
        stop_cause: str | None = None
        try:
            self._admit()
            next_poll = start + cfg.poll_interval
            while len(self.final) < len(self.reports):
                self._drain(next_poll)
                if len(self.final) == len(self.reports):
                    break
                if time.monotonic() < next_poll:
                    continue
                next_poll += cfg.poll_interval
                self._check_dead()
                self._admit()
                if self.failure is not None and not self.stop_event.is_set():
                    stop_cause = "failure"
                    self.stop_event.set()
                if self.stop_reason is not None and stop_cause is None:
                    stop_cause = "stop"
                if cfg.timeout is not None and time.monotonic() - start > cfg.timeout and not self.stop_event.is_set():
                    stop_cause = "timeout"
                    self.stop_reason = f"timeout after {cfg.timeout}s"
                    self.stop_event.set()
                if not self.stop_event.is_set() and not self.pending:
                    statuses = {
                        p: (self.reports[p].status if p in self.final else _CODES[v.value])
                        for p, v in self.status_values.items()
                    }
                    counters = tuple((ch.sent, ch.received) for _, ch in self.channels)
                    verdict, blocked = detector.update(statuses, counters)
                    if verdict == "deadlock":
                        deadlocked = blocked
                        stop_cause = "deadlock"
                        self._emit("-", logging.ERROR, f"deadlock detected: {', '.join(blocked)}")
                        self.stop_event.set()
        except KeyboardInterrupt:
            stop_cause = "stop"
            self.stop_reason = "keyboard interrupt"
            self.stop_event.set()
            self._drain(time.monotonic() + cfg.join_grace)
        self._join()

        if self.failure is not None:
            outcome = Outcome.FAILED
        elif stop_cause == "deadlock":
            outcome = Outcome.DEADLOCK
        elif stop_cause in ("stop", "timeout") or self.stop_reason is not None:
            outcome = Outcome.STOPPED
        else:
            outcome = Outcome.SUCCESS
        return ExecutionReport(
            outcome=outcome,
            nodes=self.reports,
            channels=[
                ChannelReport(edge.id, edge.source, edge.target, ch.sent, ch.received, ch.queued)
                for edge, ch in self.channels
            ],
            failed_node=self.failure[0] if self.failure else None,
            error=self.failure[1] if self.failure else None,
            deadlocked=deadlocked,
            stop_reason=self.stop_reason,
            wall_time=time.monotonic() - start,
            workdir=str(self.workdir),
            logs=self.logs,
            live_contexts=live_contexts(),
            ordering_violations=self.ordering_violations,
        )

    def _join(self) -> None:
        deadline = time.monotonic() + self.config.join_grace
        for path, ctx in self.contexts.items():
            ctx.join(max(deadline - time.monotonic(), 0.01))
        for path, ctx in self.contexts.items():
            if ctx.is_alive() and hasattr(ctx, "terminate"):
                log.warning("terminating unresponsive context %s", path, extra={"node": path})
                ctx.terminate()
                ctx.join(1.0)
                rep = self.reports[path]
                if not rep.status.terminal:
                    rep.status = NodeStatus.STOPPED
        # Collect anything posted while joining.
        self._drain(time.monotonic())
        with _live_lock:
            for ctx in self.contexts.values():
                if not ctx.is_alive():
                    _live.discard(ctx)


def _kind_config(system, kind: str):
    if system is None:
        return None
    kinds = getattr(system, "kinds", None) or {}
    return kinds.get(kind)


def execute(workflow: Workflow, config: RunConfig | None = None) -> ExecutionReport:
    """Run ``workflow`` to completion and return an :class:`ExecutionReport`.

    Raises :class:`ValidationFailed` if the workflow does not validate; no
    node is launched in that case.
    """
    config = config or RunConfig()
    report = validate(workflow)
    if not report.ok:
        raise ValidationFailed(report)
    return _Supervisor(workflow, config).run()


class LogFormatter(logging.Formatter):
    """``<ISO-8601 time> <LEVEL> <node-path> <message>``"""

    def format(self, record: logging.LogRecord) -> str:
        stamp = datetime.fromtimestamp(record.created, timezone.utc).isoformat(timespec="milliseconds")
        node = getattr(record, "node", "-")
        return f"{stamp} {record.levelname} {node} {record.getMessage()}"


def configure_logging(level: str | int = "INFO", stream=None) -> logging.Handler:
    handler = logging.StreamHandler(stream)
    handler.setFormatter(LogFormatter())
    root = logging.getLogger("flowcycle")
    root.handlers[:] = [handler]
    root.setLevel(level if isinstance(level, int) else str(level).upper())
    return handler
