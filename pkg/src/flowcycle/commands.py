"""External command execution and a local mock batch queue.

:func:`run_command` runs a :class:`CommandSpec` in a working directory and
captures the result. :class:`MockQueue` is an in-memory stand-in for a batch
scheduler with a fixed number of slots; its ``submit``/``poll``/``cancel``
surface is what a real scheduler client would implement.
"""

from __future__ import annotations

import json
import logging
import os
import queue
import shutil
import subprocess
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable

from .errors import FatalNodeError, NodeFailure

log = logging.getLogger("flowcycle.queue")


class CommandTimeout(NodeFailure):
    pass


class BadExit(NodeFailure):
    pass


class OutputValidationFailed(NodeFailure):
    pass


class ExecutableNotFound(FatalNodeError):
    pass


class SubmitFailed(NodeFailure):
    pass


class JobFailed(NodeFailure):
    pass


# Registered checks over captured stdout. Documents name these, never code.
def _contains(text: str) -> Callable[[str], bool]:
    return lambda out: text in out


OUTPUT_CHECKS: dict[str, Callable[..., Callable[[str], bool]]] = {
    "nonempty": lambda: (lambda out: bool(out.strip())),
    "contains": _contains,
}


def output_check(name: str | None) -> Callable[[str], bool] | None:
    """``"nonempty"`` or ``"contains:<text>"``; ``None`` disables checking."""
    if not name:
        return None
    key, _, arg = name.partition(":")
    if key not in OUTPUT_CHECKS:
        raise ValueError(f"unknown output check {name!r}")
    return OUTPUT_CHECKS[key](arg) if arg else OUTPUT_CHECKS[key]()


@dataclass(frozen=True)
class CommandSpec:
    argv: tuple[str, ...]
    timeout: float = 60.0
    expected_codes: tuple[int, ...] = (0,)
    capture: str = "stdout"  # "stdout" | "files" | "both"
    check: str | None = None
    env: dict[str, str] = field(default_factory=dict)
    prefix: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "argv", tuple(self.argv))
        object.__setattr__(self, "prefix", tuple(self.prefix))
        object.__setattr__(self, "expected_codes", tuple(self.expected_codes))
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.capture not in ("stdout", "files", "both"):
            raise ValueError(f"invalid capture mode {self.capture!r}")

    def bind(self, **values: Any) -> "CommandSpec":
        """Substitute ``{name}`` placeholders in the argv template."""
        argv = tuple(str(arg).format(**values) for arg in self.argv)
        if not argv:
            raise ValueError("argv is empty after substitution")
        return replace(self, argv=argv)

    def full_argv(self) -> list[str]:
        return [*self.prefix, *self.argv]


@dataclass
class CommandResult:
    exit_code: int
    stdout: str
    stdout_path: str
    files: list[str]

    def as_dict(self) -> dict[str, Any]:
        return {"exit_code": self.exit_code, "stdout": self.stdout, "stdout_path": self.stdout_path, "files": self.files}


_RESERVED = {"result.json", "stdout.txt"}


def run_command(spec: CommandSpec, cwd: str | os.PathLike, executable: str | None = None) -> CommandResult:
    """Run ``spec`` inside ``cwd`` and record ``result.json`` there.

    ``executable`` overrides the first argv element (from system config).
    """
    cwd = Path(cwd)
    cwd.mkdir(parents=True, exist_ok=True)
    argv = list(spec.argv)
    if not argv:
        raise ValueError("empty command")
    if executable:
        argv[0] = executable
    env = {**os.environ, **spec.env}
    resolved = shutil.which(argv[0], path=env.get("PATH"))
    if resolved is None:
        raise ExecutableNotFound(f"executable {argv[0]!r} not found")
    argv[0] = resolved
    before = {p for p in cwd.rglob("*") if p.is_file()}
    try:
        proc = subprocess.run(
            [*spec.prefix, *argv],
            cwd=cwd,
            env=env,
            stdout=subprocess.PIPE,
            stderr=subprocess.STDOUT,
            timeout=spec.timeout,
            text=True,
        )
    except subprocess.TimeoutExpired as exc:
        raise CommandTimeout(f"{argv[0]} exceeded {spec.timeout}s") from exc
    stdout_path = cwd / "stdout.txt"
    stdout_path.write_text(proc.stdout)
    files = sorted(
        str(p) for p in cwd.rglob("*") if p.is_file() and p not in before and p.name not in _RESERVED
    )
    result = CommandResult(proc.returncode, proc.stdout, str(stdout_path), files)
    (cwd / "result.json").write_text(
        json.dumps({"exit_code": result.exit_code, "stdout_path": result.stdout_path, "files": files}, indent=2)
    )
    if proc.returncode not in spec.expected_codes:
        raise BadExit(f"{argv[0]} exited with {proc.returncode}")
    check = output_check(spec.check)
    if check is not None and not check(proc.stdout):
        raise OutputValidationFailed(f"output of {argv[0]} failed check {spec.check!r}")
    return result


# ---------------------------------------------------------------------------
# Mock batch queue
# ---------------------------------------------------------------------------

PENDING, RUNNING, DONE, FAILED = "pending", "running", "done", "failed"
_ALLOWED = {PENDING: {RUNNING, FAILED}, RUNNING: {DONE, FAILED}}


@dataclass
class QueueJob:
    id: int
    spec: CommandSpec
    resources: dict[str, Any] = field(default_factory=dict)
    state: str = PENDING
    submitted: float = 0.0
    started: float | None = None
    finished: float | None = None
    result: CommandResult | None = None
    error: str | None = None


class MockQueue:
    """In-memory scheduler with ``slots`` concurrent jobs, first-in first-out.

    All state is owned by one scheduler thread; the public methods are
    request/response messages to it. ``latency`` is added to every job,
    ``fail_first`` makes the first *n* jobs fail and ``fail_jobs`` fails
    specific job ids.
    """

    def __init__(
        self,
        slots: int = 1,
        *,
        latency: float = 0.0,
        fail_first: int = 0,
        fail_jobs: tuple[int, ...] = (),
        workdir: str | os.PathLike | None = None,
        execute_commands: bool = True,
    ) -> None:
        if slots < 1:
            raise ValueError("slots must be >= 1")
        self.slots = slots
        self.latency = latency
        self.fail_first = fail_first
        self.fail_jobs = set(fail_jobs)
        self.workdir = Path(workdir) if workdir else None
        self.execute_commands = execute_commands
        self._inbox: queue.Queue = queue.Queue()
        self._jobs: dict[int, QueueJob] = {}
        self._order: list[int] = []
        self._running = 0
        self._next_id = 0
        self._closed = False
        self._thread = threading.Thread(target=self._loop, name="mock-queue", daemon=True)
        self._thread.start()

    # -- client API ------------------------------------------------------------

    def _ask(self, op: str, *args):
        reply: queue.Queue = queue.Queue(maxsize=1)
        self._inbox.put((op, args, reply))
        ok, value = reply.get()
        if not ok:
            raise value
        return value

    def submit(self, spec: CommandSpec, resources: dict[str, Any] | None = None) -> int:
        return self._ask("submit", spec, dict(resources or {}))

    def poll(self, job_id: int) -> str:
        return self._ask("poll", job_id)

    def job(self, job_id: int) -> QueueJob:
        return self._ask("job", job_id)

    def cancel(self, job_id: int) -> None:
        self._ask("cancel", job_id)

    def jobs(self) -> list[QueueJob]:
        return self._ask("jobs")

    def shutdown(self) -> None:
        if not self._closed:
            self._ask("shutdown")
            self._thread.join(5)

    def wait(self, job_id: int, poll_interval: float = 0.05, timeout: float | None = None) -> QueueJob:
        deadline = None if timeout is None else time.monotonic() + timeout
        while self.poll(job_id) not in (DONE, FAILED):
            if deadline is not None and time.monotonic() > deadline:
                raise TimeoutError(f"job {job_id} did not finish")
            time.sleep(poll_interval)
        return self.job(job_id)

    # -- scheduler ---------------------------------------------------------------

    def _transition(self, job: QueueJob, state: str) -> None:
        if state not in _ALLOWED.get(job.state, set()):
            raise RuntimeError(f"illegal job transition {job.state} -> {state}")
        log.debug("job %d %s -> %s", job.id, job.state, state)
        job.state = state

    def _loop(self) -> None:
        while True:
            op, args, reply = self._inbox.get()
            try:
                value = self._dispatch(op, *args)
                if reply is not None:
                    reply.put((True, value))
            except Exception as exc:  # noqa: BLE001 - forwarded to caller
                if reply is not None:
                    reply.put((False, exc))
            if op == "shutdown":
                return
            self._schedule()

    def _dispatch(self, op: str, *args):
        if op == "submit":
            if self._closed:
                raise SubmitFailed("queue is shut down")
            spec, resources = args
            job = QueueJob(self._next_id, spec, resources, submitted=time.monotonic())
            self._next_id += 1
            self._jobs[job.id] = job
            self._order.append(job.id)
            log.debug("job %d submitted", job.id)
            return job.id
        if op == "poll":
            return self._get(args[0]).state
        if op == "job":
            return replace(self._get(args[0]))
        if op == "jobs":
            return [replace(self._jobs[i]) for i in self._order]
        if op == "cancel":
            job = self._get(args[0])
            if job.state == PENDING:
                self._transition(job, FAILED)
                job.error = "cancelled"
                job.finished = time.monotonic()
            return None
        if op == "finished":
            job_id, result, error = args
            job = self._jobs[job_id]
            self._running -= 1
            job.finished = time.monotonic()
            job.result = result
            job.error = error
            self._transition(job, FAILED if error else DONE)
            return None
        if op == "shutdown":
            self._closed = True
            return None
        raise ValueError(f"unknown request {op!r}")

    def _get(self, job_id: int) -> QueueJob:
        try:
            return self._jobs[job_id]
        except KeyError:
            raise KeyError(f"no job {job_id}") from None

    def _schedule(self) -> None:
        for job_id in self._order:
            if self._running >= self.slots:
                return
            job = self._jobs[job_id]
            if job.state != PENDING:
                continue
            self._transition(job, RUNNING)
            job.started = time.monotonic()
            self._running += 1
            threading.Thread(target=self._work, args=(job.id, job.spec), daemon=True).start()

    def _work(self, job_id: int, spec: CommandSpec) -> None:
        result = error = None
        try:
            if self.latency:
                time.sleep(self.latency)
            if job_id < self.fail_first or job_id in self.fail_jobs:
                raise JobFailed(f"injected failure for job {job_id}")
            if self.execute_commands:
                cwd = (self.workdir or Path(os.getcwd())) / f"job-{job_id}"
                result = run_command(spec, cwd)
        except Exception as exc:  # noqa: BLE001
            error = f"{type(exc).__name__}: {exc}"
        self._inbox.put(("finished", (job_id, result, error), None))


def make_queue_backend(settings: dict[str, Any] | None, workdir: str | os.PathLike | None = None) -> MockQueue:
    """Build the backend described by a system config ``queue`` block."""
    settings = dict(settings or {})
    backend = settings.pop("backend", "mock")
    if backend != "mock":
        raise SubmitFailed(f"unsupported queue backend {backend!r}")
    return MockQueue(
        slots=int(settings.get("slots", 1)),
        latency=float(settings.get("latency", 0.0)),
        fail_first=int(settings.get("fail_first", 0)),
        fail_jobs=tuple(settings.get("fail_jobs", ())),
        workdir=settings.get("workdir") or workdir,
    )


_QUEUE_OPS = ("submit", "poll", "job", "cancel")


class QueueService:
    """Serves queue requests from node contexts against one shared backend.

    Nodes put ``(path, op, args)`` on ``requests``; the reply goes to
    ``replies[path]``. Runs as a thread in the supervising context.
    """

    def __init__(self, backend: MockQueue, requests, replies: dict[str, Any]) -> None:
        self.backend = backend
        self.requests = requests
        self.replies = replies
        self._thread = threading.Thread(target=self._loop, name="queue-service", daemon=True)
        self._thread.start()

    def _loop(self) -> None:
        while True:
            msg = self.requests.get()
            if msg is None:
                return
            path, op, args = msg
            try:
                if op not in _QUEUE_OPS:
                    raise ValueError(f"unknown queue operation {op!r}")
                reply = (True, getattr(self.backend, op)(*args))
            except Exception as exc:  # noqa: BLE001 - forwarded to the node
                reply = (False, exc)
            self.replies[path].put(reply)

    def close(self) -> None:
        self.requests.put(None)
        self._thread.join(5)
        self.backend.shutdown()


class QueueClient:
    """Node-side handle with the same surface as :class:`MockQueue`."""

    def __init__(self, path: str, requests, reply, timeout: float = 60.0) -> None:
        self.path = path
        self.requests = requests
        self.reply = reply
        self.timeout = timeout

    def _ask(self, op: str, *args):
        self.requests.put((self.path, op, args))
        try:
            ok, value = self.reply.get(timeout=self.timeout)
        except queue.Empty:
            raise SubmitFailed(f"queue service did not answer {op!r}") from None
        if not ok:
            raise value
        return value

    def submit(self, spec: CommandSpec, resources: dict[str, Any] | None = None) -> int:
        return self._ask("submit", spec, dict(resources or {}))

    def poll(self, job_id: int) -> str:
        return self._ask("poll", job_id)

    def job(self, job_id: int) -> QueueJob:
        return self._ask("job", job_id)

    def cancel(self, job_id: int) -> None:
        self._ask("cancel", job_id)
