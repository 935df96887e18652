"""How runs end: clean cascades, deadlock, retries and failures.

* A linear chain finishes when the source closes its output; every node
  downstream sees its input close and completes in turn.
* Two forwarders wired into a loop with nothing to start them make no
  progress; the supervisor notices the quiescent state and reports a
  deadlock (exit code 2) instead of hanging.
* A node that fails twice and is allowed two retries completes; with one
  retry it fails and the rest of the graph is stopped.

    python3 demos/shutdown_deadlock_retry.py
"""

import tempfile

from flowcycle import LoadData, LogResult, Node, Passthrough, RunConfig, Workflow
from flowcycle.errors import NodeFailure
from flowcycle.graph import Output, Parameter


class Unreliable(Node):
    """Raises ``failures`` times before sending ``value``."""

    out = Output("int")
    failures = Parameter("int", default=2)
    value = Parameter("int", default=42)

    def setup(self) -> None:
        self._attempts = 0

    def run(self) -> None:
        self._attempts += 1
        if self._attempts <= self.failures.value:
            raise NodeFailure(f"transient failure {self._attempts}")
        self.out.send(self.value.value)


def chain() -> Workflow:
    wf = Workflow("chain")
    src = wf.add(LoadData("src", data=[1, 2, 3], dtype="list<int>"))
    a = wf.add(Passthrough("a"))
    b = wf.add(Passthrough("b"))
    out = wf.add(LogResult("out"))
    wf.connect_all((src.out, a.inp), (a.out, b.inp), (b.out, out.inp))
    return wf


def stuck_loop() -> Workflow:
    wf = Workflow("stuck")
    a, b = wf.add(Passthrough("a", dtype="int")), wf.add(Passthrough("b", dtype="int"))
    wf.connect_all((a.out, b.inp), (b.out, a.inp))
    return wf


def flaky(retries: int) -> Workflow:
    wf = Workflow("flaky")
    node = wf.add(Unreliable("unreliable", max_retries=retries))
    tail = wf.add(Passthrough("tail", dtype="int"))
    out = wf.add(LogResult("out"))
    wf.connect_all((node.out, tail.inp), (tail.out, out.inp))
    return wf


def show(label: str, report) -> None:
    statuses = ", ".join(f"{p}={n.status.value}" for p, n in report.nodes.items())
    print(f"{label:<18} outcome={report.outcome.value:<9} exit={report.exit_code} [{statuses}]")


def main() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        cfg = lambda name: RunConfig(workdir=f"{tmp}/{name}", log_level="CRITICAL", poll_interval=0.1)  # noqa: E731
        show("chain", chain().execute(cfg("chain")))
        report = stuck_loop().execute(cfg("stuck"))
        show("empty loop", report)
        print(f"{'':<18} deadlocked nodes: {', '.join(report.deadlocked)}")
        for retries in (2, 1):
            report = flaky(retries).execute(cfg(f"flaky{retries}"))
            show(f"max_retries={retries}", report)
            print(f"{'':<18} retries used: {report.nodes['unreliable'].retries}")


if __name__ == "__main__":
    main()
