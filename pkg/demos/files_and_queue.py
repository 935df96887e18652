"""Files on channels, external commands and a batch queue.

A command writes a file in its own attempt directory; the file travels
over a channel (copied on send, moved on receive) to a copy node, and
both consumers get independent copies. A second part submits commands to
the local mock queue with one slot, so the second job starts only after
the first has finished.

    python3 demos/files_and_queue.py
"""

import hashlib
import tempfile
from pathlib import Path

from flowcycle import CommandSpec, Copy, LogResult, MockQueue, Node, RunCommand, RunConfig, Workflow
from flowcycle.graph import Input, Output


class OutputFiles(Node):
    """Turns a command result into a file item."""

    looped = True
    inp = Input("dict")
    out = Output("path")

    def run(self) -> None:
        self.out.send_files(self.inp.receive()["files"])


class Checksums(Node):
    looped = True
    inp = Input("path")

    def run(self) -> None:
        for path in self.inp.receive_files():
            digest = hashlib.sha256(Path(path).read_bytes()).hexdigest()[:12]
            self.info.setdefault("files", []).append((path, digest))


def files_demo(tmp: str) -> None:
    wf = Workflow("files")
    cmd = wf.add(RunCommand("make", command=["sh", "-c", "seq 1 1000 > numbers.txt"]))
    wrap = wf.add(OutputFiles("wrap"))
    copy = wf.add(Copy("copy", dtype="path"))
    left, right = wf.add(Checksums("left")), wf.add(Checksums("right"))
    wf.connect_all((cmd.out, wrap.inp), (wrap.out, copy.inp), (copy.out1, left.inp), (copy.out2, right.inp))
    report = wf.execute(RunConfig(workdir=tmp, log_level="WARNING"))
    for name in ("left", "right"):
        ((path, digest),) = report.nodes[name].info["files"]
        print(f"{name:<5} {digest}  {Path(path).relative_to(tmp)}")


def queue_demo() -> None:
    q = MockQueue(slots=1, latency=0.2, execute_commands=False)
    try:
        ids = [q.submit(CommandSpec(("true",))) for _ in range(3)]
        jobs = [q.wait(i, poll_interval=0.01) for i in ids]
    finally:
        q.shutdown()
    t0 = jobs[0].submitted
    for job in jobs:
        print(f"job {job.id}: start {job.started - t0:.2f}s  finish {job.finished - t0:.2f}s  {job.state}")


def main() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        files_demo(tmp)
    queue_demo()


if __name__ == "__main__":
    main()
