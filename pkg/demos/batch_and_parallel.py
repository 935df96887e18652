"""Batching and load balancing around an unchanged node.

``make_batched`` feeds a list-processing node in chunks and stitches the
results back together; ``make_parallel`` spreads a stream of items over
several copies of a slow node. Neither changes the inner node.

    python3 demos/batch_and_parallel.py
"""

import tempfile
import time

from flowcycle import LoadData, LogResult, Node, RunConfig, Sleep, Workflow, make_batched, make_parallel
from flowcycle.graph import Input, Output


class Square(Node):
    """Squares a list of ints, one call per list."""

    looped = True
    inp = Input("list<int>")
    out = Output("list<int>")

    def run(self) -> None:
        xs = self.inp.receive()
        self.info.setdefault("sizes", []).append(len(xs))
        self.out.send([x * x for x in xs])


class Unpack(Node):
    """Forwards each element of a received list as its own item."""

    looped = True
    inp = Input("list<int>")
    out = Output("int")

    def run(self) -> None:
        for x in self.inp.receive():
            self.out.send(x)


def batched(tmp: str) -> None:
    wf = Workflow("batched_demo")
    src = wf.add(LoadData("data", data=list(range(10)), dtype="list<int>"))
    wf.add(make_batched(Square, 4))
    out = wf.add(LogResult("result"))
    wf.connect_all((src.out, "batched.inp"), ("batched.out", out.inp))
    report = wf.execute(RunConfig(workdir=tmp, log_level="WARNING"))
    print("chunk sizes seen by the inner node:", report.nodes["batched/inner"].info["sizes"])
    print("result:", report.nodes["result"].info["values"][0])


def parallel(tmp: str, workers: int) -> float:
    wf = Workflow("parallel_demo")
    src = wf.add(LoadData("data", data=list(range(8)), dtype="list<int>"))
    split = wf.add(Unpack("split"))
    wf.add(make_parallel(Sleep("slow", delay=0.1, dtype="int"), workers))
    out = wf.add(LogResult("result", dtype="int"))
    wf.connect_all((src.out, split.inp), (split.out, "parallel.inp"), ("parallel.out", out.inp))
    t0 = time.monotonic()
    report = wf.execute(RunConfig(workdir=tmp, log_level="WARNING", poll_interval=0.05))
    wall = time.monotonic() - t0
    assert sorted(int(v) for v in report.nodes["result"].info["values"]) == list(range(8))
    return wall


def main() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        batched(f"{tmp}/batched")
        for workers in (1, 2, 4):
            wall = parallel(f"{tmp}/parallel{workers}", workers)
            print(f"8 items x 100 ms over {workers} worker(s): {wall * 1000:.0f} ms")


if __name__ == "__main__":
    main()
