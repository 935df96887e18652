"""Regenerate the workflow documents in demos/workflows/ from Python.

    python3 demos/make_documents.py [output dir]
"""

import sys
from pathlib import Path

from flowcycle import Passthrough, Workflow, dump, make_iterative
from flowcycle.demos import (
    Increment,
    assemble_active_learning_workflow,
    assemble_conditional_precision_workflow,
    assemble_docking_workflow,
)
from flowcycle.nodes import LoadData, LogResult

HERE = Path(__file__).resolve().parent / "workflows"


def deadlock_cycle() -> Workflow:
    # Two forwarders feeding each other with nothing to start the loop.
    wf = Workflow("deadlock_cycle", doc="Empty two-node cycle; never makes progress")
    a = wf.add(Passthrough("a", dtype="int"))
    b = wf.add(Passthrough("b", dtype="int"))
    wf.connect_all((a.out, b.inp), (b.out, a.inp))
    return wf


def increment_loop() -> Workflow:
    wf = Workflow("increment_loop", doc="Increment until the value reaches 10")
    src = wf.add(LoadData("start", data=7, dtype="int"))
    wf.add(make_iterative(Increment, "ge", 10, max_iterations=50, name="loop"))
    sink = wf.add(LogResult("result", dtype="int"))
    wf.connect(src.out, "loop.inp")
    wf.connect("loop.out", sink.inp)
    wf.map_parameters("start", ["start.data"])
    return wf


def main(out: Path = HERE) -> None:
    out.mkdir(exist_ok=True)
    dump(assemble_docking_workflow(), out / "docking.json")
    dump(assemble_docking_workflow(), out / "docking.yaml")
    dump(deadlock_cycle(), out / "deadlock_cycle.json")
    dump(increment_loop(), out / "increment_loop.json")
    dump(assemble_conditional_precision_workflow(), out / "conditional_precision.json")
    for variant in ("sequential", "parallel"):
        dump(assemble_active_learning_workflow(variant=variant), out / f"active_learning_{variant}.json")
    print("\n".join(sorted(p.name for p in out.iterdir())))


if __name__ == "__main__":
    main(Path(sys.argv[1]) if len(sys.argv) > 1 else HERE)
