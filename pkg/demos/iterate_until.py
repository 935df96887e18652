"""Feedback loops: repeat a step until a predicate holds.

An Increment node is wrapped in an iteration subgraph that feeds each
value back to the body until ``value >= 10``. Starting from 7 the body
runs three times; a value that already satisfies the predicate still
passes through the body once.

    python3 demos/iterate_until.py
"""

import tempfile

from flowcycle import LoadData, LogResult, RunConfig, Workflow, make_iterative
from flowcycle.demos import Increment


def build(start: int) -> Workflow:
    wf = Workflow("iterate")
    src = wf.add(LoadData("start", data=start, dtype="int"))
    wf.add(make_iterative(Increment, "ge", 10, max_iterations=50, name="loop"))
    out = wf.add(LogResult("result", dtype="int"))
    wf.connect_all((src.out, "loop.inp"), ("loop.out", out.inp))
    return wf


def main() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        for start in (7, 12):
            report = build(start).execute(RunConfig(workdir=f"{tmp}/{start}", log_level="WARNING"))
            result = report.nodes["result"].info["values"]
            body = report.nodes["loop/body"].invocations
            print(f"start={start} result={result[0]} body_invocations={body} outcome={report.outcome.value}")


if __name__ == "__main__":
    main()
