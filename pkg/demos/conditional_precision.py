"""Conditional execution: only items that need it take the slow branch.

A batch of candidates is scored by a fast, noisy scorer. A router sends
items whose deviation from a reference exceeds a threshold to a second,
precise instance of the same scorer; the rest skip it. The precise branch
only does work when it receives data.

    python3 demos/conditional_precision.py [--batch 64]
"""

import argparse
import tempfile

import numpy as np

from flowcycle import RunConfig
from flowcycle.demos import assemble_conditional_precision_workflow, batch_deviations


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--batch", type=int, default=64)
    args = parser.parse_args()

    median = float(np.median(batch_deviations(args.batch)))
    with tempfile.TemporaryDirectory() as tmp:
        for label, threshold in (("median", median), ("infinite", float("inf")), ("-infinite", float("-inf"))):
            wf = assemble_conditional_precision_workflow(args.batch, threshold)
            report = wf.execute(RunConfig(workdir=f"{tmp}/{label}", log_level="WARNING"))
            router = report.nodes["router"].info
            print(
                f"threshold={label:<9} rescored={router['n_true']:>3} kept={router['n_false']:>3} "
                f"precise_invocations={report.nodes['precise_score'].invocations}"
            )


if __name__ == "__main__":
    main()
