"""Overlapping retraining with generation in an active-learning loop.

Both variants run the same synthetic loop: a generator proposes a batch,
a k-NN surrogate scores it, the best-scored subset goes to a slow
analytic oracle and the scores flow back. The sequential variant waits
for the surrogate to retrain before generating again; the parallel one
lets retraining overlap the next generation step.

    python3 demos/active_learning_timing.py          # 10 x 512, 128 acquired
    python3 demos/active_learning_timing.py --quick  # a few seconds
"""

import argparse
import tempfile

from flowcycle import RunConfig
from flowcycle.demos import ALConfig, expected_wall_times, run_active_learning, run_timing_experiment


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--quick", action="store_true", help="3 iterations of 64 candidates")
    args = parser.parse_args()
    cfg = ALConfig(iterations=3, batch_size=64, acquired=16) if args.quick else ALConfig()

    seq, par = expected_wall_times(cfg)
    print(f"critical path: sequential {seq:.2f}s, parallel {par:.2f}s")
    with tempfile.TemporaryDirectory() as tmp:
        run_timing_experiment(cfg, RunConfig(workdir=tmp, log_level="WARNING", poll_interval=0.1))
        report = run_active_learning(cfg, "parallel", RunConfig(workdir=f"{tmp}/trend", log_level="WARNING"))
    gen = report.nodes["generator"].info
    for i, (best, mean) in enumerate(zip(gen["best_oracle"], gen["mean_acquired"]), 1):
        print(f"iteration {i:2d}: best oracle {best:7.3f}  mean acquired {mean:7.3f}")


if __name__ == "__main__":
    main()
