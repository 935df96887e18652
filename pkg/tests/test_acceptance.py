"""End-to-end acceptance checks, one test per criterion.

Runs use process isolation (the default) unless noted. Each test prints a
single ``[criterion N] PASS|FAIL`` line; the lines are repeated in the
terminal summary.
"""

import hashlib
import json
import os
import random
import threading
import time
from collections import Counter

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings

from flowcycle import Copy, Merge, Passthrough, RunConfig, Workflow, deserialize, dumps, serialize
from flowcycle.channels import Channel
from flowcycle.cli import main as cli
from flowcycle.demos import (
    ALConfig,
    assemble_active_learning_workflow,
    assemble_conditional_precision_workflow,
    assemble_docking_workflow,
    batch_deviations,
    expected_wall_times,
    Increment,
    run_timing_experiment,
)
from flowcycle.errors import TypeMismatch
from flowcycle.patterns import make_iterative, make_parallel
from flowcycle.runtime import NodeStatus, Outcome, live_contexts

from kinds import AddOne, Blocker, Collect, CycleHead, EmitEach, Flaky, Identity
from strategies import workflows
from test_io import structure
from verdicts import criterion


def proc_cfg(tmp_path, name="run", poll=0.1, timeout=60):
    return RunConfig(workdir=tmp_path / name, poll_interval=poll, timeout=timeout)


def conserved(report):
    return all(ch.sent == ch.received + ch.queued for ch in report.channels)


def timed(wf, cfg):
    t0 = time.monotonic()
    report = wf.execute(cfg)
    return report, time.monotonic() - t0


def hand_loop(x, limit=10):
    calls = 0
    while True:
        x += 1
        calls += 1
        if x >= limit:
            return x, calls


def test_criterion_01_cyclic_execution(tmp_path):
    with criterion(1, "cyclic execution") as d:
        wf = Workflow("root")
        src = wf.add(EmitEach, "src", values=[7])
        wf.add(make_iterative(Increment, "ge", 10))
        sink = wf.add(Collect, "sink")
        wf.connect_all((src.out, "iterative.inp"), ("iterative.out", sink.inp))
        report, wall = timed(wf, proc_cfg(tmp_path))
        expected, calls = hand_loop(7)
        d.update(result=report.nodes["sink"].info["items"], body_calls=report.nodes["iterative/body"].invocations,
                 wall_s=round(wall, 2))
        assert report.success
        assert report.nodes["sink"].info["items"] == [expected] == [10]
        assert report.nodes["iterative/body"].invocations == calls == 3
        assert wall < 5


def test_criterion_02_conditional_routing(tmp_path):
    with criterion(2, "conditional routing") as d:
        devs = batch_deviations(64)
        median = float(np.median(devs))
        wf = assemble_conditional_precision_workflow(64, median)
        report, wall = timed(wf, proc_cfg(tmp_path, "median"))
        assert report.success, report.summary()
        router = report.nodes["router"].info
        assert router["n_true"] + router["n_false"] == 64
        assert router["n_true"] == int((devs > median).sum())
        assert report.nodes["precise_score"].info["scored"] == router["n_true"]
        assert report.nodes["result"].info["count"] == 64
        inf_report, wall_inf = timed(
            assemble_conditional_precision_workflow(64, float("inf")), proc_cfg(tmp_path, "inf")
        )
        assert inf_report.success
        assert inf_report.nodes["precise_score"].info["scored"] == 0
        assert inf_report.nodes["precise_score"].invocations == 0
        d.update(n_true=router["n_true"], n_false=router["n_false"], wall_s=round(wall, 2))
        assert wall < 10 and wall_inf < 10


def test_criterion_03_cascading_shutdown(tmp_path):
    with criterion(3, "cascading shutdown") as d:
        chain = Workflow("chain")
        prev = chain.add(EmitEach, "src", values=[1, 2, 3])
        for i in range(3):
            node = chain.add(AddOne, f"m{i}")
            chain.connect(prev.out, node.inp)
            prev = node
        chain.connect(prev.out, chain.add(Collect, "sink").inp)

        ring = Workflow("ring")
        head, body = ring.add(CycleHead, "head", limit=5), ring.add(Passthrough, "body", dtype="int")
        ring.connect_all((head.out, body.inp), (body.out, head.back))

        diamond = Workflow("diamond")
        a = diamond.add(EmitEach, "a", values=list(range(6)))
        cp = diamond.add(Copy, "copy", dtype="int")
        b, c = diamond.add(AddOne, "b"), diamond.add(Identity, "c")
        m = diamond.add(Merge, "merge", dtype="int")
        sink = diamond.add(Collect, "d")
        diamond.connect_all(
            (a.out, cp.inp), (cp.out1, b.inp), (cp.out2, c.inp), (b.out, m.inp1), (c.out, m.inp2), (m.out, sink.inp)
        )
        walls = {}
        for name, wf, n_nodes in (("chain", chain, 5), ("cycle", ring, 2), ("diamond", diamond, 6)):
            report, walls[name] = timed(wf, proc_cfg(tmp_path, name))
            assert report.success, report.summary()
            assert len(report.nodes) == n_nodes
            assert all(n.status is NodeStatus.COMPLETED for n in report.nodes.values())
            assert report.live_contexts == 0 and live_contexts() == 0
            assert conserved(report)
            assert walls[name] < 10
        d.update({f"{k}_s": round(v, 2) for k, v in walls.items()})


def test_criterion_04_deadlock_detection(tmp_path):
    with criterion(4, "deadlock detection") as d:
        wf = Workflow("root")
        a, b = wf.add(Blocker, "a"), wf.add(Blocker, "b")
        wf.connect_all((a.out, b.inp), (b.out, a.inp))
        report, wall = timed(wf, proc_cfg(tmp_path, poll=0.25))
        d.update(outcome=report.outcome.value, nodes="+".join(report.deadlocked), exit=report.exit_code,
                 wall_s=round(wall, 2))
        assert report.outcome is Outcome.DEADLOCK
        assert report.deadlocked == ("a", "b")
        assert report.exit_code == 2
        assert wall <= 3 * 0.25


def pipeline(stages, n=8):
    wf = Workflow("pipe")
    prev = wf.add(EmitEach, "src", values=list(range(n)))
    for i, dl in enumerate(stages):
        node = wf.add(Identity, f"stage{i}", delay=dl)
        wf.connect(prev.out, node.inp)
        prev = node
    wf.connect(prev.out, wf.add(Collect, "sink").inp)
    return wf


def test_criterion_05_pipeline_overlap(tmp_path):
    with criterion(5, "pipeline overlap") as d:
        # The baseline does both stages' work in one node, one batch at a time.
        seq, t_seq = timed(pipeline([0.2]), proc_cfg(tmp_path, "seq"))
        par, t_par = timed(pipeline([0.1, 0.1]), proc_cfg(tmp_path, "par"))
        bound = (8 + 1) * 0.1
        d.update(sequential_s=round(t_seq, 2), pipelined_s=round(t_par, 2), bound_s=bound)
        assert seq.success and par.success
        assert par.nodes["sink"].info["items"] == list(range(8))
        assert t_seq >= 1.5
        assert t_par <= bound + 0.4


def test_criterion_06_parallelization(tmp_path):
    with criterion(6, "parallelization") as d:
        values = [5, 3, 8, 1, 9, 2, 7, 4]
        wf = Workflow("root")
        src = wf.add(EmitEach, "src", values=values)
        wf.add(make_parallel(Identity("tpl", delay=0.1), 4))
        sink = wf.add(Collect, "sink")
        wf.connect_all((src.out, "parallel.inp"), ("parallel.out", sink.inp))
        report, wall = timed(wf, proc_cfg(tmp_path, poll=0.05))
        d.update(wall_ms=round(wall * 1000), bound_ms=200)
        assert report.success
        assert Counter(report.nodes["sink"].info["items"]) == Counter(values)
        assert wall < 0.5


@pytest.mark.slow
def test_criterion_07_active_learning_speedup(tmp_path, capsys):
    with criterion(7, "active-learning speedup") as d:
        cfg = ALConfig()
        assert (cfg.iterations, cfg.batch_size, cfg.acquired) == (10, 512, 128)
        seq_exp, par_exp = expected_wall_times(cfg)
        t0 = time.monotonic()
        result = run_timing_experiment(cfg, proc_cfg(tmp_path, poll=0.1, timeout=60), echo=True)
        total = time.monotonic() - t0
        out = capsys.readouterr().out.splitlines()
        d.update(seq_ms=round(result["sequential_ms"]), par_ms=round(result["parallel_ms"]),
                 ratio=round(result["ratio"], 3), expected=round(par_exp / seq_exp, 3))
        assert out[0].startswith("sequential_ms=") and " parallel_ms=" in out[0] and " speedup=" in out[0]
        assert result["ratio"] <= 0.92
        assert result["sequential_ms"] / 1000 >= 0.9 * seq_exp
        assert total < 60


def test_criterion_08_serialization_round_trip():
    with criterion(8, "serialization round trip") as d:
        seen = []

        @settings(max_examples=200, deadline=None, derandomize=True,
                  suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large])
        @given(wf=workflows())
        def check(wf):
            doc = serialize(wf)
            back = deserialize(doc)
            assert structure(back) == structure(wf)
            assert dumps(serialize(back)) == dumps(doc)
            seen.append(1)

        t0 = time.monotonic()
        check()
        wall = time.monotonic() - t0
        d.update(workflows=len(seen), wall_s=round(wall, 2))
        assert len(seen) >= 200
        assert wall < 10


def _tag(port):
    return port.port_type.tag


def _clash(a, b):
    return "any" not in (a, b) and a != b


def mismatched_documents(count=50, seed=2024):
    """Documents whose channels no longer type-check.

    Either two channel sources are swapped so that at least one pairing
    clashes, or a node's ``dtype`` parameter is changed.
    """
    bases = [
        assemble_active_learning_workflow(ALConfig(), "parallel"),
        assemble_active_learning_workflow(ALConfig(), "sequential"),
        assemble_conditional_precision_workflow(),
        assemble_docking_workflow(),
    ]
    bases[-1].set("receptor", "r.pdbqt")
    pools = []
    for wf in bases:
        doc = serialize(wf)
        chans = doc["channels"]
        tags = [(_tag(wf.resolve_port(c["from"])[1]), _tag(wf.resolve_port(c["to"])[1])) for c in chans]
        swaps = []
        for i in range(len(chans)):
            for j in range(i + 1, len(chans)):
                if _clash(tags[j][0], tags[i][1]) or _clash(tags[i][0], tags[j][1]):
                    mutated = json.loads(json.dumps(doc))
                    mutated["channels"][i]["from"], mutated["channels"][j]["from"] = chans[j]["from"], chans[i]["from"]
                    swaps.append(mutated)
        random.Random(seed).shuffle(swaps)
        pools.append(swaps)
        # Retyping a node's dtype parameter breaks the channels on its ports.
        retyped = []
        for k, node in enumerate(doc["nodes"]):
            current = node["parameters"].get("dtype")
            if current in (None, "any"):
                continue
            for tag in ("int", "str", "float", "bool", "list<int>", "path"):
                if tag != current:
                    mutated = json.loads(json.dumps(doc))
                    mutated["nodes"][k]["parameters"]["dtype"] = tag
                    retyped.append(mutated)
        random.Random(seed + 1).shuffle(retyped)
        pools.append(retyped)
    corpus = []
    while len(corpus) < count and any(pools):
        for pool in pools:
            if pool and len(corpus) < count:
                corpus.append(pool.pop())
    return corpus


def test_criterion_09_type_safety(tmp_path):
    with criterion(9, "type safety") as d:
        corpus = mismatched_documents()
        assert len(corpus) == 50
        rejected_load = rejected_cli = 0
        for k, doc in enumerate(corpus):
            with pytest.raises(TypeMismatch):
                deserialize(doc)
            rejected_load += 1
            path = tmp_path / f"mutant{k}.json"
            path.write_text(dumps(doc))
            workdir = tmp_path / f"run{k}"
            assert cli(["validate", str(path)]) == 1
            assert cli(["run", str(path), "--workdir", str(workdir), "--isolation", "thread"]) == 1
            assert not workdir.exists()  # nothing was launched
            rejected_cli += 1
        d.update(documents=len(corpus), rejected=f"{rejected_load}/{rejected_cli}")


def _stress(capacity, n=10_000):
    ch = Channel(capacity)
    received, peak = [], [0]

    def produce():
        rng = random.Random(capacity)
        for i in range(n):
            ch.send(i)
            if rng.random() < 0.001:
                time.sleep(0.0005)
        ch.close()

    t = threading.Thread(target=produce)
    t.start()
    while True:
        peak[0] = max(peak[0], ch.queued)
        try:
            received.append(ch.receive(timeout=10).value())
        except Exception as exc:  # closed and drained
            if type(exc).__name__ != "ChannelClosedAndEmpty":
                raise
            break
    t.join()
    return ch, received, peak[0]


def test_criterion_10_channel_properties(tmp_path):
    with criterion(10, "channel properties") as d:
        for capacity in (1, 2, 3, 4):
            ch, got, peak = _stress(capacity)
            assert got == list(range(10_000))
            assert peak <= capacity
            assert ch.sent == ch.received + ch.queued == 10_000
        sizes = [1 << 10, 64 << 10, 1 << 20, 10 << 20]
        ch = Channel(2, staging_dir=tmp_path / "stage")
        for size in sizes:
            src = tmp_path / f"payload-{size}.bin"
            src.write_bytes(os.urandom(size))
            want = hashlib.sha256(src.read_bytes()).hexdigest()
            ch.send_files([src])
            (dest,) = ch.receive_files(tmp_path / f"recv-{size}")
            assert hashlib.sha256(open(dest, "rb").read()).hexdigest() == want
        d.update(items=10_000, capacities="1-4", file_sizes="1KiB-10MiB")


def test_criterion_11_retry(tmp_path):
    with criterion(11, "retry") as d:
        ok = Workflow("ok")
        flaky = ok.add(Flaky("flaky", fail_times=2, max_retries=2))
        ok.connect(flaky.out, ok.add(Collect, "sink").inp)
        good = ok.execute(proc_cfg(tmp_path, "ok"))
        assert good.success
        assert good.nodes["flaky"].status is NodeStatus.COMPLETED and good.nodes["flaky"].retries == 2

        bad = Workflow("bad")
        flaky = bad.add(Flaky("flaky", fail_times=2, max_retries=1))
        tail = bad.add(AddOne, "tail")
        bad.connect_all((flaky.out, tail.inp), (tail.out, bad.add(Collect, "sink").inp))
        failed = bad.execute(proc_cfg(tmp_path, "bad"))
        assert failed.outcome is Outcome.FAILED and failed.failed_node == "flaky"
        assert failed.nodes["flaky"].status is NodeStatus.FAILED
        assert all(failed.nodes[p].status is NodeStatus.STOPPED for p in ("tail", "sink"))
        assert failed.live_contexts == 0
        d.update(retries=good.nodes["flaky"].retries, failed=failed.failed_node)


def test_criterion_12_learning_trend(tmp_path):
    with criterion(12, "learning trend") as d:
        cfg = ALConfig(generation_latency=0, predict_latency=0, oracle_latency=0, train_latency=0)
        report = assemble_active_learning_workflow(cfg, "parallel").execute(proc_cfg(tmp_path))
        assert report.success, report.summary()
        info = report.nodes["generator"].info
        best, mean = info["best_oracle"], info["mean_acquired"]
        assert len(best) == len(mean) == 10
        assert all(b2 >= b1 for b1, b2 in zip(best, best[1:]))
        assert mean[-1] > mean[0]
        d.update(best_first=round(best[0], 3), best_last=round(best[-1], 3), mean_first=round(mean[0], 3),
                 mean_last=round(mean[-1], 3))
