"""Synthetic demonstration workflows.

Two assembled workflows exercise the engine end to end without any
chemistry software:

* an active-learning loop (generator, k-NN surrogate, acquisition, an
  analytic oracle with injected latency, retraining), in a sequential and a
  parallel variant, plus a timing experiment comparing the two;
* a conditional-precision workflow in which items whose deviation from a
  reference exceeds a threshold are rescored by a slower, more precise
  scorer.

A small docking-style pipeline (``EmbedSmiles`` -> ``SyntheticDock``) is
also provided for document and command-line examples.
"""

from __future__ import annotations

import dataclasses
import hashlib
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .channels import ChannelClosed, ChannelClosedAndEmpty
from .errors import FatalNodeError, NodeFailure
from .graph import Input, Node, Output, Parameter, Workflow
from .nodes import ConditionalRouter, Copy, LogResult, Merge
from .runtime import ExecutionReport, RunConfig

__all__ = [
    "ALConfig",
    "Candidate",
    "SurrogateModel",
    "UntrainedModel",
    "acquire_subset",
    "assemble_active_learning_workflow",
    "assemble_conditional_precision_workflow",
    "assemble_docking_workflow",
    "batch_deviations",
    "expected_wall_times",
    "hidden_optimum",
    "oracle_score",
    "run_active_learning",
    "run_timing_experiment",
]

CANDIDATES = "list<candidate>"


@dataclass
class Candidate:
    """A generated point. ``score`` is set iff ``score_source`` is not ``"none"``."""

    id: int
    features: np.ndarray
    score: float | None = None
    score_source: str = "none"  # "surrogate" | "oracle" | "none"
    deviation: float | None = None

    def __post_init__(self) -> None:
        self.features = np.asarray(self.features, dtype=float)
        if not np.all(np.isfinite(self.features)):
            raise ValueError("candidate features must be finite")
        if (self.score is None) != (self.score_source == "none"):
            raise ValueError("score must be set exactly when score_source is not 'none'")

    def scored(self, score: float, source: str) -> "Candidate":
        return dataclasses.replace(self, score=float(score), score_source=source)

    def __repr__(self) -> str:
        score = "None" if self.score is None else f"{self.score:.4f}"
        return f"Candidate(id={self.id}, score={score}, source={self.score_source})"


def hidden_optimum(seed: int, dim: int = 8, distance: float = 4.0) -> np.ndarray:
    """The oracle's optimum: a point at ``distance`` from the origin."""
    direction = np.random.default_rng([seed, 7919]).normal(size=dim)
    return distance * direction / np.linalg.norm(direction)


def oracle_score(features: np.ndarray, optimum: np.ndarray) -> np.ndarray:
    """``-||x - c||``; maximal (zero) at the optimum."""
    return -np.linalg.norm(np.atleast_2d(features) - optimum, axis=1)


class UntrainedModel(NodeFailure):
    retryable = False


class SurrogateModel:
    """k-nearest-neighbour mean predictor with Euclidean distance."""

    def __init__(self, k: int = 5) -> None:
        if k < 1:
            raise ValueError("k must be >= 1")
        self.k = k
        self._x: list[np.ndarray] = []
        self._y: list[float] = []

    def __len__(self) -> int:
        return len(self._y)

    def add(self, features: Sequence[np.ndarray], scores: Sequence[float]) -> None:
        if len(features) != len(scores):
            raise ValueError("features and scores differ in length")
        self._x.extend(np.asarray(f, dtype=float) for f in features)
        self._y.extend(float(s) for s in scores)

    def predict(self, queries: np.ndarray) -> np.ndarray:
        if not self._y:
            raise UntrainedModel("surrogate model has no training data")
        x = np.stack(self._x)
        y = np.asarray(self._y)
        q = np.atleast_2d(np.asarray(queries, dtype=float))
        d2 = ((q[:, None, :] - x[None, :, :]) ** 2).sum(axis=2)
        k = min(self.k, len(y))
        nearest = np.argsort(d2, axis=1, kind="stable")[:, :k]
        return y[nearest].mean(axis=1)


def acquire_subset(
    candidates: Sequence[Candidate],
    k: int,
    strategy: str = "greedy",
    *,
    epsilon: float = 0.1,
    rng: np.random.Generator | None = None,
) -> tuple[list[Candidate], list[Candidate]]:
    """Split scored candidates into ``(acquired, remainder)``.

    ``greedy`` takes the top ``k`` predicted scores (ties go to the lower
    id); ``random`` samples ``k`` uniformly; ``epsilon-greedy`` samples
    ``round(epsilon * k)`` at random and fills the rest greedily.
    """
    if not 0 <= k <= len(candidates):
        raise ValueError(f"cannot acquire {k} of {len(candidates)} candidates")
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must be in [0, 1]")
    rng = rng if rng is not None else np.random.default_rng(0)
    ranked = sorted(candidates, key=lambda c: (-(c.score if c.score is not None else -np.inf), c.id))
    if strategy == "greedy":
        chosen = ranked[:k]
    elif strategy == "random":
        picks = rng.choice(len(candidates), size=k, replace=False)
        chosen = [candidates[i] for i in sorted(picks)]
    elif strategy == "epsilon-greedy":
        n_random = int(round(epsilon * k))
        chosen = ranked[: k - n_random]
        rest = ranked[k - n_random :]
        picks = rng.choice(len(rest), size=n_random, replace=False) if n_random else []
        chosen += [rest[i] for i in sorted(picks)]
    else:
        raise ValueError(f"unknown acquisition strategy {strategy!r}")
    taken = {c.id for c in chosen}
    remainder = [c for c in candidates if c.id not in taken]
    return chosen, remainder


# ---------------------------------------------------------------------------
# Active-learning node kinds
# ---------------------------------------------------------------------------


class SyntheticGenerator(Node):
    """Emit ``batch_size`` candidates per iteration and learn from feedback.

    Sampling is Gaussian around a centre that moves toward the mean of the
    top 10 % scored features of each feedback batch. With ``iterations``
    batches sent and all feedback received, the node completes.
    """

    looped = True
    feedback = Input(CANDIDATES, optional=True)
    out = Output(CANDIDATES)
    seed = Parameter("int", default=0)
    batch_size = Parameter("int", default=512)
    iterations = Parameter("int", default=10)
    dim = Parameter("int", default=8)
    spread = Parameter("float", default=0.6)
    learning_rate = Parameter("float", default=0.7)
    latency = Parameter("float", default=0.2)

    def setup(self) -> None:
        self._rng = np.random.default_rng(self.seed.value)
        self._center = np.zeros(self.dim.value)
        self._iteration = 0
        self._next_id = 0
        self.info.update(batch_means=[], best_oracle=[], mean_acquired=[], returned=[])

    def _learn(self, batch: list[Candidate]) -> None:
        oracle = [c.score for c in batch if c.score_source == "oracle"]
        best_before = self.info["best_oracle"][-1] if self.info["best_oracle"] else -np.inf
        self.info["best_oracle"].append(float(max([best_before, *oracle])))
        self.info["mean_acquired"].append(float(np.mean(oracle)) if oracle else None)
        self.info["returned"].append(sorted(c.id for c in batch))
        scored = [c for c in batch if c.score is not None]
        if not scored:
            return
        top = sorted(scored, key=lambda c: (-c.score, c.id))[: max(1, len(scored) // 10)]
        target = np.mean([c.features for c in top], axis=0)
        self._center = self._center + self.learning_rate.value * (target - self._center)

    def run(self) -> None:
        if self._iteration > 0 and self.feedback.connected:
            self._learn(self.feedback.receive())
        if self._iteration >= self.iterations.value:
            self.finish()
            return
        t0 = time.monotonic()
        n, d = self.batch_size.value, self.dim.value
        feats = self._center + self.spread.value * self._rng.normal(size=(n, d))
        batch = [Candidate(self._next_id + i, feats[i]) for i in range(n)]
        self._next_id += n
        self.info["batch_means"].append(feats.mean(axis=0).tolist())
        _pause(self.latency.value, t0)
        self.out.send(batch)
        self._iteration += 1


def _pause(total: float, since: float) -> None:
    """Sleep so that ``total`` seconds have passed since ``since``."""
    remaining = total - (time.monotonic() - since)
    if remaining > 0:
        time.sleep(remaining)


class SurrogatePredict(Node):
    """Score candidates with the latest surrogate model.

    During the first ``n_pool`` iterations candidates pass through unscored
    (pooling). From the second iteration on, one model update is consumed
    per batch.
    """

    looped = True
    inp = Input(CANDIDATES)
    model = Input("surrogate-model", optional=True)
    out = Output(CANDIDATES)
    n_pool = Parameter("int", default=1)
    latency = Parameter("float", default=0.01)

    def setup(self) -> None:
        self._iteration = 0
        self._model: SurrogateModel | None = None
        self.info.update(predicted=0)

    def run(self) -> None:
        try:
            batch = self.inp.receive()
        except ChannelClosedAndEmpty:
            self.finish()
            return
        t0 = time.monotonic()
        if self._iteration > 0 and self.model.connected:
            self._model = self.model.receive()
        if self._iteration >= self.n_pool.value:
            if self._model is None:
                raise UntrainedModel("no surrogate model available after pooling")
            preds = self._model.predict(np.stack([c.features for c in batch]))
            batch = [c.scored(p, "surrogate") for c, p in zip(batch, preds)]
            self.info["predicted"] += len(batch)
        _pause(self.latency.value, t0)
        self.out.send(batch)
        self._iteration += 1


class AcquireSubset(Node):
    """Send ``k`` candidates to the oracle and the rest straight to the join.

    During pooling every candidate is acquired.
    """

    looped = True
    inp = Input(CANDIDATES)
    acquired = Output(CANDIDATES)
    remainder = Output(CANDIDATES)
    k = Parameter("int", default=128)
    strategy = Parameter("str", default="greedy")
    epsilon = Parameter("float", default=0.1)
    seed = Parameter("int", default=0)
    n_pool = Parameter("int", default=1)

    def setup(self) -> None:
        self._iteration = 0

    def run(self) -> None:
        batch = self.inp.receive()
        if self._iteration < self.n_pool.value:
            chosen, rest = list(batch), []
        else:
            if self.k.value > len(batch):
                raise FatalNodeError(f"cannot acquire {self.k.value} of {len(batch)} candidates")
            rng = np.random.default_rng([self.seed.value, self._iteration])
            chosen, rest = acquire_subset(batch, self.k.value, self.strategy.value, epsilon=self.epsilon.value, rng=rng)
        self._iteration += 1
        self.acquired.send(chosen)
        self.remainder.send(rest)


class OracleScore(Node):
    """Analytic oracle ``-||x - c||`` with ``latency_per_item`` seconds per item."""

    looped = True
    inp = Input(CANDIDATES)
    out = Output(CANDIDATES)
    seed = Parameter("int", default=0)
    dim = Parameter("int", default=8)
    latency_per_item = Parameter("float", default=0.002)

    def setup(self) -> None:
        self._optimum = hidden_optimum(self.seed.value, self.dim.value)
        self.info.update(scored=0)

    def run(self) -> None:
        batch = self.inp.receive()
        t0 = time.monotonic()
        if batch:
            scores = oracle_score(np.stack([c.features for c in batch]), self._optimum)
            batch = [c.scored(s, "oracle") for c, s in zip(batch, scores)]
        self.info["scored"] += len(batch)
        _pause(self.latency_per_item.value * len(batch), t0)
        self.out.send(batch)


class SurrogateTrain(Node):
    """Extend the training set with oracle scores and publish the model."""

    looped = True
    inp = Input(CANDIDATES)
    model = Output("surrogate-model")
    done = Output("int")
    k_neighbors = Parameter("int", default=5)
    latency = Parameter("float", default=0.15)

    def setup(self) -> None:
        self._model = SurrogateModel(self.k_neighbors.value)
        self._round = 0
        self.info.update(training_size=[])

    def run(self) -> None:
        batch = self.inp.receive()
        t0 = time.monotonic()
        fresh = [c for c in batch if c.score_source == "oracle"]
        self._model.add([c.features for c in fresh], [c.score for c in fresh])
        self.info["training_size"].append(len(self._model))
        _pause(self.latency.value, t0)
        snapshot = SurrogateModel(self._model.k)
        snapshot.add(self._model._x, self._model._y)
        for port, value in ((self.model, snapshot), (self.done, self._round)):
            try:
                port.send(value)
            except ChannelClosed:
                pass  # consumer finished; the final model is not needed
        self._round += 1


class ScoreJoin(Node):
    """Merge oracle-scored and surrogate-scored parts of one batch, by id."""

    looped = True
    oracle = Input(CANDIDATES)
    surrogate = Input(CANDIDATES)
    out = Output(CANDIDATES)

    def setup(self) -> None:
        self.info.update(batch_sizes=[])

    def run(self) -> None:
        scored = list(self.oracle.receive()) + list(self.surrogate.receive())
        ids = [c.id for c in scored]
        if len(set(ids)) != len(ids):
            raise FatalNodeError("candidate scored twice in one batch")
        self.info["batch_sizes"].append(len(scored))
        self.out.send(sorted(scored, key=lambda c: c.id))


class SequentialGate(Node):
    """Hold each feedback batch until the matching retraining has finished."""

    looped = True
    feedback = Input(CANDIDATES)
    trained = Input("int")
    out = Output(CANDIDATES)

    def run(self) -> None:
        batch = self.feedback.receive()
        self.trained.receive()
        self.out.send(batch)


@dataclass
class ALConfig:
    """Shape and latencies of the active-learning demo (seconds)."""

    iterations: int = 10
    batch_size: int = 512
    acquired: int = 128
    n_pool: int = 1
    dim: int = 8
    seed: int = 0
    strategy: str = "greedy"
    epsilon: float = 0.1
    k_neighbors: int = 5
    generation_latency: float = 0.2
    predict_latency: float = 0.01
    oracle_latency: float = 0.002
    train_latency: float = 0.15

    @classmethod
    def coerce(cls, config: "ALConfig | dict[str, Any] | None") -> "ALConfig":
        if config is None:
            return cls()
        if isinstance(config, dict):
            return cls(**config)
        return config


def assemble_active_learning_workflow(config: ALConfig | dict | None = None, variant: str = "parallel") -> Workflow:
    """Generator -> surrogate -> acquisition -> oracle, with scores fed back.

    ``variant="sequential"`` adds a gate so the generator waits for
    retraining before producing the next batch; ``"parallel"`` lets
    retraining overlap generation.
    """
    cfg = ALConfig.coerce(config)
    if variant not in ("parallel", "sequential"):
        raise ValueError("variant must be 'parallel' or 'sequential'")
    wf = Workflow(f"active_learning_{variant}", doc="Synthetic active-learning loop")
    gen = wf.add(
        SyntheticGenerator(
            "generator",
            seed=cfg.seed,
            batch_size=cfg.batch_size,
            iterations=cfg.iterations,
            dim=cfg.dim,
            latency=cfg.generation_latency,
        )
    )
    predict = wf.add(SurrogatePredict("predict", n_pool=cfg.n_pool, latency=cfg.predict_latency))
    acquire = wf.add(
        AcquireSubset(
            "acquire",
            k=cfg.acquired,
            strategy=cfg.strategy,
            epsilon=cfg.epsilon,
            seed=cfg.seed,
            n_pool=cfg.n_pool,
        )
    )
    oracle = wf.add(OracleScore("oracle", seed=cfg.seed, dim=cfg.dim, latency_per_item=cfg.oracle_latency))
    copy = wf.add(Copy("copy", n_outputs=2, dtype=CANDIDATES))
    join = wf.add(ScoreJoin("join"))
    train = wf.add(SurrogateTrain("train", k_neighbors=cfg.k_neighbors, latency=cfg.train_latency))
    pairs = [
        (gen.out, predict.inp),
        (predict.out, acquire.inp),
        (acquire.acquired, oracle.inp),
        (acquire.remainder, join.surrogate),
        (oracle.out, copy.inp),
        (copy.out1, join.oracle),
        (copy.out2, train.inp),
        (train.model, predict.model),
    ]
    if variant == "sequential":
        gate = wf.add(SequentialGate("gate"))
        pairs += [(join.out, gate.feedback), (train.done, gate.trained), (gate.out, gen.feedback)]
    else:
        pairs.append((join.out, gen.feedback))
    wf.connect_all(pairs)
    wf.map_parameters("iterations", ["generator.iterations"])
    wf.map_parameters("batch_size", ["generator.batch_size"])
    wf.map_parameters("acquired", ["acquire.k"])
    wf.map_parameters("n_pool", ["predict.n_pool", "acquire.n_pool"])
    wf.map_parameters("strategy", ["acquire.strategy"])
    return wf


def expected_wall_times(config: ALConfig | dict | None = None) -> tuple[float, float]:
    """Analytic (sequential, parallel) wall times in seconds, ignoring overhead.

    Sequential: every stage, retraining included, is on the critical path.
    Parallel: retraining overlaps the next generation step, so it only
    counts where it is longer than generation, plus once at the very end.
    """
    cfg = ALConfig.coerce(config)
    n_pool = min(cfg.n_pool, cfg.iterations)
    oracle = [
        cfg.oracle_latency * (cfg.batch_size if i < n_pool else cfg.acquired) for i in range(cfg.iterations)
    ]
    front = [cfg.generation_latency + cfg.predict_latency + o for o in oracle]
    sequential = sum(front) + cfg.iterations * cfg.train_latency
    overhang = max(0.0, cfg.train_latency - cfg.generation_latency)
    parallel = sum(front) + (cfg.iterations - 1) * overhang + cfg.train_latency
    return sequential, parallel


def run_active_learning(
    config: ALConfig | dict | None = None, variant: str = "parallel", run_config: RunConfig | None = None
) -> ExecutionReport:
    wf = assemble_active_learning_workflow(config, variant)
    return wf.execute(run_config or RunConfig())


def run_timing_experiment(
    config: ALConfig | dict | None = None, run_config: RunConfig | None = None, echo: bool = True
) -> dict[str, float]:
    """Run both variants and report wall times.

    Prints ``sequential_ms=... parallel_ms=... speedup=...`` followed by the
    analytic and measured parallel/sequential ratios.
    """
    cfg = ALConfig.coerce(config)
    walls = {}
    for variant in ("sequential", "parallel"):
        t0 = time.monotonic()
        report = run_active_learning(cfg, variant, run_config)
        walls[variant] = time.monotonic() - t0
        if not report.success:
            raise RuntimeError(f"{variant} run ended with {report.outcome.value}: {report.error}")
    seq_expected, par_expected = expected_wall_times(cfg)
    result = {
        "sequential_ms": walls["sequential"] * 1000,
        "parallel_ms": walls["parallel"] * 1000,
        "speedup": walls["sequential"] / walls["parallel"],
        "ratio": walls["parallel"] / walls["sequential"],
        "expected_ratio": par_expected / seq_expected,
    }
    if echo:
        print(
            f"sequential_ms={result['sequential_ms']:.0f} parallel_ms={result['parallel_ms']:.0f} "
            f"speedup={result['speedup']:.3f}"
        )
        print(f"expected_ratio={result['expected_ratio']:.3f} measured_ratio={result['ratio']:.3f}")
    return result


# ---------------------------------------------------------------------------
# Conditional precision
# ---------------------------------------------------------------------------


class Unbatch(Node):
    """Forward each element of a received list as its own item."""

    looped = True
    inp = Input(CANDIDATES)
    out = Output("candidate")

    def run(self) -> None:
        for item in self.inp.receive():
            self.out.send(item)


class Scorer(Node):
    """Synthetic scorer: noisy oracle score plus deviation from a reference.

    The same kind serves as a fast, noisy scorer and as a slow, precise one;
    only the parameters differ.
    """

    looped = True
    inp = Input("candidate")
    out = Output("candidate")
    seed = Parameter("int", default=0)
    dim = Parameter("int", default=8)
    noise = Parameter("float", default=0.5)
    latency = Parameter("float", default=0.001)
    reference_seed = Parameter("int", default=1)

    def setup(self) -> None:
        self._optimum = hidden_optimum(self.seed.value, self.dim.value)
        self._reference = hidden_optimum(self.reference_seed.value, self.dim.value, distance=1.0)
        self.info.update(scored=0)

    def run(self) -> None:
        item: Candidate = self.inp.receive()
        t0 = time.monotonic()
        rng = np.random.default_rng([self.seed.value, item.id, int(self.noise.value * 1e6)])
        score = float(oracle_score(item.features, self._optimum)[0]) + self.noise.value * rng.normal()
        deviation = float(np.linalg.norm(item.features - self._reference))
        self.info["scored"] += 1
        _pause(self.latency.value, t0)
        self.out.send(dataclasses.replace(item.scored(score, "oracle"), deviation=deviation))


def assemble_conditional_precision_workflow(
    batch_size: int = 64,
    threshold: float = 2.0,
    *,
    seed: int = 0,
    dim: int = 8,
    fast_latency: float = 0.001,
    precise_latency: float = 0.01,
) -> Workflow:
    """Generator -> fast scorer -> router; high-deviation items are rescored."""
    wf = Workflow("conditional_precision", doc="Rescore high-deviation items with a precise scorer")
    gen = wf.add(
        SyntheticGenerator("generator", seed=seed, batch_size=batch_size, iterations=1, dim=dim, latency=0.0)
    )
    split = wf.add(Unbatch("split"))
    fast = wf.add(Scorer("fast_score", seed=seed, dim=dim, noise=0.5, latency=fast_latency))
    router = wf.add(
        ConditionalRouter("router", predicate="gt", threshold=float(threshold), field="deviation", dtype="candidate")
    )
    precise = wf.add(Scorer("precise_score", seed=seed, dim=dim, noise=0.05, latency=precise_latency))
    merge = wf.add(Merge("merge", n_inputs=2, dtype="candidate"))
    log = wf.add(LogResult("result", dtype="candidate"))
    wf.connect_all(
        (gen.out, split.inp),
        (split.out, fast.inp),
        (fast.out, router.inp),
        (router.out_true, precise.inp),
        (precise.out, merge.inp1),
        (router.out_false, merge.inp2),
        (merge.out, log.inp),
    )
    wf.map_parameters("threshold", ["router.threshold"])
    return wf


def batch_deviations(batch_size: int = 64, *, seed: int = 0, dim: int = 8) -> np.ndarray:
    """Deviations the fast scorer will report for the generator's first batch."""
    rng = np.random.default_rng(seed)
    feats = np.zeros(dim) + SyntheticGenerator._param_decls["spread"].default * rng.normal(size=(batch_size, dim))
    reference = hidden_optimum(1, dim, distance=1.0)
    return np.linalg.norm(feats - reference, axis=1)


# ---------------------------------------------------------------------------
# Docking-style stand-ins
# ---------------------------------------------------------------------------


def _digest_vector(text: str, dim: int = 3) -> list[float]:
    digest = hashlib.sha256(text.encode()).digest()
    return [b / 255.0 * 20.0 - 10.0 for b in digest[:dim]]


class EmbedSmiles(Node):
    """Turn strings into pseudo-molecules with deterministic 3-D coordinates.

    Strings come from ``inp`` or, when it is unconnected, from ``smiles``.
    """

    inp = Input("list<str>", optional=True)
    out = Output("list<molecule>")
    smiles = Parameter("list<str>", default=None)

    def run(self) -> None:
        smiles = self.inp.receive() if self.inp.connected else (self.smiles.value or [])
        self.out.send([{"smiles": s, "position": _digest_vector(s)} for s in smiles])


class SyntheticDock(Node):
    """Score pseudo-molecules against a receptor file and a search centre."""

    inp = Input("list<molecule>")
    out = Output("list<float>")
    receptor = Parameter("path")
    search_center = Parameter("list<float>", default=[0.0, 0.0, 0.0])

    def run(self) -> None:
        receptor = Path(self.receptor.value)
        if not receptor.is_file():
            raise FatalNodeError(f"receptor file {receptor} not found")
        offset = np.asarray(_digest_vector(receptor.read_text()), dtype=float) * 0.1
        center = np.asarray(self.search_center.value, dtype=float) + offset
        mols = self.inp.receive()
        scores = [-float(np.linalg.norm(np.asarray(m["position"]) - center)) for m in mols]
        self.logger.info("docked %d molecules", len(scores))
        self.out.send(scores)


def assemble_docking_workflow(smiles: Sequence[str] = ("Nc1nc(F)nc(c12)n(CCCC)c(n2)Cc3cc(OC)ccc3OC",)) -> Workflow:
    """Linear three-node workflow: embed, dock, log. ``receptor`` stays unset."""
    wf = Workflow("docking")
    embed = wf.add(EmbedSmiles("embed", smiles=list(smiles)))
    dock = wf.add(SyntheticDock("dock"))
    result = wf.add(LogResult("result", dtype="list<float>"))
    wf.connect_all((embed.out, dock.inp), (dock.out, result.inp))
    wf.map_parameters("receptor", ["dock.receptor"])
    return wf


class Increment(Node):
    """Add ``step`` to every received integer."""

    looped = True
    inp = Input("int")
    out = Output("int")
    step = Parameter("int", default=1)

    def run(self) -> None:
        value = self.inp.receive()
        self.info["calls"] = self.info.get("calls", 0) + 1
        self.out.send(value + self.step.value)
