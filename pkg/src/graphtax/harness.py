"""Training loops and the cross-validation / repetition protocol.

A protocol run is planned as a list of independent :class:`Job` objects (one
per fold or repetition), executed serially or on a process pool, and then
aggregated.  Each job derives all of its randomness from its own seed and
runs with BLAS limited to one thread, so results do not depend on the worker
count.
"""

from __future__ import annotations

import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from . import nn
from .errors import DivergenceError, EvaluationError, InputError, NumericError
from .graph import Dataset, TaskKind
from .metrics import auroc
from .models import GNNModel, GraphBatch, ModelConfig, assemble
from .splits import stratified_holdout, stratified_kfold

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    patience: int = 30
    batch_size: int = 32
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    folds: int = 10
    repetitions: int = 10
    seed: int = 0
    val_fraction: float = 0.1
    dtype: str = "float32"
    max_divergence: float = 0.2

    def __post_init__(self):
        if self.folds < 2:
            raise InputError("folds must be >= 2")
        if self.repetitions < 1:
            raise InputError("repetitions must be >= 1")
        if self.epochs < 1 or self.batch_size < 1 or self.patience < 1:
            raise InputError("epochs, batch_size and patience must be positive")

    def with_overrides(self, **kw) -> "TrainConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Job:
    dataset: Dataset
    model_config: ModelConfig
    train_config: TrainConfig
    index: int
    seed: int
    train_idx: np.ndarray
    val_idx: np.ndarray
    test_idx: np.ndarray
    tag: str = ""


@dataclass
class JobOutcome:
    index: int
    seed: int
    auroc: Optional[float]
    epochs_ran: int
    best_val: Optional[float]
    error: Optional[str] = None
    tag: str = ""


@dataclass
class EvalResult:
    mean: float
    std: float
    scores: list[float]
    job_ids: list[int]
    epochs: list[int]
    seeds: list[int]
    wall_time: float
    mode: str
    failed: dict[int, str] = field(default_factory=dict)

    def to_dict(self, with_time: bool = True) -> dict:
        d = asdict(self)
        d["failed"] = {str(k): v for k, v in self.failed.items()}
        if not with_time:
            d.pop("wall_time")
        return d

    def records(self, dataset: str, model: str, perturbation: str) -> list[dict]:
        out = [
            {"dataset": dataset, "model": model, "perturbation": perturbation,
             "fold_or_rep": j, "auroc": s, "epochs_ran": e, "seed": sd}
            for j, s, e, sd in zip(self.job_ids, self.scores, self.epochs, self.seeds)
        ]
        for j, msg in sorted(self.failed.items()):
            out.append({"dataset": dataset, "model": model, "perturbation": perturbation,
                        "fold_or_rep": j, "auroc": None, "epochs_ran": None, "seed": None, "error": msg})
        return out


def derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def _stratify_labels(dataset: Dataset) -> np.ndarray:
    if dataset.task is TaskKind.NODE_TRANSDUCTIVE:
        return np.asarray(dataset.graphs[0].node_labels)
    if dataset.task is TaskKind.GRAPH:
        return np.array([g.graph_label for g in dataset.graphs])
    # inductive node tasks have no per-graph label to balance on
    return np.zeros(len(dataset.graphs), dtype=np.int64)


def plan_jobs(dataset: Dataset, model_config: ModelConfig, train_config: TrainConfig,
              tag: str = "") -> list[Job]:
    """Folds of stratified CV, or repetitions over the fixed split when one exists."""
    tc = train_config
    if dataset.split is not None:
        sp = dataset.split
        idx = [np.array(sorted(s)) for s in (sp.train, sp.val, sp.test)]
        return [Job(dataset, model_config, tc, r, tc.seed + r, *idx, tag=tag) for r in range(tc.repetitions)]
    labels = _stratify_labels(dataset)
    folds = stratified_kfold(labels, tc.folds, tc.seed)
    jobs = []
    for f, test in enumerate(folds):
        rest = np.sort(np.concatenate([folds[j] for j in range(len(folds)) if j != f]))
        seed = derive_seed(tc.seed, f)
        keep, hold = stratified_holdout(labels[rest], tc.val_fraction, seed)
        jobs.append(Job(dataset, model_config, tc, f, seed, rest[keep], np.sort(rest[hold]), test, tag=tag))
    return jobs


class _Trainer:
    """Owns one model and the data views of a single job."""

    def __init__(self, job: Job):
        self.job = job
        ds, tc = job.dataset, job.train_config
        self.dtype = np.dtype(tc.dtype)
        self.transductive = ds.task is TaskKind.NODE_TRANSDUCTIVE
        ss = np.random.SeedSequence(job.seed)
        init_seq, data_seq = ss.spawn(2)
        self.rng = np.random.default_rng(data_seq)
        self.model: GNNModel = assemble(
            job.model_config, max(ds.feature_dim, 1), ds.num_classes, ds.task,
            seed=int(init_seq.generate_state(1)[0]), dtype=self.dtype,
        )
        if ds.feature_dim < 1:
            raise InputError("datasets need at least one feature column")
        self.opt = nn.AdamState(lr=tc.lr, beta1=tc.beta1, beta2=tc.beta2, eps=tc.adam_eps)
        if self.transductive:
            self.full = GraphBatch(ds.graphs, self.dtype)
            self.node_labels = np.asarray(ds.graphs[0].node_labels)

    def labels_of(self, graphs) -> np.ndarray:
        if self.job.dataset.task is TaskKind.GRAPH:
            return np.array([g.graph_label for g in graphs], dtype=np.int64)
        return np.concatenate([g.node_labels for g in graphs]) if graphs else np.zeros(0, np.int64)

    def train_epoch(self, train_idx: np.ndarray) -> float:
        m = self.model
        if self.transductive:
            logits = m.forward(self.full, train=True, rng=self.rng)
            loss = nn.cross_entropy(nn.gather_rows(logits, train_idx), self.node_labels[train_idx])
            loss.backward()
            nn.adam_step(m.params, self.opt)
            return loss.item()
        graphs = self.job.dataset.graphs
        order = self.rng.permutation(train_idx)
        bs = self.job.train_config.batch_size
        total = 0.0
        for start in range(0, len(order), bs):
            chunk = [graphs[i] for i in order[start:start + bs]]
            batch = GraphBatch(chunk, self.dtype)
            if batch.n == 0:
                continue
            loss = nn.cross_entropy(m.forward(batch, train=True, rng=self.rng), self.labels_of(chunk))
            loss.backward()
            nn.adam_step(m.params, self.opt)
            total += loss.item() * len(chunk)
        return total / max(len(order), 1)

    def predict(self, idx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Class probabilities and true labels for graphs (or nodes) ``idx``."""
        if self.transductive:
            logits = self.model.forward(self.full, train=False).data[idx]
            return nn.softmax_np(logits.astype(np.float64)), self.node_labels[idx]
        graphs = self.job.dataset.graphs
        probs, labels = [], []
        for start in range(0, len(idx), 256):
            chunk = [graphs[i] for i in idx[start:start + 256]]
            logits = self.model.forward(GraphBatch(chunk, self.dtype), train=False).data
            probs.append(nn.softmax_np(logits.astype(np.float64)))
            labels.append(self.labels_of(chunk))
        return np.concatenate(probs), np.concatenate(labels)

    def score(self, idx: np.ndarray, use_auroc: bool) -> float:
        probs, labels = self.predict(idx)
        if use_auroc:
            return auroc(probs, labels)
        # validation set with a single class: rank epochs by log-likelihood instead
        return float(np.log(np.clip(probs[np.arange(len(labels)), labels], 1e-12, None)).mean())


def train_job(job: Job) -> JobOutcome:
    """Train with early stopping on validation AUROC, restore the best epoch, score the test set."""
    tc = job.train_config
    tr = _Trainer(job)
    _, val_labels = tr.predict(job.val_idx)
    use_auroc = len(np.unique(val_labels)) >= 2
    best, best_state, since = -np.inf, tr.model.state(), 0
    epoch = 0
    for epoch in range(1, tc.epochs + 1):
        loss = tr.train_epoch(job.train_idx)
        if not np.isfinite(loss):
            raise NumericError(f"non-finite training loss at epoch {epoch}")
        val = tr.score(job.val_idx, use_auroc)
        if val > best:
            best, best_state, since = val, tr.model.state(), 0
        else:
            since += 1
            if since >= tc.patience:
                break
    tr.model.load_state(best_state)
    test = tr.score(job.test_idx, True)
    return JobOutcome(job.index, job.seed, test, epoch, float(best), tag=job.tag)


def run_job(job: Job) -> JobOutcome:
    with threadpool_limits(limits=1):
        try:
            return train_job(job)
        except (NumericError, EvaluationError) as exc:
            log.warning("job %s/%d failed: %s", job.tag, job.index, exc)
            return JobOutcome(job.index, job.seed, None, 0, None, error=str(exc), tag=job.tag)


def default_workers() -> int:
    env = os.environ.get("GRAPHTAX_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise InputError(f"GRAPHTAX_WORKERS must be an integer, got {env!r}") from None
    return 1


def execute(jobs: Sequence[Job], workers: Optional[int] = None) -> list[JobOutcome]:
    """Run jobs, preserving input order in the returned list."""
    workers = default_workers() if workers is None else workers
    if workers <= 1 or len(jobs) <= 1:
        return [run_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_job, jobs))


def aggregate(outcomes: Sequence[JobOutcome], mode: str, wall_time: float,
              max_divergence: float = 0.2) -> EvalResult:
    outcomes = sorted(outcomes, key=lambda o: o.index)
    ok = [o for o in outcomes if o.error is None]
    failed = {o.index: o.error for o in outcomes if o.error is not None}
    if not ok or len(failed) > max_divergence * len(outcomes):
        raise DivergenceError(f"{len(failed)} of {len(outcomes)} runs failed: {failed}")
    scores = [float(o.auroc) for o in ok]
    return EvalResult(
        mean=float(np.mean(scores)),
        std=float(np.std(scores)),
        scores=scores,
        job_ids=[o.index for o in ok],
        epochs=[o.epochs_ran for o in ok],
        seeds=[o.seed for o in ok],
        wall_time=wall_time,
        mode=mode,
        failed=failed,
    )


def run_protocol(dataset: Dataset, model_config: ModelConfig, train_config: TrainConfig = TrainConfig(),
                 workers: Optional[int] = None, log_path=None, perturbation: str = "identity") -> EvalResult:
    t0 = time.perf_counter()
    jobs = plan_jobs(dataset, model_config, train_config)
    outcomes = execute(jobs, workers)
    mode = "repetitions" if dataset.split is not None else "cv"
    result = aggregate(outcomes, mode, time.perf_counter() - t0, train_config.max_divergence)
    if log_path is not None:
        append_records(log_path, result.records(dataset.name, model_config.kind.value, perturbation))
    return result


def append_records(path, records: Sequence[dict]) -> None:
    with open(path, "a", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r, sort_keys=True) + "\n")
