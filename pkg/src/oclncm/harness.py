"""End-to-end online continual-learning protocol.

Tasks run strictly in order; each task's training stream is consumed in one
pass in batches, with class means updated from raw embeddings before the SGD
step of each batch. After every task the current model is scored on the test
data of all classes seen so far; Avg is the mean of those per-step accuracies
and Last is the final one.

A run is fully determined by its RunConfig: identical configs produce
byte-identical metrics JSON. The data provider counts every training-record
fetch so the single-pass constraint is auditable per run.
"""

from __future__ import annotations

import dataclasses
import json
import random
from dataclasses import dataclass

import numpy as np

from oclncm import classify, kernels, store
from oclncm.baselines import ExemplarBuffer, er_step, finetune_step
from oclncm.head import HeadParams
from oclncm.means import ClassMeanTable

METHODS = ("candidate_ncm", "full_ncm", "finetune", "er", "nme_buffer", "upper_bound")
EXEMPLAR_FREE_METHODS = ("candidate_ncm", "full_ncm")
BUFFER_METHODS = ("er", "nme_buffer")


@dataclass
class RunConfig:
    manifest: str
    method: str = "candidate_ncm"
    step_size: int = 5
    learning_rate: float = 0.1
    batch_size: int = 16
    epochs: int = 1
    exemplar_budget: int = 0
    class_seed: int = 0
    shuffle_seed: int = 0
    init_seed: int = 0
    buffer_seed: int = 0
    softmax_scope: str = "all"
    bias: bool = True
    replay_ratio: float = 1.0

    def validate(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if self.batch_size <= 0:
            raise ValueError("batch_size must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.exemplar_budget < 0:
            raise ValueError("exemplar_budget must be >= 0")
        if self.method in EXEMPLAR_FREE_METHODS and self.exemplar_budget != 0:
            raise ValueError("exemplar-free method cannot take a buffer")
        if self.method == "nme_buffer" and self.exemplar_budget < 1:
            raise ValueError("nme_buffer needs exemplar_budget >= 1")
        if self.epochs != 1 and self.method != "upper_bound":
            raise ValueError("online methods train exactly 1 epoch")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.softmax_scope not in ("all", "task"):
            raise ValueError("softmax_scope must be 'all' or 'task'")
        if self.replay_ratio < 0:
            raise ValueError("replay_ratio must be >= 0")
        return self

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, raw):
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "manifest" not in raw:
            raise ValueError("config requires a 'manifest' path")
        return cls(**raw).validate()

    @classmethod
    def from_json_file(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        return cls.from_dict(raw)


@dataclass
class RunMetrics:
    per_step_top1: list
    avg: float
    last: float
    per_class: dict  # class id -> list aligned with steps (None before seen)

    def to_json(self):
        payload = {
            "per_step": self.per_step_top1,
            "avg": self.avg,
            "last": self.last,
            "per_class": {str(c): self.per_class[c] for c in sorted(self.per_class)},
        }
        return json.dumps(payload, sort_keys=True)

    def to_csv(self):
        lines = ["step,accuracy"]
        for i, acc in enumerate(self.per_step_top1, start=1):
            lines.append(f"{i},{acc!r}")
        return "\n".join(lines) + "\n"


class StreamAuditor:
    """Environment-side data provider. Serves train records by schedule index
    while counting each fetch, so a run can prove every training record was
    read exactly once. Evaluation fetches are not counted against the audit.
    """

    def __init__(self, vectors, labels):
        self.vectors = vectors
        self.labels = labels
        self.train_reads = np.zeros(len(labels), dtype=np.int64)

    def fetch_train(self, indices):
        idx = np.asarray(indices, dtype=np.int64)
        self.train_reads[idx] += 1
        return self.vectors[idx], self.labels[idx]

    def fetch_eval(self, indices):
        idx = np.asarray(indices, dtype=np.int64)
        return self.vectors[idx], self.labels[idx]


@dataclass
class ExperimentState:
    config: RunConfig
    manifest: store.DatasetManifest
    schedule: store.TaskSchedule
    auditor: StreamAuditor
    head: HeadParams
    means: ClassMeanTable
    buffer: ExemplarBuffer | None
    replay_rng: random.Random
    trained_tasks: int = 0


def init_state(config, manifest=None):
    config.validate()
    if manifest is None:
        manifest = store.load_manifest(config.manifest)
    schedule = store.build_task_schedule(
        manifest, config.step_size, config.class_seed, config.shuffle_seed
    )
    vectors, labels = store.read_embedding_arrays(manifest.embedding_path())
    head = HeadParams(
        dim=manifest.dim,
        bias=config.bias,
        dtype=np.float32,
        softmax_scope=config.softmax_scope,
    )
    buffer = None
    if config.method in BUFFER_METHODS:
        buffer = ExemplarBuffer(config.exemplar_budget, seed=config.buffer_seed)
    return ExperimentState(
        config=config,
        manifest=manifest,
        schedule=schedule,
        auditor=StreamAuditor(vectors, labels),
        head=head,
        means=ClassMeanTable(dim=manifest.dim),
        buffer=buffer,
        replay_rng=random.Random(f"replay-{config.buffer_seed}"),
    )


def _batched(indices, batch_size):
    for start in range(0, len(indices), batch_size):
        yield indices[start : start + batch_size]


def run_task(state, task_index):
    """Train on one task's stream: expand the head, then consume the stream
    once in batches (final partial batch included), per-record mean updates
    before each batch's SGD step."""
    if task_index != state.trained_tasks:
        raise RuntimeError(
            f"out-of-order task: expected {state.trained_tasks}, got {task_index}"
        )
    cfg = state.config
    schedule = state.schedule
    classes = schedule.task_classes(task_index)
    class_set = set(classes)
    state.head.expand(task_index, classes, cfg.init_seed)
    if cfg.method in ("finetune", "er", "upper_bound"):
        state.head.set_all_trainable()

    if cfg.method == "upper_bound":
        _run_joint_training(state, task_index)
        state.trained_tasks += 1
        return

    for batch_idx in _batched(schedule.train_indices[task_index], cfg.batch_size):
        inputs, labels = state.auditor.fetch_train(batch_idx)
        foreign = [int(c) for c in labels if int(c) not in class_set]
        if foreign:
            raise RuntimeError(f"foreign-class record (class {foreign[0]}) in task {task_index} stream")
        if cfg.method in EXEMPLAR_FREE_METHODS:
            state.means.bulk_update(inputs, labels)
        if cfg.method == "nme_buffer":
            for i in range(inputs.shape[0]):
                state.buffer.reservoir_update(inputs[i], labels[i])
        if cfg.method == "er":
            er_step(
                state.head,
                inputs,
                labels,
                cfg.learning_rate,
                state.buffer,
                state.replay_rng,
                replay_ratio=cfg.replay_ratio,
            )
        elif cfg.method == "finetune":
            finetune_step(state.head, inputs, labels, cfg.learning_rate)
        else:
            _, gw, gb = state.head.ce_loss_and_grad(inputs, labels)
            state.head.sgd_step(gw, gb, cfg.learning_rate)
    state.trained_tasks += 1


def _run_joint_training(state, task_index):
    """Offline reference: multi-epoch SGD over the union of all seen tasks'
    training data. Deliberately violates the single-pass rule; the run
    manifest flags it."""
    cfg = state.config
    all_idx = np.concatenate(
        [np.asarray(state.schedule.train_indices[t], dtype=np.int64) for t in range(task_index + 1)]
    )
    for epoch in range(cfg.epochs):
        order = np.random.default_rng([cfg.shuffle_seed, task_index, epoch]).permutation(
            all_idx.size
        )
        shuffled = all_idx[order]
        for batch_idx in _batched(shuffled, cfg.batch_size):
            inputs, labels = state.auditor.fetch_train(batch_idx)
            _, gw, gb = state.head.ce_loss_and_grad(inputs, labels)
            state.head.sgd_step(gw, gb, cfg.learning_rate)


def evaluate(state, upto_task):
    """Top-1 accuracy on the test data of every class seen so far, plus a
    per-class breakdown, under the configured prediction rule."""
    if state.trained_tasks == 0:
        raise RuntimeError("evaluate requires at least one trained task")
    schedule = state.schedule
    if upto_task >= state.trained_tasks:
        raise RuntimeError(
            f"cannot evaluate step {upto_task}: only {state.trained_tasks} tasks trained"
        )
    test_idx = [i for t in range(upto_task + 1) for i in schedule.test_indices[t]]
    inputs, truth = state.auditor.fetch_eval(test_idx)
    preds = _predict_batch(state, inputs, upto_task)
    correct = preds == truth
    accuracy = float(correct.sum() / correct.size)
    per_class = {}
    for c in schedule.seen_classes(upto_task):
        rows = truth == c
        per_class[int(c)] = float(correct[rows].sum() / rows.sum()) if rows.any() else None
    return accuracy, per_class


def _predict_batch(state, inputs, upto_task):
    cfg = state.config
    method = cfg.method
    seen = state.schedule.seen_classes(upto_task)
    k_seen = len(seen)
    if method in ("finetune", "er", "upper_bound"):
        logits = state.head.logits(inputs)[:, :k_seen]
        return classify.argmax_predict_batch(logits, state.head.row_to_class[:k_seen])
    if method == "nme_buffer":
        means = state.buffer.class_means() if state.buffer and len(state.buffer) else None
        if not means:
            raise RuntimeError("nme_buffer has an empty exemplar buffer at evaluation")
        labels = sorted(means)
        stacked = np.ascontiguousarray(np.stack([means[c] for c in labels]))
        sqd = kernels.sq_dist_chunk(
            np.ascontiguousarray(inputs, dtype=np.float64), stacked
        )
        return classify.full_ncm_predict_batch(sqd, labels)
    mean_classes = sorted(int(c) for c in seen)
    for c in mean_classes:
        if c not in state.means:
            raise RuntimeError(
                f"class {c} was scheduled but has no training mean (count 0)"
            )
    _, sqd = state.means.sq_distance_matrix(inputs, labels=mean_classes)
    if method == "full_ncm":
        return classify.full_ncm_predict_batch(sqd, mean_classes)
    logits = state.head.logits(inputs)[:, :k_seen]
    candidates = classify.select_candidates_batch(logits, seen, cfg.step_size)
    return classify.ncm_predict_batch(sqd, mean_classes, candidates)


def run_experiment(config, manifest=None):
    """Run the full protocol for one config. Returns (RunMetrics, run manifest
    dict); the manifest echoes the config and records the audit results."""
    import oclncm

    state = init_state(config, manifest=manifest)
    per_step = []
    per_class_steps = []
    for t in range(state.schedule.num_tasks):
        run_task(state, t)
        acc, per_class = evaluate(state, t)
        per_step.append(acc)
        per_class_steps.append(per_class)
    all_seen = [int(c) for c in state.schedule.class_order]
    per_class = {
        c: [step.get(c) for step in per_class_steps] for c in all_seen
    }
    metrics = RunMetrics(
        per_step_top1=per_step,
        avg=float(np.mean(per_step)),
        last=per_step[-1],
        per_class=per_class,
    )
    train_mask = np.zeros(len(state.auditor.labels), dtype=bool)
    for t in range(state.schedule.num_tasks):
        train_mask[state.schedule.train_indices[t]] = True
    train_reads = state.auditor.train_reads[train_mask]
    run_manifest = {
        "config": config.to_dict(),
        "package_version": oclncm.__version__,
        "kernel_backend": kernels.BACKEND,
        "num_tasks": state.schedule.num_tasks,
        "classes": len(all_seen),
        "exemplar_free": config.method in EXEMPLAR_FREE_METHODS,
        "buffer_capacity": state.buffer.capacity if state.buffer else 0,
        "buffer_records_stored": len(state.buffer) if state.buffer else 0,
        "single_pass_relaxed": config.method == "upper_bound",
        "train_records": int(train_mask.sum()),
        "train_reads_min": int(train_reads.min()) if train_reads.size else 0,
        "train_reads_max": int(train_reads.max()) if train_reads.size else 0,
        "single_pass": bool((train_reads == 1).all()),
    }
    return metrics, run_manifest
