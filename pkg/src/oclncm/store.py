"""Embedding files, dataset manifests, task schedules, and synthetic data.

Embedding file layout (little-endian):

    magic "OCLE" (4 bytes) | version u32 = 1 | dimension u32 | record count u64
    then per record: label i32, dimension x f32

The manifest is a UTF-8 JSON object with keys {"file", "dim", "num_classes",
"num_records", "split"} plus an optional "class_names" table. "split" is
either a per-record list of "train"/"test" strings or
{"train_per_class": t, "test_per_class": s} for files laid out class by
class with the train block first.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"OCLE"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIIQ")

_MAX_LABEL = 2**31 - 1


class EmbeddingFormatError(ValueError):
    """Raised when an embedding file violates the on-disk contract."""


@dataclass
class EmbeddingRecord:
    vector: np.ndarray  # float32, shape (F,)
    label: int


def _record_dtype(dim):
    return np.dtype([("label", "<i4"), ("vec", "<f4", (dim,))])


def write_embedding_file(records, path):
    """Write records to `path` in the binary embedding format.

    All records must share one dimension F >= 1 and carry labels that fit in
    a signed 32-bit integer. Read-back reproduces every record bit-for-bit.
    """
    records = list(records)
    if not records:
        raise ValueError("empty dataset")
    dim = int(np.asarray(records[0].vector).shape[0])
    if dim < 1:
        raise ValueError("embedding dimension must be >= 1")
    buf = np.empty(len(records), dtype=_record_dtype(dim))
    for i, rec in enumerate(records):
        vec = np.asarray(rec.vector, dtype=np.float32)
        if vec.ndim != 1 or vec.shape[0] != dim:
            raise ValueError(
                f"dimension mismatch: record {i} has dim {vec.size}, expected {dim}"
            )
        if not np.isfinite(vec).all():
            raise ValueError(f"non-finite value in record {i}")
        label = int(rec.label)
        if not 0 <= label <= _MAX_LABEL:
            raise ValueError(f"label {label} of record {i} does not fit in int32")
        buf[i]["label"] = label
        buf[i]["vec"] = vec
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, dim, len(records)))
        fh.write(buf.tobytes())


def _read_header(fh, path):
    head = fh.read(_HEADER.size)
    if len(head) < _HEADER.size:
        raise EmbeddingFormatError(f"{path}: file too short for header")
    magic, version, dim, count = _HEADER.unpack(head)
    if magic != MAGIC:
        raise EmbeddingFormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise EmbeddingFormatError(f"{path}: unsupported format version {version}")
    if dim < 1:
        raise EmbeddingFormatError(f"{path}: invalid dimension {dim}")
    return dim, count


def _check_body_size(fh, path, dim, count):
    record_size = _record_dtype(dim).itemsize
    body = os.fstat(fh.fileno()).st_size - _HEADER.size
    expected = count * record_size
    if body < expected:
        whole, partial = divmod(body, record_size)
        if partial:
            raise EmbeddingFormatError(
                f"{path}: truncated record at byte offset {_HEADER.size + whole * record_size}"
            )
        raise EmbeddingFormatError(f"{path}: truncated: expected {count} got {whole}")
    if body > expected:
        raise EmbeddingFormatError(
            f"{path}: {body - expected} trailing bytes after {count} records"
        )
    return record_size


def read_embedding_stream(path, chunk_records=1024):
    """Yield EmbeddingRecord in file order, holding at most `chunk_records`
    records in memory at a time.

    Rejects bad magic, truncation (with byte offset or record counts), and
    non-finite vector components (with the offending record index).
    """
    with open(path, "rb") as fh:
        dim, count = _read_header(fh, path)
        _check_body_size(fh, path, dim, count)
        dtype = _record_dtype(dim)
        produced = 0
        while produced < count:
            take = min(chunk_records, count - produced)
            raw = fh.read(take * dtype.itemsize)
            chunk = np.frombuffer(raw, dtype=dtype)
            finite = np.isfinite(chunk["vec"]).all(axis=1)
            if not finite.all():
                bad = produced + int(np.argmin(finite))
                raise EmbeddingFormatError(f"{path}: non-finite value in record {bad}")
            for i in range(take):
                yield EmbeddingRecord(vector=chunk["vec"][i].copy(), label=int(chunk["label"][i]))
            produced += take


def read_embedding_arrays(path):
    """Load a whole embedding file as (vectors (R, F) float32, labels (R,) int64).

    Bulk counterpart of read_embedding_stream with the same validation.
    """
    with open(path, "rb") as fh:
        dim, count = _read_header(fh, path)
        _check_body_size(fh, path, dim, count)
        data = np.frombuffer(fh.read(), dtype=_record_dtype(dim))
    vectors = np.ascontiguousarray(data["vec"])
    finite = np.isfinite(vectors).all(axis=1)
    if not finite.all():
        raise EmbeddingFormatError(
            f"{path}: non-finite value in record {int(np.argmin(finite))}"
        )
    return vectors, data["label"].astype(np.int64)


def read_embedding_header(path):
    """Return (dim, record count) from the file header."""
    with open(path, "rb") as fh:
        return _read_header(fh, path)


@dataclass
class DatasetManifest:
    file: str
    dim: int
    num_classes: int
    num_records: int
    split: list  # per-record "train"/"test"
    class_names: list | None = None
    base_dir: str = "."

    def embedding_path(self):
        return os.path.normpath(os.path.join(self.base_dir, self.file))

    def to_dict(self):
        out = {
            "file": self.file,
            "dim": self.dim,
            "num_classes": self.num_classes,
            "num_records": self.num_records,
            "split": list(self.split),
        }
        if self.class_names is not None:
            out["class_names"] = list(self.class_names)
        return out


def _expand_split(split, num_classes, num_records):
    if isinstance(split, dict):
        t = int(split["train_per_class"])
        s = int(split["test_per_class"])
        per_class = ["train"] * t + ["test"] * s
        flat = per_class * num_classes
        if len(flat) != num_records:
            raise ValueError(
                f"per-class split ({t}+{s}) x {num_classes} classes != {num_records} records"
            )
        return flat
    return list(split)


def save_manifest(manifest, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest.to_dict(), fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_manifest(path):
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    for key in ("file", "dim", "num_classes", "num_records", "split"):
        if key not in raw:
            raise ValueError(f"manifest {path} missing key {key!r}")
    split = _expand_split(raw["split"], int(raw["num_classes"]), int(raw["num_records"]))
    return DatasetManifest(
        file=raw["file"],
        dim=int(raw["dim"]),
        num_classes=int(raw["num_classes"]),
        num_records=int(raw["num_records"]),
        split=split,
        class_names=raw.get("class_names"),
        base_dir=os.path.dirname(os.path.abspath(path)) or ".",
    )


def validate_manifest(manifest):
    """Check manifest declarations against the embedding file, exactly.

    Returns a summary dict (record/class counts, per-split totals). Raises
    EmbeddingFormatError or ValueError on any disagreement.
    """
    path = manifest.embedding_path()
    dim, count = read_embedding_header(path)
    if dim != manifest.dim:
        raise ValueError(f"manifest dim {manifest.dim} != file dim {dim}")
    if count != manifest.num_records:
        raise ValueError(
            f"manifest num_records {manifest.num_records} != file count {count}"
        )
    if len(manifest.split) != count:
        raise ValueError(
            f"split length {len(manifest.split)} != record count {count}"
        )
    bad = [s for s in manifest.split if s not in ("train", "test")]
    if bad:
        raise ValueError(f"invalid split value {bad[0]!r}")
    vectors, labels = read_embedding_arrays(path)
    if labels.min(initial=0) < 0 or labels.max(initial=-1) >= manifest.num_classes:
        off = int(labels.max())
        raise ValueError(
            f"label {off} out of range for {manifest.num_classes} classes"
        )
    if manifest.class_names is not None and len(manifest.class_names) != manifest.num_classes:
        raise ValueError("class_names length does not match num_classes")
    split = np.asarray(manifest.split)
    return {
        "records": int(count),
        "dim": int(dim),
        "classes_present": int(np.unique(labels).size),
        "num_classes": manifest.num_classes,
        "train_records": int((split == "train").sum()),
        "test_records": int((split == "test").sum()),
    }


@dataclass
class TaskSchedule:
    num_tasks: int
    step_size: int
    class_order: list
    train_indices: list = field(repr=False)  # per task, shuffled
    test_indices: list = field(repr=False)  # per task, file order
    class_seed: int = 0
    shuffle_seed: int = 0

    def task_classes(self, task):
        m = self.step_size
        return self.class_order[task * m : (task + 1) * m]

    def seen_classes(self, upto_task):
        return self.class_order[: (upto_task + 1) * self.step_size]


def build_task_schedule(manifest, step_size, class_seed, shuffle_seed):
    """Partition the dataset's classes into consecutive blocks of a seeded
    class permutation and collect per-task train/test record indices.

    Train order within a task is a permutation determined solely by
    shuffle_seed; test indices stay in file order.
    """
    if step_size <= 0:
        raise ValueError("step size must be positive")
    if manifest.num_classes % step_size != 0:
        raise ValueError(f"{manifest.num_classes} not divisible by {step_size}")
    num_tasks = manifest.num_classes // step_size
    class_order = [
        int(c) for c in np.random.default_rng(class_seed).permutation(manifest.num_classes)
    ]
    _, labels = read_embedding_arrays(manifest.embedding_path())
    split = np.asarray(manifest.split)
    is_train = split == "train"
    train_indices = []
    test_indices = []
    for t in range(num_tasks):
        classes = class_order[t * step_size : (t + 1) * step_size]
        member = np.isin(labels, classes)
        train = np.flatnonzero(member & is_train)
        test = np.flatnonzero(member & ~is_train)
        order = np.random.default_rng([shuffle_seed, t]).permutation(train.size)
        train_indices.append([int(i) for i in train[order]])
        test_indices.append([int(i) for i in test])
    return TaskSchedule(
        num_tasks=num_tasks,
        step_size=step_size,
        class_order=class_order,
        train_indices=train_indices,
        test_indices=test_indices,
        class_seed=class_seed,
        shuffle_seed=shuffle_seed,
    )


def synthetic_class_centers(num_classes, dim, mean_scale, seed):
    """Cluster centers used by generate_synthetic_tasks, regenerated from the seed."""
    rng = np.random.default_rng(seed)
    centers = rng.standard_normal((num_classes, dim))
    norms = np.linalg.norm(centers, axis=1, keepdims=True)
    return centers / norms * mean_scale


def generate_synthetic_tasks(
    num_classes,
    dim,
    per_class_train,
    per_class_test,
    cluster_spread,
    mean_scale,
    seed,
    out_dir,
    name="synthetic",
):
    """Write a Gaussian-cluster dataset: per class, isotropic noise of scale
    `cluster_spread` around a seeded random center of norm `mean_scale`.

    Deterministic given the seed (byte-identical files). Returns
    (DatasetManifest, manifest_path).
    """
    if num_classes < 1 or dim < 1 or per_class_train < 1 or per_class_test < 1:
        raise ValueError("all counts must be positive")
    if cluster_spread < 0 or mean_scale <= 0:
        raise ValueError("cluster_spread must be >= 0 and mean_scale > 0")
    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.default_rng(seed)
    centers = rng.standard_normal((num_classes, dim))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    centers *= mean_scale
    per_class = per_class_train + per_class_test
    records = []
    split = []
    for c in range(num_classes):
        noise = rng.standard_normal((per_class, dim)) * cluster_spread
        vecs = (centers[c] + noise).astype(np.float32)
        for i in range(per_class):
            records.append(EmbeddingRecord(vector=vecs[i], label=c))
        split.extend(["train"] * per_class_train + ["test"] * per_class_test)
    file_name = f"{name}.emb"
    write_embedding_file(records, os.path.join(out_dir, file_name))
    manifest = DatasetManifest(
        file=file_name,
        dim=dim,
        num_classes=num_classes,
        num_records=len(records),
        split=split,
        base_dir=out_dir,
    )
    manifest_path = os.path.join(out_dir, f"{name}.manifest.json")
    save_manifest(manifest, manifest_path)
    return manifest, manifest_path
