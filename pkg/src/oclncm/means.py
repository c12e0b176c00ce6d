"""Per-class running mean vectors over every embedding seen so far.

Accumulation is 64-bit regardless of input precision; the table holds one
mean vector and one count per class, so memory is O(classes x dim) no matter
how long the stream is.
"""

from __future__ import annotations

import json

import numpy as np

from oclncm import kernels


class ClassMeanTable:
    def __init__(self, dim=None):
        self.dim = dim
        self._means = {}  # class id -> float64 vector
        self._counts = {}  # class id -> int

    def __len__(self):
        return len(self._means)

    def __contains__(self, label):
        return int(label) in self._means

    def labels(self):
        return sorted(self._means)

    def count(self, label):
        return self._counts[int(label)]

    @property
    def counts(self):
        return dict(self._counts)

    def mean(self, label):
        label = int(label)
        if label not in self._means:
            raise KeyError(f"unknown class id {label}")
        return self._means[label].copy()

    def _check_vector(self, vec, what="embedding"):
        if vec.ndim != 1:
            raise ValueError(f"{what} must be 1-d, got shape {vec.shape}")
        if self.dim is None:
            self.dim = int(vec.shape[0])
        if vec.shape[0] != self.dim:
            raise ValueError(
                f"dimension mismatch: {what} has dim {vec.shape[0]}, table has {self.dim}"
            )

    def update(self, embedding, label):
        """Fold one embedding into its class mean: with n samples seen so far,
        mean <- n/(n+1) * mean + 1/(n+1) * embedding. A new class starts from
        the zero vector with n = 0, so its first update stores the embedding
        exactly."""
        vec = np.array(embedding, dtype=np.float64)
        self._check_vector(vec)
        if not np.isfinite(vec).all():
            raise ValueError("non-finite embedding")
        label = int(label)
        n = self._counts.get(label)
        if n is None:
            self._means[label] = vec
            self._counts[label] = 1
        else:
            cur = self._means[label]
            cur *= n / (n + 1.0)
            cur += (1.0 / (n + 1.0)) * vec
            self._counts[label] = n + 1

    def bulk_update(self, vectors, labels):
        """Fold a chunk of records, in order, through the same recurrence.
        Routed through the compiled kernel when available."""
        vectors = np.ascontiguousarray(vectors, dtype=np.float64)
        labels = np.asarray(labels, dtype=np.int64)
        if vectors.ndim != 2 or labels.shape != (vectors.shape[0],):
            raise ValueError(
                f"expected (R, F) vectors with (R,) labels, got {vectors.shape} / {labels.shape}"
            )
        if vectors.shape[0] == 0:
            return
        self._check_vector(vectors[0], what="chunk row")
        if not np.isfinite(vectors).all():
            raise ValueError("non-finite embedding in chunk")
        present = np.unique(labels)
        row_of = {int(c): i for i, c in enumerate(present)}
        dense = np.zeros((present.size, self.dim), dtype=np.float64)
        counts = np.zeros(present.size, dtype=np.int64)
        for c, i in row_of.items():
            if c in self._means:
                dense[i] = self._means[c]
                counts[i] = self._counts[c]
        rows = np.array([row_of[int(c)] for c in labels], dtype=np.int64)
        kernels.mean_update_chunk(dense, counts, vectors, rows)
        for c, i in row_of.items():
            self._means[c] = dense[i].copy()
            self._counts[c] = int(counts[i])

    def distance(self, label, query):
        """Euclidean distance between the stored class mean and a query."""
        label = int(label)
        if label not in self._means:
            raise KeyError(f"unknown class id {label}")
        query = np.asarray(query, dtype=np.float64)
        self._check_vector(query, what="query")
        diff = self._means[label] - query
        return float(np.sqrt(np.dot(diff, diff)))

    def sq_distance_matrix(self, queries, labels=None):
        """Squared distances from each query row to each class mean.

        Returns (labels ordered as compared, (Q, C) float64 matrix). Distances
        are compared squared internally; callers wanting true norms take sqrt.
        """
        if labels is None:
            labels = self.labels()
        labels = [int(c) for c in labels]
        if not labels:
            raise ValueError("no classes to compare against")
        for c in labels:
            if c not in self._means:
                raise KeyError(f"unknown class id {c}")
        queries = np.ascontiguousarray(np.atleast_2d(np.asarray(queries, dtype=np.float64)))
        if queries.shape[1] != self.dim:
            raise ValueError(
                f"dimension mismatch: queries have dim {queries.shape[1]}, table has {self.dim}"
            )
        stacked = np.ascontiguousarray(np.stack([self._means[c] for c in labels]))
        return labels, kernels.sq_dist_chunk(queries, stacked)

    def to_json(self):
        """Checkpoint as JSON: {class id: {count, mean}} at full 64-bit precision."""
        payload = {
            str(c): {"count": self._counts[c], "mean": [float(x) for x in self._means[c]]}
            for c in self.labels()
        }
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        payload = json.loads(text)
        table = cls()
        for key in sorted(payload, key=int):
            entry = payload[key]
            vec = np.asarray(entry["mean"], dtype=np.float64)
            table._check_vector(vec, what="checkpoint mean")
            table._means[int(key)] = vec
            table._counts[int(key)] = int(entry["count"])
        return table


def batch_mean_oracle(records):
    """Exact per-class arithmetic means by two-pass 64-bit summation.

    Accepts a sequence of EmbeddingRecord or a (vectors, labels) pair.
    Independent of the streaming update path; verification only.
    """
    if isinstance(records, tuple) and len(records) == 2:
        vectors, labels = records
        vectors = np.asarray(vectors, dtype=np.float64)
        labels = np.asarray(labels)
    else:
        records = list(records)
        vectors = np.asarray([r.vector for r in records], dtype=np.float64)
        labels = np.asarray([r.label for r in records])
    out = {}
    for c in np.unique(labels):
        rows = vectors[labels == c]
        out[int(c)] = rows.sum(axis=0) / rows.shape[0]
    return out
