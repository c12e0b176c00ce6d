"""Comparison-method machinery: reservoir exemplar buffer, replay sampling,
nearest-mean-of-exemplars prediction, and the fine-tune / replay step policies.
"""

from __future__ import annotations

import random

import numpy as np


class ExemplarBuffer:
    """Fixed-capacity exemplar store filled by reservoir sampling: the first
    Q records are kept, after which each arrival replaces a uniformly random
    slot with probability Q / total seen."""

    def __init__(self, capacity, seed=0):
        if capacity < 0:
            raise ValueError("capacity must be >= 0")
        self.capacity = int(capacity)
        self.total_seen = 0
        self._rng = random.Random(seed)
        self._vectors = []
        self._labels = []

    def __len__(self):
        return len(self._vectors)

    def reservoir_update(self, vector, label):
        self.total_seen += 1
        if self.capacity == 0:
            return
        if len(self._vectors) < self.capacity:
            self._vectors.append(np.array(vector, dtype=np.float32))
            self._labels.append(int(label))
            return
        slot = self._rng.randrange(self.total_seen)
        if slot < self.capacity:
            self._vectors[slot] = np.array(vector, dtype=np.float32)
            self._labels[slot] = int(label)

    def replay_batch(self, size, rng=None):
        """Sample `size` stored records uniformly with replacement."""
        if not self._vectors:
            raise ValueError("empty buffer")
        rng = rng or self._rng
        idx = [rng.randrange(len(self._vectors)) for _ in range(size)]
        inputs = np.stack([self._vectors[i] for i in idx])
        labels = np.array([self._labels[i] for i in idx], dtype=np.int64)
        return inputs, labels

    def contents(self):
        if not self._vectors:
            return np.zeros((0, 0), dtype=np.float32), np.zeros(0, dtype=np.int64)
        return np.stack(self._vectors), np.asarray(self._labels, dtype=np.int64)

    def class_means(self):
        """Per-class 64-bit means over buffered records only."""
        out = {}
        vectors, labels = self.contents()
        for c in np.unique(labels):
            rows = vectors[labels == c].astype(np.float64)
            out[int(c)] = rows.sum(axis=0) / rows.shape[0]
        return out


def nme_predict(buffer, query):
    """Nearest mean over the buffer's per-class means; classes absent from
    the buffer cannot be predicted. Ties go to the lower class id."""
    if len(buffer) == 0:
        raise ValueError("empty buffer")
    means = buffer.class_means()
    query = np.asarray(query, dtype=np.float64)
    best_label = None
    best_sqd = None
    for c in sorted(means):
        diff = means[c] - query
        sqd = float(np.dot(diff, diff))
        if best_sqd is None or sqd < best_sqd:
            best_label, best_sqd = c, sqd
    return best_label


def finetune_step(head, inputs, labels, lr):
    """Plain SGD on the incoming batch with no freezing: the caller keeps all
    head rows trainable, so old-task rows drift freely."""
    loss, gw, gb = head.ce_loss_and_grad(inputs, labels)
    head.sgd_step(gw, gb, lr)
    return loss


def er_step(head, inputs, labels, lr, buffer, replay_rng, replay_ratio=1.0):
    """Experience replay: mix the incoming batch with a replay sample of
    replay_ratio times its size (when the buffer has anything), take one SGD
    step on the mix, then reservoir-insert every incoming record."""
    replay_size = int(round(replay_ratio * inputs.shape[0]))
    if len(buffer) > 0 and replay_size > 0:
        rx, ry = buffer.replay_batch(replay_size, rng=replay_rng)
        mixed_x = np.concatenate([inputs, rx])
        mixed_y = np.concatenate([labels, ry])
    else:
        mixed_x, mixed_y = inputs, labels
    loss, gw, gb = head.ce_loss_and_grad(mixed_x, mixed_y)
    head.sgd_step(gw, gb, lr)
    for i in range(inputs.shape[0]):
        buffer.reservoir_update(inputs[i], labels[i])
    return loss
