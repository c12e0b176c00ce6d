"""Inference-time prediction rules.

All arg-max / arg-min ties break toward the lowest class id. Distances are
compared squared internally; that is monotone-equivalent to the L2 norm and
avoids a square root per class.
"""

from __future__ import annotations

import numpy as np

_TIE_SENTINEL = np.iinfo(np.int64).max


def _lowest_id_argmax(values, class_ids):
    best = values.max()
    winners = np.asarray(class_ids)[values == best]
    return int(winners.min())


def _lowest_id_argmin(values, class_ids):
    best = values.min()
    winners = np.asarray(class_ids)[values == best]
    return int(winners.min())


def select_candidates(logits, schedule):
    """One candidate class per learned task: the arg-max class inside each
    task's block of logits. Head rows follow the schedule's class order."""
    logits = np.asarray(logits)
    m = schedule.step_size
    k = logits.shape[0]
    if k == 0 or k % m != 0:
        raise ValueError(f"logit length {k} is not a positive multiple of step size {m}")
    if k > len(schedule.class_order):
        raise ValueError(f"logit length {k} exceeds {len(schedule.class_order)} scheduled classes")
    classes = np.asarray(schedule.class_order[:k])
    out = []
    for t in range(k // m):
        block = slice(t * m, (t + 1) * m)
        out.append(_lowest_id_argmax(logits[block], classes[block]))
    return out


def select_candidates_batch(logits, classes, step_size):
    """Vectorized candidate selection for a (B, K) logit matrix.

    Returns a (B, N) int array of candidate class ids, one column per task.
    """
    logits = np.asarray(logits)
    classes = np.asarray(classes, dtype=np.int64)
    b, k = logits.shape
    n = k // step_size
    if n * step_size != k:
        raise ValueError(f"logit length {k} is not a multiple of step size {step_size}")
    blocks = logits.reshape(b, n, step_size)
    ids = classes.reshape(n, step_size)
    top = blocks.max(axis=2, keepdims=True)
    tied = blocks == top
    return np.where(tied, ids[None, :, :], _TIE_SENTINEL).min(axis=2)


def ncm_predict(table, candidates, query):
    """Of the candidates, the class whose stored mean is nearest the query."""
    if not candidates:
        raise ValueError("empty candidate set")
    for c in candidates:
        if c not in table:
            raise KeyError(
                f"candidate class {c} has no mean; every trained class must have count >= 1"
            )
    labels, sqd = table.sq_distance_matrix(query, labels=list(candidates))
    return _lowest_id_argmin(sqd[0], labels)


def full_ncm_predict(table, query):
    """The class with the nearest stored mean among all seen classes."""
    if len(table) == 0:
        raise ValueError("empty mean table")
    labels, sqd = table.sq_distance_matrix(query)
    return _lowest_id_argmin(sqd[0], labels)


def ncm_predict_batch(sq_dists, column_classes, candidate_ids):
    """Candidate-restricted nearest-mean over precomputed squared distances.

    sq_dists: (B, C) distances to the means of `column_classes` (ascending
    class ids); candidate_ids: (B, N) candidate classes per sample.
    """
    column_classes = np.asarray(column_classes, dtype=np.int64)
    candidate_ids = np.asarray(candidate_ids, dtype=np.int64)
    if candidate_ids.max() > column_classes.max() or candidate_ids.min() < 0:
        raise KeyError(
            f"candidate class {int(candidate_ids.max())} has no mean; "
            "every trained class must have count >= 1"
        )
    col_of = np.full(column_classes.max() + 1, -1, dtype=np.int64)
    col_of[column_classes] = np.arange(column_classes.size)
    cols = col_of[candidate_ids]
    if (cols < 0).any():
        missing = int(candidate_ids[cols < 0].flat[0])
        raise KeyError(
            f"candidate class {missing} has no mean; every trained class must have count >= 1"
        )
    cand_d = np.take_along_axis(sq_dists, cols, axis=1)
    best = cand_d.min(axis=1, keepdims=True)
    return np.where(cand_d == best, candidate_ids, _TIE_SENTINEL).min(axis=1)


def full_ncm_predict_batch(sq_dists, column_classes):
    """Row-wise arg-min class over precomputed squared distances; columns must
    be in ascending class-id order so first-minimum is the lowest id."""
    column_classes = np.asarray(column_classes, dtype=np.int64)
    return column_classes[np.argmin(sq_dists, axis=1)]


def argmax_predict(logits, classes=None):
    """Global arg-max prediction (fine-tune / replay baselines)."""
    logits = np.asarray(logits)
    if logits.size == 0:
        raise ValueError("empty logits")
    if classes is None:
        classes = np.arange(logits.shape[0])
    return _lowest_id_argmax(logits, classes)


def argmax_predict_batch(logits, classes):
    logits = np.asarray(logits)
    classes = np.asarray(classes, dtype=np.int64)
    top = logits.max(axis=1, keepdims=True)
    return np.where(logits == top, classes[None, :], _TIE_SENTINEL).min(axis=1)
