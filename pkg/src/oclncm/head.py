"""Trainable linear classification head with per-task row blocks.

Rows are appended one task at a time; rows of finished tasks are frozen and
must stay bit-identical through any amount of further training. Freezing is
enforced where gradients are produced, so any optimizer respects it.
"""

from __future__ import annotations

import json

import numpy as np


class HeadParams:
    def __init__(self, dim, bias=True, dtype=np.float32, softmax_scope="all"):
        if softmax_scope not in ("all", "task"):
            raise ValueError(f"softmax_scope must be 'all' or 'task', got {softmax_scope!r}")
        self.dim = int(dim)
        self.use_bias = bool(bias)
        self.dtype = np.dtype(dtype)
        self.softmax_scope = softmax_scope
        self.weights = np.zeros((0, self.dim), dtype=self.dtype)
        self.biases = np.zeros(0, dtype=self.dtype)
        self.trainable_mask = np.zeros(0, dtype=bool)
        self.row_to_task = np.zeros(0, dtype=np.int64)
        self.row_to_class = np.zeros(0, dtype=np.int64)
        self._class_to_row = {}
        self.num_tasks = 0

    @property
    def num_rows(self):
        return self.weights.shape[0]

    def row_of(self, label):
        row = self._class_to_row.get(int(label))
        if row is None:
            raise KeyError(f"class {label} has no head row")
        return row

    def expand(self, new_task, classes, init_seed):
        """Append one row per class for the next task. New rows draw from a
        seeded uniform on [-1/sqrt(F), +1/sqrt(F)] with zero bias and are the
        only trainable rows afterwards."""
        if new_task != self.num_tasks:
            raise ValueError(
                f"tasks must expand in order: expected task {self.num_tasks}, got {new_task}"
            )
        classes = [int(c) for c in classes]
        if not classes:
            raise ValueError("expand requires at least one class")
        for c in classes:
            if c in self._class_to_row:
                raise ValueError(f"class {c} already has a head row")
        rng = np.random.default_rng([init_seed, new_task])
        bound = 1.0 / np.sqrt(self.dim)
        new_w = rng.uniform(-bound, bound, size=(len(classes), self.dim)).astype(self.dtype)
        start = self.num_rows
        self.weights = np.concatenate([self.weights, new_w])
        self.biases = np.concatenate([self.biases, np.zeros(len(classes), dtype=self.dtype)])
        self.trainable_mask = np.concatenate(
            [np.zeros(start, dtype=bool), np.ones(len(classes), dtype=bool)]
        )
        self.row_to_task = np.concatenate(
            [self.row_to_task, np.full(len(classes), new_task, dtype=np.int64)]
        )
        self.row_to_class = np.concatenate(
            [self.row_to_class, np.asarray(classes, dtype=np.int64)]
        )
        for i, c in enumerate(classes):
            self._class_to_row[c] = start + i
        self.num_tasks += 1

    def set_all_trainable(self):
        """Drop freezing entirely (fine-tune style policies)."""
        self.trainable_mask[:] = True

    def logits(self, x):
        """weights @ x + biases; accepts a single (F,) vector or a (B, F) batch."""
        x = np.asarray(x, dtype=self.dtype)
        if x.shape[-1] != self.dim:
            raise ValueError(f"dimension mismatch: input dim {x.shape[-1]}, head dim {self.dim}")
        out = x @ self.weights.T
        if self.use_bias:
            out = out + self.biases
        return out

    def _label_rows(self, labels):
        rows = np.array([self.row_of(c) for c in labels], dtype=np.int64)
        if not self.trainable_mask[rows].all():
            frozen = int(labels[int(np.argmin(self.trainable_mask[rows]))])
            raise ValueError(f"label {frozen} outside current task (frozen row)")
        return rows

    def ce_loss_and_grad(self, inputs, labels):
        """Mean softmax cross-entropy over the batch plus gradients.

        Softmax spans all rows (scope "all") or only the trainable block
        (scope "task"). Gradients on frozen rows are exactly zero. Uses a
        max-shifted log-sum-exp; math runs in the head's dtype.
        """
        inputs = np.atleast_2d(np.asarray(inputs, dtype=self.dtype))
        labels = np.asarray(labels)
        if inputs.shape[0] == 0:
            raise ValueError("empty batch")
        if labels.shape != (inputs.shape[0],):
            raise ValueError(f"batch shape mismatch: {inputs.shape} vs {labels.shape}")
        rows = self._label_rows(labels)
        grad_w = np.zeros_like(self.weights)
        grad_b = np.zeros_like(self.biases)
        if self.softmax_scope == "task":
            cols = np.flatnonzero(self.trainable_mask)
            z = inputs @ self.weights[cols].T
            if self.use_bias:
                z = z + self.biases[cols]
            pos_of = {int(r): i for i, r in enumerate(cols)}
            targets = np.array([pos_of[int(r)] for r in rows], dtype=np.int64)
        else:
            z = self.logits(inputs)
            cols = None
            targets = rows
        b = z.shape[0]
        shifted = z - z.max(axis=1, keepdims=True)
        logsum = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        logp = shifted - logsum
        loss = float(-logp[np.arange(b), targets].mean())
        dz = np.exp(logp)
        dz[np.arange(b), targets] -= 1
        dz /= b
        gw = dz.T @ inputs
        gb = dz.sum(axis=0)
        if cols is None:
            grad_w[:] = gw
            grad_b[:] = gb
            grad_w[~self.trainable_mask] = 0
            grad_b[~self.trainable_mask] = 0
        else:
            grad_w[cols] = gw
            grad_b[cols] = gb
        if not self.use_bias:
            grad_b[:] = 0
        return loss, grad_w, grad_b

    def sgd_step(self, grad_w, grad_b, lr):
        """Plain SGD on trainable rows only; frozen rows are not touched."""
        if grad_w.shape != self.weights.shape or grad_b.shape != self.biases.shape:
            raise ValueError(
                f"gradient shape mismatch: {grad_w.shape}/{grad_b.shape} vs "
                f"{self.weights.shape}/{self.biases.shape}"
            )
        mask = self.trainable_mask
        self.weights[mask] -= self.dtype.type(lr) * grad_w[mask]
        if self.use_bias:
            self.biases[mask] -= self.dtype.type(lr) * grad_b[mask]

    def to_json(self):
        rows = []
        for r in range(self.num_rows):
            rows.append(
                {
                    "task": int(self.row_to_task[r]),
                    "class": int(self.row_to_class[r]),
                    "trainable": bool(self.trainable_mask[r]),
                    "bias": float(self.biases[r]),
                    "weights": [float(x) for x in self.weights[r]],
                }
            )
        return json.dumps(
            {"dim": self.dim, "bias": self.use_bias, "scope": self.softmax_scope, "rows": rows},
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text, dtype=np.float32):
        payload = json.loads(text)
        head = cls(payload["dim"], bias=payload["bias"], dtype=dtype, softmax_scope=payload["scope"])
        rows = payload["rows"]
        if rows:
            head.weights = np.asarray([r["weights"] for r in rows], dtype=head.dtype)
            head.biases = np.asarray([r["bias"] for r in rows], dtype=head.dtype)
            head.trainable_mask = np.asarray([r["trainable"] for r in rows], dtype=bool)
            head.row_to_task = np.asarray([r["task"] for r in rows], dtype=np.int64)
            head.row_to_class = np.asarray([r["class"] for r in rows], dtype=np.int64)
            head._class_to_row = {int(c): i for i, c in enumerate(head.row_to_class)}
            head.num_tasks = int(head.row_to_task.max()) + 1
        return head


def ce_loss_only(head, inputs, labels):
    """Loss value alone, for the finite-difference oracle."""
    loss, _, _ = head.ce_loss_and_grad(inputs, labels)
    return loss


def finite_diff_grad_oracle(head, inputs, labels, h=1e-5):
    """Central-difference gradients of the cross-entropy loss over every
    weight and bias entry. Verification only; never drives training."""
    fd_w = np.zeros(head.weights.shape, dtype=np.float64)
    fd_b = np.zeros(head.biases.shape, dtype=np.float64)
    for r in range(head.num_rows):
        for f in range(head.dim):
            orig = head.weights[r, f]
            head.weights[r, f] = orig + h
            up = ce_loss_only(head, inputs, labels)
            head.weights[r, f] = orig - h
            down = ce_loss_only(head, inputs, labels)
            head.weights[r, f] = orig
            fd_w[r, f] = (up - down) / (2 * h)
        if head.use_bias:
            orig = head.biases[r]
            head.biases[r] = orig + h
            up = ce_loss_only(head, inputs, labels)
            head.biases[r] = orig - h
            down = ce_loss_only(head, inputs, labels)
            head.biases[r] = orig
            fd_b[r] = (up - down) / (2 * h)
    return fd_w, fd_b
