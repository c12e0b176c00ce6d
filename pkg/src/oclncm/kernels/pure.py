"""Numpy fallback for the hot kernels.

Same contracts and same arithmetic (operation order, no fused multiply-add)
as the compiled module, so both backends agree to the last few ulps.
"""

import numpy as np

BACKEND = "numpy"


def mean_update_chunk(means, counts, vecs, rows):
    """Apply the running-mean recurrence record by record, in order.

    means:  (C, F) float64, updated in place
    counts: (C,) int64, updated in place
    vecs:   (R, F) float64
    rows:   (R,) int64, row of `means` each vector belongs to
    """
    for i in range(vecs.shape[0]):
        r = rows[i]
        n = counts[r]
        a = n / (n + 1.0)
        b = 1.0 / (n + 1.0)
        means[r] *= a
        means[r] += b * vecs[i]
        counts[r] = n + 1


def sq_dist_chunk(queries, means, out=None):
    """Squared Euclidean distances between every query and every mean row.

    queries: (Q, F) float64; means: (C, F) float64 -> (Q, C) float64.
    """
    nq, dim = queries.shape
    nc = means.shape[0]
    if out is None:
        out = np.empty((nq, nc), dtype=np.float64)
    # Chunk queries so the (step, C, F) temporary stays small.
    step = max(1, 4_000_000 // max(1, nc * dim))
    for s in range(0, nq, step):
        e = min(nq, s + step)
        diff = queries[s:e, None, :] - means[None, :, :]
        np.einsum("qcf,qcf->qc", diff, diff, out=out[s:e])
    return out
