"""Streaming class-incremental learning over frozen-backbone embeddings.

Single-pass training keeps one running mean vector per class and a linear
head whose finished-task rows are frozen; inference picks one candidate class
per task from the head's logits and ranks the candidates by distance to their
class means. Baselines (fine-tune, experience replay, exemplar-based nearest
mean) and the benchmark harness live alongside.
"""

__version__ = "0.1.0"

from oclncm import baselines, classify, harness, head, kernels, means, store  # noqa: E402

__all__ = [
    "__version__",
    "baselines",
    "classify",
    "harness",
    "head",
    "kernels",
    "means",
    "store",
]
