import numpy as np
import pytest

from oclncm import store


@pytest.fixture
def tiny_records():
    return [
        store.EmbeddingRecord(vector=np.array([1.0, 2.0], dtype=np.float32), label=0),
        store.EmbeddingRecord(vector=np.array([3.0, 4.0], dtype=np.float32), label=1),
    ]


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """10 well-separated classes, dim 8: fast end-to-end harness fixture."""
    out = tmp_path_factory.mktemp("small_ds")
    manifest, manifest_path = store.generate_synthetic_tasks(
        num_classes=10,
        dim=8,
        per_class_train=30,
        per_class_test=10,
        cluster_spread=0.05,
        mean_scale=1.0,
        seed=7,
        out_dir=str(out),
    )
    return manifest, manifest_path
