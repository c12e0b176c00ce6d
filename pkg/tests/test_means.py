import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oclncm.means import ClassMeanTable, batch_mean_oracle
from oclncm.store import EmbeddingRecord


def _rel_err(got, want):
    scale = max(np.linalg.norm(want), 1e-30)
    return np.linalg.norm(got - want) / scale


class TestUpdate:
    def test_unseen_class_stores_embedding(self):
        table = ClassMeanTable()
        table.update(np.array([2.0, 4.0]), 3)
        assert table.count(3) == 1
        np.testing.assert_array_equal(table.mean(3), [2.0, 4.0])

    def test_two_point_average(self):
        table = ClassMeanTable()
        table.update(np.array([2.0, 4.0]), 0)
        table.update(np.array([4.0, 8.0]), 0)
        assert table.count(0) == 2
        np.testing.assert_allclose(table.mean(0), [3.0, 6.0], rtol=0, atol=0)

    def test_long_stream_matches_batch_oracle(self):
        rng = np.random.default_rng(17)
        vectors = rng.standard_normal((10_000, 512)).astype(np.float32)
        table = ClassMeanTable()
        for v in vectors:
            table.update(v, 0)
        want = batch_mean_oracle((vectors, np.zeros(len(vectors), dtype=np.int64)))[0]
        assert _rel_err(table.mean(0), want) < 1e-10

    def test_dimension_mismatch_rejected(self):
        table = ClassMeanTable()
        table.update(np.array([1.0, 2.0]), 0)
        with pytest.raises(ValueError, match="dimension mismatch"):
            table.update(np.array([1.0, 2.0, 3.0]), 0)

    def test_non_finite_rejected(self):
        table = ClassMeanTable()
        with pytest.raises(ValueError, match="non-finite"):
            table.update(np.array([1.0, np.nan]), 0)

    def test_bulk_update_matches_sequential(self):
        rng = np.random.default_rng(5)
        vectors = rng.standard_normal((200, 6)).astype(np.float32)
        labels = rng.integers(0, 4, size=200)
        seq = ClassMeanTable()
        for v, c in zip(vectors, labels):
            seq.update(v, int(c))
        bulk = ClassMeanTable()
        for start in range(0, 200, 16):
            bulk.bulk_update(vectors[start : start + 16], labels[start : start + 16])
        assert seq.counts == bulk.counts
        for c in seq.labels():
            np.testing.assert_array_equal(seq.mean(c), bulk.mean(c))


class TestBatchMeanOracle:
    def test_singletons_equal_records(self):
        records = [
            EmbeddingRecord(vector=np.array([1.0, 2.0], dtype=np.float32), label=0),
            EmbeddingRecord(vector=np.array([5.0, 6.0], dtype=np.float32), label=1),
        ]
        means = batch_mean_oracle(records)
        np.testing.assert_array_equal(means[0], [1.0, 2.0])
        np.testing.assert_array_equal(means[1], [5.0, 6.0])

    def test_pair_mean(self):
        records = [
            EmbeddingRecord(vector=np.array([1.0], dtype=np.float32), label=0),
            EmbeddingRecord(vector=np.array([3.0], dtype=np.float32), label=0),
        ]
        np.testing.assert_array_equal(batch_mean_oracle(records)[0], [2.0])

    def test_permutation_invariance(self):
        rng = np.random.default_rng(2)
        vectors = rng.standard_normal((300, 8))
        labels = rng.integers(0, 5, size=300)
        base = batch_mean_oracle((vectors, labels))
        perm = rng.permutation(300)
        shuffled = batch_mean_oracle((vectors[perm], labels[perm]))
        for c in base:
            assert _rel_err(shuffled[c], base[c]) < 1e-12


class TestDistance:
    def test_query_at_mean_is_zero(self):
        table = ClassMeanTable()
        table.update(np.array([1.5, -2.0]), 0)
        assert table.distance(0, np.array([1.5, -2.0])) == 0.0

    def test_three_four_five(self):
        table = ClassMeanTable()
        table.update(np.array([0.0, 0.0]), 0)
        assert table.distance(0, np.array([3.0, 4.0])) == pytest.approx(5.0, abs=0)

    def test_matches_independent_norm(self):
        rng = np.random.default_rng(11)
        table = ClassMeanTable()
        mean_vec = rng.standard_normal(512)
        table.update(mean_vec, 0)
        for _ in range(20):
            q = rng.standard_normal(512)
            want = float(np.sqrt(np.sum((mean_vec - q) ** 2)))
            got = table.distance(0, q)
            assert abs(got - want) <= 1e-12 * max(1.0, want)

    def test_unknown_class_rejected(self):
        table = ClassMeanTable()
        table.update(np.array([1.0]), 0)
        with pytest.raises(KeyError, match="unknown class id 7"):
            table.distance(7, np.array([1.0]))

    def test_distance_does_not_mutate_counts(self):
        table = ClassMeanTable()
        table.update(np.array([1.0, 2.0]), 0)
        before = table.counts
        table.distance(0, np.array([9.0, 9.0]))
        table.sq_distance_matrix(np.array([[9.0, 9.0]]))
        assert table.counts == before


@st.composite
def _streams(draw):
    n_classes = draw(st.integers(1, 5))
    dim = draw(st.integers(1, 6))
    n = draw(st.integers(1, 60))
    labels = draw(st.lists(st.integers(0, n_classes - 1), min_size=n, max_size=n))
    seed = draw(st.integers(0, 2**16))
    vectors = np.random.default_rng(seed).uniform(-100, 100, size=(n, dim))
    return vectors, np.asarray(labels)


class TestStreamingProperties:
    @settings(max_examples=60, deadline=None)
    @given(_streams())
    def test_streaming_equals_batch(self, stream):
        vectors, labels = stream
        table = ClassMeanTable()
        for v, c in zip(vectors, labels):
            table.update(v, int(c))
        oracle = batch_mean_oracle((vectors, labels))
        for c in oracle:
            assert _rel_err(table.mean(c), oracle[c]) < 1e-8

    @settings(max_examples=40, deadline=None)
    @given(_streams(), st.integers(0, 2**16))
    def test_permutation_stability(self, stream, perm_seed):
        vectors, labels = stream
        a = ClassMeanTable()
        for v, c in zip(vectors, labels):
            a.update(v, int(c))
        perm = np.random.default_rng(perm_seed).permutation(len(labels))
        b = ClassMeanTable()
        for v, c in zip(vectors[perm], labels[perm]):
            b.update(v, int(c))
        assert a.counts == b.counts
        for c in a.labels():
            assert _rel_err(b.mean(c), a.mean(c)) < 1e-8

    @settings(max_examples=40, deadline=None)
    @given(_streams())
    def test_count_conservation(self, stream):
        vectors, labels = stream
        table = ClassMeanTable()
        for v, c in zip(vectors, labels):
            table.update(v, int(c))
        assert sum(table.counts.values()) == len(labels)

    def test_memory_is_class_by_dim(self):
        # table size depends on classes x dim, not on stream length
        table = ClassMeanTable()
        rng = np.random.default_rng(0)
        for i in range(5_000):
            table.update(rng.standard_normal(4), i % 3)
        assert len(table) == 3
        assert sum(table.mean(c).size for c in table.labels()) == 3 * 4


class TestCheckpoint:
    def test_json_round_trip_exact(self):
        rng = np.random.default_rng(23)
        table = ClassMeanTable()
        for _ in range(50):
            table.update(rng.standard_normal(7), int(rng.integers(0, 4)))
        text = table.to_json()
        back = ClassMeanTable.from_json(text)
        assert back.counts == table.counts
        for c in table.labels():
            np.testing.assert_array_equal(back.mean(c), table.mean(c))
        # decimal text written by one table parses back to identical bits
        assert json.loads(back.to_json()) == json.loads(text)
