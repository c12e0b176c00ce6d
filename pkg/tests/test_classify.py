import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oclncm import classify
from oclncm.means import ClassMeanTable
from oclncm.store import TaskSchedule


def _schedule(class_order, step_size):
    n = len(class_order) // step_size
    return TaskSchedule(
        num_tasks=n,
        step_size=step_size,
        class_order=list(class_order),
        train_indices=[[] for _ in range(n)],
        test_indices=[[] for _ in range(n)],
    )


def _table_from(means):
    table = ClassMeanTable()
    for c, vec in means.items():
        table.update(np.asarray(vec, dtype=np.float64), c)
    return table


class TestSelectCandidates:
    def test_per_block_argmax(self):
        schedule = _schedule([0, 1, 2, 3], 2)
        assert classify.select_candidates([0.1, 0.9, 0.5, 0.2], schedule) == [1, 2]

    def test_single_task_reduces_to_global_argmax(self):
        schedule = _schedule([0, 1, 2], 3)
        assert classify.select_candidates([0.3, 0.8, 0.1], schedule) == [1]

    def test_tie_goes_to_lower_class_id(self):
        schedule = _schedule([0, 1], 2)
        assert classify.select_candidates([0.5, 0.5], schedule) == [0]

    def test_tie_uses_class_id_not_position(self):
        # permuted class order: position 0 holds class 3, position 1 holds class 1
        schedule = _schedule([3, 1, 0, 2], 2)
        assert classify.select_candidates([0.5, 0.5, 1.0, 0.0], schedule) == [1, 0]

    def test_length_mismatch_rejected(self):
        schedule = _schedule([0, 1, 2, 3], 2)
        with pytest.raises(ValueError, match="multiple of step size"):
            classify.select_candidates([0.1, 0.2, 0.3], schedule)

    def test_batch_matches_scalar(self):
        rng = np.random.default_rng(3)
        order = list(rng.permutation(12))
        schedule = _schedule(order, 3)
        logits = rng.standard_normal((40, 12))
        batch = classify.select_candidates_batch(logits, order, 3)
        for i in range(40):
            assert list(batch[i]) == classify.select_candidates(logits[i], schedule)


class TestNcmPredict:
    def test_query_at_candidate_mean(self):
        table = _table_from({0: [0.0, 0.0], 1: [1.0, 1.0], 2: [2.0, 2.0]})
        assert classify.ncm_predict(table, [1, 2], np.array([1.0, 1.0])) == 1

    def test_single_candidate_returned_regardless_of_distance(self):
        table = _table_from({5: [100.0]})
        assert classify.ncm_predict(table, [5], np.array([-100.0])) == 5

    def test_missing_mean_rejected(self):
        table = _table_from({0: [0.0]})
        with pytest.raises(KeyError, match="candidate class 3"):
            classify.ncm_predict(table, [0, 3], np.array([0.0]))

    def test_distance_tie_goes_to_lower_id(self):
        table = _table_from({2: [1.0, 0.0], 7: [-1.0, 0.0]})
        assert classify.ncm_predict(table, [7, 2], np.array([0.0, 5.0])) == 2

    def test_matches_brute_force(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            table = _table_from({c: rng.standard_normal(8) for c in range(10)})
            candidates = list(rng.choice(10, size=rng.integers(1, 6), replace=False))
            query = rng.standard_normal(8)
            got = classify.ncm_predict(table, candidates, query)
            dists = {c: float(np.linalg.norm(table.mean(c) - query)) for c in candidates}
            best = min(dists.values())
            want = min(c for c, d in dists.items() if d == best)
            assert got == want


class TestFullNcmPredict:
    def test_query_at_some_mean(self):
        table = _table_from({0: [0.0, 1.0], 1: [3.0, 0.0], 2: [-2.0, 2.0]})
        assert classify.full_ncm_predict(table, np.array([3.0, 0.0])) == 1

    def test_two_classes(self):
        table = _table_from({0: [0.0], 1: [10.0]})
        assert classify.full_ncm_predict(table, np.array([2.0])) == 0

    def test_empty_table_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            classify.full_ncm_predict(ClassMeanTable(), np.array([1.0]))

    def test_matches_brute_force(self):
        rng = np.random.default_rng(13)
        for _ in range(200):
            table = _table_from({c: rng.standard_normal(6) for c in range(8)})
            query = rng.standard_normal(6)
            got = classify.full_ncm_predict(table, query)
            dists = {c: float(np.linalg.norm(table.mean(c) - query)) for c in range(8)}
            best = min(dists.values())
            want = min(c for c, d in dists.items() if d == best)
            assert got == want


class TestArgmaxPredict:
    def test_basic(self):
        assert classify.argmax_predict([0.0, 0.0, 1.0]) == 2

    def test_all_equal_gives_class_zero(self):
        assert classify.argmax_predict([0.5, 0.5, 0.5]) == 0

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            classify.argmax_predict([])

    def test_matches_brute_force(self):
        rng = np.random.default_rng(17)
        for _ in range(100):
            logits = rng.standard_normal(rng.integers(1, 12))
            got = classify.argmax_predict(logits)
            want = int(np.flatnonzero(logits == logits.max()).min())
            assert got == want

    def test_permuted_class_ids(self):
        assert classify.argmax_predict([1.0, 1.0], classes=[9, 4]) == 4


class TestInvariants:
    @settings(max_examples=80, deadline=None)
    @given(st.integers(0, 2**16))
    def test_candidate_containment(self, seed):
        rng = np.random.default_rng(seed)
        order = list(rng.permutation(8))
        schedule = _schedule(order, 2)
        logits = rng.standard_normal(8)
        table = _table_from({c: rng.standard_normal(4) for c in order})
        candidates = classify.select_candidates(logits, schedule)
        pred = classify.ncm_predict(table, candidates, rng.standard_normal(4))
        assert pred in candidates

    @settings(max_examples=80, deadline=None)
    @given(st.integers(0, 2**16))
    def test_agreement_when_candidates_cover_full_winner(self, seed):
        rng = np.random.default_rng(seed)
        order = list(rng.permutation(8))
        schedule = _schedule(order, 2)
        logits = rng.standard_normal(8)
        table = _table_from({c: rng.standard_normal(4) for c in order})
        query = rng.standard_normal(4)
        candidates = classify.select_candidates(logits, schedule)
        full_winner = classify.full_ncm_predict(table, query)
        if full_winner in candidates:
            assert classify.ncm_predict(table, candidates, query) == full_winner

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**16))
    def test_monotone_transform_invariance(self, seed):
        rng = np.random.default_rng(seed)
        order = list(rng.permutation(6))
        schedule = _schedule(order, 3)
        logits = rng.uniform(-5, 5, size=6)
        base = classify.select_candidates(logits, schedule)
        for transform in (lambda z: 2.0 * z + 1.0, lambda z: z**3, np.tanh):
            assert classify.select_candidates(transform(np.asarray(logits)), schedule) == base

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**16), st.floats(0.1, 50.0))
    def test_ncm_scale_invariance(self, seed, scale):
        rng = np.random.default_rng(seed)
        means = {c: rng.standard_normal(4) for c in range(6)}
        query = rng.standard_normal(4)
        table = _table_from(means)
        scaled = _table_from({c: scale * v for c, v in means.items()})
        assert classify.full_ncm_predict(table, query) == classify.full_ncm_predict(
            scaled, scale * query
        )
        candidates = [1, 3, 5]
        assert classify.ncm_predict(table, candidates, query) == classify.ncm_predict(
            scaled, candidates, scale * query
        )
