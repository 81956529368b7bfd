"""Percentile ranking and MPR against hand-computed and brute-force oracles."""

import json

import numpy as np
import pytest

from nadecf import (
    SplitPair,
    ValidationError,
    holdout_split,
    imf_scorer,
    imf_train,
    init_model,
    mpr,
    nade_scorer,
    percentile_ranks,
    write_report,
    write_summary,
)

from conftest import ratings_from_dense


def brute_percentile(scores, target):
    """Count-based percentile: strictly-better plus half the other ties."""
    n = len(scores)
    better = sum(1 for s in scores if s > scores[target])
    ties = sum(1 for s in scores if s == scores[target])
    return 100.0 * (better + (ties - 1) / 2) / (n - 1)


def two_user_split():
    """Two users, four items, one held-out pair each."""
    train = ratings_from_dense([[0.5, 0, 0, 0], [0, 1.0, 0, 0]])
    test = ratings_from_dense([[0, 0, 0.5, 0], [0, 0, 0, 0.25]])
    return SplitPair(train, test, 0.25, 0)


class TestPercentileRanks:
    def test_extremes_without_ties(self):
        pct = percentile_ranks([9.0, 5.0, 1.0, 3.0], [0, 1, 2, 3])
        assert pct[0] == 0.0
        assert pct[2] == 100.0
        assert pct[1] == pytest.approx(100.0 / 3)

    def test_ties_share_average(self):
        pct = percentile_ranks([0.9, 0.4, 0.4, 0.1, 0.7], range(5))
        assert pct[1] == pct[2] == pytest.approx(62.5)
        assert pct[0] == 0.0 and pct[3] == 100.0 and pct[4] == 25.0

    def test_matches_brute_force_with_ties(self, rng):
        for _ in range(30):
            n = int(rng.integers(2, 25))
            scores = np.round(rng.random(n), 1)  # coarse grid forces ties
            targets = rng.choice(n, size=int(rng.integers(1, n + 1)), replace=False)
            pct = percentile_ranks(scores, targets)
            for t in targets:
                assert pct[int(t)] == pytest.approx(brute_percentile(scores, int(t)))

    def test_invariant_under_monotone_transform(self, rng):
        scores = rng.normal(size=15)
        a = percentile_ranks(scores, range(15))
        b = percentile_ranks(np.exp(3.0 * scores + 1.0), range(15))
        for t in range(15):
            assert a[t] == pytest.approx(b[t])

    def test_validation(self):
        with pytest.raises(ValidationError):
            percentile_ranks([1.0], [0])
        with pytest.raises(ValidationError):
            percentile_ranks([[1.0, 2.0]], [0])
        with pytest.raises(ValidationError):
            percentile_ranks([1.0, 2.0], [2])


class TestMpr:
    def test_hand_worked_two_users(self):
        split = two_user_split()
        fixed = {0: [9.0, 3.0, 2.0, 1.0], 1: [1.0, 9.0, 3.0, 5.0]}
        result = mpr(lambda u, fb: np.array(fixed[u]), split, alpha=1.0)
        # u0: candidates are items 1,2,3; held-out item 2 ranks second of
        # three -> 50. u1: candidates 0,2,3; item 3 scores highest -> 0.
        assert result.mpr == pytest.approx((0.5 * 50.0 + 0.25 * 0.0) / 0.75)
        assert result.n_users == 2
        assert result.n_pairs == 2
        assert result.n_skipped == 0
        assert ("u0", "i2", 50.0, 0.5) in result.records

    def test_test_values_are_weights_only(self):
        split = two_user_split()
        doubled = SplitPair(
            split.train,
            ratings_from_dense([[0, 0, 1.0, 0], [0, 0, 0, 0.5]]),
            0.25,
            0,
        )
        fixed = {0: [9.0, 3.0, 2.0, 1.0], 1: [1.0, 9.0, 3.0, 5.0]}
        scorer = lambda u, fb: np.array(fixed[u])
        assert mpr(scorer, split, 1.0).mpr == pytest.approx(mpr(scorer, doubled, 1.0).mpr)

    def test_observed_items_excluded_by_default(self):
        split = two_user_split()
        seen = {}

        def scorer(u, fb):
            seen[u] = fb.observed.copy()
            return np.arange(4, dtype=float)

        result = mpr(scorer, split, alpha=1.0, include_observed=False)
        np.testing.assert_array_equal(seen[0], [0])
        np.testing.assert_array_equal(seen[1], [1])
        # with ascending scores item 3 always ranks first among candidates
        rec = {(r[0], r[1]): r[2] for r in result.records}
        assert rec[("u1", "i3")] == 0.0

    def test_include_observed_widens_candidate_set(self):
        split = two_user_split()
        scorer = lambda u, fb: np.arange(4, dtype=float)
        narrow = mpr(scorer, split, 1.0, include_observed=False)
        wide = mpr(scorer, split, 1.0, include_observed=True)
        # u0 held-out item 2: candidates grow from 3 to 4, rank 2nd of 4
        rec = {(r[0], r[1]): r[2] for r in wide.records}
        assert rec[("u0", "i2")] == pytest.approx(100.0 / 3)
        assert narrow.mpr != wide.mpr

    def test_user_without_test_rows_ignored(self):
        train = ratings_from_dense([[0.5, 0, 0], [0, 0.4, 0], [0.1, 0, 0]])
        test = ratings_from_dense([[0, 0, 0.5], [0, 0, 0.2], [0, 0, 0]])
        split = SplitPair(train, test, 0.3, 0)
        result = mpr(lambda u, fb: np.arange(3, dtype=float), split, 1.0)
        assert result.n_users == 2
        users = {r[0] for r in result.records}
        assert users == {"u0", "u1"}

    def test_small_candidate_sets_are_skipped(self):
        # u0 watched everything but item 2: only 1 candidate, skipped;
        # u1 still produces a record so the aggregate stays defined
        train = ratings_from_dense([[0.5, 0.25, 0], [0.5, 0, 0]])
        test = ratings_from_dense([[0, 0, 1.0], [0, 1.0, 0]])
        split = SplitPair(train, test, 0.5, 0)
        result = mpr(lambda u, fb: np.arange(3, dtype=float), split, 1.0)
        assert result.n_skipped == 1
        assert result.n_users == 1
        assert result.records[0][0] == "u1"

    def test_all_skipped_raises(self):
        train = ratings_from_dense([[0.5, 0.25, 0]])
        test = ratings_from_dense([[0, 0, 1.0]])
        with pytest.raises(ValidationError, match="skipped"):
            mpr(lambda u, fb: np.arange(3, dtype=float), SplitPair(train, test, 0.5, 0), 1.0)

    def test_empty_test_half_raises(self):
        train = ratings_from_dense([[0.5, 0.25]])
        test = ratings_from_dense([[0.0, 0.0]])
        with pytest.raises(ValidationError, match="empty"):
            mpr(lambda u, fb: np.arange(2, dtype=float), SplitPair(train, test, 0.1, 0), 1.0)

    def test_leaked_train_item_raises(self):
        train = ratings_from_dense([[0.5, 0.25, 0, 0]])
        test = ratings_from_dense([[0.4, 0, 0, 0]])  # item 0 is in the train row
        split = SplitPair(train, test, 0.5, 0)
        with pytest.raises(ValidationError, match="observed in training"):
            mpr(lambda u, fb: np.arange(4, dtype=float), split, 1.0)

    def test_bad_scorer_shape_raises(self):
        split = two_user_split()
        with pytest.raises(ValidationError, match="scorer returned"):
            mpr(lambda u, fb: np.arange(3, dtype=float), split, 1.0)

    def test_threads_match_serial(self, rng):
        dense = np.where(rng.random((30, 12)) < 0.4, 0.5, 0.0)
        table = ratings_from_dense(dense)
        split = holdout_split(table, 0.3, seed=1)
        fixed_scores = rng.normal(size=(30, 12))
        scorer = lambda u, fb: fixed_scores[u]
        serial = mpr(scorer, split, 2.0, threads=1)
        threaded = mpr(scorer, split, 2.0, threads=4)
        assert serial.records == threaded.records
        assert serial.mpr == threaded.mpr
        assert serial.n_skipped == threaded.n_skipped

    def test_random_scorer_sits_near_fifty(self, rng):
        dense = np.where(rng.random((200, 40)) < 0.35, 0.5, 0.0)
        table = ratings_from_dense(dense)
        split = holdout_split(table, 0.25, seed=3)
        scores = rng.normal(size=(200, 40))
        result = mpr(lambda u, fb: scores[u], split, 1.0)
        assert 40.0 < result.mpr < 60.0

    def test_unmapped_count_passthrough(self):
        split = two_user_split()
        result = mpr(lambda u, fb: np.arange(4, dtype=float), split, 1.0, n_unmapped=3)
        assert result.n_unmapped == 3


class TestScorers:
    def test_model_scorers_produce_valid_mpr(self, rng):
        dense = np.where(rng.random((25, 10)) < 0.5, 0.5, 0.0)
        table = ratings_from_dense(dense)
        split = holdout_split(table, 0.2, seed=0)
        nade = init_model(10, 4, seed=0)
        imf, _ = imf_train(split.train, alpha=2.0, factors=3, lam=0.1, iterations=2, seed=0)
        for scorer in (nade_scorer(nade), imf_scorer(imf)):
            result = mpr(scorer, split, alpha=2.0)
            assert 0.0 <= result.mpr <= 100.0
            assert result.n_pairs > 0


class TestReports:
    def test_report_file_layout(self, tmp_path):
        split = two_user_split()
        fixed = {0: [9.0, 3.0, 2.0, 1.0], 1: [1.0, 9.0, 3.0, 5.0]}
        result = mpr(lambda u, fb: np.array(fixed[u]), split, 1.0)
        path = tmp_path / "report.csv"
        write_report(result, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "user_id,item_id,percentile_rank,weight"
        assert lines[1] == "u0,i2,50.0,0.5"
        assert lines[-1] == f"MPR,{result.mpr!r}"
        assert len(lines) == 2 + result.n_pairs

    def test_summary_json(self, tmp_path):
        split = two_user_split()
        result = mpr(lambda u, fb: np.arange(4, dtype=float), split, 1.0, n_unmapped=2)
        path = tmp_path / "summary.json"
        write_summary(result, path)
        payload = json.loads(path.read_text())
        assert set(payload) == {"mpr", "n_users", "n_pairs", "n_skipped", "n_unmapped"}
        assert payload["mpr"] == pytest.approx(result.mpr)
        assert payload["n_unmapped"] == 2
