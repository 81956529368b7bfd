"""Data pipeline tests: parsing, aggregation, ratings, splits, file round-trips."""

import json
import math

import numpy as np
import pytest

from conftest import cell_map, ratings_from_dense, table_from_dense, table_from_lines
from nadecf import (
    ParseError,
    ValidationError,
    all_feedback,
    build_feedback,
    holdout_split,
    ingest,
    read_counts,
    read_ratings,
    read_ratings_against,
    relative_ratings,
    user_feedback,
    write_counts,
    write_ratings,
    write_split,
)


def brute_relative(dense):
    """Per-item percentile of each watcher's count, by double loop."""
    dense = np.asarray(dense)
    out = np.zeros(dense.shape, dtype=np.float64)
    n_users, n_items = dense.shape
    for i in range(n_items):
        watchers = [u for u in range(n_users) if dense[u, i] > 0]
        for u in watchers:
            at_or_below = sum(1 for v in watchers if dense[v, i] <= dense[u, i])
            out[u, i] = at_or_below / len(watchers)
    return out


class TestIngest:
    def test_event_lines_aggregate(self):
        text = "a,x\nb,x\na,x\na,y\n"
        table = ingest(text.splitlines(), "event-per-line")
        assert table.users == ["a", "b"]
        assert table.items == ["x", "y"]
        dense = table.counts.toarray()
        assert dense.tolist() == [[2, 1], [1, 0]]

    def test_preaggregated_sums_repeats(self):
        table = table_from_lines("a,x,5\na,x,2\nb,y,1\n")
        assert table.counts[0, 0] == 7
        assert table.counts[1, 1] == 1

    def test_comments_and_blank_lines_skipped(self):
        table = table_from_lines("# header\na,x,3\n\n# tail\nb,x,1\n")
        assert table.counts.nnz == 2

    def test_first_appearance_indexing(self):
        table = ingest(["z,q", "a,p", "z,p"], "event-per-line")
        assert table.users == ["z", "a"]
        assert table.items == ["q", "p"]
        assert table.user_index["a"] == 1

    def test_zero_count_registers_ids_only(self):
        table = table_from_lines("a,x,0\nb,y,2\n")
        assert table.n_users == 2 and table.n_items == 2
        assert table.counts.nnz == 1
        assert table.counts[0, 0] == 0

    def test_negative_count_is_validation_error(self):
        with pytest.raises(ValidationError, match="line 2"):
            table_from_lines("a,x,1\nb,y,-3\n")

    def test_wrong_arity_reports_line(self):
        with pytest.raises(ParseError, match="line 2"):
            ingest(["a,x", "a,x,y,z"], "event-per-line")

    def test_bad_count_is_parse_error(self):
        with pytest.raises(ParseError, match="line 1"):
            table_from_lines("a,x,lots\n")

    def test_empty_id_rejected(self):
        with pytest.raises(ParseError):
            ingest([",x"], "event-per-line")
        with pytest.raises(ParseError):
            ingest(["a,"], "event-per-line")

    def test_empty_stream_gives_empty_table(self):
        table = ingest([], "event-per-line")
        assert table.n_users == 0 and table.n_items == 0
        assert table.counts.nnz == 0

    def test_unknown_format_rejected(self):
        with pytest.raises(ValidationError):
            ingest(["a,x"], "csv")

    def test_crlf_lines_accepted(self):
        table = ingest(["a,x,2\r\n", "b,x,1\r\n"], "pre-aggregated")
        assert table.counts[0, 0] == 2


class TestRelativeRatings:
    def test_thousand_watcher_example(self):
        # one item: 99 watchers below the probe user, the probe at 100,
        # and 900 heavier watchers, so 100 of 1000 are at or below.
        counts = np.zeros((1000, 1), dtype=np.int64)
        counts[:99, 0] = np.arange(1, 100)
        counts[99, 0] = 100
        counts[100:, 0] = np.arange(101, 1001)
        ratings = relative_ratings(table_from_dense(counts))
        assert ratings.values[99, 0] == 0.1

    def test_matches_brute_force(self, rng):
        for _ in range(30):
            n_users = int(rng.integers(1, 21))
            n_items = int(rng.integers(1, 11))
            dense = rng.integers(0, 10, size=(n_users, n_items))
            if dense.sum() == 0:
                dense[0, 0] = 1
            got = relative_ratings(table_from_dense(dense)).values.toarray()
            np.testing.assert_array_equal(got, brute_relative(dense))

    def test_heaviest_watcher_scores_one(self, rng):
        dense = rng.integers(0, 6, size=(12, 7))
        dense[0] = 1  # ensure every item has a watcher
        values = relative_ratings(table_from_dense(dense)).values.toarray()
        assert np.all(values.max(axis=0) == 1.0)

    def test_ties_share_the_upper_fraction(self):
        values = relative_ratings(table_from_dense([[3], [3]])).values
        assert values[0, 0] == 1.0 and values[1, 0] == 1.0

    def test_pattern_preserved(self, rng):
        dense = rng.integers(0, 4, size=(9, 5))
        dense[0, 0] = 2
        table = table_from_dense(dense)
        ratings = relative_ratings(table)
        assert (ratings.values.toarray() > 0).tolist() == (dense > 0).tolist()

    def test_empty_table_rejected(self):
        with pytest.raises(ValidationError):
            relative_ratings(table_from_dense(np.zeros((3, 2), dtype=int)))


class TestFeedback:
    def test_confidence_formula(self):
        fb = build_feedback([0.5, 0.0, 1.0], alpha=4.0)
        assert fb.likes.tolist() == [1, 0, 1]
        np.testing.assert_allclose(fb.confidences, [3.0, 1.0, 5.0])
        assert fb.observed.tolist() == [0, 2]

    def test_sparse_row_matches_dense(self, rng):
        dense = np.where(rng.random(15) < 0.4, rng.random(15), 0.0)
        import scipy.sparse as sp

        a = build_feedback(dense, alpha=7.0)
        b = build_feedback(sp.csr_matrix(dense), alpha=7.0)
        np.testing.assert_array_equal(a.likes, b.likes)
        np.testing.assert_array_equal(a.confidences, b.confidences)
        np.testing.assert_array_equal(a.observed, b.observed)

    def test_alpha_zero_gives_unit_confidence(self):
        fb = build_feedback([0.3, 0.0, 0.9], alpha=0.0)
        np.testing.assert_array_equal(fb.confidences, np.ones(3))

    def test_negative_alpha_rejected(self):
        with pytest.raises(ValidationError):
            build_feedback([0.5], alpha=-1.0)

    def test_out_of_range_rating_rejected(self):
        with pytest.raises(ValidationError):
            build_feedback([1.5], alpha=1.0)
        with pytest.raises(ValidationError):
            build_feedback([-0.2], alpha=1.0)

    def test_user_feedback_reads_table_row(self):
        ratings = ratings_from_dense([[0.5, 0.0], [0.25, 1.0]])
        fb = user_feedback(ratings, 1, alpha=2.0)
        np.testing.assert_allclose(fb.confidences, [1.5, 3.0])
        assert fb.likes.tolist() == [1, 1]
        fbs = all_feedback(ratings, 2.0)
        assert len(fbs) == 2
        np.testing.assert_array_equal(fbs[1].confidences, fb.confidences)


class TestHoldoutSplit:
    def test_per_user_holdout_sizes(self, rng):
        dense = np.where(rng.random((40, 30)) < 0.5, rng.random((40, 30)), 0.0)
        dense[:, 0] = np.maximum(dense[:, 0], 0.01)  # no empty users
        ratings = ratings_from_dense(dense)
        split = holdout_split(ratings, 0.25, seed=3)
        train_rows = np.diff(split.train.values.indptr)
        test_rows = np.diff(split.test.values.indptr)
        for u in range(40):
            n = (dense[u] > 0).sum()
            expected = 0 if n < 2 else math.ceil(0.25 * n)
            assert test_rows[u] == expected
            assert train_rows[u] == n - expected

    def test_singleton_user_keeps_its_item(self):
        ratings = ratings_from_dense([[0.7, 0.0], [0.5, 1.0]])
        split = holdout_split(ratings, 0.5, seed=0)
        assert split.train.values[0, 0] == 0.7
        assert np.diff(split.test.values.indptr)[0] == 0

    def test_partition_preserves_values(self, rng):
        dense = np.where(rng.random((25, 12)) < 0.6, rng.random((25, 12)), 0.0)
        dense[:, 0] = np.maximum(dense[:, 0], 0.01)
        ratings = ratings_from_dense(dense)
        split = holdout_split(ratings, 0.3, seed=9)
        merged = (split.train.values + split.test.values).toarray()
        np.testing.assert_array_equal(merged, dense)
        overlap = split.train.values.multiply(split.test.values)
        assert overlap.nnz == 0

    def test_seed_determinism(self):
        dense = np.random.default_rng(1).random((30, 20))
        ratings = ratings_from_dense(dense)
        a = holdout_split(ratings, 0.1, seed=5)
        b = holdout_split(ratings, 0.1, seed=5)
        c = holdout_split(ratings, 0.1, seed=6)
        assert (a.test.values != b.test.values).nnz == 0
        assert (a.test.values != c.test.values).nnz > 0

    def test_fraction_bounds(self):
        ratings = ratings_from_dense([[0.5, 0.5]])
        for bad in (0.0, 1.0, -0.1, 2.0):
            with pytest.raises(ValidationError):
                holdout_split(ratings, bad, seed=0)

    def test_empty_user_rejected(self):
        ratings = ratings_from_dense([[0.5, 0.5], [0.0, 0.0]])
        with pytest.raises(ValidationError, match="u1"):
            holdout_split(ratings, 0.5, seed=0)

    def test_metadata_carried(self):
        ratings = ratings_from_dense([[0.5, 0.5, 1.0]])
        split = holdout_split(ratings, 0.4, seed=77)
        assert split.fraction == 0.4 and split.seed == 77


class TestFiles:
    def test_counts_round_trip(self, tmp_path, rng):
        dense = rng.integers(0, 5, size=(8, 6))
        dense[0, 0] = 1
        table = table_from_dense(dense)
        path = tmp_path / "counts.csv"
        write_counts(table, path)
        back = read_counts(path)
        assert back.users == table.users and back.items == table.items
        assert (back.counts != table.counts).nnz == 0

    def test_ratings_round_trip_is_lossless(self, tmp_path, rng):
        # indices may be renumbered by first appearance, but every
        # (user id, item id) cell must come back bit-exact
        dense = np.where(rng.random((10, 7)) < 0.5, rng.random((10, 7)), 0.0)
        dense[0, 0] = 1 / 3  # no finite decimal expansion
        ratings = ratings_from_dense(dense)
        path = tmp_path / "ratings.csv"
        write_ratings(ratings, path)
        back = read_ratings(path)
        assert cell_map(back) == cell_map(ratings)

    def test_split_files_and_sidecar(self, tmp_path, rng):
        dense = np.where(rng.random((12, 9)) < 0.7, rng.random((12, 9)), 0.0)
        dense[:, 0] = np.maximum(dense[:, 0], 0.01)
        split = holdout_split(ratings_from_dense(dense), 0.2, seed=4)
        train_p = tmp_path / "train.csv"
        test_p = tmp_path / "test.csv"
        meta_p = tmp_path / "split.json"
        write_split(split, train_p, test_p, meta_p)
        meta = json.loads(meta_p.read_text())
        assert meta["fraction"] == 0.2 and meta["seed"] == 4
        assert meta["n_test_pairs"] == split.test.values.nnz
        train_back = read_ratings(train_p)
        test_back, unmapped = read_ratings_against(test_p, train_back)
        assert unmapped == 0
        assert test_back.values.nnz == split.test.values.nnz

    def test_read_against_skips_unknown_ids(self, tmp_path):
        base = ratings_from_dense([[0.5, 1.0]])
        other = tmp_path / "other.csv"
        other.write_text("u0,i1,0.25\nghost,i0,0.5\nu0,alien,0.75\n")
        table, unmapped = read_ratings_against(other, base)
        assert unmapped == 2
        assert table.values.nnz == 1 and table.values[0, 1] == 0.25

    def test_duplicate_rating_rejected(self, tmp_path):
        path = tmp_path / "dup.csv"
        path.write_text("a,x,0.5\na,x,0.6\n")
        with pytest.raises(ValidationError, match="duplicate"):
            read_ratings(path)

    def test_rating_out_of_range_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,x,1.5\n")
        with pytest.raises(ValidationError):
            read_ratings(path)
