"""Watch-log ingestion and the implicit-feedback data pipeline.

Raw logs arrive as delimited text, either one watch event per line
(``user_id,item_id``) or pre-aggregated (``user_id,item_id,count``).
They are aggregated into a sparse user-by-item count table, converted
to per-item percentile ratings, expanded into per-user like/confidence
vectors, and split per user into train and held-out portions.

All text formats use ``,`` as the field separator, ``#`` for comment
lines, and ``.`` as the decimal separator. User and item ids are opaque
non-empty strings and are assigned contiguous indices in order of first
appearance.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ParseError, ValidationError
from .util import new_rng

FORMAT_EVENTS = "event-per-line"
FORMAT_COUNTS = "pre-aggregated"


@dataclass
class InteractionTable:
    """Aggregated watch counts with contiguous user/item index maps."""

    users: list[str]
    items: list[str]
    counts: sp.csr_matrix
    user_index: dict[str, int] = field(init=False, repr=False)
    item_index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        if self.counts.shape != (len(self.users), len(self.items)):
            raise ValidationError(
                f"count matrix shape {self.counts.shape} does not match "
                f"{len(self.users)} users x {len(self.items)} items"
            )
        self.user_index = {u: i for i, u in enumerate(self.users)}
        self.item_index = {m: i for i, m in enumerate(self.items)}

    @property
    def n_users(self):
        return len(self.users)

    @property
    def n_items(self):
        return len(self.items)


@dataclass
class RelativeRatingTable:
    """Per-item percentile ratings; stored values lie in (0, 1]."""

    users: list[str]
    items: list[str]
    values: sp.csr_matrix
    user_index: dict[str, int] = field(init=False, repr=False)
    item_index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        if self.values.shape != (len(self.users), len(self.items)):
            raise ValidationError(
                f"rating matrix shape {self.values.shape} does not match "
                f"{len(self.users)} users x {len(self.items)} items"
            )
        if self.values.nnz:
            lo = self.values.data.min()
            hi = self.values.data.max()
            if lo <= 0.0 or hi > 1.0:
                raise ValidationError(
                    f"relative ratings must lie in (0, 1], found range [{lo}, {hi}]"
                )
        self.user_index = {u: i for i, u in enumerate(self.users)}
        self.item_index = {m: i for i, m in enumerate(self.items)}

    @property
    def n_users(self):
        return len(self.users)

    @property
    def n_items(self):
        return len(self.items)


@dataclass
class UserFeedback:
    """One user's model input: binary likes and per-item confidences.

    ``likes`` is an int8 vector over all items (1 where the user watched),
    ``confidences`` is 1 everywhere and 1 + alpha * rating on watched
    items, and ``observed`` lists the watched item indices in increasing
    order.
    """

    likes: np.ndarray
    confidences: np.ndarray
    observed: np.ndarray


@dataclass
class SplitPair:
    """Per-user holdout split of a rating table."""

    train: RelativeRatingTable
    test: RelativeRatingTable
    fraction: float
    seed: int


def _parse_lines(lines, fmt):
    if fmt not in (FORMAT_EVENTS, FORMAT_COUNTS):
        raise ValidationError(f"unknown event-log format: {fmt!r}")
    want = 2 if fmt == FORMAT_EVENTS else 3
    users: list[str] = []
    items: list[str] = []
    user_index: dict[str, int] = {}
    item_index: dict[str, int] = {}
    totals: dict[tuple[int, int], int] = {}
    for line_no, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n").rstrip("\r")
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        if len(parts) != want:
            raise ParseError(
                f"expected {want} comma-separated fields, got {len(parts)}", line_no
            )
        user, item = parts[0], parts[1]
        if not user:
            raise ParseError("empty user id", line_no)
        if not item:
            raise ParseError("empty item id", line_no)
        if fmt == FORMAT_EVENTS:
            count = 1
        else:
            try:
                count = int(parts[2], 10)
            except ValueError:
                raise ParseError(f"count is not an integer: {parts[2]!r}", line_no) from None
            if count < 0:
                raise ValidationError(f"line {line_no}: negative count {count}")
        u = user_index.get(user)
        if u is None:
            u = user_index[user] = len(users)
            users.append(user)
        i = item_index.get(item)
        if i is None:
            i = item_index[item] = len(items)
            items.append(item)
        if count:
            key = (u, i)
            totals[key] = totals.get(key, 0) + count
    return users, items, totals


def ingest(lines, fmt=FORMAT_EVENTS):
    """Aggregate an event-log line stream into an InteractionTable.

    Repeated (user, item) pairs sum. Zero counts in pre-aggregated input
    register the ids but store nothing. An empty stream yields an empty
    table.
    """
    users, items, totals = _parse_lines(lines, fmt)
    shape = (len(users), len(items))
    if totals:
        keys = sorted(totals)
        rows = np.fromiter((k[0] for k in keys), dtype=np.int64, count=len(keys))
        cols = np.fromiter((k[1] for k in keys), dtype=np.int64, count=len(keys))
        vals = np.fromiter((totals[k] for k in keys), dtype=np.int64, count=len(keys))
        counts = sp.csr_matrix((vals, (rows, cols)), shape=shape, dtype=np.int64)
    else:
        counts = sp.csr_matrix(shape, dtype=np.int64)
    return InteractionTable(users, items, counts)


def relative_ratings(table):
    """Convert counts to per-item relative ratings.

    For each stored count, the rating is the fraction of the item's
    watchers whose count is less than or equal to it (the user included),
    so every item's heaviest watcher gets exactly 1 and values never
    reach 0.
    """
    if table.counts.nnz == 0:
        raise ValidationError("cannot compute relative ratings of an empty table")
    csc = table.counts.tocsc()
    indptr = csc.indptr
    data = np.empty(csc.nnz, dtype=np.float64)
    for j in range(table.n_items):
        start, end = indptr[j], indptr[j + 1]
        if start == end:
            continue
        col = csc.data[start:end]
        ordered = np.sort(col)
        data[start:end] = np.searchsorted(ordered, col, side="right") / (end - start)
    values = sp.csc_matrix((data, csc.indices.copy(), indptr.copy()), shape=csc.shape)
    return RelativeRatingTable(table.users, table.items, values.tocsr())


def _feedback_from_sparse(indices, values, alpha, item_count):
    likes = np.zeros(item_count, dtype=np.int8)
    confidences = np.ones(item_count, dtype=np.float64)
    likes[indices] = 1
    confidences[indices] = 1.0 + alpha * values
    observed = np.sort(np.asarray(indices, dtype=np.int64))
    return UserFeedback(likes, confidences, observed)


def build_feedback(ratings, alpha, item_count=None):
    """Expand one user's rating vector into a UserFeedback.

    ``ratings`` is either a dense vector of length ``item_count`` with
    zeros at unobserved items, or a 1-row sparse matrix. ``alpha``
    scales the confidence of observed items and must be non-negative.
    """
    if alpha < 0:
        raise ValidationError(f"alpha must be non-negative, got {alpha}")
    if sp.issparse(ratings):
        row = ratings.tocsr()
        if row.shape[0] != 1:
            raise ValidationError("expected a single rating row")
        if item_count is not None and row.shape[1] != item_count:
            raise ValidationError(
                f"rating row has {row.shape[1]} items, expected {item_count}"
            )
        indices, values = row.indices, row.data
        item_count = row.shape[1]
    else:
        dense = np.asarray(ratings, dtype=np.float64)
        if dense.ndim != 1:
            raise ValidationError("expected a 1-d rating vector")
        if item_count is not None and dense.shape[0] != item_count:
            raise ValidationError(
                f"rating vector has {dense.shape[0]} items, expected {item_count}"
            )
        item_count = dense.shape[0]
        indices = np.flatnonzero(dense)
        values = dense[indices]
    values = np.asarray(values, dtype=np.float64)
    if values.size and (values.min() < 0.0 or values.max() > 1.0):
        raise ValidationError("ratings must lie in [0, 1]")
    keep = values > 0.0
    return _feedback_from_sparse(
        np.asarray(indices)[keep], values[keep], float(alpha), item_count
    )


def user_feedback(table, user, alpha):
    """Feedback vector for one user of a RelativeRatingTable."""
    csr = table.values
    start, end = csr.indptr[user], csr.indptr[user + 1]
    if alpha < 0:
        raise ValidationError(f"alpha must be non-negative, got {alpha}")
    return _feedback_from_sparse(
        csr.indices[start:end], csr.data[start:end], float(alpha), table.n_items
    )


def all_feedback(table, alpha):
    """Feedback vectors for every user, in user-index order."""
    return [user_feedback(table, u, alpha) for u in range(table.n_users)]


def holdout_split(ratings, fraction, seed):
    """Hold out ceil(fraction * n_u) of each user's items for testing.

    Users with a single rating keep it in the training half. The split is
    a function of ``seed`` alone; item selection is uniform per user.
    """
    if not 0.0 < fraction < 1.0:
        raise ValidationError(f"holdout fraction must lie in (0, 1), got {fraction}")
    csr = ratings.values
    indptr = csr.indptr
    row_sizes = np.diff(indptr)
    if ratings.n_users and row_sizes.min() < 1:
        bad = ratings.users[int(np.argmin(row_sizes))]
        raise ValidationError(f"user {bad!r} has no stored ratings")
    rng = new_rng(seed)
    keep_mask = np.ones(csr.nnz, dtype=bool)
    for u in range(ratings.n_users):
        start, end = indptr[u], indptr[u + 1]
        n = end - start
        if n < 2:
            continue
        k = math.ceil(fraction * n)
        held = rng.choice(n, size=k, replace=False)
        keep_mask[start + held] = False

    def _subset(mask):
        coo = csr.tocoo()
        mat = sp.csr_matrix(
            (coo.data[mask], (coo.row[mask], coo.col[mask])), shape=csr.shape
        )
        return RelativeRatingTable(ratings.users, ratings.items, mat)

    return SplitPair(_subset(keep_mask), _subset(~keep_mask), float(fraction), int(seed))


def write_counts(table, path):
    """Write a table as pre-aggregated ``user_id,item_id,count`` lines."""
    csr = table.counts
    with open(path, "w", encoding="utf-8") as fh:
        for u in range(table.n_users):
            start, end = csr.indptr[u], csr.indptr[u + 1]
            user = table.users[u]
            for i, v in zip(csr.indices[start:end], csr.data[start:end]):
                fh.write(f"{user},{table.items[i]},{v}\n")


def read_counts(path):
    """Read a pre-aggregated count file back into an InteractionTable."""
    with open(path, "r", encoding="utf-8") as fh:
        return ingest(fh, FORMAT_COUNTS)


def write_ratings(table, path):
    """Write ``user_id,item_id,relative_rating`` lines (repr floats)."""
    csr = table.values
    with open(path, "w", encoding="utf-8") as fh:
        for u in range(table.n_users):
            start, end = csr.indptr[u], csr.indptr[u + 1]
            user = table.users[u]
            for i, v in zip(csr.indices[start:end], csr.data[start:end]):
                fh.write(f"{user},{table.items[i]},{float(v)!r}\n")


def _parse_rating_lines(path):
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise ParseError(
                    f"expected 3 comma-separated fields, got {len(parts)}", line_no
                )
            user, item, text = parts
            if not user or not item:
                raise ParseError("empty id", line_no)
            try:
                value = float(text)
            except ValueError:
                raise ParseError(f"bad rating value: {text!r}", line_no) from None
            yield line_no, user, item, value


def read_ratings(path):
    """Read a rating file, assigning indices by first appearance."""
    users: list[str] = []
    items: list[str] = []
    user_index: dict[str, int] = {}
    item_index: dict[str, int] = {}
    entries: dict[tuple[int, int], float] = {}
    for line_no, user, item, value in _parse_rating_lines(path):
        u = user_index.get(user)
        if u is None:
            u = user_index[user] = len(users)
            users.append(user)
        i = item_index.get(item)
        if i is None:
            i = item_index[item] = len(items)
            items.append(item)
        if (u, i) in entries:
            raise ValidationError(f"line {line_no}: duplicate entry for {user},{item}")
        entries[(u, i)] = value
    shape = (len(users), len(items))
    if entries:
        keys = sorted(entries)
        rows = np.fromiter((k[0] for k in keys), dtype=np.int64, count=len(keys))
        cols = np.fromiter((k[1] for k in keys), dtype=np.int64, count=len(keys))
        vals = np.fromiter((entries[k] for k in keys), dtype=np.float64, count=len(keys))
        mat = sp.csr_matrix((vals, (rows, cols)), shape=shape)
    else:
        mat = sp.csr_matrix(shape, dtype=np.float64)
    return RelativeRatingTable(users, items, mat)


def read_ratings_against(path, base):
    """Read a rating file onto an existing table's index maps.

    Entries naming users or items unknown to ``base`` cannot be scored by
    a model trained on ``base``; they are skipped and counted. Returns
    ``(table, n_unmapped)``.
    """
    entries: dict[tuple[int, int], float] = {}
    n_unmapped = 0
    for line_no, user, item, value in _parse_rating_lines(path):
        u = base.user_index.get(user)
        i = base.item_index.get(item)
        if u is None or i is None:
            n_unmapped += 1
            continue
        if (u, i) in entries:
            raise ValidationError(f"line {line_no}: duplicate entry for {user},{item}")
        entries[(u, i)] = value
    shape = (base.n_users, base.n_items)
    if entries:
        keys = sorted(entries)
        rows = np.fromiter((k[0] for k in keys), dtype=np.int64, count=len(keys))
        cols = np.fromiter((k[1] for k in keys), dtype=np.int64, count=len(keys))
        vals = np.fromiter((entries[k] for k in keys), dtype=np.float64, count=len(keys))
        mat = sp.csr_matrix((vals, (rows, cols)), shape=shape)
    else:
        mat = sp.csr_matrix(shape, dtype=np.float64)
    return RelativeRatingTable(base.users, base.items, mat), n_unmapped


def write_split(split, train_path, test_path, meta_path):
    """Write both halves of a split plus a JSON metadata sidecar."""
    write_ratings(split.train, train_path)
    write_ratings(split.test, test_path)
    meta = {
        "fraction": split.fraction,
        "seed": split.seed,
        "n_train_pairs": int(split.train.values.nnz),
        "n_test_pairs": int(split.test.values.nnz),
        "n_users": split.train.n_users,
        "n_items": split.train.n_items,
    }
    with open(meta_path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_split_meta(meta_path):
    with open(meta_path, "r", encoding="utf-8") as fh:
        return json.load(fh)
