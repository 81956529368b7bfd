"""Ranking evaluation: percentile ranks and mean percentage ranking.

For each user, candidate items (by default everything the user did not
watch in training) are sorted by model score; each held-out item lands
at a percentile between 0 (ranked first) and 100 (ranked last), with
ties averaged. MPR is the mean of those percentiles weighted by the
held-out relative ratings, so a random scorer sits near 50 and smaller
is better.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .errors import ValidationError
from .imf import imf_predict
from .interactions import user_feedback
from .model import predict_all


@dataclass
class RankResult:
    """Per-pair percentile records plus the weighted aggregate."""

    records: list[tuple[str, str, float, float]]
    mpr: float
    n_users: int
    n_pairs: int
    n_skipped: int
    n_unmapped: int = 0


def percentile_ranks(scores, targets):
    """Percentile of each target position within a descending score order.

    ``scores`` covers the candidate set; ``targets`` are positions into
    it. The best-scored candidate gets 0, the worst 100, and tied scores
    share the average of the positions they straddle.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 1:
        raise ValidationError("scores must be a 1-d vector")
    n = scores.shape[0]
    if n < 2:
        raise ValidationError(f"need at least 2 candidates to rank, got {n}")
    positions = np.asarray(list(targets), dtype=np.int64)
    if positions.size and (positions.min() < 0 or positions.max() >= n):
        raise ValidationError("target position outside the candidate set")
    order = rankdata(-scores, method="average")
    pct = 100.0 * (order - 1.0) / (n - 1)
    return {int(t): float(pct[t]) for t in positions}


def nade_scorer(model):
    """Scorer closure for :func:`mpr` over a trained like-vector model."""
    return lambda user, feedback: predict_all(model, feedback)


def imf_scorer(model):
    """Scorer closure for :func:`mpr` over a trained factorization."""
    return lambda user, feedback: imf_predict(model, user)


def mpr(scorer, split, alpha, include_observed=False, threads=1, n_unmapped=0):
    """Weighted mean percentile of held-out items under ``scorer``.

    ``scorer(user_index, feedback)`` returns a score for every item;
    scores of held-out items are ranked against the user's candidates.
    Users whose candidate set has fewer than 2 items are skipped and
    counted. Test cell values act purely as averaging weights.
    """
    train, test = split.train, split.test
    test_csr = test.values.tocsr()
    if test_csr.nnz == 0:
        raise ValidationError("test half of the split is empty")
    n_items = train.n_items
    all_items = np.arange(n_items)

    def rank_user(u):
        start, end = test_csr.indptr[u], test_csr.indptr[u + 1]
        if start == end:
            return None
        held = test_csr.indices[start:end]
        weights = test_csr.data[start:end]
        feedback = user_feedback(train, u, alpha)
        if include_observed:
            candidates = all_items
        else:
            mask = np.ones(n_items, dtype=bool)
            mask[feedback.observed] = False
            candidates = np.flatnonzero(mask)
        if candidates.shape[0] < 2:
            return "skipped"
        positions = np.searchsorted(candidates, held)
        if positions.max() >= candidates.shape[0] or not np.array_equal(
            candidates[positions], held
        ):
            raise ValidationError(
                f"held-out item for user {train.users[u]!r} is observed in training"
            )
        scores = np.asarray(scorer(u, feedback), dtype=np.float64)
        if scores.shape != (n_items,):
            raise ValidationError(
                f"scorer returned {scores.shape}, expected ({n_items},)"
            )
        pct = percentile_ranks(scores[candidates], positions)
        return [
            (train.users[u], train.items[i], pct[int(p)], float(w))
            for i, p, w in zip(held, positions, weights)
        ]

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(rank_user, range(train.n_users)))
    else:
        outcomes = [rank_user(u) for u in range(train.n_users)]

    records = []
    n_users = 0
    n_skipped = 0
    for out in outcomes:
        if out is None:
            continue
        if out == "skipped":
            n_skipped += 1
            continue
        records.extend(out)
        n_users += 1
    if not records:
        raise ValidationError("no rankable held-out pairs (all users skipped)")
    ranks = np.array([r[2] for r in records])
    weights = np.array([r[3] for r in records])
    value = float(weights @ ranks / weights.sum())
    return RankResult(records, value, n_users, len(records), n_skipped, n_unmapped)


def write_report(result, path):
    """Per-pair CSV with a trailing MPR footer line."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("user_id,item_id,percentile_rank,weight\n")
        for user, item, rank, weight in result.records:
            fh.write(f"{user},{item},{rank!r},{weight!r}\n")
        fh.write(f"MPR,{result.mpr!r}\n")


def write_summary(result, path):
    """Machine-readable aggregate of a ranking run."""
    payload = {
        "mpr": result.mpr,
        "n_users": result.n_users,
        "n_pairs": result.n_pairs,
        "n_skipped": result.n_skipped,
        "n_unmapped": result.n_unmapped,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
