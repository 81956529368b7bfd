"""Synthetic watch-count generator with planted low-rank structure.

Users and items get latent factor vectors; their inner product plus an
item popularity offset forms an affinity surface. Each user watches a
density-controlled number of items, biased toward high affinity, and
watch counts grow with affinity, so the planted structure is recoverable
by the models and usable for end-to-end checks.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .errors import ValidationError
from .interactions import InteractionTable
from .util import new_rng


def _affinity(rng, n_users, n_items, n_factors, popularity):
    X = rng.standard_normal((n_users, n_factors))
    Y = rng.standard_normal((n_items, n_factors))
    pop = rng.standard_normal(n_items) * popularity
    S = X @ Y.T / np.sqrt(n_factors) + pop
    return (S - S.mean()) / S.std()


def planted_affinity(n_users, n_items, n_factors, seed, popularity=0.8):
    """The standardized affinity surface a given seed plants."""
    return _affinity(new_rng(seed), n_users, n_items, n_factors, popularity)


def synth_counts(
    n_users,
    n_items,
    n_factors,
    density,
    seed,
    popularity=0.8,
    temperature=0.7,
    count_curve=2.5,
):
    """Generate a synthetic InteractionTable.

    ``density`` sets the expected fraction of items each user watches
    (every user watches at least one item unless density is 0, which
    yields an empty table). Item choice follows a softmax over affinity
    with the given temperature, and counts are 1 plus a Poisson draw
    whose rate rises with affinity.
    """
    if n_users < 1 or n_items < 1 or n_factors < 1:
        raise ValidationError("need at least 1 user, 1 item, and 1 factor")
    if not 0.0 <= density <= 1.0:
        raise ValidationError(f"density must lie in [0, 1], got {density}")
    rng = new_rng(seed)
    S = _affinity(rng, n_users, n_items, n_factors, popularity)
    sizes = rng.binomial(n_items, density, size=n_users)
    if density > 0.0:
        sizes = np.maximum(sizes, 1)
    rows = []
    cols = []
    vals = []
    for u in range(n_users):
        n = int(sizes[u])
        if n == 0:
            continue
        keys = S[u] / temperature + rng.gumbel(size=n_items)
        chosen = np.argpartition(-keys, n - 1)[:n]
        chosen.sort()
        rates = np.exp(count_curve * S[u, chosen])
        counts = 1 + rng.poisson(rates)
        rows.append(np.full(n, u, dtype=np.int64))
        cols.append(chosen.astype(np.int64))
        vals.append(counts.astype(np.int64))
    users = [f"u{u:05d}" for u in range(n_users)]
    items = [f"m{i:05d}" for i in range(n_items)]
    shape = (n_users, n_items)
    if rows:
        mat = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=shape,
            dtype=np.int64,
        )
    else:
        mat = sp.csr_matrix(shape, dtype=np.int64)
    return InteractionTable(users, items, mat)
