"""Weighted matrix factorization of binarized preferences (ALS).

Every (user, item) cell contributes to the objective: observed cells
carry preference 1 with confidence 1 + alpha * rating, unobserved cells
carry preference 0 with confidence 1. Each alternating solve handles the
dense unobserved mass through a shared Gram matrix and corrects it with
the user's (or item's) few observed rows, so a sweep costs far less than
materializing the dense confidence matrix.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .util import new_rng


@dataclass
class ImfModel:
    user_factors: np.ndarray
    item_factors: np.ndarray
    lam: float
    alpha: float

    @property
    def n_users(self):
        return self.user_factors.shape[0]

    @property
    def n_items(self):
        return self.item_factors.shape[0]

    @property
    def n_factors(self):
        return self.user_factors.shape[1]


def imf_objective(X, Y, ratings_csr, alpha, lam):
    """Full weighted squared-error objective, without densifying.

    sum over all cells of c * (t - x.y)^2 splits into a dense term
    sum((x.y)^2) computed through the Gram matrix of Y, plus per-observed
    corrections, plus the L2 penalty.
    """
    G = Y.T @ Y
    dense = float(np.einsum("uf,fg,ug->", X, G, X))
    coo = ratings_csr.tocoo()
    if coo.nnz:
        pred = np.einsum("nf,nf->n", X[coo.row], Y[coo.col])
        conf = 1.0 + alpha * coo.data
        obs = float(np.sum(conf * (1.0 - pred) ** 2 - pred**2))
    else:
        obs = 0.0
    reg = lam * (float(np.sum(X * X)) + float(np.sum(Y * Y)))
    return dense + obs + reg


def _solve_rows(target, source, indptr, indices, conf, lam, lo, hi):
    F = source.shape[1]
    G = source.T @ source + lam * np.eye(F)
    for row in range(lo, hi):
        start, end = indptr[row], indptr[row + 1]
        if start == end:
            target[row] = 0.0
            continue
        idx = indices[start:end]
        cu = conf[start:end]
        sub = source[idx]
        lhs = G + sub.T @ ((cu - 1.0)[:, None] * sub)
        rhs = sub.T @ cu
        target[row] = np.linalg.solve(lhs, rhs)


def _half_sweep(target, source, indptr, indices, conf, lam, threads):
    n_rows = target.shape[0]
    if threads <= 1 or n_rows < 2 * threads:
        _solve_rows(target, source, indptr, indices, conf, lam, 0, n_rows)
        return
    bounds = np.linspace(0, n_rows, threads + 1).astype(int)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [
            pool.submit(
                _solve_rows, target, source, indptr, indices, conf, lam, lo, hi
            )
            for lo, hi in zip(bounds[:-1], bounds[1:])
            if hi > lo
        ]
        for fut in futures:
            fut.result()


def imf_train(train, alpha, factors=256, lam=0.1, iterations=15, seed=0, threads=1):
    """Alternate least-squares sweeps from a small random item init.

    Item factors start uniform in [-0.01, 0.01] (seeded), user factors at
    zero; users are solved first. Returns the model and the objective
    trace: the initial value followed by one entry after every half
    sweep, which is non-increasing because each half sweep solves its
    subproblem exactly.
    """
    if train.values.nnz == 0:
        raise ValidationError("cannot factorize an empty rating table")
    if alpha < 0:
        raise ValidationError(f"alpha must be non-negative, got {alpha}")
    if lam <= 0:
        raise ValidationError(f"regularization must be positive, got {lam}")
    if factors < 1:
        raise ValidationError(f"need at least 1 factor, got {factors}")
    if iterations < 1:
        raise ValidationError(f"need at least 1 iteration, got {iterations}")
    csr = train.values.tocsr()
    csc = train.values.tocsc()
    U, M = csr.shape
    rng = new_rng(seed)
    Y = rng.uniform(-0.01, 0.01, size=(M, factors))
    X = np.zeros((U, factors))
    user_conf = 1.0 + alpha * csr.data
    item_conf = 1.0 + alpha * csc.data
    trace = [imf_objective(X, Y, csr, alpha, lam)]
    for _ in range(iterations):
        _half_sweep(X, Y, csr.indptr, csr.indices, user_conf, lam, threads)
        trace.append(imf_objective(X, Y, csr, alpha, lam))
        _half_sweep(Y, X, csc.indptr, csc.indices, item_conf, lam, threads)
        trace.append(imf_objective(X, Y, csr, alpha, lam))
    return ImfModel(X, Y, float(lam), float(alpha)), trace


def imf_predict(model, user):
    """Preference scores for every item for one user index."""
    if not 0 <= user < model.n_users:
        raise ValidationError(
            f"user index {user} out of range for {model.n_users} users"
        )
    return model.item_factors @ model.user_factors[user]
