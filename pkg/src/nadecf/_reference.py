"""NumPy implementation of the per-user training kernel.

This is the portable fallback; ``nadecf._speedups`` implements the same
contract in Cython. Backend selection lives in :mod:`nadecf.kernels`.
"""

import numpy as np
from scipy.special import expit

PROB_EPS = 1e-12

ACT_TANH = 0
ACT_IDENTITY = 1


def ordered_nll_grad(W, A, V, b, d, activation, t, c, perm, split, gW, gA, gV, gb, gd):
    """Weighted NLL of the target part of one ordering, with gradients.

    Items before position ``split`` (1-based) in ``perm`` form the observed
    prefix; the remaining items are predicted. Each target item's negative
    log likelihood is weighted by its confidence, and the sum is scaled by
    M / n_targets so that a uniformly random (ordering, split) pair is an
    unbiased estimator of the full-chain cost averaged over orderings.

    Conditional probabilities are clamped to [PROB_EPS, 1 - PROB_EPS]
    before any logarithm; where the clamp binds, the corresponding
    gradient contribution is exactly zero (the clamped value is constant).

    Gradients are accumulated into the ``g*`` arrays so a caller can sum
    over a batch without intermediate copies. Returns the scalar loss.
    """
    M = W.shape[1]
    prefix = perm[: split - 1]
    targets = perm[split - 1 :]
    n_targets = targets.shape[0]
    if n_targets == 0:
        raise ValueError("ordering split leaves no target items")
    scale = M / n_targets

    liked = prefix[t[prefix] == 1]
    other = prefix[t[prefix] == 0]
    a = b + W[:, liked] @ c[liked] + A[:, other] @ c[other]
    h = np.tanh(a) if activation == ACT_TANH else a

    z = d[targets] + V[targets] @ h
    p = expit(z)
    clamped = (p < PROB_EPS) | (p > 1.0 - PROB_EPS)
    pc = np.clip(p, PROB_EPS, 1.0 - PROB_EPS)
    tt = t[targets].astype(np.float64)
    ct = c[targets]
    loss = scale * float(ct @ np.where(tt == 1.0, -np.log(pc), -np.log1p(-pc)))

    gz = scale * ct * (p - tt)
    gz[clamped] = 0.0
    gd[targets] += gz
    gV[targets] += gz[:, None] * h[None, :]
    dh = V[targets].T @ gz
    da = dh * (1.0 - h * h) if activation == ACT_TANH else dh
    gb += da
    gW[:, liked] += np.outer(da, c[liked])
    gA[:, other] += np.outer(da, c[other])
    return loss
