"""Autoregressive like-vector model: parameters, forward passes, training.

The model factors the joint probability of a user's binary like vector
into per-item conditionals along an item ordering. A single hidden layer
is shared by all conditionals: the hidden state depends only on the
*set* of items seen so far (weighted by confidence, routed through a
like matrix W or a dislike matrix A), which is what makes training over
random orderings coherent.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import ValidationError
from .interactions import UserFeedback
from .kernels import ACT_IDENTITY, ACT_TANH, PROB_EPS, ordered_nll_grad as _kernel
from .util import new_rng

ACTIVATIONS = ("tanh", "identity")
_ACT_CODES = {"tanh": ACT_TANH, "identity": ACT_IDENTITY}


@dataclass
class NadeModel:
    """Model parameters.

    W, A: hidden x items, like and dislike input paths.
    V, d: items x hidden and per-item bias, one output unit per item.
    b: hidden bias.
    """

    W: np.ndarray
    A: np.ndarray
    V: np.ndarray
    b: np.ndarray
    d: np.ndarray
    activation: str = "tanh"

    @property
    def n_items(self):
        return self.W.shape[1]

    @property
    def n_hidden(self):
        return self.W.shape[0]

    def validate(self):
        if self.activation not in _ACT_CODES:
            raise ValidationError(f"unknown activation: {self.activation!r}")
        H, M = self.W.shape
        if H < 1 or M < 1:
            raise ValidationError(f"degenerate parameter shape {self.W.shape}")
        if self.A.shape != (H, M):
            raise ValidationError(f"A has shape {self.A.shape}, expected {(H, M)}")
        if self.V.shape != (M, H):
            raise ValidationError(f"V has shape {self.V.shape}, expected {(M, H)}")
        if self.b.shape != (H,):
            raise ValidationError(f"b has shape {self.b.shape}, expected {(H,)}")
        if self.d.shape != (M,):
            raise ValidationError(f"d has shape {self.d.shape}, expected {(M,)}")
        for name in ("W", "A", "V", "b", "d"):
            arr = getattr(self, name)
            if not np.isfinite(arr).all():
                raise ValidationError(f"parameter {name} contains non-finite values")
        return self

    def copy(self):
        return NadeModel(
            self.W.copy(), self.A.copy(), self.V.copy(),
            self.b.copy(), self.d.copy(), self.activation,
        )


@dataclass
class Ordering:
    """A permutation of all item indices plus a 1-based split position.

    Items strictly before ``split`` form the conditioning prefix. The
    valid range is 1 (empty prefix) through M + 1 (everything observed,
    nothing left to predict), so a full pass over the chain can be
    expressed as well as any training split.
    """

    perm: np.ndarray
    split: int

    def validate(self, n_items):
        perm = np.asarray(self.perm)
        if perm.shape != (n_items,) or not np.array_equal(
            np.sort(perm), np.arange(n_items)
        ):
            raise ValidationError("perm is not a permutation of all item indices")
        if not 1 <= self.split <= n_items + 1:
            raise ValidationError(
                f"split must lie in [1, {n_items + 1}], got {self.split}"
            )
        return self


@dataclass
class TrainConfig:
    learning_rate: float = 0.01
    batch_size: int = 200
    weight_decay: float = 0.01
    epochs: int = 20
    seed: int = 0
    init_scale: float = 0.01

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValidationError(f"learning rate must be positive, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ValidationError(f"batch size must be at least 1, got {self.batch_size}")
        if self.weight_decay < 0:
            raise ValidationError(f"weight decay must be non-negative, got {self.weight_decay}")
        if self.epochs < 1:
            raise ValidationError(f"epochs must be at least 1, got {self.epochs}")
        if self.init_scale <= 0:
            raise ValidationError(f"init scale must be positive, got {self.init_scale}")


@dataclass
class NadeGrads:
    """Gradient bundle with the same shapes as NadeModel parameters."""

    W: np.ndarray
    A: np.ndarray
    V: np.ndarray
    b: np.ndarray
    d: np.ndarray

    @classmethod
    def zeros_like(cls, model):
        return cls(
            np.zeros_like(model.W), np.zeros_like(model.A), np.zeros_like(model.V),
            np.zeros_like(model.b), np.zeros_like(model.d),
        )

    def fill_zero(self):
        for arr in (self.W, self.A, self.V, self.b, self.d):
            arr.fill(0.0)


@dataclass
class LossGrad:
    value: float
    grads: NadeGrads


def init_model(n_items, n_hidden, activation="tanh", seed=0, init_scale=0.01):
    """Fresh model with uniform(-init_scale, init_scale) weights, zero biases."""
    if n_items < 1 or n_hidden < 1:
        raise ValidationError(
            f"need at least 1 item and 1 hidden unit, got {n_items} and {n_hidden}"
        )
    if activation not in _ACT_CODES:
        raise ValidationError(f"unknown activation: {activation!r}")
    if init_scale < 0:
        raise ValidationError(f"init scale must be non-negative, got {init_scale}")
    rng = new_rng(seed)
    s = float(init_scale)
    W = rng.uniform(-s, s, size=(n_hidden, n_items))
    A = rng.uniform(-s, s, size=(n_hidden, n_items))
    V = rng.uniform(-s, s, size=(n_items, n_hidden))
    b = np.zeros(n_hidden)
    d = np.zeros(n_items)
    return NadeModel(W, A, V, b, d, activation)


def _check_feedback(model, feedback):
    if feedback.likes.shape != (model.n_items,):
        raise ValidationError(
            f"feedback covers {feedback.likes.shape[0]} items, model has {model.n_items}"
        )
    if feedback.confidences.shape != (model.n_items,):
        raise ValidationError("feedback confidence vector has wrong length")


def _activate(a, activation):
    return np.tanh(a) if activation == "tanh" else a


def hidden_prefix(model, feedback, ordering):
    """Hidden state after observing the prefix of ``ordering``.

    Depends only on which items the prefix contains, never on their
    order inside it.
    """
    _check_feedback(model, feedback)
    ordering.validate(model.n_items)
    prefix = np.asarray(ordering.perm[: ordering.split - 1], dtype=np.int64)
    liked = prefix[feedback.likes[prefix] == 1]
    other = prefix[feedback.likes[prefix] == 0]
    c = feedback.confidences
    a = model.b + model.W[:, liked] @ c[liked] + model.A[:, other] @ c[other]
    return _activate(a, model.activation)


def conditional(model, hidden, item):
    """P(like item | hidden state), clamped away from 0 and 1."""
    hidden = np.asarray(hidden, dtype=np.float64)
    if hidden.shape != (model.n_hidden,):
        raise ValidationError(
            f"hidden state has length {hidden.shape}, expected {model.n_hidden}"
        )
    if not 0 <= item < model.n_items:
        raise ValidationError(f"item index {item} out of range")
    z = float(model.d[item] + model.V[item] @ hidden)
    p = float(expit(z))
    return min(max(p, PROB_EPS), 1.0 - PROB_EPS)


def predict_all(model, feedback):
    """Like probability for every item given the full observed history."""
    _check_feedback(model, feedback)
    liked = feedback.likes == 1
    c = feedback.confidences
    a = model.b + model.W @ (c * liked) + model.A @ (c * ~liked)
    h = _activate(a, model.activation)
    p = expit(model.d + model.V @ h)
    return np.clip(p, PROB_EPS, 1.0 - PROB_EPS)


def sample_ordering(n_items, rng):
    """Uniform permutation plus a uniform split in [1, M] (at least one target)."""
    perm = rng.permutation(n_items).astype(np.int64, copy=False)
    split = int(rng.integers(1, n_items + 1))
    return Ordering(perm, split)


def ordered_loss_grad(model, feedback, ordering):
    """Scaled weighted NLL of the ordering's target part, with gradients."""
    _check_feedback(model, feedback)
    ordering.validate(model.n_items)
    if ordering.split > model.n_items:
        raise ValidationError("ordering has an empty target part, nothing to score")
    grads = NadeGrads.zeros_like(model)
    value = _kernel(
        model.W, model.A, model.V, model.b, model.d,
        _ACT_CODES[model.activation],
        np.ascontiguousarray(feedback.likes, dtype=np.int8),
        np.ascontiguousarray(feedback.confidences, dtype=np.float64),
        np.ascontiguousarray(ordering.perm, dtype=np.int64),
        int(ordering.split),
        grads.W, grads.A, grads.V, grads.b, grads.d,
    )
    return LossGrad(float(value), grads)


def full_nll(model, feedback, perm):
    """Exact confidence-weighted NLL of the whole chain along ``perm``.

    Evaluates every conditional in sequence, growing the prefix one item
    at a time. Quadratic in the number of items; meant for evaluation
    and testing rather than training.
    """
    _check_feedback(model, feedback)
    Ordering(np.asarray(perm, dtype=np.int64), 1).validate(model.n_items)
    t = feedback.likes
    c = feedback.confidences
    a = model.b.astype(np.float64).copy()
    total = 0.0
    for k in np.asarray(perm, dtype=np.int64):
        h = _activate(a, model.activation)
        z = float(model.d[k] + model.V[k] @ h)
        p = min(max(float(expit(z)), PROB_EPS), 1.0 - PROB_EPS)
        if t[k]:
            total += -c[k] * np.log(p)
            a += c[k] * model.W[:, k]
        else:
            total += -c[k] * np.log1p(-p)
            a += c[k] * model.A[:, k]
    return float(total)


def train(model, data, config):
    """SGD over users with one fresh random ordering per visit.

    ``data`` is a sequence of UserFeedback, one per user. Users are
    shuffled every epoch and processed in minibatches; each batch applies
    the mean gradient of its users plus L2 weight decay on the weight
    matrices (biases are not decayed). Returns the trained model and the
    per-epoch mean loss trace. The input model is left untouched.
    """
    model.validate()
    if len(data) == 0:
        raise ValidationError("training data is empty")
    for fb in data:
        _check_feedback(model, fb)
    out = model.copy()
    act_code = _ACT_CODES[out.activation]
    n_users = len(data)
    n_items = out.n_items
    rng = new_rng(config.seed)
    grads = NadeGrads.zeros_like(out)
    lr = config.learning_rate
    decay = config.weight_decay
    trace = []
    for _ in range(config.epochs):
        visit_order = rng.permutation(n_users)
        epoch_loss = 0.0
        for lo in range(0, n_users, config.batch_size):
            batch = visit_order[lo : lo + config.batch_size]
            grads.fill_zero()
            for u in batch:
                fb = data[u]
                ordering = sample_ordering(n_items, rng)
                epoch_loss += _kernel(
                    out.W, out.A, out.V, out.b, out.d, act_code,
                    fb.likes, fb.confidences, ordering.perm, ordering.split,
                    grads.W, grads.A, grads.V, grads.b, grads.d,
                )
            inv = 1.0 / batch.shape[0]
            out.W -= lr * (inv * grads.W + decay * out.W)
            out.A -= lr * (inv * grads.A + decay * out.A)
            out.V -= lr * (inv * grads.V + decay * out.V)
            out.b -= lr * (inv * grads.b)
            out.d -= lr * (inv * grads.d)
        trace.append(epoch_loss / n_users)
    return out, trace
