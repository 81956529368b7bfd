"""Benchmark the compiled training kernel against the NumPy fallback.

Runs the ordered-loss kernel on a grid of problem sizes with both
backends and reports microseconds per call plus the speedup. The two
must agree numerically (spot-checked here as well); only the speed
should differ.

Usage:
    python3 benchmarks/bench_kernels.py [--repeats 200] [--seed 0]
"""

import argparse
import time

import numpy as np

from nadecf import build_feedback, init_model, sample_ordering
from nadecf.kernels import ACT_TANH, backends
from nadecf.util import new_rng


def make_case(n_items, n_hidden, seed):
    rng = new_rng(seed)
    model = init_model(n_items, n_hidden, seed=seed, init_scale=0.1)
    model.b[:] = rng.uniform(-0.1, 0.1, n_hidden)
    model.d[:] = rng.uniform(-0.1, 0.1, n_items)
    ratings = np.where(rng.random(n_items) < 0.3, rng.random(n_items), 0.0)
    feedback = build_feedback(ratings, alpha=10.0)
    ordering = sample_ordering(n_items, rng)
    grads = tuple(
        np.zeros_like(a) for a in (model.W, model.A, model.V, model.b, model.d)
    )
    args = (
        model.W, model.A, model.V, model.b, model.d, ACT_TANH,
        feedback.likes, feedback.confidences, ordering.perm, ordering.split,
    )
    return args, grads


def time_backend(fn, args, grads, repeats):
    for g in grads:
        g[:] = 0.0
    fn(*args, *grads)  # warm up and touch all buffers
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args, *grads)
        best = min(best, time.perf_counter() - start)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=200, help="timed calls per case")
    parser.add_argument("--seed", type=int, default=0, help="case generator seed")
    args = parser.parse_args()

    impls = backends()
    if "cython" not in impls:
        print("compiled extension not available; nothing to compare")
        return

    sizes = [(50, 32), (200, 64), (500, 128), (2000, 256), (17348, 500)]
    print(f"{'items':>7} {'hidden':>7} {'numpy us':>10} {'cython us':>10} {'speedup':>8}")
    for n_items, n_hidden in sizes:
        case_args, grads = make_case(n_items, n_hidden, args.seed)
        loss = {}
        micros = {}
        for name, fn in impls.items():
            repeats = args.repeats if n_items < 1000 else max(5, args.repeats // 20)
            micros[name] = time_backend(fn, case_args, grads, repeats) * 1e6
            for g in grads:
                g[:] = 0.0
            loss[name] = fn(*case_args, *grads)
        rel = abs(loss["numpy"] - loss["cython"]) / max(abs(loss["numpy"]), 1e-12)
        if rel > 1e-9:
            raise SystemExit(f"backend disagreement at {n_items}x{n_hidden}: {rel}")
        print(
            f"{n_items:>7} {n_hidden:>7} {micros['numpy']:>10.1f} "
            f"{micros['cython']:>10.1f} {micros['numpy'] / micros['cython']:>7.1f}x"
        )


if __name__ == "__main__":
    main()
