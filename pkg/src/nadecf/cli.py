"""Command-line front end.

Subcommands cover the full workflow: ``synth`` or ``ingest`` to obtain a
count table, ``ratings`` and ``split`` to prepare train/test data,
``train`` and ``sweep`` to fit models, ``evaluate`` and ``predict`` to
use them.

Exit codes: 0 on success, 1 for usage errors, 2 for data or validation
errors, 3 for I/O failures.

Every subcommand accepts ``--config FILE`` with ``key=value`` lines
(``#`` comments allowed); keys are the long option names with dashes
replaced by underscores. Explicit flags override the file, the file
overrides built-in defaults, and unknown keys are ignored.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import interactions, serialize, synth
from .errors import ModelFormatError, ParseError, ValidationError
from .evaluate import imf_scorer, mpr, nade_scorer, write_report, write_summary
from .imf import ImfModel, imf_train
from .interactions import FORMAT_COUNTS, FORMAT_EVENTS, SplitPair
from .kernels import BACKEND
from .model import ACTIVATIONS, NadeModel, TrainConfig, init_model, predict_all, train

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_IO = 3

DEFAULT_ALPHA = 300.0
DEFAULT_LR = 0.01
DEFAULT_BATCH = 200
DEFAULT_DECAY = 0.01
DEFAULT_HIDDEN = 256
DEFAULT_EPOCHS = 20
DEFAULT_INIT_SCALE = 0.01
DEFAULT_FACTORS = 256
DEFAULT_REG = 0.1
DEFAULT_ITERATIONS = 15
DEFAULT_FRACTION = 0.1


class _Parser(argparse.ArgumentParser):
    """argparse parser that exits with status 1 on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_cast(text):
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None


def _seed_cast(text):
    value = _int_cast(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"seed must be non-negative, got {value}")
    return value


def _positive_int(text):
    value = _int_cast(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def _float_cast(text):
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None


def _positive_float(text):
    value = _float_cast(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {value}")
    return value


def _nonneg_float(text):
    value = _float_cast(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative number, got {value}")
    return value


def _fraction_cast(text):
    value = _float_cast(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(
            f"fraction must lie strictly between 0 and 1, got {value}"
        )
    return value


def _unit_cast(text):
    value = _float_cast(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"expected a value in [0, 1], got {value}")
    return value


def _alpha_list(text):
    parts = [p.strip() for p in text.split(",")]
    parts = [p for p in parts if p]
    if not parts:
        raise argparse.ArgumentTypeError("alpha list is empty")
    return [_nonneg_float(p) for p in parts]


def _choice_cast(options):
    def cast(text):
        if text not in options:
            raise argparse.ArgumentTypeError(
                f"expected one of {', '.join(options)}, got {text!r}"
            )
        return text

    return cast


_format_cast = _choice_cast((FORMAT_EVENTS, FORMAT_COUNTS))
_activation_cast = _choice_cast(ACTIVATIONS)
_model_cast = _choice_cast(("nade", "imf"))
_sweep_model_cast = _choice_cast(("nade", "imf", "both"))
_bool_cast = _choice_cast(("0", "1", "false", "true"))


def _load_config(path):
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ParseError("config line is not key=value", line_no)
            key, _, value = line.partition("=")
            values[key.strip().replace("-", "_")] = value.strip()
    return values


def _opt(args, cfg, name, default, cast=None):
    """Resolve one option: explicit flag, then config file, then default."""
    value = getattr(args, name)
    if value is not None:
        return value
    raw = cfg.get(name)
    if raw is None:
        return default
    return cast(raw) if cast else raw


def _flag(args, cfg, name):
    value = getattr(args, name)
    if value is not None:
        return value
    return _bool_cast(cfg[name]) in ("1", "true") if name in cfg else False


def _cmd_ingest(args, cfg):
    fmt = _opt(args, cfg, "format", FORMAT_EVENTS, _format_cast)
    with open(args.input, "r", encoding="utf-8") as fh:
        table = interactions.ingest(fh, fmt)
    interactions.write_counts(table, args.output)
    print(
        f"ingest: {table.n_users} users, {table.n_items} items, "
        f"{table.counts.nnz} pairs -> {args.output}"
    )
    return EXIT_OK


def _cmd_ratings(args, cfg):
    table = interactions.read_counts(args.input)
    ratings = interactions.relative_ratings(table)
    interactions.write_ratings(ratings, args.output)
    print(f"ratings: {ratings.values.nnz} pairs -> {args.output}")
    return EXIT_OK


def _cmd_split(args, cfg):
    fraction = _opt(args, cfg, "fraction", DEFAULT_FRACTION, _fraction_cast)
    seed = _opt(args, cfg, "seed", 0, _seed_cast)
    ratings = interactions.read_ratings(args.input)
    split = interactions.holdout_split(ratings, fraction, seed)
    meta = _opt(args, cfg, "meta", args.train_out + ".meta.json")
    interactions.write_split(split, args.train_out, args.test_out, meta)
    print(
        f"split: {split.train.values.nnz} train / {split.test.values.nnz} test pairs "
        f"(fraction={fraction}, seed={seed})"
    )
    return EXIT_OK


def _write_nade_trace(trace, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch,loss\n")
        for epoch, value in enumerate(trace, start=1):
            fh.write(f"{epoch},{value!r}\n")


def _write_imf_trace(trace, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("sweep,phase,objective\n")
        for i, value in enumerate(trace):
            phase = "init" if i == 0 else ("users" if i % 2 == 1 else "items")
            fh.write(f"{(i + 1) // 2},{phase},{value!r}\n")


def _train_nade(table, args, cfg, alpha, seed):
    lr = _opt(args, cfg, "lr", DEFAULT_LR, _positive_float)
    batch = _opt(args, cfg, "batch", DEFAULT_BATCH, _positive_int)
    decay = _opt(args, cfg, "decay", DEFAULT_DECAY, _nonneg_float)
    hidden = _opt(args, cfg, "hidden", DEFAULT_HIDDEN, _positive_int)
    epochs = _opt(args, cfg, "epochs", DEFAULT_EPOCHS, _positive_int)
    init_scale = _opt(args, cfg, "init_scale", DEFAULT_INIT_SCALE, _positive_float)
    activation = _opt(args, cfg, "activation", "tanh", _activation_cast)
    print(
        f"train nade: lr={lr} batch={batch} decay={decay} H={hidden} "
        f"epochs={epochs} activation={activation} init_scale={init_scale} "
        f"alpha={alpha} seed={seed} backend={BACKEND}"
    )
    feedback = interactions.all_feedback(table, alpha)
    init_seed, sgd_seed = np.random.SeedSequence(seed).spawn(2)
    model = init_model(table.n_items, hidden, activation, init_seed, init_scale)
    config = TrainConfig(lr, batch, decay, epochs, sgd_seed, init_scale)
    return train(model, feedback, config)


def _train_imf(table, args, cfg, alpha, seed):
    factors = _opt(args, cfg, "factors", DEFAULT_FACTORS, _positive_int)
    reg = _opt(args, cfg, "reg", DEFAULT_REG, _positive_float)
    iterations = _opt(args, cfg, "iterations", DEFAULT_ITERATIONS, _positive_int)
    threads = _opt(args, cfg, "threads", 1, _positive_int)
    print(
        f"train imf: factors={factors} reg={reg} iterations={iterations} "
        f"alpha={alpha} seed={seed} threads={threads}"
    )
    return imf_train(table, alpha, factors, reg, iterations, seed, threads)


def _cmd_train(args, cfg):
    kind = _opt(args, cfg, "model", "nade", _model_cast)
    alpha = _opt(args, cfg, "alpha", DEFAULT_ALPHA, _nonneg_float)
    seed = _opt(args, cfg, "seed", 0, _seed_cast)
    table = interactions.read_ratings(args.input)
    trace_path = _opt(args, cfg, "trace", None)
    if kind == "nade":
        model, trace = _train_nade(table, args, cfg, alpha, seed)
        if trace_path:
            _write_nade_trace(trace, trace_path)
    else:
        model, trace = _train_imf(table, args, cfg, alpha, seed)
        if trace_path:
            _write_imf_trace(trace, trace_path)
    serialize.save_model(model, args.output)
    print(f"train {kind}: final={trace[-1]!r} -> {args.output}")
    return EXIT_OK


def _load_scorer(model_path, table):
    model = serialize.load_model(model_path)
    if isinstance(model, NadeModel):
        if model.n_items != table.n_items:
            raise ValidationError(
                f"model covers {model.n_items} items, training data has {table.n_items}"
            )
        return model, nade_scorer(model)
    if model.n_users != table.n_users or model.n_items != table.n_items:
        raise ValidationError(
            f"model covers {model.n_users} users x {model.n_items} items, "
            f"training data has {table.n_users} x {table.n_items}"
        )
    return model, imf_scorer(model)


def _cmd_evaluate(args, cfg):
    alpha = _opt(args, cfg, "alpha", DEFAULT_ALPHA, _nonneg_float)
    threads = _opt(args, cfg, "threads", 1, _positive_int)
    include_observed = _flag(args, cfg, "include_observed")
    train_table = interactions.read_ratings(args.train)
    test_table, n_unmapped = interactions.read_ratings_against(args.test, train_table)
    _, scorer = _load_scorer(args.model, train_table)
    if n_unmapped:
        print(
            f"warning: skipped {n_unmapped} test pairs naming users or items "
            "absent from the training data",
            file=sys.stderr,
        )
    split = SplitPair(train_table, test_table, float("nan"), -1)
    result = mpr(scorer, split, alpha, include_observed, threads, n_unmapped)
    write_report(result, args.report)
    summary = _opt(args, cfg, "summary", args.report + ".json")
    write_summary(result, summary)
    print(
        f"evaluate: MPR={result.mpr!r} pairs={result.n_pairs} "
        f"users={result.n_users} skipped={result.n_skipped} -> {args.report}"
    )
    return EXIT_OK


def _cmd_sweep(args, cfg):
    alphas = args.alphas
    kinds = _opt(args, cfg, "model", "both", _sweep_model_cast)
    kinds = ("nade", "imf") if kinds == "both" else (kinds,)
    seed = _opt(args, cfg, "seed", 0, _seed_cast)
    threads = _opt(args, cfg, "threads", 1, _positive_int)
    include_observed = _flag(args, cfg, "include_observed")
    train_table = interactions.read_ratings(args.train)
    test_table, n_unmapped = interactions.read_ratings_against(args.test, train_table)
    if n_unmapped:
        print(
            f"warning: skipped {n_unmapped} test pairs naming users or items "
            "absent from the training data",
            file=sys.stderr,
        )
    split = SplitPair(train_table, test_table, float("nan"), -1)
    rows = []
    for kind in kinds:
        for alpha in alphas:
            if kind == "nade":
                model, _ = _train_nade(train_table, args, cfg, alpha, seed)
                scorer = nade_scorer(model)
            else:
                model, _ = _train_imf(train_table, args, cfg, alpha, seed)
                scorer = imf_scorer(model)
            result = mpr(scorer, split, alpha, include_observed, threads, n_unmapped)
            rows.append((kind, alpha, result.mpr))
            print(f"sweep {kind}: alpha={alpha} mpr={result.mpr!r}")
    with open(args.output, "w", encoding="utf-8") as fh:
        fh.write("model,alpha,mpr\n")
        for kind, alpha, value in rows:
            fh.write(f"{kind},{alpha!r},{value!r}\n")
    print(f"sweep: {len(rows)} runs -> {args.output}")
    return EXIT_OK


def _cmd_predict(args, cfg):
    alpha = _opt(args, cfg, "alpha", DEFAULT_ALPHA, _nonneg_float)
    top = _opt(args, cfg, "top", 10, _positive_int)
    include_observed = _flag(args, cfg, "include_observed")
    table = interactions.read_ratings(args.train)
    model, _ = _load_scorer(args.model, table)
    user = table.user_index.get(args.user)
    if user is None:
        raise ValidationError(f"unknown user id {args.user!r}")
    feedback = interactions.user_feedback(table, user, alpha)
    if isinstance(model, NadeModel):
        scores = predict_all(model, feedback)
    else:
        scores = model.item_factors @ model.user_factors[user]
    if include_observed:
        candidates = np.arange(table.n_items)
    else:
        mask = np.ones(table.n_items, dtype=bool)
        mask[feedback.observed] = False
        candidates = np.flatnonzero(mask)
    if candidates.size == 0:
        raise ValidationError(f"user {args.user!r} has no candidate items to rank")
    ranked = sorted(candidates, key=lambda i: (-scores[i], table.items[i]))
    for i in ranked[:top]:
        print(f"{table.items[i]},{float(scores[i])!r}")
    return EXIT_OK


def _cmd_synth(args, cfg):
    n_users = _opt(args, cfg, "users", 500, _positive_int)
    n_items = _opt(args, cfg, "items", 200, _positive_int)
    factors = _opt(args, cfg, "factors", 4, _positive_int)
    density = _opt(args, cfg, "density", 0.1, _unit_cast)
    seed = _opt(args, cfg, "seed", 0, _seed_cast)
    table = synth.synth_counts(n_users, n_items, factors, density, seed)
    interactions.write_counts(table, args.output)
    print(
        f"synth: {table.n_users} users, {table.n_items} items, "
        f"{table.counts.nnz} pairs -> {args.output}"
    )
    return EXIT_OK


def _add_train_options(p):
    p.add_argument("--alpha", type=_nonneg_float, help="confidence scale (default 300)")
    p.add_argument("--seed", type=_seed_cast, help="random seed (default 0)")
    p.add_argument("--lr", type=_positive_float, help="SGD learning rate (default 0.01)")
    p.add_argument("--batch", type=_positive_int, help="minibatch size (default 200)")
    p.add_argument("--decay", type=_nonneg_float, help="L2 weight decay (default 0.01)")
    p.add_argument("--hidden", type=_positive_int, help="hidden units (default 256)")
    p.add_argument("--epochs", type=_positive_int, help="training epochs (default 20)")
    p.add_argument(
        "--init-scale", dest="init_scale", type=_positive_float,
        help="uniform init half-width (default 0.01)",
    )
    p.add_argument("--activation", choices=ACTIVATIONS, help="hidden activation (default tanh)")
    p.add_argument("--factors", type=_positive_int, help="latent factors (default 256)")
    p.add_argument("--reg", type=_positive_float, help="L2 regularization (default 0.1)")
    p.add_argument("--iterations", type=_positive_int, help="ALS iterations (default 15)")
    p.add_argument("--threads", type=_positive_int, help="worker threads (default 1)")


def build_parser():
    parser = _Parser(prog="nadecf", description="Implicit-feedback recommender toolkit.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command", parser_class=_Parser)

    p = sub.add_parser("ingest", help="aggregate a watch-event log into a count table")
    p.add_argument("input", help="event log path")
    p.add_argument("output", help="count table path")
    p.add_argument("--format", type=_format_cast, help=f"input layout: {FORMAT_EVENTS} (default) or {FORMAT_COUNTS}")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("ratings", help="convert counts to per-item relative ratings")
    p.add_argument("input", help="count table path")
    p.add_argument("output", help="rating table path")
    p.set_defaults(func=_cmd_ratings)

    p = sub.add_parser("split", help="hold out a per-user fraction of ratings")
    p.add_argument("input", help="rating table path")
    p.add_argument("train_out", help="training half path")
    p.add_argument("test_out", help="held-out half path")
    p.add_argument("--fraction", type=_fraction_cast, help="held-out share per user (default 0.1)")
    p.add_argument("--seed", type=_seed_cast, help="random seed (default 0)")
    p.add_argument("--meta", help="metadata sidecar path (default <train_out>.meta.json)")
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("train", help="fit a model on a rating table")
    p.add_argument("input", help="training rating table path")
    p.add_argument("output", help="model file path")
    p.add_argument("--model", type=_model_cast, help="nade (default) or imf")
    p.add_argument("--trace", help="write the loss trace CSV here")
    _add_train_options(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", help="rank held-out items and report MPR")
    p.add_argument("model", help="model file path")
    p.add_argument("train", help="training rating table path")
    p.add_argument("test", help="held-out rating table path")
    p.add_argument("report", help="per-pair report CSV path")
    p.add_argument("--alpha", type=_nonneg_float, help="confidence scale (default 300)")
    p.add_argument("--summary", help="JSON summary path (default <report>.json)")
    p.add_argument("--threads", type=_positive_int, help="worker threads (default 1)")
    p.add_argument(
        "--include-observed", dest="include_observed", action="store_true",
        default=None, help="rank against all items, not just unobserved ones",
    )
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("sweep", help="retrain across alpha values and tabulate MPR")
    p.add_argument("train", help="training rating table path")
    p.add_argument("test", help="held-out rating table path")
    p.add_argument("output", help="results CSV path")
    p.add_argument("--alphas", type=_alpha_list, required=True, help="comma-separated alpha values")
    p.add_argument("--model", type=_sweep_model_cast, help="nade, imf, or both (default)")
    p.add_argument(
        "--include-observed", dest="include_observed", action="store_true",
        default=None, help="rank against all items, not just unobserved ones",
    )
    _add_train_options(p)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("predict", help="print the top items for one user")
    p.add_argument("model", help="model file path")
    p.add_argument("train", help="training rating table path")
    p.add_argument("--user", required=True, help="user id to score")
    p.add_argument("--top", type=_positive_int, help="list length (default 10)")
    p.add_argument("--alpha", type=_nonneg_float, help="confidence scale (default 300)")
    p.add_argument(
        "--include-observed", dest="include_observed", action="store_true",
        default=None, help="rank already-watched items too",
    )
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("synth", help="generate a synthetic count table")
    p.add_argument("output", help="count table path")
    p.add_argument("--users", type=_positive_int, help="number of users (default 500)")
    p.add_argument("--items", type=_positive_int, help="number of items (default 200)")
    p.add_argument("--factors", type=_positive_int, help="planted rank (default 4)")
    p.add_argument("--density", type=_unit_cast, help="expected watch fraction (default 0.1)")
    p.add_argument("--seed", type=_seed_cast, help="random seed (default 0)")
    p.set_defaults(func=_cmd_synth)

    for sp in sub.choices.values():
        sp.add_argument("--config", help="key=value defaults file")

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args.config) if args.config else {}
        return args.func(args, cfg)
    except argparse.ArgumentTypeError as exc:
        print(f"nadecf {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, ValidationError, ModelFormatError) as exc:
        print(f"nadecf {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"nadecf {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
