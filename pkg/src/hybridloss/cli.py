"""Command-line entry point: ``hybridloss <command> [options]``.

Every command builds an experiment report and writes it as CSV (default)
or JSON (``--json``) to ``--out`` or standard output. The exit status is 0
on success and 1 when the command failed or, for ``consistency``, when a
sufficiency violation or oracle failure was found. Usage errors exit with 2.
"""
from __future__ import annotations

import argparse
import logging
import sys

from . import experiments as ex
from .consistency import OracleError
from .training import TrainingDiverged

log = logging.getLogger("hybridloss")


def _common(p: argparse.ArgumentParser, seed_default: int | None = 0) -> None:
    p.add_argument("--seed", type=int, default=seed_default, help="RNG seed (default %(default)s)")
    p.add_argument("--out", help="write the report here instead of standard output")
    p.add_argument("--json", action="store_true", help="emit JSON instead of CSV")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hybridloss", description="Experiments with the hybrid log/hinge loss.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("exp1", help="error vs number of labels on a single-input population")
    _common(p)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--lambda", dest="lam", type=float, default=1e-4)
    p.add_argument("--epochs", type=int, default=2000)
    p.add_argument("--k-min", type=int, default=3)
    p.add_argument("--k-max", type=int, default=10)

    p = sub.add_parser("exp2", help="non-dominant/dominant mixture sweep")
    _common(p)
    p.add_argument("--alpha", type=float, nargs="+", default=list(ex.ALPHA_GRID),
                   help="alpha grid for the hybrid loss")
    p.add_argument("--lambda", dest="lam", type=float, nargs="+", default=list(ex.LAMBDA_GRID),
                   help="regularization grid")
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--rhos", type=float, nargs="+", default=list(ex.EXP2_RHOS))
    p.add_argument("--sizes", type=int, nargs="+", default=list(ex.EXP2_SIZES))

    p = sub.add_parser("chunk", help="train and evaluate a chain tagger on BIO corpora")
    _common(p)
    p.add_argument("--train", default=str(ex.bundled_corpus("chunk_train.txt")))
    p.add_argument("--test", default=str(ex.bundled_corpus("chunk_test.txt")))
    p.add_argument("--val", help="validation corpus for choosing alpha")
    p.add_argument("--loss", choices=("hinge", "log", "hybrid"), default="hybrid")
    p.add_argument("--alpha", type=float, help="hybrid alpha; chosen on validation data if omitted")
    p.add_argument("--alpha-grid", type=float, nargs="+", default=list(ex.ALPHA_GRID))
    p.add_argument("--lambda", dest="lam", type=float, default=1e-3)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--minibatch", type=int, default=10)
    p.add_argument("--model-out", help="save the trained model to this file")

    p = sub.add_parser("dominance", help="sentence probabilities under a trained chain model")
    _common(p, seed_default=None)
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", default=str(ex.bundled_corpus("chunk_test.txt")))

    p = sub.add_parser("consistency", help="random check of the alpha threshold")
    _common(p)
    p.add_argument("--k-max", type=int, default=8)
    p.add_argument("--trials", type=int, default=500)
    return parser


def run(args: argparse.Namespace):
    if args.command == "exp1":
        return ex.cmd_exp1(args.alpha, args.lam, args.k_min, args.k_max, args.epochs, args.seed)
    if args.command == "exp2":
        return ex.cmd_exp2(args.seed, tuple(args.rhos), tuple(args.sizes), tuple(args.lam),
                           tuple(args.alpha), args.epochs)
    if args.command == "chunk":
        return ex.cmd_chunk(args.train, args.test, args.loss, args.alpha, args.lam, args.epochs,
                            args.minibatch, args.seed, args.val, tuple(args.alpha_grid),
                            args.model_out)
    if args.command == "dominance":
        return ex.cmd_dominance(args.model, args.corpus, args.seed)
    if args.command == "consistency":
        return ex.cmd_consistency(args.k_max, args.trials, args.seed)
    raise AssertionError(args.command)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        report = run(args)
    except (ValueError, OSError, TrainingDiverged, OracleError) as exc:
        # corpus parse and model file errors derive from ValueError
        kind = type(exc).__name__
        print(f"error ({kind}): {exc}", file=sys.stderr)
        return 1
    text = report.to_json() if args.json else report.to_csv()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.command == "consistency" and ex.consistency_failed(report):
        summary = report.select(record="summary")[-1]
        print(f"consistency check failed: {summary['violations']} violation(s), "
              f"{summary['oracle_failures']} oracle failure(s)", file=sys.stderr)
        return 1
    return 0

