"""Command-line entry point: ``pnml <command> ...``.

Every command writes its output atomically; a failing command exits nonzero
and leaves no output file behind.
"""

from __future__ import annotations

import argparse
import hashlib
import logging
import sys
from pathlib import Path

import numpy as np

from . import erm, io, metrics, pipeline
from .datasets import standardize
from .errors import PnmlError
from .linalg_core import DEFAULT_RANK_TOL_FACTOR, build_stats, decompose
from .pnml_core import response_curve

log = logging.getLogger("pnml_ood")

SCORE_COLUMNS = ("index", "xtg", "regret", "baseline", "pnml_max")
# columns where a lower value indicates OOD
LOWER_IS_OOD = {"baseline", "pnml_max"}


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def cmd_fit_stats(args):
    train = io.read_matrix(args.train)
    stats = pipeline.prepare(train, normalize=not args.no_normalize, rank_tol_factor=args.rank_tol)
    io.write_stats(args.out, stats)
    log.info("wrote stats: M=%d rank=%d n_train=%d", stats.dim, stats.rank, stats.n_train)


def cmd_score(args):
    stats = io.read_stats(args.stats)
    emb = io.read_matrix(args.embeddings)
    logits = io.read_matrix(args.logits)
    if emb.shape[1] != stats.dim:
        raise PnmlError(f"embedding width mismatch: {args.embeddings} has {emb.shape[1]} columns, stats expect {stats.dim}")
    if logits.shape[0] != emb.shape[0]:
        raise PnmlError(f"row count mismatch: {emb.shape[0]} embeddings vs {logits.shape[0]} logit rows")
    if logits.shape[1] < 2:
        raise PnmlError(f"logits need at least 2 classes, {args.logits} has {logits.shape[1]}")
    probs = erm.softmax(logits)
    batch = pipeline.score_batch(stats, emb, probs, orth_tol=args.orth_tol)
    rows = [
        (i, x, r, b, q)
        for i, (x, r, b, q) in enumerate(zip(batch.xtg, batch.regret, batch.baseline, batch.pnml_max))
    ]
    io.write_csv(args.out, SCORE_COLUMNS, rows)
    provenance = {
        "stats": str(args.stats),
        "stats_sha256": _sha256(args.stats),
        "stats_fingerprint": stats.fingerprint(),
        "embeddings": str(args.embeddings),
        "embeddings_sha256": _sha256(args.embeddings),
        "logits": str(args.logits),
        "logits_sha256": _sha256(args.logits),
        "direction": batch.direction,
    }
    io.write_json(str(args.out) + ".provenance.json", provenance)


def cmd_eval(args):
    columns = args.column or ["regret"]
    reports = {}
    for col in columns:
        ind = io.read_score_column(args.ind_scores, col)
        ood = io.read_score_column(args.ood_scores, col)
        reports[col] = metrics.evaluate(ind, ood, higher_is_ood=col not in LOWER_IS_OOD).to_dict()
    out = dict(reports[columns[0]])
    if len(columns) > 1:
        out["methods"] = reports
    io.write_json(args.out, out)


def _parse_grid(text):
    parts = text.split(",")
    if len(parts) != 5:
        raise argparse.ArgumentTypeError("grid must be x1min,x1max,x2min,x2max,steps")
    try:
        return (*map(float, parts[:4]), int(parts[4]))
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse grid {text!r}") from None


def _parse_floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse {text!r} as a list of numbers") from None


def cmd_map(args):
    X = io.read_matrix(args.train)
    if args.standardize:
        X = standardize(X)
    labels = io.read_matrix(args.labels)
    if labels.shape[1] == 1:
        Y = erm.labels_to_one_hot(labels[:, 0])
    else:
        Y = labels
    if Y.shape[0] != X.shape[0]:
        raise PnmlError(f"{X.shape[0]} training rows but {Y.shape[0]} labels")
    stats = build_stats(decompose(X, args.rank_tol), X.shape[0])
    model = erm.fit(X, erm.one_hot_targets(Y, args.eps), stats)
    rows = pipeline.regret_map(model, stats, args.grid)
    io.write_csv(args.out, ("x1", "x2", "p_c2", "regret"), rows)


def cmd_curve(args):
    grid = np.linspace(0.0, args.xtg_max, args.steps)
    rows = []
    for p1 in args.p1:
        rows.extend((p1, t, v) for t, v in response_curve(p1, grid))
    io.write_csv(args.out, ("p1", "xtg", "normalized_regret"), rows)


def cmd_spectrum(args):
    stats = io.read_stats(args.stats)
    io.write_csv(args.out, ("index", "eigenvalue"), pipeline.spectrum_report(stats))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pnml", description="pNML regret scoring for OOD detection")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit-stats", help="precompute training statistics")
    p.add_argument("--train", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--no-normalize", action="store_true", help="skip L2 normalization of training rows")
    p.add_argument("--rank-tol", type=float, default=DEFAULT_RANK_TOL_FACTOR)
    p.set_defaults(func=cmd_fit_stats)

    p = sub.add_parser("score", help="score test embeddings")
    p.add_argument("--stats", required=True, type=Path)
    p.add_argument("--embeddings", required=True, type=Path)
    p.add_argument("--logits", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--orth-tol", type=float, default=1e-6)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("eval", help="detection metrics from two score tables")
    p.add_argument("--ind-scores", required=True, type=Path)
    p.add_argument("--ood-scores", required=True, type=Path)
    p.add_argument("--column", action="append", help="score column; repeat to compare methods (default: regret)")
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("map", help="regret map of a 2-feature least-squares classifier")
    p.add_argument("--train", required=True, type=Path)
    p.add_argument("--labels", required=True, type=Path, help="integer class ids (one column) or one-hot rows")
    p.add_argument("--grid", required=True, type=_parse_grid)
    p.add_argument("--eps", type=float, default=erm.DEFAULT_TARGET_EPS)
    p.add_argument("--rank-tol", type=float, default=DEFAULT_RANK_TOL_FACTOR)
    p.add_argument("--standardize", action="store_true", help="z-score the features before fitting (grid is in z units)")
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("curve", help="two-class normalized regret versus xtg")
    p.add_argument("--p1", required=True, type=_parse_floats)
    p.add_argument("--xtg-max", type=float, default=6.0)
    p.add_argument("--steps", type=int, default=600)
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("spectrum", help="eigenvalues of the training Gram matrix")
    p.add_argument("--stats", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=cmd_spectrum)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        args.func(args)
    except (PnmlError, OSError) as exc:
        print(f"pnml {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
