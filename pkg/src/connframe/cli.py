"""Command-line entry point.

One binary, subcommand style; the usual pipeline order is
aggregate -> split -> train-aspect -> train-frame -> predict-frame ->
eval -> analyze.  All randomness flows from --seed, every output file
starts with a comment header recording the resolved invocation, and
identical invocations on identical inputs produce byte-identical outputs.

Exit codes: 0 success, 1 usage error, 2 data/format error.
"""

from __future__ import annotations

import argparse
import csv
import glob
import itertools
import sys

from . import __version__
from .annotations import agreement_report, aggregate_frames, read_annotations
from .aspect_model import (
    load_models,
    predict_aspect_labels,
    predict_probs,
    save_models,
    train_all_aspects,
)
from .baselines import GraphPropBaseline, KnnBaseline, MajorityBaseline
from .core import ASPECTS, read_lexicon, write_lexicon
from .corpus import (
    Leaning,
    entity_pair_scores,
    leaning_contrast,
    lexicon_scores,
    load_tuples,
    read_leanings,
)
from .embeddings import load_embeddings
from .errors import ConnframeError, DataError
from .evaluation import evaluate, format_report, report_csv_rows, split
from .frame_model import (
    FrameModel,
    build_frame_graph,
    export_weights_csv,
    predict_frame,
    read_weights,
    write_weights,
)
from .selfcheck import run_selfcheck


class _Parser(argparse.ArgumentParser):
    """argparse with usage errors on exit code 1 instead of 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _info(args, message):
    print(message, file=sys.stderr)


def _resolved_flags(args) -> str:
    skip = {"func", "command"}
    parts = []
    for key in sorted(vars(args)):
        if key in skip:
            continue
        value = getattr(args, key)
        if value is None:
            continue
        parts.append(f"{key}={value}")
    return " ".join(parts)


def _header_lines(args):
    return [f"connframe {__version__} | {args.command} | {_resolved_flags(args)}"]


def _write_csv(path, rows, args):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for line in _header_lines(args):
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerows(rows)


def _read_verbs(path):
    """A verb list: either a plain one-verb-per-line file or a lexicon TSV
    (detected by its header), in which case the lexicon's verbs are used."""
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.split("\t")[0] == "verb":
                return [f.verb for f in read_lexicon(path)]
            break
    verbs = []
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if line and not line.startswith("#"):
                verbs.append(line.split()[0])
    if not verbs:
        raise DataError(f"{path}: no verbs found")
    return verbs


def _filter_embedded(verbs, table, args, what="verbs"):
    kept = [v for v in verbs if v in table]
    dropped = len(verbs) - len(kept)
    if dropped:
        _info(args, f"filtered {dropped} {what} missing from the embeddings "
                    f"({len(kept)} kept)")
    if not kept:
        raise DataError(f"all {what} are missing from the embedding table")
    return kept


def _tuple_stream(pattern):
    paths = sorted(glob.glob(pattern))
    if not paths:
        raise DataError(f"no tuple files match {pattern!r}")
    readers = [load_tuples(p) for p in paths]
    return readers, itertools.chain.from_iterable(readers)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_aggregate(args):
    records = read_annotations(args.infile)
    frames, incomplete = aggregate_frames(records)
    if incomplete:
        _info(args, f"skipped {len(incomplete)} verbs with missing aspects")
    write_lexicon(args.out, frames, include_scores=True,
                  header_lines=_header_lines(args))
    _info(args, f"wrote {len(frames)} aggregated frames to {args.out}")
    return 0


def cmd_agreement(args):
    records = read_annotations(args.infile)
    print(agreement_report(records, collapse=args.collapse))
    return 0


def cmd_split(args):
    frames = read_lexicon(args.verbs)
    sizes = None
    if args.sizes:
        try:
            sizes = tuple(int(s) for s in args.sizes.split(","))
        except ValueError:
            raise DataError(f"bad --sizes value {args.sizes!r}") from None
    by_verb = {f.verb: f for f in frames}
    train, dev, test = split(sorted(by_verb), args.seed, sizes)
    for name, verbs in (("train", train), ("dev", dev), ("test", test)):
        path = f"{args.out_prefix}{name}.tsv"
        write_lexicon(path, [by_verb[v] for v in verbs],
                      header_lines=_header_lines(args) + [f"split={name}"])
        _info(args, f"wrote {len(verbs)} verbs to {path}")
    return 0


def _aspect_params(args):
    return dict(
        l2=args.l2,
        optimizer=args.optimizer,
        max_iter=args.max_iters,
        tol=args.tol,
        class_weight=args.class_weights,
        seed=args.seed,
    )


def cmd_train_aspect(args):
    table = load_embeddings(args.embeddings)
    frames = read_lexicon(args.train)
    dev_frames = read_lexicon(args.dev) if args.dev else None
    if args.class_weights == "grid" and dev_frames is None:
        raise DataError('--class-weights grid requires --dev')
    models = train_all_aspects(frames, table, dev_frames=dev_frames,
                               jobs=args.jobs, **_aspect_params(args))
    if models.n_filtered:
        _info(args, f"filtered {models.n_filtered} training verbs missing "
                    "from the embeddings")
    save_models(models, args.out, header=_header_lines(args)[0])
    _info(args, f"wrote 9 aspect models to {args.out}")
    return 0


def cmd_predict_aspect(args):
    table = load_embeddings(args.embeddings)
    models = load_models(args.models)
    verbs = _filter_embedded(_read_verbs(args.verbs), table, args)
    columns = (["verb"] + [a.value for a in ASPECTS]
               + [f"{a.value}:p{p}" for a in ASPECTS for p in "-=+"])
    with open(args.out, "w", encoding="utf-8") as fh:
        for line in _header_lines(args):
            fh.write(f"# {line}\n")
        fh.write("\t".join(columns) + "\n")
        for verb in verbs:
            labels = predict_aspect_labels(models, verb, table)
            row = [verb] + [labels[a].symbol for a in ASPECTS]
            for a in ASPECTS:
                row += [f"{p:.6f}" for p in predict_probs(models[a], verb, table)]
            fh.write("\t".join(row) + "\n")
    _info(args, f"wrote aspect predictions for {len(verbs)} verbs to {args.out}")
    return 0


def cmd_train_frame(args):
    table = load_embeddings(args.embeddings)
    models = load_models(args.aspect_models)
    frames = read_lexicon(args.train)
    usable = _filter_embedded([f.verb for f in frames], table, args,
                              what="training verbs")
    by_verb = {f.verb: f for f in frames}
    train_pairs = [
        (by_verb[v], predict_aspect_labels(models, v, table)) for v in usable
    ]
    model = FrameModel(
        learning_rate=args.learning_rate,
        epochs=args.epochs,
        l2=args.l2,
        seed=args.seed,
        shuffle=not args.no_shuffle,
        batch_size=args.batch_size,
    ).fit(train_pairs)
    write_weights(args.out, model.weights_, header_lines=_header_lines(args))
    _info(args, f"wrote frame weights ({model.weights_.n_parameters()} "
                f"parameters) to {args.out}")
    return 0


_PREDICT_STATE = {}


def _init_predict_worker(models, table, weights, soft):
    _PREDICT_STATE["setup"] = (models, table, weights, soft)


def _predict_one_verb(verb):
    models, table, weights, soft = _PREDICT_STATE["setup"]
    return predict_frame(verb, models, table, weights, soft_evidence=soft)


def cmd_predict_frame(args):
    table = load_embeddings(args.embeddings)
    models = load_models(args.aspect_models)
    weights = read_weights(args.weights)
    verbs = _filter_embedded(_read_verbs(args.verbs), table, args)
    if args.jobs > 1 and not args.dump_graph:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(
            max_workers=args.jobs,
            initializer=_init_predict_worker,
            initargs=(models, table, weights, args.soft_evidence),
        ) as pool:
            frames = list(pool.map(_predict_one_verb, verbs))
    else:
        frames = []
        for verb in verbs:
            if args.dump_graph:
                preds = predict_aspect_labels(models, verb, table)
                print(f"# graph for {verb}", file=sys.stderr)
                print(build_frame_graph(preds, weights).dump(), file=sys.stderr)
            frames.append(predict_frame(verb, models, table, weights,
                                        soft_evidence=args.soft_evidence))
    write_lexicon(args.out, frames, include_scores=True,
                  header_lines=_header_lines(args))
    _info(args, f"wrote {len(frames)} predicted frames to {args.out}")
    return 0


def cmd_baseline(args):
    train_frames = read_lexicon(args.train)
    test_verbs = _read_verbs(args.test)
    if args.method == "majority":
        model = MajorityBaseline().fit(train_frames)
        frames = model.predict(test_verbs)
    else:
        if not args.embeddings:
            raise DataError(f"--embeddings is required for method {args.method}")
        table = load_embeddings(args.embeddings)
        test_verbs = _filter_embedded(test_verbs, table, args, what="test verbs")
        if args.method == "knn":
            model = KnnBaseline(k=args.k).fit(train_frames, table)
            frames = model.predict(test_verbs)
        else:
            model = GraphPropBaseline(
                top_k=args.top_k, sim_floor=args.sim_floor,
                potential_scale=args.potential_scale,
                max_iters=args.max_iters, damping=args.damping, tol=args.tol,
            ).fit(train_frames, table)
            frames = model.predict(test_verbs)
            isolated = sum(model.isolated_counts_.values())
            if isolated:
                _info(args, f"{isolated} isolated unseeded verb/aspect nodes "
                            "defaulted to neutral")
    write_lexicon(args.out, frames, header_lines=_header_lines(args))
    _info(args, f"wrote {len(frames)} {args.method} frames to {args.out}")
    return 0


def cmd_eval(args):
    gold = read_lexicon(args.gold)
    pred = read_lexicon(args.pred)
    keep = None
    if args.aspects:
        keep = {a.strip() for a in args.aspects.split(",")}
        unknown = keep - {a.value for a in ASPECTS}
        if unknown:
            raise DataError(f"unknown aspects: {sorted(unknown)}")
    report = evaluate(gold, pred)
    text = format_report(report)
    if keep is not None:
        hidden = {a.value for a in ASPECTS} - keep
        text = "\n".join(
            line for line in text.splitlines()
            if not line.split() or line.split()[0] not in hidden
        )
    print(text)
    if args.csv:
        _write_csv(args.csv, report_csv_rows(report), args)
        _info(args, f"wrote metrics CSV to {args.csv}")
    return 0


def _read_pairs(path):
    pairs = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(row for row in fh if not row.startswith("#"))
        header = None
        for row in reader:
            if not row:
                continue
            if header is None:
                header = [c.strip().lower() for c in row]
                if header[:2] != ["agent", "theme"]:
                    raise DataError(f"{path}: pairs header must be agent,theme")
                continue
            agent = row[0].strip()
            theme = row[1].strip() if len(row) > 1 else ""
            pairs.append((agent, theme))
    if not pairs:
        raise DataError(f"{path}: no pairs found")
    return pairs


def cmd_analyze(args):
    frames = read_lexicon(args.lexicon)
    scores = lexicon_scores(frames)
    pairs = _read_pairs(args.pairs)
    readers, stream = _tuple_stream(args.tuples)
    rows = entity_pair_scores(pairs, stream, scores, unweighted=args.unweighted)
    skipped_lines = sum(r.skipped for r in readers)
    if skipped_lines:
        _info(args, f"skipped {skipped_lines} malformed tuple lines")
    out_rows = [["agent", "theme", "score", "support"]]
    for row in rows:
        out_rows.append([row.agent_pattern, row.theme_pattern,
                         f"{row.score:.6f}", str(row.support)])
        if row.skipped_verbs:
            _info(args, f"{row.agent_pattern}/{row.theme_pattern}: skipped "
                        f"{row.skipped_verbs} matched tuples with unscored verbs")
    _write_csv(args.out, out_rows, args)
    _info(args, f"wrote {len(rows)} entity-pair scores to {args.out}")
    return 0


def cmd_contrast(args):
    leanings = read_leanings(args.leanings)
    wanted = [Leaning.LEFT, Leaning.RIGHT] if args.leaning == "both" \
        else [Leaning(args.leaning)]
    for leaning in wanted:
        readers, stream = _tuple_stream(args.tuples)
        ranked = leaning_contrast(args.verb, args.role, leaning, stream,
                                  leanings, args.n)
        print(f"{args.verb} / {args.role} / {leaning.value}:")
        if not ranked:
            print("  (no matches)")
        for phrase, count in ranked:
            print(f"  {count:8d}  {phrase}")
    return 0


def cmd_export_weights(args):
    weights = read_weights(args.weights)
    _write_csv(args.csv, export_weights_csv(weights), args)
    _info(args, f"wrote weight tables to {args.csv}")
    return 0


def cmd_selfcheck(args):
    ok = run_selfcheck(seed=args.seed)
    print("selfcheck: " + ("PASS" if ok else "FAIL"))
    return 0 if ok else 2


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=1,
                        help="seed for all randomness (default 1)")
    common.add_argument("--jobs", type=int, default=1,
                        help="parallel workers where safe (default 1)")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = _Parser(prog="connframe",
                     description="Connotation frame induction and analysis")
    parser.add_argument("--version", action="version",
                        version=f"connframe {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command",
                                parser_class=_Parser)

    p = sub.add_parser("aggregate", parents=[common],
                       help="aggregate annotation CSV into a gold lexicon")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("agreement", parents=[common],
                       help="print inter-annotator agreement statistics")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--collapse", choices=["polar", "neutral"], default="polar")
    p.set_defaults(func=cmd_agreement)

    p = sub.add_parser("split", parents=[common],
                       help="split a gold lexicon into train/dev/test")
    p.add_argument("--verbs", required=True, help="gold lexicon TSV")
    p.add_argument("--out-prefix", default="", help="output path prefix")
    p.add_argument("--sizes", help="comma-separated train,dev,test sizes")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train-aspect", parents=[common],
                       help="train the nine per-aspect classifiers")
    p.add_argument("--train", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out", required=True, help="output model directory")
    p.add_argument("--dev", help="dev lexicon for grid-tuned class weights")
    p.add_argument("--l2", type=float, default=1.0)
    p.add_argument("--optimizer", choices=["lbfgs", "gd"], default="lbfgs")
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--class-weights", choices=["uniform", "balanced", "grid"],
                   default="uniform")
    p.set_defaults(func=cmd_train_aspect)

    p = sub.add_parser("predict-aspect", parents=[common],
                       help="write aspect-level labels and probabilities")
    p.add_argument("--models", required=True)
    p.add_argument("--verbs", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict_aspect)

    p = sub.add_parser("train-frame", parents=[common],
                       help="train frame factor weights by piecewise likelihood")
    p.add_argument("--train", required=True)
    p.add_argument("--aspect-models", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out", required=True, help="output weights file")
    p.add_argument("--learning-rate", type=float, default=0.1)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--l2", type=float, default=0.01)
    p.add_argument("--batch-size", type=int, default=1)
    p.add_argument("--no-shuffle", action="store_true")
    p.set_defaults(func=cmd_train_frame)

    p = sub.add_parser("predict-frame", parents=[common],
                       help="predict full frames with tree inference")
    p.add_argument("--verbs", required=True)
    p.add_argument("--aspect-models", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--soft-evidence", action="store_true",
                   help="use aspect probability vectors as soft evidence")
    p.add_argument("--dump-graph", action="store_true",
                   help="dump each built factor graph to stderr")
    p.set_defaults(func=cmd_predict_frame)

    p = sub.add_parser("baseline", parents=[common],
                       help="run a reference system")
    p.add_argument("--method", choices=["majority", "knn", "graphprop"],
                   required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True, help="verb list or lexicon TSV")
    p.add_argument("--embeddings")
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, default=3, help="neighbors for knn")
    p.add_argument("--top-k", type=int, default=10)
    p.add_argument("--sim-floor", type=float, default=0.0)
    p.add_argument("--potential-scale", type=float, default=1.0)
    p.add_argument("--max-iters", type=int, default=100)
    p.add_argument("--damping", type=float, default=0.1)
    p.add_argument("--tol", type=float, default=1e-6)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("eval", parents=[common],
                       help="score predictions against gold frames")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--aspects", help="comma-separated aspect filter for the table")
    p.add_argument("--csv", help="also write metrics to this CSV")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("analyze", parents=[common],
                       help="entity-pair perspective scores over tuple dumps")
    p.add_argument("--tuples", required=True, help="tuple TSV glob")
    p.add_argument("--lexicon", required=True)
    p.add_argument("--pairs", required=True, help="CSV with agent,theme patterns")
    p.add_argument("--out", required=True)
    p.add_argument("--unweighted", action="store_true",
                   help="count each unique tuple once, ignoring counts")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("contrast", parents=[common],
                       help="top argument phrases by outlet leaning")
    p.add_argument("--verb", required=True)
    p.add_argument("--role", choices=["agent", "theme"], required=True)
    p.add_argument("--leanings", required=True)
    p.add_argument("--tuples", required=True)
    p.add_argument("--leaning", choices=["left", "right", "both"], default="both")
    p.add_argument("--n", type=int, default=10)
    p.set_defaults(func=cmd_contrast)

    p = sub.add_parser("export-weights", parents=[common],
                       help="export weight tables as heat-map-style CSV")
    p.add_argument("--weights", required=True)
    p.add_argument("--csv", required=True)
    p.set_defaults(func=cmd_export_weights)

    p = sub.add_parser("selfcheck", parents=[common],
                       help="run the built-in oracle suite")
    p.set_defaults(func=cmd_selfcheck)

    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if not getattr(args, "func", None):
        parser.print_usage(sys.stderr)
        return 1
    try:
        return int(args.func(args) or 0)
    except (ConnframeError, OSError) as exc:
        print(f"connframe {args.command}: error: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
