"""Dataset splitting, per-aspect accuracy and macro-F1, and report tables.

Macro-F1 always averages over exactly the three polarity classes; a class
with a zero F1 denominator (absent from both gold and predictions)
contributes 0 and stays in the mean.  With skewed label distributions this
is what makes constant predictors score high accuracy but low F1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ASPECTS, POLARITIES, Aspect
from .errors import DataError


def split(verbs, seed: int, sizes=None):
    """Deterministic shuffle-and-partition into (train, dev, test).

    Default sizes: (300, 300, 300) when there are at least 900 verbs, else
    three equal parts of floor(n/3) with the remainder unassigned.
    """
    verbs = list(verbs)
    n = len(verbs)
    if sizes is None:
        sizes = (300, 300, 300) if n >= 900 else (n // 3, n // 3, n // 3)
    if len(sizes) != 3 or any(s < 0 for s in sizes):
        raise DataError(f"sizes must be three nonnegative counts, got {sizes}")
    if sum(sizes) > n:
        raise DataError(
            f"cannot split {n} verbs into sizes {tuple(sizes)} (sum {sum(sizes)})"
        )
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    shuffled = [verbs[i] for i in order]
    a, b, c = sizes
    return shuffled[:a], shuffled[a : a + b], shuffled[a + b : a + b + c]


def accuracy(gold, pred) -> float:
    """Percent of positions where pred matches gold."""
    gold, pred = list(gold), list(pred)
    if len(gold) != len(pred) or not gold:
        raise DataError(
            f"accuracy needs equal nonempty label sequences, got "
            f"{len(gold)} vs {len(pred)}"
        )
    hits = sum(1 for g, p in zip(gold, pred) if g == p)
    return 100.0 * hits / len(gold)


def per_class_f1(gold, pred) -> dict:
    """F1 per polarity class; zero-denominator classes get 0."""
    gold, pred = list(gold), list(pred)
    if len(gold) != len(pred) or not gold:
        raise DataError(
            f"f1 needs equal nonempty label sequences, got {len(gold)} vs {len(pred)}"
        )
    out = {}
    for cls in POLARITIES:
        tp = sum(1 for g, p in zip(gold, pred) if g == cls and p == cls)
        fp = sum(1 for g, p in zip(gold, pred) if g != cls and p == cls)
        fn = sum(1 for g, p in zip(gold, pred) if g == cls and p != cls)
        denom = 2 * tp + fp + fn
        out[cls] = (2.0 * tp / denom) if denom else 0.0
    return out


def macro_f1(gold, pred) -> float:
    """Unweighted mean of the three per-class F1 scores, as a percentage."""
    scores = per_class_f1(gold, pred)
    return 100.0 * sum(scores.values()) / len(POLARITIES)


@dataclass
class AspectMetrics:
    accuracy: float
    macro_f1: float
    n: int


@dataclass
class EvalReport:
    per_aspect: dict[Aspect, AspectMetrics]
    overall_accuracy: float
    overall_f1: float
    n_verbs: int


def evaluate(gold_frames, pred_frames) -> EvalReport:
    """Per-aspect accuracy/macro-F1 over matched verb sets, plus the
    unweighted mean across the nine aspects."""
    gold_by_verb = {f.verb: f for f in gold_frames}
    pred_by_verb = {f.verb: f for f in pred_frames}
    missing = sorted(set(gold_by_verb) - set(pred_by_verb))
    extra = sorted(set(pred_by_verb) - set(gold_by_verb))
    if missing or extra:
        raise DataError(
            "verb sets differ; "
            f"missing from predictions: {missing[:5]}{'...' if len(missing) > 5 else ''}, "
            f"not in gold: {extra[:5]}{'...' if len(extra) > 5 else ''}"
        )
    if not gold_by_verb:
        raise DataError("cannot evaluate an empty verb set")

    verbs = sorted(gold_by_verb)
    per_aspect = {}
    for aspect in ASPECTS:
        g = [gold_by_verb[v].labels[aspect] for v in verbs]
        p = [pred_by_verb[v].labels[aspect] for v in verbs]
        per_aspect[aspect] = AspectMetrics(accuracy(g, p), macro_f1(g, p), len(verbs))
    return EvalReport(
        per_aspect=per_aspect,
        overall_accuracy=sum(m.accuracy for m in per_aspect.values()) / len(ASPECTS),
        overall_f1=sum(m.macro_f1 for m in per_aspect.values()) / len(ASPECTS),
        n_verbs=len(verbs),
    )


def format_report(report: EvalReport) -> str:
    lines = [f"{'Aspect':8} {'Acc.':>8} {'Avg F1':>8}"]
    for aspect in ASPECTS:
        m = report.per_aspect[aspect]
        lines.append(f"{aspect.value:8} {m.accuracy:>8.2f} {m.macro_f1:>8.2f}")
    lines.append(
        f"{'overall':8} {report.overall_accuracy:>8.2f} {report.overall_f1:>8.2f}"
    )
    lines.append(f"verbs evaluated: {report.n_verbs}")
    lines.append(
        "macro-F1 averages the three polarity classes; a class absent from "
        "both gold and predictions contributes F1 = 0"
    )
    return "\n".join(lines)


def report_csv_rows(report: EvalReport):
    rows = [["aspect", "accuracy", "macro_f1", "n"]]
    for aspect in ASPECTS:
        m = report.per_aspect[aspect]
        rows.append([aspect.value, f"{m.accuracy:.4f}", f"{m.macro_f1:.4f}", str(m.n)])
    rows.append([
        "overall",
        f"{report.overall_accuracy:.4f}",
        f"{report.overall_f1:.4f}",
        str(report.n_verbs),
    ])
    return rows
