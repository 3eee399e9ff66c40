"""Crowdsourced-annotation aggregation and agreement statistics.

Each annotation item is one (verb, sentence, aspect) question answered by
several workers.  Sentiment questions use the five-point response scale;
value questions are yes/no.  Aggregation averages the numeric responses
per (verb, aspect) and cuts the mean at +/-0.25 into a polarity label.
"""

from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass

from .core import (
    ASPECTS,
    Aspect,
    ConnotationFrame,
    Polarity,
    ResponseScale,
    parse_aspect,
    parse_response,
    polarity_from_score,
)
from .errors import DataError, FormatError

RESPONSE_SCORES = {
    ResponseScale.POSITIVE: 1.0,
    ResponseScale.POSITIVE_OR_NEUTRAL: 0.5,
    ResponseScale.NEUTRAL: 0.0,
    ResponseScale.NEGATIVE_OR_NEUTRAL: -0.5,
    ResponseScale.NEGATIVE: -1.0,
    ResponseScale.YES: 1.0,
    ResponseScale.NO: 0.0,
}

# Which 3-class labels a response is compatible with (strict agreement),
# and its polar component (non-conflicting agreement).
_RESPONSE_CLASSES = {
    ResponseScale.POSITIVE: frozenset({Polarity.POSITIVE}),
    ResponseScale.POSITIVE_OR_NEUTRAL: frozenset({Polarity.POSITIVE, Polarity.NEUTRAL}),
    ResponseScale.NEUTRAL: frozenset({Polarity.NEUTRAL}),
    ResponseScale.NEGATIVE_OR_NEUTRAL: frozenset({Polarity.NEGATIVE, Polarity.NEUTRAL}),
    ResponseScale.NEGATIVE: frozenset({Polarity.NEGATIVE}),
    ResponseScale.YES: frozenset({Polarity.POSITIVE}),
    ResponseScale.NO: frozenset({Polarity.NEUTRAL}),
}

_POLAR_COMPONENT = {
    ResponseScale.POSITIVE: 1,
    ResponseScale.POSITIVE_OR_NEUTRAL: 1,
    ResponseScale.NEUTRAL: 0,
    ResponseScale.NEGATIVE_OR_NEUTRAL: -1,
    ResponseScale.NEGATIVE: -1,
    ResponseScale.YES: 1,
    ResponseScale.NO: 0,
}


@dataclass(frozen=True)
class AnnotationRecord:
    verb: str
    sentence_id: int
    worker_id: str
    aspect: Aspect
    response: ResponseScale


@dataclass(frozen=True)
class AggregatedLabel:
    verb: str
    aspect: Aspect
    mean_score: float
    label: Polarity
    n: int


def response_to_score(response: ResponseScale) -> float:
    return RESPONSE_SCORES[response]


def aggregate(records) -> AggregatedLabel:
    """Aggregate all responses for one (verb, aspect) into a label.

    Mean of the numeric responses, labeled by the fixed cutoffs (negative
    below -0.25, positive above +0.25, neutral on the closed middle).
    """
    records = list(records)
    if not records:
        raise DataError("cannot aggregate zero annotation records")
    keys = {(r.verb, r.aspect) for r in records}
    if len(keys) > 1:
        raise DataError(f"aggregate expects one (verb, aspect), got {sorted(str(k) for k in keys)}")
    mean = sum(response_to_score(r.response) for r in records) / len(records)
    return AggregatedLabel(
        verb=records[0].verb,
        aspect=records[0].aspect,
        mean_score=mean,
        label=polarity_from_score(mean),
        n=len(records),
    )


def aggregate_frames(records):
    """Aggregate a full record set into per-verb frames.

    Returns (frames, incomplete): frames for verbs covering all nine
    aspects, and the list of verbs skipped for missing aspects.
    """
    by_verb_aspect = defaultdict(list)
    for r in records:
        by_verb_aspect[(r.verb, r.aspect)].append(r)
    by_verb = defaultdict(dict)
    for (verb, aspect), recs in by_verb_aspect.items():
        by_verb[verb][aspect] = aggregate(recs)
    frames, incomplete = [], []
    for verb in sorted(by_verb):
        agg = by_verb[verb]
        if any(a not in agg for a in ASPECTS):
            incomplete.append(verb)
            continue
        frames.append(
            ConnotationFrame(
                verb,
                labels={a: agg[a].label for a in ASPECTS},
                scores={a: agg[a].mean_score for a in ASPECTS},
            )
        )
    return frames, incomplete


# ---------------------------------------------------------------------------
# Agreement
# ---------------------------------------------------------------------------


def _items(records):
    """Group responses by annotation item (verb, sentence, aspect)."""
    items = defaultdict(list)
    for r in records:
        items[(r.verb, r.sentence_id, r.aspect)].append(r.response)
    return items


def _strict_agree(a: ResponseScale, b: ResponseScale) -> bool:
    # Compatible class sets, except that directly conflicting polar
    # components (pos_or_neu vs neg_or_neu) never count as agreement;
    # this keeps strict a refinement of non-conflicting agreement.
    if _POLAR_COMPONENT[a] * _POLAR_COMPONENT[b] < 0:
        return False
    return bool(_RESPONSE_CLASSES[a] & _RESPONSE_CLASSES[b])


def _nc_agree(a: ResponseScale, b: ResponseScale) -> bool:
    return _POLAR_COMPONENT[a] * _POLAR_COMPONENT[b] >= 0


def _pairwise_percent(records, agree) -> float:
    total = agreed = 0
    for responses in _items(records).values():
        if len(responses) < 2:
            continue
        for i in range(len(responses)):
            for j in range(i + 1, len(responses)):
                total += 1
                if agree(responses[i], responses[j]):
                    agreed += 1
    if total == 0:
        raise DataError("agreement needs at least one item with two workers")
    return 100.0 * agreed / total


def strict_agreement(records) -> float:
    """Pairwise percent agreement over 3 classes; an or-neutral response
    agrees with either of its two classes."""
    return _pairwise_percent(records, _strict_agree)


def nc_agreement(records) -> float:
    """Non-conflicting percent agreement: only opposite polarities (one
    response leaning +, the other -) count as disagreement."""
    return _pairwise_percent(records, _nc_agree)


# ---------------------------------------------------------------------------
# Krippendorff's alpha (nominal, 3 classes)
# ---------------------------------------------------------------------------


def collapse_response(response: ResponseScale, collapse="polar") -> Polarity:
    """Collapse the five-point scale to three classes for alpha.

    collapse="polar" treats or-neutral responses as weak polar votes;
    "neutral" sends them to the neutral class.  yes/no map to +/=.
    """
    if collapse not in ("polar", "neutral"):
        raise DataError(f"unknown collapse mode {collapse!r}")
    if response is ResponseScale.POSITIVE_OR_NEUTRAL:
        return Polarity.POSITIVE if collapse == "polar" else Polarity.NEUTRAL
    if response is ResponseScale.NEGATIVE_OR_NEUTRAL:
        return Polarity.NEGATIVE if collapse == "polar" else Polarity.NEUTRAL
    return {
        ResponseScale.POSITIVE: Polarity.POSITIVE,
        ResponseScale.NEUTRAL: Polarity.NEUTRAL,
        ResponseScale.NEGATIVE: Polarity.NEGATIVE,
        ResponseScale.YES: Polarity.POSITIVE,
        ResponseScale.NO: Polarity.NEUTRAL,
    }[response]


def _alpha_from_units(units) -> float:
    """alpha = 1 - D_o/D_e with the nominal metric.

    units: iterable of per-unit value lists (only pairable units, len >= 2).
    """
    units = [u for u in units if len(u) >= 2]
    if not units:
        raise DataError("alpha is undefined without co-annotated items")
    n = sum(len(u) for u in units)
    d_o = 0.0
    for values in units:
        m = len(values)
        disagree = sum(
            1 for i in range(m) for j in range(m) if i != j and values[i] != values[j]
        )
        d_o += disagree / (m - 1)
    d_o /= n

    pooled = defaultdict(int)
    for values in units:
        for v in values:
            pooled[v] += 1
    d_e = 0.0
    for a, ca in pooled.items():
        for b, cb in pooled.items():
            if a != b:
                d_e += ca * cb
    d_e /= n * (n - 1)

    if d_e == 0.0:
        return 1.0  # every pooled value identical: perfect agreement
    return 1.0 - d_o / d_e


def krippendorff_alpha(records, collapse="polar") -> float:
    """Nominal-metric alpha per aspect (units are (verb, sentence) pairs),
    averaged over the aspects that have co-annotated items."""
    by_aspect = defaultdict(lambda: defaultdict(list))
    for r in records:
        by_aspect[r.aspect][(r.verb, r.sentence_id)].append(
            collapse_response(r.response, collapse)
        )
    alphas = []
    for aspect in ASPECTS:
        if aspect not in by_aspect:
            continue
        units = [u for u in by_aspect[aspect].values() if len(u) >= 2]
        if units:
            alphas.append(_alpha_from_units(units))
    if not alphas:
        raise DataError("alpha is undefined without co-annotated items")
    return sum(alphas) / len(alphas)


# ---------------------------------------------------------------------------
# CSV input and the agreement report
# ---------------------------------------------------------------------------

ANNOTATION_COLUMNS = ["verb", "sentence_id", "worker_id", "aspect", "response"]


def read_annotations(path) -> list[AnnotationRecord]:
    """Read annotation CSV: verb,sentence_id,worker_id,aspect,response."""
    records = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(row for row in fh if not row.startswith("#"))
        header = None
        for lineno, row in enumerate(reader, start=1):
            if not row:
                continue
            if header is None:
                header = [c.strip().lower() for c in row]
                if header != ANNOTATION_COLUMNS:
                    raise FormatError(
                        f"{path}:{lineno}: header must be "
                        + ",".join(ANNOTATION_COLUMNS)
                    )
                continue
            if len(row) != 5:
                raise FormatError(f"{path}:{lineno}: expected 5 columns, got {len(row)}")
            try:
                sentence_id = int(row[1])
            except ValueError:
                raise FormatError(
                    f"{path}:{lineno}: bad sentence id {row[1]!r}"
                ) from None
            if not 1 <= sentence_id <= 5:
                raise FormatError(
                    f"{path}:{lineno}: sentence id must be in 1..5, got {sentence_id}"
                )
            records.append(
                AnnotationRecord(
                    verb=row[0].strip(),
                    sentence_id=sentence_id,
                    worker_id=row[2].strip(),
                    aspect=parse_aspect(row[3]),
                    response=parse_response(row[4]),
                )
            )
    if header is None:
        raise DataError(f"{path}: empty annotation file")
    dupes = defaultdict(int)
    for r in records:
        dupes[(r.verb, r.sentence_id, r.worker_id, r.aspect)] += 1
    repeated = [k for k, v in dupes.items() if v > 1]
    if repeated:
        raise DataError(
            f"{path}: {len(repeated)} duplicate (verb, sentence, worker, aspect) "
            f"responses (first: {repeated[0]})"
        )
    return records


def agreement_report(records, collapse="polar") -> str:
    """Per-aspect strict/NC agreement plus final label distribution and the
    average alpha, formatted as a text table.

    Value aspects were yes/no questions, so their NC column is blank.
    """
    from .core import VALUE_ASPECTS

    records = list(records)
    frames, _ = aggregate_frames(records)
    dist = {a: {p: 0 for p in Polarity} for a in ASPECTS}
    for f in frames:
        for a in ASPECTS:
            dist[a][f.labels[a]] += 1

    lines = []
    lines.append(f"{'Aspect':8} {'Strict':>8} {'NC':>8} {'%+':>8} {'%-':>8}")
    for aspect in ASPECTS:
        recs = [r for r in records if r.aspect is aspect]
        if not recs:
            continue
        strict = f"{strict_agreement(recs):.1f}"
        nc = "-" if aspect in VALUE_ASPECTS else f"{nc_agreement(recs):.1f}"
        n = max(1, sum(dist[aspect].values()))
        pos = 100.0 * dist[aspect][Polarity.POSITIVE] / n
        neg = 100.0 * dist[aspect][Polarity.NEGATIVE] / n
        lines.append(
            f"{aspect.value:8} {strict:>8} {nc:>8} {pos:>8.1f} {neg:>8.1f}"
        )
    alpha = krippendorff_alpha(records, collapse)
    lines.append(
        f"average Krippendorff alpha (nominal, or-neutral collapsed to "
        f"{collapse}): {alpha:.3f}"
    )
    return "\n".join(lines)
