"""Corpus-level analysis over pre-extracted (source, subject, verb,
object, count) tuples: entity-to-entity perspective scores, left/right
argument contrasts, and argument-polarity composition.

Tuple files can be very large, so everything here streams: readers yield
one tuple at a time and aggregations keep only per-pattern accumulators,
which merge commutatively across file shards.
"""

from __future__ import annotations

import enum
from collections import defaultdict
from dataclasses import dataclass
from typing import NamedTuple

from .core import Aspect, Polarity, parse_polarity
from .errors import DataError, FormatError


@dataclass(frozen=True)
class SVOTuple:
    source: str
    subject: str
    verb: str
    object: str
    count: int


class Leaning(enum.Enum):
    LEFT = "left"
    RIGHT = "right"
    UNKNOWN = "unknown"


class TupleReader:
    """Streaming iterator over a tuple TSV.

    Malformed lines (wrong column count, non-positive or non-integer
    count) are skipped and counted in .skipped; memory use is one line.
    """

    def __init__(self, path):
        self.path = path
        self.skipped = 0

    def __iter__(self):
        with open(self.path, "r", encoding="utf-8") as fh:
            for raw in fh:
                line = raw.rstrip("\n")
                if not line.strip() or line.lstrip().startswith("#"):
                    continue
                cells = line.split("\t")
                if len(cells) != 5:
                    self.skipped += 1
                    continue
                try:
                    count = int(cells[4])
                except ValueError:
                    self.skipped += 1
                    continue
                if count < 1:
                    self.skipped += 1
                    continue
                yield SVOTuple(cells[0], cells[1], cells[2], cells[3], count)


def load_tuples(path) -> TupleReader:
    return TupleReader(path)


def phrase_contains(phrase: str, pattern: str) -> bool:
    """Case-folded token-level containment: the pattern's tokens appear as
    a contiguous run inside the phrase's tokens."""
    hay = phrase.casefold().split()
    needle = pattern.casefold().split()
    if not needle:
        return False
    k = len(needle)
    return any(hay[i : i + k] == needle for i in range(len(hay) - k + 1))


def lexicon_scores(frames, aspect: Aspect = Aspect.AGENT_THEME) -> dict[str, float]:
    """Verb -> numeric score for one aspect; frames without scores fall
    back to the label mapped to {-1, 0, +1}."""
    out = {}
    for frame in frames:
        if frame.scores is not None and aspect in frame.scores:
            out[frame.verb] = float(frame.scores[aspect])
        else:
            out[frame.verb] = float(int(frame.labels[aspect]) - 1)
    return out


@dataclass
class EntitySentimentRow:
    agent_pattern: str
    theme_pattern: str
    score: float
    support: int
    skipped_verbs: int = 0


class _PairAccumulator:
    __slots__ = ("weighted", "support", "skipped")

    def __init__(self):
        self.weighted = 0.0
        self.support = 0
        self.skipped = 0


def entity_pair_scores(pairs, tuples, scores: dict[str, float],
                       unweighted=False) -> list[EntitySentimentRow]:
    """Score every (agent_pattern, theme_pattern) pair in one streaming
    pass over the tuples.

    A tuple matches a pair when the agent pattern occurs in its subject
    and (if the theme pattern is nonempty) the theme pattern occurs in its
    object.  Scores are the count-weighted mean of the verbs' scores
    (each unique tuple counts once with unweighted=True); matched tuples
    whose verb has no lexicon entry are skipped and counted.
    """
    pairs = [(a, t) for a, t in pairs]
    if not pairs:
        raise DataError("no entity pairs given")
    acc = {pair: _PairAccumulator() for pair in pairs}
    for tup in tuples:
        weight = 1 if unweighted else tup.count
        for pair in pairs:
            agent, theme = pair
            if not phrase_contains(tup.subject, agent):
                continue
            if theme and not phrase_contains(tup.object, theme):
                continue
            a = acc[pair]
            if tup.verb not in scores:
                a.skipped += 1
                continue
            a.weighted += weight * scores[tup.verb]
            a.support += weight
    rows = []
    for pair in pairs:
        a = acc[pair]
        if a.support == 0:
            raise DataError(
                f"no scored tuples match agent={pair[0]!r} theme={pair[1]!r}"
            )
        rows.append(
            EntitySentimentRow(pair[0], pair[1], a.weighted / a.support,
                               a.support, a.skipped)
        )
    return rows


def entity_pair_score(agent_pattern, theme_pattern, tuples,
                      scores: dict[str, float], unweighted=False) -> EntitySentimentRow:
    return entity_pair_scores([(agent_pattern, theme_pattern)], tuples,
                              scores, unweighted=unweighted)[0]


def read_leanings(path) -> dict[str, Leaning]:
    """Leanings TSV: source<TAB>{left,right}; lookups default to unknown."""
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            cells = line.split("\t")
            if len(cells) != 2:
                raise FormatError(f"{path}:{lineno}: expected 2 columns")
            token = cells[1].strip().lower()
            if token not in ("left", "right"):
                raise FormatError(
                    f"{path}:{lineno}: leaning must be left or right, got {token!r}"
                )
            out[cells[0].strip()] = Leaning(token)
    return out


def leaning_contrast(verb, role, leaning: Leaning, tuples,
                     leanings: dict[str, Leaning], n: int):
    """Top-n argument phrases (by summed count, ties lexicographic) used in
    the given role of the verb by sources of the given leaning."""
    if role not in ("agent", "theme"):
        raise DataError(f"role must be agent or theme, got {role!r}")
    if n < 1:
        raise DataError(f"n must be positive, got {n}")
    counts = defaultdict(int)
    for tup in tuples:
        if tup.verb != verb:
            continue
        if leanings.get(tup.source, Leaning.UNKNOWN) is not leaning:
            continue
        phrase = tup.subject if role == "agent" else tup.object
        counts[phrase] += tup.count
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return ranked[:n]


class RoleComposition(NamedTuple):
    positive: float    # percentages over matched argument occurrences
    negative: float
    neutral: float
    matched: int       # total count-weighted occurrences
    unlisted: int      # occurrences whose head word had no lexicon entry


def read_word_polarities(path) -> dict[str, Polarity]:
    """Word polarity list: word<TAB>{-,=,+} (case-folded keys)."""
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            cells = line.split("\t")
            if len(cells) != 2:
                raise FormatError(f"{path}:{lineno}: expected 2 columns")
            out[cells[0].strip().casefold()] = parse_polarity(cells[1])
    return out


def subjectivity_composition(verb, role, tuples,
                             word_polarities: dict[str, Polarity]) -> RoleComposition:
    """Count-weighted polarity distribution of argument head words (the
    final token of the phrase) for one verb and role.

    Head words missing from the polarity list land in the neutral bucket
    and are also reported separately as `unlisted`.
    """
    if role not in ("agent", "theme"):
        raise DataError(f"role must be agent or theme, got {role!r}")
    buckets = {p: 0 for p in Polarity}
    unlisted = 0
    for tup in tuples:
        if tup.verb != verb:
            continue
        phrase = tup.subject if role == "agent" else tup.object
        tokens = phrase.casefold().split()
        if not tokens:
            continue
        head = tokens[-1]
        polarity = word_polarities.get(head)
        if polarity is None:
            unlisted += tup.count
            buckets[Polarity.NEUTRAL] += tup.count
        else:
            buckets[polarity] += tup.count
    total = sum(buckets.values())
    if total == 0:
        return RoleComposition(0.0, 0.0, 0.0, 0, 0)
    return RoleComposition(
        positive=100.0 * buckets[Polarity.POSITIVE] / total,
        negative=100.0 * buckets[Polarity.NEGATIVE] / total,
        neutral=100.0 * buckets[Polarity.NEUTRAL] / total,
        matched=total,
        unlisted=unlisted,
    )
