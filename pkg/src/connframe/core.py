"""Core value types: polarities, the nine frame aspects, connotation frames.

A connotation frame assigns one of three polarities to each of nine typed
relations a verb predicate implies between the writer (w), the agent (a),
and the theme (t): three perspectives, two effects, two values, and two
mental states.  Agent and theme are identified with subject and object
position; the agent<->theme perspective is modeled as a single reciprocal
relation; reader perspective is identified with writer perspective.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .errors import DataError, FormatError


class Polarity(enum.IntEnum):
    """Three-valued polarity with the fixed total order - < = < +.

    The integer values double as array indices everywhere (class order of
    classifiers, axes of factor tables), and the order is the documented
    tie-break rule: on ties the lowest polarity wins.
    """

    NEGATIVE = 0
    NEUTRAL = 1
    POSITIVE = 2

    @property
    def symbol(self) -> str:
        return "-=+"[int(self)]

    def opposite(self) -> "Polarity":
        """-/+ swap; neutral is its own opposite."""
        return Polarity(2 - int(self))


POLARITIES = (Polarity.NEGATIVE, Polarity.NEUTRAL, Polarity.POSITIVE)

_POLARITY_ALIASES = {
    "-": Polarity.NEGATIVE,
    "=": Polarity.NEUTRAL,
    "+": Polarity.POSITIVE,
    "neg": Polarity.NEGATIVE,
    "neu": Polarity.NEUTRAL,
    "pos": Polarity.POSITIVE,
}


def parse_polarity(text: str) -> Polarity:
    """Parse "-", "=", "+" or the aliases neg/neu/pos (case-insensitive)."""
    try:
        return _POLARITY_ALIASES[text.strip().lower()]
    except KeyError:
        raise FormatError(f"unrecognized polarity token: {text!r}") from None


def format_polarity(p: Polarity) -> str:
    return p.symbol


class Aspect(enum.Enum):
    """The nine typed relations of a frame, in canonical order.

    The enum value is the canonical short name used in every file format
    and report; definition order is the canonical row order.
    """

    WRITER_THEME = "P_wt"   # writer's perspective toward the theme
    WRITER_AGENT = "P_wa"   # writer's perspective toward the agent
    AGENT_THEME = "P_at"    # agent<->theme perspective (reciprocal)
    EFFECT_THEME = "E_t"    # is the event good or bad for the theme
    EFFECT_AGENT = "E_a"
    VALUE_THEME = "V_t"     # is the theme presupposed to be valuable
    VALUE_AGENT = "V_a"
    STATE_THEME = "S_t"     # likely resulting mental state of the theme
    STATE_AGENT = "S_a"

    def __str__(self):
        return self.value


ASPECTS = tuple(Aspect)

# Value questions were posed to annotators as yes/no rather than on the
# five-point sentiment scale.
VALUE_ASPECTS = frozenset({Aspect.VALUE_THEME, Aspect.VALUE_AGENT})

_ASPECT_BY_NAME = {a.value.lower(): a for a in ASPECTS}


def parse_aspect(text: str) -> Aspect:
    try:
        return _ASPECT_BY_NAME[text.strip().lower()]
    except KeyError:
        raise FormatError(f"unrecognized aspect name: {text!r}") from None


# Score cutoffs for turning a mean annotation score in [-1, 1] into a
# label: negative on [-1, -0.25), neutral on [-0.25, 0.25], positive on
# (0.25, 1]. Boundaries are inclusive to neutral.
NEGATIVE_CUTOFF = -0.25
POSITIVE_CUTOFF = 0.25


def polarity_from_score(score: float) -> Polarity:
    """Map a scalar score in [-1, 1] to a label by the fixed cutoffs."""
    if score < NEGATIVE_CUTOFF:
        return Polarity.NEGATIVE
    if score > POSITIVE_CUTOFF:
        return Polarity.POSITIVE
    return Polarity.NEUTRAL


@dataclass
class ConnotationFrame:
    """Per-verb assignment of a polarity (and optional score) to each aspect.

    A valid frame labels all nine aspects exactly once; scores, when
    present, live in [-1, 1] and fall in the cutoff region of their label.
    """

    verb: str
    labels: dict[Aspect, Polarity]
    scores: dict[Aspect, float] | None = None

    def label(self, aspect: Aspect) -> Polarity:
        return self.labels[aspect]


class ResponseScale(enum.Enum):
    """Annotator response values.

    Sentiment questions use the five-point scale (the or-neutral values
    exist for low-confidence leaning answers); value questions are yes/no.
    """

    POSITIVE = "pos"
    POSITIVE_OR_NEUTRAL = "pos_or_neu"
    NEUTRAL = "neu"
    NEGATIVE_OR_NEUTRAL = "neg_or_neu"
    NEGATIVE = "neg"
    YES = "yes"
    NO = "no"


_RESPONSE_BY_TOKEN = {r.value: r for r in ResponseScale}


def parse_response(text: str) -> ResponseScale:
    try:
        return _RESPONSE_BY_TOKEN[text.strip().lower()]
    except KeyError:
        raise FormatError(f"unrecognized response token: {text!r}") from None


def validate_frame(frame: ConnotationFrame) -> list[str]:
    """Check frame invariants; returns violation messages (empty = valid).

    Report-style on purpose: predicted frames can legitimately trip the
    score/label consistency check near marginal ties, and callers decide
    whether that matters.
    """
    problems = []
    missing = [a.value for a in ASPECTS if a not in frame.labels]
    if missing:
        problems.append("missing aspect labels: " + ", ".join(missing))
    extra = [k for k in frame.labels if not isinstance(k, Aspect)]
    if extra:
        problems.append(f"non-aspect label keys: {extra!r}")
    if frame.scores:
        for aspect, score in sorted(frame.scores.items(), key=lambda kv: kv[0].value):
            if not isinstance(aspect, Aspect):
                problems.append(f"non-aspect score key: {aspect!r}")
                continue
            if not -1.0 <= score <= 1.0:
                problems.append(f"{aspect.value}: score {score} outside [-1, 1]")
                continue
            label = frame.labels.get(aspect)
            if label is not None and polarity_from_score(score) is not label:
                problems.append(
                    f"{aspect.value}: score {score} is in the "
                    f"{polarity_from_score(score).symbol} cutoff region but the "
                    f"label is {label.symbol}"
                )
    return problems


# ---------------------------------------------------------------------------
# Lexicon TSV format
#
# One row per verb: verb, nine labels in canonical aspect order, and
# optionally nine scores.  Header row carries the aspect names; comment
# lines start with '#'.  Polarities are written as "-", "=", "+".
# ---------------------------------------------------------------------------

LEXICON_LABEL_COLUMNS = ["verb"] + [a.value for a in ASPECTS]
LEXICON_SCORE_COLUMNS = [f"{a.value}_score" for a in ASPECTS]


def write_lexicon(path, frames, include_scores="auto", header_lines=()):
    """Write frames as a lexicon TSV.

    include_scores: True, False, or "auto" (write scores iff every frame
    has a full score map).
    """
    frames = list(frames)
    if include_scores == "auto":
        include_scores = bool(frames) and all(
            f.scores is not None and all(a in f.scores for a in ASPECTS)
            for f in frames
        )
    columns = list(LEXICON_LABEL_COLUMNS)
    if include_scores:
        columns += LEXICON_SCORE_COLUMNS
    with open(path, "w", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write("\t".join(columns) + "\n")
        for frame in frames:
            row = [frame.verb]
            row += [frame.labels[a].symbol for a in ASPECTS]
            if include_scores:
                row += [repr(float(frame.scores[a])) for a in ASPECTS]
            fh.write("\t".join(row) + "\n")


def read_lexicon(path) -> list[ConnotationFrame]:
    """Read a lexicon TSV written by write_lexicon (extra columns ignored)."""
    frames = []
    with open(path, "r", encoding="utf-8") as fh:
        header = None
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            cells = line.split("\t")
            if header is None:
                header = [c.strip() for c in cells]
                if header[: len(LEXICON_LABEL_COLUMNS)] != LEXICON_LABEL_COLUMNS:
                    raise FormatError(
                        f"{path}:{lineno}: lexicon header must start with "
                        f"{' '.join(LEXICON_LABEL_COLUMNS)}"
                    )
                has_scores = header[
                    len(LEXICON_LABEL_COLUMNS) : len(LEXICON_LABEL_COLUMNS)
                    + len(LEXICON_SCORE_COLUMNS)
                ] == LEXICON_SCORE_COLUMNS
                continue
            want = len(LEXICON_LABEL_COLUMNS) + (
                len(LEXICON_SCORE_COLUMNS) if has_scores else 0
            )
            if len(cells) < want:
                raise FormatError(
                    f"{path}:{lineno}: expected at least {want} columns, got {len(cells)}"
                )
            verb = cells[0].strip()
            labels = {
                a: parse_polarity(cells[1 + i]) for i, a in enumerate(ASPECTS)
            }
            scores = None
            if has_scores:
                try:
                    scores = {
                        a: float(cells[10 + i]) for i, a in enumerate(ASPECTS)
                    }
                except ValueError as exc:
                    raise FormatError(f"{path}:{lineno}: bad score: {exc}") from None
            frames.append(ConnotationFrame(verb, labels, scores))
    if header is None:
        raise DataError(f"{path}: empty lexicon file")
    return frames
