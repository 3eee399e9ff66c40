"""Frame-level model: the 9-node tree factor graph over a verb's aspects.

Each aspect node carries a unary evidence factor whose 3x3 table is
indexed by (aspect-level predicted label, node polarity); seven
interdependency factors couple the nodes: perspective-value and
perspective-effect and effect-state pairs for agent and theme, plus one
ternary factor tying the three perspective relations together.  All factor
tables are trained by piecewise likelihood - each factor as an independent
local log-linear model - with plain SGD, and prediction runs exact
sum-product on the tree followed by max-marginal decoding.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .aspect_model import predict_aspect_labels, predict_aspect_probs
from .base import ParamsMixin, check_fitted
from .core import ASPECTS, POLARITIES, Aspect, ConnotationFrame, Polarity, parse_polarity
from .errors import DataError, FormatError
from .factor_graph import FactorGraph, MarginalSet, max_marginal_decode, sum_product_tree
from .numutil import logsumexp, softmax

# The six pairwise couplings, in canonical order; each is a 3x3 table over
# (first aspect's polarity, second aspect's polarity).
PAIR_COUPLINGS = (
    (Aspect.WRITER_AGENT, Aspect.VALUE_AGENT),
    (Aspect.WRITER_THEME, Aspect.VALUE_THEME),
    (Aspect.AGENT_THEME, Aspect.EFFECT_AGENT),
    (Aspect.AGENT_THEME, Aspect.EFFECT_THEME),
    (Aspect.EFFECT_AGENT, Aspect.STATE_AGENT),
    (Aspect.EFFECT_THEME, Aspect.STATE_THEME),
)

# The ternary coupling over the three perspective relations.
TRIAD_SCOPE = (Aspect.WRITER_THEME, Aspect.WRITER_AGENT, Aspect.AGENT_THEME)

N_PARAMETERS = 9 * 9 + 6 * 9 + 27  # 162


@dataclass
class FrameWeights:
    """All learned factor tables.

    evidence[a][p, y]: unary weight for node polarity y when the aspect
    classifier predicted p; pair[(a, b)][ya, yb] and triad[ywt, ywa, yat]:
    interdependency weights over polarity combinations.
    """

    evidence: dict[Aspect, np.ndarray]
    pair: dict[tuple[Aspect, Aspect], np.ndarray]
    triad: np.ndarray

    @classmethod
    def zeros(cls) -> "FrameWeights":
        return cls(
            evidence={a: np.zeros((3, 3)) for a in ASPECTS},
            pair={c: np.zeros((3, 3)) for c in PAIR_COUPLINGS},
            triad=np.zeros((3, 3, 3)),
        )

    def validate(self):
        for a in ASPECTS:
            t = self.evidence.get(a)
            if t is None or np.shape(t) != (3, 3) or not np.all(np.isfinite(t)):
                raise DataError(f"bad evidence table for {a.value}")
        for c in PAIR_COUPLINGS:
            t = self.pair.get(c)
            if t is None or np.shape(t) != (3, 3) or not np.all(np.isfinite(t)):
                raise DataError(f"bad pair table for {c[0].value}-{c[1].value}")
        if np.shape(self.triad) != (3, 3, 3) or not np.all(np.isfinite(self.triad)):
            raise DataError("bad triad table")

    def n_parameters(self) -> int:
        return sum(t.size for t in self.evidence.values()) + sum(
            t.size for t in self.pair.values()
        ) + self.triad.size

    def copy(self) -> "FrameWeights":
        return FrameWeights(
            evidence={a: t.copy() for a, t in self.evidence.items()},
            pair={c: t.copy() for c, t in self.pair.items()},
            triad=self.triad.copy(),
        )


class SyntheticExample(NamedTuple):
    aspect_preds: dict
    gold: ConnotationFrame


# ---------------------------------------------------------------------------
# Graph construction
# ---------------------------------------------------------------------------


def _interdependency_factors(graph: FactorGraph, weights: FrameWeights):
    for a, b in PAIR_COUPLINGS:
        graph.add_factor(f"pair:{a.value}:{b.value}", (a.value, b.value),
                         weights.pair[(a, b)])
    graph.add_factor(
        "triad:" + ":".join(a.value for a in TRIAD_SCOPE),
        tuple(a.value for a in TRIAD_SCOPE),
        weights.triad,
    )


def _graph_from_unaries(unaries: dict[Aspect, np.ndarray], weights: FrameWeights):
    graph = FactorGraph()
    for a in ASPECTS:
        graph.add_variable(a.value)
    for a in ASPECTS:
        graph.add_factor(f"evidence:{a.value}", (a.value,), unaries[a])
    _interdependency_factors(graph, weights)
    assert graph.is_tree(), "frame graph must be acyclic by construction"
    return graph


def build_frame_graph(aspect_preds: dict[Aspect, Polarity],
                      weights: FrameWeights) -> FactorGraph:
    """Build the 9-variable, 16-factor tree for one verb.

    Each unary table is the evidence slice selected by that aspect's
    predicted label.
    """
    missing = [a.value for a in ASPECTS if a not in aspect_preds]
    if missing:
        raise DataError("missing aspect predictions: " + ", ".join(missing))
    unaries = {
        a: weights.evidence[a][int(aspect_preds[a]), :] for a in ASPECTS
    }
    return _graph_from_unaries(unaries, weights)


def build_frame_graph_soft(aspect_probs: dict[Aspect, np.ndarray],
                           weights: FrameWeights) -> FactorGraph:
    """Soft-evidence variant: unary = expected evidence row under the
    aspect classifier's predicted distribution."""
    missing = [a.value for a in ASPECTS if a not in aspect_probs]
    if missing:
        raise DataError("missing aspect probabilities: " + ", ".join(missing))
    unaries = {}
    for a in ASPECTS:
        p = np.asarray(aspect_probs[a], dtype=float)
        if p.shape != (3,):
            raise DataError(f"aspect probabilities for {a.value} must be a 3-vector")
        unaries[a] = p @ weights.evidence[a]
    return _graph_from_unaries(unaries, weights)


# ---------------------------------------------------------------------------
# Piecewise local objectives (mean NLL + (l2/2)|theta|^2) and their SGD
# ---------------------------------------------------------------------------


def evidence_loss_and_grad(theta, examples, l2=0.0):
    """Local unary objective: -log softmax(theta[pred])[gold], averaged.

    examples: sequence of (pred_idx, gold_idx).
    """
    theta = np.asarray(theta, dtype=float)
    n = len(examples)
    if n == 0:
        raise DataError("no examples for evidence factor")
    loss = 0.0
    grad = np.zeros_like(theta)
    for pred, gold in examples:
        row = theta[pred]
        loss += logsumexp(row) - row[gold]
        g = softmax(row)
        g[gold] -= 1.0
        grad[pred] += g
    loss /= n
    grad /= n
    loss += 0.5 * l2 * float(np.sum(theta * theta))
    grad += l2 * theta
    return loss, grad


def coupling_loss_and_grad(theta, examples, l2=0.0):
    """Local joint objective for a pair/triad table.

    Each example is an index tuple into theta; the partition function runs
    over the whole table (all polarity combinations).
    """
    theta = np.asarray(theta, dtype=float)
    n = len(examples)
    if n == 0:
        raise DataError("no examples for coupling factor")
    flat = theta.ravel()
    log_z = logsumexp(flat)
    loss = 0.0
    counts = np.zeros_like(theta)
    for idx in examples:
        loss += log_z - theta[idx]
        counts[idx] += 1.0
    loss /= n
    grad = softmax(flat).reshape(theta.shape) - counts / n
    loss += 0.5 * l2 * float(np.sum(theta * theta))
    grad = grad + l2 * theta
    return loss, grad


def _sgd(shape, examples, data_grad, lr, epochs, l2, rng, shuffle, batch_size):
    """Minimize mean NLL + (l2/2)|theta|^2 from a zero initialization.

    data_grad(theta, example) returns the single-example NLL gradient; the
    L2 term is added per step.  batch_size None means full batch.
    """
    theta = np.zeros(shape)
    n = len(examples)
    bs = n if batch_size is None else max(1, min(int(batch_size), n))
    for _ in range(epochs):
        order = rng.permutation(n) if shuffle else np.arange(n)
        for start in range(0, n, bs):
            batch = order[start:start + bs]
            g = np.zeros(shape)
            for i in batch:
                g += data_grad(theta, examples[int(i)])
            g /= len(batch)
            g += l2 * theta
            theta -= lr * g
    return theta


def _evidence_example_grad(theta, example):
    pred, gold = example
    g = np.zeros_like(theta)
    row_p = softmax(theta[pred])
    row_p[gold] -= 1.0
    g[pred] = row_p
    return g


def _coupling_example_grad(theta, example):
    g = softmax(theta.ravel()).reshape(theta.shape).copy()
    g[example] -= 1.0
    return g


def train_piecewise(train, learning_rate=0.1, epochs=50, l2=0.01, seed=1,
                    shuffle=True, batch_size=1) -> FrameWeights:
    """Train every factor table independently on (gold frame, aspect preds)
    pairs; deterministic given the seed (each factor gets its own stream)."""
    train = list(train)
    if not train:
        raise DataError("cannot train frame weights on an empty training set")
    for gold, preds in train:
        missing = [a.value for a in ASPECTS if a not in gold.labels or a not in preds]
        if missing:
            raise DataError(
                f"verb {gold.verb!r}: incomplete gold frame or predictions "
                f"({', '.join(missing)})"
            )

    weights = FrameWeights.zeros()
    stream = 0
    for a in ASPECTS:
        examples = [(int(preds[a]), int(gold.labels[a])) for gold, preds in train]
        rng = np.random.default_rng([seed, stream])
        weights.evidence[a] = _sgd((3, 3), examples, _evidence_example_grad,
                                   learning_rate, epochs, l2, rng, shuffle,
                                   batch_size)
        stream += 1
    for (a, b) in PAIR_COUPLINGS:
        examples = [(int(gold.labels[a]), int(gold.labels[b])) for gold, _ in train]
        rng = np.random.default_rng([seed, stream])
        weights.pair[(a, b)] = _sgd((3, 3), examples, _coupling_example_grad,
                                    learning_rate, epochs, l2, rng, shuffle,
                                    batch_size)
        stream += 1
    examples = [
        tuple(int(gold.labels[a]) for a in TRIAD_SCOPE) for gold, _ in train
    ]
    rng = np.random.default_rng([seed, stream])
    weights.triad = _sgd((3, 3, 3), examples, _coupling_example_grad,
                         learning_rate, epochs, l2, rng, shuffle, batch_size)
    return weights


# ---------------------------------------------------------------------------
# Prediction
# ---------------------------------------------------------------------------


def frame_marginals(aspect_preds, weights, soft_probs=None) -> MarginalSet:
    if soft_probs is not None:
        graph = build_frame_graph_soft(soft_probs, weights)
    else:
        graph = build_frame_graph(aspect_preds, weights)
    return sum_product_tree(graph)


def frame_from_marginals(verb: str, marginals: MarginalSet) -> ConnotationFrame:
    """Decode labels and attach the signed marginal score p(+) - p(-)."""
    decoded = max_marginal_decode(marginals)
    labels = {a: decoded[a.value] for a in ASPECTS}
    scores = {
        a: float(marginals[a.value][int(Polarity.POSITIVE)]
                 - marginals[a.value][int(Polarity.NEGATIVE)])
        for a in ASPECTS
    }
    return ConnotationFrame(verb, labels, scores)


def predict_frame(verb, aspect_models, table, weights,
                  soft_evidence=False) -> ConnotationFrame:
    """Full pipeline for one verb: aspect classifiers -> unary evidence ->
    exact sum-product -> max-marginal decode."""
    if soft_evidence:
        probs = predict_aspect_probs(aspect_models, verb, table)
        marginals = frame_marginals(None, weights, soft_probs=probs)
    else:
        preds = predict_aspect_labels(aspect_models, verb, table)
        marginals = frame_marginals(preds, weights)
    return frame_from_marginals(verb, marginals)


class FrameModel(ParamsMixin):
    """Estimator wrapper: fit learns FrameWeights piecewise, predict runs
    tree inference over given aspect predictions."""

    def __init__(self, learning_rate=0.1, epochs=50, l2=0.01, seed=1,
                 shuffle=True, batch_size=1, soft_evidence=False):
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.l2 = l2
        self.seed = seed
        self.shuffle = shuffle
        self.batch_size = batch_size
        self.soft_evidence = soft_evidence

    def fit(self, train):
        """train: iterable of (gold ConnotationFrame, aspect_preds dict)."""
        self.weights_ = train_piecewise(
            train,
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            l2=self.l2,
            seed=self.seed,
            shuffle=self.shuffle,
            batch_size=self.batch_size,
        )
        return self

    def predict_marginals(self, aspect_preds, soft_probs=None) -> MarginalSet:
        check_fitted(self, "weights_")
        return frame_marginals(aspect_preds, self.weights_, soft_probs=soft_probs)

    def predict(self, aspect_preds) -> dict[Aspect, Polarity]:
        marginals = self.predict_marginals(aspect_preds)
        decoded = max_marginal_decode(marginals)
        return {a: decoded[a.value] for a in ASPECTS}

    def predict_frame(self, verb, aspect_models, table) -> ConnotationFrame:
        check_fitted(self, "weights_")
        return predict_frame(verb, aspect_models, table, self.weights_,
                             soft_evidence=self.soft_evidence)


# ---------------------------------------------------------------------------
# Synthetic data
# ---------------------------------------------------------------------------


def _interdependency_joint(weights: FrameWeights) -> np.ndarray:
    """Joint log-score tensor over the 9 aspects (canonical axis order)
    from the interdependency factors only."""
    axis_of = {a: i for i, a in enumerate(ASPECTS)}
    joint = np.zeros((3,) * len(ASPECTS))
    for (a, b), table in weights.pair.items():
        axes = [axis_of[a], axis_of[b]]
        order = np.argsort(axes)
        t = np.transpose(table, order)
        shape = [3 if i in set(axes) else 1 for i in range(len(ASPECTS))]
        joint = joint + t.reshape(shape)
    axes = [axis_of[a] for a in TRIAD_SCOPE]
    order = np.argsort(axes)
    t = np.transpose(weights.triad, order)
    shape = [3 if i in set(axes) else 1 for i in range(len(ASPECTS))]
    joint = joint + t.reshape(shape)
    return joint


def generate_synthetic(weights: FrameWeights, n: int, seed: int,
                       noise: float = 0.0) -> list[SyntheticExample]:
    """Sample (aspect predictions, gold frame) pairs.

    Gold label vectors are drawn from the joint distribution defined by
    the interdependency factors (exact enumeration of the 3^9 states);
    aspect predictions flip away from gold with probability `noise`,
    uniformly to one of the two other polarities.
    """
    if n < 1:
        raise DataError(f"n must be >= 1, got {n}")
    if not 0.0 <= noise < 1.0:
        raise DataError(f"noise must be in [0, 1), got {noise}")
    joint = _interdependency_joint(weights)
    flat = joint.ravel()
    probs = np.exp(flat - logsumexp(flat))
    probs = probs / probs.sum()
    rng = np.random.default_rng(seed)
    draws = rng.choice(flat.size, size=n, p=probs)
    states = np.unravel_index(draws, joint.shape)

    out = []
    for i in range(n):
        gold_labels = {
            a: POLARITIES[int(states[k][i])] for k, a in enumerate(ASPECTS)
        }
        preds = {}
        for a in ASPECTS:
            if noise > 0.0 and rng.random() < noise:
                others = [p for p in POLARITIES if p is not gold_labels[a]]
                preds[a] = others[int(rng.integers(2))]
            else:
                preds[a] = gold_labels[a]
        gold = ConnotationFrame(f"v{i:04d}", gold_labels)
        out.append(SyntheticExample(preds, gold))
    return out


def coupled_frame_weights(strength: float = 1.5) -> FrameWeights:
    """Structured weights favoring the expected interdependencies:
    agreement on every pairwise coupling, and sign-consistency (the product
    of the three perspective signs is positive) on the triad."""
    weights = FrameWeights.zeros()
    for c in PAIR_COUPLINGS:
        weights.pair[c] = strength * np.eye(3)
    sign = {0: -1, 1: 0, 2: +1}
    triad = np.zeros((3, 3, 3))
    for i in range(3):
        for j in range(3):
            for k in range(3):
                s = sign[i] * sign[j] * sign[k]
                if s > 0:
                    triad[i, j, k] = strength
                elif s < 0:
                    triad[i, j, k] = -strength
    weights.triad = triad
    return weights


def channel_evidence(flip_prob: float) -> dict[Aspect, np.ndarray]:
    """Evidence tables matching a symmetric noise channel: entry [p, y] is
    log P(predicted = p | true polarity = y)."""
    if not 0.0 < flip_prob < 1.0:
        raise DataError(f"flip_prob must be in (0, 1), got {flip_prob}")
    table = np.full((3, 3), np.log(flip_prob / 2.0))
    np.fill_diagonal(table, np.log(1.0 - flip_prob))
    return {a: table.copy() for a in ASPECTS}


# ---------------------------------------------------------------------------
# Weights file: plain text with named indices; CSV export of each table.
# ---------------------------------------------------------------------------


def write_weights(path, weights: FrameWeights, header_lines=()):
    weights.validate()
    with open(path, "w", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        for a in ASPECTS:
            fh.write(f"table evidence {a.value}\n")
            for i, p in enumerate(POLARITIES):
                row = " ".join(repr(float(x)) for x in weights.evidence[a][i])
                fh.write(f"{p.symbol} {row}\n")
        for (a, b) in PAIR_COUPLINGS:
            fh.write(f"table pair {a.value} {b.value}\n")
            for i, p in enumerate(POLARITIES):
                row = " ".join(repr(float(x)) for x in weights.pair[(a, b)][i])
                fh.write(f"{p.symbol} {row}\n")
        fh.write("table triad " + " ".join(a.value for a in TRIAD_SCOPE) + "\n")
        for i, p1 in enumerate(POLARITIES):
            for j, p2 in enumerate(POLARITIES):
                row = " ".join(repr(float(x)) for x in weights.triad[i, j])
                fh.write(f"{p1.symbol} {p2.symbol} {row}\n")


def read_weights(path) -> FrameWeights:
    weights = FrameWeights.zeros()
    current = None  # (kind, key, rows-seen)
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            cells = line.split()
            if cells[0] == "table":
                current = _open_table(cells, path, lineno)
                continue
            if current is None:
                raise FormatError(f"{path}:{lineno}: row before any table header")
            _fill_row(weights, current, cells, path, lineno)
    weights.validate()
    return weights


def _open_table(cells, path, lineno):
    from .core import parse_aspect

    kind = cells[1] if len(cells) > 1 else ""
    if kind == "evidence" and len(cells) == 3:
        return ("evidence", parse_aspect(cells[2]))
    if kind == "pair" and len(cells) == 4:
        key = (parse_aspect(cells[2]), parse_aspect(cells[3]))
        if key not in PAIR_COUPLINGS:
            raise FormatError(f"{path}:{lineno}: unknown pair coupling {key}")
        return ("pair", key)
    if kind == "triad" and len(cells) == 5:
        scope = tuple(parse_aspect(c) for c in cells[2:])
        if scope != TRIAD_SCOPE:
            raise FormatError(f"{path}:{lineno}: unexpected triad scope")
        return ("triad", None)
    raise FormatError(f"{path}:{lineno}: bad table header: {' '.join(cells)}")


def _fill_row(weights, current, cells, path, lineno):
    kind, key = current
    n_index = 2 if kind == "triad" else 1
    if len(cells) != n_index + 3:
        raise FormatError(
            f"{path}:{lineno}: expected {n_index} index symbols and 3 values"
        )
    idx = tuple(int(parse_polarity(c)) for c in cells[:n_index])
    try:
        values = [float(c) for c in cells[n_index:]]
    except ValueError as exc:
        raise FormatError(f"{path}:{lineno}: bad float: {exc}") from None
    if kind == "evidence":
        weights.evidence[key][idx[0], :] = values
    elif kind == "pair":
        weights.pair[key][idx[0], :] = values
    else:
        weights.triad[idx[0], idx[1], :] = values


def export_weights_csv(weights: FrameWeights):
    """Rows for a heat-map-style CSV: one 3x3 block per table, the ternary
    table as three slices on its first index."""
    rows = [["table", "row", "-", "=", "+"]]
    def block(name, table):
        for i, p in enumerate(POLARITIES):
            rows.append([name, p.symbol] + [f"{x:.6f}" for x in table[i]])
    for a in ASPECTS:
        block(f"evidence[{a.value}]", weights.evidence[a])
    for (a, b) in PAIR_COUPLINGS:
        block(f"pair[{a.value},{b.value}]", weights.pair[(a, b)])
    for i, p in enumerate(POLARITIES):
        block(f"triad[{TRIAD_SCOPE[0].value}={p.symbol}]", weights.triad[i])
    return rows
