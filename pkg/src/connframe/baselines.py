"""Reference systems: Majority, k-nearest-neighbor, and similarity-graph
label propagation via loopy belief propagation.
"""

from __future__ import annotations

import numpy as np

from .base import ParamsMixin, check_fitted
from .core import ASPECTS, POLARITIES, Aspect, ConnotationFrame, Polarity
from .embeddings import EmbeddingTable, cosine, nearest_neighbors
from .errors import DataError
from .factor_graph import FactorGraph, loopy_sum_product, max_marginal_decode

SEED_LOG_POTENTIAL = 5.0  # strong but finite unary evidence on seed labels


class MajorityBaseline(ParamsMixin):
    """Constant predictor: each aspect gets its most frequent training
    label; count ties resolve to the lowest polarity."""

    def __init__(self):
        pass

    def fit(self, frames):
        frames = list(frames)
        if not frames:
            raise DataError("majority baseline needs a nonempty training set")
        self.labels_ = {}
        for aspect in ASPECTS:
            counts = {p: 0 for p in POLARITIES}
            for frame in frames:
                counts[frame.labels[aspect]] += 1
            self.labels_[aspect] = max(POLARITIES, key=lambda p: (counts[p], -int(p)))
        return self

    def predict(self, verbs):
        check_fitted(self, "labels_")
        return [ConnotationFrame(v, dict(self.labels_)) for v in verbs]


def knn_predict(verb, k, train, table: EmbeddingTable) -> ConnotationFrame:
    """Label a verb from its k most cosine-similar training verbs.

    Per aspect: majority vote among the neighbors' labels; a vote tie goes
    to the nearest neighbor's label when that label is among the tied
    winners, otherwise to the lowest tied polarity.
    """
    train = list(train)
    frames_by_verb = {f.verb: f for f in train}
    embedded = [v for v in frames_by_verb if v in table]
    if len(embedded) < k:
        raise DataError(
            f"need at least {k} embedded training verbs, have {len(embedded)}"
        )
    neighbors = nearest_neighbors(verb, k, embedded, table)
    labels = {}
    for aspect in ASPECTS:
        votes = {p: 0 for p in POLARITIES}
        for token, _ in neighbors:
            votes[frames_by_verb[token].labels[aspect]] += 1
        top = max(votes.values())
        winners = [p for p in POLARITIES if votes[p] == top]
        nearest_label = frames_by_verb[neighbors[0][0]].labels[aspect]
        labels[aspect] = nearest_label if nearest_label in winners else winners[0]
    return ConnotationFrame(verb, labels)


class KnnBaseline(ParamsMixin):
    def __init__(self, k=3):
        self.k = k

    def fit(self, frames, table: EmbeddingTable):
        self.train_ = list(frames)
        self.table_ = table
        if not self.train_:
            raise DataError("knn baseline needs a nonempty training set")
        return self

    def predict(self, verbs):
        check_fitted(self, "train_")
        return [knn_predict(v, self.k, self.train_, self.table_) for v in verbs]


# ---------------------------------------------------------------------------
# Graph propagation
# ---------------------------------------------------------------------------


def build_similarity_graph(seeds, all_verbs, table, top_k=10, sim_floor=0.0,
                           potential_scale=1.0):
    """One variable per verb; agreement factors between similar verbs.

    Each verb links to its top_k most similar verbs with cosine >= sim_floor
    (edges deduplicated); the pairwise log-potential is potential_scale *
    cosine on the agreement diagonal, 0 elsewhere.  Seed verbs get a strong
    unary factor on their seed label.  Returns (graph, isolated) where
    isolated lists unseeded verbs with no factors at all.
    """
    if not seeds:
        raise DataError("graph propagation needs a nonempty seed set")
    if top_k < 1:
        raise DataError(f"top_k must be >= 1, got {top_k}")
    verbs = sorted(set(all_verbs) | set(seeds))
    absent = [v for v in verbs if v not in table]
    if absent:
        raise DataError(
            f"{len(absent)} verbs are missing from the embedding table "
            f"(first: {absent[0]!r})"
        )
    graph = FactorGraph()
    for v in verbs:
        graph.add_variable(v)

    edges = set()
    for v in verbs:
        candidates = [u for u in verbs if u != v]
        if not candidates:
            continue
        for u, sim in nearest_neighbors(v, top_k, candidates, table):
            if sim >= sim_floor:
                edges.add((min(u, v), max(u, v)))
    for u, v in sorted(edges):
        sim = cosine(table[u], table[v])
        potential = np.zeros((3, 3))
        np.fill_diagonal(potential, potential_scale * sim)
        graph.add_factor(f"sim:{u}:{v}", (u, v), potential)

    for v in sorted(seeds):
        unary = np.zeros(3)
        unary[int(seeds[v])] = SEED_LOG_POTENTIAL
        graph.add_factor(f"seed:{v}", (v,), unary)

    isolated = [v for v in verbs if not graph.factors_of(v)]
    return graph, isolated


def graph_prop(aspect: Aspect, seeds: dict[str, Polarity], all_verbs, table,
               top_k=10, sim_floor=0.0, potential_scale=1.0, max_iters=100,
               damping=0.1, tol=1e-6):
    """Propagate seed labels for one aspect over the verb-similarity graph.

    Returns (labels, isolated): labels for every verb, and the list of
    unseeded, edge-less verbs that defaulted to neutral.
    """
    graph, isolated = build_similarity_graph(
        seeds, all_verbs, table, top_k=top_k, sim_floor=sim_floor,
        potential_scale=potential_scale,
    )
    result = loopy_sum_product(graph, max_iters=max_iters, damping=damping,
                               tol=tol)
    labels = max_marginal_decode(result)
    for v in isolated:
        labels[v] = Polarity.NEUTRAL
    return labels, isolated


class GraphPropBaseline(ParamsMixin):
    """Per-aspect label propagation with loopy BP over verb similarity."""

    def __init__(self, top_k=10, sim_floor=0.0, potential_scale=1.0,
                 max_iters=100, damping=0.1, tol=1e-6):
        self.top_k = top_k
        self.sim_floor = sim_floor
        self.potential_scale = potential_scale
        self.max_iters = max_iters
        self.damping = damping
        self.tol = tol

    def fit(self, frames, table: EmbeddingTable):
        frames = list(frames)
        if not frames:
            raise DataError("graph propagation needs a nonempty training set")
        self.seeds_ = {
            aspect: {f.verb: f.labels[aspect] for f in frames if f.verb in table}
            for aspect in ASPECTS
        }
        if not any(self.seeds_[a] for a in ASPECTS):
            raise DataError("no seed verbs are present in the embedding table")
        self.table_ = table
        return self

    def predict(self, verbs):
        """Returns frames for `verbs`; also records per-aspect isolated-verb
        warning counts in self.isolated_counts_."""
        check_fitted(self, "seeds_")
        verbs = list(verbs)
        per_aspect = {}
        self.isolated_counts_ = {}
        for aspect in ASPECTS:
            labels, isolated = graph_prop(
                aspect, self.seeds_[aspect], verbs, self.table_,
                top_k=self.top_k, sim_floor=self.sim_floor,
                potential_scale=self.potential_scale,
                max_iters=self.max_iters, damping=self.damping, tol=self.tol,
            )
            per_aspect[aspect] = labels
            self.isolated_counts_[aspect] = len(isolated)
        return [
            ConnotationFrame(v, {a: per_aspect[a][v] for a in ASPECTS})
            for v in verbs
        ]
