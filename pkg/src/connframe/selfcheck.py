"""Built-in oracle suite: random tree graphs checked against brute-force
enumeration, loopy inference sanity, and finite-difference gradient checks.
Run from the CLI as `connframe selfcheck`; the test suite reuses the
generators.
"""

from __future__ import annotations

import numpy as np

from .aspect_model import nll_loss_and_grad
from .core import ASPECTS
from .factor_graph import FactorGraph, enumerate_marginals, loopy_sum_product, sum_product_tree
from .frame_model import (
    FrameWeights,
    PAIR_COUPLINGS,
    build_frame_graph,
    coupling_loss_and_grad,
    evidence_loss_and_grad,
)


def random_tree_graph(rng, max_vars=12, scale=2.0) -> FactorGraph:
    """Random acyclic factor graph with <= max_vars 3-valued variables.

    Grown so it stays a tree: every new factor touches exactly one
    existing variable, any further scope slots are fresh variables.
    Log-potentials are uniform on [-scale, scale].
    """
    graph = FactorGraph()
    n_vars = int(rng.integers(1, max_vars + 1))
    graph.add_variable("v00")
    existing = ["v00"]
    fid = 0
    while len(existing) < n_vars:
        room = n_vars - len(existing)
        arity = int(rng.integers(2, 2 + min(2, room)))
        anchor = existing[int(rng.integers(len(existing)))]
        scope = [anchor]
        for _ in range(arity - 1):
            vid = f"v{len(existing):02d}"
            graph.add_variable(vid)
            existing.append(vid)
            scope.append(vid)
        table = rng.uniform(-scale, scale, size=(3,) * arity)
        graph.add_factor(f"f{fid:02d}", scope, table)
        fid += 1
    for vid in existing:
        if rng.random() < 0.5:
            graph.add_factor(f"f{fid:02d}", (vid,), rng.uniform(-scale, scale, 3))
            fid += 1
    return graph


def random_frame_weights(rng, scale=2.0) -> FrameWeights:
    return FrameWeights(
        evidence={a: rng.uniform(-scale, scale, (3, 3)) for a in ASPECTS},
        pair={c: rng.uniform(-scale, scale, (3, 3)) for c in PAIR_COUPLINGS},
        triad=rng.uniform(-scale, scale, (3, 3, 3)),
    )


def random_aspect_preds(rng):
    from .core import POLARITIES

    return {a: POLARITIES[int(rng.integers(3))] for a in ASPECTS}


def marginal_gap(a, b) -> float:
    """Largest absolute difference between two marginal sets."""
    assert set(a.marginals) == set(b.marginals)
    return max(
        float(np.max(np.abs(a.marginals[v] - b.marginals[v]))) for v in a.marginals
    )


def fd_gradient(fun, x0, h=1e-5):
    """Central finite differences of a scalar function of a flat vector."""
    x0 = np.asarray(x0, dtype=float)
    grad = np.zeros_like(x0)
    for i in range(x0.size):
        step = np.zeros_like(x0)
        step[i] = h
        grad[i] = (fun(x0 + step) - fun(x0 - step)) / (2.0 * h)
    return grad


def max_relative_error(analytic, numeric) -> float:
    analytic = np.asarray(analytic, dtype=float).ravel()
    numeric = np.asarray(numeric, dtype=float).ravel()
    denom = np.maximum(np.abs(analytic) + np.abs(numeric), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denom))


# ---------------------------------------------------------------------------
# Check runners
# ---------------------------------------------------------------------------


def check_tree_exactness(n_graphs=25, seed=1, include_frame_graphs=True):
    """Max |tree BP - enumeration| over random trees and frame graphs."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_graphs):
        graph = random_tree_graph(rng)
        worst = max(worst, marginal_gap(sum_product_tree(graph),
                                        enumerate_marginals(graph)))
    if include_frame_graphs:
        for _ in range(max(1, n_graphs // 5)):
            graph = build_frame_graph(random_aspect_preds(rng),
                                      random_frame_weights(rng))
            worst = max(worst, marginal_gap(sum_product_tree(graph),
                                            enumerate_marginals(graph)))
    return worst


def check_loopy_on_trees(n_graphs=10, seed=2):
    rng = np.random.default_rng(seed)
    worst = 0.0
    all_converged = True
    for _ in range(n_graphs):
        graph = random_tree_graph(rng, max_vars=8)
        loopy = loopy_sum_product(graph, max_iters=300, damping=0.1, tol=1e-10)
        all_converged = all_converged and loopy.converged
        worst = max(worst, marginal_gap(loopy, sum_product_tree(graph)))
    return worst, all_converged


def check_gradients(n_points=5, seed=3):
    """Max finite-difference relative error across all loss families."""
    rng = np.random.default_rng(seed)
    worst = 0.0

    X = np.c_[rng.normal(size=(12, 4)), np.ones(12)]
    y_idx = rng.integers(0, 3, size=12)
    sample_w = rng.uniform(0.5, 2.0, size=12)
    for _ in range(n_points):
        w = rng.normal(scale=0.5, size=15)
        _, g = nll_loss_and_grad(w, X, y_idx, sample_w, l2=0.7)
        fd = fd_gradient(lambda v: nll_loss_and_grad(v, X, y_idx, sample_w, 0.7)[0], w)
        worst = max(worst, max_relative_error(g, fd))

    pairs = [(int(rng.integers(3)), int(rng.integers(3))) for _ in range(20)]
    for _ in range(n_points):
        theta = rng.normal(scale=0.5, size=(3, 3))
        _, g = evidence_loss_and_grad(theta, pairs, l2=0.1)
        fd = fd_gradient(
            lambda v: evidence_loss_and_grad(v.reshape(3, 3), pairs, 0.1)[0],
            theta.ravel(),
        )
        worst = max(worst, max_relative_error(g.ravel(), fd))

    for shape in ((3, 3), (3, 3, 3)):
        idxs = [
            tuple(int(rng.integers(3)) for _ in shape) for _ in range(20)
        ]
        for _ in range(n_points):
            theta = rng.normal(scale=0.5, size=shape)
            _, g = coupling_loss_and_grad(theta, idxs, l2=0.1)
            fd = fd_gradient(
                lambda v: coupling_loss_and_grad(v.reshape(shape), idxs, 0.1)[0],
                theta.ravel(),
            )
            worst = max(worst, max_relative_error(g.ravel(), fd))
    return worst


def run_selfcheck(seed=1, out=print) -> bool:
    """Run every check; prints one line per check, returns overall pass."""
    ok = True

    gap = check_tree_exactness(seed=seed)
    passed = gap < 1e-9
    ok = ok and passed
    out(f"tree sum-product vs enumeration: max gap {gap:.2e} "
        f"{'PASS' if passed else 'FAIL'} (< 1e-9)")

    gap, converged = check_loopy_on_trees(seed=seed + 1)
    passed = converged and gap < 1e-7
    ok = ok and passed
    out(f"loopy sum-product on trees: max gap {gap:.2e} converged={converged} "
        f"{'PASS' if passed else 'FAIL'} (< 1e-7)")

    err = check_gradients(seed=seed + 2)
    passed = err < 1e-4
    ok = ok and passed
    out(f"analytic vs finite-difference gradients: max rel err {err:.2e} "
        f"{'PASS' if passed else 'FAIL'} (< 1e-4)")
    return ok
