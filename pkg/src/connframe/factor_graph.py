"""Discrete factor-graph engine over 3-valued variables.

Log-linear factors of arity 1-3, exact sum-product on trees (two passes,
leaves to root and back), loopy sum-product with damping for cyclic
graphs, and a brute-force enumeration oracle.  Messages are kept in
probability space and normalized after every update, which makes the
proportionality of the message equations concrete; root choice and update
order are fixed (lowest id first) so results are bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import POLARITIES, Polarity
from .errors import DataError, GraphStructureError
from .numutil import logsumexp

DOMAIN = 3
MAX_ENUM_VARIABLES = 12  # enumeration guard: at most 3**12 joint states

_AXES = "abc"


@dataclass(frozen=True)
class Variable:
    id: str
    domain_size: int = DOMAIN


class Factor:
    """A log-potential table over an ordered scope of 1-3 variables."""

    def __init__(self, id: str, scope, log_potential):
        table = np.asarray(log_potential, dtype=float)
        scope = tuple(scope)
        if not 1 <= len(scope) <= 3:
            raise DataError(f"factor {id!r}: arity must be 1-3, got {len(scope)}")
        if len(set(scope)) != len(scope):
            raise DataError(f"factor {id!r}: repeated variable in scope {scope}")
        if table.shape != (DOMAIN,) * len(scope):
            raise DataError(
                f"factor {id!r}: table shape {table.shape} does not match "
                f"arity {len(scope)}"
            )
        if not np.all(np.isfinite(table)):
            raise DataError(f"factor {id!r}: table has non-finite entries")
        self.id = id
        self.scope = scope
        self.log_potential = table

    @property
    def arity(self):
        return len(self.scope)

    def __repr__(self):
        return f"Factor({self.id!r}, scope={self.scope})"


class FactorGraph:
    """Bipartite graph of 3-valued variables and log-linear factors."""

    def __init__(self):
        self.variables: dict[str, Variable] = {}
        self.factors: dict[str, Factor] = {}
        self._var_factors: dict[str, list[str]] = {}

    def add_variable(self, var_id: str) -> Variable:
        if var_id in self.variables:
            raise DataError(f"duplicate variable id {var_id!r}")
        var = Variable(var_id)
        self.variables[var_id] = var
        self._var_factors[var_id] = []
        return var

    def add_factor(self, factor_id: str, scope, log_potential) -> Factor:
        if factor_id in self.factors:
            raise DataError(f"duplicate factor id {factor_id!r}")
        factor = Factor(factor_id, scope, log_potential)
        for var_id in factor.scope:
            if var_id not in self.variables:
                raise DataError(
                    f"factor {factor_id!r} references unknown variable {var_id!r}"
                )
        self.factors[factor_id] = factor
        for var_id in factor.scope:
            self._var_factors[var_id].append(factor_id)
        return factor

    def factors_of(self, var_id: str) -> list[str]:
        return self._var_factors[var_id]

    def n_states(self) -> int:
        return DOMAIN ** len(self.variables)

    # -- structure ---------------------------------------------------------

    def components(self):
        """Connected components as sorted variable-id lists, in sorted order."""
        seen = set()
        comps = []
        for start in sorted(self.variables):
            if start in seen:
                continue
            comp = []
            stack = [start]
            seen.add(start)
            while stack:
                v = stack.pop()
                comp.append(v)
                for fid in self._var_factors[v]:
                    for u in self.factors[fid].scope:
                        if u not in seen:
                            seen.add(u)
                            stack.append(u)
            comps.append(sorted(comp))
        return comps

    def is_tree(self) -> bool:
        """True iff the bipartite variable/factor graph is acyclic."""
        for comp in self.components():
            factor_ids = {fid for v in comp for fid in self._var_factors[v]}
            n_nodes = len(comp) + len(factor_ids)
            n_edges = sum(self.factors[fid].arity for fid in factor_ids)
            if n_edges != n_nodes - 1:
                return False
        return True

    def dump(self) -> str:
        """Human-readable listing of variables, factors, and tables."""
        lines = [f"variables ({len(self.variables)}):"]
        for vid in sorted(self.variables):
            lines.append(f"  {vid}")
        lines.append(f"factors ({len(self.factors)}):")
        for fid in sorted(self.factors):
            f = self.factors[fid]
            lines.append(f"  {fid} over {', '.join(f.scope)}")
            for idx, value in np.ndenumerate(f.log_potential):
                states = "".join(POLARITIES[i].symbol for i in idx)
                lines.append(f"    {states}: {value:+.6f}")
        return "\n".join(lines)


@dataclass
class MarginalSet:
    """Per-variable probability 3-vectors plus convergence metadata."""

    marginals: dict[str, np.ndarray]
    converged: bool = True
    iterations: int = 0

    def __getitem__(self, var_id):
        return self.marginals[var_id]


def _normalize(vec):
    total = vec.sum()
    if total <= 0.0 or not np.isfinite(total):
        return np.full(DOMAIN, 1.0 / DOMAIN)
    return vec / total


def _factor_message(factor: Factor, incoming, target_pos: int):
    """Message from factor to scope[target_pos], contracting the other axes.

    incoming[j] is the variable->factor message for scope position j
    (ignored at j == target_pos).
    """
    table = np.exp(factor.log_potential - factor.log_potential.max())
    letters = _AXES[: factor.arity]
    operands = [table]
    subs = [letters]
    for j in range(factor.arity):
        if j == target_pos:
            continue
        operands.append(incoming[j])
        subs.append(letters[j])
    out = np.einsum(",".join(subs) + "->" + letters[target_pos], *operands)
    return _normalize(out)


def _bfs_orientation(graph: FactorGraph, comp):
    """Rooted BFS over the bipartite graph of one component.

    Returns (order, parent) where nodes are ("v", id) / ("f", id), order is
    root-first BFS order, and parent maps node -> parent node (root: None).
    Neighbor expansion is sorted, so the orientation is deterministic.
    """
    root = ("v", comp[0])
    parent = {root: None}
    order = [root]
    frontier = [root]
    while frontier:
        nxt = []
        for node in frontier:
            kind, nid = node
            if kind == "v":
                neigh = [("f", fid) for fid in sorted(graph.factors_of(nid))]
            else:
                neigh = [("v", vid) for vid in graph.factors[nid].scope]
            for nb in neigh:
                if nb not in parent:
                    parent[nb] = node
                    order.append(nb)
                    nxt.append(nb)
        frontier = nxt
    return order, parent


def _send(graph, messages, src, dst):
    """Compute the src -> dst message from the current ones in `messages`."""
    kind, nid = src
    if kind == "v":
        out = np.ones(DOMAIN)
        for fid in graph.factors_of(nid):
            if ("f", fid) == dst:
                continue
            out = out * messages[(("f", fid), src)]
        return _normalize(out)
    factor = graph.factors[nid]
    target_pos = factor.scope.index(dst[1])
    incoming = [
        messages[(("v", vid), src)] if j != target_pos else None
        for j, vid in enumerate(factor.scope)
    ]
    return _factor_message(factor, incoming, target_pos)


def _marginals_from_messages(graph, messages):
    out = {}
    for vid in graph.variables:
        belief = np.ones(DOMAIN)
        for fid in graph.factors_of(vid):
            belief = belief * messages[(("f", fid), ("v", vid))]
        out[vid] = _normalize(belief)
    return out


def sum_product_tree(graph: FactorGraph) -> MarginalSet:
    """Exact marginals on an acyclic graph via two message passes.

    The root of each component is its lowest variable id; the upward pass
    runs in reverse BFS order and the downward pass in BFS order.  Raises
    GraphStructureError on a cyclic graph (use loopy_sum_product there).
    """
    if not graph.is_tree():
        raise GraphStructureError(
            "graph contains a cycle; exact two-pass inference requires a "
            "tree, use loopy_sum_product instead"
        )
    messages = {}
    for comp in graph.components():
        order, parent = _bfs_orientation(graph, comp)
        # Upward: every node sends to its parent, leaves first.
        for node in reversed(order):
            par = parent[node]
            if par is not None:
                messages[(node, par)] = _send(graph, messages, node, par)
        # Downward: every node sends to each child.
        for node in order:
            for child, par in parent.items():
                if par == node:
                    messages[(node, child)] = _send(graph, messages, node, child)
    return MarginalSet(_marginals_from_messages(graph, messages), True, 0)


def loopy_sum_product(graph: FactorGraph, max_iters=100, damping=0.1,
                      tol=1e-6) -> MarginalSet:
    """Synchronous (flooding) sum-product with damping; works on any graph.

    All messages update from the previous iteration's values; the damped
    update is m_new = damping * m_old + (1 - damping) * m_computed, applied
    in probability space after normalization.  Converged when the largest
    absolute message change drops below tol.  Non-convergence is reported
    via the converged flag, never raised.
    """
    if not 0.0 <= damping < 1.0:
        raise DataError(f"damping must be in [0, 1), got {damping}")
    uniform = np.full(DOMAIN, 1.0 / DOMAIN)
    edges = []
    for fid in sorted(graph.factors):
        for vid in graph.factors[fid].scope:
            edges.append((("v", vid), ("f", fid)))
            edges.append((("f", fid), ("v", vid)))
    messages = {edge: uniform.copy() for edge in edges}

    iterations = 0
    converged = False
    for iterations in range(1, max_iters + 1):
        new_messages = {}
        delta = 0.0
        for src, dst in edges:
            computed = _send(graph, messages, src, dst)
            updated = damping * messages[(src, dst)] + (1.0 - damping) * computed
            delta = max(delta, float(np.max(np.abs(updated - messages[(src, dst)]))))
            new_messages[(src, dst)] = updated
        messages = new_messages
        if delta < tol:
            converged = True
            break
    else:
        iterations = max_iters

    if max_iters == 0:
        iterations = 0
    return MarginalSet(_marginals_from_messages(graph, messages), converged, iterations)


def enumerate_marginals(graph: FactorGraph) -> MarginalSet:
    """Exact marginals by summing over every joint assignment.

    Test oracle: O(3^n); guarded at 3**12 states.  Uses log-space
    accumulation with max-subtraction, so arbitrary shifts of the
    log-potentials cancel exactly.
    """
    var_ids = sorted(graph.variables)
    n = len(var_ids)
    if n > MAX_ENUM_VARIABLES:
        raise GraphStructureError(
            f"enumeration guard: {n} variables gives {DOMAIN}**{n} states "
            f"(limit {DOMAIN}**{MAX_ENUM_VARIABLES})"
        )
    axis_of = {vid: i for i, vid in enumerate(var_ids)}
    joint = np.zeros((DOMAIN,) * n if n else (1,))
    for fid in sorted(graph.factors):
        factor = graph.factors[fid]
        axes = [axis_of[v] for v in factor.scope]
        order = np.argsort(axes)
        table = np.transpose(factor.log_potential, order)
        shape = [DOMAIN if i in set(axes) else 1 for i in range(n)]
        joint = joint + table.reshape(shape)
    marginals = {}
    for vid in var_ids:
        others = tuple(i for i in range(n) if i != axis_of[vid])
        log_m = logsumexp(joint, axis=others) if others else joint
        log_m = np.asarray(log_m, dtype=float)
        marginals[vid] = _normalize(np.exp(log_m - log_m.max()))
    return MarginalSet(marginals, True, 0)


def max_marginal_decode(marginals: MarginalSet) -> dict[str, Polarity]:
    """Per-variable argmax; exact ties resolve to the lowest polarity."""
    return {
        vid: POLARITIES[int(np.argmax(probs))]
        for vid, probs in marginals.marginals.items()
    }
