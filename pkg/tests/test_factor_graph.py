import math

import numpy as np
import pytest

from connframe.factor_graph import (
    FactorGraph,
    enumerate_marginals,
    loopy_sum_product,
    max_marginal_decode,
    sum_product_tree,
)
from connframe.errors import DataError, GraphStructureError
from connframe.selfcheck import marginal_gap, random_tree_graph

from conftest import NEG


def single_unary(logpots=(0.0, 0.0, math.log(2.0))):
    g = FactorGraph()
    g.add_variable("x")
    g.add_factor("u", ("x",), np.array(logpots))
    return g


def chain(n=3, strength=1.0):
    g = FactorGraph()
    for i in range(n):
        g.add_variable(f"v{i}")
    for i in range(n - 1):
        g.add_factor(f"e{i}", (f"v{i}", f"v{i+1}"), strength * np.eye(3))
    return g


def three_cycle(strength=0.3, unary=(0.1, 0.0, -0.1)):
    g = FactorGraph()
    for v in "abc":
        g.add_variable(v)
    pot = strength * np.eye(3)
    g.add_factor("ab", ("a", "b"), pot)
    g.add_factor("bc", ("b", "c"), pot)
    g.add_factor("ca", ("c", "a"), pot)
    g.add_factor("ua", ("a",), np.array(unary))
    return g


class TestEnumerate:
    def test_uniform_factors(self):
        g = chain(3, strength=0.0)
        m = enumerate_marginals(g)
        for v in g.variables:
            assert np.allclose(m[v], 1 / 3)

    def test_single_unary(self):
        m = enumerate_marginals(single_unary())
        assert np.allclose(m["x"], [0.25, 0.25, 0.5], atol=1e-12)

    def test_agreement_factor_symmetry(self):
        g = FactorGraph()
        g.add_variable("a")
        g.add_variable("b")
        pot = np.zeros((3, 3))
        np.fill_diagonal(pot, math.log(3.0))
        g.add_factor("agree", ("a", "b"), pot)
        m = enumerate_marginals(g)
        assert np.allclose(m["a"], 1 / 3, atol=1e-12)
        assert np.allclose(m["b"], 1 / 3, atol=1e-12)

    def test_state_space_guard(self):
        g = FactorGraph()
        for i in range(13):
            g.add_variable(f"v{i:02d}")
        with pytest.raises(GraphStructureError, match="guard"):
            enumerate_marginals(g)


class TestTreeSumProduct:
    def test_uniform_factors(self):
        m = sum_product_tree(chain(4, strength=0.0))
        for probs in m.marginals.values():
            assert np.allclose(probs, 1 / 3)

    def test_single_unary(self):
        m = sum_product_tree(single_unary())
        assert np.allclose(m["x"], [0.25, 0.25, 0.5], atol=1e-12)

    def test_matches_enumeration_on_random_trees(self):
        rng = np.random.default_rng(17)
        for _ in range(50):
            g = random_tree_graph(rng)
            assert marginal_gap(sum_product_tree(g), enumerate_marginals(g)) < 1e-9

    def test_cyclic_graph_rejected(self):
        with pytest.raises(GraphStructureError, match="loopy"):
            sum_product_tree(three_cycle())

    def test_disconnected_components(self):
        g = FactorGraph()
        g.add_variable("a")
        g.add_variable("b")
        g.add_factor("ua", ("a",), np.array([0.0, 0.0, math.log(2.0)]))
        m = sum_product_tree(g)
        assert np.allclose(m["a"], [0.25, 0.25, 0.5], atol=1e-12)
        assert np.allclose(m["b"], 1 / 3)

    def test_shift_invariance(self):
        rng = np.random.default_rng(23)
        g = random_tree_graph(rng)
        base = sum_product_tree(g)
        shifted = FactorGraph()
        for v in g.variables:
            shifted.add_variable(v)
        for i, (fid, f) in enumerate(g.factors.items()):
            shifted.add_factor(fid, f.scope, f.log_potential + (7.5 if i == 0 else 0.0))
        assert marginal_gap(base, sum_product_tree(shifted)) < 1e-9

    def test_deterministic_bit_identical(self):
        rng = np.random.default_rng(29)
        g = random_tree_graph(rng)
        m1 = sum_product_tree(g)
        m2 = sum_product_tree(g)
        for v in g.variables:
            assert np.array_equal(m1[v], m2[v])

    def test_marginals_are_distributions(self):
        rng = np.random.default_rng(31)
        for _ in range(20):
            g = random_tree_graph(rng)
            for probs in sum_product_tree(g).marginals.values():
                assert np.all(probs >= 0)
                assert probs.sum() == pytest.approx(1.0, abs=1e-9)


class TestLoopy:
    def test_exact_on_trees(self):
        rng = np.random.default_rng(37)
        for _ in range(10):
            g = random_tree_graph(rng, max_vars=8)
            loopy = loopy_sum_product(g, max_iters=300, damping=0.1, tol=1e-10)
            assert loopy.converged
            assert marginal_gap(loopy, sum_product_tree(g)) < 1e-7

    def test_weak_cycle_close_to_enumeration(self):
        g = three_cycle(strength=0.3)
        loopy = loopy_sum_product(g, max_iters=500, damping=0.1, tol=1e-12)
        assert loopy.converged
        assert marginal_gap(loopy, enumerate_marginals(g)) < 1e-3

    def test_zero_iterations_uniform_not_converged(self):
        result = loopy_sum_product(three_cycle(), max_iters=0)
        assert not result.converged
        assert result.iterations == 0
        for probs in result.marginals.values():
            assert np.allclose(probs, 1 / 3)

    def test_non_convergence_reported_not_raised(self):
        result = loopy_sum_product(three_cycle(strength=5.0), max_iters=2,
                                   damping=0.0, tol=1e-12)
        assert not result.converged
        assert result.iterations == 2

    def test_damping_validation(self):
        with pytest.raises(DataError):
            loopy_sum_product(three_cycle(), damping=1.0)


class TestDecode:
    def test_argmax(self):
        ms = sum_product_tree(single_unary((math.log(5.0), math.log(3.0), math.log(2.0))))
        assert max_marginal_decode(ms)["x"] is NEG

    def test_uniform_ties_to_negative(self):
        ms = sum_product_tree(chain(2, strength=0.0))
        decoded = max_marginal_decode(ms)
        assert all(p is NEG for p in decoded.values())

    def test_matches_enumeration_decode(self):
        rng = np.random.default_rng(41)
        for _ in range(10):
            g = random_tree_graph(rng)
            assert max_marginal_decode(sum_product_tree(g)) == \
                max_marginal_decode(enumerate_marginals(g))


class TestGraphValidation:
    def test_duplicate_variable(self):
        g = FactorGraph()
        g.add_variable("a")
        with pytest.raises(DataError):
            g.add_variable("a")

    def test_duplicate_factor(self):
        g = single_unary()
        with pytest.raises(DataError):
            g.add_factor("u", ("x",), np.zeros(3))

    def test_unknown_scope_variable(self):
        g = FactorGraph()
        g.add_variable("a")
        with pytest.raises(DataError, match="unknown"):
            g.add_factor("f", ("a", "b"), np.zeros((3, 3)))

    def test_non_finite_table(self):
        g = FactorGraph()
        g.add_variable("a")
        with pytest.raises(DataError, match="finite"):
            g.add_factor("f", ("a",), np.array([0.0, np.inf, 0.0]))

    def test_shape_arity_mismatch(self):
        g = FactorGraph()
        g.add_variable("a")
        with pytest.raises(DataError):
            g.add_factor("f", ("a",), np.zeros((3, 3)))

    def test_repeated_scope_variable(self):
        g = FactorGraph()
        g.add_variable("a")
        with pytest.raises(DataError, match="repeated"):
            g.add_factor("f", ("a", "a"), np.zeros((3, 3)))

    def test_dump_lists_structure(self):
        text = single_unary().dump()
        assert "variables (1)" in text
        assert "factors (1)" in text
        assert "x" in text
