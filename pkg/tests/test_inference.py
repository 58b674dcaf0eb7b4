import itertools
import math
import random

import pytest

from liftfg import (FactorGraph, Marginal, RandomVariable,
                    compress, counting_bp, joint_enumeration, kl_divergence,
                    loopy_bp, parse_model, run_cp, singleton_partition,
                    variable_elimination)
from conftest import THREE_RV_TEXT, random_graph


def max_delta(p, q):
    return max(abs(a - b) for a, b in zip(p.probs, q.probs))


# --- enumeration oracle -----------------------------------------------------

def test_enumeration_single_unary():
    g = parse_model("randvar A x y\nfactor f A | 3 1\n")
    assert joint_enumeration(g, "A").probs == (0.75, 0.25)


def test_enumeration_three_rv_matches_literal_sum(three_rv):
    # independent oracle: the eight-term sum written out directly
    t = [[2.0, 3.0], [3.0, 5.0]]
    weights = [0.0, 0.0]
    for a, b, c in itertools.product((0, 1), repeat=3):
        weights[b] += t[a][b] * t[c][b]
    expected = [w / sum(weights) for w in weights]
    got = joint_enumeration(three_rv, "B")
    assert got.probs == pytest.approx(expected, abs=1e-15)
    assert expected[0] == pytest.approx(25 / 89)


def test_enumeration_fully_observed_graph_gives_indicator():
    g = parse_model(THREE_RV_TEXT + "evidence A true\nevidence B false\nevidence C true\n")
    assert joint_enumeration(g, "B").probs == (0.0, 1.0)


def test_enumeration_rejects_unknown():
    g = parse_model("randvar A x y\nfactor f A | unknown\n")
    with pytest.raises(ValueError, match="unknown"):
        joint_enumeration(g, "A")


def test_enumeration_state_cap():
    with pytest.raises(ValueError, match="exceeds cap"):
        joint_enumeration(parse_model(THREE_RV_TEXT), "B", state_cap=4)


def test_enumeration_missing_query(three_rv):
    with pytest.raises(KeyError):
        joint_enumeration(three_rv, "Q")


# --- variable elimination -------------------------------------------------------

def test_ve_matches_enumeration_on_chain():
    g = parse_model("""
    randvar A x y
    randvar B x y
    randvar C x y
    factor f1 A B | 1 2 3 4
    factor f2 B C | 5 1 2 2
    """)
    for q in "ABC":
        assert max_delta(variable_elimination(g, q), joint_enumeration(g, q)) < 1e-14


def test_ve_matches_enumeration_randomised():
    rng = random.Random(123)
    for _ in range(60):
        g = random_graph(rng, with_evidence=True)
        q = rng.choice(sorted(g.rvs))
        assert max_delta(variable_elimination(g, q), joint_enumeration(g, q)) < 1e-12


def test_ve_query_with_evidence_is_indicator():
    g = parse_model(THREE_RV_TEXT + "evidence B false\n")
    assert variable_elimination(g, "B").probs == (0.0, 1.0)


def test_ve_ignores_disconnected_component():
    g = parse_model("""
    randvar A x y
    randvar B x y
    randvar C x y
    factor f1 A B | 1 2 3 4
    factor f2 C | 9 1
    """)
    assert max_delta(variable_elimination(g, "A"), joint_enumeration(g, "A")) < 1e-14


def test_evidence_consistency_condition_vs_slice():
    # conditioning through the evidence field must equal querying a graph
    # whose tables were sliced by hand
    g = parse_model(THREE_RV_TEXT + "evidence A true\n")
    sliced = parse_model("""
    randvar B x y
    randvar C x y
    factor phi1 B | 2 3
    factor phi2 C B | 2 3 3 5
    """)
    for engine in (variable_elimination, joint_enumeration):
        assert max_delta(engine(g, "B"), engine(sliced, "B")) < 1e-14
    bp_g = loopy_bp(g, 8)
    bp_s = loopy_bp(sliced, 8)
    assert max_delta(bp_g["B"], bp_s["B"]) < 1e-12


# --- belief propagation ------------------------------------------------------------

def test_bp_exact_on_tree(three_rv):
    beliefs = loopy_bp(three_rv, iters=4)
    for q in "ABC":
        assert max_delta(beliefs[q], variable_elimination(three_rv, q)) <= 1e-9


def test_bp_zero_iterations_uniform_without_unary_factors():
    g = parse_model("""
    randvar A x y
    randvar B x y
    factor f A B | 1 2 3 4
    """)
    beliefs = loopy_bp(g, iters=0)
    assert beliefs["A"].probs == (0.5, 0.5)
    assert beliefs["B"].probs == (0.5, 0.5)


def test_bp_single_unary_one_iteration():
    g = parse_model("randvar A x y\nfactor f A | 3 1\n")
    assert loopy_bp(g, iters=1)["A"].probs == pytest.approx((0.75, 0.25), abs=1e-15)


def test_bp_evidence_gives_indicator():
    g = parse_model(THREE_RV_TEXT + "evidence C false\n")
    beliefs = loopy_bp(g, iters=4)
    assert beliefs["C"].probs == (0.0, 1.0)
    assert max_delta(beliefs["B"], variable_elimination(g, "B")) <= 1e-9


def test_bp_rejects_unknown():
    g = parse_model("randvar A x y\nfactor f A | unknown\n")
    with pytest.raises(ValueError, match="unknown"):
        loopy_bp(g, 5)


# --- counting BP ----------------------------------------------------------------------

def test_cbp_equals_bp_bitwise_with_unit_counts():
    rng = random.Random(77)
    for _ in range(10):
        g = random_graph(rng, with_evidence=True, shared_tables=True)
        trivial = compress(g, singleton_partition(g))
        assert all(c == 1 for c in trivial.edge_counts.values())
        ground = loopy_bp(g, iters=7)
        lifted = counting_bp(trivial, iters=7)
        for rv in g.rvs:
            assert ground[rv].probs == lifted[rv].probs   # bit-identical


def test_cbp_matches_bp_on_compressed_three_rv(three_rv):
    m = compress(three_rv, run_cp(three_rv))
    cbp = counting_bp(m, iters=4)
    bp = loopy_bp(three_rv, iters=4)
    sv = m.supervar_of()
    for rv in three_rv.rvs:
        assert max_delta(bp[rv], cbp[sv[rv]]) <= 1e-9


def test_cbp_matches_bp_on_epidemic(epidemic):
    # the graph is loopy, so this checks schedule equivalence, not exactness
    m = compress(epidemic, run_cp(epidemic))
    cbp = counting_bp(m, iters=25)
    bp = loopy_bp(epidemic, iters=25)
    sv = m.supervar_of()
    for rv in epidemic.rvs:
        assert max_delta(bp[rv], cbp[sv[rv]]) <= 1e-9


def test_cbp_with_evidence(epidemic):
    g = FactorGraph(
        [RandomVariable(rv.name, rv.range, 0 if rv.name == "Epid" else None)
         for rv in epidemic.rvs.values()],
        list(epidemic.factors.values()))
    m = compress(g, run_cp(g))
    cbp = counting_bp(m, iters=15)
    bp = loopy_bp(g, iters=15)
    sv = m.supervar_of()
    assert cbp["Epid"].probs == (1.0, 0.0)
    for rv in g.rvs:
        assert max_delta(bp[rv], cbp[sv[rv]]) <= 1e-9


def test_cbp_rejects_repeated_supervar_slots():
    # a two-cycle with a symmetric table folds both rvs into one group, so
    # the superfactor would need the same supervariable twice
    g = parse_model("""
    randvar A x y
    randvar B x y
    factor f1 A B | 2 3 3 5
    factor f2 B A | 2 3 3 5
    """)
    m = compress(g, run_cp(g))
    sf, = m.superfactors
    assert sf.args == ("A", "A")
    with pytest.raises(ValueError, match="repeat"):
        counting_bp(m, 3)


# --- KL divergence --------------------------------------------------------------------

def test_kl_zero_on_identical():
    p = Marginal("x", (0.3, 0.7))
    assert kl_divergence(p, Marginal("x", (0.3, 0.7))) == 0.0


def test_kl_frozen_value():
    p, q = Marginal("x", (1.0, 0.0)), Marginal("x", (0.5, 0.5))
    assert kl_divergence(p, q) == pytest.approx(math.log(2), abs=1e-15)


def test_kl_non_negative_on_random_pairs():
    rng = random.Random(5)
    for _ in range(200):
        a = [rng.uniform(0.01, 1.0) for _ in range(3)]
        b = [rng.uniform(0.01, 1.0) for _ in range(3)]
        p = Marginal.normalised("x", a)
        q = Marginal.normalised("x", b)
        assert kl_divergence(p, q) >= -1e-12


def test_kl_range_mismatch():
    with pytest.raises(ValueError, match="same range"):
        kl_divergence(Marginal("x", (0.5, 0.5)), Marginal("x", (0.2, 0.3, 0.5)))


def test_kl_rejects_zero_in_q():
    with pytest.raises(ValueError, match="zero"):
        kl_divergence(Marginal("x", (0.5, 0.5)), Marginal("x", (1.0, 0.0)))


def test_marginal_normalised_sums_to_one():
    rng = random.Random(9)
    for _ in range(50):
        m = Marginal.normalised("x", [rng.uniform(0.001, 5.0) for _ in range(4)])
        assert abs(sum(m.probs) - 1.0) <= 1e-12
        assert all(p >= 0 for p in m.probs)


def test_bp_cbp_deterministic(epidemic):
    m = compress(epidemic, run_cp(epidemic))
    a = counting_bp(m, iters=9)
    b = counting_bp(m, iters=9)
    assert all(a[k].probs == b[k].probs for k in a)
