import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from oracles import all_choice_rows, chain_rule_entropy, constant_A_long_sum, graph_probability
from prefattach.entropy import (
    EntropyEstimate,
    EntropyMethod,
    admissible_count,
    asymptotic_entropy,
    constant_A,
    constant_A_enclosure,
    entropy_constant,
    enumerate_admissible,
    exact_entropy,
    log_prob_batch,
    log_prob_graph,
    log_prob_sequence,
    mc_entropy,
    structural_entropy_estimate,
    total_probability,
)
from prefattach.errors import ResourceBudgetError
from prefattach.model import ChoiceSequence, InadmissibleGraphError, Multigraph, PaGraph, generate


# --- single-graph probabilities ---------------------------------------------------


def test_sequence_examples():
    assert log_prob_sequence(ChoiceSequence(1, 2, [[1]])) == 0.0
    assert log_prob_sequence(ChoiceSequence(1, 3, [[1], [1]])) == pytest.approx(math.log(3 / 4), abs=1e-15)
    assert log_prob_sequence(ChoiceSequence(1, 3, [[1], [2]])) == pytest.approx(math.log(1 / 4), abs=1e-15)


@pytest.mark.parametrize("m", [1, 2, 5])
def test_two_vertices_is_certain(m):
    assert log_prob_graph(PaGraph(m, 2, [[1] * m])) == 0.0


def test_star_and_path(star, path):
    assert log_prob_graph(star) == pytest.approx(math.log(3 / 4), abs=1e-15)
    assert log_prob_graph(path) == pytest.approx(math.log(1 / 4), abs=1e-15)
    assert math.exp(log_prob_graph(star)) + math.exp(log_prob_graph(path)) == pytest.approx(1.0, abs=1e-15)


def test_inadmissible_rejected():
    with pytest.raises(InadmissibleGraphError):
        log_prob_graph(PaGraph(1, 3, [[1], [3]]))
    with pytest.raises(TypeError):
        log_prob_graph(Multigraph(2, {(1, 1): 1, (1, 2): 1}))


@pytest.mark.parametrize("m, n", [(1, 5), (2, 4), (2, 5), (3, 4)])
@pytest.mark.parametrize("mode", ["d", "r"])
def test_against_rational_oracle(m, n, mode):
    """exp(log P) equals the sum over all orderings of each step, in exact arithmetic."""
    for rows in all_choice_rows(m, n):
        exact = graph_probability(m, list(rows), doubled=mode == "d")
        got = log_prob_graph(PaGraph(m, n, rows, mode))
        assert got == pytest.approx(math.log(exact), abs=1e-12)


def test_sequence_probabilities_sum_to_graph_probability():
    g = PaGraph(3, 4, [[1, 1, 1], [1, 1, 2], [1, 2, 3]])
    total = 0.0
    per_step = [sorted(set(itertools.permutations(g.targets(t)))) for t in range(2, 5)]
    for orders in itertools.product(*per_step):
        total += math.exp(log_prob_sequence(ChoiceSequence(3, 4, orders)))
    assert total == pytest.approx(math.exp(log_prob_graph(g)), rel=1e-12)


@pytest.mark.parametrize("m, n", [(1, 7), (2, 5), (4, 4)])
def test_batch_matches_single(m, n):
    for rows in enumerate_admissible(m, n):
        single = np.array([log_prob_graph(PaGraph(m, n, r)) for r in rows])
        assert np.max(np.abs(log_prob_batch(rows, m) - single)) < 1e-12


def test_generated_graph_uses_its_own_mode():
    g = generate(2, 30, 4, "r")
    assert log_prob_graph(g) == log_prob_graph(g, "r") != log_prob_graph(g, "d")


# --- enumeration ------------------------------------------------------------------


def test_enumeration_is_complete_and_ordered():
    rows = np.concatenate(list(enumerate_admissible(2, 5, chunk=7)))
    assert len(rows) == admissible_count(2, 5) == 180
    expected = [np.array(r) for r in all_choice_rows(2, 5)]
    assert all(np.array_equal(a, b) for a, b in zip(rows, expected))


def test_counts():
    assert admissible_count(1, 4) == 6
    assert admissible_count(2, 6) == 2700
    assert admissible_count(3, 1) == 1


def test_budget():
    with pytest.raises(ResourceBudgetError):
        next(enumerate_admissible(1, 12, budget=10**6))
    with pytest.raises(ResourceBudgetError):
        exact_entropy(3, 30)


@pytest.mark.parametrize("m, n", [(1, 8), (2, 3), (2, 6), (3, 5), (5, 4)])
@pytest.mark.parametrize("mode", ["d", "r"])
def test_normalization(m, n, mode):
    assert total_probability(m, n, mode) == pytest.approx(1.0, abs=1e-10)


# --- exact entropy --------------------------------------------------------------------


def test_exact_examples():
    assert exact_entropy(1, 2).value == 0.0
    h3 = exact_entropy(1, 3)
    assert h3.value == pytest.approx(-(0.75 * math.log(0.75) + 0.25 * math.log(0.25)), abs=1e-12)
    assert h3.method is EntropyMethod.EXACT and h3.stderr == 0 and h3.samples == 2


def test_exact_m1_n4_against_six_graphs():
    probs = [graph_probability(1, list(r)) for r in all_choice_rows(1, 4)]
    assert len(probs) == 6 and sum(probs) == Fraction(1)
    ref = -sum(float(p) * math.log(p) for p in probs)
    assert exact_entropy(1, 4).value == pytest.approx(ref, abs=1e-12)


@pytest.mark.parametrize("m, n", [(1, 3), (1, 5), (1, 7), (2, 4), (2, 5), (3, 4)])
def test_chain_rule(m, n):
    assert exact_entropy(m, n).value == pytest.approx(chain_rule_entropy(m, n), abs=1e-10)


def test_estimate_invariants():
    with pytest.raises(ValueError):
        EntropyEstimate(1.0, -0.1, 3, EntropyMethod.MONTE_CARLO)
    with pytest.raises(ValueError):
        EntropyEstimate(1.0, 0.1, 3, EntropyMethod.EXACT)


# --- equiprobability within directed-isomorphism classes ----------------------------------


def _udag_key(g: PaGraph) -> bytes:
    n = g.n
    d = np.zeros((n, n), dtype=np.int64)
    for t in range(2, n + 1):
        for w in g.targets(t):
            d[t - 1, w - 1] += 1
    return min(d[np.ix_(p, p)].tobytes() for p in map(list, itertools.permutations(range(n))))


def _classes(m: int, n: int) -> dict[bytes, list[PaGraph]]:
    out: dict[bytes, list[PaGraph]] = {}
    for rows in all_choice_rows(m, n):
        g = PaGraph(m, n, rows)
        out.setdefault(_udag_key(g), []).append(g)
    return out


def _spread(graphs) -> float:
    lp = [log_prob_graph(g) for g in graphs]
    return max(lp) - min(lp)


@pytest.mark.parametrize("n", range(2, 6))
def test_equiprobable_classes_m1(n):
    for graphs in _classes(1, n).values():
        assert _spread(graphs) <= 1e-12


def _free_of_optional_multi_edges(g: PaGraph) -> bool:
    # vertex 2 has no choice but to double up on vertex 1
    return all(len(set(g.targets(t))) == g.m for t in range(3, g.n + 1))


@pytest.mark.parametrize("n", range(2, 6))
def test_equiprobable_classes_m2_without_multi_edges(n):
    for graphs in _classes(2, n).values():
        if all(_free_of_optional_multi_edges(g) for g in graphs):
            assert _spread(graphs) <= 1e-12


def test_equiprobability_breaks_with_multi_edges():
    g1 = PaGraph(2, 4, [[1, 1], [2, 2], [1, 2]])
    g2 = PaGraph(2, 4, [[1, 1], [1, 2], [2, 2]])
    assert _udag_key(g1) == _udag_key(g2)
    assert graph_probability(2, [(1, 1), (2, 2), (1, 2)]) == Fraction(1, 48)
    assert graph_probability(2, [(1, 1), (1, 2), (2, 2)]) == Fraction(3, 128)
    assert math.exp(log_prob_graph(g1)) == pytest.approx(1 / 48, rel=1e-12)
    assert math.exp(log_prob_graph(g2)) == pytest.approx(3 / 128, rel=1e-12)


# --- Monte Carlo -------------------------------------------------------------------------


def test_mc_requires_two_samples():
    with pytest.raises(ValueError):
        mc_entropy(1, 5, 1, 0)


def test_mc_m1_n3_matches_exact():
    est = mc_entropy(1, 3, 10**5, 2024)
    assert abs(est.value - exact_entropy(1, 3).value) <= 4 * est.stderr


def test_mc_stderr_scaling():
    a = mc_entropy(2, 30, 1000, 1)
    b = mc_entropy(2, 30, 4000, 2)
    assert 0.8 * 2 <= a.stderr / b.stderr <= 1.2 * 2


def test_mc_reproducible_large():
    a = mc_entropy(3, 10**4, 20, 99)
    b = mc_entropy(3, 10**4, 20, 99)
    assert a == b and a.stderr > 0 and math.isfinite(a.value)


# --- the constant A ------------------------------------------------------------------------


def test_first_term_vanishes():
    assert constant_A(1) == pytest.approx(constant_A(2), abs=1e-12)


@pytest.mark.parametrize("m", [1, 2, 3, 7])
def test_telescoping(m):
    assert constant_A(m) - constant_A(m + 1) == pytest.approx(math.log(m) / ((m + 1) * (m + 2)), abs=1e-6)


def test_enclosure_width_and_budget():
    lo, hi = constant_A_enclosure(1, 1e-6)
    assert 0 < hi - lo <= 1e-6
    lo2, hi2 = constant_A_enclosure(1, 1e-3)
    assert lo2 <= lo and hi <= hi2  # nested
    with pytest.raises(ResourceBudgetError):
        constant_A_enclosure(1, 1e-9, max_terms=10**6)
    with pytest.raises(ValueError):
        constant_A(1, 0.0)


def test_enclosure_contains_long_sum():
    lo, hi = constant_A_enclosure(3, 1e-4)
    partial = constant_A_long_sum(3, 10**7)
    tail = (math.log(10**7) + 1) / 10**7
    assert lo <= partial + tail and partial <= hi


# --- asymptotic formula ---------------------------------------------------------------------


def test_asymptotic_m1():
    n = 5000
    a = constant_A(1)
    assert asymptotic_entropy(1, n) == pytest.approx(n * math.log(n) + (math.log(2) - 1 - a) * n, rel=1e-12)


def test_asymptotic_forms():
    for m in (1, 2, 3):
        stated = m * (math.log(2 * m) - 1 - math.lgamma(m + 1) - constant_A(m))
        rederived = m * math.log(2 * m) - m - m * (m + 1) * constant_A(m) - math.lgamma(m + 1)
        assert entropy_constant(m) == pytest.approx(stated, abs=1e-12)
        assert entropy_constant(m, "rederived") == pytest.approx(rederived, abs=1e-12)
    with pytest.raises(ValueError):
        entropy_constant(1, "other")


def test_leading_coefficient():
    ratios = [asymptotic_entropy(3, n) / (n * math.log(n)) for n in (10**3, 10**6, 10**12)]
    assert abs(ratios[-1] - 3) < abs(ratios[0] - 3)
    assert abs(ratios[-1] - 3) < 0.2


# --- structural bracket ------------------------------------------------------------------------


def test_bracket_ordering():
    br = structural_entropy_estimate(3, 300, 5, 8)
    assert br.width >= 0 and br.lower <= br.midpoint <= br.upper
    c = br.components
    assert c.log_factorial_n == pytest.approx(math.lgamma(301))
    assert 0 <= c.gamma_log_lb_mean <= c.log_factorial_n
    assert c.aut_log_mean >= 0 and 0 <= c.certified_fraction <= 1
    with pytest.raises(ValueError):
        structural_entropy_estimate(3, 300, 1, 8)


def test_bracket_scale_m3():
    m, n = 3, 10**4
    br = structural_entropy_estimate(m, n, 200, 77)
    ref = (m - 1) * n * math.log(n)
    slack = n * math.log(math.log(n))
    # some point of the bracket lies within 10 n ln ln n of the leading term
    assert br.lower - 10 * slack <= ref <= br.upper + 10 * slack
    assert 0.5 <= br.midpoint / ref <= 1.5


def test_mc_m3_large_reproducible_full_size():
    a = mc_entropy(3, 10**4, 1000, 5)
    assert a == mc_entropy(3, 10**4, 1000, 5)
    assert math.isfinite(a.value) and a.stderr > 0
