import pytest
from hypothesis import given, settings, strategies as st

from fairclear.enumeration import ClearingConfig
from fairclear.errors import ConfigError, DegenerateBound, FairExceedsEfficient, NegativeGamma
from fairclear.fairness import (
    ClassSpec,
    ClearingProblem,
    FairnessRule,
    HybridMode,
    Region,
    hybrid_pof_bound,
    in_fair_region,
    percent_fair,
    pof,
    solve_alpha_lex,
    solve_fair_max,
    solve_hybrid,
    solve_utilitarian,
    solve_weighted,
    u_delta_multi,
    u_delta_strict,
    u_delta_two_class,
)
from fairclear.instance import Edge, build_graph, pair
from fairclear.solver import verify_matching
from fairclear.worstcase import lex_cycle_instance, weighted_cycle_instance

from _instances import hybrid_mismatches, oracle_corpus, random_graph

# dyadic values keep float arithmetic exact
dyadic = st.integers(0, 4096).map(lambda k: k / 64)


def lex_cycle4(L=4):
    fam = lex_cycle_instance(L)
    return fam.graph, fam.config


@pytest.mark.parametrize("u_h, u_l, delta, want", [(3, 3, 2, 6), (1, 5, 2, 4), (5, 1, 2, 8)])
def test_two_class_branches(u_h, u_l, delta, want):
    assert u_delta_two_class(u_h, u_l, delta) == want


def test_multi_class():
    assert u_delta_multi([5, 5, 3], 2) == 15
    assert u_delta_multi([7], 0) == 7


def test_multi_class_boundary_discontinuity():
    # at max - min = delta the fair branch applies; the utilitarian formula would give 16
    assert u_delta_multi([5, 4, 3], 2) == 15
    assert 5 + (4 + 2) + (3 + 2) == 16


@settings(max_examples=300, deadline=None)
@given(dyadic, dyadic, st.booleans())
def test_two_class_continuity_at_boundary(u_h, delta, low_leads):
    u_l = u_h + delta if low_leads else u_h - delta
    fair = u_delta_two_class(u_h, u_l, delta)
    utilitarian = u_l + u_h - delta if low_leads else u_l + u_h + delta
    assert fair == 2 * u_h == utilitarian


@settings(max_examples=300, deadline=None)
@given(dyadic, dyadic, dyadic)
def test_multi_reduces_to_two_class(u_h, u_l, delta):
    assert u_delta_multi([u_h, u_l], delta) == u_delta_two_class(u_h, u_l, delta)


def test_strict_variant():
    assert u_delta_strict(1, 2, 5, 3) == 0
    assert u_delta_strict(3, 2, 5, 3) == 5
    assert u_delta_strict(1, 9, 5, 3) == 10


def test_pof_and_percent_fair():
    assert pof(4, 2) == 0.5
    assert pof(3.5, 3.5) == 0
    assert pof(0, 0) == 0
    with pytest.raises(FairExceedsEfficient):
        pof(1, 2)
    assert percent_fair(1, 2) == 0.5
    assert percent_fair(0, 0) == 1
    assert percent_fair(3, 3) == 1


def test_hybrid_pof_bound():
    assert hybrid_pof_bound(2, 0, 5, 100) == pytest.approx(0.1)
    assert hybrid_pof_bound(2, 1, 3, 7) == 0
    assert hybrid_pof_bound(4, 1, 1, 8) == pytest.approx(0.5)
    with pytest.raises(DegenerateBound):
        hybrid_pof_bound(2, 0, 1, 0)


def test_lex_cycle_rules():
    g, cfg = lex_cycle4()
    eff = solve_utilitarian(g, cfg)
    assert eff.total_utility == 4
    assert len(eff.structures[0].vertices) == 4
    fair = solve_fair_max(g, cfg)
    assert 0 in fair.structures[0].vertices and fair.utility("H") == 1
    for alpha in (0.1, 0.5, 1.0):
        m = solve_alpha_lex(g, cfg, alpha)
        assert m.total_utility == 2
        assert pof(eff.total_utility, m.total_utility) == 0.5


def test_alpha_zero_is_utilitarian_but_tiny_alpha_binds():
    g, cfg = lex_cycle4()
    assert solve_alpha_lex(g, cfg, 0.0).total_utility == 4
    assert solve_alpha_lex(g, cfg, 1e-6).utility("H") == 1
    with pytest.raises(ConfigError):
        solve_alpha_lex(g, cfg, 1.5)


def test_weighted():
    g, cfg = lex_cycle4()
    assert solve_weighted(g, cfg, 0.0).total_utility == solve_utilitarian(g, cfg).total_utility
    fam = weighted_cycle_instance(4, 3.0)
    m = solve_weighted(fam.graph, fam.config, 3.0)
    assert pof(4, m.total_utility) == 0.5
    with pytest.raises(NegativeGamma):
        solve_weighted(g, cfg, -1)


def test_no_high_vertices():
    g = build_graph([pair(0, 10), pair(1, 10)], [Edge(0, 1), Edge(1, 0)])
    cfg = ClearingConfig(2, 0)
    assert solve_fair_max(g, cfg).utility("H") == 0
    problem = ClearingProblem(g, cfg)
    assert problem.evaluate(FairnessRule.alpha_lex(1.0))[1].percent_f == 1.0


def test_fair_max_dominates_on_fair_weights():
    for seed in range(10):
        g = random_graph(seed, 10, 1, 0.3)
        problem = ClearingProblem(g, ClearingConfig(3, 3, 0.6))
        assert problem.fair_max().utility("H") >= problem.efficient().utility("H") - 1e-9
        assert problem.efficient().total_utility >= problem.fair_max().total_utility - 1e-9


def test_hybrid_large_delta_returns_lexicographic_fair_matching():
    g, cfg = lex_cycle4()
    m, region = solve_hybrid(g, cfg, 100.0)
    assert region is Region.FAIR
    assert m.utility("H") == 1 and m.total_utility == 2


def test_hybrid_zero_delta_falls_back_to_utilitarian():
    # only the empty matching has u_H = u_L; the L-L cycle is worth 2 in the utilitarian region
    g = build_graph([pair(0, 10), pair(1, 10), pair(2, 95)], [Edge(0, 1), Edge(1, 0)])
    m, region = solve_hybrid(g, ClearingConfig(2, 0), 0.0)
    assert region is Region.UTILITARIAN
    assert m.total_utility == 2


def test_hybrid_grid_mode_picks_an_alpha_candidate():
    g, cfg = lex_cycle4()
    problem = ClearingProblem(g, cfg)
    m, region = problem.hybrid(0.5, mode=HybridMode.GRID)
    assert m.indices in {problem.alpha_lex(a / 10).indices for a in range(11)}
    assert in_fair_region([m.utility("H"), m.utility("L")], 0.5) == (region is Region.FAIR)
    with pytest.raises(ConfigError):
        problem.hybrid(0.5, ClassSpec(("a", "b", "c"), {v: "a" for v in g.pair_ids()}), HybridMode.GRID)


def test_hybrid_matches_exhaustive_oracle():
    for seed, g, cfg, _ in oracle_corpus(25):
        assert hybrid_mismatches(seed, g, cfg) == [], seed


def test_rule_guarantees_on_random_instances():
    for seed in range(12):
        g = random_graph(seed, 12, seed % 3, 0.25)
        problem = ClearingProblem(g, ClearingConfig(3, 3, 0.5 + 0.05 * (seed % 5)))
        u_e = problem.efficient().total_utility
        for alpha in (0.3, 0.7, 1.0):
            m, rep = problem.evaluate(FairnessRule.alpha_lex(alpha))
            assert rep.percent_f >= alpha - 1e-9
            assert verify_matching(g, problem.config, m)
        if u_e > 0:
            for frac in (0.1, 0.3):
                _, rep = problem.evaluate(FairnessRule("hybrid", frac * u_e))
                assert rep.pof <= 2 * frac + 1e-9
        assert problem.evaluate(FairnessRule.weighted(0.0))[1].pof == 0


def test_rule_validation():
    with pytest.raises(ValueError):
        FairnessRule("alpha")
    with pytest.raises(ValueError):
        FairnessRule("nonsense", 1.0)
