import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fairclear.enumeration import ClearingConfig, ExchangeStructure, StructureKind, enumerate_structures
from fairclear.errors import OracleTooLarge
from fairclear.instance import Edge, build_graph, ndd, pair
from fairclear.solver import (
    Matching,
    Sense,
    SideConstraint,
    SolveStatus,
    brute_force_solve,
    iter_packings,
    objective_grain,
    solve_max,
    verify_matching,
)

from _instances import oracle_corpus, random_graph


def two_cycle(a, b, value, cls="L"):
    return ExchangeStructure(StructureKind.CYCLE, (Edge(a, b), Edge(b, a)), value, {cls: value})


def test_two_disjoint_cycles():
    s = [two_cycle(0, 1, 1.0), two_cycle(2, 3, 1.0)]
    out = solve_max(s, [1.0, 1.0])
    assert out.matching.indices == (0, 1)
    assert out.objective_value == 2.0


def test_overlapping_cycles_keep_the_better():
    s = [two_cycle(0, 1, 3.0), two_cycle(1, 2, 2.0)]
    out = solve_max(s)
    assert out.matching.indices == (0,)
    assert out.objective_value == 3.0


def test_empty_and_single():
    assert solve_max([]).matching == Matching()
    assert brute_force_solve([]).objective_value == 0.0
    assert brute_force_solve([two_cycle(0, 1, 2.0)]).matching.indices == (0,)


def test_ties_pick_the_smallest_index_tuple():
    # {0} and {1, 2} are both worth 2; (0,) < (1, 2)
    s = [ExchangeStructure(StructureKind.CYCLE, (Edge(0, 1), Edge(1, 2), Edge(2, 3), Edge(3, 0)), 2.0, {"L": 2.0}),
         two_cycle(0, 1, 1.0), two_cycle(2, 3, 1.0)]
    assert solve_max(s).matching.indices == (0,)
    assert brute_force_solve(s).matching.indices == (0,)


def test_infeasible_constraints():
    s = [two_cycle(0, 1, 1.0, "H")]
    out = solve_max(s, constraints=[SideConstraint({"H": 1.0}, 5.0, Sense.GE)])
    assert out.status is SolveStatus.INFEASIBLE
    assert out.matching.structures == ()


def test_constraint_changes_the_choice():
    s = [two_cycle(0, 1, 3.0, "L"), two_cycle(1, 2, 1.0, "H")]
    out = solve_max(s, constraints=[SideConstraint({"H": 1.0}, 1.0)])
    assert out.matching.indices == (1,)


def test_oracle_guard():
    s = [two_cycle(2 * i, 2 * i + 1, 1.0) for i in range(30)]
    with pytest.raises(OracleTooLarge):
        brute_force_solve(s)


def test_iter_packings_is_lexicographic():
    s = [two_cycle(0, 1, 1.0), two_cycle(1, 2, 1.0), two_cycle(3, 4, 1.0)]
    assert list(iter_packings(s)) == [(), (0,), (0, 2), (1,), (1, 2), (2,)]


@pytest.mark.parametrize("values, grain", [
    ([0.5, 0.25, 0.375], 0.125),
    ([1.0, 2.0, 3.0], 1.0),
    ([0.3, 0.09, 0.027], 0.003),
    ([0.0, 0.0], None),
    ([1.0, np.pi], None),
])
def test_objective_grain(values, grain):
    got = objective_grain(np.array(values))
    assert got == pytest.approx(grain) if grain else got is None


def test_verify_matching():
    g = build_graph([ndd(0), pair(1, 0), pair(2, 0), pair(3, 0), pair(4, 0)],
                    [Edge(0, 1), Edge(0, 2), Edge(1, 2), Edge(2, 3), Edge(3, 4), Edge(4, 1), Edge(2, 1)])
    cfg = ClearingConfig(3, 2)
    structures = enumerate_structures(g, cfg)
    out = solve_max(structures)
    assert verify_matching(g, cfg, out.matching)
    chains = [s for s in structures if s.kind is StructureKind.CHAIN and s.size == 1]
    assert not verify_matching(g, cfg, Matching.from_indices(chains, [0, 1]))  # NDD used twice
    four = ExchangeStructure(StructureKind.CYCLE, (Edge(1, 2), Edge(2, 3), Edge(3, 4), Edge(4, 1)), 4.0)
    assert not verify_matching(g, cfg, Matching.from_indices([four], [0]))


@pytest.mark.parametrize("lp_min", [1, 12, None])
def test_matches_oracle(lp_min):
    for seed, g, cfg, structures in oracle_corpus(40):
        rng = np.random.default_rng(seed)
        for obj in (None, rng.choice([0.0, 0.5, 1.0, 2.0], len(structures))):
            a = solve_max(structures, obj, lp_min=lp_min)
            b = brute_force_solve(structures, obj)
            assert a.matching.indices == b.matching.indices, seed
            assert a.objective_value == pytest.approx(b.objective_value, abs=1e-9)
            assert verify_matching(g, cfg, a.matching)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.0, 1.5), st.floats(-1.0, 2.0))
def test_constrained_matches_oracle(seed, h_frac, band):
    g = random_graph(seed, 7, 1, 0.35, unit=bool(seed % 2))
    structures = enumerate_structures(g, ClearingConfig(3, 2, 0.8))[:22]
    top = brute_force_solve(structures).matching
    cons = [SideConstraint({"H": 1.0}, h_frac * top.utility("H")),
            SideConstraint({"L": 1.0, "H": -1.0}, band, Sense.LE)]
    a = solve_max(structures, None, cons)
    b = brute_force_solve(structures, None, cons)
    assert a.status is b.status
    assert a.matching.indices == b.matching.indices


def test_medium_instance_is_a_valid_matching():
    g = random_graph(11, 30, 3, 0.12)
    cfg = ClearingConfig(3, 3, 0.7)
    structures = enumerate_structures(g, cfg)
    with_lp = solve_max(structures)
    without = solve_max(structures, lp_min=None)
    assert with_lp.matching.indices == without.matching.indices
    assert verify_matching(g, cfg, with_lp.matching)
