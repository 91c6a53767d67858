"""Adversarial graph families whose price of fairness is known in closed form.

Highly sensitized vertices get cpra 100, the others cpra 0, and tau is 80.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .enumeration import ClearingConfig
from .errors import CapTooSmall, ConfigError, GammaTooSmall
from .instance import CompatibilityGraph, Edge, build_graph, ndd, pair

HIGH_CPRA = 100.0
LOW_CPRA = 0.0
TAU = 80.0


@dataclass(frozen=True)
class WorstCaseFamily:
    family: str
    params: dict
    graph: CompatibilityGraph
    expected_pof: float
    config: ClearingConfig = field(default_factory=ClearingConfig)
    # rule under which expected_pof is attained: ("alpha", 1.0) or ("weighted", gamma)
    rule: tuple = ("alpha", 1.0)


def _path_edges(ids):
    return [Edge(a, b) for a, b in zip(ids, ids[1:])]


def _cycle_graph(L: int) -> CompatibilityGraph:
    # 0 = H; 1..L = V_1..V_L; H <-> V_1 plus the cycle V_1 -> ... -> V_L -> V_1
    vertices = [pair(0, HIGH_CPRA)] + [pair(i, LOW_CPRA) for i in range(1, L + 1)]
    edges = [Edge(0, 1), Edge(1, 0)] + _path_edges(list(range(1, L + 1))) + [Edge(L, 1)]
    return build_graph(vertices, edges, TAU)


def _chain_graph(R: int) -> CompatibilityGraph:
    # 0 = NDD, 1 = H, 2..R+1 = the pair path; the NDD gives to H or heads the path
    vertices = [ndd(0), pair(1, HIGH_CPRA)] + [pair(i, LOW_CPRA) for i in range(2, R + 2)]
    edges = [Edge(0, 1), Edge(0, 2)] + _path_edges(list(range(2, R + 2)))
    return build_graph(vertices, edges, TAU)


def lex_cycle_instance(L: int) -> WorstCaseFamily:
    if L < 3:
        raise CapTooSmall(f"cycle family needs L >= 3, got {L}")
    return WorstCaseFamily("lex_cycle", {"L": L}, _cycle_graph(L), (L - 2) / L, ClearingConfig(L, 0, 1.0))


def lex_chain_instance(R: int) -> WorstCaseFamily:
    if R < 2:
        raise CapTooSmall(f"chain family needs R >= 2, got {R}")
    return WorstCaseFamily("lex_chain", {"R": R}, _chain_graph(R), (R - 1) / R, ClearingConfig(0, R, 1.0))


def weighted_cycle_instance(L: int, gamma: float) -> WorstCaseFamily:
    if L < 3:
        raise CapTooSmall(f"cycle family needs L >= 3, got {L}")
    if gamma < L - 1:
        raise GammaTooSmall(f"need gamma >= L - 1 = {L - 1}, got {gamma}")
    return WorstCaseFamily(
        "weighted_cycle", {"L": L, "gamma": gamma}, _cycle_graph(L), (L - 2) / L,
        ClearingConfig(L, 0, 1.0), ("weighted", gamma),
    )


def weighted_chain_instance(R: int, gamma: float) -> WorstCaseFamily:
    if R < 2:
        raise CapTooSmall(f"chain family needs R >= 2, got {R}")
    if gamma < R - 1:
        raise GammaTooSmall(f"need gamma >= R - 1 = {R - 1}, got {gamma}")
    return WorstCaseFamily(
        "weighted_chain", {"R": R, "gamma": gamma}, _chain_graph(R), (R - 1) / R,
        ClearingConfig(0, R, 1.0), ("weighted", gamma),
    )


def _long_lengths(N: int, gamma: float) -> tuple[int, int]:
    if N < 2:
        raise ConfigError(f"N must be at least 2, got {N}")
    if not gamma > 0:
        raise ConfigError(f"gamma must be positive, got {gamma}")
    return N, math.floor((gamma + 1) * N) - 1


def long_chain_instance(N: int, gamma: float) -> WorstCaseFamily:
    """One NDD heading an N-pair highly sensitized path and a longer lowly sensitized path."""
    n_high, n_low = _long_lengths(N, gamma)
    root = 0
    high = list(range(1, n_high + 1))
    low = list(range(n_high + 1, n_high + n_low + 1))
    vertices = [ndd(root)] + [pair(v, HIGH_CPRA) for v in high] + [pair(v, LOW_CPRA) for v in low]
    edges = _path_edges([root] + high)
    if low:
        edges += _path_edges([root] + low)
    graph = build_graph(vertices, edges, TAU)
    # both chains leave the single NDD, so at most one of them can be used
    assert len(graph.out_edges(root)) == (2 if low else 1)

    k = math.floor(gamma * N)
    expected = max(0.0, (k - 1) / (k + N - 1))
    config = ClearingConfig(0, len(vertices), 1.0)
    return WorstCaseFamily("long_chain", {"N": N, "gamma": gamma}, graph, expected, config, ("weighted", gamma))


def long_cycle_instance(N: int, gamma: float) -> WorstCaseFamily:
    """Long-chain construction with the NDD replaced by a highly sensitized pair H0
    that both paths return to, closing an H-cycle and a V-cycle through H0."""
    n_high, n_low = _long_lengths(N, gamma)
    root = 0
    high = list(range(1, n_high + 1))
    low = list(range(n_high + 1, n_high + n_low + 1))
    vertices = [pair(root, HIGH_CPRA)] + [pair(v, HIGH_CPRA) for v in high] + [pair(v, LOW_CPRA) for v in low]
    edges = _path_edges([root] + high + [root])
    if low:
        edges += _path_edges([root] + low + [root])
    graph = build_graph(vertices, edges, TAU)
    assert len(graph.out_edges(root)) == (2 if low else 1)

    # H-cycle: N+1 transplants; V-cycle: floor((gamma+1)N) transplants. The weighted
    # rule prefers the H-cycle, the efficient matching the V-cycle when it is longer.
    k = math.floor(gamma * N)
    expected = max(0.0, (k - 1) / (k + N))
    config = ClearingConfig(len(vertices), 0, 1.0)
    return WorstCaseFamily("long_cycle", {"N": N, "gamma": gamma}, graph, expected, config, ("weighted", gamma))


FAMILIES = {
    "lex_cycle": lambda p: lex_cycle_instance(int(p["L"])),
    "lex_chain": lambda p: lex_chain_instance(int(p["R"])),
    "weighted_cycle": lambda p: weighted_cycle_instance(int(p["L"]), float(p["gamma"])),
    "weighted_chain": lambda p: weighted_chain_instance(int(p["R"]), float(p["gamma"])),
    "long_chain": lambda p: long_chain_instance(int(p["N"]), float(p["gamma"])),
    "long_cycle": lambda p: long_cycle_instance(int(p["N"]), float(p["gamma"])),
}


def build_family(name: str, params: dict) -> WorstCaseFamily:
    try:
        factory = FAMILIES[name]
    except KeyError:
        raise ConfigError(f"unknown family {name!r}; choose from {sorted(FAMILIES)}") from None
    try:
        return factory(params)
    except KeyError as exc:
        raise ConfigError(f"family {name!r} needs parameter {exc.args[0]!r}") from None


def measure_pof(family: WorstCaseFamily) -> float:
    """Run the full pipeline on a family under its rule and return the measured price of fairness."""
    from .fairness import ClearingProblem, FairnessRule

    problem = ClearingProblem(family.graph, family.config)
    kind, param = family.rule
    rule = FairnessRule.alpha_lex(param) if kind == "alpha" else FairnessRule.weighted(param)
    return problem.evaluate(rule)[1].pof
