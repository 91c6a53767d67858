"""Fairness rules (utilitarian, alpha-lexicographic, weighted, hybrid) and price-of-fairness metrics."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence

from .enumeration import ClearingConfig, ExchangeStructure, enumerate_structures, rescore
from .errors import ConfigError, DegenerateBound, FairExceedsEfficient, NegativeGamma
from .instance import HIGH, LOW, CompatibilityGraph
from .solver import TOL, Matching, PackingIndex, Sense, SideConstraint, solve_max

DEFAULT_ALPHA_GRID = tuple(round(0.1 * i, 10) for i in range(11))
# margin that turns strict region inequalities into closed solver constraints
STRICT = 2 * TOL


class Region(str, Enum):
    FAIR = "fair"
    UTILITARIAN = "utilitarian"
    NOT_APPLICABLE = "n/a"


class RuleKind(str, Enum):
    UTILITARIAN = "util"
    ALPHA = "alpha"
    WEIGHTED = "weighted"
    HYBRID = "hybrid"


class HybridMode(str, Enum):
    EXACT = "exact"
    GRID = "grid"


@dataclass(frozen=True)
class ClassSpec:
    """Ordered patient classes (most preferred first) and the class of every pair."""

    classes: tuple[str, ...]
    membership: Mapping[int, str]

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        if not self.classes:
            raise ValueError("at least one class is required")
        if len(set(self.classes)) != len(self.classes):
            raise ValueError(f"duplicate class ids in {self.classes}")
        unknown = set(self.membership.values()) - set(self.classes)
        if unknown:
            raise ValueError(f"membership uses undeclared classes {sorted(unknown)}")

    @classmethod
    def two_class(cls, graph: CompatibilityGraph) -> "ClassSpec":
        return cls((HIGH, LOW), graph.class_of())

    def check(self, graph: CompatibilityGraph) -> None:
        missing = [v for v in graph.pair_ids() if v not in self.membership]
        if missing:
            raise ValueError(f"pairs without a class: {missing[:5]}")

    def utilities(self, matching: Matching) -> list[float]:
        return [matching.utility(c) for c in self.classes]


@dataclass(frozen=True)
class FairnessRule:
    kind: RuleKind
    param: float | None = None
    classes: ClassSpec | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", RuleKind(self.kind))
        if self.kind is RuleKind.UTILITARIAN:
            return
        if self.param is None:
            raise ConfigError(f"rule {self.kind.value} needs a parameter")
        if self.kind is RuleKind.ALPHA and not (0.0 <= self.param <= 1.0):
            raise ConfigError(f"alpha must lie in [0, 1], got {self.param}")
        if self.kind is RuleKind.WEIGHTED and self.param < 0:
            raise NegativeGamma(f"gamma must be nonnegative, got {self.param}")
        if self.kind is RuleKind.HYBRID and self.param < 0:
            raise ConfigError(f"delta must be nonnegative, got {self.param}")

    @classmethod
    def utilitarian(cls):
        return cls(RuleKind.UTILITARIAN)

    @classmethod
    def alpha_lex(cls, alpha: float):
        return cls(RuleKind.ALPHA, alpha)

    @classmethod
    def weighted(cls, gamma: float):
        return cls(RuleKind.WEIGHTED, gamma)

    @classmethod
    def hybrid(cls, delta: float, classes: ClassSpec | None = None):
        return cls(RuleKind.HYBRID, delta, classes)


@dataclass(frozen=True)
class PofReport:
    u_efficient: float
    u_fair: float
    pof: float
    percent_f: float
    region: Region = Region.NOT_APPLICABLE


# --- scalar formulas ----------------------------------------------------------


def _sgn(x: float, tol: float = 0.0) -> int:
    if x > tol:
        return 1
    if x < -tol:
        return -1
    return 0


def in_fair_region(utilities: Sequence[float], delta: float, tol: float = 0.0) -> bool:
    return max(utilities) - min(utilities) <= delta + tol


def u_delta_two_class(u_H: float, u_L: float, delta: float) -> float:
    if u_L - u_H > delta:
        return u_L + u_H - delta
    if u_H - u_L > delta:
        return u_L + u_H + delta
    return 2 * u_H


def u_delta_multi(utilities: Sequence[float], delta: float, tol: float = 0.0) -> float:
    """Hybrid utility for any number of ordered classes (first class preferred).

    Inside the fair region the matching is worth |classes| times the first
    class's utility; outside it every other class is offset by +delta if it
    trails the first class and -delta if it leads it.
    """
    u = list(utilities)
    if not u:
        raise ValueError("need at least one class utility")
    if in_fair_region(u, delta, tol):
        return len(u) * u[0]
    return u[0] + sum(ui + _sgn(u[0] - ui, tol) * delta for ui in u[1:])


def u_delta_strict(u_1: float, u_2: float, delta: float, u_1_max: float, tol: float = TOL) -> float:
    if abs(u_1 - u_2) > delta:
        return u_1 + u_2
    if abs(u_1 - u_1_max) <= tol:
        return u_1 + u_2
    return 0.0


def pof(u_efficient: float, u_fair: float) -> float:
    if u_fair > u_efficient + TOL * max(1.0, abs(u_efficient)):
        raise FairExceedsEfficient(f"fair utility {u_fair} exceeds efficient utility {u_efficient}")
    if u_efficient == 0:
        return 0.0
    return max(0.0, (u_efficient - u_fair) / u_efficient)


def percent_fair(u_H_of_M: float, u_H_of_MF: float) -> float:
    if u_H_of_MF == 0:
        return 1.0
    return u_H_of_M / u_H_of_MF


def hybrid_pof_bound(num_classes: int, z: int, delta: float, u_efficient: float) -> float:
    if not (0 <= z <= num_classes - 1):
        raise ValueError(f"z must lie in [0, {num_classes - 1}], got {z}")
    if u_efficient == 0:
        raise DegenerateBound("price-of-fairness bound undefined when the efficient utility is 0")
    return 2 * ((num_classes - 1) - z) * delta / u_efficient


def fair_matching(
    candidates: Sequence[Matching], delta: float, classes: Sequence[str]
) -> tuple[Matching, Region]:
    """Pick the hybrid-optimal matching from an explicit candidate list.

    Among candidates maximizing the hybrid utility, fair-region ones win and
    are refined lexicographically class by class; remaining ties go to the
    earliest candidate.
    """
    if not candidates:
        raise ValueError("no candidate matchings")
    vectors = [[m.utility(c) for c in classes] for m in candidates]
    values = [u_delta_multi(v, delta, TOL) for v in vectors]
    best = max(values)
    top = [i for i, v in enumerate(values) if v >= best - TOL]
    fair = [i for i in top if in_fair_region(vectors[i], delta, TOL)]
    if not fair:
        return candidates[top[0]], Region.UTILITARIAN
    for k in range(len(classes)):
        level = max(vectors[i][k] for i in fair)
        fair = [i for i in fair if vectors[i][k] >= level - TOL]
    return candidates[fair[0]], Region.FAIR


# --- clearing problems -----------------------------------------------------------


class ClearingProblem:
    """Enumerated structures of one (graph, config) pair plus cached rule solves."""

    def __init__(self, graph: CompatibilityGraph, config: ClearingConfig):
        self.graph = graph
        self.config = config
        self.structures: list[ExchangeStructure] = enumerate_structures(graph, config)
        self.index = PackingIndex(self.structures)
        self._efficient: Matching | None = None
        self._fair_max: Matching | None = None
        self.nodes_explored = 0

    def _solve(self, objective, constraints=(), structures=None) -> Matching:
        out = solve_max(self.structures if structures is None else structures, objective, constraints, self.index)
        self.nodes_explored += out.nodes_explored
        if not out.optimal:
            raise AssertionError("constrained solve unexpectedly infeasible")
        return out.matching

    def efficient(self) -> Matching:
        if self._efficient is None:
            self._efficient = self._solve(None)
        return self._efficient

    def fair_max(self) -> Matching:
        if self._fair_max is None:
            # unit weight on edges into highly sensitized pairs, zero elsewhere
            self._fair_max = self._solve([s.mass_by_class.get(HIGH, 0.0) for s in self.structures])
        return self._fair_max

    def alpha_lex(self, alpha: float) -> Matching:
        if not (0.0 <= alpha <= 1.0):
            raise ConfigError(f"alpha must lie in [0, 1], got {alpha}")
        floor = SideConstraint({HIGH: 1.0}, alpha * self.fair_max().utility(HIGH), Sense.GE)
        # the efficient matching is optimal (and first among ties) wherever it is feasible
        if floor.satisfied(self.efficient().utility_vector):
            return self.efficient()
        return self._solve(None, [floor])

    def weighted(self, gamma: float) -> Matching:
        if gamma < 0:
            raise NegativeGamma(f"gamma must be nonnegative, got {gamma}")
        # scaling the weights of edges into highly sensitized pairs scales their utility share
        scale = 1.0 + gamma
        return self._solve([scale * s.utility_by_class.get(HIGH, 0.0) + s.utility_by_class.get(LOW, 0.0)
                            for s in self.structures])

    def _class_structures(self, classes: ClassSpec) -> list[ExchangeStructure]:
        if classes.classes == (HIGH, LOW) and dict(classes.membership) == self.graph.class_of():
            return self.structures
        classes.check(self.graph)
        return rescore(self.structures, self.graph, self.config, classes.membership)

    def hybrid(
        self,
        delta: float,
        classes: ClassSpec | None = None,
        mode: HybridMode | str = HybridMode.EXACT,
        alphas: Sequence[float] = DEFAULT_ALPHA_GRID,
    ) -> tuple[Matching, Region]:
        if delta < 0:
            raise ConfigError(f"delta must be nonnegative, got {delta}")
        classes = classes or ClassSpec.two_class(self.graph)
        mode = HybridMode(mode)
        if mode is HybridMode.GRID:
            if classes.classes != (HIGH, LOW):
                raise ConfigError("grid hybrid mode is defined for the two sensitization classes only")
            candidates = [self.alpha_lex(a) for a in alphas]
            return fair_matching(candidates, delta, classes.classes)
        structures = self._class_structures(classes)
        matching, region = self._hybrid_exact(structures, classes.classes, delta)
        return Matching.from_indices(structures, matching.indices), region

    def _hybrid_exact(self, structures, classes, delta) -> tuple[Matching, Region]:
        def solve(objective, constraints):
            out = solve_max(structures, objective, constraints, self.index)
            self.nodes_explored += out.nodes_explored
            return out.matching if out.optimal else None

        def column(c):
            return [s.utility_by_class.get(c, 0.0) for s in structures]

        def diff(a, b):
            return {a: 1.0, b: -1.0}

        # Fair region: the empty matching always qualifies, so this never fails.
        pairs = list(itertools.permutations(classes, 2))
        fixed = [SideConstraint(diff(a, b), delta, Sense.LE) for a, b in pairs]
        fair = None
        for c in classes:
            fair = solve(column(c), fixed)
            if fair is None:
                raise AssertionError("fair region lost during lexicographic refinement")
            fixed.append(SideConstraint({c: 1.0}, fair.utility(c), Sense.GE))
        fair_value = u_delta_multi([fair.utility(c) for c in classes], delta, TOL)

        # Utilitarian region, one cell per sign pattern and violating ordered pair.
        # A cell is worth its total utility plus delta per trailing class minus
        # delta per leading one, so u(M_E) plus that offset bounds it, and when
        # M_E lies in the cell it is the cell's answer.
        lead, rest = classes[0], classes[1:]
        total = [s.expected_utility for s in structures]
        efficient = Matching.from_indices(structures, self.efficient().indices)
        best = None
        for signs in itertools.product((1, 0, -1), repeat=len(rest)):
            ceiling = efficient.total_utility + delta * sum(signs)
            if ceiling < max(fair_value, best[0] if best else -math.inf) - TOL:
                continue
            cons = []
            height = {lead: 0}
            for c, s in zip(rest, signs):
                height[c] = -s
                if s == 1:
                    cons.append(SideConstraint(diff(lead, c), STRICT, Sense.GE))
                elif s == -1:
                    cons.append(SideConstraint(diff(lead, c), -STRICT, Sense.LE))
                else:
                    cons.append(SideConstraint(diff(lead, c), 0.0, Sense.GE))
                    cons.append(SideConstraint(diff(lead, c), 0.0, Sense.LE))
            for a, b in pairs:
                if height[a] < height[b] or height[a] == height[b] == 0:
                    continue
                cell = cons + [SideConstraint(diff(a, b), delta + STRICT, Sense.GE)]
                if all(c.satisfied(efficient.utility_vector) for c in cell):
                    m = efficient
                else:
                    m = solve(total, cell)
                if m is None:
                    continue
                value = u_delta_multi([m.utility(c) for c in classes], delta, TOL)
                if best is None or value > best[0] + TOL or (value >= best[0] - TOL and m.indices < best[1].indices):
                    best = (value, m)

        if best is None or fair_value >= best[0] - TOL:
            return fair, Region.FAIR
        return best[1], Region.UTILITARIAN

    def solve(self, rule: FairnessRule, mode: HybridMode | str = HybridMode.EXACT) -> tuple[Matching, Region]:
        if rule.kind is RuleKind.UTILITARIAN:
            return self.efficient(), Region.NOT_APPLICABLE
        if rule.kind is RuleKind.ALPHA:
            return self.alpha_lex(rule.param), Region.NOT_APPLICABLE
        if rule.kind is RuleKind.WEIGHTED:
            return self.weighted(rule.param), Region.NOT_APPLICABLE
        return self.hybrid(rule.param, rule.classes, mode)

    def report(self, matching: Matching, region: Region = Region.NOT_APPLICABLE) -> PofReport:
        u_e = self.efficient().total_utility
        return PofReport(
            u_efficient=u_e,
            u_fair=matching.total_utility,
            pof=pof(u_e, matching.total_utility),
            percent_f=percent_fair(matching.utility(HIGH), self.fair_max().utility(HIGH)),
            region=region,
        )

    def evaluate(self, rule: FairnessRule, mode: HybridMode | str = HybridMode.EXACT) -> tuple[Matching, PofReport]:
        matching, region = self.solve(rule, mode)
        return matching, self.report(matching, region)


def solve_utilitarian(graph: CompatibilityGraph, config: ClearingConfig) -> Matching:
    return ClearingProblem(graph, config).efficient()


def solve_fair_max(graph: CompatibilityGraph, config: ClearingConfig) -> Matching:
    return ClearingProblem(graph, config).fair_max()


def solve_alpha_lex(graph: CompatibilityGraph, config: ClearingConfig, alpha: float) -> Matching:
    return ClearingProblem(graph, config).alpha_lex(alpha)


def solve_weighted(graph: CompatibilityGraph, config: ClearingConfig, gamma: float) -> Matching:
    return ClearingProblem(graph, config).weighted(gamma)


def solve_hybrid(
    graph: CompatibilityGraph,
    config: ClearingConfig,
    delta: float,
    classes: ClassSpec | None = None,
    mode: HybridMode | str = HybridMode.EXACT,
) -> tuple[Matching, Region]:
    return ClearingProblem(graph, config).hybrid(delta, classes, mode)
