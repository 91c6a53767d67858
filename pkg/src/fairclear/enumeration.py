"""Capped cycle and chain enumeration with failure-aware expected utilities."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

from .errors import ChainExplosion
from .instance import CompatibilityGraph, Edge

DEFAULT_CHAIN_LIMIT = 10_000_000


class StructureKind(str, Enum):
    CYCLE = "cycle"
    CHAIN = "chain"


class ChainDiscount(str, Enum):
    PREFIX = "prefix"
    ALL_OR_NOTHING = "all_or_nothing"


@dataclass(frozen=True)
class ClearingConfig:
    """Caps and failure model for one clearing problem.

    cycle_cap counts vertices (= edges) in a cycle, chain_cap counts edges in
    a chain (the NDD itself is not counted). edge_success_prob is the
    independent probability that each planned transplant goes ahead.
    """

    cycle_cap: int = 3
    chain_cap: int = 3
    edge_success_prob: float = 1.0
    chain_discount: ChainDiscount = ChainDiscount.PREFIX
    max_chains: int = DEFAULT_CHAIN_LIMIT

    def __post_init__(self):
        if self.cycle_cap < 0 or self.cycle_cap == 1:
            raise ValueError(f"cycle_cap must be 0 or at least 2, got {self.cycle_cap}")
        if self.chain_cap < 0:
            raise ValueError(f"chain_cap must be nonnegative, got {self.chain_cap}")
        if not (0.0 < self.edge_success_prob <= 1.0):
            raise ValueError(f"edge_success_prob must lie in (0, 1], got {self.edge_success_prob}")
        object.__setattr__(self, "chain_discount", ChainDiscount(self.chain_discount))


@dataclass(frozen=True)
class ExchangeStructure:
    """A cycle or chain with its failure-aware utility.

    mass_by_class holds, per recipient class, the summed survival probability
    of the edges into that class, i.e. the utility the structure would have
    if every edge weighed 1.
    """

    kind: StructureKind
    edge_sequence: tuple[Edge, ...]
    expected_utility: float
    utility_by_class: Mapping[str, float] = field(default_factory=dict)
    mass_by_class: Mapping[str, float] = field(default_factory=dict, compare=False, repr=False)
    vertices: tuple[int, ...] = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        if not self.vertices and self.edge_sequence:
            if self.kind is StructureKind.CYCLE:
                vs = tuple(e.src for e in self.edge_sequence)
            else:
                vs = (self.edge_sequence[0].src,) + tuple(e.dst for e in self.edge_sequence)
            object.__setattr__(self, "vertices", vs)

    @property
    def size(self) -> int:
        return len(self.edge_sequence)

    def __hash__(self):
        return hash((self.kind, self.edge_sequence))


def edge_discounts(kind: StructureKind, length: int, config: ClearingConfig) -> list[float]:
    """Survival probability applied to each edge of a structure."""
    p = config.edge_success_prob
    if kind is StructureKind.CYCLE or config.chain_discount is ChainDiscount.ALL_OR_NOTHING:
        return [p**length] * length
    return [p ** (i + 1) for i in range(length)]


def _score(structure, config, class_of, graph=None):
    by_class: dict[str, float] = {}
    mass: dict[str, float] = {}
    discounts = edge_discounts(structure.kind, structure.size, config)
    for e, d in zip(structure.edge_sequence, discounts):
        w = e.weight if graph is None else graph.weight(e.src, e.dst)
        c = class_of[e.dst]
        by_class[c] = by_class.get(c, 0.0) + w * d
        mass[c] = mass.get(c, 0.0) + d
    return by_class, mass


def structure_utility(
    structure: ExchangeStructure,
    config: ClearingConfig,
    class_of: Mapping[int, str],
    graph: CompatibilityGraph | None = None,
) -> tuple[float, dict[str, float]]:
    """Expected utility of a structure, total and split by recipient class.

    Edge weights come from `graph` when given (so a structure can be
    re-scored under reweighted copies of its graph), else from the
    structure's own edges.
    """
    by_class, _ = _score(structure, config, class_of, graph)
    return sum(by_class.values()), by_class


def _make(kind, edges, graph, config, class_of, vertices=()) -> ExchangeStructure:
    s = ExchangeStructure(kind, tuple(edges), 0.0, {}, {}, vertices)
    by_class, mass = _score(s, config, class_of, graph)
    return ExchangeStructure(kind, s.edge_sequence, sum(by_class.values()), by_class, mass, s.vertices)


def rescore(
    structures: list[ExchangeStructure],
    graph: CompatibilityGraph,
    config: ClearingConfig,
    class_of: Mapping[int, str] | None = None,
) -> list[ExchangeStructure]:
    """Recompute utilities under `graph`'s weights (same topology) and an optional class map."""
    if class_of is None:
        class_of = graph.class_of()
    out = []
    for s in structures:
        edges = [Edge(e.src, e.dst, graph.weight(e.src, e.dst)) for e in s.edge_sequence]
        out.append(_make(s.kind, edges, graph, config, class_of, s.vertices))
    return out


def enumerate_cycles(
    graph: CompatibilityGraph, config: ClearingConfig, class_of: Mapping[int, str] | None = None
) -> list[ExchangeStructure]:
    """Simple cycles of 2..cycle_cap pairs, each once with its smallest vertex first.

    Ordered by leading vertex, then depth-first with successors by id.
    """
    cap = config.cycle_cap
    if cap < 2:
        return []
    if class_of is None:
        class_of = graph.class_of()
    preds: dict[int, list[int]] = {}
    for e in graph.edges:
        preds.setdefault(e.dst, []).append(e.src)
    found = []
    for start in graph.pair_ids():
        # edges needed to get back to start through vertices above it; vertices
        # that cannot close a short enough cycle are never entered
        back = {start: 0}
        frontier = [start]
        for dist in range(1, cap):
            nxt = []
            for v in frontier:
                for u in preds.get(v, ()):
                    if u > start and u not in back:
                        back[u] = dist
                        nxt.append(u)
            frontier = nxt
        # iterative DFS: long caps would overflow the recursion limit
        path = [start]
        on_path = {start}
        path_edges: list[Edge] = []
        stack = [iter(graph.out_edges(start))]
        while stack:
            e = next(stack[-1], None)
            if e is None:
                stack.pop()
                if path_edges:
                    on_path.discard(path.pop())
                    path_edges.pop()
                continue
            if e.dst == start:
                if len(path) >= 2:
                    found.append(_make(StructureKind.CYCLE, path_edges + [e], graph, config, class_of, tuple(path)))
                continue
            if e.dst < start or e.dst in on_path or len(path) + back.get(e.dst, cap) > cap:
                continue
            path.append(e.dst)
            on_path.add(e.dst)
            path_edges.append(e)
            stack.append(iter(graph.out_edges(e.dst)))
    return found


def _walk_bound(graph: CompatibilityGraph, cap: int) -> float:
    """Walks of 1..cap edges out of NDDs: an upper bound on the number of chains."""
    n = graph.num_vertices
    frontier = [0.0] * n
    for v in graph.ndd_ids():
        frontier[v] = 1.0
    total = 0.0
    for _ in range(cap):
        nxt = [0.0] * n
        for v, c in enumerate(frontier):
            if c:
                for e in graph.out_edges(v):
                    nxt[e.dst] += c
        frontier = nxt
        total += sum(frontier)
        if total == 0:
            break
    return total


def count_chains(graph: CompatibilityGraph, chain_cap: int, limit: int | None = None) -> int:
    """Number of chains with 1..chain_cap edges; stops counting once it passes `limit`."""
    if chain_cap < 1:
        return 0
    count = 0
    for start in graph.ndd_ids():
        on_path = {start}
        path = [start]
        stack = [iter(graph.out_edges(start))]
        while stack:
            e = next(stack[-1], None)
            if e is None:
                stack.pop()
                on_path.discard(path.pop())
                continue
            if e.dst in on_path:
                continue
            count += 1
            if limit is not None and count > limit:
                return count
            if len(path) < chain_cap:
                path.append(e.dst)
                on_path.add(e.dst)
                stack.append(iter(graph.out_edges(e.dst)))
    return count


def check_chain_count(graph: CompatibilityGraph, config: ClearingConfig) -> None:
    """Raise ChainExplosion if the instance has more chains than config.max_chains."""
    if config.chain_cap < 1 or _walk_bound(graph, config.chain_cap) <= config.max_chains:
        return
    if count_chains(graph, config.chain_cap, config.max_chains) > config.max_chains:
        raise ChainExplosion(
            f"more than {config.max_chains} chains with chain_cap={config.chain_cap}; instance is out of desk scale"
        )


def enumerate_chains(
    graph: CompatibilityGraph, config: ClearingConfig, class_of: Mapping[int, str] | None = None
) -> list[ExchangeStructure]:
    """Simple paths of 1..chain_cap edges starting at an NDD, in depth-first order."""
    cap = config.chain_cap
    if cap < 1:
        return []
    if class_of is None:
        class_of = graph.class_of()
    # fail before materializing anything
    check_chain_count(graph, config)
    p = config.edge_success_prob
    prefix = config.chain_discount is ChainDiscount.PREFIX
    found = []
    for start in graph.ndd_ids():
        path = [start]
        on_path = {start}
        path_edges: list[Edge] = []
        # per depth: (weight sums, edge counts) by class; discounted utilities are
        # extended edge by edge instead of re-scoring every prefix from scratch
        sums = [({}, {})]
        stack = [iter(graph.out_edges(start))]
        while stack:
            e = next(stack[-1], None)
            if e is None:
                stack.pop()
                if path_edges:
                    path_edges.pop()
                    on_path.discard(path.pop())
                    sums.pop()
                continue
            if e.dst in on_path:
                continue
            depth = len(path_edges) + 1
            c = class_of[e.dst]
            weights, counts = dict(sums[-1][0]), dict(sums[-1][1])
            d = p**depth
            if prefix:
                weights[c] = weights.get(c, 0.0) + e.weight * d
                counts[c] = counts.get(c, 0.0) + d
                by_class, mass = weights, counts
            else:
                weights[c] = weights.get(c, 0.0) + e.weight
                counts[c] = counts.get(c, 0.0) + 1.0
                by_class = {k: v * d for k, v in weights.items()}
                mass = {k: v * d for k, v in counts.items()}
            path_edges.append(e)
            path.append(e.dst)
            found.append(
                ExchangeStructure(
                    StructureKind.CHAIN, tuple(path_edges), sum(by_class.values()), by_class, mass, tuple(path)
                )
            )
            if depth < cap:
                on_path.add(e.dst)
                sums.append((weights, counts))
                stack.append(iter(graph.out_edges(e.dst)))
            else:
                path_edges.pop()
                path.pop()
    return found


def enumerate_structures(
    graph: CompatibilityGraph, config: ClearingConfig, class_of: Mapping[int, str] | None = None
) -> list[ExchangeStructure]:
    """All cycles followed by all chains."""
    return enumerate_cycles(graph, config, class_of) + enumerate_chains(graph, config, class_of)


def is_feasible_structure(structure: ExchangeStructure, graph: CompatibilityGraph, config: ClearingConfig) -> bool:
    edges = structure.edge_sequence
    if not edges:
        return False
    n = graph.num_vertices
    for e in edges:
        if not (0 <= e.src < n and 0 <= e.dst < n) or not graph.has_edge(e.src, e.dst):
            return False
    for a, b in zip(edges, edges[1:]):
        if a.dst != b.src:
            return False
    verts = structure.vertices
    if structure.kind is StructureKind.CYCLE:
        if edges[-1].dst != edges[0].src:
            return False
        if not (2 <= len(edges) <= config.cycle_cap):
            return False
        if not all(graph.vertices[v].is_pair for v in verts):
            return False
    else:
        if not graph.vertices[edges[0].src].is_ndd:
            return False
        if not (1 <= len(edges) <= config.chain_cap):
            return False
    return len(set(verts)) == len(verts)
