"""Compatibility graph model, sensitization partition and the JSON instance format."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable

from .errors import (
    DanglingEdge,
    DuplicateEdge,
    EdgeIntoNdd,
    InstanceError,
    InvalidVertex,
    MalformedInstance,
    NegativeGamma,
    NegativeWeight,
    SelfLoop,
)

DEFAULT_TAU = 80.0
DEFAULT_WEIGHT = 1.0

HIGH = "H"
LOW = "L"


class VertexKind(str, Enum):
    PAIR = "pair"
    NDD = "ndd"


@dataclass(frozen=True)
class Vertex:
    id: int
    kind: VertexKind
    cpra: float | None = None

    @property
    def is_pair(self) -> bool:
        return self.kind is VertexKind.PAIR

    @property
    def is_ndd(self) -> bool:
        return self.kind is VertexKind.NDD


def pair(vid: int, cpra: float) -> Vertex:
    return Vertex(vid, VertexKind.PAIR, float(cpra))


def ndd(vid: int) -> Vertex:
    return Vertex(vid, VertexKind.NDD, None)


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    weight: float = DEFAULT_WEIGHT


@dataclass(frozen=True)
class CompatibilityGraph:
    """Immutable directed compatibility graph.

    Use `build_graph` to construct one; it validates the invariants and fills
    the adjacency index. Two graphs compare equal when their vertices, edges
    and threshold are equal.
    """

    vertices: tuple[Vertex, ...]
    edges: tuple[Edge, ...]
    tau: float = DEFAULT_TAU
    _out: tuple[tuple[Edge, ...], ...] = field(default=(), compare=False, repr=False)
    _weight: dict = field(default_factory=dict, compare=False, repr=False)
    _high: frozenset = field(default=frozenset(), compare=False, repr=False)
    _low: frozenset = field(default=frozenset(), compare=False, repr=False)

    def __hash__(self):
        return hash((self.vertices, self.edges, self.tau))

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    def out_edges(self, vid: int) -> tuple[Edge, ...]:
        """Outgoing edges of `vid`, ordered by destination id."""
        return self._out[vid]

    def has_edge(self, src: int, dst: int) -> bool:
        return (src, dst) in self._weight

    def weight(self, src: int, dst: int) -> float:
        return self._weight[(src, dst)]

    def pair_ids(self) -> list[int]:
        return [v.id for v in self.vertices if v.is_pair]

    def ndd_ids(self) -> list[int]:
        return [v.id for v in self.vertices if v.is_ndd]

    @property
    def high(self) -> frozenset:
        return self._high

    @property
    def low(self) -> frozenset:
        return self._low

    def class_of(self) -> dict[int, str]:
        """Map every pair vertex to HIGH or LOW."""
        return {v: (HIGH if v in self._high else LOW) for v in self.pair_ids()}

    def with_weights(self, weight_fn) -> "CompatibilityGraph":
        """Same topology with each edge weight replaced by weight_fn(edge)."""
        edges = [Edge(e.src, e.dst, float(weight_fn(e))) for e in self.edges]
        return build_graph(self.vertices, edges, self.tau)


def build_graph(vertices: Iterable[Vertex], edges: Iterable[Edge], tau: float = DEFAULT_TAU) -> CompatibilityGraph:
    vertices = tuple(vertices)
    edges = tuple(edges)
    tau = float(tau)
    if not (0.0 <= tau <= 100.0) or math.isnan(tau):
        raise InstanceError(f"tau must lie in [0, 100], got {tau}")

    for pos, v in enumerate(vertices):
        if v.id != pos:
            raise InvalidVertex(f"vertex ids must be dense 0..n-1; position {pos} holds id {v.id}")
        if v.is_pair:
            if v.cpra is None or not (0.0 <= v.cpra <= 100.0):
                raise InvalidVertex(f"pair {v.id} needs cpra in [0, 100], got {v.cpra}")
        elif v.cpra is not None:
            raise InvalidVertex(f"ndd {v.id} must not carry a cpra")

    n = len(vertices)
    weight = {}
    out = [[] for _ in range(n)]
    for e in edges:
        if not (0 <= e.src < n and 0 <= e.dst < n):
            raise DanglingEdge(f"edge {e.src}->{e.dst} references an unknown vertex")
        if e.src == e.dst:
            raise SelfLoop(f"self loop on vertex {e.src}")
        if vertices[e.dst].is_ndd:
            raise EdgeIntoNdd(f"edge {e.src}->{e.dst} ends at a non-directed donor")
        if not e.weight >= 0.0 or math.isinf(e.weight):
            raise NegativeWeight(f"edge {e.src}->{e.dst} has weight {e.weight}")
        if (e.src, e.dst) in weight:
            raise DuplicateEdge(f"edge {e.src}->{e.dst} appears twice")
        weight[(e.src, e.dst)] = e.weight
        out[e.src].append(e)

    high = frozenset(v.id for v in vertices if v.is_pair and v.cpra >= tau)
    low = frozenset(v.id for v in vertices if v.is_pair and v.cpra < tau)
    return CompatibilityGraph(
        vertices,
        edges,
        tau,
        _out=tuple(tuple(sorted(adj, key=lambda e: e.dst)) for adj in out),
        _weight=weight,
        _high=high,
        _low=low,
    )


def partition(graph: CompatibilityGraph) -> tuple[set[int], set[int]]:
    """Highly and lowly sensitized pair ids; NDDs belong to neither."""
    return set(graph.high), set(graph.low)


def fair_weights(graph: CompatibilityGraph) -> CompatibilityGraph:
    high = graph.high
    return graph.with_weights(lambda e: 1.0 if e.dst in high else 0.0)


def gamma_weights(graph: CompatibilityGraph, gamma: float) -> CompatibilityGraph:
    if gamma < 0:
        raise NegativeGamma(f"gamma must be nonnegative, got {gamma}")
    high = graph.high
    scale = 1.0 + gamma
    return graph.with_weights(lambda e: e.weight * scale if e.dst in high else e.weight)


# --- JSON instance format -------------------------------------------------

_TOP_FIELDS = {"tau", "vertices", "edges"}
_VERTEX_FIELDS = {"id", "kind", "cpra"}
_EDGE_FIELDS = {"src", "dst", "weight"}


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _line_locator(text: str, key: str):
    """Best-effort line numbers for the n-th JSON object inside a top-level array."""
    lines = text.splitlines()
    start = None
    for i, line in enumerate(lines):
        if f'"{key}"' in line:
            start = i
            break
    if start is None:
        return lambda idx: None

    positions = []
    depth = 0
    started = False
    for i in range(start, len(lines)):
        for ch in lines[i] if i != start else lines[i][lines[i].index(f'"{key}"'):]:
            if ch == "[":
                depth += 1
                started = True
            elif ch == "]":
                depth -= 1
            elif ch == "{" and depth == 1:
                positions.append(i + 1)
            if started and depth == 0:
                break
        if started and depth == 0:
            break
    return lambda idx: positions[idx] if idx < len(positions) else None


def parse_instance(text: bytes | str) -> CompatibilityGraph:
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedInstance(f"not UTF-8: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedInstance(exc.msg, line=exc.lineno) from None
    if not isinstance(doc, dict):
        raise MalformedInstance("top level must be an object", line=1)
    unknown = sorted(set(doc) - _TOP_FIELDS)
    if unknown:
        raise MalformedInstance(f"unknown field {unknown[0]!r}", field=unknown[0])
    for key in ("vertices", "edges"):
        if key not in doc:
            raise MalformedInstance("missing required field", field=key)
        if not isinstance(doc[key], list):
            raise MalformedInstance("must be an array", field=key)

    tau = doc.get("tau", DEFAULT_TAU)
    if not _is_number(tau):
        raise MalformedInstance("must be a number", field="tau")

    vline = _line_locator(text, "vertices")
    eline = _line_locator(text, "edges")

    vertices = []
    for i, item in enumerate(doc["vertices"]):
        where = f"vertices[{i}]"
        if not isinstance(item, dict):
            raise MalformedInstance("must be an object", line=vline(i), field=where)
        unknown = sorted(set(item) - _VERTEX_FIELDS)
        if unknown:
            raise MalformedInstance(f"unknown field {unknown[0]!r}", line=vline(i), field=f"{where}.{unknown[0]}")
        if not _is_int(item.get("id")):
            raise MalformedInstance("id must be an integer", line=vline(i), field=f"{where}.id")
        kind = item.get("kind")
        if kind == "pair":
            cpra = item.get("cpra")
            if not _is_number(cpra):
                raise MalformedInstance("pair needs a numeric cpra", line=vline(i), field=f"{where}.cpra")
            vertices.append(Vertex(item["id"], VertexKind.PAIR, float(cpra)))
        elif kind == "ndd":
            if "cpra" in item:
                raise MalformedInstance("ndd must not carry a cpra", line=vline(i), field=f"{where}.cpra")
            vertices.append(Vertex(item["id"], VertexKind.NDD, None))
        else:
            raise MalformedInstance(f"kind must be 'pair' or 'ndd', got {kind!r}", line=vline(i), field=f"{where}.kind")
    vertices.sort(key=lambda v: v.id)

    edges = []
    for i, item in enumerate(doc["edges"]):
        where = f"edges[{i}]"
        if not isinstance(item, dict):
            raise MalformedInstance("must be an object", line=eline(i), field=where)
        unknown = sorted(set(item) - _EDGE_FIELDS)
        if unknown:
            raise MalformedInstance(f"unknown field {unknown[0]!r}", line=eline(i), field=f"{where}.{unknown[0]}")
        for key in ("src", "dst"):
            if not _is_int(item.get(key)):
                raise MalformedInstance(f"{key} must be an integer", line=eline(i), field=f"{where}.{key}")
        w = item.get("weight", DEFAULT_WEIGHT)
        if not _is_number(w):
            raise MalformedInstance("weight must be a number", line=eline(i), field=f"{where}.weight")
        edges.append(Edge(item["src"], item["dst"], float(w)))

    try:
        return build_graph(vertices, edges, float(tau))
    except InstanceError as exc:
        if isinstance(exc, MalformedInstance):
            raise
        raise MalformedInstance(f"{type(exc).__name__}: {exc}") from exc


def serialize_instance(graph: CompatibilityGraph) -> bytes:
    vertices = []
    for v in graph.vertices:
        item = {"id": v.id, "kind": v.kind.value}
        if v.is_pair:
            item["cpra"] = v.cpra
        vertices.append(item)
    edges = [{"src": e.src, "dst": e.dst, "weight": e.weight} for e in graph.edges]
    lines = ["{", f'  "tau": {json.dumps(graph.tau)},', '  "vertices": [']
    lines += [f"    {json.dumps(v)}" + ("," if i < len(vertices) - 1 else "") for i, v in enumerate(vertices)]
    lines += ["  ],", '  "edges": [']
    lines += [f"    {json.dumps(e)}" + ("," if i < len(edges) - 1 else "") for i, e in enumerate(edges)]
    lines += ["  ]", "}"]
    return ("\n".join(lines) + "\n").encode("utf-8")


def load_instance(path) -> CompatibilityGraph:
    with open(path, "rb") as fh:
        return parse_instance(fh.read())


def save_instance(graph: CompatibilityGraph, path) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize_instance(graph))
