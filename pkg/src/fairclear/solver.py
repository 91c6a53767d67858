"""Exact weighted packing of cycles and chains, with linear side constraints on class utilities.

The search returns, among all optimal packings, the one whose sorted index
tuple is lexicographically smallest. Two packings whose objective values
differ by at most TOL are treated as tied.
"""
from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Iterator, Mapping, Sequence

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import csc_matrix, vstack

from .enumeration import ClearingConfig, ExchangeStructure, StructureKind, is_feasible_structure
from .errors import OracleTooLarge
from .instance import CompatibilityGraph

TOL = 1e-9
ORACLE_LIMIT = 25
# nodes with at least this many live structures also get a linear-relaxation bound
LP_MIN_STRUCTURES = 12
# ...and at most this many vertex-structure incidences (huge relaxations cost
# more than the search they save)
LP_MAX_ENTRIES = 200_000
# phase 1 drops subtrees that cannot beat the incumbent by more than this
# (relative to max(1, |incumbent|)), so the optimal value it reports is
# exact to that precision
PRUNE_EPS = 1e-11
# side constraints are loosened by this much in the relaxation so that
# solver tolerances never cut off a packing that meets them within TOL
LP_SLACK = 1e-6
# objectives whose coefficients are all multiples of a common grain (as with
# unit weights and p = 0.5: multiples of 1/8) only reach values on that
# lattice, so bounds are rounded down to it; grains finer than GRAIN_MIN or
# with denominators past GRAIN_MAX_DEN are ignored
GRAIN_MIN = 1e-6
GRAIN_MAX_DEN = 10**6


class Sense(str, Enum):
    GE = ">="
    LE = "<="


@dataclass(frozen=True)
class SideConstraint:
    """sum_c coefficients[c] * u_c(M)  (>= or <=)  bound."""

    coefficients: Mapping[str, float]
    bound: float
    sense: Sense = Sense.GE

    def __post_init__(self):
        object.__setattr__(self, "sense", Sense(self.sense))
        if not any(c != 0 for c in self.coefficients.values()):
            raise ValueError("side constraint needs at least one nonzero coefficient")

    def lhs(self, utility_by_class: Mapping[str, float]) -> float:
        return sum(c * utility_by_class.get(k, 0.0) for k, c in self.coefficients.items())

    def satisfied(self, utility_by_class: Mapping[str, float], tol: float = TOL) -> bool:
        value = self.lhs(utility_by_class)
        if self.sense is Sense.GE:
            return value >= self.bound - tol
        return value <= self.bound + tol


class SolveStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class Matching:
    structures: tuple[ExchangeStructure, ...] = ()
    indices: tuple[int, ...] = ()
    utility_vector: Mapping[str, float] = field(default_factory=dict)
    total_utility: float = 0.0

    @classmethod
    def from_indices(cls, structures: Sequence[ExchangeStructure], indices) -> "Matching":
        indices = tuple(sorted(indices))
        chosen = tuple(structures[i] for i in indices)
        vector: dict[str, float] = {}
        for s in chosen:
            for c, u in s.utility_by_class.items():
                vector[c] = vector.get(c, 0.0) + u
        return cls(chosen, indices, vector, sum(vector.values()))

    def utility(self, cls: str) -> float:
        return self.utility_vector.get(cls, 0.0)

    def vertices(self) -> set[int]:
        return {v for s in self.structures for v in s.vertices}


@dataclass(frozen=True)
class SolveOutcome:
    matching: Matching
    status: SolveStatus
    nodes_explored: int
    objective_value: float = 0.0

    @property
    def optimal(self) -> bool:
        return self.status is SolveStatus.OPTIMAL


def _objective_array(structures, objective) -> np.ndarray:
    n = len(structures)
    if objective is None:
        return np.array([s.expected_utility for s in structures], dtype=float)
    if isinstance(objective, Mapping):
        arr = np.zeros(n)
        for i, v in objective.items():
            arr[i] = v
        return arr
    arr = np.asarray(objective, dtype=float)
    if arr.shape != (n,):
        raise ValueError(f"objective has shape {arr.shape}, expected ({n},)")
    if not np.all(np.isfinite(arr)):
        raise ValueError("objective must be finite")
    return arr


def objective_grain(obj: np.ndarray) -> float | None:
    """Largest q with every coefficient an integer multiple of q, or None."""
    num, den = 0, 1
    for c in np.unique(np.abs(obj)):
        c = float(c)
        if c == 0.0:
            continue
        f = Fraction(c).limit_denominator(GRAIN_MAX_DEN)
        # a few ulps: sums of short decimal products stay this close to their exact value
        if abs(c - f.numerator / f.denominator) > 1e-15 * c:
            return None
        lcm = den * f.denominator // math.gcd(den, f.denominator)
        if lcm > GRAIN_MAX_DEN:
            return None
        num = math.gcd(num * (lcm // den), f.numerator * (lcm // f.denominator))
        den = lcm
    if num == 0:
        return None
    q = num / den
    return q if q >= GRAIN_MIN else None


class PackingIndex:
    """Vertex incidence of a structure list, reusable across solves.

    Structures re-scored under other weights or classes share one index as
    long as their order and topology are unchanged.
    """

    def __init__(self, structures: Sequence[ExchangeStructure]):
        self.n = n = len(structures)
        lengths = np.array([len(s.vertices) for s in structures], dtype=np.intp)
        raw = np.fromiter(
            (v for s in structures for v in s.vertices), dtype=np.int64, count=int(lengths.sum())
        )
        ids, flat = np.unique(raw, return_inverse=True)
        self.num_vertices = len(ids)
        self.offsets = np.concatenate(([0], np.cumsum(lengths)))
        self.flat = flat.astype(np.intp)
        self.lengths = lengths
        self.owner = owner = np.repeat(np.arange(n), lengths)
        self.incidence = csc_matrix(
            (np.ones(len(self.flat)), (self.flat, owner)), shape=(self.num_vertices, n)
        )
        order = np.argsort(self.flat, kind="stable")
        bounds = np.searchsorted(self.flat[order], np.arange(self.num_vertices + 1))
        self.members = [owner[order[bounds[v]:bounds[v + 1]]] for v in range(self.num_vertices)]

        # a chain spreads its value on its NDD only, a cycle evenly on its vertices
        is_chain = np.array([s.kind is StructureKind.CHAIN for s in structures], dtype=bool)
        first = np.zeros(len(self.flat), dtype=bool)
        first[self.offsets[:-1][lengths > 0]] = True
        keep = first | ~is_chain[owner] if n else first
        self.ent_struct = owner[keep]
        self.ent_vert = self.flat[keep]
        self.ent_frac = np.where(is_chain[self.ent_struct], 1.0, 1.0 / np.maximum(lengths[self.ent_struct], 1))
        self.share_vertex = np.zeros(self.num_vertices, dtype=bool)
        self.share_vertex[self.ent_vert] = True

    def verts(self, j: int) -> np.ndarray:
        return self.flat[self.offsets[j]:self.offsets[j + 1]]


class _Packer:
    """Branch and bound over vertex-disjoint packings.

    Cheap bound: every structure spreads its (positive) value over some of
    its vertices; a chain puts all of it on its NDD, a cycle splits it
    evenly. Any packing is then worth at most the sum over vertices of the
    largest share any remaining structure puts there. Side constraints are
    bounded the same way on their left-hand sides.

    Nodes the cheap bound cannot prune solve the linear relaxation. Its dual
    prices stay valid for every descendant (they only lose structures), so
    children inherit them as a second cheap bound. Dual bounds are padded by
    their measured infeasibility, which keeps them rigorous whatever the LP
    solver's tolerances.
    """

    def __init__(self, structures, objective, constraints, index: PackingIndex | None = None, lp_min=LP_MIN_STRUCTURES):
        self.n = n = len(structures)
        self.index = ix = index if index is not None else PackingIndex(structures)
        if ix.n != n:
            raise ValueError("packing index does not match the structure list")
        self.obj = _objective_array(structures, objective)
        self.grain = objective_grain(self.obj)
        self.constraints = list(constraints)
        self.coef = np.array(
            [[con.lhs(s.utility_by_class) for s in structures] for con in self.constraints], dtype=float
        ).reshape(len(self.constraints), n)
        self.bounds = np.array([con.bound for con in self.constraints], dtype=float)
        self.is_ge = np.array([con.sense is Sense.GE for con in self.constraints], dtype=bool)
        self.num_vertices = ix.num_vertices
        self.members = ix.members
        self.ent_struct = ix.ent_struct
        self.ent_vert = ix.ent_vert
        self.lp_min = lp_min

        # row 0 bounds the objective, row k+1 the k-th constraint in its improving direction
        rows = [np.maximum(self.obj, 0.0)]
        for k in range(len(self.constraints)):
            signed = self.coef[k] if self.is_ge[k] else -self.coef[k]
            rows.append(np.maximum(signed, 0.0))
        self.alloc = [r[self.ent_struct] * ix.ent_frac for r in rows]

        # side constraints as  sign * coef @ x <= sign * (bound - lhs) + LP_SLACK
        self.sign = np.where(self.is_ge, -1.0, 1.0)
        self.signed_coef = self.sign[:, None] * self.coef
        if len(self.constraints):
            self.a_full = vstack([ix.incidence, csc_matrix(self.signed_coef)], format="csc")
        else:
            self.a_full = ix.incidence
        # structures of the current branch, and the last packing found that is
        # worth best (phase 1) or target (target searches)
        self.path: list[int] = []
        self.witness: list[int] = []

        self._conflict: dict[int, np.ndarray] = {}
        self._contains: dict[int, np.ndarray] = {}
        self._share_verts: dict[int, list] = {}
        self.nodes = 0
        self.lp_solves = 0

    def _level(self, total: float) -> float:
        # highest lattice point a packing worth at most `total` can sit on
        return math.floor(total / self.grain + 1e-6)

    def cannot_beat(self, total: float) -> bool:
        """No packing worth at most `total` improves on self.best."""
        if self.grain is None or not math.isfinite(total) or not math.isfinite(self.best):
            return total <= self.best + PRUNE_EPS * max(1.0, abs(self.best))
        return self._level(total) <= round(self.best / self.grain)

    def cannot_reach(self, total: float, target: float) -> bool:
        """No packing worth at most `total` is within TOL of target."""
        if self.grain is None or not math.isfinite(total):
            return total < target - TOL
        return self._level(total) < round(target / self.grain)

    def wants_lp(self, alive: np.ndarray) -> bool:
        if self.lp_min is None:
            return False
        return alive.sum() >= self.lp_min and self.index.lengths[alive].sum() <= LP_MAX_ENTRIES

    def verts(self, j: int) -> np.ndarray:
        return self.index.verts(j)

    def share_verts(self, j: int) -> list:
        out = self._share_verts.get(j)
        if out is None:
            vs = self.verts(j)
            out = vs[self.index.share_vertex[vs]].tolist()
            self._share_verts[j] = out
        return out

    def conflict(self, j: int) -> np.ndarray:
        mask = self._conflict.get(j)
        if mask is None:
            mask = np.zeros(self.n, dtype=bool)
            for v in self.verts(j):
                mask[self.members[v]] = True
            self._conflict[j] = mask
        return mask

    def contains(self, v: int) -> np.ndarray:
        mask = self._contains.get(v)
        if mask is None:
            mask = np.zeros(self.n, dtype=bool)
            mask[self.members[v]] = True
            self._contains[v] = mask
        return mask

    def vertex_bound(self, alive: np.ndarray, row: int) -> np.ndarray:
        live = alive[self.ent_struct]
        buf = np.zeros(self.num_vertices)
        np.maximum.at(buf, self.ent_vert[live], self.alloc[row][live])
        return buf

    def feasible(self, lhs: np.ndarray) -> bool:
        if not len(lhs):
            return True
        ge = self.is_ge
        return bool(np.all(lhs[ge] >= self.bounds[ge] - TOL) and np.all(lhs[~ge] <= self.bounds[~ge] + TOL))

    def constraint_filter(self, alive: np.ndarray, lhs: np.ndarray) -> np.ndarray | None:
        """Drop live structures no feasible completion can contain; None if no completion can meet the constraints.

        Per constraint, room is how far the left-hand side may still move in
        its worsening direction and reach bounds how far the live structures
        could move it back. A structure that worsens it by more than both
        together is dead.
        """
        dead = np.zeros(self.n, dtype=bool)
        for k in range(len(self.constraints)):
            reach = self.vertex_bound(alive, k + 1).sum()
            room = self.sign[k] * (self.bounds[k] - lhs[k])
            if room + reach < -TOL:
                return None
            dead |= self.signed_coef[k] > room + reach + TOL
        return alive & ~dead

    def covered(self, alive: np.ndarray) -> np.ndarray:
        mask = np.zeros(self.num_vertices, dtype=bool)
        mask[self.index.flat[alive[self.index.owner]]] = True
        return mask

    def constraint_rhs(self, lhs: np.ndarray) -> np.ndarray:
        return self.sign * (self.bounds - lhs) + LP_SLACK

    def dual_bound(self, alive, lhs, dual) -> float:
        y, z, pad = dual
        bound = float(y[self.covered(alive)].sum()) + pad
        if len(z):
            bound += float(z @ self.constraint_rhs(lhs))
        return bound

    def lp(self, alive, lhs):
        """Solve the relaxation over the live structures.

        Returns (bound, dual, x) with x the primal solution over
        flatnonzero(alive); (-inf, None, None) when the relaxation is
        infeasible and (inf, None, None) when the LP solver gives up.
        """
        self.lp_solves += 1
        cols = np.flatnonzero(alive)
        a_ub = self.a_full[:, cols]
        a_vert = a_ub[: self.num_vertices]
        if len(self.constraints):
            b_ub = np.concatenate([np.ones(self.num_vertices), self.constraint_rhs(lhs)])
        else:
            b_ub = np.ones(self.num_vertices)
        res = linprog(-self.obj[cols], A_ub=a_ub, b_ub=b_ub, bounds=(0, None), method="highs")
        if res.status == 2:
            return -np.inf, None, None
        if res.status != 0:
            return np.inf, None, None
        marg = -np.asarray(res.ineqlin.marginals)
        y = np.maximum(marg[: self.num_vertices], 0.0)
        z = np.maximum(marg[self.num_vertices:], 0.0)
        obj = self.obj[cols]
        sub = self.signed_coef[:, cols]

        def shortfall(y):
            priced = a_vert.T @ y + (sub.T @ z if len(z) else 0.0)
            return obj - priced

        # make the duals feasible: raise the price of one vertex per underpriced structure
        short = shortfall(y)
        under = short > 0
        if under.any():
            first = self.index.flat[self.index.offsets[cols[under]]]
            np.maximum.at(y, first, y[first] + short[under])
            short = shortfall(y)
        # whatever rounding leaves, times the largest number of chosen structures
        pad = float(np.max(short, initial=0.0)) * self.num_vertices + 1e-13 * (1.0 + abs(res.fun))
        dual = (y, z, pad)
        return self.dual_bound(alive, lhs, dual), dual, res.x

    def violation(self, lhs: np.ndarray) -> float:
        if not len(lhs):
            return 0.0
        return float(np.maximum(self.sign * (lhs - self.bounds) - TOL, 0.0).sum())

    def round_lp(self, cols, x, value, lhs):
        """Greedy packing: LP support by decreasing x, then the other live
        structures by decreasing objective, each added only if it keeps the
        packing disjoint and does not worsen constraint violation.
        Returns (value, lhs, picked) or None if the result breaks a constraint."""
        used = np.zeros(self.num_vertices, dtype=bool)
        picked = []
        worse = self.violation(lhs)
        support = np.argsort(-x, kind="stable")
        support = cols[support[x[support] > 1e-6]]
        others = np.setdiff1d(cols, support)
        others = others[np.argsort(-self.obj[others], kind="stable")]
        for j in np.concatenate([support, others]):
            j = int(j)
            if self.obj[j] <= 0 and not len(lhs):
                continue
            vs = self.verts(j)
            if used[vs].any():
                continue
            if len(lhs):
                trial = lhs + self.coef[:, j]
                v = self.violation(trial)
                if v > worse:
                    continue
                lhs, worse = trial, v
            used[vs] = True
            picked.append(j)
        if not picked or not self.feasible(lhs):
            return None
        return value + float(self.obj[picked].sum()), lhs, picked

    # Depth-first search. With target=None it maximizes into self.best;
    # otherwise it stops at the first packing worth at least target - TOL.
    def search(self, alive, value, lhs, target=None, dual=None) -> bool:
        self.nodes += 1
        if self.feasible(lhs):
            if target is None:
                if value > self.best:
                    self.best = value
                    self.witness = list(self.path)
            elif value >= target - TOL:
                self.witness = list(self.path)
                return True
        if not alive.any():
            return False

        def pruned(ub):
            if target is None:
                return self.cannot_beat(value + ub)
            return self.cannot_reach(value + ub, target)

        if self.constraints:
            alive = self.constraint_filter(alive, lhs)
            if alive is None or not alive.any():
                return False
        buf = self.vertex_bound(alive, 0)
        share = buf.sum()
        if pruned(share):
            return False
        if dual is not None and pruned(self.dual_bound(alive, lhs, dual)):
            return False
        lp_x = None
        if self.wants_lp(alive):
            ub, fresh, x = self.lp(alive, lhs)
            if pruned(ub):
                return False
            if fresh is not None:
                dual = fresh
                lp_x = np.zeros(self.n)
                lp_x[alive] = x
                rounded = self.round_lp(np.flatnonzero(alive), x, value, lhs)
                if rounded is not None:
                    if target is not None and rounded[0] >= target - TOL:
                        self.witness = self.path + rounded[2]
                        return True
                    if target is None and rounded[0] > self.best:
                        self.best = rounded[0]
                        self.witness = self.path + rounded[2]
                        if pruned(ub):
                            return False

        if dual is not None:
            y, z, pad = dual
            y_here = float(y[self.covered(alive)].sum()) + pad
        if lp_x is not None and lp_x.max() > 1e-6:
            # follow the relaxation: branch where its heaviest structure sits
            v = int(self.verts(int(np.argmax(lp_x)))[0])
            branch = np.flatnonzero(alive & self.contains(v))
            order = branch[np.lexsort((-self.obj[branch], -lp_x[branch]))]
        else:
            if buf.max() > 0:
                v = int(np.argmax(buf))
            else:
                v = int(self.verts(int(np.flatnonzero(alive)[0]))[0])
            branch = np.flatnonzero(alive & self.contains(v))
            order = branch[np.argsort(-self.obj[branch], kind="stable")]
        for s in order:
            s = int(s)
            vs = self.verts(s)
            child_lhs = lhs + self.coef[:, s] if len(lhs) else lhs
            rest = share - buf[vs].sum()
            if dual is not None:
                # every vertex of s is covered here and none is in the child
                rest_dual = y_here - float(y[vs].sum())
                if len(z):
                    rest_dual += float(z @ self.constraint_rhs(child_lhs))
                rest = min(rest, rest_dual)
            if pruned(self.obj[s] + rest):
                continue
            child = alive & ~self.conflict(s)
            self.path.append(s)
            found = self.search(child, value + self.obj[s], child_lhs, target, dual)
            self.path.pop()
            if found and target is not None:
                return True
        child = alive & ~self.contains(v)
        return self.search(child, value, lhs, target, dual)

    def suffix_bounds(self, cands: np.ndarray):
        """For each candidate j (ascending), an upper bound on any packing drawn
        from candidates >= j, and a bound on what candidates > j add next to j."""
        live = np.zeros(self.n, dtype=bool)
        live[cands] = True
        m = live[self.ent_struct]
        es = self.ent_struct[m]
        ev = self.ent_vert[m]
        ea = self.alloc[0][m]
        best: dict[int, float] = {}
        total = 0.0
        incl = np.empty(len(cands))
        excl = np.empty(len(cands))
        pos = len(es) - 1
        for i in range(len(cands) - 1, -1, -1):
            j = cands[i]
            excl[i] = total - sum(best.get(v, 0.0) for v in self.share_verts(j))
            while pos >= 0 and es[pos] == j:
                v, a = int(ev[pos]), float(ea[pos])
                old = best.get(v, 0.0)
                if a > old:
                    total += a - old
                    best[v] = a
                pos -= 1
            incl[i] = total
        return incl, excl

    def solve(self) -> tuple[tuple[int, ...] | None, float]:
        limit = sys.getrecursionlimit()
        sys.setrecursionlimit(max(limit, 4 * self.num_vertices + 2000))
        try:
            return self._solve()
        finally:
            sys.setrecursionlimit(limit)

    def _solve(self):
        n = self.n
        lhs0 = np.zeros(len(self.constraints))
        self.best = -np.inf
        self.search(np.ones(n, dtype=bool), 0.0, lhs0)
        if self.best == -np.inf:
            return None, 0.0
        target = self.best

        # Fix the lexicographically smallest optimal index tuple one element at a
        # time. The witness is a known optimal packing extending the fixed
        # prefix; its next element needs no search, only the smaller
        # candidates before it have to be ruled out.
        witness = set(self.witness)
        chosen: list[int] = []
        alive = np.ones(n, dtype=bool)
        value = 0.0
        lhs = lhs0
        while True:
            self.nodes += 1
            if self.feasible(lhs) and value >= target - TOL:
                return tuple(chosen), value
            ahead = witness.difference(chosen)
            known = min(ahead) if ahead else -1
            cands = np.flatnonzero(alive)
            incl, excl = self.suffix_bounds(cands)
            dual = None
            dual_tried = False
            extended = False
            for i, j in enumerate(cands):
                j = int(j)
                if j != known:
                    if self.cannot_reach(value + incl[i], target):
                        break
                    if self.cannot_reach(value + max(self.obj[j], 0.0) + excl[i], target):
                        continue
                # masks are built only for candidates that survive the cheap bounds
                child = alive & ~self.conflict(j)
                child[: j + 1] = False
                child_lhs = lhs + self.coef[:, j] if len(lhs) else lhs
                if j == known:
                    found = True
                else:
                    if not dual_tried and self.wants_lp(alive):
                        _, dual, _ = self.lp(alive, lhs)
                        dual_tried = True
                    if dual is not None and self.cannot_reach(
                        value + self.obj[j] + self.dual_bound(child, child_lhs, dual), target
                    ):
                        continue
                    self.path = chosen + [j]
                    found = self.search(child, value + self.obj[j], child_lhs, target, dual)
                    self.path = []
                    if found:
                        witness = set(self.witness)
                if found:
                    chosen.append(j)
                    alive = child
                    value += self.obj[j]
                    lhs = child_lhs
                    extended = True
                    break
            if not extended:
                raise AssertionError("optimal packing lost during tie-breaking")


def _outcome(structures, packer_or_nodes, indices, objective_arr) -> SolveOutcome:
    nodes = packer_or_nodes
    if indices is None:
        return SolveOutcome(Matching(), SolveStatus.INFEASIBLE, nodes, 0.0)
    value = float(sum(objective_arr[i] for i in indices))
    return SolveOutcome(Matching.from_indices(structures, indices), SolveStatus.OPTIMAL, nodes, value)


def solve_max(
    structures: Sequence[ExchangeStructure],
    objective=None,
    constraints: Sequence[SideConstraint] = (),
    index: PackingIndex | None = None,
    lp_min: int | None = LP_MIN_STRUCTURES,
) -> SolveOutcome:
    """Maximize the summed objective over vertex-disjoint packings.

    `objective` is a sequence (or index -> value mapping) aligned with
    `structures`; None means each structure's expected utility. Returns an
    INFEASIBLE outcome with an empty matching when no packing meets the
    constraints. Pass a prebuilt `index` to skip rebuilding vertex incidence.
    `lp_min` sets how many live structures a search node needs before the
    linear relaxation is consulted; None disables it.
    """
    structures = list(structures)
    packer = _Packer(structures, objective, constraints, index, lp_min)
    indices, _ = packer.solve()
    return _outcome(structures, packer.nodes, indices, packer.obj)


def iter_packings(structures: Sequence[ExchangeStructure]) -> Iterator[tuple[int, ...]]:
    """Every vertex-disjoint packing as a sorted index tuple, in lexicographic order."""
    vsets = [frozenset(s.vertices) for s in structures]
    n = len(vsets)

    def rec(start, chosen, used):
        yield tuple(chosen)
        for j in range(start, n):
            if vsets[j].isdisjoint(used):
                chosen.append(j)
                yield from rec(j + 1, chosen, used | vsets[j])
                chosen.pop()

    yield from rec(0, [], frozenset())


def brute_force_solve(
    structures: Sequence[ExchangeStructure],
    objective=None,
    constraints: Sequence[SideConstraint] = (),
    max_structures: int = ORACLE_LIMIT,
) -> SolveOutcome:
    """Exhaustive reference solver with the same tie-break as solve_max."""
    structures = list(structures)
    if len(structures) > max_structures:
        raise OracleTooLarge(f"{len(structures)} structures exceed the oracle limit of {max_structures}")
    obj = _objective_array(structures, objective)
    scored = []
    count = 0
    for packing in iter_packings(structures):
        count += 1
        by_class: dict[str, float] = {}
        for i in packing:
            for c, u in structures[i].utility_by_class.items():
                by_class[c] = by_class.get(c, 0.0) + u
        if all(con.satisfied(by_class) for con in constraints):
            scored.append((packing, float(sum(obj[i] for i in packing))))
    if not scored:
        return _outcome(structures, count, None, obj)
    best = max(v for _, v in scored)
    for packing, v in scored:
        if v >= best - TOL:
            return _outcome(structures, count, packing, obj)
    raise AssertionError("unreachable")


def verify_matching(graph: CompatibilityGraph, config: ClearingConfig, matching: Matching) -> bool:
    used: set[int] = set()
    for s in matching.structures:
        if not is_feasible_structure(s, graph, config):
            return False
        vs = set(s.vertices)
        if vs & used:
            return False
        used |= vs
    return True
