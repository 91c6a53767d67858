"""Batch sweeps over instances, caps, success probabilities and rule parameters,
with aggregation and CSV emission.

Output bytes depend only on the config: rows are sorted canonically and solve
times go to a separate timings file.
"""
from __future__ import annotations

import csv
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Mapping, Sequence

from .enumeration import ClearingConfig, check_chain_count
from .errors import ConfigError, FairclearError
from .fairness import ClearingProblem, FairnessRule, HybridMode, PofReport
from .instance import CompatibilityGraph, load_instance
from .randmodel import ModelParams, check_assumptions, sample_graph
from .worstcase import FAMILIES, build_family

DEFAULT_ALPHAS = tuple(round(0.1 * i, 10) for i in range(11))
DEFAULT_GAMMAS = tuple(float(2 * i) for i in range(11))
DEFAULT_DELTAS = tuple(round(0.1 * i, 10) for i in range(11))
DEFAULT_EDGE_PROBS = tuple(round(0.1 * i, 10) for i in range(1, 11))
DEFAULT_CHAIN_CAPS = (0, 3, 10, 20)
# chains materialized per (instance, cap) before a cell is reported as out of scale
SWEEP_MAX_CHAINS = 200_000
THREADS_ENV = "FAIRCLEAR_THREADS"
SEED_STRIDE = 1000

RULE_ORDER = ("alpha", "weighted", "hybrid")


# --- instance specs -------------------------------------------------------------


@dataclass(frozen=True)
class InstanceSpec:
    """Where one instance comes from: a JSON file, the random model or a worst-case family.

    cycle_cap / chain_caps override the sweep-wide values for this instance.
    """

    id: str
    source: str  # "file" | "randmodel" | "worstcase"
    path: str | None = None
    params: Mapping = field(default_factory=dict)
    family: str | None = None
    cycle_cap: int | None = None
    chain_caps: tuple[int, ...] | None = None

    def load(self) -> CompatibilityGraph:
        if self.source == "file":
            return load_instance(self.path)
        if self.source == "randmodel":
            return sample_graph(ModelParams.from_dict(self.params))
        return build_family(self.family, dict(self.params)).graph


def _randmodel_spec(item: Mapping, seed: int, pos: int) -> list[InstanceSpec]:
    base = dict(item.get("params", {}))
    count = int(item.get("count", 1))
    # items without a seed get disjoint blocks of SEED_STRIDE seeds
    first = int(base.pop("seed", seed + SEED_STRIDE * pos))
    specs = []
    for k in range(count):
        params = dict(base, seed=first + k)
        try:
            mp = ModelParams.from_dict(params)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"instances[{pos}]: bad model parameters: {exc}") from None
        bad = check_assumptions(mp)
        if bad:
            raise ConfigError(f"instances[{pos}]: model assumptions violated: {', '.join(bad)}")
        prefix = item.get("id", f"rand{pos}")
        specs.append(InstanceSpec(f"{prefix}-s{first + k}", "randmodel", params=mp.to_dict(),
                                  cycle_cap=item.get("cycle_cap"), chain_caps=_caps(item.get("chain_caps"))))
    return specs


def _caps(value):
    return None if value is None else tuple(int(c) for c in value)


def _worstcase_spec(item: Mapping, pos: int) -> InstanceSpec:
    name = item.get("family")
    if name not in FAMILIES:
        raise ConfigError(f"instances[{pos}]: unknown family {name!r}; choose from {sorted(FAMILIES)}")
    params = dict(item.get("params", {}))
    try:
        fam = build_family(name, params)
    except FairclearError as exc:
        raise ConfigError(f"instances[{pos}]: {exc}") from None
    # the family's own caps make its closed form hold; sweep caps apply otherwise
    cycle_cap = item.get("cycle_cap", fam.config.cycle_cap or None)
    chain_caps = _caps(item.get("chain_caps")) or ((fam.config.chain_cap,) if fam.config.chain_cap else None)
    tag = "-".join(f"{k}{params[k]}" for k in sorted(params))
    return InstanceSpec(item.get("id", f"{name}-{tag}"), "worstcase", params=params, family=name,
                        cycle_cap=cycle_cap, chain_caps=chain_caps)


def default_corpus(seed: int = 0) -> list[dict]:
    """32 random-model instances (16 each at n=32 and n=64) plus the small worst-case fixtures."""
    items = []
    for i in range(32):
        n = 32 if i < 16 else 64
        beta = (0.0, 0.05, 0.1, 0.2)[i % 4]
        items.append({"generator": "randmodel", "id": f"rand-n{n}-b{beta}",
                      "params": {"n": n, "beta": beta, "lam": 0.8, "seed": seed + i}})
    for L in (3, 4, 5, 6):
        items.append({"generator": "worstcase", "family": "lex_cycle", "params": {"L": L}})
    for R in (2, 3, 4, 5, 6):
        items.append({"generator": "worstcase", "family": "lex_chain", "params": {"R": R}})
    for name in ("long_chain", "long_cycle"):
        items.append({"generator": "worstcase", "family": name, "params": {"N": 10, "gamma": 2.0}})
    return items


def expand_instances(items: Sequence, seed: int = 0, base_dir: Path | None = None) -> list[InstanceSpec]:
    specs: list[InstanceSpec] = []
    for pos, item in enumerate(items):
        if isinstance(item, str):
            item = {"path": item}
        if not isinstance(item, Mapping):
            raise ConfigError(f"instances[{pos}] must be a path or an object")
        gen = item.get("generator")
        if gen == "default_corpus":
            specs += expand_instances(default_corpus(int(item.get("seed", seed))), seed, base_dir)
        elif gen == "randmodel":
            specs += _randmodel_spec(item, seed, pos)
        elif gen == "worstcase":
            specs.append(_worstcase_spec(item, pos))
        elif gen is None and "path" in item:
            path = Path(item["path"])
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            specs.append(InstanceSpec(item.get("id", path.stem), "file", path=str(path),
                                      cycle_cap=item.get("cycle_cap"), chain_caps=_caps(item.get("chain_caps"))))
        else:
            raise ConfigError(f"instances[{pos}]: need a path or a generator (randmodel, worstcase, default_corpus)")
    ids = [s.id for s in specs]
    dup = sorted({i for i in ids if ids.count(i) > 1})
    if dup:
        raise ConfigError(f"duplicate instance ids: {dup[:5]}")
    return specs


# --- config ---------------------------------------------------------------------


def _grid(name, values, lo=None, hi=None, allow_empty=True):
    try:
        out = tuple(float(v) for v in values)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a list of numbers") from None
    if not out and not allow_empty:
        raise ConfigError(f"{name} must not be empty")
    for v in out:
        if (lo is not None and v < lo) or (hi is not None and v > hi):
            raise ConfigError(f"{name} value {v} outside [{lo}, {hi}]")
    return out


@dataclass(frozen=True)
class SweepConfig:
    """One sweep: instances x chain caps x success probabilities x rule grids.

    deltas are fractions of the efficient utility. A rule whose grid is empty
    is skipped; caps and probabilities must be nonempty.
    """

    instances: tuple[InstanceSpec, ...] = ()
    chain_caps: tuple[int, ...] = DEFAULT_CHAIN_CAPS
    edge_probs: tuple[float, ...] = DEFAULT_EDGE_PROBS
    alphas: tuple[float, ...] = DEFAULT_ALPHAS
    gammas: tuple[float, ...] = DEFAULT_GAMMAS
    deltas: tuple[float, ...] = DEFAULT_DELTAS
    hybrid_mode: HybridMode = HybridMode.EXACT
    cycle_cap: int = 3
    chain_discount: str = "prefix"
    max_chains: int = SWEEP_MAX_CHAINS
    seed: int = 0

    def __post_init__(self):
        caps = tuple(int(c) for c in self.chain_caps)
        if not caps or any(c < 0 for c in caps):
            raise ConfigError("chain_caps must be a nonempty list of nonnegative integers")
        object.__setattr__(self, "chain_caps", caps)
        probs = _grid("edge_probs", self.edge_probs, 0.0, 1.0, allow_empty=False)
        if any(p <= 0 for p in probs):
            raise ConfigError("edge_probs must lie in (0, 1]")
        object.__setattr__(self, "edge_probs", probs)
        object.__setattr__(self, "alphas", _grid("alphas", self.alphas, 0.0, 1.0))
        object.__setattr__(self, "gammas", _grid("gammas", self.gammas, 0.0))
        object.__setattr__(self, "deltas", _grid("deltas", self.deltas, 0.0, 1.0))
        try:
            object.__setattr__(self, "hybrid_mode", HybridMode(self.hybrid_mode))
        except ValueError:
            raise ConfigError(f"hybrid_mode must be exact or grid, got {self.hybrid_mode!r}") from None
        if self.cycle_cap < 0 or self.cycle_cap == 1:
            raise ConfigError(f"cycle_cap must be 0 or at least 2, got {self.cycle_cap}")
        if self.chain_discount not in ("prefix", "all_or_nothing"):
            raise ConfigError(f"chain_discount must be prefix or all_or_nothing, got {self.chain_discount!r}")
        if self.max_chains < 1:
            raise ConfigError("max_chains must be positive")

    @classmethod
    def from_dict(cls, data: Mapping, base_dir: Path | None = None) -> "SweepConfig":
        if not isinstance(data, Mapping):
            raise ConfigError("sweep config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config field {unknown[0]!r}")
        kw = dict(data)
        seed = int(kw.get("seed", 0))
        kw["instances"] = tuple(expand_instances(kw.get("instances", []), seed, base_dir))
        for key in ("chain_caps", "edge_probs", "alphas", "gammas", "deltas"):
            if key in kw:
                if not isinstance(kw[key], list):
                    raise ConfigError(f"{key} must be a list")
                kw[key] = tuple(kw[key])
        try:
            return cls(**kw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def load(cls, path) -> "SweepConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} line {exc.lineno}: {exc.msg}") from None
        return cls.from_dict(data, path.parent)


# --- rows -------------------------------------------------------------------------

RESULT_FIELDS = (
    "instance", "rule", "parameter", "cycle_cap", "chain_cap", "p",
    "u_E", "u_fair", "pof", "percent_f", "region", "error",
)


@dataclass(frozen=True)
class ResultRow:
    instance: str
    rule: str
    parameter: float | None
    cycle_cap: int
    chain_cap: int
    p: float
    u_E: float | None = None
    u_fair: float | None = None
    pof: float | None = None
    percent_f: float | None = None
    region: str = ""
    error: str = ""
    solve_time: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.error

    def sort_key(self):
        rule = RULE_ORDER.index(self.rule) if self.rule in RULE_ORDER else len(RULE_ORDER)
        param = -1.0 if self.parameter is None else self.parameter
        return (self.instance, self.cycle_cap, self.chain_cap, self.p, rule, self.rule, param)

    def csv_record(self) -> list[str]:
        return [_fmt(getattr(self, name)) for name in RESULT_FIELDS]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass(frozen=True)
class Cell:
    spec: InstanceSpec
    cycle_cap: int
    chain_cap: int
    p: float


def _rule_rows(cell: Cell, problem: ClearingProblem, cfg: SweepConfig) -> list[ResultRow]:
    rows = []
    base = dict(instance=cell.spec.id, cycle_cap=cell.cycle_cap, chain_cap=cell.chain_cap, p=cell.p)
    u_e = problem.efficient().total_utility

    def emit(rule, param, thunk):
        start = time.perf_counter()
        try:
            report: PofReport = thunk()
        except FairclearError as exc:
            rows.append(ResultRow(rule=rule, parameter=param, error=f"{type(exc).__name__}: {exc}", **base))
            return
        rows.append(ResultRow(
            rule=rule, parameter=param, u_E=report.u_efficient, u_fair=report.u_fair, pof=report.pof,
            percent_f=report.percent_f, region=report.region.value, solve_time=time.perf_counter() - start, **base,
        ))

    for a in cfg.alphas:
        emit("alpha", a, lambda a=a: problem.evaluate(FairnessRule.alpha_lex(a))[1])
    for g in cfg.gammas:
        emit("weighted", g, lambda g=g: problem.evaluate(FairnessRule.weighted(g))[1])
    for d in cfg.deltas:
        emit("hybrid", d, lambda d=d: _hybrid_report(problem, d * u_e, cfg))
    return rows


def _hybrid_report(problem: ClearingProblem, delta: float, cfg: SweepConfig) -> PofReport:
    alphas = cfg.alphas or DEFAULT_ALPHAS
    matching, region = problem.hybrid(delta, mode=cfg.hybrid_mode, alphas=alphas)
    return problem.report(matching, region)


def run_cell(cell: Cell, cfg: SweepConfig, graph: CompatibilityGraph | None = None) -> list[ResultRow]:
    base = dict(instance=cell.spec.id, cycle_cap=cell.cycle_cap, chain_cap=cell.chain_cap, p=cell.p)
    try:
        if graph is None:
            graph = cell.spec.load()
        config = ClearingConfig(cell.cycle_cap, cell.chain_cap, cell.p, cfg.chain_discount, cfg.max_chains)
        problem = ClearingProblem(graph, config)
        problem.efficient()
        problem.fair_max()
    except (FairclearError, OSError, ValueError) as exc:
        return [ResultRow(rule="error", parameter=None, error=f"{type(exc).__name__}: {exc}", **base)]
    return _rule_rows(cell, problem, cfg)


def _instance_rows(spec: InstanceSpec, cfg: SweepConfig) -> list[ResultRow]:
    cycle_cap = cfg.cycle_cap if spec.cycle_cap is None else int(spec.cycle_cap)
    caps = spec.chain_caps or cfg.chain_caps
    try:
        graph = spec.load()
    except (FairclearError, OSError, ValueError) as exc:
        msg = f"{type(exc).__name__}: {exc}"
        return [ResultRow(spec.id, "error", None, cycle_cap, c, p, error=msg) for c in caps for p in cfg.edge_probs]
    rows = []
    for cap in caps:
        # the chain count does not depend on p: check it once per cap
        try:
            check_chain_count(graph, ClearingConfig(cycle_cap, cap, 1.0, max_chains=cfg.max_chains))
        except FairclearError as exc:
            msg = f"{type(exc).__name__}: {exc}"
            rows += [ResultRow(spec.id, "error", None, cycle_cap, cap, p, error=msg) for p in cfg.edge_probs]
            continue
        for p in cfg.edge_probs:
            rows += run_cell(Cell(spec, cycle_cap, cap, p), cfg, graph)
    return rows


def _threads() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return os.cpu_count() or 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None


def run_sweep(cfg: SweepConfig, workers: int | None = None) -> list[ResultRow]:
    """Every rule row for every (instance, chain cap, p), canonically sorted."""
    workers = _threads() if workers is None else max(1, workers)
    specs = list(cfg.instances)
    if workers == 1 or len(specs) <= 1:
        batches = [_instance_rows(s, cfg) for s in specs]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(specs))) as pool:
            batches = list(pool.map(_instance_rows, specs, [cfg] * len(specs)))
    rows = [r for batch in batches for r in batch]
    rows.sort(key=ResultRow.sort_key)
    return rows


# --- aggregation --------------------------------------------------------------------

SUMMARY_FIELDS = ("rule", "parameter", "cycle_cap", "chain_cap", "p", "count", "max_pof", "min_percent_f")


@dataclass(frozen=True)
class SummaryRow:
    rule: str
    parameter: float
    cycle_cap: int
    chain_cap: int
    p: float
    count: int
    max_pof: float
    min_percent_f: float
    mean_solve_time: float


def aggregate(rows: Sequence[ResultRow]) -> list[SummaryRow]:
    """Worst case per (rule, parameter, cycle cap, chain cap, p); error rows are skipped."""
    groups: dict[tuple, list[ResultRow]] = {}
    for r in rows:
        if r.ok:
            groups.setdefault((r.rule, r.parameter, r.cycle_cap, r.chain_cap, r.p), []).append(r)
    out = []
    for key in sorted(groups, key=lambda k: (RULE_ORDER.index(k[0]) if k[0] in RULE_ORDER else 99, k)):
        g = groups[key]
        out.append(SummaryRow(
            *key,
            count=len(g),
            max_pof=max(r.pof for r in g),
            min_percent_f=min(r.percent_f for r in g),
            mean_solve_time=sum(r.solve_time for r in g) / len(g),
        ))
    return out


# --- emission ---------------------------------------------------------------------

PLOT_PARAMETER = {"alpha": "alpha", "weighted": "gamma", "hybrid": "delta_over_u_E"}


def _write(path: Path, header: Sequence[str], records) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for rec in records:
            w.writerow([_fmt(x) for x in rec])


def emit_report(rows: Sequence[ResultRow], summary: Sequence[SummaryRow], out_dir) -> list[Path]:
    """Write results, summary, plot data and timings CSVs into out_dir; returns the paths written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    path = out / "results.csv"
    _write(path, RESULT_FIELDS, (r.csv_record() for r in rows))
    written.append(path)

    path = out / "summary.csv"
    _write(path, SUMMARY_FIELDS, ([getattr(s, f) for f in SUMMARY_FIELDS] for s in summary))
    written.append(path)

    # max PoF and min %F against each rule's parameter, one series per (cycle cap, chain cap, p)
    for rule in sorted({s.rule for s in summary}):
        sub = [s for s in summary if s.rule == rule]
        pname = PLOT_PARAMETER.get(rule, "parameter")
        path = out / f"plotdata_pof_{rule}.csv"
        _write(path, ("cycle_cap", "chain_cap", "p", pname, "max_pof"),
               ((s.cycle_cap, s.chain_cap, s.p, s.parameter, s.max_pof) for s in sub))
        written.append(path)
        path = out / f"plotdata_fair_{rule}.csv"
        _write(path, ("cycle_cap", "chain_cap", "p", pname, "min_percent_f"),
               ((s.cycle_cap, s.chain_cap, s.p, s.parameter, s.min_percent_f) for s in sub))
        written.append(path)

    # wall-clock numbers change run to run, so they live apart from the reproducible files
    path = out / "timings.csv"
    _write(path, ("rule", "parameter", "cycle_cap", "chain_cap", "p", "count", "mean_solve_time"),
           ((s.rule, s.parameter, s.cycle_cap, s.chain_cap, s.p, s.count, s.mean_solve_time) for s in summary))
    written.append(path)
    return written


def sweep_to_dir(cfg: SweepConfig, out_dir, workers: int | None = None) -> list[ResultRow]:
    rows = run_sweep(cfg, workers)
    emit_report(rows, aggregate(rows), out_dir)
    return rows


def percent_f_floor_ok(row: ResultRow, tol: float = 1e-9) -> bool:
    """The alpha-lex guarantee for one row."""
    return row.rule != "alpha" or row.percent_f >= row.parameter - tol


def hybrid_bound_ok(row: ResultRow, tol: float = 1e-9) -> bool:
    """Two-class hybrid guarantee: PoF at most 2 * delta / u_E (delta is stored as a fraction of u_E)."""
    return row.rule != "hybrid" or row.pof <= 2 * row.parameter + tol

