"""Command-line entry point: solve, sweep, gen, theory, worstcase.

Exit codes: 0 success, 2 bad input or configuration, 3 solve failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .enumeration import ClearingConfig
from .errors import AssumptionViolation, ConfigError, FairclearError, InstanceError
from .fairness import ClearingProblem, FairnessRule, HybridMode
from .harness import SWEEP_MAX_CHAINS, SweepConfig, aggregate, emit_report, run_sweep
from .instance import build_graph, load_instance, save_instance
from .randmodel import (
    REGIME_CSV_FIELDS,
    ModelParams,
    lemma_bound_checks,
    max_pof_over_params,
    regime_row,
    sample_graph,
)
from .worstcase import FAMILIES, build_family, measure_pof

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVE = 3


class _SolveFailure(Exception):
    pass


def _parse_grid(text: str) -> list[float]:
    """'a,b,c' or 'start:stop:step' (stop included when hit)."""
    text = text.strip()
    if ":" in text:
        try:
            start, stop, step = (float(x) for x in text.split(":"))
        except ValueError:
            raise ConfigError(f"bad grid {text!r}; use start:stop:step") from None
        if step <= 0:
            raise ConfigError("grid step must be positive")
        out, k = [], 0
        while start + k * step <= stop + 1e-12:
            out.append(round(start + k * step, 12))
            k += 1
        return out
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"bad grid {text!r}; use comma-separated numbers") from None


def _parse_params(text: str) -> dict:
    """'k=v,k=v' or a JSON object."""
    text = text.strip()
    if text.startswith("{"):
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"bad params JSON: {exc.msg}") from None
    out = {}
    for part in filter(None, (p.strip() for p in text.split(","))):
        if "=" not in part:
            raise ConfigError(f"bad parameter {part!r}; use key=value")
        k, v = part.split("=", 1)
        try:
            out[k.strip()] = json.loads(v)
        except json.JSONDecodeError:
            raise ConfigError(f"parameter {k.strip()!r} needs a numeric value") from None
    return out


def _read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} line {exc.lineno}: {exc.msg}") from None


def _matching_json(matching) -> list[dict]:
    return [
        {"kind": s.kind.value, "vertices": list(s.vertices), "expected_utility": s.expected_utility}
        for s in matching.structures
    ]


def cmd_solve(args) -> int:
    try:
        graph = load_instance(args.instance)
    except OSError as exc:
        raise ConfigError(f"cannot read {args.instance}: {exc}") from None
    if args.tau is not None:
        graph = build_graph(graph.vertices, graph.edges, args.tau)
    try:
        config = ClearingConfig(args.cycle_cap, args.chain_cap, args.edge_prob, args.chain_discount, args.max_chains)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if args.rule != "util" and args.param is None:
        raise ConfigError(f"rule {args.rule} needs --param")
    rule = FairnessRule.utilitarian() if args.rule == "util" else FairnessRule(args.rule, args.param)
    try:
        problem = ClearingProblem(graph, config)
        matching, report = problem.evaluate(rule, args.hybrid_mode)
    except FairclearError as exc:
        raise _SolveFailure(f"{type(exc).__name__}: {exc}") from exc
    out = {
        "rule": args.rule,
        "param": args.param,
        "u_E": report.u_efficient,
        "u_fair": report.u_fair,
        "pof": report.pof,
        "percent_f": report.percent_f,
        "region": report.region.value,
        "utility_by_class": dict(sorted(matching.utility_vector.items())),
        "structures": _matching_json(matching),
    }
    print(json.dumps(out, indent=2))
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = SweepConfig.load(args.config)
    rows = run_sweep(cfg, args.workers)
    emit_report(rows, aggregate(rows), args.out)
    errors = sum(1 for r in rows if r.error)
    print(f"{len(rows)} rows ({errors} errors) written to {args.out}")
    return EXIT_OK


def cmd_gen(args) -> int:
    data = _read_json(args.model_params)
    try:
        params = ModelParams.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad model parameters: {exc}") from None
    if args.seed is not None:
        params = ModelParams.from_dict(dict(params.to_dict(), seed=args.seed))
    graph = sample_graph(params)
    save_instance(graph, args.out)
    print(f"{len(graph.pair_ids())} pairs, {len(graph.ndd_ids())} NDDs, {len(graph.edges)} edges -> {args.out}")
    return EXIT_OK


def cmd_theory(args) -> int:
    betas = _parse_grid(args.beta_grid)
    if not betas or any(b < 0 for b in betas):
        raise ConfigError("beta grid must be nonempty and nonnegative")
    base = ModelParams.from_dict(_read_json(args.model_params)) if args.model_params else ModelParams()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    with open(out / "max_pof.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["beta", "max_pof"])
        for b in betas:
            w.writerow([repr(b), repr(max_pof_over_params(b, args.resolution))])

    with open(out / "regimes.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, REGIME_CSV_FIELDS, lineterminator="\n")
        w.writeheader()
        for b in betas:
            w.writerow(regime_row(ModelParams.from_dict(dict(base.to_dict(), beta=b))))

    report = lemma_bound_checks()
    with open(out / "lemma_checks.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["check", "point"])
        for check, point in report.counterexamples:
            w.writerow([check, json.dumps(point, sort_keys=True)])
    print(report.summary())
    return EXIT_OK if report.passed else EXIT_SOLVE


def cmd_worstcase(args) -> int:
    params = _parse_params(args.params)
    try:
        family = build_family(args.family, params)
    except (FairclearError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    measured = measure_pof(family)
    if args.out:
        save_instance(family.graph, args.out)
    print(json.dumps({
        "family": family.family,
        "params": family.params,
        "rule": list(family.rule),
        "cycle_cap": family.config.cycle_cap,
        "chain_cap": family.config.chain_cap,
        "expected_pof": family.expected_pof,
        "measured_pof": measured,
        "match": abs(measured - family.expected_pof) <= 1e-9,
    }, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fairclear", description="Fairness-aware kidney exchange clearing.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one instance under one rule")
    p.add_argument("--instance", required=True, help="instance JSON file")
    p.add_argument("--rule", required=True, choices=["util", "alpha", "weighted", "hybrid"])
    p.add_argument("--param", type=float, help="alpha, gamma, or the absolute delta for hybrid")
    p.add_argument("--cycle-cap", type=int, default=3)
    p.add_argument("--chain-cap", type=int, default=3)
    p.add_argument("--edge-prob", type=float, default=1.0)
    p.add_argument("--tau", type=float, help="override the instance's sensitization threshold")
    p.add_argument("--hybrid-mode", choices=[m.value for m in HybridMode], default="exact")
    p.add_argument("--chain-discount", choices=["prefix", "all_or_nothing"], default="prefix")
    p.add_argument("--max-chains", type=int, default=SWEEP_MAX_CHAINS)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="run a batch experiment from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--workers", type=int, help="process count (default: $FAIRCLEAR_THREADS or CPU count)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gen", help="sample a random-model instance")
    p.add_argument("--model-params", required=True, help="JSON file with model parameters")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, help="override the seed in the parameter file")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("theory", help="random-model price-of-fairness analytics")
    p.add_argument("--beta-grid", default="0:0.2:0.025", help="'a,b,c' or 'start:stop:step'")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--model-params", help="base parameters for the per-beta regime report")
    p.add_argument("--resolution", type=int, default=40, help="blood-type grid resolution")
    p.set_defaults(func=cmd_theory)

    p = sub.add_parser("worstcase", help="build a worst-case family and measure its price of fairness")
    p.add_argument("--family", required=True, choices=sorted(FAMILIES))
    p.add_argument("--params", default="", help="'L=4' or 'N=1000,gamma=2' or a JSON object")
    p.add_argument("--out", help="also write the instance JSON here")
    p.set_defaults(func=cmd_worstcase)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InstanceError, AssumptionViolation) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _SolveFailure as exc:
        print(f"solve failed: {exc}", file=sys.stderr)
        return EXIT_SOLVE
    except FairclearError as exc:
        print(f"solve failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVE


if __name__ == "__main__":
    sys.exit(main())
