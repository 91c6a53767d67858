"""Fairness-aware kidney exchange clearing.

Exact cycle/chain packing with failure-aware utilities, fairness rules
(alpha-lexicographic, weighted, hybrid), price-of-fairness metrics, a
blood-type random model with its closed-form analytics, adversarial graph
families and a batch experiment harness.
"""
from .enumeration import (
    ChainDiscount,
    ClearingConfig,
    ExchangeStructure,
    StructureKind,
    enumerate_chains,
    enumerate_cycles,
    enumerate_structures,
    structure_utility,
)
from .errors import (
    AssumptionViolation,
    ChainExplosion,
    ConfigError,
    FairclearError,
    InstanceError,
    MalformedInstance,
)
from .fairness import (
    ClassSpec,
    ClearingProblem,
    FairnessRule,
    HybridMode,
    PofReport,
    Region,
    RuleKind,
    fair_matching,
    percent_fair,
    pof,
    solve_alpha_lex,
    solve_fair_max,
    solve_hybrid,
    solve_utilitarian,
    solve_weighted,
    u_delta_multi,
    u_delta_two_class,
)
from .instance import (
    CompatibilityGraph,
    Edge,
    Vertex,
    VertexKind,
    build_graph,
    load_instance,
    parse_instance,
    partition,
    save_instance,
    serialize_instance,
)
from .solver import Matching, SideConstraint, SolveOutcome, brute_force_solve, solve_max

__version__ = "0.1.0"
