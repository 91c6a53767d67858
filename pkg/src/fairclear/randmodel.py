"""Blood-type random compatibility graphs and the closed-form price of fairness
for the dense random model with non-directed donors.

The closed forms are written over numpy-broadcastable arguments so the same
expressions serve scalar classification and vectorized grid searches.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Mapping

import numpy as np

from .errors import AssumptionViolation
from .instance import DEFAULT_TAU, CompatibilityGraph, Edge, build_graph, ndd, pair

BLOOD_TYPES = ("O", "A", "B", "AB")
# donor type -> patient types it can give to
ABO_COMPATIBLE = {"O": ("O", "A", "B", "AB"), "A": ("A", "AB"), "B": ("B", "AB"), "AB": ("AB",)}
_ABO = np.array([[r in ABO_COMPATIBLE[d] for r in BLOOD_TYPES] for d in BLOOD_TYPES])

DEFAULT_MU = {"O": 0.4, "A": 0.3, "B": 0.2, "AB": 0.1}
SUM_TOL = 1e-9

# assumption labels reported by check_assumptions
A_SUM = "Σμ=1"
A_ORDER = "μ_O>μ_A>μ_B>μ_AB"
A_PBAR = "p̄<2/5"
A_LAMBDA = "p̄>1−λ"
A_PROB = "probabilities in [0,1]"
A_BETA = "β≥0"
A_SIZE = "n≥0"


@dataclass(frozen=True)
class ModelParams:
    mu: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_MU))
    p_bar: float = 0.3
    lam: float = 0.9
    beta: float = 0.0
    n: int = 100
    edge_prob_low: float = 0.7
    edge_prob_high: float = 0.1
    seed: int = 0
    tau: float = DEFAULT_TAU

    @classmethod
    def from_dict(cls, data: Mapping) -> "ModelParams":
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown model parameter {unknown[0]!r}")
        kw = dict(data)
        if "mu" in kw:
            kw["mu"] = {k: float(v) for k, v in kw["mu"].items()}
        return cls(**kw)

    def to_dict(self) -> dict:
        return {
            "mu": {t: self.mu[t] for t in BLOOD_TYPES},
            "p_bar": self.p_bar,
            "lam": self.lam,
            "beta": self.beta,
            "n": self.n,
            "edge_prob_low": self.edge_prob_low,
            "edge_prob_high": self.edge_prob_high,
            "seed": self.seed,
            "tau": self.tau,
        }

    def mu_vector(self) -> np.ndarray:
        return np.array([self.mu.get(t, math.nan) for t in BLOOD_TYPES], dtype=float)


def check_assumptions(params: ModelParams) -> list[str]:
    """Labels of the violated model assumptions; empty when all hold."""
    bad = []
    mu = params.mu_vector()
    if set(params.mu) != set(BLOOD_TYPES) or not abs(mu.sum() - 1.0) <= SUM_TOL:
        bad.append(A_SUM)
    o, a, b, ab = mu
    if not (o > a > b > ab):
        bad.append(A_ORDER)
    if not params.p_bar < 0.4:
        bad.append(A_PBAR)
    if not params.p_bar > 1.0 - params.lam:
        bad.append(A_LAMBDA)
    probs = [*mu, params.p_bar, params.lam, params.edge_prob_low, params.edge_prob_high]
    if not all(0.0 <= x <= 1.0 for x in probs):
        bad.append(A_PROB)
    if not params.beta >= 0:
        bad.append(A_BETA)
    if params.n < 0:
        bad.append(A_SIZE)
    return bad


def _require(params: ModelParams) -> None:
    bad = check_assumptions(params)
    if bad:
        raise AssumptionViolation(bad)


# --- sampling -----------------------------------------------------------------


@dataclass(frozen=True)
class Pool:
    """Realized random pool before edges are drawn.

    candidate_* arrays cover all n sampled candidates (type indices into
    BLOOD_TYPES); the remaining arrays cover pooled pairs and NDDs only.
    """

    candidate_patient: np.ndarray
    candidate_donor: np.ndarray
    patient: np.ndarray
    donor: np.ndarray
    high: np.ndarray
    cpra: np.ndarray
    ndd_donor: np.ndarray

    @property
    def num_pairs(self) -> int:
        return len(self.patient)

    @property
    def num_ndds(self) -> int:
        return len(self.ndd_donor)


def sample_pool(params: ModelParams, rng: np.random.Generator | None = None) -> Pool:
    _require(params)
    if rng is None:
        rng = np.random.default_rng(params.seed)
    mu = params.mu_vector()
    n = params.n
    patient = rng.choice(4, size=n, p=mu)
    donor = rng.choice(4, size=n, p=mu)
    enter = rng.random(n)
    high_draw = rng.random(n)
    cpra_draw = rng.random(n)

    # blood-compatible pairs are here only because of a failed crossmatch
    keep = ~_ABO[donor, patient] | (enter < params.p_bar)
    high = high_draw[keep] < 1.0 - params.lam
    tau = params.tau
    cpra = np.where(high, tau + cpra_draw[keep] * (100.0 - tau), cpra_draw[keep] * tau)
    n_pool = int(keep.sum())
    n_ndd = math.floor(params.beta * n_pool)
    ndd_donor = rng.choice(4, size=n_ndd, p=mu)
    return Pool(patient, donor, patient[keep], donor[keep], high, cpra, ndd_donor)


def sample_graph(params: ModelParams) -> CompatibilityGraph:
    """Seeded draw of a compatibility graph: pairs first, then NDDs, unit weights."""
    rng = np.random.default_rng(params.seed)
    pool = sample_pool(params, rng)
    n_pairs, n_ndd = pool.num_pairs, pool.num_ndds
    vertices = [pair(i, float(pool.cpra[i])) for i in range(n_pairs)]
    vertices += [ndd(n_pairs + j) for j in range(n_ndd)]

    src_type = np.concatenate([pool.donor, pool.ndd_donor])
    compat = _ABO[src_type[:, None], pool.patient[None, :]]
    prob = np.where(pool.high, params.edge_prob_high, params.edge_prob_low)
    draw = rng.random((n_pairs + n_ndd, n_pairs))
    present = compat & (draw < prob[None, :])
    present[np.arange(n_pairs), np.arange(n_pairs)] = False
    src, dst = np.nonzero(present)
    edges = [Edge(int(s), int(d)) for s, d in zip(src, dst)]
    return build_graph(vertices, edges, params.tau)


# --- closed forms -----------------------------------------------------------------


def u_e0(o, a, b, ab, p):
    """Efficient utility (per pair, asymptotically) without NDDs."""
    return p * (2 * ab * b + 2 * ab * a + 3 * ab * o + 2 * a * o + 2 * b * o + o * o + a * a + b * b + ab * ab) + 2 * a * b


def u_e_a(o, a, b, ab, p, beta):
    return u_e0(o, a, b, ab, p) + beta * (a + b + 2 * o)


def u_e_b(o, a, b, ab, p, beta):
    return (
        ab * b
        + a * (ab + 2 * b)
        + beta * o
        + p * (a * a + a * ab + ab * ab + ab * b + b * b + 2 * (a + ab + b) * o + o * o)
    )


def pof_0_formula(o, a, b, ab, p, lam):
    return (1 - lam) * o * ab / u_e0(o, a, b, ab, p)


def pof_a_formula(o, a, b, ab, p, lam, beta):
    return (1 - lam) * o * ab / u_e_a(o, a, b, ab, p, beta)


def pof_b_formula(o, a, b, ab, p, lam, beta):
    return ((1 - ab) * ((1 - p) * ab - beta) - lam * ab * o) / u_e_b(o, a, b, ab, p, beta)


def pof_no_ndds(params: ModelParams) -> float:
    _require(params)
    o, a, b, ab = params.mu_vector()
    return float(pof_0_formula(o, a, b, ab, params.p_bar, params.lam))


class Regime(str, Enum):
    LARGE_BETA = "LargeBeta"
    SMALL_BETA = "SmallBeta"
    MID_BETA_11 = "MidBeta11"
    MID_BETA_13 = "MidBeta13"
    MID_BETA_3 = "MidBeta3"
    UNCLASSIFIED = "Unclassified"


@dataclass(frozen=True)
class RegimeConstraint:
    name: str
    sense: str  # "<" or ">": beta compared against bound
    bound: Callable  # (o, a, b, ab, p, lam) -> threshold on beta

    def holds(self, o, a, b, ab, p, lam, beta):
        t = self.bound(o, a, b, ab, p, lam)
        return beta < t if self.sense == "<" else beta > t


def _c(name, sense, bound):
    return RegimeConstraint(name, sense, bound)


# shared thresholds
def _t_ab_over_a(o, a, b, ab, p, lam):
    return ab * (1 - p) - ab * o * p / a


def _t_ab_over_ab_sum(o, a, b, ab, p, lam):
    return ab * (1 - p) - ab * o * p / (a + b)


def _t_loose(o, a, b, ab, p, lam):
    return ab * (1 - p) - p * ab * o / a + (1 - p) * b * o / a


def _t_lam(o, a, b, ab, p, lam):
    return ab * (1 - p) - lam * o * ab / (1 - ab)


# constraint sets in precedence order; names are regime + index
REGIME_CONSTRAINTS: dict[Regime, tuple[RegimeConstraint, ...]] = {
    Regime.LARGE_BETA: (_c("LargeBeta.1", ">", lambda o, a, b, ab, p, lam: (1 - p) * ab),),
    Regime.SMALL_BETA: (
        _c("SmallBeta.1", "<", lambda o, a, b, ab, p, lam: a * (1 - p) - p * ab),
        _c("SmallBeta.2", "<", _t_ab_over_a),
        _c("SmallBeta.3", "<", lambda o, a, b, ab, p, lam: ab * (a / (a + o) - p)),
    ),
    Regime.MID_BETA_11: (
        _c("MidBeta11.1", "<", _t_ab_over_ab_sum),
        _c("MidBeta11.2", "<", lambda o, a, b, ab, p, lam: (a * ab * (1 - p) + b * o * (1 - p) - p * o * ab) / (a + o)),
        _c("MidBeta11.3", ">", _t_ab_over_a),
        _c("MidBeta11.4", "<", _t_loose),
        _c("MidBeta11.5", "<", lambda o, a, b, ab, p, lam: ab * (1 - p) - o * ab / (1 - ab)),
    ),
    Regime.MID_BETA_13: (
        _c("MidBeta13.1", ">", _t_ab_over_a),
        _c("MidBeta13.2", "<", _t_ab_over_ab_sum),
        _c("MidBeta13.3", "<", _t_loose),
        _c("MidBeta13.4", ">", lambda o, a, b, ab, p, lam: ab * ((1 - p) - o / (1 - ab))),
        _c("MidBeta13.5", "<", _t_lam),
    ),
    Regime.MID_BETA_3: (
        _c("MidBeta3.1", ">", _t_ab_over_ab_sum),
        _c("MidBeta3.2", "<", _t_lam),
    ),
}

# upper bounds on beta implied by each nonzero-PoF regime's constraints
REGIME_BETA_CEILING = {
    Regime.SMALL_BETA: 1 / 8,
    Regime.MID_BETA_11: 1 / 12,
    Regime.MID_BETA_13: 1 / 8,
    Regime.MID_BETA_3: 1 / 10,
}

# which closed form prices each regime
_USES_A = (Regime.SMALL_BETA, Regime.MID_BETA_11)
_USES_B = (Regime.MID_BETA_13, Regime.MID_BETA_3)


@dataclass(frozen=True)
class RegimeResult:
    regime: Regime
    pof: float | None  # None when unclassified
    u_E: float | None  # None for LargeBeta (no closed form) and unclassified
    matched: tuple[Regime, ...] = ()
    violated: tuple[str, ...] = ()

    @property
    def overlaps(self) -> tuple[Regime, ...]:
        """Regimes whose constraints also held but lost on precedence."""
        return self.matched[1:]


def regime_masks(o, a, b, ab, p, lam, beta) -> dict[Regime, np.ndarray]:
    """Per regime, whether every one of its constraints holds (broadcast over the inputs)."""
    out = {}
    for regime, cons in REGIME_CONSTRAINTS.items():
        ok = np.ones(np.broadcast(o, a, b, ab, p, lam, beta).shape, dtype=bool)
        for c in cons:
            ok &= c.holds(o, a, b, ab, p, lam, beta)
        out[regime] = ok
    return out


def classify_regime(params: ModelParams) -> RegimeResult:
    _require(params)
    o, a, b, ab = (float(x) for x in params.mu_vector())
    p, lam, beta = params.p_bar, params.lam, params.beta
    matched = []
    violated = []
    for regime, cons in REGIME_CONSTRAINTS.items():
        failing = [c.name for c in cons if not c.holds(o, a, b, ab, p, lam, beta)]
        violated += failing
        if not failing:
            matched.append(regime)
    if not matched:
        return RegimeResult(Regime.UNCLASSIFIED, None, None, (), tuple(violated))
    regime = matched[0]
    if regime is Regime.LARGE_BETA:
        pof, u = 0.0, None
    elif regime in _USES_A:
        pof, u = pof_a_formula(o, a, b, ab, p, lam, beta), u_e_a(o, a, b, ab, p, beta)
    else:
        pof, u = pof_b_formula(o, a, b, ab, p, lam, beta), u_e_b(o, a, b, ab, p, beta)
    return RegimeResult(regime, float(pof), None if u is None else float(u), tuple(matched), tuple(violated))


# --- parameter grids --------------------------------------------------------------


@dataclass(frozen=True)
class ParamGrid:
    """Flat arrays of model parameters; every point satisfies the model assumptions."""

    o: np.ndarray
    a: np.ndarray
    b: np.ndarray
    ab: np.ndarray
    p: np.ndarray
    lam: np.ndarray
    beta: np.ndarray

    def __len__(self) -> int:
        return len(self.o)

    def point(self, i: int) -> dict:
        return {
            "mu": {"O": float(self.o[i]), "A": float(self.a[i]), "B": float(self.b[i]), "AB": float(self.ab[i])},
            "p_bar": float(self.p[i]),
            "lam": float(self.lam[i]),
            "beta": float(self.beta[i]),
        }


def parameter_grid(
    resolution: int = 20,
    betas=(0.0,),
    o_bound: bool = True,
    p_steps: int | None = None,
    lam_steps: int | None = None,
) -> ParamGrid:
    """Grid over (μ, p̄, λ, β) restricted to the model assumptions.

    μ runs over the simplex in steps of 1/resolution with strict ordering,
    p̄ over (0, 2/5) in p_steps steps and 1−λ over [0, p̄) in lam_steps steps
    (both default to resolution). With o_bound the grid also keeps
    μ_O < 3μ_A/2, the extra condition under which the no-NDD bound of 2/33
    holds.
    """
    if resolution < 2:
        raise ValueError(f"resolution must be at least 2, got {resolution}")
    p_steps = resolution if p_steps is None else p_steps
    lam_steps = resolution if lam_steps is None else lam_steps
    step = np.arange(1, resolution) / resolution
    mus = []
    for o in step:
        for a in step:
            for b in step:
                ab = 1.0 - o - a - b
                if o > a > b > ab > 1e-12 and (not o_bound or o < 1.5 * a):
                    mus.append((o, a, b, ab))
    mus = np.array(mus, dtype=float).reshape(-1, 4)
    ps = 0.4 * np.arange(1, p_steps) / p_steps
    frac = np.arange(lam_steps) / lam_steps  # (1 - λ) / p̄
    betas = np.asarray(betas, dtype=float)

    mi, pi, fi, bi = np.meshgrid(
        np.arange(len(mus)), np.arange(len(ps)), np.arange(len(frac)), np.arange(len(betas)), indexing="ij"
    )
    mi, pi, fi, bi = (x.ravel() for x in (mi, pi, fi, bi))
    p = ps[pi]
    return ParamGrid(
        mus[mi, 0], mus[mi, 1], mus[mi, 2], mus[mi, 3], p, 1.0 - frac[fi] * p, betas[bi]
    )


def classified_pof(grid: ParamGrid, pof_a=pof_a_formula, pof_b=pof_b_formula) -> tuple[np.ndarray, np.ndarray]:
    """(regime codes, pof) per grid point; code -1 and pof NaN mean unclassified.

    Codes index into list(REGIME_CONSTRAINTS).
    """
    args = (grid.o, grid.a, grid.b, grid.ab, grid.p, grid.lam, grid.beta)
    masks = regime_masks(*args)
    code = np.full(len(grid), -1)
    for i, regime in reversed(list(enumerate(REGIME_CONSTRAINTS))):
        code[masks[regime]] = i
    with np.errstate(divide="ignore", invalid="ignore"):
        va = pof_a(*args)
        vb = pof_b(*args)
    regimes = list(REGIME_CONSTRAINTS)
    value = np.full(len(grid), np.nan)
    value[code == regimes.index(Regime.LARGE_BETA)] = 0.0
    for r in _USES_A:
        sel = code == regimes.index(r)
        value[sel] = va[sel]
    for r in _USES_B:
        sel = code == regimes.index(r)
        value[sel] = vb[sel]
    return code, value


def max_pof_over_params(beta: float, grid_resolution: int = 40, o_bound: bool = True) -> float:
    """Largest classified PoF over a parameter grid at fixed β.

    A grid search, so the result is a lower bound on the supremum.
    Unclassified points are skipped; 0 when nothing is classified.
    """
    grid = parameter_grid(grid_resolution, (beta,), o_bound)
    _, value = classified_pof(grid)
    value = value[~np.isnan(value)]
    return float(value.max()) if value.size else 0.0


# --- lemma checks -----------------------------------------------------------------


@dataclass
class LemmaReport:
    passed: bool
    points: int
    counts: dict = field(default_factory=dict)  # regime name -> classified points
    counterexamples: list = field(default_factory=list)  # (check, point dict)

    def summary(self) -> str:
        state = "pass" if self.passed else "FAIL"
        return f"{state}: {self.points} points, {len(self.counterexamples)} counterexamples, regimes {self.counts}"


def default_lemma_grid() -> ParamGrid:
    # 57 blood-type mixes x 8 x 4 x 16 betas: about 2.9 * 10^4 points
    betas = np.round(np.arange(16) * 0.01, 6)
    return parameter_grid(24, betas, o_bound=False, p_steps=9, lam_steps=4)


def lemma_bound_checks(
    grid: ParamGrid | None = None,
    pof_a=pof_a_formula,
    pof_b=pof_b_formula,
    max_examples: int = 20,
) -> LemmaReport:
    """Check that NDDs never raise the PoF above the no-NDD value and that each
    nonzero-PoF regime respects its β ceiling.

    pof_a / pof_b can be swapped for mutated formulas to test the checker.
    """
    if grid is None:
        grid = default_lemma_grid()
    args = (grid.o, grid.a, grid.b, grid.ab, grid.p, grid.lam, grid.beta)
    masks = regime_masks(*args)
    regimes = list(REGIME_CONSTRAINTS)
    code = np.full(len(grid), -1)
    for i, regime in reversed(list(enumerate(regimes))):
        code[masks[regime]] = i
    with np.errstate(divide="ignore", invalid="ignore"):
        p0 = pof_0_formula(*args[:6])
        va = pof_a(*args)
        vb = pof_b(*args)

    report = LemmaReport(True, len(grid))
    for i, r in enumerate(regimes):
        report.counts[r.value] = int((code == i).sum())

    def fail(check, bad):
        idx = np.nonzero(bad)[0]
        if idx.size:
            report.passed = False
            report.counterexamples += [(check, grid.point(int(j))) for j in idx[: max_examples]]

    # lemma bounds hold wherever the regime's constraints hold, not only where it wins
    sel_a = masks[Regime.SMALL_BETA] | masks[Regime.MID_BETA_11]
    sel_b = masks[Regime.MID_BETA_13] | masks[Regime.MID_BETA_3]
    fail("POF_A<=POF_0", sel_a & ~(va <= p0 + 1e-12))
    fail("POF_B<=POF_0", sel_b & ~(vb <= p0 + 1e-12))
    for r, ceiling in REGIME_BETA_CEILING.items():
        fail(f"{r.value}:beta<{ceiling:.6g}", masks[r] & ~(grid.beta < ceiling + 1e-12))
    return report


# --- reports ------------------------------------------------------------------------

REGIME_CSV_FIELDS = ("beta", "regime", "pof", "u_E", "violated_constraints", "overlaps")


def regime_row(params: ModelParams) -> dict:
    r = classify_regime(params)
    return {
        "beta": params.beta,
        "regime": r.regime.value,
        "pof": "" if r.pof is None else repr(r.pof),
        "u_E": "" if r.u_E is None else repr(r.u_E),
        "violated_constraints": ";".join(r.violated),
        "overlaps": ";".join(x.value for x in r.overlaps),
    }


@dataclass(frozen=True)
class SimulatedPof:
    params: ModelParams
    analytic: RegimeResult
    u_efficient: float
    u_fair: float
    pof: float


def simulate_pof(params: ModelParams, cycle_cap: int = 3, chain_cap: int = 3) -> SimulatedPof:
    """Empirical PoF of one sampled graph: efficient vs. lexicographic (α=1) solve at p=1."""
    from .enumeration import ClearingConfig
    from .fairness import ClearingProblem, FairnessRule

    graph = sample_graph(params)
    problem = ClearingProblem(graph, ClearingConfig(cycle_cap, chain_cap, 1.0))
    _, report = problem.evaluate(FairnessRule.alpha_lex(1.0))
    return SimulatedPof(params, classify_regime(params), report.u_efficient, report.u_fair, report.pof)
