"""Instance generators, the seeded Monte-Carlo sweep engine and CSV output."""
from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .accuracy import (
    accuracy_inputs,
    chi_from_solution,
    concentration_check,
    hoffman_ratios,
    lambda_for,
    rho,
    robinson_residual,
    sub_optimality,
)
from .lp import (
    COMPONENTS,
    ConfigurationError,
    LinearProgram,
    PrivacyBudget,
    SensitivityProfile,
    check_feasible,
)
from .mdp import (
    GridworldConfig,
    build_gridworld,
    build_occupancy_lp,
    cmdp_profile,
    cost_of_privacy,
    policy_from_occupancy,
    value_of_policy,
)
from .privatizer import ORIGINAL_FEAS_TOL, PerturbedFeasibilityError, noise_scales, privatize_partial
from .solver import GeometryError, Status, diameter, diameter_upper_bound, solve
from .streams import INSTANCE, NOISE, stream

EXPERIMENTS = ("ad_eps", "ad_size", "budget", "cmdp")
CSV_HEADER = (
    "grid_param",
    "value",
    "mean_subopt_pct",
    "std_subopt_pct",
    "violations",
    "case_one_frac",
    "samples",
    "seed",
)
# components privatized by each named variant
VARIANTS = {
    "full": ("A", "b", "c"),
    "no_b": ("A", "c"),
    "b_only": ("b",),
}

AD_BUDGET = 1e7
AD_CAPACITY = 1e7
AD_ZERO_PROB = 0.2
AD_DELTA = 0.1


class InvariantViolation(RuntimeError):
    """A run that must preserve the original constraints did not."""


def gen_ad_instance(
    N: int,
    M: int,
    seed=None,
    *,
    delta11_A: float = AD_DELTA,
    delta1_b: float = AD_DELTA,
    delta1_c: float = AD_DELTA,
    b_inf=None,
) -> tuple[LinearProgram, SensitivityProfile]:
    """Revenue-maximizing assignment of page-group visits to advertisers.

    Variable ``x[i*M + j]`` is the number of visits from group ``i`` sold to
    advertiser ``j``. The first ``N`` rows cap visits per group and are
    public. The next ``M`` rows cap each advertiser's spending and are
    sensitive. ``seed`` may be an int or a ``numpy.random.Generator``.
    ``b_inf`` defaults to zero, the weakest valid lower bound.
    """
    if N < 1 or M < 1:
        raise ConfigurationError("N and M must be at least 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    u = rng.random((N, M))
    price = rng.random((N, M))
    p = np.where(u < AD_ZERO_PROB, 0.0, price)

    n = N * M
    A = np.zeros((N + M, n))
    for i in range(N):
        A[i, i * M : (i + 1) * M] = 1.0
    for j in range(M):
        A[N + j, j::M] = p[:, j]
    b = np.concatenate([np.full(N, AD_CAPACITY), np.full(M, AD_BUDGET)])

    mask_A = np.zeros(A.shape, dtype=bool)
    mask_A[N:] = A[N:] != 0
    A_sup = np.where(mask_A, 1.0, A)
    mask_b = np.concatenate([np.zeros(N, dtype=bool), np.ones(M, dtype=bool)])
    if b_inf is None:
        b_inf = np.where(mask_b, 0.0, b)
    lp = LinearProgram(c=p.reshape(-1), A=A, b=b)
    profile = SensitivityProfile(
        delta11_A=delta11_A,
        delta1_b=delta1_b,
        delta1_c=delta1_c,
        mask_A=mask_A,
        mask_c=p.reshape(-1) != 0,
        A_sup=A_sup,
        b_inf=np.asarray(b_inf, dtype=float),
        mask_b=mask_b,
    )
    return lp, profile


def ad_budget_floor(lp: LinearProgram, profile: SensitivityProfile, s_b: float, factor: float = 10.0):
    """``max(0, b - factor*s_b)`` on sensitive rows; public rows keep ``b``."""
    return np.where(profile.mask_b, np.maximum(0.0, lp.b - factor * s_b), lp.b)


@dataclass
class SweepConfig:
    experiment: str = "ad_eps"
    N: int = 10
    M: int = 5
    eps: float = 1.0
    delta: float = 0.1
    eps_values: Sequence[float] = (0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0)
    M_values: Sequence[int] = tuple(range(5, 101, 5))
    alpha_c_values: Sequence[float] = (1 / 3, 1 / 2, 3 / 4, 99 / 100)
    t_values: Sequence[float] = (0.1, 0.05)
    alphas: Optional[Sequence[float]] = None
    variant: str = "full"
    samples: int = 200
    seed: int = 0
    delta11_A: float = AD_DELTA
    delta1_b: float = AD_DELTA
    delta1_c: float = AD_DELTA
    b_inf_factor: float = 10.0
    redraw: str = "fresh"
    support_variant: str = "per_entry"
    shift_and_clamp: bool = True
    gridworld: dict = field(default_factory=dict)
    cmdp_delta11_A: float = 4 * 0.6 * 0.95
    cmdp_delta1_b: float = 0.1
    out: Optional[str] = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigurationError(f"experiment must be one of {EXPERIMENTS}")
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"variant must be one of {sorted(VARIANTS)}")
        if self.samples < 1:
            raise ConfigurationError("samples must be at least 1")
        if self.redraw not in ("fresh", "fixed"):
            raise ConfigurationError("redraw must be 'fresh' or 'fixed'")
        if any(not e > 0 for e in self.eps_values) or not self.eps > 0:
            raise ConfigurationError("eps values must be positive")
        if any(not 0 < a < 1 for a in self.alpha_c_values):
            raise ConfigurationError("alpha_c values must lie in (0, 1)")
        if self.experiment == "budget" and self.variant != "full":
            raise ConfigurationError("the budget sweep splits across all three components")

    @classmethod
    def from_dict(cls, d: dict) -> "SweepConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigurationError(f"unknown sweep keys {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d


@dataclass
class GridRow:
    grid_param: str
    value: float
    mean_subopt_pct: float
    std_subopt_pct: float
    violations: int
    case_one_frac: float
    samples: int
    seed: int
    wall_time: float = 0.0
    infeasible: int = 0

    def csv_fields(self) -> list:
        return [getattr(self, k) for k in CSV_HEADER]


def _budget_for(config: SweepConfig, eps: float, alpha_c: Optional[float] = None) -> PrivacyBudget:
    comps = VARIANTS[config.variant]
    if alpha_c is not None:
        rest = (1.0 - alpha_c) / 2.0
        return PrivacyBudget(eps, config.delta, rest, rest, alpha_c)
    if config.alphas is not None:
        return PrivacyBudget(eps, config.delta, *config.alphas)
    return PrivacyBudget.even(eps, config.delta, comps)


def _ad_trial(config: SweepConfig, N: int, M: int, budget: PrivacyBudget, inst_rng, noise_rng):
    """One EX1 trial: (sub-optimality percent, violated, case_one)."""
    comps = VARIANTS[config.variant]
    lp, profile = gen_ad_instance(
        N,
        M,
        inst_rng,
        delta11_A=config.delta11_A,
        delta1_b=config.delta1_b,
        delta1_c=config.delta1_c,
    )
    scales = noise_scales(lp, profile, budget, comps, config.support_variant)
    profile = profile.replace(b_inf=ad_budget_floor(lp, profile, scales.s_b, config.b_inf_factor))
    base = solve(lp)
    priv = privatize_partial(
        lp,
        profile,
        budget,
        comps,
        noise_rng,
        support_variant=config.support_variant,
        shift_and_clamp=config.shift_and_clamp,
    )
    res = solve(priv.lp)
    if res.status is not Status.OPTIMAL:
        return None, False, priv.case_one
    violated = not check_feasible(res.x, lp, ORIGINAL_FEAS_TOL)
    return 100.0 * sub_optimality(lp.c, base.x, res.x), violated, priv.case_one


def _cmdp_trial(config: SweepConfig, spec, lp, profile, v_opt, budget, noise_rng):
    comps = ("A", "b")
    priv = privatize_partial(lp, profile, budget, comps, noise_rng, shift_and_clamp=config.shift_and_clamp)
    res = solve(priv.lp)
    if res.status is not Status.OPTIMAL:
        return None, False, priv.case_one
    violated = not check_feasible(res.x, lp, ORIGINAL_FEAS_TOL)
    policy = policy_from_occupancy(res.x, spec.q)
    v = value_of_policy(spec, policy)
    return 100.0 * abs(cost_of_privacy(v, v_opt)), violated, priv.case_one


def _grid(config: SweepConfig) -> tuple[str, list]:
    if config.experiment in ("ad_eps", "cmdp"):
        return "eps", list(config.eps_values)
    if config.experiment == "ad_size":
        return "M", list(config.M_values)
    return "alpha_c", list(config.alpha_c_values)


def _summarize(name, value, results, config: SweepConfig, elapsed: float) -> GridRow:
    vals = np.array([r[0] for r in results if r[0] is not None])
    infeasible = sum(r[0] is None for r in results)
    std = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
    return GridRow(
        grid_param=name,
        value=float(value),
        mean_subopt_pct=float(vals.mean()) if vals.size else math.nan,
        std_subopt_pct=std,
        violations=int(sum(r[1] for r in results)),
        case_one_frac=float(np.mean([r[2] for r in results])),
        samples=len(results),
        seed=config.seed,
        wall_time=elapsed,
        infeasible=infeasible,
    )


def run_sweep(config: SweepConfig, progress=None) -> list[GridRow]:
    """Run every grid point; trial ``k`` at point ``g`` uses streams keyed ``(g, k)``."""
    name, values = _grid(config)
    rows = []
    cmdp_parts = None
    if config.experiment == "cmdp":
        spec = build_gridworld(GridworldConfig.from_dict(config.gridworld))
        lp = build_occupancy_lp(spec)
        base = solve(lp)
        if not base.optimal:
            raise GeometryError(f"gridworld program has no optimum ({base.status.value})")
        v_opt = value_of_policy(spec, policy_from_occupancy(base.x, spec.q))
        profile = cmdp_profile(spec, config.cmdp_delta11_A, config.cmdp_delta1_b)
        cmdp_parts = (spec, lp, profile, v_opt)

    for g, value in enumerate(values):
        start = time.perf_counter()
        results = []
        for k in range(config.samples):
            noise_rng = stream(config.seed, g, k, NOISE)
            if cmdp_parts is not None:
                budget = PrivacyBudget(value, config.delta, 0.99, 0.01, 0.0)
                if config.alphas is not None:
                    budget = PrivacyBudget(value, config.delta, *config.alphas)
                results.append(_cmdp_trial(config, *cmdp_parts, budget, noise_rng))
                continue
            inst_rng = stream(config.seed, g, 0 if config.redraw == "fixed" else k, INSTANCE)
            if config.experiment == "ad_eps":
                budget, N, M = _budget_for(config, value), config.N, config.M
            elif config.experiment == "ad_size":
                budget, N, M = _budget_for(config, config.eps), config.N, int(value)
            else:
                budget, N, M = _budget_for(config, config.eps, value), config.N, config.M
            results.append(_ad_trial(config, N, M, budget, inst_rng, noise_rng))
        row = _summarize(name, value, results, config, time.perf_counter() - start)
        rows.append(row)
        if progress is not None:
            progress(row)
    return rows


def _fmt(v) -> str:
    # repr keeps floats round-trippable and independent of locale
    if isinstance(v, float):
        return repr(v)
    return str(v)


def table_to_csv(table: Sequence[GridRow]) -> str:
    if not table:
        raise ValueError("table is empty")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for row in table:
        w.writerow([_fmt(v) for v in row.csv_fields()])
    return buf.getvalue()


def emit_csv(table: Sequence[GridRow], path) -> None:
    text = table_to_csv(table)
    with open(path, "w", encoding="ascii", newline="") as fh:
        fh.write(text)


def read_csv(path) -> list[GridRow]:
    with open(path, encoding="ascii", newline="") as fh:
        reader = csv.DictReader(fh)
        out = []
        for rec in reader:
            out.append(
                GridRow(
                    grid_param=rec["grid_param"],
                    value=float(rec["value"]),
                    mean_subopt_pct=float(rec["mean_subopt_pct"]),
                    std_subopt_pct=float(rec["std_subopt_pct"]),
                    violations=int(rec["violations"]),
                    case_one_frac=float(rec["case_one_frac"]),
                    samples=int(rec["samples"]),
                    seed=int(rec["seed"]),
                )
            )
        return out


def concentration_samples(
    lp: LinearProgram,
    profile: SensitivityProfile,
    budget: PrivacyBudget,
    trials: int,
    seed: int,
    components: Sequence[str] = COMPONENTS,
) -> np.ndarray:
    """Distances ``||x* - x~*||`` over fresh noise on a fixed instance."""
    base = solve(lp)
    R = np.empty(trials)
    for k in range(trials):
        priv = privatize_partial(lp, profile, budget, components, stream(seed, 0, k, NOISE))
        res = solve(priv.lp)
        if not res.optimal:
            raise PerturbedFeasibilityError("private program has no optimum")
        R[k] = np.linalg.norm(base.x - res.x)
    return R


def region_diameter(lp: LinearProgram, exact_limit: int = 200_000) -> tuple[float, bool]:
    """Exact diameter for small programs, else the bounding-box upper bound.

    The flag says whether the value is exact.
    """
    if math.comb(lp.m + lp.n, lp.n) <= exact_limit:
        return diameter(lp, exact_limit), True
    return diameter_upper_bound(lp), False


def accuracy_report(
    lp: LinearProgram,
    profile: SensitivityProfile,
    budget: PrivacyBudget,
    samples: int,
    seed: int,
    components: Sequence[str] = COMPONENTS,
    t: float = 0.05,
) -> dict:
    """Monte-Carlo summary of the accuracy quantities for one instance."""
    comps = tuple(components)
    base = solve(lp)
    if not base.optimal:
        raise GeometryError(f"original program has no optimum ({base.status.value})")
    chi = chi_from_solution(base.x)
    lam = lambda_for(lp, base)
    subs, R, resid, case_one = [], [], [], []
    for k in range(samples):
        priv = privatize_partial(lp, profile, budget, comps, stream(seed, 0, k, NOISE))
        res = solve(priv.lp)
        if res.status is Status.INFEASIBLE:
            raise PerturbedFeasibilityError("private program is infeasible")
        chi = max(chi, chi_from_solution(res.x))
        lam = max(lam, lambda_for(priv.lp, res))
        subs.append(sub_optimality(lp.c, base.x, res.x) if base.objective != 0 else 0.0)
        R.append(float(np.linalg.norm(base.x - res.x)))
        resid.append(robinson_residual(lp, priv, res))
        case_one.append(priv.case_one)
    scales = noise_scales(lp, profile, budget, comps)
    inputs = accuracy_inputs(profile, scales, chi, lam, comps)
    rho_one = rho(inputs, True)
    rho_two = rho(inputs, False, lp)
    frac = float(np.mean(case_one))
    ratios = hoffman_ratios(lp, profile, budget, samples, stream(seed, 1, 0, NOISE), comps, base)
    diam, exact = region_diameter(lp)
    if diam > 0:
        threshold, exceed = concentration_check(R, diam, t)
    else:
        threshold, exceed = 0.0, 0.0
    subs = np.array(subs)
    return {
        "rho": rho_one if frac >= 0.5 else rho_two,
        "rho_case_one": rho_one,
        "rho_case_two": rho_two,
        "case_one_fraction": frac,
        "empirical_subopt_mean": float(subs.mean()),
        "empirical_subopt_stderr": float(subs.std(ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0,
        "residual_mean": float(np.mean(resid)),
        "hoffman_lower_bound": float(ratios.max()) if ratios.size else None,
        "chi": chi,
        "lambda_cap": lam,
        "concentration": {"t": t, "threshold": threshold, "exceedance": exceed, "diameter_exact": exact},
    }
