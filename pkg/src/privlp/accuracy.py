"""Accuracy quantities for privately solved programs.

The expected-residual bound ``rho`` comes in two forms. The first applies when
no clamp fired (every perturbed entry is the shifted noisy value). The second
applies otherwise and uses the envelope ``A_sup``/``b_inf``. Around it sit the
primal/dual magnitude constants, the perturbation residual, an empirical
Hoffman-constant lower bound, sub-optimality and a Hoeffding check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .lp import ContractError, LinearProgram, PrivacyBudget, SensitivityProfile
from .privatizer import NoiseScales, PrivatizedProgram, privatize_partial
from .solver import GeometryError, SolveResult, Status, slater_point, solve


@dataclass(frozen=True, eq=False)
class AccuracyInputs:
    chi: float
    lambda_cap: float
    row_nnz: np.ndarray
    col_nnz: np.ndarray
    n0c: int
    s_A: float
    s_b: float
    sigma_A: float
    sigma_b: float
    sigma_c: float
    A_sup: np.ndarray
    b_inf: np.ndarray

    def __post_init__(self):
        if self.chi < 0 or self.lambda_cap < 0:
            raise ContractError("chi and lambda_cap must be nonnegative")
        if int(np.sum(self.row_nnz)) != int(np.sum(self.col_nnz)):
            raise ContractError("row and column nonzero counts disagree")


@dataclass(frozen=True)
class AccuracyReport:
    rho: float
    case_one: bool
    bound: float
    empirical_subopt: float
    residual_norm: float


def accuracy_inputs(
    profile: SensitivityProfile,
    scales: NoiseScales,
    chi: float,
    lambda_cap: float,
    components: Iterable[str] = ("A", "b", "c"),
) -> AccuracyInputs:
    """Collect the counts and scales; omitted components contribute nothing."""
    comps = set(components)
    mask_A = profile.mask_A if "A" in comps else np.zeros_like(profile.mask_A)
    n0c = int(profile.mask_c.sum()) if "c" in comps else 0
    return AccuracyInputs(
        chi=float(chi),
        lambda_cap=float(lambda_cap),
        row_nnz=mask_A.sum(axis=1),
        col_nnz=mask_A.sum(axis=0),
        n0c=n0c,
        s_A=scales.s_A,
        s_b=scales.s_b,
        sigma_A=scales.sigma_A,
        sigma_b=scales.sigma_b,
        sigma_c=scales.sigma_c,
        A_sup=profile.A_sup,
        b_inf=profile.b_inf,
    )


def chi_from_solution(x_star) -> float:
    x = np.asarray(x_star, dtype=float)
    return float(x.max()) if x.size else 0.0


def lambda_bound(lp: LinearProgram, eta, omega) -> float:
    """Bound on ``||mu||_1`` for the multipliers of ``lp``.

    ``eta`` is an optimal point and ``omega`` a strictly interior one; the
    denominator is the smallest slack of ``omega``.
    """
    eta = np.asarray(eta, dtype=float)
    omega = np.asarray(omega, dtype=float)
    if lp.m == 0:
        return 0.0
    margin = float(np.min(lp.b - lp.A @ omega))
    if not margin > 0:
        raise GeometryError(f"omega is not strictly feasible (smallest slack {margin})")
    return max(0.0, float(lp.c @ eta - lp.c @ omega) / margin)


def lambda_for(lp: LinearProgram, result: Optional[SolveResult] = None) -> float:
    """``lambda_bound`` with the program's own optimum and Slater point."""
    if result is None:
        result = solve(lp)
    if not result.optimal:
        raise GeometryError(f"program has no optimum ({result.status.value})")
    omega, margin = slater_point(lp)
    if not margin > 0:
        raise GeometryError("program has no strictly feasible point")
    return lambda_bound(lp, result.x, omega)


def rho(
    inputs: AccuracyInputs,
    case_one: bool,
    lp: Optional[LinearProgram] = None,
) -> float:
    """Expected-residual bound for one privatization.

    The first form needs no instance data. The second needs the original
    program ``lp`` to measure its distance to the envelope.
    """
    chi, lam = inputs.chi, inputs.lambda_cap
    sA2, sb2, sc2 = inputs.sigma_A**2, inputs.sigma_b**2, inputs.sigma_c**2
    s_A, s_b = inputs.s_A, inputs.s_b
    if case_one:
        m = len(inputs.row_nnz)
        rows = np.asarray(inputs.row_nnz, dtype=float)
        cols = np.asarray(inputs.col_nnz, dtype=float)
        total = (
            2 * m * sb2
            + m * s_b**2
            + 2 * s_b * chi * float(np.sum(rows * s_A))
            + lam**2 * (2 * sb2 + s_b**2)
            + chi**2 * float(np.sum(2 * rows * sA2 + (rows * s_A) ** 2))
            + 2 * inputs.n0c * sc2
            + m * lam**2 * float(np.sum(2 * cols * sA2 + (cols * s_A) ** 2))
            + 2 * chi**2 * inputs.n0c * sc2
        )
        return math.sqrt(total)
    if lp is None:
        raise ContractError("the clamped form needs the original program")
    m, n = lp.A.shape
    gap_A = np.linalg.norm(lp.A - inputs.A_sup)  # Frobenius; same for the transpose
    gap_b = np.linalg.norm(lp.b - inputs.b_inf)
    sig_c = inputs.sigma_c
    first = np.linalg.norm([math.sqrt(n) * gap_A * chi, math.sqrt(m) * gap_A * lam, 2 * math.sqrt(n) * sig_c * chi])
    second = np.linalg.norm([gap_b, 2 * sig_c, math.sqrt(m) * gap_b * lam])
    return float(first + second)


def _neg(v):
    return np.minimum(v, 0.0)


def _pos(v):
    return np.maximum(v, 0.0)


def robinson_residual(lp: LinearProgram, priv: PrivatizedProgram, tilde_result: SolveResult) -> float:
    """Norm of the perturbation residual evaluated at the private primal/dual pair."""
    if tilde_result.x is None or tilde_result.mu is None:
        raise ContractError("the private solve carries no primal/dual pair")
    x, mu = tilde_result.x, tilde_result.mu
    dA = lp.A - priv.lp.A
    db = lp.b - priv.lp.b
    dc = lp.c - priv.lp.c
    parts = [
        _neg(dA @ x - db),
        _pos(dA.T @ mu - dc),
        np.array([dc @ x - db @ mu]),
    ]
    return float(np.linalg.norm(np.concatenate(parts)))


def primal_dual_distance(base: SolveResult, private: SolveResult) -> float:
    return float(np.linalg.norm(np.concatenate([base.x - private.x, base.mu - private.mu])))


def hoffman_ratios(
    lp: LinearProgram,
    profile: SensitivityProfile,
    budget: PrivacyBudget,
    trials: int,
    rng: np.random.Generator,
    components: Iterable[str] = ("A", "b", "c"),
    base: Optional[SolveResult] = None,
) -> np.ndarray:
    """Distance/residual ratio for every non-degenerate trial."""
    if trials < 1:
        raise ContractError("trials must be at least 1")
    if base is None:
        base = solve(lp)
    if not base.optimal:
        raise GeometryError("original program has no optimum")
    comps = tuple(components)
    out = []
    for child in rng.spawn(trials):
        priv = privatize_partial(lp, profile, budget, comps, child)
        res = solve(priv.lp)
        if not res.optimal:
            continue
        r = robinson_residual(lp, priv, res)
        if r < 1e-12:
            continue
        out.append(primal_dual_distance(base, res) / r)
    return np.array(out)


def hoffman_empirical(
    lp: LinearProgram,
    profile: SensitivityProfile,
    budget: PrivacyBudget,
    trials: int,
    rng: np.random.Generator,
    components: Iterable[str] = ("A", "b", "c"),
) -> float:
    """Largest observed ratio; a lower bound on the Hoffman constant."""
    ratios = hoffman_ratios(lp, profile, budget, trials, rng, components)
    if ratios.size == 0:
        raise ContractError("every trial had a vanishing residual; no estimate possible")
    return float(ratios.max())


def sub_optimality(c, x_star, x_tilde) -> float:
    c = np.asarray(c, dtype=float)
    best = float(c @ np.asarray(x_star, dtype=float))
    if best == 0:
        raise ContractError("optimal value is zero; relative sub-optimality undefined")
    return (best - float(c @ np.asarray(x_tilde, dtype=float))) / best


def concentration_check(R_samples: Sequence[float], diam: float, t: float) -> tuple[float, float]:
    """Hoeffding threshold for ``R in [0, diam]`` and the observed exceedance rate.

    ``t = 1`` is accepted and gives a zero threshold.
    """
    R = np.asarray(R_samples, dtype=float)
    if R.size == 0:
        raise ContractError("no samples")
    if not 0 < t <= 1:
        raise ContractError("t must lie in (0, 1]")
    if not diam > 0:
        raise ContractError("diam must be positive")
    threshold = diam * math.sqrt(math.log(1.0 / t) / 2.0)
    exceed = float(np.mean(R - R.mean() >= threshold))
    return threshold, exceed
