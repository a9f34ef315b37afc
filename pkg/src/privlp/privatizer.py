"""Feasibility-preserving privatization of ``(A, b, c)`` and private solving."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .lp import (
    COMPONENTS,
    ConfigurationError,
    ContractError,
    LinearProgram,
    PrivacyBudget,
    SensitivityProfile,
    check_feasible,
    validate_profile,
)
from .mechanisms import Laplace, TruncatedLaplace, support_A, support_b
from .solver import SolveResult, Status, solve

ORIGINAL_FEAS_TOL = 1e-7


class PerturbedFeasibilityError(RuntimeError):
    """The privatized program is infeasible: the supplied ``A_sup``/``b_inf``
    envelope admits no point common to all database realizations."""


class FeasibilityViolation(RuntimeError):
    """A private solution broke an original constraint."""


@dataclass(frozen=True)
class NoiseScales:
    sigma_A: float = 0.0
    sigma_b: float = 0.0
    sigma_c: float = 0.0
    s_A: float = 0.0
    s_b: float = 0.0


@dataclass(frozen=True, eq=False)
class PrivatizedProgram:
    lp: LinearProgram
    noise_A: np.ndarray
    noise_b: np.ndarray
    noise_c: np.ndarray
    clamped_A: np.ndarray
    clamped_b: np.ndarray
    scales: NoiseScales
    components: frozenset = field(default_factory=frozenset)
    shifted: bool = True

    @property
    def case_one(self) -> bool:
        """No clamp fired anywhere."""
        return not (self.clamped_A.any() or self.clamped_b.any())

    def to_dict(self) -> dict:
        d = self.lp.to_dict()
        sc = self.scales
        d.update(
            noise_A=self.noise_A.tolist(),
            noise_b=self.noise_b.tolist(),
            noise_c=self.noise_c.tolist(),
            clamped_A=self.clamped_A.astype(int).tolist(),
            clamped_b=self.clamped_b.astype(int).tolist(),
            case_one=self.case_one,
            s_A=sc.s_A,
            s_b=sc.s_b,
            sigma_A=sc.sigma_A,
            sigma_b=sc.sigma_b,
            sigma_c=sc.sigma_c,
            components=sorted(self.components),
        )
        return d


def noise_scales(
    lp: LinearProgram,
    profile: SensitivityProfile,
    budget: PrivacyBudget,
    components: Iterable[str] = COMPONENTS,
    support_variant: str = "per_entry",
) -> NoiseScales:
    """Scales ``Delta/(alpha eps)`` and supports at ``(alpha eps, alpha delta)``.

    Components that are not run get zero scale and support.
    """
    comps = set(components)
    vals = {}
    if "A" in comps:
        eps_A, delta_A = budget.share("A")
        vals["sigma_A"] = profile.delta11_A / eps_A
        vals["s_A"] = support_A(profile.delta11_A, eps_A, delta_A, lp.m, lp.n, support_variant)
    if "b" in comps:
        eps_b, delta_b = budget.share("b")
        vals["sigma_b"] = profile.delta1_b / eps_b
        vals["s_b"] = support_b(profile.delta1_b, eps_b, delta_b, lp.m, support_variant)
    if "c" in comps:
        eps_c, _ = budget.share("c")
        vals["sigma_c"] = profile.delta1_c / eps_c
    return NoiseScales(**vals)


def _check_components(budget: PrivacyBudget, components: frozenset) -> None:
    unknown = components - set(COMPONENTS)
    if unknown:
        raise ConfigurationError(f"unknown components {sorted(unknown)}")
    if not components:
        # nothing runs, so no budget is spent
        return
    for k in COMPONENTS:
        a = budget.alpha(k)
        if k in components and a <= 0:
            raise ConfigurationError(f"component {k} is privatized but alpha_{k} = 0")
        if k not in components and a != 0:
            raise ConfigurationError(f"component {k} is not privatized but alpha_{k} = {a}")


def privatize_partial(
    lp: LinearProgram,
    profile: SensitivityProfile,
    budget: PrivacyBudget,
    components: Iterable[str],
    rng: np.random.Generator,
    *,
    support_variant: str = "per_entry",
    shift_and_clamp: bool = True,
) -> PrivatizedProgram:
    """Run the mechanisms for the selected components only.

    The generator is split into three child streams (A, b, c) so the noise of
    one component never depends on which others ran. Noise is drawn for every
    entry in row-major order and then masked. ``shift_and_clamp=False`` drops
    the one-sided shift and the envelope clamps; it exists only to show that
    feasibility is lost without them.
    """
    comps = frozenset(components)
    _check_components(budget, comps)
    problems = validate_profile(lp, profile, public_nonzero=True)
    if problems:
        raise ContractError("invalid sensitivity profile: " + "; ".join(problems))
    scales = noise_scales(lp, profile, budget, comps, support_variant)
    rng_A, rng_b, rng_c = rng.spawn(3)
    m, n = lp.A.shape

    A_t = lp.A.copy()
    Z = np.zeros((m, n))
    clamped_A = np.zeros((m, n), dtype=bool)
    if "A" in comps and scales.sigma_A > 0:
        draw = TruncatedLaplace(scales.sigma_A, scales.s_A).sample(rng_A, (m, n))
        Z = np.where(profile.mask_A, draw, 0.0)
        shift = scales.s_A if shift_and_clamp else 0.0
        A_bar = lp.A + np.where(profile.mask_A, shift + draw, 0.0)
        if shift_and_clamp:
            clamped_A = profile.mask_A & (A_bar > profile.A_sup)
            A_t = np.where(clamped_A, profile.A_sup, A_bar)
        else:
            A_t = A_bar

    b_t = lp.b.copy()
    z_b = np.zeros(m)
    clamped_b = np.zeros(m, dtype=bool)
    if "b" in comps and scales.sigma_b > 0:
        draw = TruncatedLaplace(scales.sigma_b, scales.s_b).sample(rng_b, m)
        z_b = np.where(profile.mask_b, draw, 0.0)
        shift = scales.s_b if shift_and_clamp else 0.0
        b_bar = lp.b + np.where(profile.mask_b, draw - shift, 0.0)
        if shift_and_clamp:
            clamped_b = profile.mask_b & (b_bar < profile.b_inf)
            b_t = np.where(clamped_b, profile.b_inf, b_bar)
        else:
            b_t = b_bar

    c_t = lp.c.copy()
    z_c = np.zeros(n)
    if "c" in comps and scales.sigma_c > 0:
        draw = Laplace(scales.sigma_c).sample(rng_c, n)
        z_c = np.where(profile.mask_c, draw, 0.0)
        c_t = lp.c + z_c

    private = lp.replace(c=c_t, A=A_t, b=b_t)
    return PrivatizedProgram(
        lp=private,
        noise_A=Z,
        noise_b=z_b,
        noise_c=z_c,
        clamped_A=clamped_A,
        clamped_b=clamped_b,
        scales=scales,
        components=comps,
        shifted=shift_and_clamp,
    )


def privatize(
    lp: LinearProgram,
    profile: SensitivityProfile,
    budget: PrivacyBudget,
    rng: np.random.Generator,
    **kwargs,
) -> PrivatizedProgram:
    """Privatize all of ``A``, ``b`` and ``c``."""
    return privatize_partial(lp, profile, budget, COMPONENTS, rng, **kwargs)


def solve_private(
    lp: LinearProgram,
    profile: SensitivityProfile,
    budget: PrivacyBudget,
    rng: np.random.Generator,
    components: Optional[Iterable[str]] = None,
    **kwargs,
) -> tuple[PrivatizedProgram, SolveResult]:
    """Privatize, solve, and confirm the solution meets the original constraints."""
    comps = COMPONENTS if components is None else components
    priv = privatize_partial(lp, profile, budget, comps, rng, **kwargs)
    res = solve(priv.lp)
    if res.status is Status.INFEASIBLE:
        raise PerturbedFeasibilityError(
            "privatized program is infeasible; the A_sup/b_inf envelope has no common feasible point"
        )
    if res.optimal and priv.shifted and not check_feasible(res.x, lp, ORIGINAL_FEAS_TOL):
        raise FeasibilityViolation("private solution violates the original constraints")
    return priv, res
