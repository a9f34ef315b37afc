"""Laplace and truncated Laplace noise, support widths and tail masses.

All samplers use inverse-CDF transforms of uniforms drawn from a
``numpy.random.Generator``, so every sample costs exactly one uniform.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lp import ContractError

SUPPORT_VARIANTS = ("per_entry", "doubled")


@dataclass(frozen=True)
class TruncatedLaplace:
    """Density proportional to ``exp(-|z|/sigma)`` on ``[-half_width, half_width]``."""

    sigma: float
    half_width: float

    def __post_init__(self):
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ContractError(f"sigma must be positive, got {self.sigma}")
        if not (self.half_width > 0 and math.isfinite(self.half_width)):
            raise ContractError(f"half_width must be positive, got {self.half_width}")

    @property
    def _mass(self) -> float:
        # 1 - exp(-s/sigma), the untruncated mass of [0, s] times two
        return -math.expm1(-self.half_width / self.sigma)

    def cdf(self, z):
        z = np.clip(np.asarray(z, dtype=float), -self.half_width, self.half_width)
        K = self._mass
        neg = (np.exp(z / self.sigma) - math.exp(-self.half_width / self.sigma)) / (2 * K)
        pos = 0.5 - np.expm1(-z / self.sigma) / (2 * K)
        return np.where(z < 0, neg, pos)

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        K = self._mass
        s, sig = self.half_width, self.sigma
        lower = sig * np.log(math.exp(-s / sig) + 2.0 * np.minimum(u, 0.5) * K)
        upper = -sig * np.log1p(-(2.0 * np.maximum(u, 0.5) - 1.0) * K)
        z = np.where(u < 0.5, lower, upper)
        return np.clip(z, -s, s)

    def variance(self) -> float:
        """Exact variance of the truncated law (smaller than ``2 sigma**2``)."""
        s, sig = self.half_width, self.sigma
        r = s / sig
        # E[z^2] = sig^2 * (2 - e^-r (r^2 + 2r + 2)) / (1 - e^-r)
        return sig * sig * (2.0 - math.exp(-r) * (r * r + 2 * r + 2)) / self._mass

    def sample(self, rng: np.random.Generator, size=None):
        out = self.ppf(rng.random(size))
        return float(out) if size is None else out


@dataclass(frozen=True)
class Laplace:
    """Zero-mean Laplace law with scale ``sigma`` (variance ``2 sigma**2``)."""

    sigma: float

    def __post_init__(self):
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ContractError(f"sigma must be positive, got {self.sigma}")

    def cdf(self, z):
        z = np.asarray(z, dtype=float)
        return np.where(z < 0, 0.5 * np.exp(z / self.sigma), 1.0 - 0.5 * np.exp(-z / self.sigma))

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        # u == 0 would map to -inf
        u = np.where(u <= 0.0, np.nextafter(0.0, 1.0), u)
        lower = self.sigma * np.log(2.0 * np.minimum(u, 0.5))
        upper = -self.sigma * np.log(2.0 - 2.0 * np.maximum(u, 0.5))
        return np.where(u < 0.5, lower, upper)

    def sample(self, rng: np.random.Generator, size=None):
        out = self.ppf(rng.random(size))
        return float(out) if size is None else out


def sample_trunc_laplace(rng: np.random.Generator, dist: TruncatedLaplace, size=None):
    return dist.sample(rng, size)


def sample_laplace(rng: np.random.Generator, dist: Laplace, size=None):
    return dist.sample(rng, size)


def _support(sensitivity, eps, delta, count) -> float:
    if sensitivity < 0:
        raise ContractError("sensitivity must be nonnegative")
    if not eps > 0:
        raise ContractError("eps must be positive")
    if not 0 < delta <= 0.5:
        raise ContractError("delta must lie in (0, 1/2]")
    if count < 1:
        raise ContractError("entry count must be at least 1")
    if sensitivity == 0:
        return 0.0
    return sensitivity / eps * math.log(count * math.expm1(eps) / delta + 1.0)


def support_A(delta11_A, eps_A, delta_A, m, n, variant: str = "per_entry") -> float:
    """Half-width of the matrix truncated Laplace support.

    ``variant="doubled"`` doubles the entry count inside the log.
    """
    factor = {"per_entry": 1, "doubled": 2}[variant]
    return _support(delta11_A, eps_A, delta_A, factor * m * n)


def support_b(delta1_b, eps_b, delta_b, m, variant: str = "per_entry") -> float:
    factor = {"per_entry": 1, "doubled": 2}[variant]
    return _support(delta1_b, eps_b, delta_b, factor * m)


def tail_mass(eps, delta11, s, count) -> float:
    """Mass that can leave the support of an adjacent input; inverts the support formulas."""
    if delta11 == 0:
        return 0.0
    if math.isinf(s):
        return 0.0
    return count * math.expm1(eps) / math.expm1(eps * s / delta11)
