"""Linear program containers, sensitivity metadata and feasibility checks.

Programs are stored in the orientation ``maximize c @ x`` subject to
``A @ x <= b``, an optional equality block ``A_eq @ x == b_eq`` and the
implicit bound ``x >= 0``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

DEFAULT_FEAS_TOL = 1e-9


class ContractError(ValueError):
    """Raised when an operation is called with inputs that break its contract."""


class ConfigurationError(ValueError):
    """Raised for inconsistent budgets, masks or experiment settings."""


def _as_vector(v, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1:
        raise ContractError(f"{name} must be one-dimensional, got shape {arr.shape}")
    return arr


def _as_matrix(a, name: str, ncols: int) -> np.ndarray:
    arr = np.asarray(a, dtype=float)
    if arr.size == 0:
        return np.zeros((0, ncols))
    if arr.ndim != 2:
        raise ContractError(f"{name} must be two-dimensional, got shape {arr.shape}")
    return arr


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class LinearProgram:
    """``max c@x  s.t.  A@x <= b,  A_eq@x == b_eq,  x >= 0``.

    Arrays are copied and made read-only on construction.
    """

    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    A_eq: Optional[np.ndarray] = None
    b_eq: Optional[np.ndarray] = None

    def __post_init__(self):
        c = _as_vector(self.c, "c")
        n = c.shape[0]
        A = _as_matrix(self.A, "A", n)
        b = _as_vector(self.b, "b") if np.size(self.b) else np.zeros(0)
        if A.shape != (b.shape[0], n):
            raise ContractError(
                f"inconsistent dimensions: c has {n} entries, A is {A.shape}, b has {b.shape[0]}"
            )
        if self.A_eq is None and self.b_eq is None:
            A_eq, b_eq = np.zeros((0, n)), np.zeros(0)
        else:
            A_eq = _as_matrix(self.A_eq if self.A_eq is not None else [], "A_eq", n)
            b_eq = _as_vector(self.b_eq, "b_eq") if np.size(self.b_eq) else np.zeros(0)
            if A_eq.shape != (b_eq.shape[0], n):
                raise ContractError(f"equality block A_eq {A_eq.shape} does not match b_eq/c")
        for name, arr in (("c", c), ("A", A), ("b", b), ("A_eq", A_eq), ("b_eq", b_eq)):
            if not np.all(np.isfinite(arr)):
                raise ContractError(f"{name} contains non-finite entries")
        object.__setattr__(self, "c", _frozen(c))
        object.__setattr__(self, "A", _frozen(A))
        object.__setattr__(self, "b", _frozen(b))
        object.__setattr__(self, "A_eq", _frozen(A_eq))
        object.__setattr__(self, "b_eq", _frozen(b_eq))

    @property
    def n(self) -> int:
        return self.c.shape[0]

    @property
    def m(self) -> int:
        return self.b.shape[0]

    @property
    def m_eq(self) -> int:
        return self.b_eq.shape[0]

    def replace(self, **changes) -> "LinearProgram":
        fields = dict(c=self.c, A=self.A, b=self.b, A_eq=self.A_eq, b_eq=self.b_eq)
        fields.update(changes)
        return LinearProgram(**fields)

    def to_dict(self) -> dict:
        d = {"c": self.c.tolist(), "A": self.A.tolist(), "b": self.b.tolist()}
        if self.m_eq:
            d["A_eq"] = self.A_eq.tolist()
            d["b_eq"] = self.b_eq.tolist()
        return d


@dataclass(frozen=True, eq=False)
class SensitivityProfile:
    """Public sensitivity data for the program-generating database.

    ``mask_A``/``mask_c`` mark entries that may vary with the database (the
    sensitive ones); masked-out entries are never perturbed. ``A_sup`` holds
    the entrywise supremum of ``A`` over all databases and ``b_inf`` the
    entrywise infimum of ``b``. ``mask_b`` is optional and defaults to all
    rows being sensitive.
    """

    delta11_A: float
    delta1_b: float
    delta1_c: float
    mask_A: np.ndarray
    mask_c: np.ndarray
    A_sup: np.ndarray
    b_inf: np.ndarray
    mask_b: Optional[np.ndarray] = None

    def __post_init__(self):
        for name in ("mask_A", "mask_c", "mask_b"):
            val = getattr(self, name)
            if val is None:
                continue
            arr = np.asarray(val)
            arr = arr.astype(bool) if arr.size else np.zeros(arr.shape, dtype=bool)
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.mask_b is None:
            mb = np.ones(np.shape(self.b_inf), dtype=bool)
            mb.setflags(write=False)
            object.__setattr__(self, "mask_b", mb)
        object.__setattr__(self, "A_sup", _frozen(np.asarray(self.A_sup, dtype=float)))
        object.__setattr__(self, "b_inf", _frozen(np.asarray(self.b_inf, dtype=float)))
        for name in ("delta11_A", "delta1_b", "delta1_c"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @classmethod
    def public(cls, lp: LinearProgram) -> "SensitivityProfile":
        """A profile declaring nothing sensitive."""
        return cls(
            0.0,
            0.0,
            0.0,
            mask_A=np.zeros(lp.A.shape, dtype=bool),
            mask_c=np.zeros(lp.n, dtype=bool),
            A_sup=lp.A.copy(),
            b_inf=lp.b.copy(),
            mask_b=np.zeros(lp.m, dtype=bool),
        )

    def replace(self, **changes) -> "SensitivityProfile":
        fields = dict(
            delta11_A=self.delta11_A,
            delta1_b=self.delta1_b,
            delta1_c=self.delta1_c,
            mask_A=self.mask_A,
            mask_c=self.mask_c,
            A_sup=self.A_sup,
            b_inf=self.b_inf,
            mask_b=self.mask_b,
        )
        fields.update(changes)
        return SensitivityProfile(**fields)

    def to_dict(self) -> dict:
        return {
            "delta11_A": self.delta11_A,
            "delta1_b": self.delta1_b,
            "delta1_c": self.delta1_c,
            "mask_A": self.mask_A.astype(int).tolist(),
            "mask_c": self.mask_c.astype(int).tolist(),
            "A_sup": self.A_sup.tolist(),
            "b_inf": self.b_inf.tolist(),
            "mask_b": self.mask_b.astype(int).tolist(),
        }


COMPONENTS = ("A", "b", "c")


@dataclass(frozen=True)
class PrivacyBudget:
    """Total ``(eps, delta)`` and its split across the A, b and c mechanisms."""

    eps: float
    delta: float
    alpha_A: float = 1 / 3
    alpha_b: float = 1 / 3
    alpha_c: float = 1 / 3

    def __post_init__(self):
        if not self.eps > 0 or not np.isfinite(self.eps):
            raise ConfigurationError(f"eps must be positive and finite, got {self.eps}")
        if not 0 < self.delta <= 0.5:
            raise ConfigurationError(f"delta must lie in (0, 1/2], got {self.delta}")
        alphas = (self.alpha_A, self.alpha_b, self.alpha_c)
        if min(alphas) < 0:
            raise ConfigurationError(f"allocation weights must be nonnegative, got {alphas}")
        if abs(sum(alphas) - 1.0) > 1e-12:
            raise ConfigurationError(f"allocation weights must sum to 1, got {sum(alphas)!r}")

    def alpha(self, component: str) -> float:
        return {"A": self.alpha_A, "b": self.alpha_b, "c": self.alpha_c}[component]

    def share(self, component: str) -> tuple[float, float]:
        """``(alpha*eps, alpha*delta)`` granted to one mechanism."""
        a = self.alpha(component)
        return a * self.eps, a * self.delta

    def consumed(self, components=COMPONENTS) -> tuple[float, float]:
        """Budget spent by running the given mechanisms, by sequential composition."""
        total = sum(self.alpha(k) for k in components)
        return total * self.eps, total * self.delta

    @classmethod
    def even(cls, eps: float, delta: float, components=COMPONENTS) -> "PrivacyBudget":
        """Split the budget evenly over ``components``, zero elsewhere."""
        comps = set(components)
        if not comps:
            return cls(eps, delta, 1.0, 0.0, 0.0)
        w = 1.0 / len(comps)
        weights = {k: (w if k in comps else 0.0) for k in COMPONENTS}
        # keep the exact-sum invariant when 1/len is inexact
        last = sorted(comps)[-1]
        weights[last] = 1.0 - sum(v for k, v in weights.items() if k != last)
        return cls(eps, delta, weights["A"], weights["b"], weights["c"])


def check_feasible(x, lp: LinearProgram, tol: float = DEFAULT_FEAS_TOL) -> bool:
    """True iff ``A x <= b + tol``, ``|A_eq x - b_eq| <= tol`` and ``x >= -tol``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (lp.n,):
        raise ContractError(f"x has shape {x.shape}, expected ({lp.n},)")
    if tol < 0:
        raise ContractError("tol must be nonnegative")
    if np.any(x < -tol):
        return False
    if lp.m and np.any(lp.A @ x > lp.b + tol):
        return False
    if lp.m_eq and np.any(np.abs(lp.A_eq @ x - lp.b_eq) > tol):
        return False
    return True


def max_violation(x, lp: LinearProgram) -> float:
    """Largest constraint violation of ``x`` (0 when feasible)."""
    x = np.asarray(x, dtype=float)
    parts = [np.maximum(-x, 0.0)]
    if lp.m:
        parts.append(np.maximum(lp.A @ x - lp.b, 0.0))
    if lp.m_eq:
        parts.append(np.abs(lp.A_eq @ x - lp.b_eq))
    return float(max(p.max(initial=0.0) for p in parts))


def dual_of(lp: LinearProgram) -> LinearProgram:
    """Dual program, written back in maximize form.

    ``min b@mu s.t. A.T@mu >= c, mu >= 0`` is returned as
    ``max (-b)@mu s.t. (-A.T)@mu <= -c``, so applying it twice gives ``lp``
    back exactly.
    """
    if lp.m_eq:
        raise ContractError("dual_of supports inequality-only programs")
    return LinearProgram(c=-lp.b, A=-lp.A.T, b=-lp.c)


def validate_profile(
    lp: LinearProgram, profile: SensitivityProfile, *, public_nonzero: bool = False
) -> list[str]:
    """Human-readable violations of the profile contract, empty when consistent.

    By default an unmasked entry must be zero. ``public_nonzero=True`` accepts
    nonzero entries that are public, i.e. identical for every database.
    """
    problems: list[str] = []
    for name in ("delta11_A", "delta1_b", "delta1_c"):
        val = getattr(profile, name)
        if not (np.isfinite(val) and val >= 0):
            problems.append(f"{name} must be a nonnegative finite number, got {val}")
    shapes = {
        "mask_A": (profile.mask_A.shape, lp.A.shape),
        "A_sup": (profile.A_sup.shape, lp.A.shape),
        "mask_c": (profile.mask_c.shape, (lp.n,)),
        "b_inf": (profile.b_inf.shape, (lp.m,)),
        "mask_b": (profile.mask_b.shape, (lp.m,)),
    }
    bad_shape = False
    for name, (got, want) in shapes.items():
        if got != want:
            problems.append(f"{name} has shape {got}, expected {want}")
            bad_shape = True
    if bad_shape:
        return problems
    if not np.all(np.isfinite(profile.A_sup)):
        problems.append("A_sup contains non-finite entries")
    if not np.all(np.isfinite(profile.b_inf)):
        problems.append("b_inf contains non-finite entries")
    public = np.zeros_like(profile.mask_A) if public_nonzero else (lp.A != 0)
    for i, j in zip(*np.nonzero(~profile.mask_A & public)):
        problems.append(f"A[{i},{j}] = {lp.A[i, j]!r} is nonzero but mask_A[{i},{j}] = 0")
    for i, j in zip(*np.nonzero(profile.mask_A & (profile.A_sup < lp.A))):
        problems.append(f"A_sup[{i},{j}] = {profile.A_sup[i, j]!r} is below A[{i},{j}] = {lp.A[i, j]!r}")
    for i in np.nonzero(profile.b_inf > lp.b)[0]:
        problems.append(f"b_inf[{i}] = {profile.b_inf[i]!r} exceeds b[{i}] = {lp.b[i]!r}")
    return problems


# ---- JSON problem files ----

def program_from_dict(d: dict) -> tuple[LinearProgram, Optional[SensitivityProfile]]:
    try:
        c = d["c"]
        A = d["A"]
        b = d["b"]
    except KeyError as exc:
        raise ConfigurationError(f"instance is missing key {exc.args[0]!r}") from None
    lp = LinearProgram(c=c, A=A if len(A) else np.zeros((0, len(c))), b=b, A_eq=d.get("A_eq"), b_eq=d.get("b_eq"))
    sens = d.get("sensitivity")
    if sens is None:
        return lp, None
    try:
        profile = SensitivityProfile(
            delta11_A=sens["delta11_A"],
            delta1_b=sens["delta1_b"],
            delta1_c=sens["delta1_c"],
            mask_A=np.asarray(sens.get("mask_A", (lp.A != 0).astype(int))).reshape(lp.A.shape),
            mask_c=np.asarray(sens.get("mask_c", (lp.c != 0).astype(int))),
            A_sup=np.asarray(sens.get("A_sup", lp.A)).reshape(lp.A.shape),
            b_inf=np.asarray(sens.get("b_inf", lp.b)),
            mask_b=np.asarray(sens["mask_b"]) if "mask_b" in sens else None,
        )
    except KeyError as exc:
        raise ConfigurationError(f"sensitivity block is missing key {exc.args[0]!r}") from None
    return lp, profile


def program_to_dict(lp: LinearProgram, profile: Optional[SensitivityProfile] = None) -> dict:
    d = lp.to_dict()
    if profile is not None:
        d["sensitivity"] = profile.to_dict()
    return d


def load_program(path) -> tuple[LinearProgram, Optional[SensitivityProfile]]:
    with open(Path(path), encoding="utf-8") as fh:
        return program_from_dict(json.load(fh))


def save_program(path, lp: LinearProgram, profile: Optional[SensitivityProfile] = None) -> None:
    with open(Path(path), "w", encoding="utf-8") as fh:
        json.dump(program_to_dict(lp, profile), fh)
