"""Gridworld CMDPs solved through the occupancy-measure linear program."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .lp import ConfigurationError, ContractError, LinearProgram, SensitivityProfile

# action order: east, west, north, south
MOVES = ((1, 0), (-1, 0), (0, 1), (0, -1))
MASK_MODES = ("hazards", "non_goal")
HAZARD_WEIGHTINGS = ("single_gamma", "discounted")

HAZARD_CELLS = tuple((x, y) for x in range(7) for y in (1, 2) if x != 3)


@dataclass(frozen=True)
class GridworldConfig:
    """Cells are ``(x, y)`` with ``y = 0`` the bottom row.

    ``mask_mode`` selects which states may be hazardous for some database:
    only the listed hazards, or every non-goal state. ``slip`` is the
    probability that a move goes in a uniformly random other direction.
    """

    width: int = 10
    height: int = 5
    start: tuple = (0, 0)
    goal: tuple = (4, 3)
    hazards: tuple = HAZARD_CELLS
    beta: float = 0.6
    gamma: float = 0.95
    f0: float = 0.6
    A_sup: float = 0.9
    b_inf: float = 0.3
    reward_model: str = "goal"
    mask_mode: str = "hazards"
    hazard_weighting: str = "single_gamma"
    slip: float = 0.0

    @classmethod
    def from_dict(cls, d: dict) -> "GridworldConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown gridworld keys {sorted(unknown)}")
        kw = dict(d)
        for key in ("start", "goal"):
            if key in kw:
                kw[key] = tuple(kw[key])
        if "hazards" in kw:
            kw["hazards"] = tuple(tuple(h) for h in kw["hazards"])
        return cls(**kw)


@dataclass(frozen=True, eq=False)
class CmdpSpec:
    reward: np.ndarray  # (p, q)
    transition: np.ndarray  # (p, q, p)
    initial_dist: np.ndarray
    discount: float
    hazard_set: frozenset
    beta: np.ndarray  # per-state penalty
    f0: float
    candidate_set: frozenset = field(default_factory=frozenset)
    A_sup: float = 0.9
    b_inf: float = 0.3
    hazard_weighting: str = "single_gamma"

    def __post_init__(self):
        p, q = self.reward.shape
        if self.transition.shape != (p, q, p):
            raise ContractError(f"transition has shape {self.transition.shape}, expected {(p, q, p)}")
        if np.any(self.transition < 0) or np.max(np.abs(self.transition.sum(axis=2) - 1)) > 1e-12:
            raise ContractError("every transition row must be a probability vector")
        if abs(self.initial_dist.sum() - 1) > 1e-12 or np.any(self.initial_dist < 0):
            raise ContractError("initial distribution must be a probability vector")
        if not 0 < self.discount < 1:
            raise ContractError("discount must lie strictly between 0 and 1")
        if self.hazard_weighting not in HAZARD_WEIGHTINGS:
            raise ConfigurationError(f"hazard_weighting must be one of {HAZARD_WEIGHTINGS}")

    @property
    def p(self) -> int:
        return self.reward.shape[0]

    @property
    def q(self) -> int:
        return self.reward.shape[1]


@dataclass(frozen=True, eq=False)
class Policy:
    probs: np.ndarray

    def __post_init__(self):
        if np.any(self.probs < 0) or np.max(np.abs(self.probs.sum(axis=1) - 1)) > 1e-9:
            raise ContractError("policy rows must be probability vectors")


def _cell_index(cell, width: int) -> int:
    return cell[1] * width + cell[0]


def build_gridworld(config: GridworldConfig) -> CmdpSpec:
    w, h = config.width, config.height
    if w < 1 or h < 1:
        raise ConfigurationError("grid must have at least one cell")

    def inside(cell):
        return 0 <= cell[0] < w and 0 <= cell[1] < h

    for name in ("start", "goal"):
        if not inside(getattr(config, name)):
            raise ConfigurationError(f"{name} {getattr(config, name)} lies outside the {w}x{h} grid")
    for cell in config.hazards:
        if not inside(cell):
            raise ConfigurationError(f"hazard {cell} lies outside the {w}x{h} grid")
    if config.mask_mode not in MASK_MODES:
        raise ConfigurationError(f"mask_mode must be one of {MASK_MODES}")
    if config.reward_model != "goal":
        raise ConfigurationError("only the 'goal' reward model is available")
    if not 0 <= config.slip < 1:
        raise ConfigurationError("slip must lie in [0, 1)")

    p, q = w * h, len(MOVES)
    goal = _cell_index(config.goal, w)
    T = np.zeros((p, q, p))
    for s in range(p):
        x, y = s % w, s // w
        if s == goal:
            T[s, :, s] = 1.0
            continue
        targets = []
        for dx, dy in MOVES:
            nxt = (x + dx, y + dy)
            targets.append(_cell_index(nxt, w) if inside(nxt) else s)
        for a in range(q):
            T[s, a, targets[a]] += 1.0 - config.slip
            for b in range(q):
                if b != a:
                    T[s, a, targets[b]] += config.slip / (q - 1)

    reward = np.zeros((p, q))
    reward[goal, :] = 1.0
    mu = np.zeros(p)
    mu[_cell_index(config.start, w)] = 1.0
    hazards = frozenset(_cell_index(c, w) for c in config.hazards) - {goal}
    if config.mask_mode == "hazards":
        candidates = hazards
    else:
        candidates = frozenset(range(p)) - {goal}
    beta = np.full(p, float(config.beta))
    return CmdpSpec(
        reward=reward,
        transition=T,
        initial_dist=mu,
        discount=config.gamma,
        hazard_set=hazards,
        beta=beta,
        f0=config.f0,
        candidate_set=candidates,
        A_sup=config.A_sup,
        b_inf=config.b_inf,
        hazard_weighting=config.hazard_weighting,
    )


def build_hazard_row(spec: CmdpSpec) -> tuple[np.ndarray, float, dict]:
    """Hazard constraint over occupancy variables ``x[s*q + a]``.

    Returns the row, its bound and the profile fragment
    ``{"mask": ..., "A_sup": ..., "b_inf": ...}``.
    """
    p, q = spec.p, spec.q
    weight = spec.discount if spec.hazard_weighting == "single_gamma" else 1.0
    per_state = np.zeros(p)
    for s in spec.hazard_set:
        per_state[s] = spec.beta[s] * weight
    row = np.repeat(per_state, q)
    mask_state = np.zeros(p, dtype=bool)
    mask_state[list(spec.candidate_set | spec.hazard_set)] = True
    mask = np.repeat(mask_state, q)
    A_sup = np.where(mask, np.maximum(spec.A_sup, row), row)
    return row, float(spec.f0), {"mask": mask, "A_sup": A_sup, "b_inf": float(spec.b_inf)}


def build_occupancy_lp(spec: CmdpSpec) -> LinearProgram:
    """Maximize expected discounted reward over occupancy measures.

    Flow conservation goes in the equality block; the hazard constraint is
    the single inequality row.
    """
    p, q = spec.p, spec.q
    # flow: sum_a x(s',a) - gamma sum_{s,a} x(s,a) T(s,a,s') = mu(s')
    A_eq = np.repeat(np.eye(p), q, axis=1) - spec.discount * spec.transition.reshape(p * q, p).T
    row, f0, _ = build_hazard_row(spec)
    return LinearProgram(
        c=spec.reward.reshape(-1),
        A=row[None, :],
        b=np.array([f0]),
        A_eq=A_eq,
        b_eq=spec.initial_dist.copy(),
    )


def cmdp_profile(spec: CmdpSpec, delta11_A: float, delta1_b: float) -> SensitivityProfile:
    row, _, frag = build_hazard_row(spec)
    n = row.size
    return SensitivityProfile(
        delta11_A=delta11_A,
        delta1_b=delta1_b,
        delta1_c=0.0,
        mask_A=frag["mask"][None, :],
        mask_c=np.zeros(n, dtype=bool),
        A_sup=frag["A_sup"][None, :],
        b_inf=np.array([frag["b_inf"]]),
    )


def policy_from_occupancy(x, q: int) -> Policy:
    """Normalize occupancies per state; barely visited states get a uniform row."""
    x = np.asarray(x, dtype=float)
    if np.any(x < -1e-9):
        raise ContractError("occupancy has negative entries")
    occ = np.maximum(x, 0.0).reshape(-1, q)
    total = occ.sum(axis=1, keepdims=True)
    visited = total[:, 0] >= 1e-10
    probs = np.full(occ.shape, 1.0 / q)
    probs[visited] = occ[visited] / total[visited]
    return Policy(probs)


def _policy_matrices(spec: CmdpSpec, policy: Policy):
    P = np.einsum("sa,sat->st", policy.probs, spec.transition)
    r = np.einsum("sa,sa->s", policy.probs, spec.reward)
    return P, r


def value_function(spec: CmdpSpec, policy: Policy) -> np.ndarray:
    P, r = _policy_matrices(spec, policy)
    return np.linalg.solve(np.eye(spec.p) - spec.discount * P, r)


def value_of_policy(spec: CmdpSpec, policy: Policy, s0: Optional[int] = None) -> float:
    """Value at ``s0``, or under the initial distribution when ``s0`` is None."""
    v = value_function(spec, policy)
    if s0 is None:
        return float(spec.initial_dist @ v)
    return float(v[s0])


def occupancy_of_policy(spec: CmdpSpec, policy: Policy) -> np.ndarray:
    """Discounted state-action occupancy induced by ``policy`` from the initial law."""
    P, _ = _policy_matrices(spec, policy)
    d = np.linalg.solve(np.eye(spec.p) - spec.discount * P.T, spec.initial_dist)
    return (d[:, None] * policy.probs).reshape(-1)


def cost_of_privacy(v_tilde: float, v_opt: float) -> float:
    if v_opt == 0:
        raise ContractError("optimal value is zero; cost of privacy undefined")
    return (v_tilde - v_opt) / v_opt


def value_iteration(spec: CmdpSpec, tol: float = 1e-12, max_iter: int = 100_000) -> np.ndarray:
    """Unconstrained optimal values by successive approximation."""
    v = np.zeros(spec.p)
    for _ in range(max_iter):
        Q = spec.reward + spec.discount * spec.transition @ v
        new = Q.max(axis=1)
        if np.max(np.abs(new - v)) < tol:
            return new
        v = new
    return v


def hazard_cost(spec: CmdpSpec, x: Sequence[float]) -> float:
    row, _, _ = build_hazard_row(spec)
    return float(row @ np.asarray(x, dtype=float))
