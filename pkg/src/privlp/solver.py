"""Dense two-phase primal simplex plus small-instance geometric oracles."""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .lp import ContractError, LinearProgram

PIVOT_TOL = 1e-10
OPT_TOL = 1e-9


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


class GeometryError(ValueError):
    """The feasible region is empty or unbounded where a bounded one is required."""


class InstanceTooLarge(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SolveResult:
    status: Status
    x: Optional[np.ndarray] = None
    mu: Optional[np.ndarray] = None
    mu_eq: Optional[np.ndarray] = None
    objective: float = math.nan
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL

    def to_dict(self) -> dict:
        return {
            "status": self.status.value,
            "x": None if self.x is None else self.x.tolist(),
            "mu": None if self.mu is None else self.mu.tolist(),
            "objective": None if not self.optimal else float(self.objective),
        }


class _Tableau:
    """Row 0 holds reduced costs ``c_B B^-1 a_j - c_j``; the last column holds the rhs."""

    def __init__(self, S: np.ndarray, rhs: np.ndarray, basis: list[int]):
        m, N = S.shape
        self.T = np.zeros((m + 1, N + 1))
        self.T[1:, :N] = S
        self.T[1:, N] = rhs
        self.basis = list(basis)
        self.N = N
        self.iterations = 0

    def set_objective(self, cost: np.ndarray) -> None:
        T = self.T
        cb = cost[self.basis]
        T[0, : self.N] = cb @ T[1:, : self.N] - cost
        T[0, self.N] = cb @ T[1:, self.N]

    def pivot(self, r: int, e: int) -> None:
        T = self.T
        row = r + 1
        T[row] /= T[row, e]
        col = T[:, e].copy()
        col[row] = 0.0
        T -= np.outer(col, T[row])
        T[:, e] = 0.0
        T[row, e] = 1.0
        self.basis[r] = e
        self.iterations += 1

    def run(self, allowed: np.ndarray, stall_limit: int) -> Status:
        """Maximize the objective currently in row 0 over the ``allowed`` columns."""
        T = self.T
        N = self.N
        bland = False
        stalled = 0
        while True:
            d = T[0, :N]
            cand = allowed & (d < -OPT_TOL)
            if not cand.any():
                return Status.OPTIMAL
            if bland:
                e = int(np.flatnonzero(cand)[0])
            else:
                e = int(np.argmin(np.where(cand, d, np.inf)))
            colv = T[1:, e]
            pos = colv > PIVOT_TOL
            if not pos.any():
                return Status.UNBOUNDED
            ratios = np.full(colv.shape, np.inf)
            ratios[pos] = T[1:, N][pos] / colv[pos]
            best = ratios.min()
            ties = np.flatnonzero(ratios <= best + 1e-12 * max(1.0, abs(best)))
            if bland and len(ties) > 1:
                r = int(ties[np.argmin([self.basis[t] for t in ties])])
            else:
                r = int(ties[0])
            before = T[0, N]
            self.pivot(r, e)
            if T[0, N] > before + 1e-12 * max(1.0, abs(before)):
                stalled = 0
            else:
                stalled += 1
                if stalled > stall_limit:
                    bland = True


def solve(lp: LinearProgram) -> SolveResult:
    """Solve ``lp`` with a two-phase dense primal simplex.

    Dantzig pricing, switching permanently to Bland's rule after
    ``5*(m+n)`` pivots without objective progress. Primal values and
    multipliers are recomputed from the final basis at the end.
    """
    n, m1, m2 = lp.n, lp.m, lp.m_eq
    m = m1 + m2
    if m == 0:
        if np.any(lp.c > 0):
            return SolveResult(Status.UNBOUNDED)
        return SolveResult(Status.OPTIMAL, np.zeros(n), np.zeros(0), np.zeros(0), 0.0)

    rows = np.vstack([lp.A, lp.A_eq]) if m2 else lp.A
    rhs = np.concatenate([lp.b, lp.b_eq])
    sign = np.where(rhs < 0, -1.0, 1.0)
    # slack columns for inequality rows, then one artificial per row that needs it
    needs_art = np.concatenate([rhs[:m1] < 0, np.ones(m2, dtype=bool)])
    art_rows = np.flatnonzero(needs_art)
    n_art = len(art_rows)
    N = n + m1 + n_art
    S = np.zeros((m, N))
    S[:, :n] = rows
    S[np.arange(m1), n + np.arange(m1)] = 1.0
    S *= sign[:, None]
    S[art_rows, n + m1 + np.arange(n_art)] = 1.0
    b_std = rhs * sign

    basis = [0] * m
    for i in range(m1):
        if not needs_art[i]:
            basis[i] = n + i
    for k, i in enumerate(art_rows):
        basis[i] = n + m1 + k

    tab = _Tableau(S, b_std, basis)
    stall_limit = 5 * (m + n)
    is_art = np.zeros(N, dtype=bool)
    is_art[n + m1:] = True

    if n_art:
        cost1 = np.where(is_art, -1.0, 0.0)
        tab.set_objective(cost1)
        tab.run(np.ones(N, dtype=bool), stall_limit)
        infeas = -tab.T[0, N]
        if infeas > 1e-9 * (1.0 + float(np.abs(b_std).max())):
            return SolveResult(Status.INFEASIBLE, iterations=tab.iterations)
        for r in range(m):
            if is_art[tab.basis[r]]:
                row = tab.T[r + 1, : n + m1]
                cand = np.flatnonzero(np.abs(row) > 1e-9)
                if len(cand):
                    tab.pivot(r, int(cand[0]))

    cost2 = np.zeros(N)
    cost2[:n] = lp.c
    tab.set_objective(cost2)
    status = tab.run(~is_art, stall_limit)
    if status is Status.UNBOUNDED:
        return SolveResult(Status.UNBOUNDED, iterations=tab.iterations)

    B = S[:, tab.basis]
    try:
        xb = np.linalg.solve(B, b_std)
        y = np.linalg.solve(B.T, cost2[tab.basis])
    except np.linalg.LinAlgError:
        # read values straight off the tableau
        xb = tab.T[1:, N].copy()
        y = np.empty(m)
        y[:m1] = sign[:m1] * tab.T[0, n : n + m1]
        art_col = {int(i): n + m1 + k for k, i in enumerate(art_rows)}
        for i in range(m1, m):
            y[i] = tab.T[0, art_col[i]]
    full = np.zeros(N)
    full[tab.basis] = xb
    x = np.maximum(full[:n], 0.0)
    mult = sign * y
    mu = np.maximum(mult[:m1], 0.0)
    mu_eq = mult[m1:]
    return SolveResult(
        Status.OPTIMAL,
        x=x,
        mu=mu,
        mu_eq=mu_eq,
        objective=float(lp.c @ x),
        iterations=tab.iterations,
    )


def enumerate_vertices(lp: LinearProgram, max_combinations: int = 10**6, tol: float = 1e-9) -> np.ndarray:
    """All basic feasible solutions of the region, as rows of a sorted array."""
    n = lp.n
    G = np.vstack([lp.A, -np.eye(n)])
    h = np.concatenate([lp.b, np.zeros(n)])
    k = n - lp.m_eq
    if k < 0:
        raise ContractError("more equality rows than variables")
    total = math.comb(G.shape[0], k)
    if total > max_combinations:
        raise InstanceTooLarge(f"{total} active sets exceed the limit of {max_combinations}")
    scale = 1.0 + max(np.abs(h).max(initial=0.0), np.abs(lp.b_eq).max(initial=0.0))
    found: list[np.ndarray] = []
    for active in itertools.combinations(range(G.shape[0]), k):
        M = np.vstack([lp.A_eq, G[list(active)]])
        rhs = np.concatenate([lp.b_eq, h[list(active)]])
        if np.linalg.matrix_rank(M) < n:
            continue
        v = np.linalg.solve(M, rhs)
        if np.any(G @ v > h + tol * scale):
            continue
        if lp.m_eq and np.any(np.abs(lp.A_eq @ v - lp.b_eq) > tol * scale):
            continue
        if not any(np.max(np.abs(v - u)) <= tol * scale for u in found):
            found.append(v)
    if not found:
        return np.zeros((0, n))
    out = np.array(found)
    order = np.lexsort(out.T[::-1])
    return out[order]


def _check_bounded(lp: LinearProgram) -> None:
    res = solve(lp.replace(c=np.ones(lp.n)))
    if res.status is Status.INFEASIBLE:
        raise GeometryError("feasible region is empty")
    if res.status is Status.UNBOUNDED:
        raise GeometryError("feasible region is unbounded")


def diameter(lp: LinearProgram, max_combinations: int = 10**6) -> float:
    """Largest Euclidean distance between two feasible points (exact, via vertices)."""
    _check_bounded(lp)
    V = enumerate_vertices(lp, max_combinations)
    if len(V) < 2:
        return 0.0
    diff = V[:, None, :] - V[None, :, :]
    return float(np.sqrt((diff**2).sum(axis=-1)).max())


def diameter_upper_bound(lp: LinearProgram) -> float:
    """Norm of the bounding-box corner ``u_j = max x_j``; never below the diameter
    because the region lies in ``[0, u]``."""
    u = np.empty(lp.n)
    for j in range(lp.n):
        res = solve(lp.replace(c=np.eye(lp.n)[j]))
        if res.status is Status.INFEASIBLE:
            raise GeometryError("feasible region is empty")
        if res.status is Status.UNBOUNDED:
            raise GeometryError("feasible region is unbounded")
        u[j] = res.objective
    return float(np.linalg.norm(u))


def slater_point(lp: LinearProgram) -> tuple[np.ndarray, float]:
    """Most interior point: ``max t  s.t.  A x + t <= b, x >= 0`` (``t`` free).

    Returns ``(x, t)``; ``t > 0`` certifies Slater's condition for the
    inequality block. When ``t`` is unbounded it is capped at ``1 + max|b|``.
    """
    n, m = lp.n, lp.m
    ones = np.ones((m, 1))
    # t = t_plus - t_minus
    A_aux = np.hstack([lp.A, ones, -ones])
    c_aux = np.zeros(n + 2)
    c_aux[n], c_aux[n + 1] = 1.0, -1.0
    A_eq = np.hstack([lp.A_eq, np.zeros((lp.m_eq, 2))]) if lp.m_eq else None
    aux = LinearProgram(c=c_aux, A=A_aux, b=lp.b, A_eq=A_eq, b_eq=lp.b_eq if lp.m_eq else None)
    res = solve(aux)
    if res.status is Status.UNBOUNDED:
        cap = np.zeros((1, n + 2))
        cap[0, n], cap[0, n + 1] = 1.0, -1.0
        cap_rhs = 1.0 + float(np.abs(lp.b).max(initial=0.0))
        aux = aux.replace(A=np.vstack([A_aux, cap]), b=np.append(lp.b, cap_rhs))
        res = solve(aux)
    if res.status is Status.INFEASIBLE:
        raise GeometryError("feasible region is empty")
    x = res.x[:n]
    if m:
        t = float(np.min(lp.b - lp.A @ x))
    else:
        t = float(res.x[n] - res.x[n + 1])
    return x, t
