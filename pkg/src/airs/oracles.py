"""Naive references for tests and ``verify``. Production solvers never call these."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .model import CostFunction, Instance, StepRewardScheme


@dataclass(frozen=True)
class GridSpec:
    x_max: float
    step: float

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("grid step must be positive")
        if not self.x_max >= self.step:
            raise ValueError("grid upper bound must be at least one step")

    @property
    def n_points(self) -> int:
        return int(np.floor(self.x_max / self.step + 1e-9)) + 1

    def points(self) -> np.ndarray:
        return np.arange(self.n_points) * self.step


def alpha_direct(inst: Instance) -> np.ndarray:
    """Budget weights from the unsimplified double sum, O(m^2)."""
    f, h = inst.weights, inst.h_values
    m = inst.m
    out = np.empty(m)
    for k in range(m):
        h_next = h[k + 1] if k + 1 < m else 0.0
        out[k] = h[k] * sum(f[k:]) - h_next * sum(f[k + 1:])
    return out


def default_grid(inst: Instance, step: float = 1e-3) -> GridSpec:
    """Grid up to the largest quality any single type could be paid for."""
    x_max = float(inst.cost.inverse(inst.budget / alpha_direct(inst).min()))
    return GridSpec(max(x_max, step), step)


def brute_force_p2(inst: Instance, grid: Optional[GridSpec] = None,
                   max_cells: int = 50_000_000,
                   budget: Optional[float] = None) -> tuple[float, np.ndarray]:
    """Best monotone grid profile within budget, by enumeration (``m <= 3``).

    The first ``m - 1`` coordinates are enumerated; the last takes the largest
    affordable grid value, which is optimal since the objective increases in
    it. The result lies within ``sum(f) * step`` below the true optimum.
    ``budget`` overrides the instance budget and may be zero.
    """
    if inst.m > 3:
        raise ValueError(f"grid enumeration supports m <= 3, got {inst.m}")
    budget = inst.budget if budget is None else float(budget)
    if budget < 0:
        raise ValueError("budget must be nonnegative")
    if budget == 0:
        return 0.0, np.zeros(inst.m)
    grid = grid or default_grid(inst.with_budget(budget))
    n = grid.n_points
    if n ** (inst.m - 1) > max_cells:
        raise ValueError(f"grid too fine: {n ** (inst.m - 1)} cells exceed {max_cells}")
    g = grid.points()
    cg = inst.cost.value(g)
    alpha, f = alpha_direct(inst), inst.weights
    last_cost = alpha[-1] * cg

    def top(remaining, floor_idx):
        j = np.searchsorted(last_cost, remaining, side="right") - 1
        return j, (remaining >= 0) & (j >= floor_idx)

    if inst.m == 1:
        j, ok = top(np.array([budget]), np.array([0]))
        return (float(f[0] * g[j[0]]), g[j]) if ok[0] else (0.0, np.zeros(1))

    best, best_x = -np.inf, np.zeros(inst.m)
    if inst.m == 2:
        i1 = np.arange(n)
        j, ok = top(budget - alpha[0] * cg, i1)
        gross = np.where(ok, f[0] * g + f[1] * g[np.maximum(j, 0)], -np.inf)
        a = int(np.argmax(gross))
        return float(gross[a]), np.array([g[a], g[j[a]]])

    for i1 in range(n):
        rem1 = budget - alpha[0] * cg[i1]
        if rem1 < 0:
            break
        i2 = np.arange(i1, n)
        j, ok = top(rem1 - alpha[1] * cg[i2], i2)
        if not ok.any():
            continue
        gross = np.where(ok, f[0] * g[i1] + f[1] * g[i2] + f[2] * g[np.maximum(j, 0)], -np.inf)
        a = int(np.argmax(gross))
        if gross[a] > best:
            best, best_x = float(gross[a]), np.array([g[i1], g[i2[a]], g[j[a]]])
    return best, best_x


Reward = Union[StepRewardScheme, Callable[[np.ndarray], np.ndarray]]


def brute_force_best_action(reward: Reward, h_t: float, c: CostFunction,
                            grid: GridSpec, rel_tol: float = 1e-9) -> tuple[float, float]:
    """Grid argmax of ``R(x) - c(x) h_t``; near-ties go to the larger action."""
    xs = grid.points()
    r = reward.reward(xs) if isinstance(reward, StepRewardScheme) else np.asarray(reward(xs))
    u = r - c.value(xs) * h_t
    best = u.max()
    pick = int(np.flatnonzero(u >= best - rel_tol * max(1.0, float(np.abs(r).max())))[-1])
    return float(xs[pick]), float(u[pick])
