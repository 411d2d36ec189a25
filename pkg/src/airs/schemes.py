"""Agent best responses and the competing reward schemes.

Covers the optimal linear price, the full-information proportional
(Tullock-style) scheme, the step scheme that reproduces a proportional
equilibrium more cheaply, and Monte Carlo marginalisation of an arbitrary
anonymous scheme into an independent one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .exceptions import ConvergenceError, NotAnEquilibriumError, UnboundedResponseError
from .model import CostFunction, Instance, StepRewardScheme

DEFAULT_REL_TOL = 1e-9


def best_response(scheme: StepRewardScheme, h_t: float, c: CostFunction,
                  rel_tol: float = DEFAULT_REL_TOL) -> tuple[float, float]:
    """Utility-maximising action of an agent with cost multiplier ``h_t``.

    Only 0 and the breakpoints are candidates: inside a step the reward is
    flat while cost rises. A candidate ties with the maximiser when their
    utilities differ by at most ``rel_tol`` times the largest reward or cost
    involved in the two; ties resolve to the largest action.
    """
    candidates = np.concatenate(([0.0], scheme.breakpoints))
    rewards = np.concatenate(([0.0], scheme.rewards))
    costs = c.value(candidates) * h_t
    utilities = rewards - costs
    b = int(np.argmax(utilities))
    magnitude = np.maximum(np.maximum(rewards, costs), max(rewards[b], costs[b]))
    ties = utilities >= utilities[b] - rel_tol * magnitude
    pick = int(np.flatnonzero(ties)[-1])
    return float(candidates[pick]), float(utilities[pick])


class SchemeEvaluation(NamedTuple):
    gross: float
    spend: float
    actions: np.ndarray


def evaluate_scheme(inst: Instance, scheme: StepRewardScheme,
                    rel_tol: float = DEFAULT_REL_TOL) -> SchemeEvaluation:
    """Gross product and budget spent when every type best-responds to ``scheme``."""
    actions = np.array([best_response(scheme, h, inst.cost, rel_tol)[0]
                        for h in inst.h_values])
    rewards = scheme.reward(actions)
    return SchemeEvaluation(float(np.dot(inst.weights, actions)),
                            float(np.dot(inst.weights, rewards)), actions)


# --------------------------------------------------------------------------
# linear scheme R(x) = p x
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LinearSolution:
    price: float
    actions: np.ndarray
    gross: float
    spend: float
    iterations: int = 0

    def to_dict(self) -> dict:
        return {"price": self.price, "actions": self.actions.tolist(),
                "gross": self.gross, "spend": self.spend,
                "iterations": self.iterations}


def linear_best_response(p: float, h_t: float, c: CostFunction) -> float:
    """Smallest best action against ``R(x) = p x``.

    Raises:
        UnboundedResponseError: ``p`` exceeds ``h_t`` times the terminal slope.
    """
    if p < 0:
        raise ValueError(f"price must be nonnegative, got {p}")
    if p > h_t * c.terminal_slope:
        raise UnboundedResponseError(
            f"price {p} exceeds terminal marginal cost {h_t * c.terminal_slope}")
    if p <= h_t * c.slope_at_zero:
        return 0.0
    return c.deriv_inv(p / h_t)[0]


def _linear_responses(p: float, h: np.ndarray, c: CostFunction) -> np.ndarray:
    lower, _ = c.deriv_inv(p / h)
    return np.where(p <= h * c.slope_at_zero, 0.0, lower)


def solve_linear(inst: Instance, tol: float = 1e-10, max_iter: int = 500) -> LinearSolution:
    """Budget-exhausting price for the linear reward scheme.

    Spend ``p * sum_k f_k y_k(p)`` is nondecreasing in ``p``; the price is
    bisected until it matches the budget. Where spend jumps past the budget
    (indifference along a flat stretch of marginal cost), the indifferent
    types are placed inside their best-action interval so that the budget is
    exhausted exactly.

    Raises:
        ConvergenceError: no price reaches the budget, or bisection stalls.
    """
    f, h, c, budget = inst.weights, inst.h_values, inst.cost, inst.budget

    def spent(p, y):
        return math.inf if np.isinf(y).any() else p * float(np.dot(f, y))

    p_lo, y_lo = 0.0, np.zeros(inst.m)
    p_hi = 1.0
    y_hi = _linear_responses(p_hi, h, c)
    s_hi = spent(p_hi, y_hi)
    doublings = 0
    while s_hi < budget:
        p_lo, y_lo = p_hi, y_hi
        p_hi *= 2.0
        y_hi = _linear_responses(p_hi, h, c)
        s_hi = spent(p_hi, y_hi)
        doublings += 1
        if doublings > 2000:
            raise ConvergenceError(f"budget not exhaustible; max spend reached {s_hi}")

    iterations = 0
    while True:
        if abs(s_hi - budget) <= tol * budget:
            return LinearSolution(p_hi, y_hi, float(np.dot(f, y_hi)), s_hi, iterations)
        if p_hi - p_lo <= tol * p_hi:
            break
        if iterations >= max_iter:
            raise ConvergenceError(f"price bisection did not converge in {max_iter} steps")
        iterations += 1
        mid = 0.5 * (p_lo + p_hi)
        y_mid = _linear_responses(mid, h, c)
        s_mid = spent(mid, y_mid)
        if s_mid > budget:
            p_hi, y_hi, s_hi = mid, y_mid, s_mid
        else:
            p_lo, y_lo = mid, y_mid
            if abs(s_mid - budget) <= tol * budget:
                return LinearSolution(mid, y_mid, float(np.dot(f, y_mid)), s_mid, iterations)

    # indifferent types absorb the remaining budget at the critical price
    price = 0.5 * (p_lo + p_hi)
    y_top = np.where(np.isinf(y_hi), y_lo + budget / (price * f), y_hi)
    delta = y_top - y_lo
    theta = (budget / price - float(np.dot(f, y_lo))) / float(np.dot(f, delta))
    y = y_lo + min(max(theta, 0.0), 1.0) * delta
    return LinearSolution(price, y, float(np.dot(f, y)), price * float(np.dot(f, y)), iterations)


# --------------------------------------------------------------------------
# proportional scheme, full information
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PropEquilibrium:
    types: np.ndarray
    actions: np.ndarray
    gross: float
    spend: float
    foc_residuals: np.ndarray
    rounds: int = 0

    def to_dict(self) -> dict:
        return {"types": self.types.tolist(), "actions": self.actions.tolist(),
                "gross": self.gross, "spend": self.spend,
                "foc_residuals": self.foc_residuals.tolist(), "rounds": self.rounds}


def prop_equilibrium_closed_form(t1: float, t2: float, budget: float) -> PropEquilibrium:
    """Two-agent equilibrium with ``h(t) = 1/t`` and ``c(x) = x``."""
    if t1 <= 0 or t2 <= 0 or budget < 0:
        raise ValueError("types must be positive and the budget nonnegative")
    denom = (t1 + t2) ** 2
    actions = np.array([budget * t1 * t1 * t2 / denom, budget * t1 * t2 * t2 / denom])
    gross = float(actions.sum())
    return PropEquilibrium(np.array([t1, t2], dtype=float), actions, gross,
                           budget if gross > 0 else 0.0, np.zeros(2))


def prop_foc_residuals(actions, h, c: CostFunction, budget: float) -> np.ndarray:
    """First-order condition violations of the proportional scheme per agent.

    An agent with a positive action needs ``B S_-i / S^2`` inside
    ``h_i [c'_-(x_i), c'_+(x_i)]``; an agent at zero needs
    ``B / S_-i <= h_i c'_+(0)``, with ``c'_+(0)`` read at the smallest
    positive double (roots below it are unrepresentable).
    """
    x = np.asarray(actions, dtype=float)
    h = np.asarray(h, dtype=float)
    total = x.sum()
    others = total - x
    left, right = c.subderiv(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        marginal = np.where(x > 0, budget * others / total ** 2, budget / others)
    inside = np.maximum(h * left - marginal, 0.0) + np.maximum(marginal - h * right, 0.0)
    slope0 = max(c.slope_at_zero, float(c.subderiv(np.finfo(float).tiny)[1]))
    at_zero = np.maximum(marginal - h * slope0, 0.0)
    return np.where(x > 0, inside, at_zero)


def _decreasing_root(slope_fn, hi: np.ndarray) -> np.ndarray:
    """Per-coordinate root on ``(0, hi]`` of a decreasing function.

    Bisects ``log x`` over the whole double range below ``hi``, so roots of
    any magnitude come out to full relative precision in a fixed 80 steps.
    Returns ``hi`` where the function stays positive and 0 where it is
    already nonpositive at the smallest positive double.
    """
    tiny = np.finfo(float).tiny
    hi = np.maximum(np.asarray(hi, dtype=float), tiny)
    b = np.log(hi)
    a = np.full_like(b, np.log(tiny))
    for _ in range(80):
        mid = 0.5 * (a + b)
        up = slope_fn(np.exp(mid)) > 0
        a = np.where(up, mid, a)
        b = np.where(up, b, mid)
    root = np.minimum(np.exp(b), hi)
    return np.where(slope_fn(np.full_like(hi, tiny)) > 0, root, 0.0)


def _snap_to_kinks(x: np.ndarray, c: CostFunction) -> np.ndarray:
    # a first-order root at a kink is only bracketed, never hit, by bisection
    kinks = c.kinks
    if kinks.size == 0:
        return x
    i = np.clip(np.searchsorted(kinks, x), 1, kinks.size) - 1
    near = np.stack([kinks[i], kinks[np.minimum(i + 1, kinks.size - 1)]])
    d = np.abs(near - x)
    j = np.argmin(d, axis=0)
    k = near[j, np.arange(x.size)]
    return np.where(np.min(d, axis=0) <= 8 * np.finfo(float).eps * np.maximum(k, 1.0), k, x)


def _prop_best_responses(others: np.ndarray, h: np.ndarray, c: CostFunction,
                         budget: float) -> np.ndarray:
    others = np.maximum(others, np.finfo(float).tiny)
    # utility is negative once c(x) h exceeds the whole budget
    hi = np.asarray(c.inverse(budget / h), dtype=float)
    with np.errstate(over="ignore", divide="ignore"):
        x = _snap_to_kinks(_decreasing_root(
            lambda y: budget * others / (y + others) ** 2 - h * c.subderiv(y)[1], hi), c)
        return np.where(budget / others > h * c.slope_at_zero, x, 0.0)


def _prop_shares(total: float, h: np.ndarray, c: CostFunction, budget: float) -> np.ndarray:
    # action consistent with the agent's own first-order condition when the
    # aggregate equals ``total``: B (S - x) / S^2 = h c'(x), x in [0, S]
    x = _snap_to_kinks(_decreasing_root(
        lambda y: budget * (total - y) / total ** 2 - h * c.subderiv(y)[1],
        np.full_like(h, total)), c)
    return np.where(budget / total > h * c.slope_at_zero, x, 0.0)


def prop_equilibrium_numeric(agent_types: Sequence[float], h: Sequence[float],
                             c: CostFunction, budget: float, tol: float = 1e-13,
                             max_rounds: int = 20000, damping: float = 0.5,
                             x0: Optional[Sequence[float]] = None,
                             seed: Optional[int] = None,
                             method: str = "aggregate") -> PropEquilibrium:
    """Full-information equilibrium of the proportional scheme.

    ``method="aggregate"`` (default) searches the aggregate action ``S``:
    each agent's first-order condition fixes its action as a function of
    ``S`` and the equilibrium is the fixed point of their sum, found by
    Brent's method. ``method="best_response"`` runs damped simultaneous
    best-response rounds instead, moving each agent a ``damping`` fraction
    towards its best reply until no action moves by more than ``tol``
    (relative); with strongly asymmetric agents this iteration can cycle
    outwards unless ``damping`` is small. Either way the result is
    certified only by its first-order residuals.

    Raises:
        ConvergenceError: no fixed point within ``max_rounds``; ``result``
            holds the last iterate.
    """
    types = np.asarray(agent_types, dtype=float)
    h = np.asarray(h, dtype=float)
    if types.size < 2 or h.shape != types.shape:
        raise ValueError("need at least two agents with one h value each")
    if not 0 < damping <= 1:
        raise ValueError("damping must lie in (0, 1]")
    if method not in ("aggregate", "best_response"):
        raise ValueError(f"unknown method {method!r}")
    if budget <= 0:
        zeros = np.zeros_like(types)
        return PropEquilibrium(types, zeros, 0.0, 0.0, zeros)
    if method == "aggregate":
        return _prop_aggregate(types, h, c, budget, max_rounds)

    if x0 is not None:
        x = np.asarray(x0, dtype=float).copy()
    else:
        x = np.asarray(c.inverse(budget / h), dtype=float) / types.size
        if seed is not None:
            x = x * np.random.default_rng(seed).uniform(0.5, 1.5, size=types.size)
    for rounds in range(1, max_rounds + 1):
        target = _prop_best_responses(x.sum() - x, h, c, budget)
        new = (1.0 - damping) * x + damping * target
        change = float(np.max(np.abs(new - x)))
        x = new
        if change <= tol * max(1e-300, float(x.max())):
            break
    else:
        raise ConvergenceError(
            f"proportional best-response iteration did not converge in {max_rounds} rounds",
            result=_prop_result(types, x, h, c, budget, max_rounds))
    return _prop_result(types, x, h, c, budget, rounds)


def _prop_aggregate(types, h, c, budget, max_rounds) -> PropEquilibrium:
    def excess(total):
        return float(_prop_shares(total, h, c, budget).sum()) - total

    # sum of actions exceeds S for small S and falls short for large S
    hi = float(np.sum(c.inverse(budget / h)))
    lo = hi
    for _ in range(2000):
        if excess(lo) > 0:
            break
        lo *= 0.5
    else:
        raise ConvergenceError("no aggregate action with positive excess found")
    while excess(hi) > 0:
        hi *= 2.0
    total, info = brentq(excess, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps,
                         maxiter=max_rounds, full_output=True, disp=False)
    x = _prop_shares(total, h, c, budget)
    if not info.converged:
        raise ConvergenceError("aggregate search did not converge",
                               result=_prop_result(types, x, h, c, budget, info.iterations))
    return _prop_result(types, x, h, c, budget, info.iterations)


def _prop_result(types, x, h, c, budget, rounds) -> PropEquilibrium:
    gross = float(x.sum())
    return PropEquilibrium(types, x, gross, budget if gross > 0 else 0.0,
                           prop_foc_residuals(x, h, c, budget), rounds)


class ProportionalAIRS(NamedTuple):
    scheme: StepRewardScheme
    spend: float
    responses: np.ndarray


def airs_from_proportional(actions, h, c: CostFunction, budget: float,
                           foc_tol: float = 1e-6,
                           rel_tol: float = DEFAULT_REL_TOL) -> ProportionalAIRS:
    """Independent step scheme that reproduces a proportional equilibrium.

    Agents are ordered by action and charged the incremental-cost recurrence
    with their own multipliers. Each agent's best response under the step
    scheme is recomputed and must match the equilibrium action; the total
    paid must not exceed the budget.

    Raises:
        NotAnEquilibriumError: the actions fail the first-order conditions.
        ArithmeticError: one of the two guarantees fails numerically.
    """
    x = np.asarray(actions, dtype=float)
    h = np.asarray(h, dtype=float)
    residual = prop_foc_residuals(x, h, c, budget)
    scale = max(1.0, budget / max(float(x.sum()), np.finfo(float).tiny))
    if np.max(residual) > foc_tol * scale:
        raise NotAnEquilibriumError(
            f"first-order residual {np.max(residual):.3g} exceeds {foc_tol:g}")

    order = np.lexsort((-h, x))
    xs, hs = x[order], h[order]
    steps = np.diff(np.concatenate(([0.0], c.value(xs)))) * hs
    rewards = np.cumsum(np.maximum(steps, 0.0))
    keep = np.append(xs[1:] != xs[:-1], True) & (xs > 0)
    scheme = StepRewardScheme(xs[keep], rewards[keep])

    paid = float(scheme.reward(x).sum())
    if paid > budget * (1 + rel_tol):
        raise ArithmeticError(f"constructed scheme pays {paid} > budget {budget}")
    responses = np.array([best_response(scheme, hi, c, rel_tol)[0] for hi in h])
    if not np.allclose(responses, x, rtol=1e-9, atol=1e-12):
        raise ArithmeticError("constructed scheme does not preserve equilibrium actions")
    return ProportionalAIRS(scheme, paid, responses)


# --------------------------------------------------------------------------
# marginalisation of anonymous schemes
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MarginalRewardTable:
    """Expected reward of one agent on a grid of own actions."""

    grid: np.ndarray
    rewards: np.ndarray
    stderr: np.ndarray
    n_samples: int

    def reward(self, x):
        """Step lookup: value at the largest grid point not above ``x``."""
        idx = np.searchsorted(self.grid, x, side="right") - 1
        padded = np.concatenate(([0.0], self.rewards))
        out = padded[np.asarray(idx) + 1]
        return float(out) if np.ndim(x) == 0 else out

    __call__ = reward


def marginalize_scheme(reward_fn: Callable[[np.ndarray, int], float],
                       sampler: Callable[[np.random.Generator, int], np.ndarray],
                       grid: Sequence[float], n_agents: int, n_samples: int,
                       seed: int = 0, agent_index: int = 0) -> MarginalRewardTable:
    """Monte Carlo estimate of ``R'(x) = E[R_i(x, X_-i)]`` on ``grid``.

    ``reward_fn(profile, i)`` is the black-box reward of agent ``i``;
    ``sampler(rng, k)`` draws ``k`` opponent actions from the symmetric
    equilibrium strategy. Each sample reuses one opponent draw across the
    whole grid.
    """
    if n_samples < 2:
        raise ValueError("marginalisation needs at least two samples")
    if not 0 <= agent_index < n_agents:
        raise ValueError("agent_index out of range")
    grid = np.sort(np.asarray(grid, dtype=float))
    rng = np.random.default_rng(seed)
    draws = np.empty((n_samples, grid.size))
    profile = np.empty(n_agents)
    mask = np.arange(n_agents) != agent_index
    for s in range(n_samples):
        profile[mask] = sampler(rng, n_agents - 1)
        for j, xj in enumerate(grid):
            profile[agent_index] = xj
            draws[s, j] = reward_fn(profile, agent_index)
    mean = draws.mean(axis=0)
    stderr = draws.std(axis=0, ddof=1) / math.sqrt(n_samples)
    return MarginalRewardTable(grid, mean, stderr, n_samples)


def proportional_reward(budget: float) -> Callable[[np.ndarray, int], float]:
    """Black-box proportional reward ``B x_i / sum_j x_j`` (0 if all zero)."""

    def reward(profile, i):
        total = float(np.sum(profile))
        return budget * float(profile[i]) / total if total > 0 else 0.0

    return reward
