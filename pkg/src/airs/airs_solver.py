"""Optimal anonymous independent reward scheme via ironing and dual bisection.

The reduced program maximises ``sum_k f_k x_k`` subject to
``sum_k alpha_k c(x_k) <= B`` and ``0 <= x_1 <= ... <= x_m``. Its KKT system
pins every ironed segment of types to a common action ``x`` with
``lam * c'(x) = segment average``; the multiplier ``lam`` is then found by
bisection on the (monotone) budget spent.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .exceptions import ConvergenceError, InstanceError
from .model import CostFunction, Instance, StepRewardScheme, compute_alpha

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 200


@dataclass(frozen=True, eq=False)
class SegmentStructure:
    """Ironed partition of the types into consecutive segments.

    Segment ``j`` covers types ``boundaries[j]`` up to but excluding
    ``boundaries[j + 1]``; ``boundaries`` starts at 0 and ends at ``m``.
    """

    boundaries: np.ndarray
    averages: np.ndarray
    weights: np.ndarray
    masses: np.ndarray

    @property
    def n_segments(self) -> int:
        return int(self.averages.size)

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.boundaries)

    def expand(self, per_segment: np.ndarray) -> np.ndarray:
        """Broadcast one value per segment to one value per type."""
        return np.repeat(per_segment, self.lengths)


@dataclass(frozen=True)
class KKTReport:
    """Violation magnitudes of the optimality conditions at a candidate point."""

    stationarity: float
    subgradient: float
    budget_slackness: float
    order_slackness: float
    budget_feasibility: float
    order_feasibility: float
    dual_feasibility: float
    lambda_positive: bool
    left_variant: dict = field(default_factory=dict)
    right_variant: dict = field(default_factory=dict)

    NUMERIC = ("stationarity", "subgradient", "budget_slackness", "order_slackness",
               "budget_feasibility", "order_feasibility", "dual_feasibility")

    def max_violation(self) -> float:
        return max(getattr(self, name) for name in self.NUMERIC)

    def ok(self, tol: float) -> bool:
        return self.lambda_positive and self.max_violation() <= tol

    def to_dict(self) -> dict:
        out = {name: getattr(self, name) for name in self.NUMERIC}
        out["lambda_positive"] = self.lambda_positive
        out["left_variant"] = dict(self.left_variant)
        out["right_variant"] = dict(self.right_variant)
        return out


@dataclass(frozen=True, eq=False)
class AirsSolution:
    actions: np.ndarray
    lam: float
    q: int
    spend: float
    gross: float
    kkt: KKTReport
    scheme: StepRewardScheme
    iterations: int
    segments: SegmentStructure

    def to_dict(self) -> dict:
        return {
            "actions": self.actions.tolist(),
            "lambda": self.lam,
            "q": self.q,
            "spend": self.spend,
            "gross": self.gross,
            "scheme": self.scheme.to_dict(),
            "kkt_residuals": self.kkt.to_dict(),
            "iterations": self.iterations,
        }


# --------------------------------------------------------------------------
# segment averages
# --------------------------------------------------------------------------


def avg(f, alpha, l: int, k: int) -> float:
    """Ratio of weight mass to alpha mass over types ``l .. k-1``."""
    if not 0 <= l < k <= len(f):
        raise IndexError(f"avg needs 0 <= l < k <= m, got l={l}, k={k}")
    return float(np.sum(f[l:k]) / np.sum(alpha[l:k]))


class PrefixAverager:
    """O(1) ``avg`` queries after an O(m) prefix-sum pass."""

    def __init__(self, f, alpha):
        self._F = np.concatenate(([0.0], np.cumsum(f, dtype=float)))
        self._A = np.concatenate(([0.0], np.cumsum(alpha, dtype=float)))

    def __call__(self, l: int, k: int) -> float:
        if not 0 <= l < k < self._F.size:
            raise IndexError(f"avg needs 0 <= l < k <= m, got l={l}, k={k}")
        return float((self._F[k] - self._F[l]) / (self._A[k] - self._A[l]))


def gamma_bruteforce(f, alpha, k: int) -> int:
    """Largest ``l < k`` maximising ``avg(l, k)``, by scanning every ``l``.

    Quadratic when chained over all boundaries; reserved for tests.
    """
    if not 1 <= k <= len(f):
        raise IndexError(f"gamma needs 1 <= k <= m, got {k}")
    f_tail = np.cumsum(np.asarray(f[:k], dtype=float)[::-1])[::-1]
    a_tail = np.cumsum(np.asarray(alpha[:k], dtype=float)[::-1])[::-1]
    ratios = f_tail / a_tail
    best = ratios.max()
    return int(np.flatnonzero(ratios == best)[-1])


def gamma_chain(f, alpha) -> np.ndarray:
    """Boundaries ``{gamma^(d)(m), ..., gamma(m), m}`` by repeated brute force."""
    chain = [len(f)]
    while chain[-1] > 0:
        chain.append(gamma_bruteforce(f, alpha, chain[-1]))
    return np.array(chain[::-1], dtype=np.int64)


def _stack_pass_py(f: np.ndarray, alpha: np.ndarray):
    mass, weight, end = [], [], []
    for k, (fk, ak) in enumerate(zip(f.tolist(), alpha.tolist())):
        # pop while the top segment's average strictly exceeds the candidate's
        while mass and mass[-1] * ak > fk * weight[-1]:
            fk += mass.pop()
            ak += weight.pop()
            end.pop()
        mass.append(fk)
        weight.append(ak)
        end.append(k + 1)
    return np.array(end, dtype=np.int64), np.array(mass), np.array(weight)


try:  # optional acceleration; identical arithmetic to the Python pass
    import numba

    @numba.njit(cache=True)
    def _stack_pass_nb(f, alpha):
        m = f.size
        mass = np.empty(m)
        weight = np.empty(m)
        end = np.empty(m, dtype=np.int64)
        top = 0
        for k in range(m):
            fk = f[k]
            ak = alpha[k]
            while top > 0 and mass[top - 1] * ak > fk * weight[top - 1]:
                top -= 1
                fk += mass[top]
                ak += weight[top]
            mass[top] = fk
            weight[top] = ak
            end[top] = k + 1
            top += 1
        return end[:top].copy(), mass[:top].copy(), weight[:top].copy()

except ImportError:  # pragma: no cover - exercised only without numba
    _stack_pass_nb = None


def compute_segments(f, alpha, *, accelerate: bool = True) -> SegmentStructure:
    """Iron the ratio sequence ``f_k / alpha_k`` into nondecreasing segments.

    Stack pass in amortised O(m): each type is pushed and popped at most once.
    Merging requires a strictly larger average on the stack, so exactly tied
    neighbours stay separate (matching the largest-maximiser rule of
    :func:`gamma_bruteforce`).
    """
    f = np.ascontiguousarray(f, dtype=float)
    alpha = np.ascontiguousarray(alpha, dtype=float)
    if f.shape != alpha.shape or f.ndim != 1 or f.size == 0:
        raise ValueError("f and alpha must be nonempty 1-d arrays of equal length")
    if np.any(alpha <= 0):
        raise ValueError("alpha must be positive")
    if accelerate and _stack_pass_nb is not None:
        end, mass, weight = _stack_pass_nb(f, alpha)
    else:
        end, mass, weight = _stack_pass_py(f, alpha)
    boundaries = np.concatenate(([0], end))
    return SegmentStructure(boundaries, mass / weight, weight, mass)


# --------------------------------------------------------------------------
# primal recovery for a fixed multiplier
# --------------------------------------------------------------------------


def _segment_actions(cost: CostFunction, averages: np.ndarray, lam: float,
                     cap: Optional[float] = None) -> np.ndarray:
    active = averages > lam * cost.slope_at_zero
    with np.errstate(divide="ignore", invalid="ignore"):
        lower, _ = cost.deriv_inv(averages / lam)
    x = np.where(active, lower, 0.0)
    if cap is not None:
        x = np.minimum(x, cap)
    return x


def actions_for_lambda(inst: Instance, segments: SegmentStructure, lam: float,
                       cap: Optional[float] = None) -> np.ndarray:
    """Per-type actions solving the KKT system (budget aside) at multiplier ``lam``.

    Segments whose average does not exceed ``lam * c'_+(0)`` stay at zero;
    every other segment takes the lower end of ``(c')^{-1}(average / lam)``.
    ``cap`` bounds the result (the solver passes the largest affordable
    top-type action).
    """
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    return segments.expand(_segment_actions(inst.cost, segments.averages, lam, cap))


def spend(inst: Instance, x, alpha: Optional[np.ndarray] = None) -> float:
    """Budget consumed by the cheapest scheme implementing actions ``x``."""
    if alpha is None:
        alpha = compute_alpha(inst)
    return float(np.dot(alpha, inst.cost.value(np.asarray(x, dtype=float))))


# --------------------------------------------------------------------------
# the solver
# --------------------------------------------------------------------------


def solve_airs(inst: Instance, tol: float = DEFAULT_TOL,
               max_iter: int = DEFAULT_MAX_ITER) -> AirsSolution:
    """Compute the budget-optimal anonymous independent reward scheme.

    Args:
        inst: validated instance.
        tol: relative tolerance, used both for the budget match
            (``|spend - B| <= tol * B``) and for the multiplier bracket
            (width below ``tol`` times its initial width).
        max_iter: bisection step limit.

    Returns:
        The optimal actions, multiplier, step scheme and KKT report.

    Raises:
        ConvergenceError: the bracket did not shrink within ``max_iter`` steps.
    """
    if not 0 < tol < 1:
        raise ValueError(f"tol must lie in (0, 1), got {tol}")
    cost, budget = inst.cost, inst.budget
    alpha = compute_alpha(inst)
    seg = compute_segments(inst.weights, alpha)
    seg_w, seg_avg = seg.weights, seg.averages

    # x_m is bounded by the budget spent on the top type alone
    x_cap = float(cost.inverse(budget / alpha[-1]))
    x_floor = float(cost.inverse(budget / alpha.sum()))
    top_avg = float(seg_avg[-1])
    lam_lo = top_avg / cost.subderiv(x_cap)[1]
    lam_hi = top_avg / cost.subderiv(x_floor)[0]

    def evaluate(lam):
        xs = _segment_actions(cost, seg_avg, lam, cap=x_cap)
        return xs, float(np.dot(seg_w, cost.value(xs)))

    # widen until the bracket straddles the budget; covers lam_lo == lam_hi
    pad = 4 * np.finfo(float).eps * lam_hi
    x_lo, s_lo = evaluate(lam_lo)
    while s_lo < budget * (1 - tol):
        lam_lo = max(lam_lo - pad, 0.5 * lam_lo)
        pad *= 4.0
        x_lo, s_lo = evaluate(lam_lo)
    pad = 4 * np.finfo(float).eps * lam_hi
    x_hi, s_hi = evaluate(lam_hi)
    while s_hi > budget * (1 + tol):
        lam_hi += pad
        pad *= 4.0
        x_hi, s_hi = evaluate(lam_hi)

    width0 = lam_hi - lam_lo
    iterations = 0
    lam, xs = None, None
    for lam_try, x_try, s_try in ((lam_lo, x_lo, s_lo), (lam_hi, x_hi, s_hi)):
        if abs(s_try - budget) <= tol * budget:
            lam, xs = lam_try, x_try
            break

    while xs is None:
        resolution = max(tol * width0, 2 * np.finfo(float).eps * lam_hi)
        if lam_hi - lam_lo <= resolution:
            # spend jumps across the budget here (flat marginal cost); any
            # blend of the two bracketing profiles is KKT-consistent
            lam = 0.5 * (lam_lo + lam_hi)
            xs = _blend_to_budget(cost, seg_w, x_hi, x_lo, budget)
            logger.debug("budget matched by blending at lambda=%g", lam)
            break
        if iterations >= max_iter:
            raise ConvergenceError(
                f"bisection did not converge in {max_iter} steps "
                f"(bracket [{lam_lo}, {lam_hi}])")
        iterations += 1
        mid = 0.5 * (lam_lo + lam_hi)
        x_mid, s_mid = evaluate(mid)
        if abs(s_mid - budget) <= tol * budget:
            lam, xs = mid, x_mid
        elif s_mid > budget:
            lam_lo, x_lo = mid, x_mid
        else:
            lam_hi, x_hi = mid, x_mid

    actions = seg.expand(xs)
    kkt = kkt_residuals(inst, actions, lam, alpha=alpha, segments=seg)
    positive = np.flatnonzero(actions > 0)
    q = int(positive[0]) if positive.size else inst.m
    return AirsSolution(
        actions=actions,
        lam=float(lam),
        q=q,
        spend=spend(inst, actions, alpha),
        gross=float(np.dot(inst.weights, actions)),
        kkt=kkt,
        scheme=build_scheme(inst, actions),
        iterations=iterations,
        segments=seg,
    )


def _blend_to_budget(cost, seg_w, x_under, x_over, budget) -> np.ndarray:
    delta = x_over - x_under

    def excess(theta):
        return float(np.dot(seg_w, cost.value(x_under + theta * delta))) - budget

    if excess(0.0) >= 0:
        return x_under
    if excess(1.0) <= 0:
        return x_over
    theta = brentq(excess, 0.0, 1.0, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return x_under + theta * delta


# --------------------------------------------------------------------------
# scheme construction and certification
# --------------------------------------------------------------------------


def build_scheme(inst: Instance, x) -> StepRewardScheme:
    """Cheapest step scheme under which type ``k`` best-responds with ``x[k]``.

    Each step adds the incremental cost of the next action at that type's
    multiplier: ``R(x_k) = R(x_{k-1}) + (c(x_k) - c(x_{k-1})) h_k``.
    Repeated actions share one breakpoint and zero actions carry none.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (inst.m,):
        raise InstanceError(f"expected {inst.m} actions, got shape {x.shape}")
    if np.any(x < 0) or np.any(np.diff(x) < 0):
        raise InstanceError("actions must be nonnegative and nondecreasing")
    cx = inst.cost.value(x)
    steps = np.diff(np.concatenate(([0.0], cx))) * inst.h_values
    rewards = np.cumsum(np.maximum(steps, 0.0))
    keep = np.append(x[1:] != x[:-1], True) & (x > 0)
    return StepRewardScheme(x[keep], rewards[keep])


def scheme_rewards_closed_form(inst: Instance, x) -> np.ndarray:
    """Per-type rewards from the unrolled recurrence (independent of ``build_scheme``)."""
    cx = inst.cost.value(np.asarray(x, dtype=float))
    h = inst.h_values
    rents = np.concatenate(([0.0], np.cumsum(cx[:-1] * (h[:-1] - h[1:]))))
    return cx * h + rents


def kkt_residuals(inst: Instance, actions, lam: float, *,
                  alpha: Optional[np.ndarray] = None,
                  segments: Optional[SegmentStructure] = None) -> KKTReport:
    """Reconstruct the order multipliers and measure every KKT violation.

    The subgradient used at ``x_k`` is the segment target ``average / lam``
    when ``(c')^{-1}`` of it contains ``x_k``, and otherwise that target
    clipped into ``[c'_-(x_k), c'_+(x_k)]``; the multipliers of the order
    constraints then follow bottom-up from stationarity with the top one zero.
    Variants using the pure left or right derivative are reported alongside.
    """
    x = np.asarray(actions, dtype=float)
    f, budget = inst.weights, inst.budget
    if alpha is None:
        alpha = compute_alpha(inst)
    if segments is None:
        segments = compute_segments(f, alpha)
    left, right = inst.cost.subderiv(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        target = segments.expand(segments.averages) / lam if lam > 0 else np.full_like(x, np.inf)
    # keep the segment target where inverting it reproduces x in floating point:
    # with c'(0) = 0 a tiny active action can underflow to exactly zero
    t_lo, t_hi = inst.cost.deriv_inv(target)
    consistent = (t_lo <= x) & (x <= t_hi)
    g = np.where(consistent, target, np.clip(target, left, right))

    def multipliers(gk):
        terms = lam * alpha * gk - f
        return np.cumsum(terms[::-1])[::-1]

    prev = np.concatenate(([0.0], x[:-1]))
    gaps = x - prev
    spent = float(np.dot(alpha, inst.cost.value(x)))

    def summary(mu):
        return {"order_slackness": float(np.max(np.abs(mu * gaps))),
                "dual_feasibility": float(max(0.0, -mu.min()))}

    mu = multipliers(g)
    mu_next = np.append(mu[1:], 0.0)
    station = f - lam * alpha * g + mu - mu_next
    return KKTReport(
        stationarity=float(np.max(np.abs(station))),
        subgradient=float(np.max(np.where(
            consistent, 0.0, np.maximum(left - g, 0.0) + np.maximum(g - right, 0.0)))),
        budget_slackness=float(abs(lam * (budget - spent))),
        order_slackness=summary(mu)["order_slackness"],
        budget_feasibility=float(max(0.0, spent - budget)),
        order_feasibility=float(max(0.0, -gaps.min())),
        dual_feasibility=float(max(0.0, -mu.min(), -lam)),
        lambda_positive=bool(lam > 0),
        left_variant=summary(multipliers(left)),
        right_variant=summary(multipliers(right)),
    )
