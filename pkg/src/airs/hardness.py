"""General Cost Problem: subset-sum reduction and exhaustive checking.

Each agent's cost is 0 up to quality 1, equal to the agent type on ``(1, 1 + t]``
and infeasible beyond, so every agent either stays at quality 1 or moves to
``1 + t``. Agents of equal type are indistinguishable to an anonymous scheme
and, breaking ties towards higher quality, always act alike.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .model import StepRewardScheme

MAX_AGENTS = 20


class CostValue(NamedTuple):
    feasible: bool
    value: float | None


def general_cost(x: float, t: float) -> CostValue:
    """Three-branch cost of producing quality ``x`` at type ``t``."""
    if x < 0:
        raise ValueError("quality must be nonnegative")
    if x <= 1:
        return CostValue(True, 0.0)
    if x <= 1 + t:
        return CostValue(True, float(t))
    return CostValue(False, None)


@dataclass(frozen=True)
class GeneralCostInstance:
    types: tuple[int, ...]
    budget: float
    target: float

    def __post_init__(self):
        if any(t <= 0 for t in self.types):
            raise ValueError("agent types must be positive")
        if self.budget < 0 or self.target < 0:
            raise ValueError("budget and target must be nonnegative")

    @property
    def n(self) -> int:
        return len(self.types)

    def to_dict(self) -> dict:
        return {"types": list(self.types), "budget": self.budget, "target": self.target}


class GeneralCostResult(NamedTuple):
    gross: float
    high_types: tuple[int, ...]
    scheme: StepRewardScheme


def _positive_ints(values: Sequence[int], what: str) -> tuple[int, ...]:
    out = []
    for v in values:
        if int(v) != v or v <= 0:
            raise ValueError(f"{what} must be positive integers, got {v!r}")
        out.append(int(v))
    return tuple(out)


def reduce_subset_sum(weights: Sequence[int], target: int) -> GeneralCostInstance:
    """Map a subset-sum instance to the General Cost Problem.

    The agents' types are the weights, the budget is the target sum and the
    gross product to reach is the target plus the number of agents.
    """
    w = _positive_ints(weights, "weights")
    (W,) = _positive_ints([target], "target")
    return GeneralCostInstance(w, float(W), float(W + len(w)))


def _closed_sums(types: Sequence[int]):
    """Payments over all type-closed agent sets, with their group masks."""
    groups = sorted(Counter(types).items())
    sums = np.zeros(1, dtype=np.int64)
    for value, count in groups:
        sums = np.concatenate((sums, sums + value * count))
    return sums, [v for v, _ in groups]


def witness_scheme(high_types: Sequence[int]) -> StepRewardScheme:
    """Step scheme paying ``t`` from quality ``1 + t`` for each listed type."""
    e = np.array(sorted(set(high_types)), dtype=float)
    return StepRewardScheme(1.0 + e, e)


def brute_force_general_cost(instance: GeneralCostInstance,
                             budget: float | None = None) -> GeneralCostResult:
    """Best gross product within ``budget`` over every deterministic step scheme.

    Enumerates the sets of agents taking the high action, restricted to sets
    closed under type equality; a set is affordable iff its types sum to at
    most the budget (each chosen agent is paid exactly its cost).
    """
    if instance.n > MAX_AGENTS:
        raise ValueError(f"exhaustive search limited to {MAX_AGENTS} agents, got {instance.n}")
    budget = instance.budget if budget is None else budget
    sums, values = _closed_sums(instance.types)
    feasible = np.flatnonzero(sums <= budget)
    best = int(feasible[np.argmax(sums[feasible])])
    high = tuple(v for j, v in enumerate(values) if best >> j & 1)
    return GeneralCostResult(float(instance.n + sums[best]), high, witness_scheme(high))


def general_cost_response(scheme: StepRewardScheme, t: float) -> float:
    """Best quality for type ``t`` under ``scheme``; ties go to the higher quality."""
    candidates = [1.0] + [b for b in scheme.breakpoints.tolist() if 1 < b <= 1 + t]
    utilities = [scheme.reward(x) - general_cost(x, t).value for x in candidates]
    best = max(utilities)
    return max(x for x, u in zip(candidates, utilities) if u >= best - 1e-12)


def subset_sums(weights: Sequence[int]) -> set[int]:
    """All sums reachable by subsets of ``weights`` (bitset dynamic programme)."""
    reach = 1
    for w in weights:
        reach |= reach << int(w)
    return {s for s in range(reach.bit_length()) if reach >> s & 1}


def check_reduction(weights: Sequence[int], target: int,
                    search_cap: int = MAX_AGENTS) -> tuple[bool, bool]:
    """Decide both sides of the reduction independently.

    Returns ``(subset_sum_solvable, gross_target_reachable)``.
    """
    if search_cap > MAX_AGENTS:
        raise ValueError(f"search_cap may not exceed {MAX_AGENTS}")
    if len(weights) > search_cap:
        raise ValueError(f"{len(weights)} weights exceed the search cap {search_cap}")
    instance = reduce_subset_sum(weights, target)
    solvable = int(target) in subset_sums(instance.types)
    reachable = brute_force_general_cost(instance).gross >= instance.target
    return solvable, reachable


def check_reduction_sweep(weights: Sequence[int], targets: Sequence[int]):
    """:func:`check_reduction` for many targets, sharing both enumerations.

    Returns two boolean arrays aligned with ``targets``.
    """
    w = _positive_ints(weights, "weights")
    if len(w) > MAX_AGENTS:
        raise ValueError(f"exhaustive search limited to {MAX_AGENTS} agents")
    targets = np.asarray(targets, dtype=np.int64)
    reachable_sums = subset_sums(w)
    solvable = np.array([int(W) in reachable_sums for W in targets], dtype=bool)
    closed = np.unique(_closed_sums(w)[0])
    # best affordable closed payment for budget W, compared against W itself
    idx = np.searchsorted(closed, targets, side="right") - 1
    reachable = closed[idx] + len(w) >= targets + len(w)
    return solvable, reachable
