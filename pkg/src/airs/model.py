"""Domain types: market instances, cost families and step reward schemes.

Indices are 0-based throughout the package. Type ``k`` of an instance with
``m`` types is ``inst.types[k]``; segment boundaries live in ``{0, ..., m}``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence, Union

import numpy as np

from .exceptions import InstanceError

ArrayLike = Union[float, Sequence[float], np.ndarray]


@dataclass(frozen=True)
class Tolerances:
    """Float comparison tolerances shared by validation and the solvers."""

    rel: float = 1e-9
    roundtrip: float = 1e-12


DEFAULT_TOLERANCES = Tolerances()


def _frozen(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True).reshape(-1)
    arr.setflags(write=False)
    return arr


def _scalar_or_array(arr: np.ndarray, scalar: bool):
    return float(arr) if scalar else arr


# --------------------------------------------------------------------------
# cost functions
# --------------------------------------------------------------------------


class CostFunction:
    """Convex, strictly increasing cost ``c`` with ``c(0) = 0``.

    Subclasses implement the vectorised primitives; every method accepts a
    scalar or an array and returns the same kind.
    """

    family: str = ""

    def value(self, x: ArrayLike):
        raise NotImplementedError

    def inverse(self, v: ArrayLike):
        raise NotImplementedError

    def subderiv(self, x: ArrayLike):
        """Return ``(left, right)`` one-sided derivatives at ``x``.

        At the origin both entries are the right derivative.
        """
        raise NotImplementedError

    def deriv_inv(self, g: ArrayLike):
        """Return the closed interval ``{y >= 0 : g in [c'_-(y), c'_+(y)]}``.

        Marginal costs below ``c'_+(0)`` map to the point ``{0}``. Values
        above the supremum slope map to ``(inf, inf)``.
        """
        raise NotImplementedError

    @property
    def slope_at_zero(self) -> float:
        """Right derivative at the origin."""
        raise NotImplementedError

    @property
    def terminal_slope(self) -> float:
        """Supremum of the marginal cost; ``inf`` for strictly convex tails."""
        raise NotImplementedError

    @property
    def kinks(self) -> np.ndarray:
        """Positive points where the derivative jumps, ascending."""
        return np.zeros(0)

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class PowerCost(CostFunction):
    """``c(x) = scale * x ** exponent`` with ``exponent >= 1``."""

    exponent: float = 2.0
    scale: float = 1.0
    family = "power"

    def __post_init__(self):
        if not (math.isfinite(self.exponent) and self.exponent >= 1.0):
            raise InstanceError(f"power cost exponent must be >= 1, got {self.exponent}")
        if not (math.isfinite(self.scale) and self.scale > 0.0):
            raise InstanceError(f"power cost scale must be > 0, got {self.scale}")

    def value(self, x):
        scalar = np.ndim(x) == 0
        x = np.asarray(x, dtype=float)
        return _scalar_or_array(self.scale * np.power(x, self.exponent), scalar)

    def inverse(self, v):
        scalar = np.ndim(v) == 0
        v = np.asarray(v, dtype=float)
        return _scalar_or_array(np.power(v / self.scale, 1.0 / self.exponent), scalar)

    def _deriv(self, x):
        if self.exponent == 1.0:
            return np.full_like(x, self.scale)
        return self.scale * self.exponent * np.power(x, self.exponent - 1.0)

    def subderiv(self, x):
        scalar = np.ndim(x) == 0
        d = self._deriv(np.asarray(x, dtype=float))
        if scalar:
            return float(d), float(d)
        return d, d.copy()

    def deriv_inv(self, g):
        scalar = np.ndim(g) == 0
        g = np.asarray(g, dtype=float)
        if self.exponent == 1.0:
            lo = np.where(g <= self.scale, 0.0, np.inf)
            hi = np.where(g < self.scale, 0.0, np.inf)
        else:
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                y = np.power(np.maximum(g, 0.0) / (self.scale * self.exponent),
                             1.0 / (self.exponent - 1.0))
            lo = hi = y
        if scalar:
            return float(lo), float(hi)
        return np.asarray(lo, dtype=float), np.array(hi, dtype=float)

    @property
    def slope_at_zero(self) -> float:
        return self.scale if self.exponent == 1.0 else 0.0

    @property
    def terminal_slope(self) -> float:
        return self.scale if self.exponent == 1.0 else math.inf

    def to_dict(self) -> dict:
        return {"family": "power", "exponent": self.exponent, "scale": self.scale}


@dataclass(frozen=True, eq=False)
class PiecewiseLinearCost(CostFunction):
    """Convex polyline through the origin.

    ``slopes[i]`` applies on ``[knots[i-1], knots[i]]`` with an implicit knot
    at 0 and the last slope continuing to infinity, so
    ``len(knots) == len(slopes) - 1``.
    """

    slopes: np.ndarray
    knots: np.ndarray = field(default_factory=lambda: np.zeros(0))
    family = "piecewise_linear"

    def __post_init__(self):
        slopes = _frozen(self.slopes)
        knots = _frozen(self.knots)
        if slopes.size == 0:
            raise InstanceError("piecewise-linear cost needs at least one slope")
        if knots.size != slopes.size - 1:
            raise InstanceError("piecewise-linear cost needs len(knots) == len(slopes) - 1")
        if not np.all(np.isfinite(slopes)) or not np.all(np.isfinite(knots)):
            raise InstanceError("piecewise-linear cost parameters must be finite")
        if slopes[0] <= 0:
            raise InstanceError("piecewise-linear slopes must be positive")
        if np.any(np.diff(slopes) < 0):
            raise InstanceError("piecewise-linear slopes must be nondecreasing (convexity)")
        if knots.size and (knots[0] <= 0 or np.any(np.diff(knots) <= 0)):
            raise InstanceError("piecewise-linear knots must be positive and strictly increasing")
        starts = np.concatenate(([0.0], knots))
        # cost accumulated at the start of each piece
        base = np.concatenate(([0.0], np.cumsum(slopes[:-1] * np.diff(starts))))
        object.__setattr__(self, "slopes", slopes)
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "_starts", starts)
        object.__setattr__(self, "_base", base)
        object.__setattr__(self, "_starts_ext", np.concatenate((starts, [np.inf])))

    def __eq__(self, other):
        return (isinstance(other, PiecewiseLinearCost)
                and np.array_equal(self.slopes, other.slopes)
                and np.array_equal(self.knots, other.knots))

    def __hash__(self):
        return hash((tuple(self.slopes), tuple(self.knots)))

    def value(self, x):
        scalar = np.ndim(x) == 0
        x = np.asarray(x, dtype=float)
        i = np.searchsorted(self.knots, x, side="right")
        out = self._base[i] + self.slopes[i] * (x - self._starts[i])
        return _scalar_or_array(out, scalar)

    def inverse(self, v):
        scalar = np.ndim(v) == 0
        v = np.asarray(v, dtype=float)
        i = np.searchsorted(self._base[1:], v, side="right")
        out = self._starts[i] + (v - self._base[i]) / self.slopes[i]
        return _scalar_or_array(out, scalar)

    def subderiv(self, x):
        scalar = np.ndim(x) == 0
        x = np.asarray(x, dtype=float)
        right = self.slopes[np.searchsorted(self.knots, x, side="right")]
        left = self.slopes[np.searchsorted(self.knots, x, side="left")]
        left = np.where(x <= 0.0, right, left)
        if scalar:
            return float(left), float(right)
        return np.asarray(left, dtype=float), np.asarray(right, dtype=float)

    def deriv_inv(self, g):
        scalar = np.ndim(g) == 0
        g = np.asarray(g, dtype=float)
        lo = self._starts_ext[np.searchsorted(self.slopes, g, side="left")]
        hi = self._starts_ext[np.searchsorted(self.slopes, g, side="right")]
        if scalar:
            return float(lo), float(hi)
        return np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)

    @property
    def slope_at_zero(self) -> float:
        return float(self.slopes[0])

    @property
    def kinks(self) -> np.ndarray:
        return self.knots

    @property
    def terminal_slope(self) -> float:
        return float(self.slopes[-1])

    def to_dict(self) -> dict:
        return {"family": "piecewise_linear", "slopes": self.slopes.tolist(),
                "knots": self.knots.tolist()}


def cost_eval(c: CostFunction, x):
    return c.value(x)


def cost_subderiv(c: CostFunction, x):
    return c.subderiv(x)


def cost_inv(c: CostFunction, v):
    return c.inverse(v)


def cost_deriv_inv(c: CostFunction, g):
    return c.deriv_inv(g)


def cost_from_dict(spec: Mapping[str, Any]) -> CostFunction:
    if isinstance(spec, CostFunction):
        return spec
    if not isinstance(spec, Mapping):
        raise InstanceError("cost must be an object with a 'family' field")
    spec = dict(spec)
    family = spec.pop("family", None)
    if family == "power":
        _reject_unknown(spec, {"exponent", "scale"}, "power cost")
        return PowerCost(float(spec.get("exponent", 2.0)), float(spec.get("scale", 1.0)))
    if family == "piecewise_linear":
        _reject_unknown(spec, {"slopes", "knots"}, "piecewise-linear cost")
        if "slopes" not in spec:
            raise InstanceError("piecewise-linear cost requires 'slopes'")
        return PiecewiseLinearCost(np.asarray(spec["slopes"], dtype=float),
                                   np.asarray(spec.get("knots", []), dtype=float))
    raise InstanceError(f"unknown cost family {family!r}")


def _reject_unknown(spec: Mapping, allowed: set, what: str) -> None:
    unknown = set(spec) - allowed
    if unknown:
        raise InstanceError(f"unknown field(s) in {what}: {sorted(unknown)}")


# --------------------------------------------------------------------------
# instances
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Instance:
    """A market of heterogeneous producers facing a common reward scheme.

    ``weights[k]`` is the expected number of agents of type ``types[k]`` and
    producing quality ``x`` costs such an agent ``cost.value(x) * h_values[k]``.
    """

    types: np.ndarray
    weights: np.ndarray
    h_values: np.ndarray
    cost: CostFunction
    budget: float

    def __post_init__(self):
        types, weights, h = _frozen(self.types), _frozen(self.weights), _frozen(self.h_values)
        if not (types.size == weights.size == h.size) or types.size == 0:
            raise InstanceError("types, weights and h must be nonempty and of equal length")
        for name, arr in (("types", types), ("weights", weights), ("h", h)):
            if not np.all(np.isfinite(arr)):
                raise InstanceError(f"{name} must be finite")
        if np.any(np.diff(types) <= 0):
            raise InstanceError("types must be strictly increasing")
        if np.any(weights <= 0):
            raise InstanceError("weights must be positive")
        if np.any(h <= 0):
            raise InstanceError("h must be positive")
        if np.any(np.diff(h) >= 0):
            raise InstanceError("h not decreasing")
        if not isinstance(self.cost, CostFunction):
            raise InstanceError("cost must be a CostFunction")
        budget = float(self.budget)
        if not (math.isfinite(budget) and budget > 0):
            raise InstanceError(f"budget must be positive, got {self.budget}")
        object.__setattr__(self, "types", types)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "h_values", h)
        object.__setattr__(self, "budget", budget)

    @property
    def m(self) -> int:
        return int(self.types.size)

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    def with_budget(self, budget: float) -> "Instance":
        return Instance(self.types, self.weights, self.h_values, self.cost, budget)

    def to_dict(self) -> dict:
        return {"types": self.types.tolist(), "weights": self.weights.tolist(),
                "h": self.h_values.tolist(), "cost": self.cost.to_dict(),
                "budget": self.budget}


INSTANCE_FIELDS = {"types", "weights", "h", "cost", "budget"}


def resolve_h(h, types: np.ndarray) -> np.ndarray:
    """Turn an ``h`` specification into per-type multipliers."""
    if isinstance(h, Mapping):
        if h.get("family") == "reciprocal" and set(h) == {"family"}:
            if np.any(types <= 0):
                raise InstanceError("reciprocal h requires positive types")
            return 1.0 / types
        raise InstanceError(f"unsupported h specification {dict(h)!r}")
    if callable(h):
        return np.array([float(h(t)) for t in types])
    return np.asarray(h, dtype=float).reshape(-1)


def validate_instance(data: Mapping[str, Any] | None = None, *,
                      tolerances: Tolerances = DEFAULT_TOLERANCES, **fields) -> Instance:
    """Normalise raw instance data and return a validated :class:`Instance`.

    Types are sorted ascending with weights and ``h`` permuted alongside.
    Duplicate types are merged by summing their weights; their ``h`` values
    must agree.
    """
    raw = dict(data or {})
    raw.update(fields)
    _reject_unknown(raw, INSTANCE_FIELDS, "instance")
    missing = INSTANCE_FIELDS - set(raw)
    if missing:
        raise InstanceError(f"missing instance field(s): {sorted(missing)}")

    try:
        types = np.asarray(raw["types"], dtype=float).reshape(-1)
        weights = np.asarray(raw["weights"], dtype=float).reshape(-1)
    except (TypeError, ValueError) as exc:
        raise InstanceError(f"types and weights must be numeric arrays: {exc}") from None
    h = resolve_h(raw["h"], types)
    if not (types.size == weights.size == h.size):
        raise InstanceError("types, weights and h must have equal length")
    if types.size == 0:
        raise InstanceError("instance needs at least one type")

    order = np.argsort(types, kind="stable")
    types, weights, h = types[order], weights[order], h[order]
    uniq, start = np.unique(types, return_index=True)
    if uniq.size < types.size:
        ends = np.append(start[1:], types.size)
        for s, e in zip(start, ends):
            if not np.allclose(h[s:e], h[s], rtol=tolerances.rel, atol=0.0):
                raise InstanceError(f"conflicting h values for duplicate type {types[s]}")
        weights = np.add.reduceat(weights, start)
        h = h[start]
        types = uniq

    try:
        budget = float(raw["budget"])
    except (TypeError, ValueError):
        raise InstanceError("budget must be a number") from None
    return Instance(types, weights, h, cost_from_dict(raw["cost"]), budget)


def load_instance(path: str | Path) -> Instance:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InstanceError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise InstanceError(f"{path}: instance file must hold a JSON object")
    return validate_instance(data)


AGENT_FIELDS = {"agent_types", "h", "cost", "budget"}


@dataclass(frozen=True, eq=False)
class AgentProfile:
    """Explicitly listed agents for full-information equilibrium computations."""

    agent_types: np.ndarray
    h_values: np.ndarray
    cost: CostFunction
    budget: float

    @property
    def n(self) -> int:
        return int(self.agent_types.size)

    def to_dict(self) -> dict:
        return {"agent_types": self.agent_types.tolist(), "h": self.h_values.tolist(),
                "cost": self.cost.to_dict(), "budget": self.budget}

    @classmethod
    def from_instance(cls, inst: Instance) -> "AgentProfile":
        """One agent per unit of weight; weights must be whole numbers."""
        counts = np.rint(inst.weights)
        if not np.allclose(counts, inst.weights, rtol=0, atol=1e-9):
            raise InstanceError("weights must be whole numbers to list agents")
        counts = counts.astype(int)
        return cls(_frozen(np.repeat(inst.types, counts)), _frozen(np.repeat(inst.h_values, counts)),
                   inst.cost, inst.budget)


def validate_agents(data: Mapping[str, Any]) -> AgentProfile:
    """Validate an agent file: ``agent_types``, ``h``, ``cost`` and ``budget``."""
    raw = dict(data)
    _reject_unknown(raw, AGENT_FIELDS, "agent profile")
    missing = AGENT_FIELDS - set(raw)
    if missing:
        raise InstanceError(f"missing agent field(s): {sorted(missing)}")
    try:
        types = np.asarray(raw["agent_types"], dtype=float).reshape(-1)
        budget = float(raw["budget"])
    except (TypeError, ValueError) as exc:
        raise InstanceError(f"agent types and budget must be numeric: {exc}") from None
    h = resolve_h(raw["h"], types)
    if types.size < 2 or h.size != types.size:
        raise InstanceError("need at least two agents with one h value each")
    if not (np.all(np.isfinite(types)) and np.all(np.isfinite(h)) and np.all(h > 0)):
        raise InstanceError("agent types must be finite and h positive")
    if not (math.isfinite(budget) and budget >= 0):
        raise InstanceError(f"budget must be nonnegative, got {budget}")
    return AgentProfile(_frozen(types), _frozen(h), cost_from_dict(raw["cost"]), budget)


def load_agents(path: str | Path) -> AgentProfile:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InstanceError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise InstanceError(f"{path}: agent file must hold a JSON object")
    return validate_agents(data)


def compute_alpha(inst: Instance) -> np.ndarray:
    """Effective budget weight of each type's action in the reduced program.

    ``alpha_k = h_k * F_k - h_{k+1} * F_{k+1}`` with ``F_k`` the weight mass
    of types ``k`` and above and ``h_{m+1} = 0``. Evaluated in the equivalent
    cancellation-free form ``h_k f_k + (h_k - h_{k+1}) F_{k+1}``.
    """
    f, h = inst.weights, inst.h_values
    tail = np.cumsum(f[::-1])[::-1]
    tail_next = np.append(tail[1:], 0.0)
    h_next = np.append(h[1:], 0.0)
    return h * f + (h - h_next) * tail_next


# --------------------------------------------------------------------------
# reward schemes
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class StepRewardScheme:
    """Right-continuous nondecreasing step reward.

    Pays 0 on ``[0, breakpoints[0])`` and ``rewards[j]`` on
    ``[breakpoints[j], breakpoints[j+1])``.
    """

    breakpoints: np.ndarray
    rewards: np.ndarray

    def __post_init__(self):
        bp, rw = _frozen(self.breakpoints), _frozen(self.rewards)
        if bp.size != rw.size:
            raise InstanceError("breakpoints and rewards must have equal length")
        if np.any(np.diff(bp) < 0) or np.any(bp < 0):
            raise InstanceError("breakpoints must be nonnegative and nondecreasing")
        if np.any(rw < 0) or np.any(np.diff(rw) < 0):
            raise InstanceError("rewards must be nonnegative and nondecreasing")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "rewards", rw)

    def __len__(self) -> int:
        return int(self.breakpoints.size)

    def __call__(self, x):
        return self.reward(x)

    def reward(self, x):
        scalar = np.ndim(x) == 0
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.breakpoints, x, side="right") - 1
        padded = np.concatenate(([0.0], self.rewards))
        return _scalar_or_array(padded[idx + 1], scalar)

    @classmethod
    def zero(cls) -> "StepRewardScheme":
        return cls(np.zeros(0), np.zeros(0))

    def to_dict(self) -> dict:
        return {"breakpoints": self.breakpoints.tolist(), "rewards": self.rewards.tolist()}


RewardFunction = Callable[[float], float]
