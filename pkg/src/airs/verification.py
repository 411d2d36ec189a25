"""Cross-checks of a solved instance against invariants and the naive oracles."""

from __future__ import annotations

from typing import Callable, NamedTuple

import numpy as np

from .airs_solver import (AirsSolution, actions_for_lambda, gamma_chain,
                          scheme_rewards_closed_form, solve_airs, spend)
from .exceptions import ConvergenceError, UnboundedResponseError
from .model import Instance, compute_alpha
from .oracles import GridSpec, alpha_direct, brute_force_best_action, brute_force_p2, default_grid
from .schemes import best_response, solve_linear

GAMMA_CHAIN_MAX_M = 2000
ORACLE_STEP = 1e-3
ORACLE_MAX_CELLS = 5_000_000
BEST_RESPONSE_GRID = 20_001
BEST_RESPONSE_SAMPLE = 20


class Check(NamedTuple):
    name: str
    passed: bool
    detail: str

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "detail": self.detail}


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(1.0, abs(b))


def _segments_match_gamma(inst, sol, rng):
    if inst.m > GAMMA_CHAIN_MAX_M:
        return True, f"skipped: m = {inst.m} exceeds {GAMMA_CHAIN_MAX_M}"
    chain = gamma_chain(inst.weights, alpha_direct(inst))
    ok = np.array_equal(chain, sol.segments.boundaries)
    return ok, f"{sol.segments.n_segments} segments" + ("" if ok else f", brute force {chain.tolist()}")


def _ratios_nondecreasing(inst, sol, rng):
    a = sol.segments.averages
    worst = float(np.max(a[:-1] - a[1:], initial=0.0) / a.max())
    return worst <= 1e-12, f"largest relative drop {worst:.3g}"


def _kkt(inst, sol, rng):
    v = sol.kkt.max_violation()
    return v <= 1e-6, f"max residual {v:.3g}"


def _budget(inst, sol, rng):
    gap = abs(sol.spend - inst.budget) / inst.budget
    return gap <= 1e-8, f"relative gap {gap:.3g}"


def _actions_shape(inst, sol, rng):
    x = sol.actions
    ok = bool(np.all(np.diff(x) >= 0) and np.all(x[:sol.q] == 0) and np.all(x[sol.q:] > 0))
    return ok, f"q = {sol.q}"


def _scheme_closed_form(inst, sol, rng):
    paid = sol.scheme.reward(sol.actions)
    ref = scheme_rewards_closed_form(inst, sol.actions)
    keep = sol.actions > 0
    err = float(np.max(np.abs(paid - ref)[keep] / np.maximum(1.0, np.abs(ref[keep])), initial=0.0))
    return err <= 1e-9, f"max relative error {err:.3g}"


def _spend_identity(inst, sol, rng):
    lhs = float(np.dot(inst.weights, sol.scheme.reward(sol.actions)))
    rhs = float(np.dot(alpha_direct(inst), inst.cost.value(sol.actions)))
    err = _rel(lhs, rhs)
    return err <= 1e-9, f"payout {lhs:.12g} vs alpha-weighted cost {rhs:.12g}"


def _fixed_point(inst, sol, rng):
    worst = 0.0
    for hk, xk in zip(inst.h_values, sol.actions):
        a, _ = best_response(sol.scheme, hk, inst.cost)
        worst = max(worst, abs(a - xk) / max(1.0, xk))
    return worst <= 1e-9, f"max relative deviation {worst:.3g}"


def _best_response_grid(inst, sol, rng):
    # no grid point may beat the action the scheme assigns
    x_top = float(sol.actions.max()) if sol.actions.max() > 0 else 1.0
    grid = GridSpec(1.5 * x_top, 1.5 * x_top / (BEST_RESPONSE_GRID - 1))
    idx = np.arange(inst.m)
    if inst.m > BEST_RESPONSE_SAMPLE:
        idx = np.sort(rng.choice(inst.m, BEST_RESPONSE_SAMPLE, replace=False))
    scale = max(1.0, float(sol.scheme.rewards.max(initial=0.0)))
    worst = 0.0
    for k in idx:
        hk = inst.h_values[k]
        _, u_grid = brute_force_best_action(sol.scheme, hk, inst.cost, grid)
        u_sol = float(sol.scheme.reward(sol.actions[k]) - inst.cost.value(sol.actions[k]) * hk)
        worst = max(worst, (u_grid - u_sol) / scale)
    return worst <= 1e-9, f"{idx.size} types, largest grid gain {worst:.3g}"


def _spend_monotone(inst, sol, rng):
    lams = np.sort(sol.lam * np.exp(rng.uniform(np.log(0.25), np.log(4.0), size=32)))
    alpha = compute_alpha(inst)
    cap = float(inst.cost.inverse(4.0 * inst.budget / alpha.min()))
    s = [spend(inst, actions_for_lambda(inst, sol.segments, lam, cap), alpha) for lam in lams]
    ok = bool(np.all(np.diff(s) <= 1e-12 * max(1.0, max(s))))
    return ok, f"32 multipliers in [{lams[0]:.4g}, {lams[-1]:.4g}]"


def _oracle_p2(inst, sol, rng):
    if inst.m > 3:
        return True, f"skipped: m = {inst.m} exceeds 3"
    grid = default_grid(inst, ORACLE_STEP)
    if grid.n_points ** (inst.m - 1) > ORACLE_MAX_CELLS:
        return True, "skipped: grid exceeds cell cap"
    gross, _ = brute_force_p2(inst, grid, max_cells=ORACLE_MAX_CELLS)
    slack = float(inst.weights.sum()) * grid.step
    ok = gross - slack <= sol.gross <= gross + slack
    return ok, f"solver {sol.gross:.9g}, oracle {gross:.9g}, slack {slack:.3g}"


def _linear_bound(inst, sol, rng):
    try:
        lin = solve_linear(inst)
    except (ConvergenceError, UnboundedResponseError) as exc:
        return False, f"linear solve failed: {exc}"
    ratio = lin.gross / sol.gross
    return 0.5 - 1e-9 <= ratio <= 1 + 1e-9, f"linear/optimal = {ratio:.9g}"


CHECKS: dict[str, Callable] = {
    "segments_match_gamma_chain": _segments_match_gamma,
    "segment_ratios_nondecreasing": _ratios_nondecreasing,
    "kkt_residuals": _kkt,
    "budget_exhausted": _budget,
    "actions_monotone_with_zero_prefix": _actions_shape,
    "scheme_matches_closed_form": _scheme_closed_form,
    "spend_identity": _spend_identity,
    "best_response_fixed_point": _fixed_point,
    "best_response_beats_grid": _best_response_grid,
    "spend_decreasing_in_lambda": _spend_monotone,
    "oracle_p2_agreement": _oracle_p2,
    "linear_half_bound": _linear_bound,
}


def verify_instance(inst: Instance, solution: AirsSolution | None = None, *,
                    tol: float = 1e-10, max_iter: int = 200, seed: int = 0) -> list[Check]:
    """Run every check; an exception inside a check counts as a failure."""
    sol = solution or solve_airs(inst, tol, max_iter)
    rng = np.random.default_rng(seed)
    out = []
    for name, fn in CHECKS.items():
        try:
            ok, detail = fn(inst, sol, rng)
        except Exception as exc:  # a crashing check is a failed check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append(Check(name, bool(ok), detail))
    return out
