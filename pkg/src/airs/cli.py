"""Command-line front end.

Every subcommand reads one input file and writes one report (stdout when
``--output`` is omitted). Exit status: 0 success, 1 invalid input,
2 solver non-convergence, 3 verification failure. Set ``AIRS_LOG_LEVEL``
(e.g. ``DEBUG``) for diagnostics on stderr.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .airs_solver import DEFAULT_MAX_ITER, DEFAULT_TOL, solve_airs
from .exceptions import ConvergenceError, InstanceError, NotAnEquilibriumError
from .hardness import (MAX_AGENTS, brute_force_general_cost, check_reduction,
                       reduce_subset_sum)
from .model import AgentProfile, Instance, load_agents, load_instance
from .reporting import dumps, to_csv
from .schemes import airs_from_proportional, prop_equilibrium_numeric, solve_linear
from .validation import check_max_iter, check_seed, check_tolerance
from .verification import verify_instance

log = logging.getLogger("airs")

COMMANDS = ("solve-airs", "solve-linear", "solve-prop", "compare", "verify", "reduce-subset-sum")
FORMATS = ("json", "csv")
EXIT_OK, EXIT_INVALID, EXIT_NO_CONVERGENCE, EXIT_VERIFY_FAILED = 0, 1, 2, 3
MAX_LISTED_AGENTS = 1000
LOG_ENV = "AIRS_LOG_LEVEL"


@dataclass(frozen=True)
class RunConfig:
    command: str
    input: Optional[Path] = None
    output: Optional[Path] = None
    tolerance: float = DEFAULT_TOL
    max_iter: Optional[int] = None
    seed: int = 0
    format: str = "json"
    weights: Optional[tuple] = None
    target: Optional[int] = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise InstanceError(f"unknown command {self.command!r}")
        if self.format not in FORMATS:
            raise InstanceError(f"unknown format {self.format!r}")
        check_tolerance(self.tolerance)
        check_seed(self.seed)
        if self.max_iter is not None:
            check_max_iter(self.max_iter)
        if self.command == "reduce-subset-sum":
            if self.weights is None or self.target is None:
                raise InstanceError("reduce-subset-sum needs --weights and --target")
        elif self.input is None:
            raise InstanceError(f"{self.command} needs --input")


class Report:
    def __init__(self, text: str, status: int = EXIT_OK):
        self.text, self.status = text, status


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def _solve(inst: Instance, cfg: RunConfig):
    return solve_airs(inst, cfg.tolerance, cfg.max_iter or DEFAULT_MAX_ITER)


def _linear(inst: Instance, cfg: RunConfig):
    return solve_linear(inst, cfg.tolerance, cfg.max_iter or 500)


def _cmd_solve_airs(cfg: RunConfig) -> Report:
    inst = load_instance(cfg.input)
    sol = _solve(inst, cfg)
    if cfg.format == "csv":
        rewards = sol.scheme.reward(sol.actions)
        rows = zip(inst.types, inst.weights, inst.h_values, sol.actions, rewards)
        return Report(to_csv(["type", "weight", "h", "action", "reward"], rows))
    return Report(dumps({"command": cfg.command, "instance": inst.to_dict(),
                         "solution": sol.to_dict()}))


def _cmd_solve_linear(cfg: RunConfig) -> Report:
    inst = load_instance(cfg.input)
    sol = _linear(inst, cfg)
    if cfg.format == "csv":
        rows = zip(inst.types, inst.weights, inst.h_values, sol.actions, sol.price * sol.actions)
        return Report(to_csv(["type", "weight", "h", "action", "reward"], rows))
    return Report(dumps({"command": cfg.command, "instance": inst.to_dict(),
                         "solution": sol.to_dict()}))


def _prop(agents: AgentProfile, cfg: RunConfig):
    return prop_equilibrium_numeric(agents.agent_types, agents.h_values, agents.cost,
                                    agents.budget, max_rounds=cfg.max_iter or 20000)


def _dominating_airs(agents: AgentProfile, eq):
    """Report entry for the AIRS replicating the equilibrium, plus its scheme."""
    try:
        dom = airs_from_proportional(eq.actions, agents.h_values, agents.cost, agents.budget)
    except (NotAnEquilibriumError, ArithmeticError) as exc:
        return {"available": False, "reason": str(exc)}, None
    return {"available": True, "spend": dom.spend, "scheme": dom.scheme.to_dict()}, dom.scheme


def _cmd_solve_prop(cfg: RunConfig) -> Report:
    agents = load_agents(cfg.input)
    eq = _prop(agents, cfg)
    if cfg.format == "csv":
        rows = zip(range(agents.n), agents.agent_types, agents.h_values, eq.actions,
                   eq.foc_residuals)
        return Report(to_csv(["agent", "type", "h", "action", "foc_residual"], rows))
    return Report(dumps({"command": cfg.command, "agents": agents.to_dict(),
                         "equilibrium": eq.to_dict(),
                         "dominating_airs": _dominating_airs(agents, eq)[0]}))


def _step_rows(name: str, scheme) -> list:
    rows = [(name, 0.0, 0.0)]
    for b, r in zip(scheme.breakpoints, scheme.rewards):
        rows.append((name, float(b), rows[-1][2]))
        rows.append((name, float(b), float(r)))
    return rows


def _cmd_compare(cfg: RunConfig) -> Report:
    inst = load_instance(cfg.input)
    sol = _solve(inst, cfg)
    lin = _linear(inst, cfg)
    schemes = {
        "airs": {"gross": sol.gross, "spend": sol.spend, "ratio": 1.0,
                 "actions": sol.actions, "lambda": sol.lam},
        "linear": {"gross": lin.gross, "spend": lin.spend, "ratio": lin.gross / sol.gross,
                   "actions": lin.actions, "price": lin.price},
    }
    steps = _step_rows("airs", sol.scheme)
    x_end = float(max(sol.actions.max(), lin.actions.max()))
    steps += [("linear", 0.0, 0.0), ("linear", x_end, lin.price * x_end)]

    prop = {"applicable": False}
    try:
        agents = AgentProfile.from_instance(inst)
        if not 2 <= agents.n <= MAX_LISTED_AGENTS:
            raise InstanceError(f"{agents.n} agents outside [2, {MAX_LISTED_AGENTS}]")
    except InstanceError as exc:
        prop["reason"] = str(exc)
    else:
        eq = _prop(agents, cfg)
        prop = {"applicable": True, "gross": eq.gross, "spend": eq.spend,
                "ratio": eq.gross / sol.gross, "agent_types": agents.agent_types,
                "actions": eq.actions, "foc_residuals": eq.foc_residuals}
        dom, dom_scheme = _dominating_airs(agents, eq)
        prop["dominating_airs_spend"] = dom.get("spend")
        if dom_scheme is not None:
            steps += _step_rows("prop_dominating_airs", dom_scheme)
    schemes["proportional"] = prop

    steps_csv = to_csv(["scheme", "x", "reward"], steps)
    if cfg.format == "csv":
        return Report(steps_csv)
    return Report(dumps({"command": cfg.command, "seed": cfg.seed, "instance": inst.to_dict(),
                         "schemes": schemes, "reward_steps_csv": steps_csv}))


def _cmd_verify(cfg: RunConfig) -> Report:
    inst = load_instance(cfg.input)
    sol = _solve(inst, cfg)
    checks = verify_instance(inst, sol, seed=cfg.seed)
    passed = all(c.passed for c in checks)
    for c in checks:
        log.info("%s %s: %s", "PASS" if c.passed else "FAIL", c.name, c.detail)
    if cfg.format == "csv":
        text = to_csv(["check", "passed", "detail"], [tuple(c) for c in checks])
    else:
        text = dumps({"command": cfg.command, "seed": cfg.seed, "instance": inst.to_dict(),
                      "passed": passed, "checks": [c.to_dict() for c in checks]})
    return Report(text, EXIT_OK if passed else EXIT_VERIFY_FAILED)


def _cmd_reduce(cfg: RunConfig) -> Report:
    if len(cfg.weights) > MAX_AGENTS:
        raise InstanceError(f"at most {MAX_AGENTS} weights supported, got {len(cfg.weights)}")
    try:
        gc = reduce_subset_sum(cfg.weights, cfg.target)
    except ValueError as exc:
        raise InstanceError(str(exc)) from None
    solvable, reachable = check_reduction(cfg.weights, cfg.target)
    best = brute_force_general_cost(gc)
    if cfg.format == "csv":
        return Report(to_csv(["subset_sum", "general_cost", "best_gross", "target_gross"],
                             [(solvable, reachable, best.gross, gc.target)]))
    return Report(dumps({"command": cfg.command, "instance": gc.to_dict(),
                         "subset_sum": solvable, "general_cost": reachable,
                         "best_gross": best.gross, "high_types": list(best.high_types),
                         "witness_scheme": best.scheme.to_dict()}))


HANDLERS = {
    "solve-airs": _cmd_solve_airs,
    "solve-linear": _cmd_solve_linear,
    "solve-prop": _cmd_solve_prop,
    "compare": _cmd_compare,
    "verify": _cmd_verify,
    "reduce-subset-sum": _cmd_reduce,
}


def run(cfg: RunConfig) -> int:
    """Execute one command; the report is written only when the command completes."""
    try:
        report = HANDLERS[cfg.command](cfg)
    except ConvergenceError as exc:
        log.error("solver did not converge: %s", exc)
        return EXIT_NO_CONVERGENCE
    except (InstanceError, OSError, ValueError) as exc:
        log.error("invalid input: %s", exc)
        return EXIT_INVALID
    if cfg.output is None:
        sys.stdout.write(report.text)
    else:
        Path(cfg.output).write_text(report.text, encoding="utf-8")
    return report.status


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------


def _int_list(text: str) -> list:
    try:
        return [int(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of integers: {text!r}") from None


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage, which here means non-convergence
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="airs", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        if name == "reduce-subset-sum":
            p.add_argument("--weights", required=True, nargs="+", type=_int_list,
                           help="positive integers, space or comma separated")
            p.add_argument("--target", required=True, type=int)
        else:
            p.add_argument("--input", required=True, type=Path)
        p.add_argument("--output", type=Path)
        p.add_argument("--tolerance", type=float, default=DEFAULT_TOL)
        p.add_argument("--max-iter", type=int)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--format", choices=FORMATS, default="json")
    return parser


def _configure_logging() -> None:
    level = os.environ.get(LOG_ENV, "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv: Optional[Sequence[str]] = None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    weights = getattr(args, "weights", None)
    try:
        cfg = RunConfig(
            command=args.command, input=getattr(args, "input", None), output=args.output,
            tolerance=args.tolerance, max_iter=args.max_iter, seed=args.seed,
            format=args.format,
            weights=tuple(w for chunk in weights for w in chunk) if weights else None,
            target=getattr(args, "target", None))
    except InstanceError as exc:
        log.error("invalid arguments: %s", exc)
        return EXIT_INVALID
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
