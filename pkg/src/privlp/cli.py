"""Command-line entry point.

Exit codes: 0 success, 1 usage or configuration error, 2 I/O error,
3 a run that must keep the original constraints violated them.
"""
from __future__ import annotations

import argparse
import json
import sys
from typing import Optional, Sequence

from .experiments import (
    EXPERIMENTS,
    VARIANTS,
    SweepConfig,
    accuracy_report,
    emit_csv,
    run_sweep,
    table_to_csv,
)
from .lp import (
    COMPONENTS,
    ConfigurationError,
    PrivacyBudget,
    check_feasible,
    load_program,
    validate_profile,
)
from .privatizer import ORIGINAL_FEAS_TOL, PerturbedFeasibilityError, privatize_partial
from .solver import GeometryError, solve
from .streams import NOISE, stream

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_INVARIANT = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--seed", type=int, default=default)
    parser.add_argument("--samples", type=int, default=default)
    parser.add_argument("--out", default=default, help="output path (stdout when omitted)")
    parser.add_argument("--config", default=default, help="JSON file with SweepConfig fields")


def _budget_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--eps", type=float, default=1.0)
    parser.add_argument("--delta", type=float, default=0.1)
    parser.add_argument("--alphas", help="alpha_A,alpha_b,alpha_c (default: even over --components)")
    parser.add_argument("--components", default="Abc", help="subset of A, b, c to privatize")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="privlp", description="Feasibility-preserving private linear programming.")
    _global_flags(p, suppress=False)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("solve", help="solve an instance file")
    sp.add_argument("instance")

    sp = sub.add_parser("validate", help="check an instance's sensitivity profile")
    sp.add_argument("instance")

    sp = sub.add_parser("privatize", help="privatize an instance file")
    sp.add_argument("instance")
    _budget_flags(sp)
    sp.add_argument("--solve", action="store_true", help="also solve the private program")

    sp = sub.add_parser("accuracy", help="Monte-Carlo accuracy report for an instance file")
    sp.add_argument("instance")
    _budget_flags(sp)
    sp.add_argument("--t", type=float, default=0.05, help="concentration level")

    sp = sub.add_parser("sweep", help="run an experiment sweep and write CSV")
    sp.add_argument("--experiment", choices=EXPERIMENTS)
    sp.add_argument("--variant", choices=sorted(VARIANTS))
    sp.add_argument("--N", type=int)
    sp.add_argument("--M", type=int)
    sp.add_argument("--eps", type=float)
    sp.add_argument("--eps-values", help="comma-separated grid")
    sp.add_argument("--M-values", help="comma-separated grid")
    sp.add_argument("--alpha-c-values", help="comma-separated grid")
    sp.add_argument("--delta11-A", type=float)
    sp.add_argument("--delta1-b", type=float)
    sp.add_argument("--delta1-c", type=float)
    sp.add_argument("--redraw", choices=("fresh", "fixed"))
    sp.add_argument("--no-clamp", action="store_true", help="debug: drop the shift and clamps")

    sp = sub.add_parser("cmdp", help="cost-of-privacy sweep on the gridworld")
    sp.add_argument("--eps-values", help="comma-separated grid")
    sp.add_argument("--gridworld", help="gridworld JSON file")
    sp.add_argument("--mask-mode", choices=("hazards", "non_goal"))
    sp.add_argument("--slip", type=float)

    for sp in sub.choices.values():
        _global_flags(sp, suppress=True)
    return p


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _components(text: str) -> tuple:
    comps = tuple(k for k in COMPONENTS if k in text)
    if set(text) - set(COMPONENTS):
        raise ConfigurationError(f"components must be drawn from {''.join(COMPONENTS)}, got {text!r}")
    return comps


def _budget(args) -> tuple[PrivacyBudget, tuple]:
    comps = _components(args.components)
    if args.alphas:
        a = _floats(args.alphas)
        if len(a) != 3:
            raise ConfigurationError("--alphas needs three comma-separated values")
        return PrivacyBudget(args.eps, args.delta, *a), comps
    return PrivacyBudget.even(args.eps, args.delta, comps), comps


def _seed(args) -> int:
    return 0 if args.seed is None else args.seed


def _write(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
        return
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(text)


def _load_config(path: Optional[str]) -> dict:
    if not path:
        return {}
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ConfigurationError("config file must hold a JSON object")
    return data


def _need_profile(profile):
    if profile is None:
        raise ConfigurationError("instance file has no 'sensitivity' object")
    return profile


def _cmd_solve(args) -> int:
    lp, _ = load_program(args.instance)
    _write(json.dumps(solve(lp).to_dict(), indent=2), args.out)
    return EXIT_OK


def _cmd_validate(args) -> int:
    lp, profile = load_program(args.instance)
    problems = validate_profile(lp, _need_profile(profile))
    _write(json.dumps({"valid": not problems, "violations": problems}, indent=2), args.out)
    return EXIT_OK if not problems else EXIT_USAGE


def _cmd_privatize(args) -> int:
    lp, profile = load_program(args.instance)
    budget, comps = _budget(args)
    priv = privatize_partial(lp, _need_profile(profile), budget, comps, stream(_seed(args), 0, 0, NOISE))
    doc = priv.to_dict()
    status = EXIT_OK
    if args.solve:
        res = solve(priv.lp)
        doc["solution"] = res.to_dict()
        if res.optimal:
            ok = check_feasible(res.x, lp, ORIGINAL_FEAS_TOL)
            doc["original_feasible"] = bool(ok)
            if not ok:
                status = EXIT_INVARIANT
    _write(json.dumps(doc, indent=2), args.out)
    return status


def _cmd_accuracy(args) -> int:
    lp, profile = load_program(args.instance)
    budget, comps = _budget(args)
    samples = args.samples or 1000
    report = accuracy_report(lp, _need_profile(profile), budget, samples, _seed(args), comps, args.t)
    _write(json.dumps(report, indent=2), args.out)
    return EXIT_OK


def _sweep_config(args, experiment: Optional[str] = None) -> SweepConfig:
    cfg = _load_config(args.config)
    overrides = {
        "experiment": experiment or getattr(args, "experiment", None),
        "variant": getattr(args, "variant", None),
        "N": getattr(args, "N", None),
        "M": getattr(args, "M", None),
        "eps": getattr(args, "eps", None),
        "delta11_A": getattr(args, "delta11_A", None),
        "delta1_b": getattr(args, "delta1_b", None),
        "delta1_c": getattr(args, "delta1_c", None),
        "redraw": getattr(args, "redraw", None),
        "samples": args.samples,
        "out": args.out,
    }
    for key, flag in (("eps_values", "eps_values"), ("M_values", "M_values"), ("alpha_c_values", "alpha_c_values")):
        text = getattr(args, flag, None)
        if text:
            vals = _floats(text)
            overrides[key] = [int(v) for v in vals] if key == "M_values" else vals
    if getattr(args, "no_clamp", False):
        overrides["shift_and_clamp"] = False
    overrides["seed"] = args.seed
    grid = dict(cfg.get("gridworld", {}))
    if getattr(args, "gridworld", None):
        grid.update(_load_config(args.gridworld))
    if getattr(args, "mask_mode", None):
        grid["mask_mode"] = args.mask_mode
    if getattr(args, "slip", None) is not None:
        grid["slip"] = args.slip
    if grid:
        overrides["gridworld"] = grid
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    return SweepConfig.from_dict(cfg)


def _run_and_emit(config: SweepConfig) -> int:
    table = run_sweep(config)
    if config.out:
        emit_csv(table, config.out)
    else:
        sys.stdout.write(table_to_csv(table))
    infeasible = sum(r.infeasible for r in table)
    if infeasible:
        print(
            f"error: {infeasible} private programs were infeasible; "
            "the A_sup/b_inf envelope admits no common feasible point",
            file=sys.stderr,
        )
        return EXIT_USAGE
    violated = sum(r.violations for r in table)
    if violated and config.shift_and_clamp:
        print(f"error: {violated} trials violated the original constraints", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


def _cmd_sweep(args) -> int:
    return _run_and_emit(_sweep_config(args))


def _cmd_cmdp(args) -> int:
    return _run_and_emit(_sweep_config(args, experiment="cmdp"))


COMMANDS = {
    "solve": _cmd_solve,
    "validate": _cmd_validate,
    "privatize": _cmd_privatize,
    "accuracy": _cmd_accuracy,
    "sweep": _cmd_sweep,
    "cmdp": _cmd_cmdp,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (PerturbedFeasibilityError, GeometryError, ValueError, TypeError) as exc:
        # ConfigurationError and ContractError are ValueErrors
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
