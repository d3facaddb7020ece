"""Command-line entry point: ``ppalloc {simulate,mp1,secretary,reproduce}``.

Exit codes: 0 success, 1 runtime or domain failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

from . import experiments as ex
from ._rng import ARRIVALS, POLICY, trial_rng
from .arrival import InvalidInstanceError, counts_instance, read_instance, sample_realization
from .mp1 import Mp1Params, SolverError, solve_mp1
from .policies import ContractViolation, MarketParams, run_policy, trajectory_csv
from .secretary import (adversarial_secretary_instance, asymptotic_success, estimate_success, optimal_gamma,
                        uniform_adversary_instance)

FIG2_P_GRID = [round(0.05 * i, 2) for i in range(1, 20)]
TABLE3_P_GRID = [round(0.1 * i, 1) for i in range(1, 11)]


class UsageError(Exception):
    pass


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _default_threads() -> int:
    return os.cpu_count() or 1


def _common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--config", help="key=value file; flags given on the command line win")
    sp.add_argument("--out", default="-", help="output path, '-' for stdout")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ppalloc", description="Online allocation under partially predictable arrivals.")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="estimate a policy's competitive ratio on one instance")
    _common(sim)
    sim.add_argument("--policy", choices=ex.POLICY_NAMES, default=None)
    sim.add_argument("--a", type=float)
    sim.add_argument("--p", type=float)
    sim.add_argument("--b", type=int)
    sim.add_argument("--n", type=int)
    sim.add_argument("--c", type=float, help="alg2 target ratio (default: program optimum capped at 0.99)")
    sim.add_argument("--instance", default="table2",
                     help="table2, impossibility-v, impossibility-w, balanced, or a path to an instance file")
    sim.add_argument("--trials", type=int, default=10_000)
    sim.add_argument("--trace", action="store_true", help="dump one per-step trajectory instead of a ratio")

    mp1 = sub.add_parser("mp1", help="solve the factor-revealing program")
    _common(mp1)
    mp1.add_argument("--a", type=_floats)
    mp1.add_argument("--p", type=_floats)
    mp1.add_argument("--kappa", type=_floats)
    mp1.add_argument("--grid", type=int, default=40)

    sec = sub.add_parser("secretary", help="observe-then-select under partially predictable arrivals")
    _common(sec)
    sec.add_argument("--p", type=float)
    sec.add_argument("--gamma", type=float)
    sec.add_argument("--optimal", action="store_true", help="use the optimal observation fraction for p")
    sec.add_argument("--n", type=int, default=10_000)
    sec.add_argument("--trials", type=int, default=0, help="Monte Carlo trials (0 skips simulation)")
    sec.add_argument("--kind", choices=("tightness", "uniform-adversary"), default="tightness")

    rep = sub.add_parser("reproduce", help="regenerate a reported table or figure")
    rep.add_argument("target", choices=("fig2", "table2", "table3", "bound61"))
    _common(rep)
    rep.add_argument("--a", type=_floats)
    rep.add_argument("--p", type=_floats)
    rep.add_argument("--kappa", type=_floats)
    rep.add_argument("--b", type=int)
    rep.add_argument("--n", type=int)
    rep.add_argument("--c", type=float)
    rep.add_argument("--trials", type=int, default=10_000)
    rep.add_argument("--grid", type=int, default=40)
    rep.add_argument("--plot-data", action="store_true", help="emit whitespace two-column blocks instead of CSV")
    return parser


def read_config(path: str) -> dict[str, str]:
    out = {}
    with open(path) as fh:
        for num, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{num}: expected key=value")
            key, val = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = val
    return out


def parse_args(parser: argparse.ArgumentParser, argv) -> argparse.Namespace:
    """Parse flags, then fill anything left unset from ``--config``."""
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        try:
            conf = read_config(args.config)
        except OSError as exc:
            parser.error(f"cannot read config: {exc}")
        except UsageError as exc:
            parser.error(str(exc))
        defaults = parser.parse_args(_positional(args))
        explicit = {k for k, v in vars(args).items() if v != getattr(defaults, k, None)}
        for key, raw in conf.items():
            if not hasattr(args, key):
                parser.error(f"unknown config key {key!r}")
            if key in explicit:
                continue
            action = _find_action(parser, args.command, key)
            try:
                if action is not None and action.const is True:
                    value = raw.lower() in ("1", "true", "yes", "on")
                elif action is not None and action.type is not None:
                    value = action.type(raw)
                else:
                    value = raw
            except (ValueError, argparse.ArgumentTypeError) as exc:
                parser.error(f"bad config value for {key}: {exc}")
            setattr(args, key, value)
    return args


def _positional(args) -> list[str]:
    out = [args.command]
    if args.command == "reproduce":
        out.append(args.target)
    return out


def _find_action(parser, command, dest):
    for action in parser._subparsers._group_actions[0].choices[command]._actions:
        if action.dest == dest:
            return action
    return None


def _require(parser, args, *names):
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n) is None]
    if missing:
        parser.error(f"{args.command}: missing required {', '.join(missing)}")


def _single(parser, values, flag):
    if values is None:
        return None
    if len(values) != 1:
        parser.error(f"{flag} takes a single value here")
    return values[0]


def _config(args) -> dict:
    skip = {"config", "out", "threads"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _instance(args, params: MarketParams):
    kind = args.instance
    if kind == "table2":
        return ex.table2_instance(params.b, params.n, params.a)
    if kind in ("impossibility-v", "impossibility-w"):
        v, w = ex.impossibility_pair(params.b, params.n, params.a)
        return v if kind.endswith("v") else w
    if kind == "balanced":
        return counts_instance(params.n, params.n // 2, params.n - params.n // 2, params.a, order="type2-first")
    seq = read_instance(kind)
    if seq.n != params.n or not math.isclose(seq.a, params.a):
        raise ValueError(f"instance file has n={seq.n}, a={seq.a}; flags say n={params.n}, a={params.a}")
    return seq


def cmd_simulate(parser, args) -> str:
    _require(parser, args, "policy", "a", "p", "b", "n")
    params = MarketParams(args.b, args.n, args.a, args.p)
    seq = _instance(args, params)
    c = args.c
    if args.policy == "alg2" and c is None:
        c = ex.adaptive_c(args.a, args.p, args.b / args.n)
    spec = ex.PolicySpec(args.policy, c if args.policy == "alg2" else None)
    if args.trace:
        r = sample_realization(seq, params.p, trial_rng(args.seed, 0, ARRIVALS))
        policy = ex.make_policy(spec, params, args.seed)
        out = run_policy(policy, r, params, rng=trial_rng(args.seed, 0, POLICY))
        return ex.config_line(_config(args)) + "\n" + trajectory_csv(out)
    est = ex.estimate_ratio(spec, seq, params, args.trials, args.seed, args.threads)
    row = {"policy": args.policy, "a": args.a, "p": args.p, "b": args.b, "n": args.n, "c": spec.c,
           "trials": est.trials, "opt": est.opt_value, "mean_ratio": est.mean_ratio,
           "ci_half_width": est.ci_half_width_95}
    return ex.rows_to_csv([row], list(row), _config(args))


def cmd_mp1(parser, args) -> str:
    _require(parser, args, "a", "p", "kappa")
    rows = []
    for a in args.a:
        for p in args.p:
            for kappa in args.kappa:
                sol = solve_mp1(Mp1Params(a, p, kappa), args.grid)
                x = sol.argmin
                rows.append({"a": a, "p": p, "kappa": kappa, "c_star": sol.c_star, "lambda": x.lam,
                             "n1": x.n1, "n2": x.n2, "eta1": x.eta1, "eta2": x.eta2})
    return ex.rows_to_csv(rows, ["a", "p", "kappa", "c_star", "lambda", "n1", "n2", "eta1", "eta2"], _config(args))


def cmd_secretary(parser, args) -> str:
    _require(parser, args, "p")
    if args.optimal == (args.gamma is not None):
        parser.error("secretary: give exactly one of --gamma or --optimal")
    gamma = optimal_gamma(args.p) if args.optimal else args.gamma
    row = {"p": args.p, "gamma": gamma, "formula_value": asymptotic_success(gamma, args.p),
           "mc_estimate": None, "ci_half_width": None}
    if args.trials:
        if args.kind == "tightness":
            inst = adversarial_secretary_instance(args.n, gamma)
        else:
            n = args.n
            inst = lambda rng: uniform_adversary_instance(n, rng)  # noqa: E731
        row["mc_estimate"], row["ci_half_width"] = estimate_success(inst, gamma, args.p, args.trials, args.seed)
    return ex.rows_to_csv([row], list(row), _config(args))


def cmd_reproduce(parser, args) -> str:
    config = _config(args)
    if args.target == "fig2":
        a_list = args.a or [0.5, 0.7]
        kappas = args.kappa or [0.5, 0.7, 0.9]
        p_grid = args.p or FIG2_P_GRID
        rows = ex.reproduce_figure2(a_list, kappas, p_grid, args.grid)
        if args.plot_data:
            return ex.plot_data(rows, "p", "c_star", ("a", "kappa"))
        return ex.rows_to_csv(rows, ["a", "kappa", "p", "c_star", "alg1_bound"], config)
    if args.target == "table3":
        rows = ex.reproduce_table3(args.p or TABLE3_P_GRID)
        if args.plot_data:
            return ex.plot_data(rows, "p", "gamma_star")
        return ex.rows_to_csv(rows, ["p", "gamma_star", "success"], config)

    a = _single(parser, args.a, "--a")
    p = _single(parser, args.p, "--p")
    a = 0.5 if a is None else a
    if p is None:
        parser.error(f"reproduce {args.target}: missing required --p")
    n = args.n or 10_000
    if args.target == "table2":
        b = args.b if args.b is not None else n // 2
        rows = ex.reproduce_table2(a, p, b, n, args.trials, args.seed, args.threads, args.c, args.grid)
        cols = ["policy", "mean_ratio", "ci_half_width", "analytic", "c"]
    else:
        rows = ex.reproduce_bound61(a, p, n, args.trials, args.seed, args.threads, args.b, args.c, args.grid)
        cols = ["policy", "b", "min_ratio", "ci_half_width", "bound", "ratio_v", "ratio_w"]
    if args.plot_data:
        return ex.plot_data([dict(r, idx=i) for i, r in enumerate(rows)], "idx", cols[1])
    return ex.rows_to_csv(rows, cols, config)


COMMANDS = {"simulate": cmd_simulate, "mp1": cmd_mp1, "secretary": cmd_secretary, "reproduce": cmd_reproduce}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parse_args(parser, argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.threads is None:
        args.threads = _default_threads()
    try:
        text = COMMANDS[args.command](parser, args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (ValueError, SolverError, ContractViolation, InvalidInstanceError, RuntimeError, OSError) as exc:
        print(f"ppalloc: error: {exc}", file=sys.stderr)
        return 1
    if args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w") as fh:
            fh.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
