"""Command-line front end: generate, solve, sweep, evolve, bisect, cross-validate.

Every subcommand is a pure function of its arguments; reruns produce
byte-identical files.  Output files are written to a temp path and renamed,
so no partial file survives an error.

Exit codes: 0 ok; 1 usage or I/O error; 10 satisfiable / heuristic success;
20 unsatisfiable; 30 heuristic failure (and non-endgame trajectory ends).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile

from .experiments import mc_sweep, sweep_csv_lines, trial_seed, xval
from .formula import generate_random, parse_dimacs, verify_assignment
from .greedy import SolverConfig, dpll_solve, run_algorithm_a
from .ode import OdeConfig, run_trajectory, trajectory_csv_lines, TERM_ENDGAME
from .rules import (
    POLARITIES_BY_NAME,
    PolarityRule,
    RULES_BY_NAME,
    SelectionRule,
)
from .threshold import BracketError, bisect_threshold

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_SAT = 10
EXIT_UNSAT = 20
EXIT_HEURISTIC_FAILURE = 30


def atomic_write(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".satlab-tmp-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(path: str | None, text: str, stdout) -> None:
    if path is None or path == "-":
        stdout.write(text)
        if not text.endswith("\n"):
            stdout.write("\n")
    else:
        atomic_write(path, text)


def _add_rule_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--rule", choices=sorted(RULES_BY_NAME), default="maxdiff-maxsum")
    p.add_argument("--polarity", choices=sorted(POLARITIES_BY_NAME), default="majority")


def _add_ode_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--h", type=int, default=31, help="degree truncation")
    p.add_argument("--delta", type=float, default=1e-6, help="round mass")
    p.add_argument("--end-mass", type=float, default=1e-4)
    p.add_argument("--rho-guard", type=float, default=1e-3)


def _ode_cfg(args, delta: float | None = None) -> OdeConfig:
    return OdeConfig(
        h=args.h, delta=delta if delta is not None else args.delta,
        end_mass=args.end_mass, rho_guard=args.rho_guard,
    )


def _densities(spec: str) -> list[float]:
    try:
        vals = [float(tok) for tok in spec.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad density list {spec!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty density list")
    return vals


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="satlab",
        description="Random 3-SAT lab: degree-guided greedy solving and its "
        "mean-field threshold analysis.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a random 3-CNF instance")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--density", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")

    p = sub.add_parser("solve", help="solve a DIMACS file")
    p.add_argument("path")
    p.add_argument("--mode", choices=["greedy", "greedy+backtrack", "dpll"],
                   default="greedy")
    _add_rule_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--budget", type=int, default=None, help="dpll node budget")
    p.add_argument("--out", default="-")

    p = sub.add_parser("mc-sweep", help="success-rate sweep over densities")
    p.add_argument("--density", type=_densities, required=True,
                   help="comma-separated list")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    _add_rule_args(p)
    p.add_argument("--backtrack", choices=["none", "one-step"], default="one-step")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", default="-")

    p = sub.add_parser("ode-run", help="evolve the degree spectrum at one density")
    p.add_argument("--density", type=float, required=True)
    _add_rule_args(p)
    _add_ode_args(p)
    p.add_argument("--stride", type=int, default=4096, help="sampling stride")
    p.add_argument("--out", default="-", help="trajectory CSV")
    p.add_argument("--snapshot-t", type=_densities, default=None,
                   help="comma-separated t values for full-state JSON snapshots")
    p.add_argument("--snapshots-out", default=None)

    p = sub.add_parser("threshold", help="bisect the survivable density")
    _add_rule_args(p)
    _add_ode_args(p)
    p.add_argument("--lo", type=float, default=3.0)
    p.add_argument("--hi", type=float, default=4.0)
    p.add_argument("--tol", type=float, default=0.005)
    p.add_argument("--probe-delta", type=float, default=None,
                   help="coarser delta for interior probes (default 1e-5)")
    p.add_argument("--no-confirm", action="store_true",
                   help="skip endpoint confirmation at --delta")
    p.add_argument("--out", default="-")

    p = sub.add_parser("xval", help="compare batched runs with the mean field")
    p.add_argument("--density", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--checkpoints", type=_densities, required=True,
                   help="comma-separated t values")
    p.add_argument("--seed", type=int, default=0)
    _add_rule_args(p)
    _add_ode_args(p)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", default="-")
    return ap


def cmd_gen(args, stdout) -> int:
    f = generate_random(args.n, args.density, args.seed)
    from .formula import emit_dimacs

    _emit(args.out, emit_dimacs(f), stdout)
    return EXIT_OK


def cmd_solve(args, stdout) -> int:
    with open(args.path, "rb") as fh:
        f = parse_dimacs(fh.read())
    rule = RULES_BY_NAME[args.rule]
    polarity = POLARITIES_BY_NAME[args.polarity]
    record = {
        "n": f.n, "m": len(f.original),
        "density": len(f.original) / f.n if f.n else 0.0,
        "rule": args.rule, "polarity": args.polarity, "mode": args.mode,
        "seed": args.seed,
    }
    if args.mode == "dpll":
        cfg = SolverConfig(selection=rule, polarity=polarity, seed=args.seed)
        res = dpll_solve(f, cfg, limit=args.budget)
        record.update(status=res.status, nodes=res.nodes, backtracking="complete")
        if res.status == "SAT":
            record["assignment"] = [
                v if res.assignment[v] else -v for v in range(1, f.n + 1)
            ]
            code = EXIT_SAT
        elif res.status == "UNSAT":
            code = EXIT_UNSAT
        else:
            code = EXIT_ERROR
    else:
        bt = "one_step" if args.mode == "greedy+backtrack" else "none"
        cfg = SolverConfig(selection=rule, polarity=polarity, backtracking=bt,
                           seed=args.seed)
        out = run_algorithm_a(f, cfg)
        record.update(
            status=out.status, backtracking=bt, free_moves=out.free_moves,
            forced_moves=out.forced_moves,
        )
        if out.status == "success":
            record["assignment"] = [
                v if out.assignment[v] else -v for v in range(1, f.n + 1)
            ]
            code = EXIT_SAT
        else:
            record["failure_depth"] = out.failure_depth
            code = EXIT_HEURISTIC_FAILURE
    _emit(args.out, json.dumps(record, indent=2), stdout)
    return code


def cmd_mc_sweep(args, stdout) -> int:
    records = mc_sweep(
        args.density, args.n, args.trials, args.seed,
        rule=RULES_BY_NAME[args.rule], polarity=POLARITIES_BY_NAME[args.polarity],
        backtracking="one_step" if args.backtrack == "one-step" else "none",
        threads=args.threads,
    )
    for r in records:
        print(
            f"c={r.c}: {r.successes}/{r.trials} success "
            f"({r.wall_time_s:.1f}s wall)", file=sys.stderr,
        )
    _emit(args.out, "\n".join(sweep_csv_lines(records)) + "\n", stdout)
    return EXIT_OK


def cmd_ode_run(args, stdout) -> int:
    cfg = _ode_cfg(args)
    traj = run_trajectory(
        args.density, cfg, RULES_BY_NAME[args.rule],
        POLARITIES_BY_NAME[args.polarity], sample_stride=args.stride,
        snapshot_ts=tuple(args.snapshot_t or ()),
    )
    _emit(args.out, "\n".join(trajectory_csv_lines(traj)) + "\n", stdout)
    print(
        f"termination={traj.termination} rounds={traj.rounds} "
        f"max_rho={traj.max_rho:.6f} t={traj.final_state.t:.6f}",
        file=sys.stderr,
    )
    if args.snapshots_out:
        snaps = [
            {"t": t, "m2": s.m2, "m3": s.m3, "grid": s.n.tolist()}
            for t, s in traj.snapshots
        ]
        atomic_write(args.snapshots_out, json.dumps(snaps))
    return EXIT_OK if traj.termination == TERM_ENDGAME else EXIT_HEURISTIC_FAILURE


def cmd_threshold(args, stdout) -> int:
    cfg = _ode_cfg(args)
    try:
        result = bisect_threshold(
            RULES_BY_NAME[args.rule], POLARITIES_BY_NAME[args.polarity], cfg,
            args.lo, args.hi, args.tol, probe_delta=args.probe_delta,
            confirm=not args.no_confirm,
        )
    except BracketError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    _emit(args.out, result.to_json(), stdout)
    print(
        f"c* = {result.c_star:.4f} in [{result.bracket[0]:.4f}, "
        f"{result.bracket[1]:.4f}] ({len(result.probes)} probes)",
        file=sys.stderr,
    )
    return EXIT_OK


def cmd_xval(args, stdout) -> int:
    cfg = _ode_cfg(args)
    report = xval(
        args.density, args.n, args.checkpoints, args.trials, cfg,
        rule=RULES_BY_NAME[args.rule], polarity=POLARITIES_BY_NAME[args.polarity],
        base_seed=args.seed, threads=args.threads,
    )
    _emit(args.out, json.dumps(report, indent=2), stdout)
    return EXIT_OK


_COMMANDS = {
    "gen": cmd_gen,
    "solve": cmd_solve,
    "mc-sweep": cmd_mc_sweep,
    "ode-run": cmd_ode_run,
    "threshold": cmd_threshold,
    "xval": cmd_xval,
}


def main(argv: list[str] | None = None, stdout=None) -> int:
    stdout = stdout if stdout is not None else sys.stdout
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code else EXIT_OK
    try:
        return _COMMANDS[args.command](args, stdout)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
