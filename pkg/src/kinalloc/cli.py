"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 input or validation error,
3 computation did not certify.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import config
from .equilibrium import (
    ARGMAX_TOL,
    KKT_TOL,
    SUPPORT_TOL,
    SolveOptions,
    classify,
    kkt_verify,
    solve_nash,
)
from .family_model import FamilyGame, inclusive_fitness, validate_game, validate_profile
from .oracle import GridSpec, GridTooLarge, grid_nash_check
from .pedigree import pedigree_to_relatedness

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_UNCERTIFIED = 0, 1, 2, 3

log = logging.getLogger("kinalloc")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class InputError(Exception):
    pass


def _write(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _game(path) -> FamilyGame:
    try:
        return config.load_game(path)
    except OSError as err:
        raise InputError(f"cannot read game {path}: {err.strerror}") from None
    except config.ConfigError as err:
        raise InputError(str(err)) from None


def _profile(path, game) -> np.ndarray:
    try:
        m = config.load_profile(path, game)
    except OSError as err:
        raise InputError(f"cannot read profile {path}: {err.strerror}") from None
    except config.ConfigError as err:
        raise InputError(str(err)) from None
    check = validate_profile(game, m)
    if not check.ok:
        raise InputError(f"{path}: infeasible profile: " + "; ".join(check.violations))
    return m


def _options(args) -> SolveOptions:
    try:
        return SolveOptions(mode=args.mode, damping=args.gamma, max_iter=args.max_iter, kkt_tol=args.kkt_tol)
    except ValueError as err:
        raise InputError(str(err)) from None


def cmd_solve(args) -> int:
    game = _game(args.game)
    report = solve_nash(game, _options(args))
    _write(config.dumps(config.report_to_dict(report)), args.output)
    if not report.converged:
        d = report.diagnostics
        log.error(
            "not certified after %d iterations (residuals %s)", d.iterations, report.certificate.residuals
        )
        return EXIT_UNCERTIFIED
    return EXIT_OK


def cmd_verify(args) -> int:
    game = _game(args.game)
    cert = kkt_verify(game, _profile(args.profile, game), args.kkt_tol)
    _write(config.dumps(config.certificate_to_dict(cert)), args.output)
    if not cert.certified:
        log.error("profile is not certified: %s", cert.residuals)
        return EXIT_UNCERTIFIED
    return EXIT_OK


def cmd_classify(args) -> int:
    game = _game(args.game)
    cls = classify(game, _profile(args.profile, game), args.support_tol, args.argmax_tol)
    _write(config.dumps(config.classification_to_dict(game, cls)), args.output)
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    game = _game(args.game)
    m = _profile(args.profile, game)
    try:
        spec = GridSpec(args.step, args.epsilon)
        res = grid_nash_check(game, m, spec)
    except (GridTooLarge, ValueError) as err:
        raise InputError(str(err)) from None
    doc = {
        "passed": res.passed,
        "worst_gain": res.worst_gain,
        "worst_source": game.individuals[res.worst_source],
        "deviation": res.deviation.tolist(),
        "step": spec.step,
        "epsilon": spec.epsilon,
    }
    _write(config.dumps(doc), args.output)
    if not res.passed:
        log.error("source %r improves by %.3g on the grid", game.individuals[res.worst_source], res.worst_gain)
        return EXIT_UNCERTIFIED
    return EXIT_OK


def cmd_pedigree(args) -> int:
    try:
        ped = config.load_pedigree(args.pedigree)
    except OSError as err:
        raise InputError(f"cannot read pedigree {args.pedigree}: {err.strerror}") from None
    except config.ConfigError as err:
        raise InputError(str(err)) from None
    r = pedigree_to_relatedness(ped)
    _write(config.dumps({"ids": list(ped.ids), "relatedness": r.tolist()}), args.output)
    return EXIT_OK


def _resolve_param(game: FamilyGame, path: str):
    """Return ``value -> FamilyGame`` for a parameter path.

    Paths: ``relatedness.<source>.<target>``, ``budget.<id>`` and
    ``fitness.<id>.<w|c|p>``; ids are matched by their string form.
    """
    parts = path.split(".")
    names = [str(i) for i in game.individuals]

    def idx(name):
        if name not in names:
            raise InputError(f"--param {path}: unknown individual {name!r}")
        return names.index(name)

    if parts[0] == "relatedness" and len(parts) == 3:
        s, t = idx(parts[1]), idx(parts[2])

        def build(v):
            rel = game.relatedness.copy()
            rel[s, t] = v
            return game.with_relatedness(rel)

        return build
    if parts[0] == "budget" and len(parts) == 2:
        s = idx(parts[1])

        def build(v):
            b = game.budgets.copy()
            b[s] = v
            return game.with_budgets(b)

        return build
    if parts[0] == "fitness" and len(parts) == 3 and parts[2] in ("w", "c", "p"):
        s, attr = idx(parts[1]), parts[2]

        def build(v):
            fit = list(game.fitness)
            fit[s] = replace(fit[s], **{attr: v})
            return FamilyGame(game.individuals, game.budgets, game.relatedness, fit)

        return build
    raise InputError(f"--param {path}: expected relatedness.S.T, budget.ID or fitness.ID.(w|c|p)")


def _fmt(v) -> str:
    return format(float(v), ".17g")


def _sweep_row(job):
    value, game, options = job
    report = solve_nash(game, options)
    m = report.profile.matrix
    cls = report.classification
    n = game.n
    row = [_fmt(value), str(int(report.converged))]
    row += [_fmt(m[s, t]) for s in range(n) for t in range(n)]
    row += [_fmt(inclusive_fitness(game, m, i)) for i in range(n)]
    row += [str(int(i in cls.selfish)) for i in range(n)]
    row += [str(int(i in cls.altruistic)) for i in range(n)]
    row += [str(int(i in cls.totally_altruistic)) for i in range(n)]
    return row, report.converged


def sweep_header(game: FamilyGame) -> list[str]:
    ids = [str(i) for i in game.individuals]
    head = ["value", "converged"]
    head += [f"x[{s}->{t}]" for s in ids for t in ids]
    head += [f"A[{i}]" for i in ids]
    head += [f"selfish[{i}]" for i in ids]
    head += [f"altruistic[{i}]" for i in ids]
    head += [f"totally_altruistic[{i}]" for i in ids]
    return head


def cmd_sweep(args) -> int:
    game = _game(args.game)
    build = _resolve_param(game, args.param)
    if args.steps < 1:
        raise InputError("--steps must be at least 1")
    options = _options(args)
    values = np.linspace(args.start, args.stop, args.steps)
    jobs = []
    for v in values:
        g = build(float(v))
        check = validate_game(g)
        if not check.ok:
            raise InputError(f"--param {args.param}={v!r} gives an invalid game: " + "; ".join(check.violations))
        jobs.append((float(v), g, options))
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            results = list(pool.map(_sweep_row, jobs))
    else:
        results = [_sweep_row(j) for j in jobs]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(sweep_header(game))
    writer.writerows(row for row, _ in results)
    _write(buf.getvalue(), args.output)
    bad = [jobs[k][0] for k, (_, ok) in enumerate(results) if not ok]
    if bad:
        log.error("%d sweep steps did not certify: %s", len(bad), bad)
        return EXIT_UNCERTIFIED
    return EXIT_OK


def _add_solver_args(p):
    p.add_argument("--mode", choices=("round_robin", "simultaneous"), default="round_robin")
    p.add_argument("--gamma", type=float, default=0.5, help="damping for simultaneous mode")
    p.add_argument("--max-iter", type=int, default=10000)
    p.add_argument("--kkt-tol", type=float, default=KKT_TOL)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kinalloc", description="Nash equilibria of inclusive-fitness allocation games.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="compute an equilibrium and its report")
    p.add_argument("game")
    _add_solver_args(p)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", help="KKT-certify a profile")
    p.add_argument("game")
    p.add_argument("profile")
    p.add_argument("--kkt-tol", type=float, default=KKT_TOL)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("classify", help="beneficiaries, selfish and altruistic sets")
    p.add_argument("game")
    p.add_argument("profile")
    p.add_argument("--support-tol", type=float, default=SUPPORT_TOL)
    p.add_argument("--argmax-tol", type=float, default=ARGMAX_TOL)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("oracle-check", help="brute-force epsilon-Nash check on a lattice")
    p.add_argument("game")
    p.add_argument("profile")
    p.add_argument("--step", type=float, default=1e-2)
    p.add_argument("--epsilon", type=float, default=1e-3)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_oracle_check)

    p = sub.add_parser("pedigree", help="relatedness matrix from a pedigree")
    p.add_argument("pedigree")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_pedigree)

    p = sub.add_parser("sweep", help="re-solve along a scalar parameter path")
    p.add_argument("game")
    p.add_argument("--param", required=True, help="relatedness.S.T, budget.ID or fitness.ID.(w|c|p)")
    p.add_argument("--from", dest="start", type=float, required=True)
    p.add_argument("--to", dest="stop", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--jobs", type=int, default=1)
    _add_solver_args(p)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_sweep)
    return parser


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="kinalloc: %(levelname)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except InputError as err:
        print(f"kinalloc: error: {err}", file=sys.stderr)
        return EXIT_INPUT


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
