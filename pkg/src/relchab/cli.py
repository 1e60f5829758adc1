"""Command line entry points: validate, criterion, picard, sieve, probe, selftest.

Exit codes: 0 success or pass, 1 mathematical failure, 2 usage error, 3 budget exceeded.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path
from typing import Sequence

from .algebra import BudgetExceeded

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_BUDGET = 0, 1, 2, 3
FIXTURE_ENV = "CHABAUTY_FIXTURE_DIR"
SIEVE_QUICK_LIMIT = 10 ** 4  # sum of p^e above which the sieve needs --extended


class UsageError(Exception):
    pass


def resolve_fixture(name: str) -> Path:
    """A path, or a fixture name looked up in CHABAUTY_FIXTURE_DIR and then the packaged data."""
    cands = [Path(name)]
    dirs = []
    if os.environ.get(FIXTURE_ENV):
        dirs.append(Path(os.environ[FIXTURE_ENV]))
    dirs.append(Path(__file__).resolve().parent / "data")
    for d in dirs:
        cands += [d / name, d / f"{name}.fix"]
    for c in cands:
        if c.is_file():
            return c
    raise UsageError(f"fixture '{name}' not found")


def _primes(text: str) -> list[int]:
    try:
        return [int(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError("primes must be a comma separated list of integers") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="relchab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--budget", type=int, default=10 ** 7, help="cap on enumerated objects")
    common.add_argument("--threads", type=int, default=1, help="accepted for interface stability; runs are sequential")
    common.add_argument("--out", type=Path, help="also write the report to this file")
    common.add_argument("--extended", action="store_true", help="allow long runs")

    def fixture_cmd(name, help_):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.add_argument("--fixture", required=True)
        return p

    fixture_cmd("validate", "parse and validate a fixture").add_argument(
        "--shallow", action="store_true", help="skip checks modulo the fixture's check prime")
    p = fixture_cmd("criterion", "run a Chabauty criterion on a named residue configuration")
    p.add_argument("--config", required=True)
    p.add_argument("--prime", type=int)
    p.add_argument("--order", choices=("first", "higher"), default="first")
    p = fixture_cmd("picard", "group structure of the Jacobian over F_p")
    p.add_argument("--prime", type=int, required=True)
    p.add_argument("--mode", choices=("sample", "exact"), default="sample")
    p.add_argument("--samples", type=int, default=8)
    p = fixture_cmd("sieve", "Mordell-Weil sieve for the fixture's known-point list")
    p.add_argument("--primes", type=_primes)
    p.add_argument("--degree", type=int)
    p.add_argument("--forget", action="append", default=[], metavar="P:R",
                   help="compose phi_p with multiplication by R (repeatable)")
    p.add_argument("--drop", action="append", default=[], metavar="LABEL", help="omit a known point")
    p = fixture_cmd("probe", "sieve with dropped known points, then search small vectors in survivors")
    p.add_argument("--primes", type=_primes)
    p.add_argument("--degree", type=int)
    p.add_argument("--forget", action="append", default=[], metavar="P:R")
    p.add_argument("--drop", action="append", default=[], metavar="LABEL")
    p.add_argument("--bound", type=int, default=2)
    p = sub.add_parser("selftest", parents=[common], help="run the acceptance suite")
    p.add_argument("--pytest-args", default="", help="extra arguments passed to pytest")
    return ap


def _emit(text: str, out: Path | None) -> None:
    sys.stdout.write(text)
    if out is not None:
        out.write_text(text, encoding="utf-8")


def _load(args, deep: bool = True):
    from .fixtures_io import parse_fixture
    return parse_fixture(resolve_fixture(args.fixture), deep=deep)


def cmd_validate(args) -> int:
    from .fixtures_io import serialize_report
    fx = _load(args, deep=not args.shallow)
    info = {"report": "validate", "fixture": fx.name, "genus": fx.genus, "cusps": len(fx.cusps),
            "points": len(fx.points), "known": len(fx.known),
            "involutions": list(fx.involutions), "configs": list(fx.configs)}
    if fx.quotient:
        info["quotient"] = fx.quotient.model().describe()
        info["quotient_genus"] = fx.quotient.genus
    if fx.mw:
        info["mw_torsion"] = [g.order for g in fx.mw.torsion]
        info["mw_rank"] = fx.mw.rank
    info["status"] = "ok"
    _emit(serialize_report(info), args.out)
    return EXIT_OK


def cmd_criterion(args) -> int:
    from .chabauty import annihilator_space, first_order_check, higher_order_check
    from .fixtures_io import residue_configuration, serialize_report
    fx = _load(args, deep=False)
    cfg, p, W = residue_configuration(fx, args.config, args.prime)
    qg = fx.quotient.genus if fx.quotient and fx.involution(fx.quotient.involution) == W else None
    ann = annihilator_space(fx.model(), [W], p, quotient_genus=qg)
    if args.order == "first":
        rep = first_order_check(cfg, p, ann)
    else:
        rep = higher_order_check(cfg, p, ann, cap=args.budget)
    _emit(serialize_report(rep), args.out)
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_picard(args) -> int:
    from .curve import reduce_mod_p
    from .fixtures_io import serialize_group, serialize_report
    from .picard import Jacobian, group_structure
    fx = _load(args, deep=False)
    jac = Jacobian(reduce_mod_p(fx.model(), args.prime), seed=args.seed)
    gs = group_structure(jac, mode=args.mode, samples=args.samples, seed=args.seed)
    lines = serialize_group(gs, args.prime)
    lines.append(f"exponent_lower_bound={gs.exponent}")
    _emit(serialize_report(lines), args.out)
    return EXIT_OK


def _forget_map(items: Sequence[str]) -> dict:
    out: dict = {}
    for it in items:
        try:
            p, r = (int(x) for x in it.split(":"))
        except ValueError:
            raise UsageError(f"--forget expects P:R, got '{it}'") from None
        out.setdefault(p, []).append(r)
    return out


def _sieve_setup(args):
    from .fixtures_io import sieve_problem
    fx = _load(args, deep=False)
    if fx.sieve is None:
        raise UsageError("fixture has no [sieve] section")
    if args.degree is not None and args.degree != fx.sieve.degree:
        raise UsageError(f"fixture describes degree {fx.sieve.degree} divisors")
    unknown = [d for d in args.drop if d not in {k.label for k in fx.known}]
    if unknown:
        raise UsageError(f"unknown known-point label(s): {', '.join(unknown)}")
    prob = sieve_problem(fx, args.primes, drop=args.drop)
    cost = sum(p ** prob.e for p in prob.primes)
    if cost > SIEVE_QUICK_LIMIT and not args.extended:
        raise UsageError(f"estimated enumeration size {cost} needs --extended")
    return fx, prob


def _progress(line: str) -> None:
    print(line, file=sys.stderr, flush=True)


def cmd_sieve(args) -> int:
    from .fixtures_io import serialize_report
    from .sieve import run_sieve
    _, prob = _sieve_setup(args)
    rep = run_sieve(prob, forget=_forget_map(args.forget), cap=args.budget, budget=args.budget,
                    progress=_progress)
    _emit(serialize_report(rep), args.out)
    return EXIT_OK if rep.success else EXIT_FAIL


def cmd_probe(args) -> int:
    from .fixtures_io import serialize_report, serialize_sieve
    from .sieve import probe_small_vectors, run_sieve
    _, prob = _sieve_setup(args)
    rep = run_sieve(prob, forget=_forget_map(args.forget), cap=args.budget, budget=args.budget,
                    progress=_progress)
    lines = serialize_sieve(rep)
    cands = probe_small_vectors(rep.state, args.bound, rep.prime_data) if rep.state.reps else []
    lines.append(f"candidates={len(cands)}")
    for c in cands:
        lines.append("candidate=" + ",".join(str(x) for x in c.vector))
        for p in sorted(c.fibres):
            for d in c.fibres[p]:
                lines.append(f"candidate.{p} divisor={d}")
    _emit(serialize_report(lines), args.out)
    return EXIT_OK if (cands or not rep.state.reps) else EXIT_FAIL


def cmd_selftest(args) -> int:
    try:
        import pytest
    except ImportError:
        raise UsageError("selftest needs pytest (install the 'test' extra)") from None
    tests = Path(__file__).resolve().parents[2] / "tests" / "test_acceptance.py"
    if not tests.is_file():
        raise UsageError("acceptance tests are not available in this installation")
    if args.extended:
        os.environ["RELCHAB_EXTENDED"] = "1"
    code = pytest.main([str(tests), "-q", "-s"] + args.pytest_args.split())
    return EXIT_OK if code == 0 else EXIT_FAIL


COMMANDS = {"validate": cmd_validate, "criterion": cmd_criterion, "picard": cmd_picard,
            "sieve": cmd_sieve, "probe": cmd_probe, "selftest": cmd_selftest}


def run_command(argv: Sequence[str] | None = None) -> int:
    from .fixtures_io import FixtureError
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"relchab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FixtureError as exc:
        print(f"relchab: fixture error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BudgetExceeded as exc:
        print(f"relchab: budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
