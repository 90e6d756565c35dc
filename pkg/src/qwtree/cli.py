"""Command-line front end: ``qwtree <subcommand> ...``.

Exit codes: 0 success, 1 a verification check failed, 2 usage or coin spec
error, 3 resource limit, 4 numerical failure.  ``density`` additionally
returns 10 when atoms were found and 11 when some grid angles are
inconclusive.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .coins import CoinSpecError, CirculantCoin, degenerate_kind, parse_angle, parse_coin
from .implicit import BranchError, DegenerateCoinError, canonical_phi, continue_branch
from .moments import MemoryBudgetError, memory_budget, moment_memory_estimate, moments
from .spectral import atom_candidates, density, special_case_spectrum
from .tree_index import LayoutError, Letter, TreeKind, WordError, decode
from .verify import format_table, reports_to_json, run_suite
from .walk import orbit_trace, uniform

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_RESOURCE, EXIT_NUMERIC = 0, 1, 2, 3, 4
EXIT_ATOMS, EXIT_INCONCLUSIVE = 10, 11


class UsageError(Exception):
    pass


def _header(coin: CirculantCoin | None, extra: str = "") -> dict:
    h = {"tool": f"qwtree {__version__}"}
    if coin is not None:
        h["coin"] = coin.label()
    if extra:
        h["run"] = extra
    return h


def _header_text(h: dict) -> str:
    return "\n".join(f"{k}: {v}" if k != "tool" else v for k, v in h.items())


def _emit(out: str | None, header: dict, csv_text=None, payload=None) -> None:
    """Write CSV or JSON by extension; CSV to stdout when no path is given."""
    if out is None:
        if csv_text is None:
            sys.stdout.write(json.dumps({"header": header, **payload}, indent=2) + "\n")
        else:
            sys.stdout.write(csv_text(_header_text(header)))
        return
    path = Path(out)
    if path.suffix == ".json":
        if payload is None:
            raise UsageError("this subcommand writes CSV only")
        path.write_text(json.dumps({"header": header, **payload}, indent=2) + "\n")
    elif path.suffix == ".csv":
        if csv_text is None:
            raise UsageError("this subcommand writes JSON only")
        path.write_text(csv_text(_header_text(header)))
    else:
        raise UsageError(f"unknown output extension {path.suffix!r} (use .csv or .json)")


def _csv_block(header: str, columns, rows) -> str:
    lines = [f"# {ln}" for ln in header.splitlines()]
    lines.append(",".join(columns))
    lines += [",".join(repr(x) if isinstance(x, float) else str(x) for x in r) for r in rows]
    return "\n".join(lines) + "\n"


# -- subcommands ---------------------------------------------------------------------------


def cmd_coin(args) -> int:
    coin = parse_coin(args.coin)
    a, b, g = coin.params
    perm = degenerate_kind(coin)
    print(f"# qwtree {__version__}")
    print(f"coin {coin.label()}")
    for row in coin.matrix:
        print("  " + "  ".join(f"{x.real:+.12f}{x.imag:+.12f}j" for x in row))
    print("eigenphases " + " ".join(f"{t:.12f}" for t in coin.eigenphases))
    print(f"unitarity_defect {coin.unitarity_defect():.3e}")
    print(f"degenerate {perm.kind if perm else 'no'}")
    return EXIT_OK


def cmd_moments(args) -> int:
    coin = parse_coin(args.coin)
    kind = TreeKind(args.kind)
    need = moment_memory_estimate(args.n, kind, args.method)
    print(f"memory estimate: {need / 2**20:.1f} MiB (budget {memory_budget() / 2**20:.1f} MiB)",
          file=sys.stderr)
    ms = moments(coin, args.n, kind, method=args.method)
    h = _header(coin, f"moments n={args.n} kind={kind.name} method={args.method}")
    payload = {"n": list(range(len(ms.mu))), "re_mu": ms.mu.real.tolist(), "im_mu": ms.mu.imag.tolist()}
    _emit(args.out, h, ms.to_csv, payload)
    return EXIT_OK


def _atom_rows(cands):
    return [(c.theta, c.multiplicity, float(c.weight.real), float(c.weight.imag), c.radial,
             "yes" if c.accepted else "no") for c in cands]


_ATOM_COLS = ("theta", "multiplicity", "re_weight", "im_weight", "radial_weight", "accepted")


def _special_table(coin, kind=TreeKind.SubtreeAB, theta=None, delta=0.0):
    rep = special_case_spectrum(coin, kind, theta, delta)
    rows = [(float(np.angle(l) % (2 * math.pi)), float(l.real), float(l.imag), float(w))
            for l, w in zip(rep.eigenvalues, rep.weights)]
    return rep, rows


def cmd_density(args) -> int:
    coin = parse_coin(args.coin)
    perm = degenerate_kind(coin)
    if perm is not None and perm.kind != "identity":
        print(f"notice: {perm.kind} coin has pure point spectrum; printing its atom table",
              file=sys.stderr)
        rep, rows = _special_table(coin)
        h = _header(coin, "density routed to special_case_spectrum")
        cols = ("theta", "re_lambda", "im_lambda", "weight")
        _emit(args.out, h, lambda t: _csv_block(t, cols, rows), rep.to_dict())
        return EXIT_ATOMS
    sd = density(coin, args.grid, workers=args.threads)
    h = _header(coin, f"density grid={args.grid} route={sd.route}")
    _emit(args.out, h, sd.to_csv, sd.to_dict())
    print(f"ac mass {sd.ac_mass:.6f}, atoms {len(sd.atoms)}, total {sd.total_mass:.6f}",
          file=sys.stderr)
    if sd.inconclusive and not sd.atoms:
        return EXIT_INCONCLUSIVE
    return EXIT_ATOMS if sd.atoms else EXIT_OK


def cmd_atoms(args) -> int:
    coin = parse_coin(args.coin)
    if degenerate_kind(coin) is not None:
        print("notice: permutation coin; atoms come from its finite blocks", file=sys.stderr)
        rep, rows = _special_table(coin)
        h = _header(coin, "atoms via special_case_spectrum")
        cols = ("theta", "re_lambda", "im_lambda", "weight")
        _emit(args.out, h, lambda t: _csv_block(t, cols, rows), rep.to_dict())
        return EXIT_OK
    cands = atom_candidates(coin)
    rows = _atom_rows(cands)
    h = _header(coin, "atom candidates from unit-circle zeros of c5")
    payload = {"candidates": [dict(zip(_ATOM_COLS, r)) for r in rows]}
    _emit(args.out, h, lambda t: _csv_block(t, _ATOM_COLS, rows), payload)
    return EXIT_OK


def _parse_start(s: str, kind: TreeKind):
    if s == "root":
        return None
    word, _, coin = s.partition(":")
    if not coin:
        raise UsageError("start must be 'root' or '<word>:<coin letter>', e.g. ab:c")
    try:
        return decode(word, kind), Letter[coin]
    except (KeyError, WordError) as exc:
        raise UsageError(f"bad start {s!r}: {exc}") from exc


def cmd_orbit(args) -> int:
    coin = parse_coin(args.coin)
    kind = TreeKind(args.kind)
    try:
        rep = orbit_trace(uniform(coin), _parse_start(args.start, kind), args.max, kind)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    h = _header(coin, f"orbit start={args.start} max={args.max}")
    rows = [(i, s) for i, s in enumerate(rep.words())]
    payload = {"states": rep.words(), "period": rep.period,
               "phase": [rep.phase.real, rep.phase.imag]}
    _emit(args.out, h, lambda t: _csv_block(t + f"\nperiod: {rep.period}", ("step", "state"), rows),
          payload)
    return EXIT_OK


def cmd_branch(args) -> int:
    coin = parse_coin(args.coin)
    if not 0 < args.rmax < 1:
        raise UsageError("--rmax must lie in (0, 1)")
    theta = parse_angle(args.ray)
    try:
        path = continue_branch(canonical_phi(coin), theta, args.rmax, steps=args.steps)
    except BranchError as exc:
        diag = Path(args.diagnostics)
        diag.write_text(json.dumps({"header": _header(coin), "error": str(exc),
                                    "diagnostics": exc.diagnostics}, indent=2, default=str) + "\n")
        print(f"branch break: {exc}; diagnostics in {diag}", file=sys.stderr)
        return EXIT_NUMERIC
    h = _header(coin, f"branch theta={theta!r} rmax={args.rmax} steps={args.steps}")
    rows = [(p.r, p.g.real, p.g.imag, p.method, p.confidence) for p in path.points]
    cols = ("r", "re_g", "im_g", "method", "confidence")
    _emit(args.out, h, lambda t: _csv_block(t, cols, rows), path.to_dict())
    return EXIT_OK


def cmd_verify(args) -> int:
    reports = run_suite(args.suite, args.seed)
    if args.out and args.out.endswith(".json"):
        Path(args.out).write_text(reports_to_json(reports, args.seed) + "\n")
    elif args.out:
        raise UsageError("verify writes .json reports only")
    print(f"# qwtree {__version__}")
    print(format_table(reports, args.seed))
    return EXIT_CHECK if any(r.failed for r in reports) else EXIT_OK


def cmd_special(args) -> int:
    coin = parse_coin(args.coin)
    kind = TreeKind(args.kind)
    theta = parse_angle(args.theta) if args.theta is not None else None
    delta = parse_angle(args.delta)
    rep, rows = _special_table(coin, kind, theta, delta)
    h = _header(coin, f"special kind={kind.name} theta={theta} delta={delta}")
    cols = ("theta", "re_lambda", "im_lambda", "weight")
    extra = (f"\nopen_orbit: {rep.open_orbit}\nblock: {' '.join(rep.block)}"
             f"\nessential_ok: {rep.essential_matches() if len(rep.essential) else 'n/a'}")
    _emit(args.out, h, lambda t: _csv_block(t + extra, cols, rows), rep.to_dict())
    return EXIT_OK


# -- parser --------------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qwtree", description="Coined quantum walks on the rooted binary tree.")
    p.add_argument("--version", action="version", version=f"qwtree {__version__}")
    p.add_argument("--threads", type=int, default=None, help="cap on worker threads")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(fn=fn)
        return sp

    sp = add("coin", cmd_coin, "print a coin matrix and its eigenphases")
    sp.add_argument("--coin", required=True)

    sp = add("moments", cmd_moments, "return amplitudes mu_0..mu_N")
    sp.add_argument("--coin", required=True)
    sp.add_argument("--n", type=int, default=20)
    sp.add_argument("--kind", default="ab", choices=["ab", "ac"])
    sp.add_argument("--method", default="horizon", choices=["horizon", "direct"])
    sp.add_argument("--out")

    sp = add("density", cmd_density, "absolutely continuous density on an angle grid")
    sp.add_argument("--coin", required=True)
    sp.add_argument("--grid", type=int, default=1024)
    sp.add_argument("--out")

    sp = add("atoms", cmd_atoms, "atom candidates and their weights")
    sp.add_argument("--coin", required=True)
    sp.add_argument("--out")

    sp = add("orbit", cmd_orbit, "orbit of a basis state under a permutation coin")
    sp.add_argument("--coin", required=True)
    sp.add_argument("--start", default="root")
    sp.add_argument("--max", type=int, default=64)
    sp.add_argument("--kind", default="ab", choices=["ab", "ac"])
    sp.add_argument("--out")

    sp = add("branch", cmd_branch, "continue the branch of g along a ray")
    sp.add_argument("--coin", required=True)
    sp.add_argument("--ray", default="0")
    sp.add_argument("--rmax", type=float, default=0.9)
    sp.add_argument("--steps", type=int, default=512)
    sp.add_argument("--diagnostics", default="branch_diagnostics.json")
    sp.add_argument("--out")

    sp = add("verify", cmd_verify, "run the verification suite")
    sp.add_argument("--suite", default="fast", choices=["fast", "all"])
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out")

    sp = add("special", cmd_special, "spectrum of a permutation coin from its finite blocks")
    sp.add_argument("--coin", required=True)
    sp.add_argument("--kind", default="ab", choices=["ab", "ac", "a"])
    sp.add_argument("--theta")
    sp.add_argument("--delta", default="0")
    sp.add_argument("--out")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.threads is not None and args.threads < 1:
            raise UsageError("--threads must be positive")
        return args.fn(args)
    except (UsageError, CoinSpecError, DegenerateCoinError) as exc:
        print(f"qwtree: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (MemoryBudgetError, LayoutError) as exc:
        print(f"qwtree: resources: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except BranchError as exc:
        print(f"qwtree: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
