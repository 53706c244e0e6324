"""Command-line interface: ``bellvis {vcrit,tables,formulas,check-entangled}``.

Every command writes a JSON run record (command line, config, version,
timestamp, seed, results).  The destination is ``--out`` if given, otherwise
a timestamped file in ``$BELLVIS_OUTPUT_DIR`` (default ``./bellvis-runs``).
With ``--format csv`` the tabular payload goes to ``--out`` and the record
is written next to it with a ``.json`` suffix.

Exit codes: 0 success, 2 usage error, 3 scenario too large, 4 LP failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
import time
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

from . import __version__
from .behavior import Scenario
from .inequalities import (
    find_n_crit,
    vcrit_dicke,
    vcrit_ghz,
    vcrit_nm2_product,
    vcrit_nm3_product,
)
from .local_polytope import (
    DESK_STRATEGY_LIMIT,
    STRATEGY_CAP,
    LPSolverError,
    ScenarioTooLarge,
)
from .optimize import (
    HINT_FAMILIES,
    OptimizationConfig,
    check_pure_entangled_violation,
    optimize_settings,
)
from .states import (
    PureState,
    build_dicke,
    build_ghz,
    build_partially_product,
    load_state,
    random_pure_state,
)

logger = logging.getLogger("bellvis")

EXIT_OK, EXIT_USAGE, EXIT_TOO_LARGE, EXIT_SOLVER = 0, 2, 3, 4
OUTPUT_DIR_ENV = "BELLVIS_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "bellvis-runs"


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------------------
# parsing helpers


def _core_state(spec: str) -> PureState:
    spec = spec.lower()
    if spec.startswith("ghz"):
        return build_ghz(int(spec[3:]))
    if spec.startswith("w"):
        return build_dicke(int(spec[1:]), 1)
    raise UsageError(f"unknown core state {spec!r} (use ghzM or wM)")


def parse_state(spec: str) -> PureState:
    """``ghz:N``, ``w:N``, ``dicke:N:e``, ``prod:Z:ghzM``, ``file:path``."""
    kind, _, rest = spec.partition(":")
    try:
        if kind == "ghz":
            return build_ghz(int(rest))
        if kind == "w":
            return build_dicke(int(rest), 1)
        if kind == "dicke":
            n, e = rest.split(":")
            return build_dicke(int(n), int(e))
        if kind == "prod":
            z, core = rest.split(":")
            return build_partially_product(int(z), _core_state(core))
        if kind == "file":
            return load_state(rest)
    except UsageError:
        raise
    except (ValueError, OSError) as exc:
        raise UsageError(f"bad state spec {spec!r}: {exc}") from exc
    raise UsageError(f"unknown state spec {spec!r} (ghz:N, w:N, dicke:N:e, prod:Z:ghzM, file:path)")


def parse_range(text: str) -> list[int]:
    """``3..10``, ``3,5,7`` or a single integer."""
    out = []
    try:
        for part in text.split(","):
            if ".." in part:
                lo, hi = part.split("..")
                out.extend(range(int(lo), int(hi) + 1))
            else:
                out.append(int(part))
    except ValueError as exc:
        raise UsageError(f"bad range {text!r}") from exc
    return out


def load_reference_tables() -> dict:
    """Published critical visibilities bundled with the package."""
    return json.loads(resources.files("bellvis").joinpath("data/tables.json").read_text())


def _fmt(x) -> str:
    return "" if x is None else f"{x:.4f}"


# ---------------------------------------------------------------------------
# output


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def rows_to_csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) if isinstance(r[c], float) else r[c] for c in columns])
    return buf.getvalue()


def make_record(args, argv, results) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k != "func"}
    return {
        "command": args.command,
        "argv": list(argv),
        "config": cfg,
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "seed": getattr(args, "seed", None),
        "results": results,
    }


def _record_path(args) -> Path:
    if args.out:
        out = Path(args.out)
        return out.with_suffix(".json") if args.format == "csv" else out
    base = Path(os.environ.get(OUTPUT_DIR_ENV, DEFAULT_OUTPUT_DIR))
    stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S")
    return base / f"{args.command}-seed{getattr(args, 'seed', 0)}-{stamp}-{os.getpid()}.json"


def emit(args, argv, results, table=None) -> Path:
    """Print a summary, write CSV (if requested) and the run record."""
    if table is not None:
        text = rows_to_csv(*table)
        print(text, end="")
        if args.format == "csv" and args.out:
            atomic_write(Path(args.out), text)
    rec_path = _record_path(args)
    atomic_write(rec_path, json.dumps(make_record(args, argv, results), indent=1, sort_keys=True))
    logger.info("run record written to %s", rec_path)
    return rec_path


# ---------------------------------------------------------------------------
# commands


def _config(args) -> OptimizationConfig:
    hints = tuple(h for h in args.hints.split(",") if h) if args.hints else HINT_FAMILIES
    return OptimizationConfig(
        restarts=args.restarts,
        max_iterations=args.max_iterations,
        seed=args.seed,
        hints=hints,
        allow_large=args.allow_large,
    )


def _precheck(n: int, m: int, allow_large: bool) -> None:
    count = 2 ** (n * m)
    if count > STRATEGY_CAP or (count > DESK_STRATEGY_LIMIT and not allow_large):
        raise ScenarioTooLarge(
            f"n={n} with {m} settings has {count} deterministic strategies; "
            + (
                f"above the hard cap of {STRATEGY_CAP} (not runnable even with --allow-large)"
                if count > STRATEGY_CAP
                else f"above {DESK_STRATEGY_LIMIT}; pass --allow-large to run it"
            )
        )


def cmd_vcrit(args, argv):
    state = parse_state(args.state)
    _precheck(state.n_qubits, args.settings_per_party, args.allow_large)
    sc = Scenario.uniform(state.n_qubits, args.settings_per_party)
    cfg = _config(args)
    est = optimize_settings(state, sc, cfg)
    print(f"v_crit = {est.v_crit:.4f}  ({est.restarts_agreeing}/{cfg.restarts} restarts agree)")
    for i, party in enumerate(est.best_settings):
        desc = ", ".join(f"({s.theta:.4f}, {s.phi:.4f})" for s in party)
        print(f"  party {i + 1}: {desc}")
    cert = est.certificate
    print(f"certificate: local bound {cert.local_bound:.6f}, quantum value {cert.quantum_value:.6f}")
    results = est.to_json(seed=args.seed, config=cfg)
    results["state"] = args.state
    rows = [{"state": args.state, "v_crit": est.v_crit, "restarts_agreeing": est.restarts_agreeing}]
    emit(args, argv, results, (["state", "v_crit", "restarts_agreeing"], rows) if args.format == "csv" else None)
    return EXIT_OK


def _table1(args, cfg, reference):
    ref = {r[0]: r for r in reference["table1"]["rows"]}
    rows = []
    for n in range(3, args.max_n + 1):
        row = {"n": n}
        for col, state in (("ghz", build_ghz(n)), ("w", build_dicke(n, 1))):
            est = optimize_settings(state, Scenario.uniform(n, 2), cfg)
            p = ref[n][1 if col == "ghz" else 2] if n in ref else None
            row[col] = est.v_crit
            row[f"{col}_ref"] = p
            row[f"{col}_diff"] = None if p is None else est.v_crit - p
        logger.info("table1 n=%d ghz=%.4f w=%.4f", n, row["ghz"], row["w"])
        rows.append(row)
    return ["n", "ghz", "ghz_ref", "ghz_diff", "w", "w_ref", "w_diff"], rows


def _table2(args, cfg, reference):
    rows = []
    for n, zeros, value, best in reference["table2"]["rows"]:
        if n > args.max_n:
            continue
        state = build_ghz(n) if zeros == 0 else build_partially_product(zeros, build_ghz(n - zeros))
        est = optimize_settings(state, Scenario.uniform(n, 2), cfg)
        label = f"|{'0' * zeros}>|GHZ_{n - zeros}>" if zeros else f"|GHZ_{n}>"
        rows.append(
            {
                "n": n,
                "state": label,
                "zeros": zeros,
                "v_crit": est.v_crit,
                "ref": value,
                "diff": est.v_crit - value,
                "best": best,
            }
        )
        logger.info("table2 %s v_crit=%.4f", label, est.v_crit)
    return ["n", "state", "zeros", "v_crit", "ref", "diff", "best"], rows


def cmd_tables(args, argv):
    lo = 3 if args.which == "table1" else 2
    if args.max_n < lo:
        raise UsageError(f"--max-n must be at least {lo} for {args.which}")
    _precheck(args.max_n, 2, args.allow_large)
    cfg = _config(args)
    reference = load_reference_tables()
    columns, rows = (_table1 if args.which == "table1" else _table2)(args, cfg, reference)
    results = {
        "which": args.which,
        "max_n": args.max_n,
        "columns": columns,
        "rows": rows,
        "reference_version": reference["version"],
    }
    emit(args, argv, results, (columns, rows))
    return EXIT_OK


def cmd_formulas(args, argv):
    rows = []
    families = (
        ("ghz", args.ghz, vcrit_ghz),
        ("dicke", args.dicke, lambda n: vcrit_dicke(n, args.excitations)),
        ("nm2prod", args.nm2prod, vcrit_nm2_product),
        ("nm3prod", args.nm3prod, vcrit_nm3_product),
    )
    for name, spec, fn in families:
        for n in parse_range(spec) if spec else []:
            try:
                rows.append({"formula": name, "n": n, "value": fn(n)})
            except ValueError as exc:
                raise UsageError(f"{name} at n={n}: {exc}") from exc
    ncrit = {}
    for e in parse_range(args.ncrit) if args.ncrit else []:
        ncrit[e] = find_n_crit(e)
        print(f"N_crit(e={e}) = {ncrit[e]}")
    if not rows and not ncrit:
        raise UsageError("nothing requested; pass --ghz, --dicke, --nm2prod, --nm3prod or --ncrit")
    results = {"rows": rows, "n_crit": {str(k): v for k, v in ncrit.items()}}
    emit(args, argv, results, (["formula", "n", "value"], rows) if rows else None)
    return EXIT_OK


def cmd_check_entangled(args, argv):
    cfg = OptimizationConfig(restarts=args.restarts, max_iterations=args.max_iterations, seed=args.seed)
    if args.state:
        states = [(args.state, parse_state(args.state))]
    elif args.random:
        if args.random < 3:
            raise UsageError("--random needs at least 3 qubits")
        states = [
            (f"random:{args.random}:{t}", random_pure_state(args.random, [args.seed, t])) for t in range(args.trials)
        ]
    else:
        raise UsageError("pass --state or --random N")
    if states[0][1].n_qubits < 3:
        raise UsageError("the construction needs at least three qubits")
    rows = []
    for label, st in states:
        rep = check_pure_entangled_violation(st, cfg)
        rows.append(
            {"state": label, "violated": rep.violated, "value": rep.value, "pair": rep.pair, "report": rep.to_json()}
        )
    hits = sum(r["violated"] for r in rows)
    worst = min(r["value"] for r in rows)
    print(f"violations: {hits}/{len(rows)}  min value: {worst:.6g}")
    results = {"violations": hits, "trials": len(rows), "min_value": worst, "rows": rows}
    table = (["state", "violated", "value"], [{k: r[k] for k in ("state", "violated", "value")} for r in rows])
    emit(args, argv, results, table if args.format == "csv" else None)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _common(p, restarts=20):
    p.add_argument("--restarts", type=int, default=restarts)
    p.add_argument("--max-iterations", type=int, default=400)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--allow-large", action="store_true", help="permit LPs above 4^6 deterministic strategies")
    p.add_argument("--out", default=None, help="output path (record JSON, or CSV with --format csv)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bellvis", description="Critical white-noise visibilities of multiqubit states."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("vcrit", help="critical visibility of one state")
    p.add_argument("--state", required=True, help="ghz:N | w:N | dicke:N:e | prod:Z:ghzM | file:path")
    p.add_argument("--settings-per-party", type=int, default=2, choices=(2, 3))
    p.add_argument("--hints", default=None, help=f"comma list from {','.join(HINT_FAMILIES)}")
    _common(p)
    p.set_defaults(func=cmd_vcrit)

    p = sub.add_parser("tables", help="reproduce the GHZ/W or partially-product table")
    p.add_argument("which", choices=("table1", "table2"))
    p.add_argument("--max-n", type=int, default=5)
    p.add_argument("--hints", default=None)
    _common(p)
    p.set_defaults(func=cmd_tables)

    p = sub.add_parser("formulas", help="closed-form visibilities and N_crit")
    p.add_argument("--ghz", default=None, help="range, e.g. 3..10")
    p.add_argument("--dicke", default=None, help="range of n for the Dicke formula")
    p.add_argument("--excitations", type=int, default=1)
    p.add_argument("--nm2prod", default=None)
    p.add_argument("--nm3prod", default=None)
    p.add_argument("--ncrit", default=None, help="excitation numbers, e.g. 1,2")
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_formulas)

    p = sub.add_parser("check-entangled", help="symmetrized CH violation search for pure states")
    p.add_argument("--state", default=None)
    p.add_argument("--random", type=int, default=None, metavar="N", help="test Haar-random N-qubit states")
    p.add_argument("--trials", type=int, default=10)
    _common(p, restarts=8)
    p.set_defaults(func=cmd_check_entangled)
    return parser


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    t0 = time.perf_counter()
    try:
        code = args.func(args, argv)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ScenarioTooLarge as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TOO_LARGE
    except LPSolverError as exc:
        print(f"error: LP solver failed: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logger.info("done in %.1f s", time.perf_counter() - t0)
    return code


if __name__ == "__main__":
    sys.exit(main())
