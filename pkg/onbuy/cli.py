"""
Command-line front end.

Exit codes: 0 success, 1 self-test or validation failure, 2 usage error.
"""

import argparse
from dataclasses import asdict
from functools import partial
import json
import logging
from pathlib import Path
import sys
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from . import __version__
from .harness import (
    CSV_COLUMNS,
    FLOAT_FORMAT,
    TrialConfig,
    build_report,
    collect_trials,
    summarize,
    summary_frame,
    theory_bounds,
    trials_frame,
    write_csv,
)
from .purchase_core import (
    clique_exponents,
    compute_ck,
    compute_rho,
    compute_rho_density,
    optimize_avg2,
    rho_invariants,
)
from .stream import InvalidArgumentError, RngHandle, decompose_min_of_m_batch
from .strategies.registry import STRUCTURES
from .strategies.tree import evaluate_buytree_cost
from .utils import setup_logger

logger = logging.getLogger("onbuy.CLI")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2


def _parse_value(text: str) -> Any:
    lowered = text.strip().lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    if lowered in ("none", "null"):
        return None
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def parse_params(
    pairs: Optional[Sequence[str]], params_file: Optional[str] = None
) -> Dict[str, Any]:
    """Merge a flat JSON document and ``key=value`` flags (flags win)."""
    params: Dict[str, Any] = {}
    if params_file:
        with open(params_file, encoding="utf-8") as f:
            loaded = json.load(f)
        if not isinstance(loaded, dict):
            raise InvalidArgumentError(f"{params_file} must hold a flat JSON object")
        params.update(loaded)
    for pair in pairs or []:
        key, sep, value = pair.partition("=")
        if not sep or not key.strip():
            raise InvalidArgumentError(f"Expected key=value, got {pair!r}")
        params[key.strip()] = _parse_value(value)
    return params


def _write_text(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    path = Path(out)
    if str(path.parent) not in ("", "."):
        path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    logger.info(f"Wrote {path}")


def _dump_json(data: Any) -> str:
    return json.dumps(data, indent=2, sort_keys=True, allow_nan=False) + "\n"


# ---------------------------------------------------------------------------
# thresholds / constants
# ---------------------------------------------------------------------------


def cmd_thresholds(args: argparse.Namespace) -> int:
    if not 1 <= args.k <= args.N:
        args.parser.error(f"need 1 <= k <= N, got k={args.k}, N={args.N}")
    if args.density is not None and not args.density > 0:
        args.parser.error(f"--density must be positive, got {args.density}")
    if args.density is None or args.density == 1.0:
        table = compute_rho(args.k, args.N)
    else:
        table = compute_rho_density(args.k, args.N, args.density)
    _write_text(table.to_csv(), args.out)
    return EXIT_OK


def cmd_constants(args: argparse.Namespace) -> int:
    if args.k_max < 1:
        args.parser.error(f"--k-max must be >= 1, got {args.k_max}")
    if args.r_max < 3:
        args.parser.error(f"--r-max must be >= 3, got {args.r_max}")
    ck = compute_ck(args.k_max)
    data = {
        "c_k": {str(k): ck.c_k(k) for k in range(1, ck.k_max + 1)},
        "d_k": {str(k): ck.d_k(k) for k in range(1, ck.k_max + 1)},
        "clique_exponents": {str(r): d for r, d in clique_exponents(args.r_max).items()},
    }
    _write_text(_dump_json(data), args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate / report
# ---------------------------------------------------------------------------


def cmd_simulate(args: argparse.Namespace) -> int:
    params = parse_params(args.param, args.params_file)
    configs = [
        TrialConfig(
            structure=args.structure,
            n=n,
            order=args.order,
            trials=args.trials,
            seed=args.seed,
            params=params,
            threads=args.threads,
        )
        for n in args.n
    ]
    summaries = []
    entries = []
    per_trial = []
    for config in configs:
        results = collect_trials(config)
        summary = summarize(config, results)
        summaries.append(summary)
        entries.append(
            {
                "config": config.describe(),
                "summary": summary.to_dict(),
                "bounds": [
                    asdict(b) for b in theory_bounds(config.structure, config.n, params)
                ],
            }
        )
        frame = trials_frame(results)
        frame.insert(0, "n", config.n)
        per_trial.append(frame)

    frame = summary_frame(summaries)
    if args.out is None:
        sys.stdout.write(frame.to_csv(index=False, float_format=FLOAT_FORMAT, na_rep=""))
    else:
        write_csv(frame, args.out)
    report_path = args.report
    if report_path is None and args.out is not None:
        report_path = str(Path(args.out).with_suffix(".json"))
    if report_path is not None:
        _write_text(_dump_json({"results": entries}), report_path)
    if args.trials_out is not None:
        write_csv(pd.concat(per_trial, ignore_index=True), args.trials_out)

    invalid = [s for s in summaries if s.valid_rate < 1.0]
    for s in invalid:
        logger.error(f"{s.structure} n={s.n}: {s.valid_rate:.3f} of the outcomes are valid")
    return EXIT_FAILED if invalid else EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    frames = []
    for path in args.inputs:
        frame = pd.read_csv(path)
        missing = [c for c in CSV_COLUMNS if c not in frame.columns]
        if missing:
            raise InvalidArgumentError(f"{path} is not a simulate CSV (missing {missing})")
        frames.append(frame)
    merged = pd.concat(frames, ignore_index=True)
    report = build_report(merged, parse_params(args.param, args.params_file))
    _write_text(_dump_json(report), args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# lowerbound
# ---------------------------------------------------------------------------


def cmd_lowerbound(args: argparse.Namespace) -> int:
    if args.n < 10:
        args.parser.error(f"--n must be >= 10, got {args.n}")
    if args.iters < 1 or not args.tol > 0:
        args.parser.error("--iters must be >= 1 and --tol positive")
    program = optimize_avg2(args.n, iterations=args.iters, tolerance=args.tol)
    data: Dict[str, Any] = {
        "n": program.n,
        "objective": program.objective,
        "raw_objective": program.raw_objective,
        "residual": program.residual,
        "converged": program.converged,
        "iterations": program.iterations,
    }
    if args.sequences:
        data["q"] = program.q.tolist()
        data["a"] = program.a.tolist()
        data["theta"] = program.theta.tolist()
    _write_text(_dump_json(data), args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# selftest
# ---------------------------------------------------------------------------


Check = Tuple[str, Callable[[], Tuple[bool, str]]]

TABLE_INVARIANTS = ("diagonal", "monotonicity", "k-ordering", "one-purchase-bound")


def _table_checks(inject_fault: bool) -> List[Check]:
    table = None
    if inject_fault:
        table = compute_rho(3, 200)
        table.rho[2, 100] = table.rho[2, 99] + 1e-3
    results: Dict[str, bool] = {}

    def run(name: str) -> Tuple[bool, str]:
        if not results:
            results.update(rho_invariants(3, 200, table))
        ok = results[name]
        return ok, "" if ok else f"rho table violates {name}"

    return [(f"rho {name}", partial(run, name)) for name in TABLE_INVARIANTS]


def _check_sandwich() -> Tuple[bool, str]:
    table = compute_rho(1, 2000)
    for n in range(33, 2001):
        rho = table.value(1, n)
        if not 2.0 * (1.0 - 10.0 / n) / n <= rho <= 2.0 / (n + 1):
            return False, f"rho[1][{n}] = {rho} outside the finite-N bounds"
    return True, ""


def _check_ck() -> Tuple[bool, str]:
    ck = compute_ck(1000)
    k = np.arange(1, 1001)
    if ck.c_k(1) != 2.0:
        return False, "c_1 != 2"
    if np.any(ck.c < k * k / 2.0) or np.any(ck.c > 2.0 * k * k):
        return False, "c_k outside [k^2/2, 2k^2]"
    if np.any(ck.d <= k) or np.any(ck.d >= k + 1):
        return False, "d_k outside (k, k+1)"
    return True, ""


def _check_clique_exponents() -> Tuple[bool, str]:
    d = clique_exponents(10)
    expected = {3: 4 / 7, 4: 2 / 9, 5: 1 / 10}
    expected.update({r: 1.0 / (11 * 2 ** (r - 5) - 1) for r in range(5, 11)})
    bad = [r for r, v in expected.items() if abs(d[r] - v) > 1e-12]
    return not bad, f"d_r mismatch at r={bad}" if bad else ""


def _check_min_of_m() -> Tuple[bool, str]:
    rng = RngHandle(0).generator(0)
    costs = rng.random(1000)
    z = decompose_min_of_m_batch(costs, 10, rng)
    ok = bool(np.all(z.min(axis=1) == costs))
    return ok, "" if ok else "latent minimum differs from the cost"


def _check_buytree() -> Tuple[bool, str]:
    value = evaluate_buytree_cost(0.69, 3.5)
    ok = 1.2020569 < value < 2.31
    return ok, "" if ok else f"analytic two-step cost {value} outside (zeta(3), 2.31)"


def _check_avg2() -> Tuple[bool, str]:
    program = optimize_avg2(100)
    if program.residual > 1e-9:
        return False, f"constraint residual {program.residual:.3g}"
    if program.objective < 2.499:
        return False, f"objective {program.objective:.6f} below 2.499"
    return True, ""


def _check_structures() -> Tuple[bool, str]:
    cases = [
        ("k-purchase", 50, "rom", {"k": 3}),
        ("path", 40, "rom", {}),
        ("triangle", 30, "aom:vertex-sweep", {}),
        ("spanning-tree", 50, "rom", {}),
        ("arborescence", 30, "pom", {}),
        ("bipartite-pm", 16, "aom:identity", {}),
        ("pm", 16, "rom", {}),
        ("hamilton", 20, "rom", {}),
        ("hamilton-directed", 16, "rom", {}),
    ]
    for structure, n, order, params in cases:
        config = TrialConfig(structure, n, order, trials=2, seed=1, params=params, threads=1)
        summary = summarize(config, collect_trials(config))
        if summary.valid_rate < 1.0:
            return False, f"{structure} n={n} {order}: invalid outcome"
    return True, ""


def selftest_checks(inject_fault: bool = False) -> List[Check]:
    return _table_checks(inject_fault) + [
        ("rho finite-N sandwich", _check_sandwich),
        ("c_k bounds", _check_ck),
        ("clique exponents", _check_clique_exponents),
        ("min-of-m decomposition", _check_min_of_m),
        ("two-step analytic cost", _check_buytree),
        ("average-two program", _check_avg2),
        ("structure validity", _check_structures),
    ]


def cmd_selftest(args: argparse.Namespace) -> int:
    failed = []
    lines = []
    for name, check in selftest_checks(args.inject_fault):
        try:
            ok, detail = check()
        except Exception as e:
            ok, detail = False, f"{type(e).__name__}: {str(e)}"
        lines.append(f"{'PASS' if ok else 'FAIL'} {name}" + (f": {detail}" if detail else ""))
        if not ok:
            failed.append(name)
    lines.append(
        f"{len(lines) - len(failed)}/{len(lines)} checks passed"
        + (f"; failed: {', '.join(failed)}" if failed else "")
    )
    sys.stdout.write("\n".join(lines) + "\n")
    return EXIT_FAILED if failed else EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="onbuy",
        description="Online purchasing of random structures: tables, simulations, reports.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "--log-level",
        default="WARNING",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Logging level for messages on stderr (default: WARNING)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("thresholds", help="k-purchase threshold table as CSV")
    p.add_argument("--k", type=int, required=True, help="Largest purchase count")
    p.add_argument("--N", type=int, required=True, help="Largest item count")
    p.add_argument("--density", type=float, help="Latent-law density factor D")
    p.add_argument("--out", help="Output path (default: stdout)")
    p.set_defaults(handler=cmd_thresholds, parser=p)

    p = sub.add_parser("constants", help="c_k, d_k and clique exponents as JSON")
    p.add_argument("--k-max", type=int, default=10)
    p.add_argument("--r-max", type=int, default=8)
    p.add_argument("--out")
    p.set_defaults(handler=cmd_constants, parser=p)

    p = sub.add_parser("simulate", help="Monte Carlo trials of one structure")
    p.add_argument("--structure", required=True, choices=sorted(STRUCTURES))
    p.add_argument("--n", type=int, nargs="+", required=True, help="One or more sizes")
    p.add_argument("--order", default="rom", help="rom, pom or aom:<adversary>")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--param", action="append", metavar="KEY=VALUE", help="Strategy override")
    p.add_argument("--params-file", help="Flat JSON object of strategy overrides")
    p.add_argument("--threads", type=int, help="Worker cap (default: ONBUY_THREADS, 0 = all)")
    p.add_argument("--out", help="Summary CSV (default: stdout)")
    p.add_argument("--report", help="JSON report (default: --out with a .json suffix)")
    p.add_argument("--trials-out", help="Per-trial CSV")
    p.set_defaults(handler=cmd_simulate, parser=p)

    p = sub.add_parser("lowerbound", help="Average-two-purchase optimum as JSON")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--iters", type=int, default=2000)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--sequences", action="store_true", help="Include q, a and theta")
    p.add_argument("--out")
    p.set_defaults(handler=cmd_lowerbound, parser=p)

    p = sub.add_parser("report", help="Merge simulate CSVs and attach bounds")
    p.add_argument("--in", dest="inputs", nargs="+", required=True)
    p.add_argument("--param", action="append", metavar="KEY=VALUE")
    p.add_argument("--params-file")
    p.add_argument("--out")
    p.set_defaults(handler=cmd_report, parser=p)

    p = sub.add_parser("selftest", help="Run the invariant suite at reduced scale")
    p.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(handler=cmd_selftest, parser=p)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        setup_logger(level=args.log_level)
        return args.handler(args)
    except SystemExit as e:
        return EXIT_OK if e.code in (None, 0) else EXIT_USAGE
    except ValueError as e:
        logger.error(str(e))
        sys.stderr.write(f"onbuy: error: {e}\n")
        return EXIT_USAGE
    except RuntimeError as e:
        sys.stderr.write(f"onbuy: failed: {e}\n")
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
