"""Command-line driver: solve, verify, sample, regions, bench.

Exit codes: 0 success; 1 invalid input, I/O, or schema problems;
2 solve finished with an incomplete solution set; 3 verification
assertions failed.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
import time

import numpy as np

from . import analysis, dpp, pipeline, serialize, solver
from .exceptions import DppmleError, FileFormatError

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_INCOMPLETE = 2
EXIT_VERIFY_FAILED = 3


class _Parser(argparse.ArgumentParser):
    """argparse with the exit-code contract of this tool (1 on bad input)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=42, help="master seed (default 42)")
    p.add_argument(
        "--workers",
        type=int,
        default=None,
        help="path-tracking worker threads (default: DPPMLE_WORKERS or all cores)",
    )
    p.add_argument(
        "--deterministic",
        action="store_true",
        help="single worker, zeroed timings, byte-identical output",
    )
    p.add_argument("--out", help="write the JSON result here instead of stdout")


def _add_tracker_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--target-count", type=int, default=None, help="override the expected count")
    p.add_argument("--stall-limit", type=int, default=None, help="monodromy stall limit")
    p.add_argument("--dedup-tol", type=float, default=None, help="solution dedup tolerance")
    p.add_argument("--reality-tol", type=float, default=None, help="reality test tolerance")


def _tracker_config(args: argparse.Namespace) -> solver.TrackerConfig:
    cfg = solver.TrackerConfig()
    overrides = {}
    if getattr(args, "stall_limit", None) is not None:
        overrides["stall_limit"] = args.stall_limit
    if getattr(args, "dedup_tol", None) is not None:
        overrides["dedup_tol"] = args.dedup_tol
    if getattr(args, "reality_tol", None) is not None:
        overrides["reality_tol"] = args.reality_tol
    return dataclasses.replace(cfg, **overrides) if overrides else cfg


def _workers(args: argparse.Namespace) -> int:
    if args.deterministic:
        return 1
    if args.workers is not None:
        return max(1, args.workers)
    env = os.environ.get("DPPMLE_WORKERS", "")
    try:
        return max(1, int(env)) if env else max(1, os.cpu_count() or 1)
    except ValueError:
        raise FileFormatError(f"DPPMLE_WORKERS: expected an integer, got {env!r}") from None


def _emit(args: argparse.Namespace, text: str) -> None:
    if args.out:
        serialize.write_text(args.out, text)
    else:
        print(text)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_solve(args: argparse.Namespace) -> int:
    u = serialize.parse_counts_arg(args.u, args.n)
    if args.n is not None and u.n != args.n:
        raise FileFormatError(f"--n {args.n} conflicts with data for n={u.n}")
    run = pipeline.run_solve(
        u,
        seed=args.seed,
        cfg=_tracker_config(args),
        workers=_workers(args),
        target_count=args.target_count,
    )
    _emit(args, serialize.dumps(serialize.result_to_dict(run, args.deterministic)))
    groups = analysis.implicit_images(run.solutions)
    q_text = "none"
    if run.mle is not None:
        q_text = "(" + ", ".join(f"{v:.6g}" for v in run.mle.implicit.q) + ")"
        if run.mle.has_ties:
            q_text += f" [{len(run.mle.tied)} tied]"
    summary = (
        f"n={u.n}: {len(run.solutions)} critical points, "
        f"{run.solutions.count_real} real, {len(groups)} implicit images; MLE q = {q_text}"
    )
    print(summary, file=sys.stderr if not args.out else sys.stdout)
    return EXIT_OK if run.solutions.complete else EXIT_INCOMPLETE


def cmd_verify(args: argparse.Namespace) -> int:
    if not 3 <= args.n <= 7:
        raise FileFormatError(f"--n: verification supports 3 <= n <= 7, got {args.n}")
    run, report = pipeline.run_verify(
        args.n,
        seed=args.seed,
        cfg=_tracker_config(args),
        workers=_workers(args),
    )
    if args.out:
        serialize.write_text(
            args.out, serialize.dumps(serialize.report_to_dict(run, report, args.deterministic))
        )
    for name, ok, detail in report.checks:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    print(
        f"n={args.n}: count={report.count} real={report.count_real} "
        f"implicit={report.implicit_count} regions_matched={report.region_matched}"
    )
    return EXIT_OK if report.passed else EXIT_VERIFY_FAILED


def cmd_sample(args: argparse.Namespace) -> int:
    if args.matrix is None and args.n is None:
        raise FileFormatError("sample needs --matrix or --n (random subspace)")
    if args.matrix is not None:
        M = serialize.parse_matrix_arg(args.matrix)
    else:
        rng = np.random.default_rng(args.seed)
        M = rng.standard_normal((2, args.n))
    kernel = dpp.projection_from_rows(M)
    u = dpp.sample_counts(kernel, args.draws, seed=args.seed)
    _emit(args, serialize.dumps(serialize.counts_to_dict(u)))
    return EXIT_OK


def cmd_regions(args: argparse.Namespace) -> int:
    if not 3 <= args.n <= 8:
        raise FileFormatError(f"--n: region enumeration supports 3 <= n <= 8, got {args.n}")
    vectors = analysis.enumerate_regions(args.n, seed=args.seed)
    payload: dict = {"n": args.n, "count": len(vectors)}
    if args.full:
        payload["vectors"] = sorted(list(v.s) for v in vectors)
    if args.out:
        print(len(vectors))
        serialize.write_text(args.out, serialize.dumps(payload))
    elif args.full:
        print(serialize.dumps(payload))
    else:
        print(len(vectors))
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    if args.n < 4:
        raise FileFormatError(f"--n: bench runs n = 4..N and needs N >= 4, got {args.n}")
    cfg = _tracker_config(args)
    rows = []
    print(f"{'n':>2} {'expected':>9} {'found':>6} {'real':>5} {'implicit':>8} "
          f"{'monodromy_s':>11} {'solve_s':>8}")
    for n in range(4, args.n + 1):
        t0 = time.perf_counter()
        warm = pipeline.build_warmstart(n, seed=args.seed, cfg=cfg)
        t_mono = time.perf_counter() - t0
        u = dpp.random_counts(n, 1000, args.seed + n)
        t0 = time.perf_counter()
        run = pipeline.run_solve(
            u, seed=args.seed, cfg=cfg, warmstart=warm, workers=_workers(args)
        )
        t_solve = time.perf_counter() - t0
        groups = analysis.implicit_images(run.solutions)
        if args.deterministic:
            t_mono = t_solve = 0.0
        row = {
            "n": n,
            "expected": solver.expected_count(n),
            "found": len(run.solutions),
            "real": run.solutions.count_real,
            "implicit": len(groups),
            "monodromy_s": round(t_mono, 3),
            "solve_s": round(t_solve, 3),
        }
        rows.append(row)
        print(f"{n:>2} {row['expected']:>9} {row['found']:>6} {row['real']:>5} "
              f"{row['implicit']:>8} {row['monodromy_s']:>11.3f} {row['solve_s']:>8.3f}")
    if args.out:
        serialize.write_text(args.out, serialize.dumps({"rows": rows}))
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser assembly and entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="dppmle",
        description=(
            "Exact maximum likelihood for rank-2 projection determinantal point "
            "processes: enumerate all critical points, verify their structure, "
            "and select the global maximizer."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="compute all critical points and the MLE for given counts")
    p.add_argument("--n", type=int, default=None, help="number of items (inferred from --u)")
    p.add_argument(
        "--u",
        required=True,
        help="pair counts: a JSON file, inline JSON, or comma-separated integers",
    )
    _add_run_flags(p)
    _add_tracker_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", help="solve at random data and check all structural claims")
    p.add_argument("--n", type=int, required=True, help="number of items (3..7)")
    _add_run_flags(p)
    _add_tracker_flags(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sample", help="draw counts from a rank-2 projection kernel")
    p.add_argument("--n", type=int, default=None, help="random subspace on n items")
    p.add_argument("--matrix", default=None, help="2 x n matrix as JSON (inline or a file path)")
    p.add_argument("--draws", type=int, default=1000, help="number of draws (default 1000)")
    _add_run_flags(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("regions", help="enumerate the realizable minor sign vectors")
    p.add_argument("--n", type=int, required=True, help="number of items (3..8)")
    p.add_argument("--full", action="store_true", help="include the sign vectors in the JSON output")
    _add_run_flags(p)
    p.set_defaults(func=cmd_regions)

    p = sub.add_parser("bench", help="runtime/count table over n = 4..N")
    p.add_argument("--n", type=int, default=6, help="largest n (default 6)")
    _add_run_flags(p)
    _add_tracker_flags(p)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileFormatError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except DppmleError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
