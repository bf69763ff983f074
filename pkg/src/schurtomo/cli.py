"""Command-line interface.

Subcommands: run (tomography trials to JSONL), dist (exact label
distribution to CSV), povm-build (sample and save a Haar unitary set),
povm-check (membership test of a saved set), verify (invariant suites),
report (figures + CSV summary from a results file).

Exit codes: 0 success, 1 check or integrity failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .harness import (ExperimentConfig, load_kv_file, parse_config,
                      run_experiment, verify_suite)
from .linalg import NumericalIntegrityError
from .povm import (check_membership, haar_unitary_set, load_unitary_set,
                   required_set_size, save_unitary_set)

_CONFIG_FLAGS = ("d", "r", "n", "eta", "set_size", "trials", "metric",
                 "thresholds", "master_seed")


def _add_config_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--d", type=int, help="local dimension")
    sub.add_argument("--r", type=int, help="state rank")
    sub.add_argument("--n", type=int, help="number of copies")
    sub.add_argument("--eta", type=float, help="discretization accuracy")
    sub.add_argument("--set-size", dest="set_size",
                     help='unitary set size (integer or "theorem1")')
    sub.add_argument("--trials", type=int, help="number of trials")
    sub.add_argument("--seed", dest="master_seed", type=int, help="master seed")
    sub.add_argument("--metric", choices=("infidelity", "trace"),
                     help="accuracy metric for the summary")
    sub.add_argument("--thresholds", help="comma-separated accuracy thresholds")
    sub.add_argument("--config", help="flat key=value config file")


def _build_config(args: argparse.Namespace, mode: str) -> ExperimentConfig:
    items = load_kv_file(args.config) if args.config else {}
    overrides = {"mode": mode}
    for key in _CONFIG_FLAGS:
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = str(value)
    return parse_config(items, overrides)


def _cmd_run(args: argparse.Namespace) -> int:
    config = _build_config(args, "run")
    out = Path(args.out or "results.jsonl")
    manifest = run_experiment(config, out, workers=args.workers)
    verdict = "verified" if manifest.membership_overall else "unverified"
    print(f"wrote {out} ({config.trials} trials, set of "
          f"{manifest.resolved_set_size} {verdict}) and {out}.manifest")
    return 0


def _cmd_dist(args: argparse.Namespace) -> int:
    config = _build_config(args, "dist")
    out = Path(args.out or "distribution.csv")
    run_experiment(config, out)
    print(f"wrote {out}")
    return 0


def _cmd_povm_build(args: argparse.Namespace) -> int:
    config = _build_config(args, "run")
    out = Path(args.out or "set.uset")
    size = config.resolved_set_size()
    s = haar_unitary_set(config.d, size, config.master_seed)
    save_unitary_set(out, s)
    print(f"wrote {out}: {size} Haar unitaries on U({config.d}), seed {s.seed}")
    return 0


def _cmd_povm_check(args: argparse.Namespace) -> int:
    if not args.set_file:
        raise ValueError("povm-check requires --set-file")
    s = load_unitary_set(args.set_file)
    config = _build_config(args, "povm-check")
    report = check_membership(s, config.n, s.d, config.r, config.eta,
                              args.variant)
    for (lam, mu), (lo, hi, ok) in sorted(report.per_pair.items()):
        status = "pass" if ok else "FAIL"
        print(f"{status} ({lam})->({mu}): twirl ratios in "
              f"[{lo:.6f}, {hi:.6f}], need [{1 - config.eta}, {1 + config.eta}]")
    print(f"overall: {'pass' if report.overall else 'FAIL'} "
          f"(class {report.variant}, n={config.n}, r={config.r}, eta={config.eta})")
    return 0 if report.overall else 1


def _cmd_verify(args: argparse.Namespace) -> int:
    report = verify_suite(args.suite)
    for line in report.format_lines():
        print(line)
    print(f"{'all checks passed' if report.passed else 'CHECKS FAILED'}")
    return 0 if report.passed else 1


def _cmd_report(args: argparse.Namespace) -> int:
    from .report import render_report
    written = render_report(args.results, args.out or "report")
    for path in written:
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tomo",
        description="Streaming Schur-sampling tomography simulator")
    subs = parser.add_subparsers(dest="command", required=True)

    run = subs.add_parser("run", help="run tomography trials to JSONL")
    _add_config_flags(run)
    run.add_argument("--out", help="output JSONL path (default results.jsonl)")
    run.add_argument("--workers", type=int, default=1, help="worker threads")
    run.set_defaults(func=_cmd_run)

    dist = subs.add_parser("dist", help="exact final-label distribution to CSV")
    _add_config_flags(dist)
    dist.add_argument("--out", help="output CSV path (default distribution.csv)")
    dist.set_defaults(func=_cmd_dist)

    build = subs.add_parser("povm-build", help="sample and save a Haar unitary set")
    _add_config_flags(build)
    build.add_argument("--out", help="output set path (default set.uset)")
    build.set_defaults(func=_cmd_povm_build)

    check = subs.add_parser("povm-check", help="membership test of a saved set")
    _add_config_flags(check)
    check.add_argument("--set-file", dest="set_file", help="saved unitary set")
    check.add_argument("--variant", choices=("A", "B"), default="A",
                       help="membership class to test")
    check.set_defaults(func=_cmd_povm_check)

    verify = subs.add_parser("verify", help="run invariant verification suites")
    verify.add_argument("suite", nargs="?", default="all",
                        choices=("partitions", "repr", "stream", "povm",
                                 "tomo", "exec", "all"))
    verify.set_defaults(func=_cmd_verify)

    report = subs.add_parser("report", help="figures + CSV summary from JSONL")
    report.add_argument("results", help="JSONL results file from a run")
    report.add_argument("--out", help="output directory (default report)")
    report.set_defaults(func=_cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalIntegrityError as exc:
        print(f"integrity failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
