"""Command line front end.

Exit codes: 0 success, 2 configuration or usage error, 3 a numerical
invariant failed, 4 a resource cap was exceeded.  Estimation subcommands
write report.json plus one CSV into the configured output directory and
print a short summary; `oracle` prints a single closed-form value;
`selftest` runs the fast exactness checks and exits 0 when they hold.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .harness import _PARSERS, EXPERIMENTS, load_config, run_experiment
from .matching import (
    BOWEN,
    FK,
    bowen_distance,
    brute_force_match,
    brute_force_match_matrix,
    fk_distance,
    max_match_from_matrix,
    max_match_size,
)
from .oracles import (
    binomial_rate,
    expected_entropy,
    match_count_bound,
    exhaustive_partial_cover,
    stirling_rate,
)
from .katok import min_cover_exact
from .systems import (
    TORUS,
    FiberMetric,
    InvariantViolation,
    OrbitSegment,
    ResourceCapExceeded,
)

__all__ = ["main"]

_FLAG_HELP = {
    "family": "expanding | tent | shift",
    "m": "comma list of per-letter branch factors or alphabet sizes",
    "word_length": "stored word length for shift orbits",
    "law": "bernoulli | markov",
    "p": "comma list of letter weights (bernoulli)",
    "rows": "semicolon-separated transition rows (markov)",
    "n": "comma list of time horizons",
    "eps": "comma list of resolutions",
    "delta": "comma list of ball radii (local experiments)",
    "M": "sample count for empirical measures",
    "paths": "number of driving paths",
    "base_points": "number of base points (local experiments)",
    "candidate_target": "separated-set size the candidate window aims for",
    "candidate_budget": "max candidates per cell",
    "pair_budget": "max pairwise tests per cover matrix",
    "seed": "master seed; all other seeds derive from it",
    "metrics": "comma list drawn from bowen,fk (estimate-* only)",
    "outdir": "output directory for report.json and CSVs",
    "workers": "worker processes (FKENT_THREADS caps this)",
    "mass_threshold": "fixed cover mass for katok counts; default 1 - eps",
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fkent",
        description="entropy estimation for random dynamical systems "
        "under synchronized and match-based orbit metrics",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        sp = sub.add_parser(name, help=f"run the {name} experiment")
        sp.add_argument("--config", metavar="FILE", help="INI config file")
        for key in _PARSERS:
            flag = "--" + key.replace("_", "-")
            sp.add_argument(flag, dest=key, metavar="V", help=_FLAG_HELP.get(key, ""))

    orc = sub.add_parser("oracle", help="print a closed-form reference value")
    orc.add_argument(
        "kind",
        choices=["stirling", "binomial-rate", "match-bound", "expected-entropy"],
    )
    orc.add_argument("--eps", metavar="V")
    orc.add_argument("--n", metavar="V")
    orc.add_argument("--k", metavar="V")
    orc.add_argument("--family", metavar="V")
    orc.add_argument("--m", metavar="V")
    orc.add_argument("--p", metavar="V")
    orc.add_argument("--law", metavar="V")
    orc.add_argument("--rows", metavar="V")

    sub.add_parser("selftest", help="fast exactness checks; exit 0 when all hold")
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    out = {}
    for key in _PARSERS:
        raw = getattr(args, key, None)
        if raw is None:
            continue
        try:
            out[key] = _PARSERS[key](raw)
        except ValueError as exc:
            raise ValueError(f"bad value for --{key.replace('_', '-')}: {exc}") from None
    return out


def _print_report(report: dict) -> None:
    results = report["results"]
    for metric in sorted(results["estimates"]):
        block = results["estimates"][metric]
        print(f"{metric}: {block['mean']:.4f} +/- {block['stderr']:.4f}")
    if "oracle" in results:
        orc = results["oracle"]
        print(f"oracle[{orc['derivation']}]: {orc['value']:.4f}")
    if "gap" in results:
        gap = results["gap"]
        print(f"gap fk-bowen: mean {gap['mean']:.4f} max|.| {gap['max_abs']:.4f}")
    print(f"wrote {report['files']['csv']} {report['files']['report']}")


def _require(args: argparse.Namespace, kind: str, *names: str) -> list[str]:
    values = []
    for name in names:
        v = getattr(args, name, None)
        if v is None:
            raise ValueError(f"oracle {kind} needs --{name}")
        values.append(v)
    return values


def _run_oracle(args: argparse.Namespace) -> int:
    kind = args.kind
    if kind == "stirling":
        (eps,) = _require(args, kind, "eps")
        print("%.4f" % stirling_rate(float(eps)))
    elif kind == "binomial-rate":
        n, eps = _require(args, kind, "n", "eps")
        print("%.4f" % binomial_rate(int(n), float(eps)))
    elif kind == "match-bound":
        n, k = _require(args, kind, "n", "k")
        print(match_count_bound(int(n), int(k)))
    else:
        overrides = {
            key: _PARSERS[key](getattr(args, key))
            for key in ("family", "m", "p", "law", "rows")
            if getattr(args, key, None) is not None
        }
        cfg = load_config(None, overrides)
        oracle = expected_entropy(cfg.system(), cfg.process())
        print("%.4f" % oracle.value)
    return 0


def _segment(points: np.ndarray) -> OrbitSegment:
    return OrbitSegment(FiberMetric(TORUS), points.shape[0], points=points.reshape(-1, 1))


def _selftest() -> int:
    rng = np.random.default_rng(20260819)

    for trial in range(150):
        n = int(rng.integers(1, 8))
        compat = rng.random((n, n)) < rng.uniform(0.1, 0.9)
        got = max_match_from_matrix(compat).k
        want = brute_force_match_matrix(compat)
        if got != want:
            raise InvariantViolation(f"match DP {got} != brute force {want} on matrix {trial}")
    print("ok: match DP equals brute force on 150 synthetic matrices")

    for trial in range(100):
        n = int(rng.integers(2, 8))
        a = _segment(rng.random(n))
        b = _segment(rng.random(n))
        eps = float(rng.uniform(0.05, 0.6))
        got = max_match_size(a, b, eps).k
        want = brute_force_match(a, b, eps)
        if got != want:
            raise InvariantViolation(f"match DP {got} != brute force {want} on orbit pair {trial}")
    print("ok: match DP equals brute force on 100 orbit pairs")

    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(2, 10))
        a = _segment(rng.random(n))
        b = _segment(rng.random(n))
        fk = fk_distance(a, b, tol=1e-9).value
        fk_rev = fk_distance(b, a, tol=1e-9).value
        worst = max(worst, abs(fk - fk_rev))
        if fk > bowen_distance(a, b) + 1e-9:
            raise InvariantViolation("FK distance exceeded the synchronized distance")
    if worst > 1e-9:
        raise InvariantViolation(f"FK symmetry violated by {worst}")
    print("ok: FK symmetric and dominated by the synchronized metric on 200 pairs")

    gap = abs(binomial_rate(10_000, 0.5) - stirling_rate(0.5))
    if gap > 1e-3:
        raise InvariantViolation(f"binomial rate off by {gap}")
    print("ok: binomial rate matches its limit at n = 10^4")

    for trial in range(12):
        sets = int(rng.integers(2, 9))
        points = int(rng.integers(4, 16))
        membership = rng.random((sets, points)) < 0.45
        membership[rng.integers(0, sets), :] |= rng.random(points) < 0.5
        if not membership.any(axis=0).all():
            membership[0] = True
        threshold = float(rng.uniform(0.5, 0.95))
        got = min_cover_exact(membership, mass_threshold=threshold)
        want = exhaustive_partial_cover(membership, mass_threshold=threshold)
        if got != want:
            raise InvariantViolation(f"cover search {got} != exhaustive {want} on instance {trial}")
    print("ok: branch-and-bound cover equals exhaustive search on 12 instances")

    print("selftest passed (5 checks)")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "oracle":
            return _run_oracle(args)
        if args.command == "selftest":
            return _selftest()
        cfg = load_config(args.config, _overrides(args))
        report = run_experiment(args.command, cfg)
        _print_report(report)
        return 0
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 3
    except ResourceCapExceeded as exc:
        print(f"resource cap exceeded: {exc}", file=sys.stderr)
        return 4
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
