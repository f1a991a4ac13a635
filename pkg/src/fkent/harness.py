"""Experiment orchestration: config files, seeding, workers, reports.

One ExperimentConfig drives every experiment kind.  Configs load from INI
files with a strict schema (unknown sections or keys are errors, so typos
fail loudly) and command-line overrides are applied on top.  Reports are
a JSON document plus one CSV per experiment; CSV comment lines (prefixed
'#') carry the timestamp and version so the body stays byte-reproducible
for a fixed config, including across worker counts.

Worker processes recompute their own path, measure, and orbit stack from
seeds carried in the payload.  That trades a little redundant work for
results that cannot depend on scheduling: every task is a pure function
of (config, seed, task index), and reduction happens in task order.
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np

from . import __version__
from .katok import katok_horizon, katok_table, table_slopes
from .local import local_entropy, sample_measure
from .matching import BOWEN, FK
from .oracles import expected_entropy
from .spanning import count_table, entropy_from_counts, path_seeds
from .systems import (
    InvariantViolation,
    RandomSystemSpec,
    bernoulli_process,
    child_rng,
    expanding_system,
    markov_process,
    orbit_batch,
    sample_path,
    shift_system,
    tent_system,
)

__all__ = [
    "ExperimentConfig",
    "load_config",
    "run_experiment",
    "EXPERIMENTS",
]

EXPERIMENTS = (
    "estimate-top",
    "estimate-local",
    "estimate-katok",
    "compare-top",
    "compare-local",
    "compare-katok",
)

# base points for local experiments come from their own seed stream so
# changing the schedule never reshuffles the path or measure draws
_BASE_STREAM = 7

_SCHEMA = {
    "system": ("family", "m", "word_length"),
    "driving": ("law", "p", "rows"),
    "schedules": ("n", "eps", "delta"),
    "budgets": (
        "M",
        "paths",
        "base_points",
        "candidate_target",
        "candidate_budget",
        "pair_budget",
    ),
    "run": ("seed", "metrics", "outdir", "workers", "mass_threshold"),
}

_FAMILIES = ("expanding", "tent", "shift")
_LAWS = ("bernoulli", "markov")


def _parse_ints(text: str, name: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in str(text).split(",") if part.strip() != "")
    except ValueError:
        raise ValueError(f"{name} must be a comma list of integers, got {text!r}") from None


def _parse_floats(text: str, name: str) -> tuple[float, ...]:
    try:
        return tuple(float(part) for part in str(text).split(",") if part.strip() != "")
    except ValueError:
        raise ValueError(f"{name} must be a comma list of numbers, got {text!r}") from None


def _parse_rows(text: str) -> tuple[tuple[float, ...], ...]:
    rows = []
    for chunk in str(text).split(";"):
        if chunk.strip() == "":
            continue
        rows.append(_parse_floats(chunk, "rows"))
    return tuple(rows)


@dataclass
class ExperimentConfig:
    """Everything a run needs, with defaults sized for a quick desk run."""

    family: str = "expanding"
    m: tuple[int, ...] = (2, 3)
    word_length: int = 32
    law: str = "bernoulli"
    p: tuple[float, ...] = (0.5, 0.5)
    rows: tuple[tuple[float, ...], ...] = ()
    n: tuple[int, ...] = (8, 10, 12, 14)
    eps: tuple[float, ...] = (0.2, 0.1, 0.05)
    delta: tuple[float, ...] = (0.2, 0.1)
    M: int = 100_000
    paths: int = 8
    base_points: int = 20
    candidate_target: int = 2000
    candidate_budget: int = 200_000
    pair_budget: int = 20_000_000
    seed: int = 0
    metrics: tuple[str, ...] = (BOWEN, FK)
    outdir: str = "out"
    workers: int = 1
    mass_threshold: float | None = None

    def validate(self) -> None:
        if self.family not in _FAMILIES:
            raise ValueError(f"family must be one of {_FAMILIES}, got {self.family!r}")
        if self.law not in _LAWS:
            raise ValueError(f"law must be one of {_LAWS}, got {self.law!r}")
        if not self.m:
            raise ValueError("m is empty")
        if self.law == "bernoulli":
            if len(self.p) != len(self.m):
                raise ValueError(f"p has {len(self.p)} weights for {len(self.m)} letters")
        else:
            if len(self.rows) != len(self.m) or any(len(r) != len(self.m) for r in self.rows):
                raise ValueError("rows must form a square matrix matching m")
        for label, sched in (("n", self.n), ("eps", self.eps), ("delta", self.delta)):
            if not sched:
                raise ValueError(f"schedule {label} is empty")
        if any(v < 1 for v in self.n):
            raise ValueError("n schedule must be positive integers")
        if any(v <= 0.0 for v in self.eps) or any(v <= 0.0 for v in self.delta):
            raise ValueError("eps and delta schedules must be positive")
        for label, v in (
            ("M", self.M),
            ("paths", self.paths),
            ("base_points", self.base_points),
            ("candidate_target", self.candidate_target),
            ("candidate_budget", self.candidate_budget),
            ("pair_budget", self.pair_budget),
            ("workers", self.workers),
            ("word_length", self.word_length),
        ):
            if int(v) < 1:
                raise ValueError(f"{label} must be >= 1, got {v}")
        if not self.metrics:
            raise ValueError("metrics is empty")
        for metric in self.metrics:
            if metric not in (BOWEN, FK):
                raise ValueError(f"unknown metric {metric!r}")
        if self.mass_threshold is not None and not 0.0 < self.mass_threshold < 1.0:
            raise ValueError("mass_threshold must lie in (0, 1)")

    def system(self) -> RandomSystemSpec:
        if self.family == "expanding":
            return expanding_system(self.m)
        if self.family == "tent":
            return tent_system(self.m)
        return shift_system(self.m, word_length=self.word_length)

    def process(self):
        if self.law == "bernoulli":
            return bernoulli_process(self.p)
        return markov_process(self.rows)

    def echo(self) -> dict:
        out = asdict(self)
        out["m"] = list(self.m)
        out["p"] = list(self.p)
        out["rows"] = [list(r) for r in self.rows]
        out["n"] = list(self.n)
        out["eps"] = list(self.eps)
        out["delta"] = list(self.delta)
        out["metrics"] = list(self.metrics)
        return out

    def digest(self) -> str:
        blob = json.dumps(self.echo(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


_PARSERS = {
    "family": lambda v: str(v).strip(),
    "m": lambda v: _parse_ints(v, "m"),
    "word_length": lambda v: int(v),
    "law": lambda v: str(v).strip(),
    "p": lambda v: _parse_floats(v, "p"),
    "rows": _parse_rows,
    "n": lambda v: _parse_ints(v, "n"),
    "eps": lambda v: _parse_floats(v, "eps"),
    "delta": lambda v: _parse_floats(v, "delta"),
    "M": lambda v: int(v),
    "paths": lambda v: int(v),
    "base_points": lambda v: int(v),
    "candidate_target": lambda v: int(v),
    "candidate_budget": lambda v: int(v),
    "pair_budget": lambda v: int(v),
    "seed": lambda v: int(v),
    "metrics": lambda v: tuple(s.strip() for s in str(v).split(",") if s.strip()),
    "outdir": lambda v: str(v).strip(),
    "workers": lambda v: int(v),
    "mass_threshold": lambda v: None if str(v).strip() == "" else float(v),
}


def load_config(path: str | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """INI file (optional) plus override mapping, schema-checked.

    Unknown sections, unknown keys, and malformed values raise ValueError
    naming the offending field.  Overrides use dataclass field names and
    already-typed values (the CLI parses its own flag syntax).
    """
    cfg = ExperimentConfig()
    if path is not None:
        parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
        parser.optionxform = str  # keys are case-sensitive; M and m differ
        read = parser.read(path)
        if not read:
            raise ValueError(f"config file not found: {path}")
        for section in parser.sections():
            if section not in _SCHEMA:
                raise ValueError(f"unknown config section [{section}]")
            for key, raw in parser.items(section):
                if key not in _SCHEMA[section]:
                    raise ValueError(f"unknown key {key!r} in section [{section}]")
                if raw.strip() == "" and key != "mass_threshold":
                    continue
                try:
                    value = _PARSERS[key](raw)
                except ValueError as exc:
                    raise ValueError(f"bad value for [{section}] {key}: {exc}") from None
                cfg = replace(cfg, **{key: value})
    for key, value in (overrides or {}).items():
        if key not in _PARSERS:
            raise ValueError(f"unknown config field {key!r}")
        if value is None:
            continue
        cfg = replace(cfg, **{key: value})
    cfg.validate()
    return cfg


def _effective_workers(cfg: ExperimentConfig, tasks: int) -> int:
    limit = cfg.workers
    env = os.environ.get("FKENT_THREADS")
    if env is not None and env.strip() != "":
        try:
            limit = min(limit, int(env))
        except ValueError:
            raise ValueError(f"FKENT_THREADS must be an integer, got {env!r}") from None
    return max(1, min(limit, tasks))


def _ordered_map(fn, payloads, workers: int) -> list:
    if workers <= 1 or len(payloads) <= 1:
        return [fn(p) for p in payloads]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, payloads, chunksize=1))


# ---------------------------------------------------------------------------
# formatting


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.17g" % float(value)
    return str(value)


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if math.isfinite(v) else None
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    return value


def _write_csv(path: str, header: list[str], rows: list[tuple], meta: list[str]) -> None:
    with open(path, "w", newline="") as fh:
        for line in meta:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _meta_lines(experiment: str, cfg: ExperimentConfig) -> list[str]:
    return [
        f"fkent {__version__}",
        f"experiment {experiment}",
        f"config {cfg.digest()}",
        f"created {time.strftime('%Y-%m-%dT%H:%M:%S%z')}",
    ]


def _point_label(x: np.ndarray, on_words: bool, alphabet: int) -> str:
    if on_words:
        sep = "" if alphabet <= 10 else "-"
        return sep.join(str(int(s)) for s in np.asarray(x).ravel())
    return ";".join("%.17g" % float(c) for c in np.asarray(x).ravel())


def _mean_stderr(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    mean = float(arr.mean())
    if arr.size < 2:
        return mean, 0.0
    return mean, float(arr.std(ddof=1) / math.sqrt(arr.size))


# ---------------------------------------------------------------------------
# worker tasks (top level so process pools can import them)


def _top_task(payload) -> dict:
    cfg, seed, metrics = payload
    system = cfg.system()
    process = cfg.process()
    horizon = katok_horizon(system, cfg.n, cfg.eps)
    path = sample_path(process, horizon, seed)
    table = count_table(
        system,
        path,
        cfg.n,
        cfg.eps,
        metrics=metrics,
        count_target=cfg.candidate_target,
        budget=cfg.candidate_budget,
        pair_budget=cfg.pair_budget,
    )
    values = {}
    slopes = {}
    residuals = {}
    for metric in metrics:
        est = entropy_from_counts(table, metric)
        values[metric] = est.value
        slopes[metric] = list(est.slopes)
        residuals[metric] = list(est.residuals)
    return {
        "seed": seed,
        "entries": list(table.entries),
        "values": values,
        "slopes": slopes,
        "residuals": residuals,
    }


def _local_task(payload) -> dict:
    cfg, path_seed, x, kinds = payload
    system = cfg.system()
    process = cfg.process()
    horizon = katok_horizon(system, cfg.n, cfg.delta)
    path = sample_path(process, horizon, path_seed)
    measure = sample_measure(system, path, cfg.M, path_seed)
    stack = None
    if not system.on_words:
        stack = orbit_batch(system, path, measure.samples, max(cfg.n))
    records = {}
    for kind in kinds:
        records[kind] = local_entropy(
            system,
            path,
            x,
            cfg.n,
            cfg.delta,
            cfg.M,
            kind,
            omega_seed=path_seed,
            measure=measure,
            sample_orbits=stack,
        )
    return {"x": np.asarray(x), "records": records}


def _katok_task(payload) -> dict:
    cfg, seed, kinds = payload
    system = cfg.system()
    process = cfg.process()
    horizon = katok_horizon(system, cfg.n, cfg.eps)
    path = sample_path(process, horizon, seed)
    measure = sample_measure(system, path, cfg.M, seed)
    stack = None
    if not system.on_words and measure.M**2 <= cfg.pair_budget:
        stack = orbit_batch(system, path, measure.samples, max(cfg.n))
    cells = {}
    fits = {}
    for kind in kinds:
        table = katok_table(
            measure,
            path,
            system,
            cfg.n,
            cfg.eps,
            kind,
            mass_threshold=cfg.mass_threshold,
            pair_budget=cfg.pair_budget,
            sample_orbits=stack,
        )
        cells[kind] = table
        fits[kind] = table_slopes(table, cfg.n, cfg.eps)
    return {"seed": seed, "cells": cells, "fits": fits}


# ---------------------------------------------------------------------------
# experiment runners


def _run_top(cfg: ExperimentConfig, compare: bool) -> tuple[dict, dict]:
    metrics = (BOWEN, FK) if compare else cfg.metrics
    seeds = [int(s) for s in path_seeds(cfg.seed, cfg.paths)]
    workers = _effective_workers(cfg, len(seeds))
    results = _ordered_map(_top_task, [(cfg, s, metrics) for s in seeds], workers)

    rows = []
    for res in results:
        for e in res["entries"]:
            rows.append((res["seed"], e.n, e.eps, e.metric, e.estimator, e.count, e.window, e.candidates))

    estimates = {}
    for metric in metrics:
        per_path = [res["values"][metric] for res in results]
        mean, stderr = _mean_stderr(per_path)
        estimates[metric] = {
            "mean": mean,
            "stderr": stderr,
            "per_path": per_path,
            "slopes_per_path": [res["slopes"][metric] for res in results],
            "fit_rms_per_path": [res["residuals"][metric] for res in results],
        }
    oracle = expected_entropy(cfg.system(), cfg.process())
    report = {
        "estimates": estimates,
        "oracle": {"value": oracle.value, "derivation": oracle.derivation},
        "path_seeds": seeds,
    }
    if compare:
        gaps = [res["values"][FK] - res["values"][BOWEN] for res in results]
        report["gap"] = {
            "per_path": gaps,
            "mean": float(np.mean(gaps)),
            "max_abs": float(np.max(np.abs(gaps))),
        }
    csv_payload = {
        "name": "counts.csv",
        "header": ["omega_seed", "n", "eps", "metric", "estimator", "count", "window", "candidates"],
        "rows": rows,
    }
    return report, csv_payload


def _run_local(cfg: ExperimentConfig, compare: bool) -> tuple[dict, dict]:
    kinds = (BOWEN, FK) if compare else cfg.metrics
    system = cfg.system()
    path_seed = int(path_seeds(cfg.seed, 1)[0])
    rng = child_rng(cfg.seed, _BASE_STREAM)
    horizon = katok_horizon(system, cfg.n, cfg.delta)
    if system.on_words:
        process = cfg.process()
        path = sample_path(process, horizon, path_seed)
        sizes = system.factor_along(path, horizon).astype(float)
        u = rng.random((cfg.base_points, horizon))
        base = np.minimum(np.floor(u * sizes), sizes - 1.0).astype(np.int64)
    else:
        base = rng.random((cfg.base_points, 1))

    payloads = [(cfg, path_seed, base[i], kinds) for i in range(cfg.base_points)]
    workers = _effective_workers(cfg, len(payloads))
    results = _ordered_map(_local_task, payloads, workers)

    rows = []
    alphabet = system.space_alphabet if system.on_words else 0
    for res in results:
        label = _point_label(res["x"], system.on_words, alphabet)
        for kind in kinds:
            rec = res["records"][kind]
            for e in rec.entries:
                rows.append((path_seed, label, e.n, e.delta, kind, e.count, e.M, e.estimate, e.flagged))

    estimates = {}
    for kind in kinds:
        values = [res["records"][kind].value for res in results]
        mean, stderr = _mean_stderr(values)
        estimates[kind] = {
            "mean": mean,
            "stderr": stderr,
            "per_point": values,
            "delta_used": [res["records"][kind].delta_used for res in results],
            "flagged_cells": int(
                sum(e.flagged for res in results for e in res["records"][kind].entries)
            ),
        }
    report = {
        "estimates": estimates,
        "omega_seed": path_seed,
        "base_points": [
            _point_label(res["x"], system.on_words, alphabet) for res in results
        ],
    }
    if compare:
        # same measure and centers, and the FK ball contains the Bowen
        # ball, so FK counts must dominate cell by cell
        for res in results:
            by_kind = {
                kind: {(e.n, e.delta): e.count for e in res["records"][kind].entries}
                for kind in (BOWEN, FK)
            }
            for key, bowen_count in by_kind[BOWEN].items():
                if by_kind[FK][key] < bowen_count:
                    raise InvariantViolation(
                        f"FK ball count fell below the Bowen count at (n, delta) = {key}"
                    )
        gaps = [
            res["records"][FK].value - res["records"][BOWEN].value for res in results
        ]
        report["gap"] = {
            "per_point": gaps,
            "mean": float(np.mean(gaps)),
            "max_abs": float(np.max(np.abs(gaps))),
        }
    csv_payload = {
        "name": "local.csv",
        "header": ["omega_seed", "x", "n", "delta", "kind", "ball_count", "M", "estimate", "flagged"],
        "rows": rows,
    }
    return report, csv_payload


def _run_katok(cfg: ExperimentConfig, compare: bool) -> tuple[dict, dict]:
    kinds = (BOWEN, FK) if compare else cfg.metrics
    seeds = [int(s) for s in path_seeds(cfg.seed, cfg.paths)]
    workers = _effective_workers(cfg, len(seeds))
    results = _ordered_map(_katok_task, [(cfg, s, kinds) for s in seeds], workers)

    eps_sorted = sorted(set(cfg.eps))
    n_sorted = sorted(set(cfg.n))
    rows = []
    for res in results:
        for kind in kinds:
            for eps in eps_sorted:
                for n in n_sorted:
                    cell = res["cells"][kind][(eps, n)]
                    rows.append(
                        (res["seed"], n, eps, cell.mass_threshold, kind, cell.count, cell.covered_mass)
                    )

    estimates = {}
    for kind in kinds:
        slopes = np.asarray([[s for s, _ in res["fits"][kind]] for res in results])
        per_eps = slopes.mean(axis=0)
        per_path = slopes[:, 0]
        mean, stderr = _mean_stderr([float(v) for v in per_path])
        estimates[kind] = {
            "mean": mean,
            "stderr": stderr,
            "per_path": [float(v) for v in per_path],
            "slopes_per_eps": [float(v) for v in per_eps],
            "eps_order": eps_sorted,
        }
    report = {
        "estimates": estimates,
        "path_seeds": seeds,
    }
    if compare:
        worse = 0
        for res in results:
            for key, cell in res["cells"][BOWEN].items():
                if res["cells"][FK][key].count > cell.count:
                    worse += 1
        gaps = [
            float(np.asarray([s for s, _ in res["fits"][FK]])[0])
            - float(np.asarray([s for s, _ in res["fits"][BOWEN]])[0])
            for res in results
        ]
        report["gap"] = {
            "per_path": gaps,
            "mean": float(np.mean(gaps)),
            "max_abs": float(np.max(np.abs(gaps))),
            "cells_fk_above_bowen": worse,
        }
    csv_payload = {
        "name": "katok.csv",
        "header": ["omega_seed", "n", "eps", "mass_threshold", "kind", "count", "covered_mass"],
        "rows": rows,
    }
    return report, csv_payload


def run_experiment(experiment: str, cfg: ExperimentConfig) -> dict:
    """Run one experiment, write report.json and its CSV, return the report."""
    if experiment not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {experiment!r}")
    cfg.validate()
    started = time.time()
    compare = experiment.startswith("compare-")
    kind = experiment.split("-", 1)[1]
    runner = {"top": _run_top, "local": _run_local, "katok": _run_katok}[kind]
    results, csv_payload = runner(cfg, compare)

    os.makedirs(cfg.outdir, exist_ok=True)
    csv_path = os.path.join(cfg.outdir, csv_payload["name"])
    _write_csv(csv_path, csv_payload["header"], csv_payload["rows"], _meta_lines(experiment, cfg))

    report = {
        "experiment": experiment,
        "config": cfg.echo(),
        "results": _jsonable(results),
        "meta": {
            "version": __version__,
            "created": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
            "elapsed_s": round(time.time() - started, 3),
            "config_digest": cfg.digest(),
            "workers_used": _effective_workers(
                cfg, cfg.base_points if kind == "local" else cfg.paths
            ),
        },
        "files": {"csv": csv_path},
    }
    report_path = os.path.join(cfg.outdir, "report.json")
    with open(report_path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    report["files"]["report"] = report_path
    return report
