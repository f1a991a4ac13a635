"""Measure-weighted spanning counts: entropy from almost-covering sets.

The count here is the number of time-n balls needed to cover all but a
small fraction of the fiber measure, estimated on an empirical sample.
Greedy partial cover picks the sample point whose ball holds the most
uncovered samples, lowest sample index on ties, and stops once the
covered fraction reaches the mass threshold.  Restricting centers to
sample points leaves the exponential growth rate intact, which is the
only thing the entropy slope consumes.

Two threshold conventions are exposed through one parameter: the
one-parameter form ties the mass threshold to the radius (threshold
1 - eps), the two-parameter form takes an independent mass level.
Comparison experiments run the one-parameter form for both orbit metrics
so the columns share schedules.

Counts from shift systems with zero matching slack collapse to weighted
word-class counting: every ball is exactly one prefix class, classes are
disjoint, and greedy (heaviest class first) is provably the true minimum.
That fast path handles million-sample runs; overlapping-ball instances
fall back to a dense cover matrix guarded by a pair budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .matching import (
    BOWEN,
    FK,
    _pair_depth,
    bowen_ball_batch,
    fk_ball_batch,
    match_target,
)
from .spanning import EntropyEstimate, fit_log_slope, path_seeds
from .systems import (
    FiberMetric,
    InvariantViolation,
    OmegaPath,
    OrbitSegment,
    RandomSystemSpec,
    ResourceCapExceeded,
    orbit_batch,
    row_codes,
    sample_path,
)
from .local import EmpiricalMeasure, sample_measure

__all__ = [
    "KATOK",
    "KatokCount",
    "katok_spanning_count",
    "katok_horizon",
    "katok_table",
    "table_slopes",
    "katok_entropy",
    "validate_katok_counts",
    "min_cover_exact",
]

KATOK = "greedy-katok"


@dataclass(frozen=True)
class KatokCount:
    """Greedy almost-cover certificate for one (n, eps) cell.

    centers holds the chosen sample indices in pick order; covered_mass is
    the fraction of samples inside the union of their balls, never below
    the mass threshold.
    """

    n: int
    eps: float
    mass_threshold: float
    kind: str
    count: int
    covered_mass: float
    centers: np.ndarray

    def __post_init__(self) -> None:
        if self.count < 1:
            raise InvariantViolation("a cover needs at least one ball")
        if self.count != len(self.centers):
            raise InvariantViolation("count must equal the number of centers")
        if self.covered_mass + 1e-12 < self.mass_threshold:
            raise InvariantViolation(
                f"covered mass {self.covered_mass} below threshold {self.mass_threshold}"
            )
        if self.covered_mass > 1.0 + 1e-12:
            raise InvariantViolation("covered mass above 1")


def _covered_target(mass_threshold: float, M: int) -> int:
    """Samples needed so that covered/M >= mass_threshold, robust to float noise."""
    return max(1, int(math.ceil(mass_threshold * M - 1e-9)))


def _sample_segment(system: RandomSystemSpec, stack: np.ndarray, n: int, i: int) -> OrbitSegment:
    if system.on_words:
        return OrbitSegment(system.metric, n, word=stack[i])
    return OrbitSegment(FiberMetric(system.metric.kind), n, points=stack[i])


def _word_class_cover(
    words: np.ndarray, span: int, need: int
) -> tuple[int, float, np.ndarray]:
    """Greedy cover when every ball is exactly one word-prefix class.

    Classes are disjoint, so the gain of every member of a class is the
    class size and greedy picks classes heaviest first, breaking ties by
    the lowest member index.  For disjoint sets this greedy is the exact
    minimum: any cover reaching the mass with k classes is dominated by
    the k heaviest ones.
    """
    M = words.shape[0]
    codes = row_codes(words[:, :span])
    _, inverse, sizes = np.unique(codes, return_inverse=True, return_counts=True)
    first_index = np.full(sizes.size, M, dtype=np.int64)
    np.minimum.at(first_index, inverse, np.arange(M, dtype=np.int64))
    order = np.lexsort((first_index, -sizes))
    cum = np.cumsum(sizes[order])
    k = int(np.searchsorted(cum, need, side="left")) + 1
    centers = first_index[order[:k]]
    return k, float(cum[k - 1] / M), centers


def katok_spanning_count(
    measure: EmpiricalMeasure,
    omega: OmegaPath,
    system: RandomSystemSpec,
    n: int,
    eps: float,
    mass_threshold: float,
    kind: str,
    pair_budget: int = 20_000_000,
    sample_orbits: np.ndarray | None = None,
) -> KatokCount:
    """Greedy count of (n, eps)-balls covering mass_threshold of the sample.

    Ball membership uses the open conventions of ball_measure.  The
    general path materializes the center-by-sample cover matrix, so M^2
    must fit the pair budget; shift systems with zero matching slack take
    the exact word-class route instead and have no such cap.
    """
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    if not 0.0 < mass_threshold < 1.0:
        raise ValueError("mass threshold must lie in (0, 1)")
    if kind not in (BOWEN, FK):
        raise ValueError(f"unknown orbit metric: {kind!r}")
    if measure.on_words != system.on_words:
        raise ValueError("measure kind does not match the system")
    if n < 1:
        raise ValueError("n must be >= 1")
    M = measure.M
    need = _covered_target(mass_threshold, M)

    def trivial() -> KatokCount:
        return KatokCount(
            n, eps, mass_threshold, kind, 1, 1.0, np.zeros(1, dtype=np.int64)
        )

    if eps > system.metric.diameter:
        return trivial()

    if system.on_words:
        depth = _pair_depth(eps, system.metric.kind, False)
        if depth == 0:
            return trivial()
        span = n + depth - 1
        if measure.samples.shape[1] < span:
            raise ValueError(
                f"sampled words of length {measure.samples.shape[1]} too short "
                f"for n={n} at radius {eps}"
            )
        if kind == BOWEN or match_target(n, eps) == n:
            count, covered, centers = _word_class_cover(measure.samples, span, need)
            return KatokCount(n, eps, mass_threshold, kind, count, covered, centers)

    if M * M > pair_budget:
        raise ResourceCapExceeded(
            f"cover matrix needs {M * M} ball tests, budget {pair_budget}; "
            "lower M or raise pair_budget"
        )
    if system.on_words:
        stack = measure.samples
    elif sample_orbits is not None:
        if sample_orbits.shape[0] != M or sample_orbits.shape[1] < n:
            raise ValueError("precomputed sample orbits do not cover the schedule")
        stack = sample_orbits[:, :n, :]
    else:
        stack = orbit_batch(system, omega, measure.samples, n)

    cover = np.empty((M, M), dtype=bool)
    for i in range(M):
        center = _sample_segment(system, stack, n, i)
        if kind == BOWEN:
            cover[i] = bowen_ball_batch(center, stack, eps)
        else:
            cover[i] = fk_ball_batch(center, stack, eps)
    # every ball contains its own center (distance 0), so greedy cannot stall
    np.fill_diagonal(cover, True)

    covered = np.zeros(M, dtype=bool)
    gains = cover.sum(axis=1).astype(np.int64)
    picks: list[int] = []
    total = 0
    while total < need:
        i = int(np.argmax(gains))
        if gains[i] <= 0:
            raise InvariantViolation("greedy cover stalled below the mass threshold")
        newly = cover[i] & ~covered
        covered |= newly
        total += int(newly.sum())
        gains -= cover[:, newly].sum(axis=1)
        picks.append(i)
    return KatokCount(
        n,
        eps,
        mass_threshold,
        kind,
        len(picks),
        total / M,
        np.asarray(picks, dtype=np.int64),
    )


def _fk_slack(n: int, eps: float) -> int:
    return n - match_target(n, eps)


def validate_katok_counts(cells: dict[tuple[float, int], KatokCount], kind: str) -> None:
    """Monotonicity checks on a (eps, n) table of counts, 1-count slack.

    In n, counts may not drop by more than one (finite-sample jitter);
    the check applies to Bowen always and to FK only across steps with
    equal matching slack, where ball inclusion actually reverses.  In
    eps, counts may not rise by more than one, both kinds: membership is
    a distance threshold, nested in eps exactly.
    """
    eps_values = sorted({e for e, _ in cells})
    n_values = sorted({n for _, n in cells})
    for e in eps_values:
        col = [cells[(e, n)].count for n in n_values]
        for (n1, c1), (n2, c2) in zip(
            zip(n_values, col), zip(n_values[1:], col[1:])
        ):
            if kind == FK and _fk_slack(n1, e) != _fk_slack(n2, e):
                continue
            if c2 < c1 - 1:
                raise InvariantViolation(
                    f"cover count fell from {c1} to {c2} between n={n1} and "
                    f"n={n2} at eps={e} {kind}"
                )
    for n in n_values:
        row = [cells[(e, n)].count for e in eps_values]
        for (e1, c1), (e2, c2) in zip(
            zip(eps_values, row), zip(eps_values[1:], row[1:])
        ):
            if c2 > c1 + 1:
                raise InvariantViolation(
                    f"cover count rose from {c1} to {c2} between eps={e1} and "
                    f"eps={e2} at n={n} {kind}"
                )


def katok_horizon(system: RandomSystemSpec, n_window, eps_list) -> int:
    """Path length covering every (n, eps) cell of the schedules."""
    n_max = max(int(n) for n in n_window)
    if not system.on_words:
        return n_max
    depth_max = max(_pair_depth(float(e), system.metric.kind, False) for e in eps_list)
    return n_max + max(depth_max, 1) - 1


def katok_table(
    measure: EmpiricalMeasure,
    omega: OmegaPath,
    system: RandomSystemSpec,
    n_window,
    eps_list,
    kind: str,
    mass_threshold: float | None = None,
    pair_budget: int = 20_000_000,
    sample_orbits: np.ndarray | None = None,
) -> dict[tuple[float, int], KatokCount]:
    """All (eps, n) cover counts for one path and measure, validated.

    mass_threshold None selects the one-parameter convention, threshold
    1 - eps per column; a float fixes one threshold for every column.
    """
    n_window = sorted(set(int(n) for n in n_window))
    eps_list = sorted(set(float(e) for e in eps_list))
    if not n_window or not eps_list:
        raise ValueError("n and eps schedules must be nonempty")
    if mass_threshold is not None and not 0.0 < mass_threshold < 1.0:
        raise ValueError("mass threshold must lie in (0, 1)")
    n_max = n_window[-1]
    if not system.on_words and sample_orbits is None and measure.M**2 <= pair_budget:
        sample_orbits = orbit_batch(system, omega, measure.samples, n_max)
    cells: dict[tuple[float, int], KatokCount] = {}
    for eps in eps_list:
        threshold = mass_threshold if mass_threshold is not None else 1.0 - eps
        for n in n_window:
            cells[(eps, n)] = katok_spanning_count(
                measure,
                omega,
                system,
                n,
                eps,
                threshold,
                kind,
                pair_budget=pair_budget,
                sample_orbits=sample_orbits,
            )
    validate_katok_counts(cells, kind)
    return cells


def table_slopes(cells, n_window, eps_list) -> list[tuple[float, float]]:
    """Per-eps (slope, rms) of log count against n, eps ascending."""
    n_window = sorted(set(int(n) for n in n_window))
    eps_list = sorted(set(float(e) for e in eps_list))
    out = []
    for eps in eps_list:
        ys = [math.log(cells[(eps, n)].count) for n in n_window]
        slope, _, rms = fit_log_slope(n_window, ys)
        out.append((slope, rms))
    return out


def katok_entropy(
    system: RandomSystemSpec,
    process,
    n_window,
    eps_list,
    M: int,
    kind: str,
    mass_threshold: float | None = None,
    num_paths: int = 1,
    master_seed: int = 0,
    pair_budget: int = 20_000_000,
) -> EntropyEstimate:
    """Entropy from the growth of almost-cover counts in n.

    Per eps, the slope of log count against n; the value is the slope at
    the smallest eps, averaged over sampled paths.  The threshold
    convention is katok_table's.
    """
    n_window = sorted(set(int(n) for n in n_window))
    eps_list = sorted(set(float(e) for e in eps_list))
    if len(n_window) < 2:
        raise ValueError("need at least two n values for a slope")
    if not eps_list or eps_list[0] <= 0.0:
        raise ValueError("eps schedule must be nonempty and positive")
    if num_paths < 1:
        raise ValueError("need at least one path sample")
    horizon = katok_horizon(system, n_window, eps_list)

    slopes_per_path = np.empty((num_paths, len(eps_list)))
    rms_per_path = np.empty((num_paths, len(eps_list)))
    for j, seed in enumerate(path_seeds(master_seed, num_paths)):
        path = sample_path(process, horizon, int(seed))
        measure = sample_measure(system, path, M, int(seed))
        cells = katok_table(
            measure,
            path,
            system,
            n_window,
            eps_list,
            kind,
            mass_threshold=mass_threshold,
            pair_budget=pair_budget,
        )
        for k, (slope, rms) in enumerate(table_slopes(cells, n_window, eps_list)):
            slopes_per_path[j, k] = slope
            rms_per_path[j, k] = rms

    slopes = tuple(float(s) for s in slopes_per_path.mean(axis=0))
    residuals = tuple(float(r) for r in rms_per_path.mean(axis=0))
    return EntropyEstimate(
        value=slopes[0],
        metric=kind,
        estimator=KATOK,
        n_window=tuple(n_window),
        eps_list=tuple(eps_list),
        slopes=slopes,
        residuals=residuals,
    )


def min_cover_exact(
    membership: np.ndarray,
    weights: np.ndarray | None = None,
    mass_threshold: float = 0.95,
    node_cap: int = 200_000,
) -> int:
    """Exact minimum number of the given sets covering the mass threshold.

    membership is (S, U) bool, sets by universe points; weights default
    to uniform.  Branch and bound over sets in descending static-weight
    order: a branch dies when even the heaviest remaining sets cannot
    reach the residual mass within the incumbent count.  Intended as an
    oracle for small instances; the node cap turns runaway search into
    ResourceCapExceeded instead of an open-ended stall.
    """
    cover = np.asarray(membership, dtype=bool)
    if cover.ndim != 2 or cover.shape[0] < 1:
        raise ValueError("membership must be a nonempty (S, U) bool array")
    S, U = cover.shape
    w = np.ones(U) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (U,) or (w < 0).any():
        raise ValueError("weights must be nonnegative, one per universe point")
    total = float(w.sum())
    if total <= 0.0:
        raise ValueError("total weight must be positive")
    if not 0.0 < mass_threshold < 1.0:
        raise ValueError("mass threshold must lie in (0, 1)")
    need = mass_threshold * total - 1e-9 * total

    static = cover @ w
    order = np.argsort(-static, kind="stable")
    cover = cover[order]
    static = static[order]
    if float(w[cover.any(axis=0)].sum()) + 1e-12 < need:
        raise ValueError("the union of the given sets cannot reach the mass threshold")

    # greedy incumbent
    covered = np.zeros(U, dtype=bool)
    ub = 0
    got = 0.0
    while got < need:
        gains = (cover & ~covered[None, :]) @ w
        i = int(np.argmax(gains))
        if gains[i] <= 0:
            ub = S + 1
            break
        covered |= cover[i]
        got = float(w[covered].sum())
        ub += 1

    # prefix sums of static weights from every suffix start, for the bound
    suffix_prefix = [None] * (S + 1)
    for start in range(S + 1):
        tail = np.sort(static[start:])[::-1]
        suffix_prefix[start] = np.concatenate(([0.0], np.cumsum(tail)))

    best = ub
    nodes = 0

    def descend(start: int, chosen: int, covered: np.ndarray, got: float) -> None:
        nonlocal best, nodes
        nodes += 1
        if nodes > node_cap:
            raise ResourceCapExceeded(
                f"cover search exceeded {node_cap} nodes; shrink the instance"
            )
        if got >= need:
            best = min(best, chosen)
            return
        remaining = need - got
        for i in range(start, S):
            # sets are sorted by static weight, so once the optimistic
            # completion from suffix i cannot beat the incumbent, no
            # later suffix can either
            pref = suffix_prefix[i]
            k = int(np.searchsorted(pref, remaining))
            if k >= pref.size or chosen + k >= best:
                return
            gain = float(w[cover[i] & ~covered].sum())
            if gain <= 0.0:
                continue
            descend(i + 1, chosen + 1, covered | cover[i], got + gain)

    descend(0, 0, np.zeros(U, dtype=bool), 0.0)
    return best
