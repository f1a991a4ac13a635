"""Dynamical-ball measures and local entropy along one driving path.

The estimators here share one recipe: draw M points from the reference
fiber measure (Lebesgue for the circle families, the per-step uniform
word measure for shifts), iterate all of them along the path once, and
estimate the mass of a time-n ball about a base point as the fraction of
sample orbits that stay delta-close in the chosen orbit metric.  Orbit
prefixes nest, so one stack of length max(n) serves the whole schedule.

The reported local entropy is a slope, not a single-entry value: the
least-squares fit of -log(mass) against n at the smallest usable delta.
A single entry -(1/n) log mass carries the constant log(delta * geometry)
as an O(1/n) bias; the slope cancels it.

Zero-count entries are flagged rather than infinite.  An empirical count
of zero at fixed M says the ball is smaller than about 1/M, nothing more,
so fits skip flagged entries and the record keeps them visible.

Ball conventions match the counting side: open balls for both kinds, and
the FK ball is the single-threshold test (defect below delta with pair
distances strictly below delta).  Bowen masses are nonincreasing in n and
nondecreasing in delta, exactly, on a fixed sample.  FK masses are only
nondecreasing in delta: when the matching slack floor(n*delta) jumps, an
FK ball at n+1 can strictly contain new points, so no n-law is asserted.

The same slack jump breaks naive slope fits for FK tables.  An FK ball
with slack b is roughly a union of order-n^(2b) Bowen-sized slivers (one
per near-diagonal matching pattern), so log mass shifts by the log of
that pattern count exactly where the schedule crosses a slack boundary.
The slack per (n, delta) cell is known in advance, so the fit here
regresses log mass on n with one intercept per slack value: intercepts
absorb the pattern-count factors, the shared slope keeps the decay rate.
With a single slack value (always true for Bowen) this is ordinary least
squares.
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
from .systems import (
    TORUS,
    InvariantViolation,
    OmegaPath,
    OrbitSegment,
    RandomSystemSpec,
    child_rng,
    circle_gap,
    orbit,
    orbit_batch,
    row_codes,
    sample_path,
)

__all__ = [
    "EmpiricalMeasure",
    "GridPartition",
    "LocalEntry",
    "LocalEntropyRecord",
    "sample_measure",
    "ball_measure",
    "local_entropy",
    "smb_estimate",
    "partition_entropy_rate",
]

# Rows per chunk when streaming sample orbits; keeps peak memory near
# chunk * n * 8 bytes per live array regardless of M.
_CHUNK_ROWS = 200_000

# Stream id for measure sampling under child_rng, distinct from the path
# stream (0) and the candidate stream (3).
_MEASURE_STREAM = 5


@dataclass
class EmpiricalMeasure:
    """M i.i.d. draws from a reference fiber measure.

    samples is (M, d) floats in [0, 1) for circle families or an (M, L)
    int64 word matrix for shifts.  Set membership is always estimated as
    count/M, so M >= 1 is required up front.
    """

    samples: np.ndarray
    seed: int
    on_words: bool = False

    def __post_init__(self) -> None:
        arr = np.asarray(self.samples)
        if arr.ndim != 2:
            raise ValueError("samples must be a 2-d array")
        if arr.shape[0] < 1:
            raise ValueError("empirical measure needs M >= 1 samples")
        if self.on_words:
            arr = arr.astype(np.int64, copy=False)
            if arr.size and arr.min() < 0:
                raise ValueError("word samples must be nonnegative symbols")
        else:
            arr = arr.astype(float, copy=False)
            if arr.size and (arr.min() < 0.0 or arr.max() >= 1.0):
                raise ValueError("torus samples must lie in [0, 1)")
        self.samples = arr

    @property
    def M(self) -> int:
        return int(self.samples.shape[0])


def sample_measure(system: RandomSystemSpec, omega: OmegaPath, M: int, seed: int) -> EmpiricalMeasure:
    """Draw M samples from the reference measure of the system's fiber.

    Circle families get Lebesgue, which every expanding map and every
    full-branch tent preserves.  Shift systems get the product measure
    whose step-i marginal is uniform on the alphabet of the step-i fiber,
    the family the shift cocycle pushes forward onto itself.  Word samples
    carry one symbol per path step, so the path horizon bounds the usable
    n + depth - 1 downstream.
    """
    if M < 1:
        raise ValueError("sample count M must be >= 1")
    rng = child_rng(seed, _MEASURE_STREAM)
    if system.on_words:
        length = omega.horizon
        if length < 1:
            raise ValueError("path horizon must be >= 1 to sample word measures")
        sizes = system.factor_along(omega, length)
        u = rng.random((M, length))
        words = np.minimum((u * sizes[None, :]).astype(np.int64), sizes[None, :] - 1)
        return EmpiricalMeasure(words, seed, on_words=True)
    if system.metric.kind == TORUS:
        return EmpiricalMeasure(rng.random((M, 1)), seed)
    raise ValueError(f"no reference measure for family {system.family!r}")


@dataclass(frozen=True)
class GridPartition:
    """Finite partition of the fiber with cell diameter <= mesh.

    Circle families use boxes of side 1/ceil(1/mesh) per coordinate, so
    the sup-metric diameter of a cell is at most the mesh (dimension
    factor 1).  Shifts use cylinder sets of the smallest depth whose
    diameter 2^-depth is <= mesh; mesh >= 1 yields the one-cell partition.
    """

    kind: str
    mesh: float

    def __post_init__(self) -> None:
        if not 0.0 < self.mesh <= 1.0:
            raise ValueError("partition mesh must lie in (0, 1]")

    @property
    def on_words(self) -> bool:
        return self.kind != TORUS

    @property
    def boxes_per_axis(self) -> int:
        return max(1, int(math.ceil(1.0 / self.mesh - 1e-12)))

    @property
    def depth(self) -> int:
        if self.mesh >= 1.0:
            return 0
        return max(1, int(math.ceil(-math.log2(self.mesh) - 1e-12)))

    def cell_count_per_step(self, system: RandomSystemSpec) -> int:
        """Upper bound on distinct labels a single step can produce."""
        if self.on_words:
            return int(system.space_alphabet) ** self.depth if self.depth else 1
        dim = 1
        return self.boxes_per_axis**dim

    def itinerary(self, system: RandomSystemSpec, stack: np.ndarray, n: int) -> np.ndarray:
        """Cell labels of the first n orbit points for a whole stack.

        stack is (M, n', d) orbit points with n' >= n, or an (M, L) word
        matrix with L >= n + depth - 1.  Labels are ints, unique per cell.
        """
        if self.on_words != system.on_words:
            raise ValueError("partition kind does not match the system")
        if self.on_words:
            m = self.depth
            if m == 0:
                return np.zeros((stack.shape[0], n), dtype=np.int64)
            if stack.shape[1] < n + m - 1:
                raise ValueError(
                    f"words of length {stack.shape[1]} too short for n={n} at depth {m}"
                )
            base = system.space_alphabet
            labels = np.zeros((stack.shape[0], n), dtype=np.int64)
            for j in range(m):
                labels = labels * base + stack[:, j : j + n]
            return labels
        if stack.ndim != 3 or stack.shape[1] < n:
            raise ValueError("orbit stack too short for the requested n")
        boxes = self.boxes_per_axis
        digits = np.floor(stack[:, :n, :] * boxes).astype(np.int64)
        np.clip(digits, 0, boxes - 1, out=digits)
        labels = np.zeros(stack.shape[:1] + (n,), dtype=np.int64)
        for j in range(stack.shape[2]):
            labels = labels * boxes + digits[:, :, j]
        return labels


def _orbit_chunks(
    system: RandomSystemSpec,
    omega: OmegaPath,
    measure: EmpiricalMeasure,
    n: int,
    sample_orbits: np.ndarray | None,
):
    """Yield orbit stacks of the samples in fixed chunk order."""
    if system.on_words:
        yield measure.samples
        return
    if sample_orbits is not None:
        if sample_orbits.shape[0] != measure.M or sample_orbits.shape[1] < n:
            raise ValueError("precomputed sample orbits do not cover the schedule")
        for lo in range(0, measure.M, _CHUNK_ROWS):
            yield sample_orbits[lo : lo + _CHUNK_ROWS, :n, :]
        return
    for lo in range(0, measure.M, _CHUNK_ROWS):
        yield orbit_batch(system, omega, measure.samples[lo : lo + _CHUNK_ROWS], n)


def ball_measure(
    measure: EmpiricalMeasure,
    center: OrbitSegment,
    n: int,
    delta: float,
    kind: str,
    system: RandomSystemSpec,
    omega: OmegaPath,
    sample_orbits: np.ndarray | None = None,
) -> float:
    """Empirical mass of the open time-n ball of radius delta at the center.

    Bowen membership is max-distance < delta over the synchronized steps;
    FK membership is the single-threshold test (match defect below delta
    with pair distances < delta).  The center is never added to the
    sample set, so small masses stay unbiased at the 1/M scale.
    """
    if measure.M < 1:
        raise ValueError("ball_measure needs a nonempty sample set")
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    if kind not in (BOWEN, FK):
        raise ValueError(f"unknown orbit metric: {kind!r}")
    if n < 1 or center.n < n:
        raise ValueError("center orbit shorter than the requested n")
    if measure.on_words != system.on_words:
        raise ValueError("measure kind does not match the system")
    if delta > system.metric.diameter:
        return 1.0
    if system.on_words:
        depth = _pair_depth(delta, system.metric.kind, False)
        if measure.samples.shape[1] < n + depth - 1:
            raise ValueError(
                f"sampled words of length {measure.samples.shape[1]} too short "
                f"for n={n} at radius {delta}"
            )
    ref = center.prefix(n)
    count = 0
    for stack in _orbit_chunks(system, omega, measure, n, sample_orbits):
        if kind == BOWEN:
            inside = bowen_ball_batch(ref, stack, delta)
        else:
            inside = fk_ball_batch(ref, stack, delta)
        count += int(inside.sum())
    return count / measure.M


@dataclass(frozen=True)
class LocalEntry:
    """One (n, delta) cell of a local entropy table."""

    n: int
    delta: float
    kind: str
    count: int
    M: int

    @property
    def flagged(self) -> bool:
        return self.count == 0

    @property
    def estimate(self) -> float:
        if self.flagged:
            return math.nan
        return -math.log(self.count / self.M) / self.n


@dataclass
class LocalEntropyRecord:
    """Local entropy table for one base point along one path.

    entries covers the full (n, delta) schedule, flagged cells included.
    value is the slope-style estimate: the fitted decay rate of
    log(count/M) against n at delta_used, the smallest delta whose
    largest-n entry has a nonzero count, with one intercept per
    matching-slack band (plain least squares for Bowen tables).
    """

    kind: str
    base_point: np.ndarray
    omega_seed: int | None
    M: int
    entries: tuple[LocalEntry, ...]
    value: float
    delta_used: float
    n_window: tuple[int, ...]
    residual_rms: float

    def __post_init__(self) -> None:
        for e in self.entries:
            if e.kind != self.kind:
                raise InvariantViolation("mixed metric kinds in one record")
            if not e.flagged and e.estimate < -1e-12:
                raise InvariantViolation("negative local entropy entry")
        if self.kind == BOWEN:
            by_delta: dict[float, list[LocalEntry]] = {}
            for e in self.entries:
                by_delta.setdefault(e.delta, []).append(e)
            for col in by_delta.values():
                col.sort(key=lambda e: e.n)
                for a, b in zip(col, col[1:]):
                    if b.count > a.count:
                        raise InvariantViolation(
                            f"Bowen ball count grew from n={a.n} to n={b.n}"
                        )

    def entry(self, n: int, delta: float) -> LocalEntry:
        for e in self.entries:
            if e.n == n and e.delta == delta:
                return e
        raise KeyError((n, delta))


def _stratified_log_slope(ns, ys, bands) -> tuple[float, float]:
    """Slope of ys on ns with one intercept per band value.

    Pooled within-group least squares: groups are cells sharing a band
    (matching slack) value, each gets its own intercept, the slope is
    common.  Groups with a single point pin their intercept and add
    nothing to the slope.  Returns (slope, within-group residual rms).
    """
    xs = np.asarray(ns, dtype=float)
    ys = np.asarray(ys, dtype=float)
    bands = np.asarray(bands)
    num = 0.0
    den = 0.0
    for b in np.unique(bands):
        sel = bands == b
        if sel.sum() < 2:
            continue
        xc = xs[sel] - xs[sel].mean()
        num += float(np.dot(xc, ys[sel] - ys[sel].mean()))
        den += float(np.dot(xc, xc))
    if den == 0.0:
        raise ValueError(
            "every matching-slack group is a single point; widen the n window"
        )
    slope = num / den
    sq = 0.0
    for b in np.unique(bands):
        sel = bands == b
        resid = ys[sel] - ys[sel].mean() - slope * (xs[sel] - xs[sel].mean())
        sq += float(np.dot(resid, resid))
    return slope, math.sqrt(sq / xs.size)


def _fk_cells_needing_dp(n_list, delta_list):
    """Schedule cells where the FK ball differs from the Bowen ball.

    Zero matching slack forces the identity match, which is exactly the
    Bowen condition, so those cells reuse Bowen counts.
    """
    out = []
    for n in n_list:
        for delta in delta_list:
            if match_target(n, delta) < n:
                out.append((n, delta))
    return out


def _ball_count_table(
    system: RandomSystemSpec,
    omega: OmegaPath,
    measure: EmpiricalMeasure,
    center: OrbitSegment,
    n_list,
    delta_list,
    kind: str,
    sample_orbits: np.ndarray | None,
) -> dict[tuple[int, float], int]:
    """Ball counts for the whole (n, delta) schedule in one sample pass.

    Bowen counts for every n fall out of one running-max gap profile per
    chunk; FK counts are needed separately only at cells with matching
    slack, where the banded DP runs on the chunk.
    """
    n_list = sorted(n_list)
    delta_list = sorted(delta_list)
    n_max = n_list[-1]
    counts: dict[tuple[int, float], int] = {
        (n, d): 0 for n in n_list for d in delta_list
    }
    fk_cells = _fk_cells_needing_dp(n_list, delta_list) if kind == FK else []

    if system.on_words:
        depth_need = max(
            _pair_depth(d, system.metric.kind, False) for d in delta_list
        )
        if measure.samples.shape[1] < n_max + depth_need - 1:
            raise ValueError(
                f"sampled words of length {measure.samples.shape[1]} too short "
                f"for n={n_max} at radius {min(delta_list)}"
            )

    for stack in _orbit_chunks(system, omega, measure, n_max, sample_orbits):
        if system.on_words:
            for n in n_list:
                ref = center.prefix(n)
                for d in delta_list:
                    if kind == FK and (n, d) in fk_cells:
                        inside = fk_ball_batch(ref, stack, d)
                    else:
                        inside = bowen_ball_batch(ref, stack, d)
                    counts[(n, d)] += int(inside.sum())
            continue
        gaps = circle_gap(stack[:, :n_max, :], center.points[None, :n_max, :])
        profile = np.maximum.accumulate(gaps.max(axis=2), axis=1)
        for n in n_list:
            tail = profile[:, n - 1]
            for d in delta_list:
                if kind == FK and (n, d) in fk_cells:
                    inside = fk_ball_batch(center.prefix(n), stack[:, :n, :], d)
                    counts[(n, d)] += int(inside.sum())
                else:
                    counts[(n, d)] += int((tail < d).sum())
    return counts


def local_entropy(
    system: RandomSystemSpec,
    omega: OmegaPath,
    x,
    n_list,
    delta_list,
    M: int,
    kind: str,
    seed: int = 0,
    omega_seed: int | None = None,
    measure: EmpiricalMeasure | None = None,
    sample_orbits: np.ndarray | None = None,
) -> LocalEntropyRecord:
    """Fill the (n, delta) local entropy table for one base point.

    Preflight: before trusting the largest n, the count there is
    predicted by geometric extrapolation from the two previous n's at the
    largest delta; a prediction below 10 means M is too small for the
    schedule and raises.  Zero counts inside the table are flagged
    entries, not errors.

    measure/sample_orbits let callers share one sampled measure and one
    orbit stack across base points and metric kinds.
    """
    n_list = sorted(set(int(n) for n in n_list))
    delta_list = sorted(set(float(d) for d in delta_list))
    if not n_list or not delta_list:
        raise ValueError("n and delta schedules must be nonempty")
    if n_list[0] < 1:
        raise ValueError("n schedule must be positive")
    if delta_list[0] <= 0.0:
        raise ValueError("delta schedule must be positive")
    if kind not in (BOWEN, FK):
        raise ValueError(f"unknown orbit metric: {kind!r}")
    if measure is None:
        measure = sample_measure(system, omega, M, seed)
    if measure.M != M:
        raise ValueError(f"measure has M={measure.M}, schedule says {M}")

    center = orbit(system, omega, x, n_list[-1])
    counts = _ball_count_table(
        system, omega, measure, center, n_list, delta_list, kind, sample_orbits
    )

    d_top = delta_list[-1]
    if len(n_list) >= 3:
        c2 = counts[(n_list[-3], d_top)]
        c1 = counts[(n_list[-2], d_top)]
        if c2 == 0 or c1 == 0:
            predicted = 0.0
        else:
            step = (n_list[-1] - n_list[-2]) / (n_list[-2] - n_list[-3])
            predicted = c1 * (c1 / c2) ** step
    elif len(n_list) == 2:
        predicted = float(counts[(n_list[-2], d_top)])
    else:
        predicted = float(counts[(n_list[0], d_top)])
    if predicted < 10.0:
        raise ValueError(
            f"sample budget too small: predicted count {predicted:.1f} < 10 "
            f"at n={n_list[-1]}, delta={d_top}; raise M above "
            f"{int(math.ceil(10 * M / max(predicted, 1e-3)))}"
        )

    entries = tuple(
        LocalEntry(n, d, kind, counts[(n, d)], M)
        for n in n_list
        for d in delta_list
    )

    delta_used = math.nan
    value = math.nan
    rms = math.nan
    for d in delta_list:
        if counts[(n_list[-1], d)] > 0:
            delta_used = d
            break
    if not math.isnan(delta_used):
        xs = [n for n in n_list if counts[(n, delta_used)] > 0]
        ys = [math.log(counts[(n, delta_used)] / M) for n in xs]
        if len(xs) >= 2:
            if kind == FK:
                bands = [n - match_target(n, delta_used) for n in xs]
            else:
                bands = [0] * len(xs)
            slope, rms = _stratified_log_slope(xs, ys, bands)
            value = -slope
        else:
            value = -ys[0] / xs[0]

    base = center.points[0] if not system.on_words else center.word
    return LocalEntropyRecord(
        kind=kind,
        base_point=np.asarray(base),
        omega_seed=omega_seed,
        M=M,
        entries=entries,
        value=value,
        delta_used=delta_used,
        n_window=tuple(n_list),
        residual_rms=rms,
    )


def smb_estimate(
    system: RandomSystemSpec,
    omega: OmegaPath,
    x,
    partition: GridPartition,
    n: int,
    measure: EmpiricalMeasure,
) -> float:
    """-(1/n) log of the empirical mass of the dynamical partition cell.

    The time-n cell of x is the set of points whose itinerary through the
    partition agrees with x's for n steps; membership is computed by
    comparing label rows.  Returns NaN when no sample lands in the cell
    (flagged, same convention as ball counts).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if measure.on_words != system.on_words:
        raise ValueError("measure kind does not match the system")
    center = orbit(system, omega, x, n)
    if system.on_words:
        ref = partition.itinerary(system, center.word[None, :], n)[0]
    else:
        ref = partition.itinerary(system, center.points[None, :, :], n)[0]
    count = 0
    for stack in _orbit_chunks(system, omega, measure, n, None):
        labels = partition.itinerary(system, stack, n)
        count += int((labels == ref[None, :]).all(axis=1).sum())
    if count == 0:
        return math.nan
    return -math.log(count / measure.M) / n + 0.0


def partition_entropy_rate(
    system: RandomSystemSpec,
    process,
    partition: GridPartition,
    n_window,
    M: int,
    omega_samples: int,
    master_seed: int = 0,
) -> float:
    """Plug-in entropy rate H_n/n of itinerary frequencies, path-averaged.

    H_n is the Shannon entropy of the empirical distribution over occupied
    time-n itinerary cells, which never exceeds log(#occupied cells); that
    bound is asserted for every window entry.  The plug-in form has a
    negative bias of order (#cells - 1)/(2M), documented rather than
    corrected.  Returns the value at the largest n in the window.
    """
    from .spanning import path_seeds

    n_window = sorted(set(int(n) for n in n_window))
    if not n_window or n_window[0] < 1:
        raise ValueError("n window must be nonempty and positive")
    if omega_samples < 1:
        raise ValueError("need at least one path sample")
    n_max = n_window[-1]
    horizon = n_max + max(partition.depth, 1)
    top_rates = []
    for seed in path_seeds(master_seed, omega_samples):
        path = sample_path(process, horizon, int(seed))
        measure = sample_measure(system, path, M, int(seed))
        if system.on_words:
            stack = measure.samples
        else:
            stack = orbit_batch(system, path, measure.samples, n_max)
        labels = partition.itinerary(system, stack, n_max)
        for n in n_window:
            codes = row_codes(labels[:, :n])
            _, cell_counts = np.unique(codes, return_counts=True)
            p = cell_counts / M
            entropy = float(-(p * np.log(p)).sum())
            if entropy > math.log(len(cell_counts)) + 1e-9:
                raise InvariantViolation(
                    "plug-in entropy exceeded log of the occupied cell count"
                )
            if n == n_max:
                top_rates.append(entropy / n)
    return float(np.mean(top_rates))
