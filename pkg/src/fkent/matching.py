"""Orbit matching: Bowen distance, match DP, and the Feldman-Katok metric.

The time-n Bowen distance between two orbits is the max of the fiber metric
over synchronized steps.  The Feldman-Katok (FK) distance relaxes the
synchronization: an (n, eps)-match is an order-preserving partial bijection
between time indices whose paired orbit points are within eps, the match
defect is 1 - (best match size)/n, and

    fk_distance = inf { eps > 0 : defect(eps) < eps }.

defect(eps) is nonincreasing while eps increases, so g(eps) = defect - eps is
strictly decreasing and the infimum is found by bisection; the returned value
carries a witness threshold with defect(witness) < witness.

Identity matching gives fk_distance <= bowen_distance always.  On shift
spaces with the discrete metric and eps in (0, 1) the defect coincides with
the normalized common-subsequence mismatch of the two symbol words.

Batch kernels evaluate one center against many orbits at once; the banded
variants exploit that a match of size k never displaces an index by more
than n - k, so ball tests at threshold delta only need the diagonal band of
width n - target.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
import math

import numpy as np

from .systems import (
    CYLINDER,
    DISCRETE,
    TORUS,
    OrbitSegment,
    circle_gap,
    cylinder_depth,
)

__all__ = [
    "BOWEN",
    "FK",
    "MatchResult",
    "FkDistance",
    "bowen_distance",
    "pair_distance_matrix",
    "max_match_size",
    "max_match_from_matrix",
    "mismatch_fraction",
    "fk_distance",
    "fk_distance_from_matrix",
    "lcs_mismatch",
    "brute_force_match",
    "brute_force_match_matrix",
    "match_target",
    "in_fk_ball",
    "bowen_ball_batch",
    "fk_ball_batch",
    "max_match_batch",
]

# labels for the two orbit distances the counting layers switch between
BOWEN = "bowen"
FK = "fk"


@dataclass(frozen=True)
class MatchResult:
    """Outcome of a match search.

    k is the exact maximum match size when no target was supplied.  With a
    target, the search may restrict to the diagonal band and stop early, in
    which case k is a lower bound that is exact whenever it reaches the
    target; `reached` reports the target decision, which is always exact.
    """

    k: int
    n: int
    eps: float
    pairs: tuple | None = None
    reached: bool | None = None

    def __post_init__(self) -> None:
        if not 0 <= self.k <= self.n:
            raise ValueError("match size out of range")

    @property
    def defect(self) -> float:
        return 1.0 - self.k / self.n


@dataclass(frozen=True)
class FkDistance:
    """FK distance value with its bisection certificate.

    value lies within tol of the true infimum and never exceeds the metric
    diameter; witness_eps is a threshold with witness_defect < witness_eps,
    certifying the infimum from above.
    """

    value: float
    tol: float
    witness_eps: float
    witness_defect: float

    def __post_init__(self) -> None:
        if self.value < 0.0:
            raise ValueError("distance must be nonnegative")
        if not self.witness_defect < self.witness_eps:
            raise ValueError("witness does not certify the crossing")


def _check_pair(a: OrbitSegment, b: OrbitSegment) -> None:
    if a.metric.kind != b.metric.kind:
        raise ValueError("orbit segments use different metrics")
    if a.n != b.n:
        raise ValueError("orbit segments have different lengths")


def bowen_distance(a: OrbitSegment, b: OrbitSegment) -> float:
    """max over i < n of the fiber distance between synchronized points."""
    _check_pair(a, b)
    n = a.n
    if a.metric.kind == TORUS:
        gaps = circle_gap(a.points[:n], b.points[:n])
        return float(np.max(gaps))
    u, v = a.word, b.word
    overlap = min(len(u), len(v))
    diff = np.nonzero(u[:overlap] != v[:overlap])[0]
    first = int(diff[0]) if len(diff) else None
    if a.metric.kind == DISCRETE:
        return 1.0 if (first is not None and first < n) else 0.0
    if first is None:
        return 0.0
    return 1.0 if first < n else 2.0 ** (-(first - n + 1))


def pair_distance_matrix(a: OrbitSegment, b: OrbitSegment) -> np.ndarray:
    """d(a_i, b_j) for all i, j < n as an (n, n) float matrix."""
    _check_pair(a, b)
    n = a.n
    if a.metric.kind == TORUS:
        gaps = circle_gap(a.points[:n, None, :], b.points[None, :n, :])
        return gaps.max(axis=2)
    u, v = a.word, b.word
    if a.metric.kind == DISCRETE:
        return np.where(u[:n, None] == v[None, :n], 0.0, 1.0)
    # cylinder: longest common extension of every suffix pair, swept bottom-up
    eq = u[:, None] == v[None, :]
    la, lb = len(u), len(v)
    ext = np.zeros((la + 1, lb + 1), dtype=np.int64)
    for i in range(la - 1, -1, -1):
        ext[i, :-1] = np.where(eq[i], ext[i + 1, 1:] + 1, 0)
    full = np.minimum(la - np.arange(n)[:, None], lb - np.arange(n)[None, :])
    d = 2.0 ** (-ext[:n, :n].astype(float))
    d[ext[:n, :n] >= full] = 0.0
    return d


def max_match_batch(compat: np.ndarray) -> np.ndarray:
    """Maximum match sizes for a (B, n, m) stack of compatibility matrices.

    Row-sweep formulation of the standard DP: with A[j] = max(M[i-1][j],
    M[i-1][j-1] + C[i][j]), row i is the running maximum of A, which
    vectorizes across the batch via cumulative maximum.
    """
    compat = np.asarray(compat, dtype=bool)
    if compat.ndim == 2:
        compat = compat[None]
    bsz, n, m = compat.shape
    row = np.zeros((bsz, m + 1), dtype=np.int32)
    for i in range(n):
        c = compat[:, i, :]
        a = np.maximum(row[:, 1:], row[:, :-1] + c)
        np.maximum.accumulate(a, axis=1, out=a)
        row[:, 1:] = a
    return row[:, -1].astype(np.int64)


def max_match_from_matrix(compat: np.ndarray, target: int | None = None) -> MatchResult:
    """Match search on a raw compatibility matrix (synthetic instances)."""
    compat = np.asarray(compat, dtype=bool)
    n, m = compat.shape
    if n != m:
        raise ValueError("compatibility matrix must be square")
    if target is None:
        k = int(max_match_batch(compat[None])[0])
        return MatchResult(k=k, n=n, eps=math.nan)
    k, reached = _banded_reach_single(compat, target)
    return MatchResult(k=k, n=n, eps=math.nan, reached=reached)


def _banded_reach_single(compat: np.ndarray, target: int) -> tuple[int, bool]:
    """Banded DP with early exit for one matrix; exact target decision."""
    n = compat.shape[0]
    if target <= 0:
        return 0, True
    if target > n:
        return 0, False
    band = n - target
    ncols = 2 * band + 1
    offs = np.arange(ncols) - band
    prev = np.zeros(ncols, dtype=np.int32)
    best = 0
    for i in range(n):
        j = i + offs
        valid = (j >= 0) & (j < n)
        c = np.zeros(ncols, dtype=np.int32)
        c[valid] = compat[i, j[valid]]
        up = np.concatenate([prev[1:], [0]])
        a = np.maximum(up, prev + c)
        a[~valid] = 0
        np.maximum.accumulate(a, out=a)
        prev = a
        best = max(best, int(a[min(ncols - 1, band + (n - 1 - i))]))
        if best >= target:
            return best, True
        if best + (n - 1 - i) < target:
            return best, False
    return best, best >= target


def compat_matrix(a: OrbitSegment, b: OrbitSegment, eps: float) -> np.ndarray:
    """Boolean matrix of d(a_i, b_j) < eps (strict)."""
    return pair_distance_matrix(a, b) < eps


def max_match_size(
    a: OrbitSegment,
    b: OrbitSegment,
    eps: float,
    target: int | None = None,
    return_pairs: bool = False,
) -> MatchResult:
    """Largest (n, eps)-match between two orbits.

    With `return_pairs` the witness pairs are reconstructed by backtracking
    that prefers the diagonal, then left, then up, making the witness
    deterministic.  `target` switches to the banded decision search.
    """
    _check_pair(a, b)
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    n = a.n
    compat = compat_matrix(a, b, eps)
    if target is not None:
        k, reached = _banded_reach_single(compat, target)
        return MatchResult(k=k, n=n, eps=eps, reached=reached)
    if not return_pairs:
        k = int(max_match_batch(compat[None])[0])
        return MatchResult(k=k, n=n, eps=eps)
    table = np.zeros((n + 1, n + 1), dtype=np.int32)
    for i in range(1, n + 1):
        table[i, 1:] = np.maximum(
            table[i - 1, 1:], table[i - 1, :-1] + compat[i - 1]
        )
        np.maximum.accumulate(table[i, 1:], out=table[i, 1:])
    pairs = []
    i, j = n, n
    while i > 0 and j > 0:
        if compat[i - 1, j - 1] and table[i, j] == table[i - 1, j - 1] + 1:
            pairs.append((i - 1, j - 1))
            i -= 1
            j -= 1
        elif table[i, j] == table[i, j - 1]:
            j -= 1
        else:
            i -= 1
    pairs.reverse()
    return MatchResult(k=int(table[n, n]), n=n, eps=eps, pairs=tuple(pairs))


def mismatch_fraction(a: OrbitSegment, b: OrbitSegment, eps: float) -> float:
    """Match defect 1 - k/n at threshold eps; nonincreasing in eps."""
    return max_match_size(a, b, eps).defect


def match_target(n: int, delta: float) -> int:
    """Smallest integer k with k > n * (1 - delta).

    defect(delta) < delta is equivalent to reaching this target, so ball
    tests reduce to one banded decision.  The 1e-9 nudge keeps exact
    integer products on the strict side of float rounding.
    """
    return int(math.floor(n * (1.0 - delta) + 1e-9)) + 1


def fk_distance_from_matrix(dist: np.ndarray, diameter: float, tol: float) -> FkDistance:
    values, w_eps, w_def = _bisect_fk(dist[None], diameter, tol)
    return FkDistance(float(values[0]), tol, float(w_eps[0]), float(w_def[0]))


def _bisect_fk(dist: np.ndarray, diameter: float, tol: float):
    """Vectorized bisection on g(eps) = defect(eps) - eps for (B, n, n) stacks."""
    bsz, n, _ = dist.shape
    lo = np.zeros(bsz)
    hi = np.full(bsz, diameter + tol)
    steps = max(1, math.ceil(math.log2((diameter + tol) / tol)))
    for _ in range(steps):
        if np.all(hi - lo <= tol):
            break
        mid = 0.5 * (lo + hi)
        k = max_match_batch(dist < mid[:, None, None])
        defect = 1.0 - k / n
        below = defect < mid
        hi = np.where(below, mid, hi)
        lo = np.where(below, lo, mid)
    k = max_match_batch(dist < hi[:, None, None])
    defect = 1.0 - k / n
    return np.minimum(hi, diameter), hi, defect


def _exact_fk_words(dist: np.ndarray, n: int) -> FkDistance:
    """Exact FK value when the pair distances take finitely many values.

    On the half-open interval between consecutive distinct distance values
    the defect is constant, so the crossing of defect(eps) against eps is
    either a defect level (a multiple of 1/n) or one of the distance values.
    One DP per distinct value resolves it; tol is reported as 0.
    """
    levels = [0.0] + [float(v) for v in np.unique(dist) if v > 0.0]
    for i, t in enumerate(levels):
        k = int(max_match_batch((dist <= t)[None])[0])
        defect = 1.0 - k / n
        nxt = levels[i + 1] if i + 1 < len(levels) else math.inf
        if defect <= t:
            return FkDistance(t, 0.0, float(np.nextafter(t, np.inf)), defect)
        if defect < nxt:
            return FkDistance(defect, 0.0, float(np.nextafter(defect, np.inf)), defect)
    raise AssertionError("full compatibility must give zero defect")


def fk_distance(a: OrbitSegment, b: OrbitSegment, tol: float | None = None) -> FkDistance:
    """FK distance, exact on word metrics, bisected to tol on the torus.

    Word pair distances take finitely many values, so the crossing is found
    exactly by scanning them.  On the torus the value is certified from
    above by a witness threshold and lies within tol (default 1e-6) of the
    infimum.
    """
    _check_pair(a, b)
    dist = pair_distance_matrix(a, b)
    if a.metric.on_words and tol is None:
        return _exact_fk_words(dist, a.n)
    if tol is None:
        tol = 1e-6
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    return fk_distance_from_matrix(dist, a.metric.diameter, tol)


def lcs_mismatch(u, v) -> float:
    """Normalized common-subsequence mismatch 1 - lcs(u, v)/n on equal-length words."""
    u = np.asarray(u, dtype=np.int64).reshape(-1)
    v = np.asarray(v, dtype=np.int64).reshape(-1)
    if len(u) != len(v):
        raise ValueError("words must have equal length")
    if len(u) == 0:
        raise ValueError("words must be nonempty")
    n = len(u)
    k = int(max_match_batch((u[:, None] == v[None, :])[None])[0])
    return 1.0 - k / n


def brute_force_match_matrix(compat: np.ndarray) -> int:
    """Exhaustive match oracle: tries every equal-size subset pair, k ascending.

    Independent of the DP recurrence; used to pin the DP down in tests.
    Enumeration cost is binomial-squared, so n is capped at 12.
    """
    compat = np.asarray(compat, dtype=bool)
    n, m = compat.shape
    if n != m:
        raise ValueError("compatibility matrix must be square")
    if n > 12:
        raise ValueError("brute force capped at n = 12")
    best = 0
    for k in range(1, n + 1):
        subsets = np.array(list(combinations(range(n), k)), dtype=np.int64)
        hit = compat[subsets[:, None, :], subsets[None, :, :]].all(axis=2)
        if hit.any():
            best = k
    return best


def brute_force_match(a: OrbitSegment, b: OrbitSegment, eps: float) -> int:
    _check_pair(a, b)
    return brute_force_match_matrix(compat_matrix(a, b, eps))


# ---------------------------------------------------------------------------
# batch kernels: one center orbit against many orbits
# ---------------------------------------------------------------------------

def _torus_band_compat(
    center_pts: np.ndarray, batch: np.ndarray, delta: float, band: int, closed: bool = False
) -> np.ndarray:
    """(M, n, 2*band+1) compat tensor; invalid band cells are False."""
    n = center_pts.shape[0]
    offs = np.arange(2 * band + 1) - band
    cols = np.arange(n)[:, None] + offs[None, :]
    valid = (cols >= 0) & (cols < n)
    safe = np.clip(cols, 0, n - 1)
    gathered = batch[:, safe, :]                       # (M, n, ncols, d)
    gaps = circle_gap(center_pts[None, :, None, :], gathered).max(axis=3)
    compat = gaps <= delta if closed else gaps < delta
    compat &= valid[None, :, :]
    return compat


def _pair_depth(delta: float, kind: str, closed: bool) -> int:
    """Agreement depth that decides d(pair) < delta (or <= delta when closed)."""
    if kind == DISCRETE:
        if delta > 1.0 or (closed and delta >= 1.0):
            return 0
        return 1
    depth = cylinder_depth(delta)
    if closed and depth >= 1 and 2.0 ** (-(depth - 1)) == delta:
        depth -= 1
    return depth


def _word_band_compat(
    center_word: np.ndarray,
    batch: np.ndarray,
    delta: float,
    band: int,
    kind: str,
    n: int,
    closed: bool = False,
) -> np.ndarray:
    depth = _pair_depth(delta, kind, closed)
    ncols = 2 * band + 1
    offs = np.arange(ncols) - band
    cols = np.arange(n)[:, None] + offs[None, :]        # batch suffix starts j
    valid = (cols >= 0) & (cols < n)
    m = batch.shape[0]
    if depth == 0:
        return np.broadcast_to(valid[None], (m, n, ncols)).copy()
    lu, lb = len(center_word), batch.shape[1]
    j_safe = np.clip(cols, 0, n - 1)
    compat = np.ones((m, n, ncols), dtype=bool)
    # positions past either stored word contribute agreement by convention
    for t in range(depth):
        ui = np.minimum(np.arange(n) + t, lu - 1)
        cw = center_word[ui]
        jj = np.minimum(j_safe + t, lb - 1)
        both = ((np.arange(n)[:, None] + t) < lu) & ((j_safe + t) < lb)
        agree = batch[:, jj] == cw[None, :, None]
        compat &= agree | ~both[None]
    compat &= valid[None]
    return compat


def _banded_reach_batch(compat: np.ndarray, band: int, target: int) -> np.ndarray:
    """Vector of target decisions for a (M, n, ncols) band-compat tensor."""
    m, n, ncols = compat.shape
    offs = np.arange(ncols) - band
    prev = np.zeros((m, ncols), dtype=np.int32)
    reached = np.zeros(m, dtype=bool)
    for i in range(n):
        j = i + offs
        valid = (j >= 0) & (j < n)
        c = np.where(valid[None, :], compat[:, i, :], False).astype(np.int32)
        up = np.concatenate([prev[:, 1:], np.zeros((m, 1), np.int32)], axis=1)
        a = np.maximum(up, prev + c)
        a[:, ~valid] = 0
        np.maximum.accumulate(a, axis=1, out=a)
        prev = a
        top = a[:, min(ncols - 1, band + (n - 1 - i))]
        reached |= top >= target
        if np.all(reached):
            break
        if np.all(reached | (top + (n - 1 - i) < target)):
            break
    return reached


def bowen_ball_batch(center: OrbitSegment, others: np.ndarray, delta: float, closed: bool = False) -> np.ndarray:
    """Membership of many orbits in the time-n Bowen ball around a center.

    `others` is an (M, n, d) orbit stack for torus systems, or an (M, L)
    word matrix for shift systems.  Open ball by default; `closed` switches
    to d <= delta (the complement of the strict separation test).
    """
    n = center.n
    if center.metric.kind == TORUS:
        gaps = circle_gap(center.points[None, :n, :], others[:, :n, :]).max(axis=(1, 2))
        return gaps <= delta if closed else gaps < delta
    u = center.word
    depth = _pair_depth(delta, center.metric.kind, closed)
    if depth == 0:
        return np.ones(others.shape[0], dtype=bool)
    span = min(n + depth - 1, len(u), others.shape[1])
    return (others[:, :span] == u[None, :span]).all(axis=1)


def fk_ball_batch(center: OrbitSegment, others: np.ndarray, delta: float, closed: bool = False) -> np.ndarray:
    """FK ball test defect(delta) < delta for a batch, via the banded DP.

    With `closed`, matched pairs are allowed at distance exactly delta.  The
    complement of the closed variant is the strict separation relation, the
    one under which a full Bowen-ball inclusion survives boundary ties.
    """
    n = center.n
    target = match_target(n, delta)
    if target > n:
        return np.zeros(others.shape[0], dtype=bool)
    if target <= 0:
        return np.ones(others.shape[0], dtype=bool)
    band = n - target
    if center.metric.kind == TORUS:
        compat = _torus_band_compat(center.points[:n], others[:, :n, :], delta, band, closed)
    else:
        compat = _word_band_compat(center.word, others, delta, band, center.metric.kind, n, closed)
    return _banded_reach_batch(compat, band, target)


def in_fk_ball(center: OrbitSegment, other: OrbitSegment, delta: float) -> bool:
    """Single-pair FK ball test: defect(delta) < delta."""
    _check_pair(center, other)
    res = max_match_size(center, other, delta, target=match_target(center.n, delta))
    return bool(res.reached)
