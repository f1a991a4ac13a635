"""Random dynamical systems: driving processes, sample paths, fiber maps.

A system is a finite family of interval/circle maps or shift maps indexed by
the letters of a driving alphabet.  A sampled driving path selects which map
acts at each step, so the time-n orbit of a point x is

    x, T_{w0} x, T_{w1} T_{w0} x, ..., (T_{w_{n-2}} o ... o T_{w0}) x.

Built-in families keep their reference measure exactly invariant along every
path: piecewise-linear expanding circle maps (x -> m*x mod 1) and integer
slope tent maps preserve Lebesgue measure, and full shifts with per-letter
alphabet sizes preserve the matching product of uniform distributions.
Driving laws are Bernoulli or stationary Markov over a finite alphabet; no
abstract measurable-space machinery is modeled beyond that.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

TORUS = "torus"
DISCRETE = "discrete"
CYLINDER = "cylinder"

EXPANDING = "expanding"
TENT = "tent"
FULL_SHIFT = "full_shift"

# snap tolerance: mod-1 outputs this close to 1 are canonicalized to 0
_WRAP_TOL = 1e-15


class InvariantViolation(AssertionError):
    """A declared invariant failed at runtime (CLI exit code 3)."""


class ResourceCapExceeded(RuntimeError):
    """A configured resource budget cannot be honored (CLI exit code 4)."""


def child_rng(master_seed: int, *stream: int) -> np.random.Generator:
    """Deterministic generator for a (master seed, stream ids...) tuple.

    Seed splitting is a pure function of its arguments: the entropy fed to
    numpy's SeedSequence is the integer tuple itself, so any worker can
    recreate any stream without coordination.
    """
    entropy = [int(master_seed)] + [int(s) for s in stream]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def wrap_unit(values: np.ndarray) -> np.ndarray:
    """Reduce mod 1 onto [0, 1), snapping values within 1e-15 of 1 to 0."""
    out = np.mod(values, 1.0)
    if np.isscalar(out):
        return 0.0 if out > 1.0 - _WRAP_TOL else out
    out = np.asarray(out)
    out[out > 1.0 - _WRAP_TOL] = 0.0
    return out


def circle_gap(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Arc distance on the unit circle, elementwise."""
    raw = np.abs(np.asarray(u, dtype=float) - np.asarray(v, dtype=float))
    return np.minimum(raw, 1.0 - raw)


@dataclass(frozen=True)
class FiberMetric:
    """Metric on the phase space, one of three kinds.

    torus     max over coordinates of the circle arc distance; diameter 1/2.
    discrete  0/1 comparison of the leading symbol of a word; diameter 1.
    cylinder  2^(-t) where t is the first index at which two words disagree
              (agreement over the full stored overlap gives 0); diameter 1.
    """

    kind: str

    def __post_init__(self) -> None:
        if self.kind not in (TORUS, DISCRETE, CYLINDER):
            raise ValueError(f"unknown metric kind: {self.kind!r}")

    @property
    def diameter(self) -> float:
        return 0.5 if self.kind == TORUS else 1.0

    @property
    def on_words(self) -> bool:
        return self.kind in (DISCRETE, CYLINDER)

    def distance(self, a, b) -> float:
        """Distance between two phase points (arrays or PhasePoints)."""
        a = a.value if isinstance(a, PhasePoint) else np.asarray(a)
        b = b.value if isinstance(b, PhasePoint) else np.asarray(b)
        if self.kind == TORUS:
            return float(np.max(circle_gap(np.atleast_1d(a), np.atleast_1d(b))))
        if self.kind == DISCRETE:
            return 0.0 if a.reshape(-1)[0] == b.reshape(-1)[0] else 1.0
        return cylinder_distance(a.reshape(-1), b.reshape(-1))


def cylinder_distance(u: np.ndarray, v: np.ndarray) -> float:
    overlap = min(len(u), len(v))
    if overlap == 0:
        return 0.0
    diff = np.nonzero(u[:overlap] != v[:overlap])[0]
    if len(diff) == 0:
        return 0.0
    return float(2.0 ** (-int(diff[0])))


def cylinder_depth(eps: float) -> int:
    """Number of leading symbols two words must share so that d < eps.

    2^(-t) < eps iff t >= depth; exact powers of two land on the strict side.
    """
    if not 0.0 < eps:
        raise ValueError("eps must be positive")
    if eps > 1.0:
        return 0
    depth = int(math.floor(math.log2(1.0 / eps))) + 1
    while 2.0 ** (-(depth - 1)) < eps:
        depth -= 1
    while not 2.0 ** (-depth) < eps:
        depth += 1
    return depth


@dataclass(frozen=True)
class PhasePoint:
    """A point of the phase space: torus coordinates or a symbol word."""

    value: np.ndarray
    kind: str

    def __post_init__(self) -> None:
        if self.kind == TORUS:
            v = np.asarray(self.value, dtype=float).reshape(-1)
            if v.size == 0 or np.any(v < 0.0) or np.any(v >= 1.0):
                raise ValueError("torus coordinates must lie in [0, 1)")
        elif self.kind == "word":
            v = np.asarray(self.value, dtype=np.int64).reshape(-1)
            if v.size == 0 or np.any(v < 0):
                raise ValueError("word symbols must be nonnegative integers")
        else:
            raise ValueError(f"unknown point kind: {self.kind!r}")
        object.__setattr__(self, "value", v)

    @staticmethod
    def torus(coords) -> "PhasePoint":
        return PhasePoint(np.asarray(coords, dtype=float).reshape(-1), TORUS)

    @staticmethod
    def word(symbols) -> "PhasePoint":
        return PhasePoint(np.asarray(symbols, dtype=np.int64).reshape(-1), "word")


@dataclass(frozen=True, eq=False)
class OmegaPath:
    """A realized driving path: a finite symbol sequence plus a shift offset.

    Shifting is O(1); the underlying symbol array is shared.  `seed` records
    the sampling seed for provenance (None for hand-built paths).
    """

    symbols: np.ndarray
    seed: int | None = None
    offset: int = 0

    def __post_init__(self) -> None:
        sym = np.asarray(self.symbols, dtype=np.int64).reshape(-1)
        if np.any(sym < 0):
            raise ValueError("path symbols must be nonnegative")
        if not 0 <= self.offset <= len(sym):
            raise ValueError("offset out of range")
        object.__setattr__(self, "symbols", sym)

    @property
    def horizon(self) -> int:
        return len(self.symbols) - self.offset

    def symbol(self, i: int) -> int:
        if not 0 <= i < self.horizon:
            raise IndexError("path index beyond horizon")
        return int(self.symbols[self.offset + i])

    def window(self, n: int) -> np.ndarray:
        if n > self.horizon:
            raise ValueError(f"window {n} exceeds horizon {self.horizon}")
        return self.symbols[self.offset : self.offset + n]

    def shifted(self, i: int) -> "OmegaPath":
        if not 0 <= i <= self.horizon:
            raise ValueError("shift beyond horizon")
        return OmegaPath(self.symbols, self.seed, self.offset + i)


def path_from_symbols(symbols) -> OmegaPath:
    return OmegaPath(np.asarray(symbols, dtype=np.int64))


@dataclass(frozen=True, eq=False)
class DrivingProcess:
    """Finite-alphabet driving law: Bernoulli weights or a Markov chain.

    For the Markov law, `p` is the initial distribution and `rows` the
    transition matrix; sampling starts from `p`, so choosing the stationary
    vector keeps the symbol process stationary.
    """

    law: str
    p: np.ndarray
    rows: np.ndarray | None = None

    def __post_init__(self) -> None:
        p = np.asarray(self.p, dtype=float).reshape(-1)
        if p.size == 0 or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise ValueError("p must be a probability vector")
        object.__setattr__(self, "p", p)
        if self.law == "bernoulli":
            if self.rows is not None:
                raise ValueError("bernoulli law takes no transition rows")
        elif self.law == "markov":
            rows = np.asarray(self.rows, dtype=float)
            if rows.shape != (p.size, p.size):
                raise ValueError("transition matrix shape mismatch")
            if np.any(rows < 0) or np.any(np.abs(rows.sum(axis=1) - 1.0) > 1e-9):
                raise ValueError("transition rows must be stochastic")
            object.__setattr__(self, "rows", rows)
        else:
            raise ValueError(f"unknown driving law: {self.law!r}")

    @property
    def alphabet_size(self) -> int:
        return int(self.p.size)

    def stationary(self) -> np.ndarray:
        """Stationary distribution (the Bernoulli weights, or the Markov
        left eigenvector for eigenvalue 1, found by dense solve)."""
        if self.law == "bernoulli":
            return self.p.copy()
        k = self.alphabet_size
        a = np.vstack([self.rows.T - np.eye(k), np.ones(k)])
        b = np.zeros(k + 1)
        b[-1] = 1.0
        pi, *_ = np.linalg.lstsq(a, b, rcond=None)
        pi = np.clip(pi, 0.0, None)
        return pi / pi.sum()


def bernoulli_process(p) -> DrivingProcess:
    """I.i.d. symbols with weight vector p; a scalar p means (p, 1 - p)."""
    arr = np.asarray(p, dtype=float)
    if arr.ndim == 0:
        arr = np.array([float(arr), 1.0 - float(arr)])
    return DrivingProcess("bernoulli", arr)


def markov_process(rows, initial=None) -> DrivingProcess:
    rows = np.asarray(rows, dtype=float)
    if initial is None:
        probe = DrivingProcess("markov", np.full(len(rows), 1.0 / len(rows)), rows)
        initial = probe.stationary()
    return DrivingProcess("markov", np.asarray(initial, dtype=float), rows)


def sample_path(process: DrivingProcess, length: int, seed: int) -> OmegaPath:
    """Draw one driving path of the given length, reproducibly from seed."""
    if length < 1:
        raise ValueError("length must be >= 1")
    rng = child_rng(seed, 0)
    k = process.alphabet_size
    if process.law == "bernoulli":
        symbols = rng.choice(k, size=length, p=process.p)
    else:
        cdf = np.cumsum(process.rows, axis=1)
        draws = rng.random(length)
        symbols = np.empty(length, dtype=np.int64)
        symbols[0] = rng.choice(k, p=process.p)
        for t in range(1, length):
            symbols[t] = np.searchsorted(cdf[symbols[t - 1]], draws[t], side="right")
    return OmegaPath(np.asarray(symbols, dtype=np.int64), seed=int(seed))


@dataclass(frozen=True, eq=False)
class RandomSystemSpec:
    """A built-in family plus its per-letter parameters and fiber metric.

    factors[s] is the expansion factor (expanding), branch count (tent), or
    alphabet size (full shift) used when the driving path emits letter s.
    Factor 1 is accepted so identity fibers are constructible; entropy
    oracles that need expansion impose their own >= 2 precondition.
    """

    family: str
    factors: tuple
    metric: FiberMetric
    word_length: int = 0

    def __post_init__(self) -> None:
        if self.family not in (EXPANDING, TENT, FULL_SHIFT):
            raise ValueError(f"unknown family: {self.family!r}")
        factors = tuple(int(f) for f in self.factors)
        if len(factors) == 0 or any(f < 1 for f in factors):
            raise ValueError("factors must be integers >= 1")
        object.__setattr__(self, "factors", factors)
        if self.family == FULL_SHIFT:
            if not self.metric.on_words:
                raise ValueError("shift systems need the discrete or cylinder metric")
            if self.word_length < 1:
                raise ValueError("shift systems need word_length >= 1")
        else:
            if self.metric.kind != TORUS:
                raise ValueError(f"{self.family} systems use the torus metric")

    @property
    def on_words(self) -> bool:
        return self.family == FULL_SHIFT

    @property
    def space_alphabet(self) -> int:
        """Symbol alphabet of the phase space (shift systems)."""
        if not self.on_words:
            raise ValueError("space_alphabet applies to shift systems only")
        return max(self.factors)

    def factor_along(self, path: OmegaPath, n: int) -> np.ndarray:
        """factors[w_i] for i < n as an int64 array."""
        window = path.window(n)
        if np.any(window >= len(self.factors)):
            raise ValueError("path symbol outside the driving alphabet")
        return np.asarray(self.factors, dtype=np.int64)[window]


def expanding_system(factors) -> RandomSystemSpec:
    return RandomSystemSpec(EXPANDING, tuple(factors), FiberMetric(TORUS))

def tent_system(factors) -> RandomSystemSpec:
    return RandomSystemSpec(TENT, tuple(factors), FiberMetric(TORUS))

def shift_system(factors, metric_kind: str = CYLINDER, word_length: int = 32) -> RandomSystemSpec:
    return RandomSystemSpec(FULL_SHIFT, tuple(factors), FiberMetric(metric_kind), word_length)


def apply_fiber_map(system: RandomSystemSpec, symbol: int, x: np.ndarray) -> np.ndarray:
    """One step of the fiber map for a driving letter; torus families only.

    Accepts any array whose last axis is the coordinate axis and applies the
    map elementwise, so batched orbits reuse the same kernel.
    """
    m = system.factors[int(symbol)]
    x = np.asarray(x, dtype=float)
    if system.family == EXPANDING:
        return wrap_unit(m * x)
    if system.family == TENT:
        t = np.mod(m * x, 2.0)
        return wrap_unit(1.0 - np.abs(1.0 - t))
    raise ValueError("apply_fiber_map applies to torus families; shifts advance by suffix")


@dataclass(frozen=True, eq=False)
class OrbitSegment:
    """The first n points of an orbit along a path.

    Torus families store the points as an (n, d) float array.  Shift
    families store the base word once; the i-th orbit point is the suffix
    starting at i, referenced by index without copying.
    """

    metric: FiberMetric
    n: int
    points: np.ndarray | None = None
    word: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("orbit length must be >= 1")
        if (self.points is None) == (self.word is None):
            raise ValueError("exactly one of points/word must be set")
        if self.word is not None and len(self.word) < self.n:
            raise ValueError("stored word shorter than the orbit length")

    @property
    def on_words(self) -> bool:
        return self.word is not None

    @staticmethod
    def from_points(points) -> "OrbitSegment":
        arr = np.asarray(points, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        return OrbitSegment(metric=FiberMetric(TORUS), n=arr.shape[0], points=arr)

    @staticmethod
    def from_word(word, n: int | None = None, metric_kind: str = DISCRETE) -> "OrbitSegment":
        arr = np.asarray(word, dtype=np.int64).reshape(-1)
        return OrbitSegment(metric=FiberMetric(metric_kind), n=len(arr) if n is None else n, word=arr)

    def point(self, i: int) -> PhasePoint:
        if not 0 <= i < self.n:
            raise IndexError("orbit index out of range")
        if self.on_words:
            return PhasePoint.word(self.word[i:])
        return PhasePoint.torus(self.points[i])

    def prefix(self, n: int) -> "OrbitSegment":
        """The same orbit truncated to its first n points."""
        if not 1 <= n <= self.n:
            raise ValueError("prefix length out of range")
        if n == self.n:
            return self
        if self.on_words:
            return OrbitSegment(self.metric, n, word=self.word)
        return OrbitSegment(self.metric, n, points=self.points[:n])


def _coerce_torus_start(x) -> np.ndarray:
    if isinstance(x, PhasePoint):
        if x.kind != TORUS:
            raise ValueError("torus family needs a torus point")
        return x.value
    arr = np.asarray(x, dtype=float).reshape(-1)
    if np.any(arr < 0.0) or np.any(arr >= 1.0):
        raise ValueError("torus coordinates must lie in [0, 1)")
    return arr


def _coerce_word_start(system: RandomSystemSpec, x) -> np.ndarray:
    arr = x.value if isinstance(x, PhasePoint) else np.asarray(x, dtype=np.int64).reshape(-1)
    if np.any(arr < 0) or np.any(arr >= system.space_alphabet):
        raise ValueError("word symbols outside the space alphabet")
    return np.asarray(arr, dtype=np.int64)


def orbit(system: RandomSystemSpec, path: OmegaPath, x, n: int) -> OrbitSegment:
    """Compute the n-point orbit of x along the path (horizon >= n - 1).

    The cocycle property holds exactly in floating point: point i + j of
    this orbit equals point j of the orbit of point i along the i-shifted
    path, because both are produced by the identical operation sequence.
    """
    if n < 1:
        raise ValueError("orbit length must be >= 1")
    if path.horizon < n - 1:
        raise ValueError(f"path horizon {path.horizon} < n - 1 = {n - 1}")
    if system.on_words:
        word = _coerce_word_start(system, x)
        if len(word) < n:
            raise ValueError("stored word shorter than requested orbit")
        return OrbitSegment(system.metric, n, word=word)
    start = _coerce_torus_start(x)
    pts = np.empty((n, start.size), dtype=float)
    pts[0] = start
    for i in range(1, n):
        pts[i] = apply_fiber_map(system, path.symbol(i - 1), pts[i - 1])
    return OrbitSegment(system.metric, n, points=pts)


def orbit_batch(system: RandomSystemSpec, path: OmegaPath, xs: np.ndarray, n: int) -> np.ndarray:
    """Orbits of many torus starts at once: (M, d) -> (M, n, d).

    Shift systems have no work to do here (orbit points are suffixes of the
    stored words), so this path is torus-only.
    """
    if system.on_words:
        raise ValueError("orbit_batch applies to torus families")
    if path.horizon < n - 1:
        raise ValueError(f"path horizon {path.horizon} < n - 1 = {n - 1}")
    xs = np.asarray(xs, dtype=float)
    if xs.ndim == 1:
        xs = xs[:, None]
    out = np.empty((xs.shape[0], n, xs.shape[1]), dtype=float)
    out[:, 0, :] = xs
    for i in range(1, n):
        out[:, i, :] = apply_fiber_map(system, path.symbol(i - 1), out[:, i - 1, :])
    return out


def expansion_product(system: RandomSystemSpec, path: OmegaPath, n: int) -> float:
    """Product of |T'| factors over the first n - 1 steps (torus families).

    Governs the length of time-n dynamical balls: for expanding maps the
    radius-eps ball is the interval of radius eps / product around the
    center whenever eps is below 1/(max factor + 1).
    """
    if system.on_words:
        raise ValueError("expansion_product applies to torus families")
    if n < 1:
        raise ValueError("n must be >= 1")
    if n == 1:
        return 1.0
    return float(np.prod(system.factor_along(path, n - 1), dtype=float))


def row_codes(labels: np.ndarray) -> np.ndarray:
    """Collapse (M, k) integer rows to one code per row, equal iff rows equal.

    Re-ranks through np.unique after every column, so intermediate codes
    stay below M and cannot overflow regardless of label magnitude or k.
    """
    labels = np.asarray(labels)
    if labels.ndim != 2 or labels.shape[1] < 1:
        raise ValueError("row_codes expects a nonempty 2-d label array")
    codes = labels[:, 0].astype(np.int64, copy=True)
    for i in range(1, labels.shape[1]):
        col = labels[:, i].astype(np.int64, copy=False)
        span = int(col.max()) + 1 if col.size else 1
        _, codes = np.unique(codes * span + col, return_inverse=True)
    return codes
