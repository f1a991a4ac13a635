"""Closed-form oracles the estimators are validated against.

Nothing here touches the match DP or the greedy nets: branch counts come
from products of per-step factors, match-count bounds from binomial
coefficients, and entropy rates from the law of the driving process.  Tests
freeze these values and require the numerical estimators to reproduce them.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
import math

import numpy as np

from .systems import (
    EXPANDING,
    FULL_SHIFT,
    TENT,
    DrivingProcess,
    OmegaPath,
    RandomSystemSpec,
)

__all__ = [
    "OracleValue",
    "branch_count",
    "word_count",
    "match_count_bound",
    "log_match_count_bound",
    "enumerated_match_count",
    "stirling_rate",
    "log_binomial",
    "binomial_rate",
    "mismatch_entropy_budget",
    "pick_mismatch_fraction",
    "expected_entropy",
    "exhaustive_partial_cover",
]


@dataclass(frozen=True)
class OracleValue:
    """An exactly derived reference value plus its derivation tag."""

    value: float
    derivation: str

    def __post_init__(self) -> None:
        if not self.derivation:
            raise ValueError("derivation tag required")
        if not math.isfinite(self.value):
            raise ValueError("oracle value must be finite")


def branch_count(system: RandomSystemSpec, path: OmegaPath, n: int) -> int:
    """Number of full monotone branches of the n-step composed map.

    Exact for expanding and tent families with all factors >= 2: each step
    multiplies the branch count by its factor, so the result is the product
    of the first n factors along the path.
    """
    if system.family not in (EXPANDING, TENT):
        raise ValueError("branch_count needs a piecewise-linear torus family")
    if any(f < 2 for f in system.factors):
        raise ValueError("branch_count needs expanding factors >= 2")
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return 1
    factors = system.factor_along(path, n)
    out = 1
    for f in factors:
        out *= int(f)
    return out


def word_count(system: RandomSystemSpec, path: OmegaPath, n: int) -> int:
    """Distinct positive-probability length-n itineraries of a full shift."""
    if system.family != FULL_SHIFT:
        raise ValueError("word_count applies to shift systems")
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return 1
    factors = system.factor_along(path, n)
    out = 1
    for f in factors:
        out *= int(f)
    return out


def match_count_bound(n: int, k: int) -> int:
    """Number of order-preserving partial bijections of size k: C(n, k)^2.

    Exact arbitrary-precision integer; use log_match_count_bound for rate
    computations at large n.
    """
    if not 0 <= k <= n:
        raise ValueError("need 0 <= k <= n")
    return math.comb(n, k) ** 2


def log_match_count_bound(n: int, k: int) -> float:
    """log of match_count_bound via lgamma, safe for n ~ 10^4 and beyond."""
    return 2.0 * log_binomial(n, k)


def enumerated_match_count(n: int, k: int) -> int:
    """Brute enumeration of the size-k matches; independent check, n <= 10.

    A size-k order-preserving partial bijection is determined by its domain
    and range subsets, so counting subset pairs is the enumeration.
    """
    if n > 10:
        raise ValueError("enumeration capped at n = 10")
    if not 0 <= k <= n:
        raise ValueError("need 0 <= k <= n")
    count = 0
    for _dom in combinations(range(n), k):
        for _rng in combinations(range(n), k):
            count += 1
    return count


def log_binomial(n: int, k: int) -> float:
    if not 0 <= k <= n:
        raise ValueError("need 0 <= k <= n")
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def binomial_rate(n: int, eps: float) -> float:
    """(1/n) log C(n, floor(n*eps)); converges to stirling_rate(eps)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return log_binomial(n, int(math.floor(n * eps))) / n


def stirling_rate(eps: float) -> float:
    """Exponential growth rate of C(n, n*eps): the binary entropy of eps in nats.

    -(1 - eps) log(1 - eps) - eps log(eps), with the 0 log 0 = 0 convention
    at the endpoints.
    """
    if not 0.0 <= eps <= 1.0:
        raise ValueError("eps must lie in [0, 1]")
    if eps in (0.0, 1.0):
        return 0.0
    return -(1.0 - eps) * math.log(1.0 - eps) - eps * math.log(eps)


def mismatch_entropy_budget(kappa: float, cells: int) -> float:
    """Entropy overhead of tolerating a kappa fraction of mismatched steps.

    2*kappa*log(cells) - 4*kappa*log(kappa) - 4*(1-kappa)*log(1-kappa) in
    nats, for a partition with `cells` elements; tends to 0 as kappa -> 0.
    """
    if cells < 1:
        raise ValueError("cells must be >= 1")
    if not 0.0 <= kappa < 1.0:
        raise ValueError("kappa must lie in [0, 1)")
    if kappa == 0.0:
        return 0.0
    return (
        2.0 * kappa * math.log(cells)
        - 4.0 * kappa * math.log(kappa)
        - 4.0 * (1.0 - kappa) * math.log(1.0 - kappa)
    )


def pick_mismatch_fraction(eps: float, cells: int, ratio: float = 0.5, floor: float = 1e-12) -> float:
    """Largest kappa on the geometric grid {ratio^j} with budget < eps/2."""
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must lie in (0, 1)")
    kappa = ratio
    while kappa >= floor:
        if mismatch_entropy_budget(kappa, cells) < eps / 2.0:
            return kappa
        kappa *= ratio
    raise ValueError("no kappa above the floor satisfies the budget")


def expected_entropy(system: RandomSystemSpec, process: DrivingProcess) -> OracleValue:
    """Exact fiber entropy of a built-in system under its driving law.

    Sum over letters of (stationary weight) * log(factor): branch growth for
    expanding/tent families, word growth for full shifts.
    """
    weights = process.stationary()
    if len(weights) != len(system.factors):
        raise ValueError("driving alphabet does not match system factors")
    if system.family in (EXPANDING, TENT):
        if any(f < 2 for f in system.factors):
            raise ValueError("entropy oracle needs expanding factors >= 2")
        tag = "branch-count"
    else:
        tag = "word-count"
    value = float(np.dot(weights, np.log(np.asarray(system.factors, dtype=float))))
    return OracleValue(value=value, derivation=tag)


def exhaustive_partial_cover(membership, weights=None, mass_threshold: float = 0.95) -> int:
    """Minimum sets reaching the mass threshold, by brute subset enumeration.

    Independent of any search heuristic: tries all subsets in increasing
    size, so it is the ground truth for small instances (at most 20 sets).
    """
    cover = np.asarray(membership, dtype=bool)
    if cover.ndim != 2 or cover.shape[0] < 1:
        raise ValueError("membership must be a nonempty (S, U) bool array")
    if cover.shape[0] > 20:
        raise ValueError("exhaustive cover is capped at 20 sets")
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
    if float(w[cover.any(axis=0)].sum()) + 1e-12 < need:
        raise ValueError("the union of the given sets cannot reach the mass threshold")
    for size in range(1, S + 1):
        for combo in combinations(range(S), size):
            got = float(w[cover[list(combo)].any(axis=0)].sum())
            if got >= need:
                return size
    raise AssertionError("unreachable: full union reaches the threshold")
