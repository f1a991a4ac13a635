import math

import numpy as np
import pytest

from fkent.katok import (
    KATOK,
    KatokCount,
    katok_entropy,
    katok_spanning_count,
    katok_table,
    min_cover_exact,
    table_slopes,
    validate_katok_counts,
)
from fkent.local import sample_measure
from fkent.matching import BOWEN, FK, bowen_ball_batch, match_target
from fkent.oracles import exhaustive_partial_cover
from fkent.systems import (
    InvariantViolation,
    OrbitSegment,
    ResourceCapExceeded,
    bernoulli_process,
    expanding_system,
    sample_path,
    shift_system,
)


def doubling_measure(M=3000, horizon=10, seed=2):
    system = expanding_system((2,))
    path = sample_path(bernoulli_process((1.0,)), horizon, seed)
    return system, path, sample_measure(system, path, M, seed)


def test_count_matches_interval_heuristic():
    # time-4 balls are intervals of length 0.1 * 2^-2 = 0.025, so covering
    # 90% of the circle takes about 36 of them
    system, path, mu = doubling_measure()
    cell = katok_spanning_count(mu, path, system, 4, 0.1, 0.9, BOWEN)
    assert 33 <= cell.count <= 40
    assert cell.covered_mass >= 0.9
    assert cell.count == len(cell.centers)


def test_count_scales_with_threshold():
    system, path, mu = doubling_measure()
    half = katok_spanning_count(mu, path, system, 4, 0.1, 0.5, BOWEN)
    most = katok_spanning_count(mu, path, system, 4, 0.1, 0.9, BOWEN)
    assert half.count < most.count
    assert half.covered_mass >= 0.5


def test_count_trivial_above_diameter():
    system, path, mu = doubling_measure(M=64)
    cell = katok_spanning_count(mu, path, system, 3, 0.8, 0.9, BOWEN)
    assert cell.count == 1
    assert cell.covered_mass == 1.0


def test_pair_budget_gates_dense_path():
    system, path, mu = doubling_measure(M=200)
    with pytest.raises(ResourceCapExceeded):
        katok_spanning_count(mu, path, system, 4, 0.1, 0.9, BOWEN, pair_budget=100)


def test_word_fast_path_equals_dense_greedy():
    # prefix classes are disjoint, so heaviest-first is the exact optimum
    # and must agree with the literal gain-greedy on the membership matrix
    system = shift_system((2, 2))
    path = sample_path(bernoulli_process((0.5, 0.5)), 9, 3)
    mu = sample_measure(system, path, 500, 3)
    n, eps, threshold = 4, 0.3, 0.85
    cell = katok_spanning_count(mu, path, system, n, eps, threshold, BOWEN)

    M = mu.M
    cover = np.empty((M, M), dtype=bool)
    for i in range(M):
        center = OrbitSegment(system.metric, n, word=mu.samples[i])
        cover[i] = bowen_ball_batch(center, mu.samples, eps)
        cover[i, i] = True
    need = max(1, math.ceil(threshold * M - 1e-9))
    gains = cover.sum(axis=1).astype(np.int64)
    uncovered = np.ones(M, dtype=bool)
    chosen = []
    while M - int(uncovered.sum()) < need:
        c = int(np.argmax(gains))
        newly = uncovered & cover[c]
        chosen.append(c)
        uncovered &= ~cover[c]
        gains -= cover[:, newly].sum(axis=1)
    assert cell.count == len(chosen)
    assert list(cell.centers) == chosen
    # the greedy count respects the 1 + ln(M) factor over the exact optimum
    exact = min_cover_exact(cover[np.asarray(chosen)], mass_threshold=threshold)
    assert cell.count <= (1.0 + math.log(M)) * exact


def test_fk_band_zero_equals_bowen_counts():
    system, path, mu = doubling_measure()
    for n in (4, 6, 8):
        assert match_target(n, 0.1) == n
        b = katok_spanning_count(mu, path, system, n, 0.1, 0.9, BOWEN)
        f = katok_spanning_count(mu, path, system, n, 0.1, 0.9, FK)
        assert b.count == f.count


def test_fk_needs_fewer_covers_at_coarse_eps():
    # slack band 2 at n=10, eps=0.25: FK balls are much fatter
    system, path, mu = doubling_measure(M=2000, horizon=12)
    b = katok_spanning_count(mu, path, system, 10, 0.25, 0.75, BOWEN)
    f = katok_spanning_count(mu, path, system, 10, 0.25, 0.75, FK)
    assert f.count < b.count


def test_katok_table_and_entropy_doubling():
    system = expanding_system((2,))
    proc = bernoulli_process((1.0,))
    est = katok_entropy(system, proc, [4, 6, 8], [0.1], 3000, BOWEN, master_seed=2)
    assert est.value == pytest.approx(math.log(2.0), abs=0.1)
    assert est.estimator == KATOK
    est_fk = katok_entropy(system, proc, [4, 6, 8], [0.1], 3000, FK, master_seed=2)
    assert est_fk.value == est.value  # every cell is band 0


def test_table_slopes_order():
    system, path, mu = doubling_measure()
    cells = katok_table(mu, path, system, [4, 6, 8], [0.2, 0.1], BOWEN)
    fits = table_slopes(cells, [4, 6, 8], [0.2, 0.1])
    assert len(fits) == 2
    for slope, rms in fits:
        assert slope == pytest.approx(math.log(2.0), abs=0.15)
        assert rms < 0.2


def test_validate_accepts_real_table_and_rejects_doctored():
    system, path, mu = doubling_measure()
    cells = katok_table(mu, path, system, [4, 6], [0.2, 0.1], BOWEN)
    validate_katok_counts(cells, BOWEN)

    def fake(n, eps, count):
        return KatokCount(
            n=n,
            eps=eps,
            mass_threshold=1 - eps,
            kind=BOWEN,
            count=count,
            covered_mass=1.0,
            centers=np.arange(count),
        )

    # counts must not fall as n grows (beyond greedy jitter of one)
    bad_n = {(0.1, 4): fake(4, 0.1, 40), (0.1, 6): fake(6, 0.1, 10)}
    with pytest.raises(InvariantViolation):
        validate_katok_counts(bad_n, BOWEN)
    # counts must not grow as eps grows
    bad_eps = {(0.1, 4): fake(4, 0.1, 10), (0.2, 4): fake(4, 0.2, 40)}
    with pytest.raises(InvariantViolation):
        validate_katok_counts(bad_eps, BOWEN)


def test_validate_fk_skips_band_jump_steps():
    # slack jumps between n=8 (band 0) and n=12 (band 1) at eps=0.1, so a
    # dip there is legal for FK but the equal-band step 12 -> 14 is not
    def fake(n, count):
        return KatokCount(
            n=n,
            eps=0.1,
            mass_threshold=0.9,
            kind=FK,
            count=count,
            covered_mass=1.0,
            centers=np.arange(count),
        )

    dip_at_jump = {(0.1, 8): fake(8, 100), (0.1, 12): fake(12, 30), (0.1, 14): fake(14, 50)}
    validate_katok_counts(dip_at_jump, FK)
    bands = {n: n - match_target(n, 0.1) for n in (8, 12, 14)}
    assert bands == {8: 0, 12: 1, 14: 1}
    dip_in_band = {(0.1, 8): fake(8, 100), (0.1, 12): fake(12, 30), (0.1, 14): fake(14, 10)}
    with pytest.raises(InvariantViolation):
        validate_katok_counts(dip_in_band, FK)


def test_katok_count_validation():
    with pytest.raises(InvariantViolation):
        KatokCount(n=4, eps=0.1, mass_threshold=0.9, kind=BOWEN, count=3, covered_mass=0.5, centers=np.arange(3))
    with pytest.raises(InvariantViolation):
        KatokCount(n=4, eps=0.1, mass_threshold=0.9, kind=BOWEN, count=2, covered_mass=0.95, centers=np.arange(3))


def test_min_cover_exact_matches_exhaustive():
    rng = np.random.default_rng(31)
    for trial in range(40):
        sets = int(rng.integers(2, 10))
        points = int(rng.integers(4, 18))
        membership = rng.random((sets, points)) < rng.uniform(0.25, 0.7)
        if not membership.any(axis=0).all():
            membership[0] = True
        threshold = float(rng.uniform(0.4, 0.95))
        weights = rng.random(points)
        weights /= weights.sum()
        got = min_cover_exact(membership, weights, mass_threshold=threshold)
        want = exhaustive_partial_cover(membership, weights, mass_threshold=threshold)
        assert got == want, f"instance {trial}"


def test_min_cover_exact_node_cap():
    rng = np.random.default_rng(32)
    membership = rng.random((14, 40)) < 0.3
    membership[:, ~membership.any(axis=0)] = True
    assert min_cover_exact(membership, mass_threshold=0.999) == 6
    with pytest.raises(ResourceCapExceeded):
        min_cover_exact(membership, mass_threshold=0.999, node_cap=3)


def test_min_cover_exact_infeasible():
    membership = np.array([[True, False, False]])
    with pytest.raises(ValueError):
        min_cover_exact(membership, mass_threshold=0.9)


def test_katok_entropy_validation():
    system = expanding_system((2,))
    proc = bernoulli_process((1.0,))
    with pytest.raises(ValueError):
        katok_entropy(system, proc, [4], [0.1], 100, BOWEN)
    with pytest.raises(ValueError):
        katok_entropy(system, proc, [4, 6], [], 100, BOWEN)
    with pytest.raises(ValueError):
        katok_entropy(system, proc, [4, 6], [0.1], 100, BOWEN, mass_threshold=1.5)
