import math

import numpy as np
import pytest

from fkent.matching import BOWEN, FK
from fkent.spanning import (
    ENUMERATION,
    IID,
    SEPARATED,
    CandidateSet,
    CountEntry,
    CountTable,
    DynamicalDistance,
    EntropyEstimate,
    count_table,
    entropy_from_counts,
    fit_log_slope,
    greedy_separated,
    greedy_spanning,
    integrated_entropy,
    path_seeds,
    torus_grid_candidates,
    word_candidates,
)
from fkent.systems import (
    InvariantViolation,
    bernoulli_process,
    expanding_system,
    path_from_symbols,
    sample_path,
    shift_system,
)


def circle_candidates(k):
    pts = (np.arange(k) / float(k)).reshape(-1, 1)
    return CandidateSet(points=pts, on_words=False, provenance=IID, seed=0)


def test_separated_scan_circle_hand_value():
    # 10 equispaced points, eps = 0.15: the scan kills both 0.1-neighbors
    # of each keeper, leaving every other point
    system = expanding_system((2,))
    dist = DynamicalDistance(system, path_from_symbols([0]), 1, BOWEN)
    count, kept = greedy_separated(circle_candidates(10), dist, 0.15)
    assert count == 5
    assert np.allclose(circle_candidates(10).points[kept].ravel(), [0.0, 0.2, 0.4, 0.6, 0.8])


def test_separated_kill_is_closed():
    # 4 equispaced points, neighbor gap exactly 0.25: boundary pairs are
    # killed (closed rule), leaving the antipodal pair; just under the
    # gap everything survives
    system = expanding_system((2,))
    dist = DynamicalDistance(system, path_from_symbols([0]), 1, BOWEN)
    count, kept = greedy_separated(circle_candidates(4), dist, 0.25)
    assert count == 2
    assert np.allclose(circle_candidates(4).points[kept].ravel(), [0.0, 0.5])
    count, _ = greedy_separated(circle_candidates(4), dist, 0.24)
    assert count == 4


@pytest.mark.parametrize("n", [3, 4, 5])
def test_shift_separated_counts_grow_like_words(n):
    # eps = 0.4 resolves cylinder depth 2, so distinct (n+1)-prefixes separate
    system = shift_system((2, 2))
    path = sample_path(bernoulli_process((0.5, 0.5)), 10, 1)
    cand = word_candidates(system, path, n, 0.4)
    dist = DynamicalDistance(system, path, n, BOWEN)
    count, _ = greedy_separated(cand, dist, 0.4)
    assert count == 2 ** (n + 1)
    assert cand.provenance == ENUMERATION


def test_spanning_separated_chain():
    system = expanding_system((2,))
    path = path_from_symbols([0] * 8)
    cand = torus_grid_candidates(system, path, 6, 0.1, count_target=400)
    dist = DynamicalDistance(system, path, 6, BOWEN)
    span, _ = greedy_spanning(cand, dist, 0.1)
    sep, _ = greedy_separated(cand, dist, 0.1)
    span_half, _ = greedy_spanning(cand, dist, 0.05)
    assert span <= sep <= span_half


def test_grid_candidates_fields():
    system = expanding_system((2,))
    path = path_from_symbols([0] * 10)
    cand = torus_grid_candidates(system, path, 8, 0.1, count_target=300)
    assert cand.count >= 300
    assert 0.0 < cand.window <= 1.0
    assert cand.mesh > 0.0
    assert (cand.points >= 0.0).all() and (cand.points < 1.0).all()


def test_candidate_set_validation():
    with pytest.raises(ValueError):
        CandidateSet(points=np.empty((0, 1)), on_words=False, provenance=IID)
    with pytest.raises(ValueError):
        CandidateSet(points=np.zeros((3, 1)), on_words=False, provenance="magic")


def test_fit_log_slope_recovers_line():
    ns = [4, 6, 8, 10]
    slope_true, intercept_true = 0.7, -1.3
    ys = [intercept_true + slope_true * n for n in ns]
    slope, intercept, rms = fit_log_slope(ns, ys)
    assert slope == pytest.approx(slope_true, abs=1e-12)
    assert intercept == pytest.approx(intercept_true, abs=1e-12)
    assert rms == pytest.approx(0.0, abs=1e-12)


def test_entropy_estimate_invariants():
    est = EntropyEstimate(
        value=0.5,
        metric=BOWEN,
        estimator=SEPARATED,
        n_window=(4, 6),
        eps_list=(0.1, 0.2),
        slopes=(0.5, 0.6),
        residuals=(0.0, 0.0),
    )
    assert est.slope_spread == pytest.approx(0.1)
    with pytest.raises(InvariantViolation):
        EntropyEstimate(
            value=0.6,
            metric=BOWEN,
            estimator=SEPARATED,
            n_window=(4, 6),
            eps_list=(0.1,),
            slopes=(0.5,),
            residuals=(0.0,),
        )


def test_count_table_metric_inequality_and_lookup():
    system = expanding_system((2,))
    path = sample_path(bernoulli_process((1.0,)), 10, 2)
    table = count_table(system, path, [4, 6, 8], [0.2, 0.1], count_target=300)
    for n in (4, 6, 8):
        for eps in (0.2, 0.1):
            bowen = table.lookup(n, eps, BOWEN)
            fk = table.lookup(n, eps, FK)
            assert bowen is not None and fk is not None
            assert fk.count <= bowen.count
            assert bowen.candidates >= bowen.count >= 1
    assert table.lookup(5, 0.2, BOWEN) is None
    table.validate()


def test_count_table_doubling_slope_near_log2():
    system = expanding_system((2,))
    path = sample_path(bernoulli_process((1.0,)), 12, 3)
    table = count_table(system, path, [6, 8, 10], [0.1], metrics=(BOWEN,), count_target=500)
    est = entropy_from_counts(table, BOWEN)
    assert est.value == pytest.approx(math.log(2.0), abs=0.1)
    assert est.estimator == SEPARATED


def test_entropy_from_counts_needs_three_points():
    entries = tuple(
        CountEntry(n=n, eps=0.1, metric=BOWEN, estimator=SEPARATED, count=2**n, window=1.0, candidates=1000)
        for n in (4, 6)
    )
    with pytest.raises(ValueError):
        entropy_from_counts(CountTable(entries=entries))


def test_path_seeds_deterministic_and_distinct():
    a = path_seeds(9, 6)
    b = path_seeds(9, 6)
    assert a == b
    assert len(set(a)) == 6
    assert path_seeds(10, 6) != a


def test_integrated_entropy_reduces_per_path():
    system = expanding_system((2, 3))
    proc = bernoulli_process((0.5, 0.5))
    est = integrated_entropy(system, proc, [4, 5, 6], [0.2], num_paths=3, master_seed=5, count_target=200)
    assert est.value == pytest.approx(float(np.mean(est.per_path)), abs=1e-12)
    assert len(est.per_path) == len(est.seeds) == 3
    assert est.stderr >= 0.0
