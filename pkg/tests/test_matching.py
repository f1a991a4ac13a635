import numpy as np
import pytest

from fkent.matching import (
    BOWEN,
    FK,
    bowen_ball_batch,
    bowen_distance,
    brute_force_match,
    brute_force_match_matrix,
    compat_matrix,
    fk_ball_batch,
    fk_distance,
    in_fk_ball,
    lcs_mismatch,
    match_target,
    max_match_from_matrix,
    max_match_size,
    mismatch_fraction,
)
from fkent.systems import CYLINDER, DISCRETE, TORUS, FiberMetric, OrbitSegment


def torus_segment(points):
    pts = np.asarray(points, dtype=float).reshape(-1, 1)
    return OrbitSegment(FiberMetric(TORUS), pts.shape[0], points=pts)


def word_segment(symbols, n=None, kind=DISCRETE):
    w = np.asarray(symbols, dtype=np.int64)
    return OrbitSegment(FiberMetric(kind), n if n is not None else w.size, word=w)


@pytest.mark.parametrize(
    "n, delta, target",
    [
        (5, 0.2, 5),       # n*(1-delta) = 4 exactly, strict > pushes to 5
        (5, 0.2000001, 4),
        (10, 0.1, 10),     # slack band 0
        (12, 0.1, 11),     # slack band 1
        (4, 0.5, 3),
        (1, 0.9, 1),
    ],
)
def test_match_target(n, delta, target):
    assert match_target(n, delta) == target


def test_fk_distance_hand_values():
    a = word_segment([0, 1])
    b = word_segment([1, 0])
    res = fk_distance(a, b)
    assert res.value == pytest.approx(0.5, abs=1e-12)
    assert bowen_distance(a, b) == 1.0
    # one swap out of two symbols: best match keeps one pair
    assert mismatch_fraction(a, b, 0.5) == pytest.approx(0.5)


def test_fk_distance_cylinder_hand_value():
    a = word_segment([0, 1, 1], n=2, kind=CYLINDER)
    b = word_segment([1, 1, 0], n=2, kind=CYLINDER)
    assert fk_distance(a, b).value == pytest.approx(0.5, abs=1e-12)
    assert bowen_distance(a, b) == 1.0


def test_fk_self_distance_is_tol_small():
    seg = torus_segment([0.1, 0.2, 0.4])
    assert fk_distance(seg, seg, tol=1e-9).value <= 2e-9


@pytest.mark.parametrize(
    "u, v, expected",
    [
        ([0, 1, 2], [2, 1, 0], 2.0 / 3.0),
        ([0, 1, 2], [0, 1, 2], 0.0),
        ([0, 0], [1, 1], 1.0),
        ([0, 1, 0, 1], [1, 0, 1, 0], 0.25),
    ],
)
def test_lcs_mismatch_hand_values(u, v, expected):
    assert lcs_mismatch(u, v) == pytest.approx(expected, abs=1e-12)


def test_lcs_mismatch_rejects_unequal_lengths():
    with pytest.raises(ValueError):
        lcs_mismatch([0, 1], [0, 1, 2])


def test_match_dp_equals_brute_force_on_matrices():
    rng = np.random.default_rng(101)
    for _ in range(300):
        n = int(rng.integers(1, 9))
        compat = rng.random((n, n)) < rng.uniform(0.1, 0.9)
        assert max_match_from_matrix(compat).k == brute_force_match_matrix(compat)


def test_match_dp_equals_brute_force_on_orbit_pairs():
    rng = np.random.default_rng(102)
    for _ in range(200):
        n = int(rng.integers(2, 9))
        a = torus_segment(rng.random(n))
        b = torus_segment(rng.random(n))
        eps = float(rng.uniform(0.05, 0.6))
        assert max_match_size(a, b, eps).k == brute_force_match(a, b, eps)


def test_targeted_search_decision_is_exact():
    rng = np.random.default_rng(103)
    for _ in range(200):
        n = int(rng.integers(2, 9))
        a = torus_segment(rng.random(n))
        b = torus_segment(rng.random(n))
        eps = float(rng.uniform(0.05, 0.6))
        truth = brute_force_match(a, b, eps)
        for target in (1, n // 2 + 1, n):
            res = max_match_size(a, b, eps, target=target)
            assert res.reached == (truth >= target)


def test_fk_never_exceeds_bowen():
    # bisection reports an upper bound within tol of the true value
    rng = np.random.default_rng(104)
    for _ in range(200):
        n = int(rng.integers(2, 12))
        a = torus_segment(rng.random(n))
        b = torus_segment(rng.random(n))
        assert fk_distance(a, b, tol=1e-9).value <= bowen_distance(a, b) + 2e-9


def test_fk_symmetry_is_exact():
    rng = np.random.default_rng(105)
    for _ in range(200):
        n = int(rng.integers(2, 10))
        a = torus_segment(rng.random(n))
        b = torus_segment(rng.random(n))
        assert fk_distance(a, b, tol=1e-9).value == fk_distance(b, a, tol=1e-9).value


def test_fk_triangle_with_bisection_slack():
    rng = np.random.default_rng(106)
    tol = 1e-9
    for _ in range(300):
        n = int(rng.integers(2, 9))
        segs = [torus_segment(rng.random(n)) for _ in range(3)]
        ab = fk_distance(segs[0], segs[1], tol=tol).value
        bc = fk_distance(segs[1], segs[2], tol=tol).value
        ac = fk_distance(segs[0], segs[2], tol=tol).value
        assert ac <= ab + bc + 2 * tol


def test_lcs_triangle_exact_integer_form():
    rng = np.random.default_rng(107)
    for _ in range(500):
        n = int(rng.integers(2, 14))
        u, v, w = rng.integers(0, 3, size=(3, n))
        # 1 - k/n triangle is equivalent to k_uw >= k_uv + k_vw - n
        k_uv = round(n * (1.0 - lcs_mismatch(u, v)))
        k_vw = round(n * (1.0 - lcs_mismatch(v, w)))
        k_uw = round(n * (1.0 - lcs_mismatch(u, w)))
        assert k_uw >= k_uv + k_vw - n


def test_compat_matrix_is_strict():
    a = torus_segment([0.0, 0.5])
    b = torus_segment([0.2, 0.3])
    # pair gaps are [[0.2, 0.3], [0.3, 0.2]]; boundary pairs stay out
    assert compat_matrix(a, b, 0.2).tolist() == [[False, False], [False, False]]
    assert compat_matrix(a, b, 0.25).tolist() == [[True, False], [False, True]]


def test_bowen_ball_batch_matches_pairwise():
    rng = np.random.default_rng(108)
    n = 6
    center = torus_segment(rng.random(n))
    others = rng.random((64, n, 1))
    for delta in (0.1, 0.3):
        members = bowen_ball_batch(center, others, delta)
        for i in range(others.shape[0]):
            other = OrbitSegment(FiberMetric(TORUS), n, points=others[i])
            assert members[i] == (bowen_distance(center, other) < delta)


def test_fk_ball_batch_matches_single_test():
    rng = np.random.default_rng(109)
    n = 9
    center = torus_segment(rng.random(n))
    others = rng.random((128, n, 1))
    for delta in (0.12, 0.34):
        members = fk_ball_batch(center, others, delta)
        for i in range(others.shape[0]):
            other = OrbitSegment(FiberMetric(TORUS), n, points=others[i])
            assert members[i] == in_fk_ball(center, other, delta)


def test_fk_ball_contains_bowen_ball():
    rng = np.random.default_rng(110)
    for n, delta in [(8, 0.1), (12, 0.1), (10, 0.25)]:
        center = torus_segment(rng.random(n))
        others = rng.random((256, n, 1))
        bowen = bowen_ball_batch(center, others, delta)
        fk = fk_ball_batch(center, others, delta)
        assert (fk | ~bowen).all()


def test_fk_ball_equals_bowen_ball_at_zero_slack():
    # match target n forces the identity matching
    rng = np.random.default_rng(111)
    n, delta = 8, 0.1
    assert match_target(n, delta) == n
    center = torus_segment(rng.random(n))
    others = rng.random((512, n, 1))
    assert (fk_ball_batch(center, others, delta) == bowen_ball_batch(center, others, delta)).all()


def test_closed_ball_includes_boundary():
    center = torus_segment([0.0, 0.0])
    others = np.array([[[0.2], [0.1]]])
    assert not bowen_ball_batch(center, others, 0.2)[0]
    assert bowen_ball_batch(center, others, 0.2, closed=True)[0]


def test_word_ball_batch_prefix_semantics():
    center = word_segment([0, 1, 0, 1], n=3, kind=CYLINDER)
    others = np.array(
        [
            [0, 1, 0, 1],  # identical
            [0, 1, 0, 0],  # differs at the depth-filling tail
            [1, 1, 0, 1],  # differs at step 0
        ],
        dtype=np.int64,
    )
    # eps = 0.4: cylinder depth 2, so membership needs agreement on
    # symbols 0..n for every shifted window
    members = bowen_ball_batch(center, others, 0.4)
    assert members.tolist() == [True, False, False]


def test_mismatch_fraction_monotone_in_eps():
    rng = np.random.default_rng(112)
    for _ in range(50):
        n = int(rng.integers(2, 10))
        a = torus_segment(rng.random(n))
        b = torus_segment(rng.random(n))
        defects = [mismatch_fraction(a, b, e) for e in (0.05, 0.1, 0.2, 0.4)]
        assert all(x >= y - 1e-12 for x, y in zip(defects, defects[1:]))


def test_segment_validation():
    with pytest.raises(ValueError):
        max_match_size(torus_segment([0.1, 0.2]), torus_segment([0.1, 0.2, 0.3]), 0.1)
    with pytest.raises(ValueError):
        max_match_size(torus_segment([0.1]), word_segment([0]), 0.1)
