import numpy as np
import pytest

from fkent.systems import (
    CYLINDER,
    DISCRETE,
    TORUS,
    DrivingProcess,
    FiberMetric,
    InvariantViolation,
    OmegaPath,
    OrbitSegment,
    PhasePoint,
    bernoulli_process,
    child_rng,
    circle_gap,
    cylinder_depth,
    expanding_system,
    expansion_product,
    markov_process,
    orbit,
    orbit_batch,
    path_from_symbols,
    row_codes,
    sample_path,
    shift_system,
    tent_system,
    wrap_unit,
)


def test_wrap_unit_half_open():
    vals = wrap_unit(np.array([-0.25, 0.0, 0.5, 1.0, 1.75]))
    assert np.allclose(vals, [0.75, 0.0, 0.5, 0.0, 0.75])
    assert (vals < 1.0).all() and (vals >= 0.0).all()


@pytest.mark.parametrize(
    "u, v, gap",
    [
        (0.0, 0.0, 0.0),
        (0.1, 0.9, 0.2),
        (0.25, 0.75, 0.5),
        (0.9, 0.1, 0.2),
    ],
)
def test_circle_gap(u, v, gap):
    got = circle_gap(np.array(u), np.array(v))
    assert got == pytest.approx(gap)
    assert got <= 0.5 + 1e-15


@pytest.mark.parametrize(
    "eps, depth",
    [(0.6, 1), (0.5, 2), (0.25, 3), (0.24, 3), (0.124, 4)],
)
def test_cylinder_depth(eps, depth):
    # smallest k with 2^-k < eps decides cylinder closeness
    assert cylinder_depth(eps) == depth


# hand-computed orbits: doubling, mixed (2,3) factors, full tent
@pytest.mark.parametrize(
    "factors, symbols, x, family, expected",
    [
        ((2,), [0, 0, 0], 0.1, "expanding", [0.1, 0.2, 0.4, 0.8]),
        ((2, 3), [0, 1, 0], 0.3, "expanding", [0.3, 0.6, 0.8, 0.6]),
        ((2,), [0, 0, 0], 0.3, "tent", [0.3, 0.6, 0.8, 0.4]),
    ],
)
def test_orbit_hand_values(factors, symbols, x, family, expected):
    build = expanding_system if family == "expanding" else tent_system
    system = build(factors)
    path = path_from_symbols(symbols)
    seg = orbit(system, path, x, len(expected))
    assert np.allclose(seg.points.ravel(), expected)
    assert seg.n == len(expected)


def test_orbit_batch_matches_orbit():
    system = expanding_system((2, 3))
    path = path_from_symbols([0, 1, 1, 0, 1, 0, 0])
    rng = np.random.default_rng(5)
    xs = rng.random((40, 1))
    stack = orbit_batch(system, path, xs, 6)
    assert stack.shape == (40, 6, 1)
    for i in (0, 7, 39):
        seg = orbit(system, path, xs[i], 6)
        assert np.allclose(stack[i], seg.points)


def test_shift_orbit_keeps_full_word():
    system = shift_system((2, 2))
    path = path_from_symbols([0, 1, 0, 1])
    seg = orbit(system, path, [1, 0, 1, 1, 0], 3)
    assert seg.on_words
    assert seg.n == 3
    assert list(seg.word) == [1, 0, 1, 1, 0]


def test_orbit_segment_prefix():
    seg = OrbitSegment(FiberMetric(TORUS), 4, points=np.arange(4.0).reshape(4, 1) / 4)
    assert seg.prefix(4) is seg
    short = seg.prefix(2)
    assert short.n == 2 and short.points.shape == (2, 1)
    word = OrbitSegment(FiberMetric(DISCRETE), 4, word=np.array([0, 1, 1, 0]))
    assert word.prefix(2).n == 2
    assert list(word.prefix(2).word) == [0, 1, 1, 0]  # word storage is not cut
    with pytest.raises(ValueError):
        seg.prefix(5)


def test_expansion_product_is_factor_product():
    system = expanding_system((2, 3))
    path = path_from_symbols([0, 1, 0])
    assert expansion_product(system, path, 3) == pytest.approx(6.0)


def test_phase_point_validation():
    p = PhasePoint.torus([0.25])
    assert p.value.shape == (1,)
    with pytest.raises(ValueError):
        PhasePoint.torus([1.5])
    w = PhasePoint.word([0, 1, 1])
    assert w.value.dtype == np.int64
    with pytest.raises(ValueError):
        PhasePoint.word([-1, 0])


def test_omega_path_window_and_shift():
    path = path_from_symbols([3, 1, 4, 1, 5])
    assert path.horizon == 5
    assert list(path.window(3)) == [3, 1, 4]
    shifted = path.shifted(2)
    assert shifted.horizon == 3
    assert list(shifted.window(3)) == [4, 1, 5]
    assert shifted.symbol(0) == 4
    with pytest.raises(ValueError):
        path.window(6)


def test_bernoulli_stationary_is_p():
    proc = bernoulli_process((0.25, 0.75))
    assert np.allclose(proc.stationary(), [0.25, 0.75])


def test_markov_stationary_hand_value():
    # rows [[.9,.1],[.2,.8]]: pi = (2/3, 1/3) solves pi P = pi
    proc = markov_process([[0.9, 0.1], [0.2, 0.8]])
    pi = proc.stationary()
    assert np.allclose(pi, [2.0 / 3.0, 1.0 / 3.0])
    assert np.allclose(pi @ np.array([[0.9, 0.1], [0.2, 0.8]]), pi)


def test_driving_process_rejects_bad_rows():
    with pytest.raises(ValueError):
        markov_process([[0.5, 0.2], [0.3, 0.7]])  # rows must sum to 1
    with pytest.raises(ValueError):
        bernoulli_process((0.4, 0.4))


def test_sample_path_deterministic_and_law_dependent():
    proc = bernoulli_process((0.5, 0.5))
    a = sample_path(proc, 12, 3)
    b = sample_path(proc, 12, 3)
    c = sample_path(proc, 12, 4)
    assert list(a.symbols) == list(b.symbols)
    assert list(a.symbols) != list(c.symbols)
    assert a.horizon == 12
    skew = sample_path(bernoulli_process((0.95, 0.05)), 400, 0)
    assert skew.symbols.mean() < 0.2  # heavy letter dominates


def test_sample_path_markov_respects_support():
    # letter 1 can never follow letter 1
    proc = markov_process([[0.5, 0.5], [1.0, 0.0]])
    path = sample_path(proc, 300, 9)
    pairs = list(zip(path.symbols[:-1], path.symbols[1:]))
    assert (1, 1) not in pairs


def test_child_rng_streams_are_independent():
    a = child_rng(7, 0).random(4)
    b = child_rng(7, 0).random(4)
    c = child_rng(7, 1).random(4)
    assert np.allclose(a, b)
    assert not np.allclose(a, c)


def test_row_codes_collapse_equal_rows_only():
    rng = np.random.default_rng(11)
    labels = rng.integers(0, 3, size=(60, 5))
    labels[10] = labels[3]
    labels[42] = labels[3]
    codes = row_codes(labels)
    assert codes.shape == (60,)
    assert codes[10] == codes[3] == codes[42]
    same = codes[:, None] == codes[None, :]
    truth = (labels[:, None, :] == labels[None, :, :]).all(axis=2)
    assert (same == truth).all()


def test_system_validation_errors():
    # factor 1 is legal (identity fiber); zero is not
    with pytest.raises(ValueError):
        expanding_system(())
    with pytest.raises(ValueError):
        expanding_system((0,))
    with pytest.raises(ValueError):
        tent_system((2, 0))
    assert expanding_system((1, 2)).factors == (1, 2)


def test_invariant_violation_is_assertion():
    assert issubclass(InvariantViolation, AssertionError)
