import math

import numpy as np
import pytest

from fkent.oracles import (
    OracleValue,
    binomial_rate,
    branch_count,
    enumerated_match_count,
    exhaustive_partial_cover,
    expected_entropy,
    log_binomial,
    log_match_count_bound,
    match_count_bound,
    mismatch_entropy_budget,
    pick_mismatch_fraction,
    stirling_rate,
    word_count,
)
from fkent.systems import (
    bernoulli_process,
    expanding_system,
    markov_process,
    path_from_symbols,
    shift_system,
    tent_system,
)


def test_stirling_rate_hand_values():
    assert stirling_rate(0.5) == pytest.approx(math.log(2.0), abs=1e-15)
    assert stirling_rate(0.0) == 0.0
    assert stirling_rate(1.0) == 0.0
    # symmetric around 1/2
    assert stirling_rate(0.3) == pytest.approx(stirling_rate(0.7), abs=1e-15)
    with pytest.raises(ValueError):
        stirling_rate(1.5)


@pytest.mark.parametrize("eps", [0.05, 0.1, 0.3, 0.5])
def test_binomial_rate_converges(eps):
    assert abs(binomial_rate(10_000, eps) - stirling_rate(eps)) <= 1e-3


def test_log_binomial_matches_comb():
    for n in range(0, 20):
        for k in range(0, n + 1):
            assert log_binomial(n, k) == pytest.approx(math.log(math.comb(n, k)), abs=1e-10)


def test_match_count_bound_hand_value():
    # C(4,2)^2 = 36 order-preserving partial bijections of size 2
    assert match_count_bound(4, 2) == 36
    assert enumerated_match_count(4, 2) == 36


def test_match_count_bound_equals_enumeration():
    for n in range(1, 9):
        for k in range(0, n + 1):
            assert match_count_bound(n, k) == enumerated_match_count(n, k)


def test_log_match_count_bound_large_n():
    n, k = 10_000, 3_000
    want = 2.0 * (math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1))
    assert log_match_count_bound(n, k) == pytest.approx(want, rel=1e-12)


def test_branch_count_is_factor_product():
    system = expanding_system((2, 3))
    path = path_from_symbols([0, 1, 1, 0])
    assert branch_count(system, path, 0) == 1
    assert branch_count(system, path, 3) == 2 * 3 * 3
    tent = tent_system((2,))
    assert branch_count(tent, path_from_symbols([0, 0]), 2) == 4


def test_word_count_matches_shift_alphabets():
    system = shift_system((2, 3))
    path = path_from_symbols([1, 0, 1])
    assert word_count(system, path, 3) == 3 * 2 * 3


def test_expected_entropy_hand_values():
    system = expanding_system((2, 3))
    proc = bernoulli_process((0.5, 0.5))
    oracle = expected_entropy(system, proc)
    assert oracle.value == pytest.approx(0.5 * math.log(2) + 0.5 * math.log(3), abs=1e-15)
    assert oracle.value == pytest.approx(0.8959, abs=5e-5)
    assert oracle.derivation == "branch-count"

    shift = shift_system((2, 2))
    assert expected_entropy(shift, proc).value == pytest.approx(math.log(2.0), abs=1e-15)


def test_expected_entropy_markov_weighting():
    # stationary law (2/3, 1/3) over factors (2, 4)
    system = expanding_system((2, 4))
    proc = markov_process([[0.9, 0.1], [0.2, 0.8]])
    want = (2.0 / 3.0) * math.log(2.0) + (1.0 / 3.0) * math.log(4.0)
    assert expected_entropy(system, proc).value == pytest.approx(want, abs=1e-12)


def test_expected_entropy_rejects_mismatched_alphabet():
    with pytest.raises(ValueError):
        expected_entropy(expanding_system((2, 3)), bernoulli_process((1.0,)))


def test_mismatch_budget_properties():
    # vanishes with kappa and grows with the cell count
    assert mismatch_entropy_budget(1e-12, 2) == pytest.approx(0.0, abs=1e-9)
    assert mismatch_entropy_budget(0.05, 8) > mismatch_entropy_budget(0.05, 2)
    kappa = pick_mismatch_fraction(0.05, 2)
    assert 0.0 < kappa < 0.05
    assert mismatch_entropy_budget(kappa, 2) <= 0.5 * 0.05 + 1e-12


def test_oracle_value_validation():
    v = OracleValue(value=1.0, derivation="branch-count")
    assert v.value == 1.0
    with pytest.raises(ValueError):
        OracleValue(value=float("nan"), derivation="branch-count")


def test_exhaustive_partial_cover_hand_instance():
    # two sets cover {0,1,2,3}; one set alone reaches 0.5 of the mass
    membership = np.array(
        [
            [True, True, False, False],
            [False, False, True, True],
            [True, False, False, True],
        ]
    )
    assert exhaustive_partial_cover(membership, mass_threshold=0.5) == 1
    assert exhaustive_partial_cover(membership, mass_threshold=0.95) == 2


def test_exhaustive_partial_cover_weights_and_feasibility():
    membership = np.array([[True, False], [False, False]])
    weights = np.array([0.2, 0.8])
    assert exhaustive_partial_cover(membership, weights, mass_threshold=0.2) == 1
    with pytest.raises(ValueError):
        exhaustive_partial_cover(membership, weights, mass_threshold=0.5)
