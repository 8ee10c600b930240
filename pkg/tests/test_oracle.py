import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from coopnav.oracle import (
    CONFIGURATIONS,
    contradiction_check,
    equivalence_error,
    extra_term_closed_form,
    extra_term_gramian,
    gramian_diagonal,
    implied_gramian_closed_form,
    oracle_report,
    path_sum_diagonal,
    true_gramian_p3a,
)

positive = st.floats(0.1, 10.0)


@pytest.mark.parametrize("name", sorted(CONFIGURATIONS))
@given(seed=st.integers(0, 2**31))
def test_path_sums_equal_gramian(name, seed):
    cfg = CONFIGURATIONS[name]
    rng = np.random.default_rng(seed)
    w = {k: float(rng.uniform(0.1, 10.0)) for k in cfg.weight_names}
    assert equivalence_error(cfg, w) <= 1e-10


def test_three_vehicle_diagonal_by_hand():
    cfg = CONFIGURATIONS["p3a"]
    w = {"oa1": 2.0, "o12": 3.0, "oa3": 5.0}
    expected = [1 / 4, 1 / 4 + 1 / 9, 1 / 25]
    assert path_sum_diagonal(cfg, w) == pytest.approx(expected)
    assert gramian_diagonal(cfg, w) == pytest.approx(expected)


def test_contradiction_at_unit_weights():
    cr = contradiction_check()
    assert cr.singular
    assert cr.residual > 0.1
    assert cr.true_gramian == pytest.approx(np.array([[2, -1, 0], [-1, 1, 0], [0, 0, 1]], dtype=float))


@given(positive, positive, positive)
def test_truncated_inverse_closed_form(oa1, o12, oa3):
    if abs(oa1 - o12) < 0.05:
        return
    cr = contradiction_check(oa1, o12, oa3)
    assert not cr.singular
    assert cr.implied_gramian == pytest.approx(implied_gramian_closed_form(oa1, o12, oa3), rel=1e-6, abs=1e-9)
    # vehicle 2's diagonal is off by the factor oa1^2 / (oa1^2 - o12^2) for every weight choice
    true = true_gramian_p3a(oa1, o12, oa3)
    assert cr.implied_gramian[1, 1] / true[1, 1] == pytest.approx(oa1**2 / (oa1**2 - o12**2))
    assert abs(cr.implied_gramian[1, 1] - true[1, 1]) > 1e-9 * true[1, 1]


@given(positive, positive, positive)
def test_extra_term_closed_form(oa1, o12, oa3):
    assert extra_term_gramian(oa1, o12, oa3) == pytest.approx(extra_term_closed_form(oa1, o12, oa3), rel=1e-8, abs=1e-10)


def test_report_passes():
    ok, text = oracle_report(draws=20, seed=1)
    assert ok
    assert text.count("PASS") == 5
