import numpy as np
import pytest

from actiongroup.errors import AlignmentError, DegenerateMeasureError, UseSpecialCaseError
from actiongroup.features import PatchSet
from actiongroup.sparse_model import Dictionary
from actiongroup.temporal import (
    RStarCache,
    change_profile,
    change_vector,
    pair_measure_space,
    pair_measure_time,
)

from helpers import interval, scenario_units


@pytest.fixture(scope="module")
def switch():
    return scenario_units([[1, 1], [2, 2], [1, 2]], seed=2)


def test_single_switch_flagged(switch):
    data, dicts = switch
    (xp, dp), (xc, dc) = interval(data, dicts, 0), interval(data, dicts, 1)
    cv = change_vector(xp, xc, dp, dc)
    assert cv.changed == [3] and not cv.low_confidence
    assert cv.normalized.sum() == pytest.approx(1.0)
    assert cv.mu == pytest.approx(0.3)
    assert cv.normalized[2] > cv.mu > cv.normalized[:2].max()
    doc = cv.to_json()
    assert doc["changed"] == [3] and doc["pair"] == [0, 1]


def test_all_switch_is_low_confidence():
    data, dicts = scenario_units([[1, 2], [2, 3], [3, 1]], seed=3)
    (xp, dp), (xc, dc) = interval(data, dicts, 0), interval(data, dicts, 1)
    cv = change_vector(xp, xc, dp, dc)
    assert cv.low_confidence


def test_identical_intervals_have_zero_energy(switch):
    data, dicts = switch
    x, d = interval(data, dicts, 0)
    cv = change_vector(x, x, d, d)
    assert np.all(cv.raw == 0) and cv.C == 0
    assert cv.changed == [] and not cv.low_confidence


def test_change_vector_preconditions(switch):
    data, dicts = switch
    x, d = interval(data, dicts, 0)
    fewer = {p: v for p, v in x.items() if p != 3}
    with pytest.raises(AlignmentError):
        change_vector(x, fewer, d, d)
    dd = {p: v for p, v in d.items() if p != 3}
    with pytest.raises(UseSpecialCaseError):
        change_vector(fewer, fewer, dd, dd)


def test_pair_measures_cancel_and_are_symmetric(switch):
    data, dicts = switch
    x, d = interval(data, dicts, 0)
    assert pair_measure_time(1, x, x, d, d).value == 0.0
    a = pair_measure_space(1, 2, x, d)
    b = pair_measure_space(2, 1, x, d)
    assert a.value == b.value and a.different
    assert a.mu == 0.45
    assert pair_measure_space(1, 3, x, d).value < a.mu


def test_degenerate_pair_measure():
    X = PatchSet(np.zeros((4, 3)), person_id=1, interval=0)
    Y = PatchSet(np.ones((4, 3)), person_id=2, interval=0)
    D = {1: Dictionary(np.eye(4), 1, 0), 2: Dictionary(np.eye(4), 2, 0)}
    with pytest.raises(DegenerateMeasureError):
        pair_measure_space(1, 2, {1: X, 2: Y}, D)


def test_profile_marks_gaps(switch):
    data, dicts = switch
    xs = [data.patchsets[(3, 0)], None, data.patchsets[(3, 1)]]
    ds = [dicts[(3, 0)], None, dicts[(3, 1)]]
    assert change_profile(3, xs, ds) == [None, None]
    full = change_profile(3, [xs[0], xs[2]], [ds[0], ds[2]])
    assert len(full) == 1 and full[0] > 0
    with pytest.raises(AlignmentError):
        change_profile(3, xs, ds[:2])


def test_cache_shares_solves(switch):
    data, dicts = switch
    (xp, dp), (xc, dc) = interval(data, dicts, 0), interval(data, dicts, 1)
    cache = RStarCache()
    change_vector(xp, xc, dp, dc, cache=cache)
    assert cache.solves == 4 * 3
    pair_measure_time(1, xp, xc, dp, dc, cache=cache)
    assert cache.solves == 12
    untagged = np.ones((100, 4))
    cache(untagged, dp[1])
    cache(untagged, dp[1])
    assert cache.solves == 13
