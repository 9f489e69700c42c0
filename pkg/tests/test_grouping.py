import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from actiongroup.errors import DimensionMismatchError, UseSpecialCaseError
from actiongroup.grouping import (
    AffinityMatrix,
    GroupingConfig,
    binarize,
    connected_components,
    group_persons,
    loo_code,
    pair_threshold,
    similarity_matrix,
    spatial_threshold,
    temporal_threshold,
)
from actiongroup.sparse_model import SparseCodes

from helpers import interval, scenario_units


def _codes(shares: dict, size=2):
    """Blocked codes whose block energies equal ``shares``."""
    blocks, rows, start = [], [], 0
    for pid, e in shares.items():
        blocks.append((pid, start, start + size))
        rows.append(np.full((size, 1), e / size))
        start += size
    return SparseCodes(np.vstack(rows), block_index=blocks)


def test_thresholds():
    assert spatial_threshold(0.9, 4) == pytest.approx(0.3)
    assert spatial_threshold(0.9, 5) == pytest.approx(0.225)
    assert temporal_threshold(0.9, 3) == pytest.approx(0.3)
    assert pair_threshold(0.9) == 0.45


def test_equal_shares_give_one_third():
    ids = [1, 2, 3, 4]
    codes = {p: _codes({q: 1.0 for q in ids if q != p}) for p in ids}
    S = similarity_matrix(codes)
    off = S.values[~np.eye(4, dtype=bool)]
    assert np.allclose(off, 1 / 3)
    res = connected_components(binarize(S, 4, GroupingConfig(r=0.9)), ids)
    assert res.partition == [[1, 2, 3, 4]]


def test_similarity_is_reciprocal_minimum():
    codes = {1: _codes({2: 3.0, 3: 1.0}), 2: _codes({1: 1.0, 3: 1.0}), 3: _codes({1: 0.0, 2: 2.0})}
    S = similarity_matrix(codes).values
    assert S[0, 1] == S[1, 0] == pytest.approx(min(0.75, 0.5))
    assert S[0, 2] == 0.0 and S[1, 2] == pytest.approx(min(0.5, 1.0))
    assert np.all(np.diag(S) == 1)


@settings(max_examples=50, deadline=None)
@given(P=st.integers(3, 6), data=st.data())
def test_similarity_invariants(P, data):
    ids = list(range(1, P + 1))
    energies = st.floats(0.0, 10.0, allow_nan=False)
    codes = {p: _codes({q: data.draw(energies) for q in ids if q != p}) for p in ids}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        S = similarity_matrix(codes).values
    assert np.array_equal(S, S.T)
    assert np.all((S >= 0) & (S <= 1)) and np.all(np.diag(S) == 1)


def test_zero_energy_person_is_isolated():
    codes = {1: _codes({2: 0.0, 3: 0.0}), 2: _codes({1: 1.0, 3: 1.0}), 3: _codes({1: 1.0, 2: 1.0})}
    with pytest.warns(RuntimeWarning, match="person 1"):
        S = similarity_matrix(codes)
    assert S.values[0, 1:].sum() == 0 and S.warnings
    part = connected_components(binarize(S, 3), [1, 2, 3]).partition
    assert part == [[1], [2, 3]]


def test_pair_grouping_needs_special_case():
    S = AffinityMatrix(np.ones((2, 2)), [1, 2])
    with pytest.raises(UseSpecialCaseError):
        binarize(S)
    with pytest.raises(UseSpecialCaseError):
        loo_code(1, [np.ones((3, 2))] * 2, [np.ones((3, 2))] * 2)


def test_components_are_ordered_by_smallest_member():
    adj = np.eye(5, dtype=bool)
    adj[0, 3] = adj[3, 0] = adj[1, 4] = adj[4, 1] = True
    res = connected_components(adj, [9, 2, 7, 4, 1])
    assert res.partition == [[1, 2], [4, 9], [7]]
    with pytest.raises(ValueError):
        connected_components(np.triu(np.ones((3, 3), bool)))


@settings(max_examples=40, deadline=None)
@given(P=st.integers(3, 7), seed=st.integers(0, 10**6), r1=st.floats(0, 1), r2=st.floats(0, 1))
def test_partition_refines_as_r_grows(P, seed, r1, r2):
    lo, hi = sorted((r1, r2))
    rng = np.random.default_rng(seed)
    M = rng.random((P, P))
    S = AffinityMatrix(np.minimum(M, M.T), list(range(1, P + 1)))
    coarse = connected_components(binarize(S, P, GroupingConfig(r=lo))).partition
    fine = connected_components(binarize(S, P, GroupingConfig(r=hi))).partition
    for g in fine:
        assert any(set(g) <= set(c) for c in coarse)


def test_loo_blocks_exclude_the_person():
    rng = np.random.default_rng(0)
    X = rng.random((6, 5))
    dicts = {p: rng.random((6, 3)) for p in (1, 2, 3)}
    codes = loo_code(2, {p: X for p in dicts}, dicts)
    assert [b[0] for b in codes.block_index] == [1, 3]
    assert codes.coeffs.shape == (6, 5)
    dicts[3] = rng.random((5, 3))
    with pytest.raises(DimensionMismatchError):
        loo_code(2, {p: X for p in dicts}, dicts)


def test_planted_groups_recovered():
    data, dicts = scenario_units([[1], [2], [1], [2], [2]], seed=1)
    ps, ds = interval(data, dicts, 0)
    res = group_persons(ps, ds)
    assert res.partition == [[1, 3], [2, 4, 5]]
    assert res.tau == pytest.approx(0.9 / 4)
