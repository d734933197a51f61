import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from fixlab.errors import EmptyInputError
from fixlab.gaze import Fixation
from fixlab.pooling import (
    PoolingRegion, PoolingStrategy, build_representation, build_union_representation,
    fixation_regions, pool, pool_mask, pyramid_regions,
)

MAX, AVG = PoolingStrategy.MAX, PoolingStrategy.AVERAGE
HAND = np.array([[0.2, -0.7], [-0.5, 0.1]])


def test_pyramid_counts():
    (whole,) = pyramid_regions(100, 50, (1,))
    assert (whole.xmin, whole.ymin, whole.xmax, whole.ymax) == (0, 0, 100, 50)
    assert len(pyramid_regions(100, 50)) == 21
    cells = pyramid_regions(100, 50, (2,))
    assert {(r.xmax - r.xmin, r.ymax - r.ymin) for r in cells} == {(50, 25)}


def test_fixation_window_center():
    (r,) = fixation_regions([Fixation(50, 50, 0, 0.2)], 30, 100, 100)
    assert (r.xmax - r.xmin, r.ymax - r.ymin) == (30, 30)
    assert r.xmin <= 50 < r.xmax


def test_fixation_window_clipped_at_origin():
    (r,) = fixation_regions([Fixation(0, 0, 0, 0.2)], 30, 100, 100)
    assert (r.xmin, r.ymin, r.xmax, r.ymax) == (0, 0, 16, 16)


def test_fixation_order_and_empty():
    fixes = [Fixation(10, 10, 0, 0.1), Fixation(80, 60, 0.2, 0.1)]
    a, b = fixation_regions(fixes, 30, 100, 100)
    assert a.xmin < b.xmin
    with pytest.raises(EmptyInputError):
        fixation_regions([], 30, 100, 100)


def test_hand_example():
    centers = np.array([[1.0, 1.0], [2.0, 2.0]])
    region = PoolingRegion(0, 0, 10, 10)
    np.testing.assert_allclose(pool(HAND, centers, region, MAX), [0.5, 0.7])
    np.testing.assert_allclose(pool(HAND, centers, region, AVG), [-0.15, -0.3])


def test_single_code():
    code = np.array([[-0.3, 0.4]])
    np.testing.assert_allclose(pool_mask(code, [True], MAX), [0.3, 0.4])
    np.testing.assert_allclose(pool_mask(code, [True], AVG), [-0.3, 0.4])


def test_empty_region_is_zero():
    assert not pool(HAND, [[50.0, 50.0], [60.0, 60.0]], PoolingRegion(0, 0, 10, 10), MAX).any()


def test_half_open_regions():
    r = PoolingRegion(0, 0, 10, 10)
    assert list(r.mask([[0, 0], [9.99, 5], [10, 5]])) == [True, True, False]


def test_representation_dimensions(rng):
    codes = rng.normal(size=(20, 256))
    centers = rng.uniform(0, 64, size=(20, 2))
    v = build_representation(codes, centers, pyramid_regions(64, 64), MAX)
    assert v.shape == (5376,) and np.linalg.norm(v) == pytest.approx(1.0)
    one = build_representation(HAND, [[1, 1], [2, 2]], pyramid_regions(10, 10, (1,)), MAX)
    assert one.shape == (2,)
    zero = build_representation(np.zeros((3, 4)), rng.uniform(0, 10, (3, 2)),
                                pyramid_regions(10, 10), AVG)
    assert not zero.any()


def test_union_counts_each_code_once():
    codes = np.array([[1.0, 0.0], [0.0, 1.0]])
    centers = np.array([[5.0, 5.0], [50.0, 50.0]])
    regions = [PoolingRegion(0, 0, 10, 10), PoolingRegion(0, 0, 10, 10)]
    v = build_union_representation(codes, centers, regions, AVG)
    np.testing.assert_allclose(v, [1.0, 0.0])


codes_st = arrays(float, st.tuples(st.integers(1, 8), st.integers(1, 5)),
                  elements=st.floats(-10, 10))


@settings(max_examples=50)
@given(codes_st, st.randoms())
def test_max_permutation_invariant(codes, rnd):
    perm = list(range(len(codes)))
    rnd.shuffle(perm)
    mask = np.ones(len(codes), bool)
    np.testing.assert_array_equal(pool_mask(codes, mask, MAX), pool_mask(codes[perm], mask, MAX))


@settings(max_examples=50)
@given(codes_st, st.floats(-10, 10))
def test_max_monotone_under_added_codes(codes, extra):
    bigger = np.vstack([codes, np.full(codes.shape[1], extra)])
    small = pool_mask(codes, np.ones(len(codes), bool), MAX)
    big = pool_mask(bigger, np.ones(len(bigger), bool), MAX)
    assert np.all(big >= small)


@settings(max_examples=50)
@given(arrays(float, st.integers(1, 6), elements=st.floats(-10, 10)), st.integers(1, 9))
def test_average_of_identical(code, m):
    codes = np.tile(code, (m, 1))
    np.testing.assert_allclose(pool_mask(codes, np.ones(m, bool), AVG), code, rtol=1e-12)
