import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from mdclt import (DistanceEstimate, MomentParams, ProcessSpec, Rectangle, SampleBatch,
                   band_membership, make_ma_process, prefix_sum)
from mdclt.errors import DegeneracyError, ParameterError, RangeError, ShapeError


def _batch(data):
    return SampleBatch(np.asarray(data, dtype=float), None, 0)


class TestProcessSpec:
    def test_validation(self):
        with pytest.raises(ShapeError):
            make_ma_process(2, 1, [np.eye(2)])
        with pytest.raises(ShapeError):
            make_ma_process(2, 0, [np.eye(3)])
        with pytest.raises(ParameterError):
            make_ma_process(1, 0, [1.0], "student")
        with pytest.raises(DegeneracyError):
            make_ma_process(1, 1, [0.0, 0.0])

    def test_roundtrip_and_digest(self, ma2_p3):
        again = ProcessSpec.from_dict(json.loads(json.dumps(ma2_p3.to_dict())))
        assert again == ma2_p3
        assert again.digest == ma2_p3.digest
        assert make_ma_process(3, 0, [np.eye(3)]).digest != ma2_p3.digest

    def test_coeffs_read_only(self, ma1_p1):
        with pytest.raises(ValueError):
            ma1_p1.coeffs[0][0, 0] = 3.0


class TestPrefixSum:
    def test_single_term(self):
        x = np.random.default_rng(0).standard_normal((4, 1, 2))
        assert np.array_equal(prefix_sum(_batch(x), 1, 1), x[:, 0])

    def test_zeros(self):
        assert np.all(prefix_sum(_batch(np.zeros((3, 5, 2))), 2, 4) == 0)

    def test_matches_naive_sum(self):
        x = np.random.default_rng(1).standard_normal((20, 300, 3)) * 1e3
        got = prefix_sum(_batch(x), 1, 300)
        want = np.array([[sum(map(float, x[r, :, k])) for k in range(3)] for r in range(20)])
        np.testing.assert_allclose(got, want, rtol=1e-10, atol=1e-9)

    def test_range_errors(self):
        b = _batch(np.zeros((2, 4, 1)))
        for i, j in [(0, 2), (3, 2), (1, 5)]:
            with pytest.raises(RangeError):
                prefix_sum(b, i, j)

    @settings(max_examples=40, deadline=None)
    @given(arrays(np.float64, (3, 12, 2), elements=st.floats(-1e6, 1e6)),
           st.integers(1, 12), st.integers(1, 12), st.integers(1, 12))
    def test_additive(self, data, a, b, c):
        i, j, k = sorted((a, b, c))
        if j == k:
            return
        batch = _batch(data)
        lhs = prefix_sum(batch, i, k)
        rhs = prefix_sum(batch, i, j) + prefix_sum(batch, j + 1, k)
        scale = np.abs(data).sum() + 1.0
        assert np.max(np.abs(lhs - rhs)) <= 1e-12 * scale

    def test_batch_is_read_only(self):
        b = _batch(np.zeros((1, 2, 1)))
        with pytest.raises(ValueError):
            b.data[0, 0, 0] = 1.0


class TestBand:
    def test_corner_point(self):
        assert band_membership(np.zeros(3), Rectangle(np.zeros(3), 0.5))

    def test_deep_inside(self):
        assert not band_membership(-np.ones(3), Rectangle(np.zeros(3), 0.5))

    def test_two_dim_example(self):
        assert band_membership(np.array([0.4, -3.0]), Rectangle(np.zeros(2), 0.5))

    def test_outside(self):
        assert not band_membership(np.array([0.6, -3.0]), Rectangle(np.zeros(2), 0.5))

    def test_shape_error(self):
        with pytest.raises(ShapeError):
            band_membership(np.zeros(2), Rectangle(np.zeros(3), 0.1))

    def test_vectorized(self):
        x = np.array([[0.0, 0.0], [-1.0, -1.0], [0.4, -3.0]])
        assert band_membership(x, Rectangle(np.zeros(2), 0.5)).tolist() == [True, False, True]


class TestMomentParams:
    def test_positive(self):
        with pytest.raises(ParameterError):
            MomentParams(1, 0, 1, 1, 1)
        with pytest.raises(ParameterError):
            MomentParams(1, 1, float("inf"), 1, 1)

    def test_json_roundtrip(self):
        mp = MomentParams(1.0, 0.5, 2.0, 0.8, 1.6, n=10, m=2, meta={"seed": 3})
        assert MomentParams.from_json(mp.to_json()) == mp

    def test_violations(self):
        assert MomentParams(1, 1, 1, 1, 1).violations() == []
        assert "sigma_lower > sigma_min" in MomentParams(1, 2, 3, 1, 1).violations()


def test_distance_estimate_checks():
    with pytest.raises(ParameterError):
        DistanceEstimate(1.5, 0.1, 1, 1, 1, "mu")
    with pytest.raises(ParameterError):
        DistanceEstimate(0.5, 0.1, 1, 1, 1, "nu")
    assert DistanceEstimate(0.5, 0.1, 3, 4, 5, "mu").to_row(n=2)["n"] == 2
