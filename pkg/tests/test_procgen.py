import numpy as np
import pytest

from mdclt import load_batch, make_ma_process, sample_paths, sample_sums, save_batch, sum_covariance
from mdclt.errors import CapacityError, ConfigError, RangeError
from mdclt.procgen import covariance_model, sample_sums_paired


def brute_force_cov(spec, i, j):
    model = covariance_model(spec)
    out = np.zeros((spec.p, spec.p))
    for a in range(i, j + 1):
        for b in range(i, j + 1):
            out += model.lag(b - a)
    return out


def test_lag_covariances(ma1_p1):
    model = covariance_model(ma1_p1)
    assert model.lag(0)[0, 0] == pytest.approx(1.25)
    assert model.lag(1)[0, 0] == pytest.approx(0.5)
    assert model.lag(2)[0, 0] == 0.0


def test_zero_lag_one():
    spec = make_ma_process(2, 1, [np.eye(2), np.zeros((2, 2))])
    assert np.all(covariance_model(spec).lag(1) == 0)


def test_lag_transpose():
    spec = make_ma_process(2, 1, [np.eye(2), [[0.0, 1.0], [0.0, 0.0]]])
    model = covariance_model(spec)
    np.testing.assert_array_equal(model.lag(-1), model.lag(1).T)


def test_sum_covariance_examples(ma1_p1):
    assert sum_covariance(ma1_p1, 1, 4)[0, 0] == pytest.approx(8.0, rel=1e-14)
    assert sum_covariance(ma1_p1, 3, 3)[0, 0] == pytest.approx(1.25)
    iid = make_ma_process(2, 0, [[[1.0, 0.5], [0.0, 1.0]]])
    np.testing.assert_allclose(sum_covariance(iid, 2, 8), 7 * covariance_model(iid).lag(0))


def test_sum_covariance_brute_force(ma2_p3):
    for i, j in [(1, 1), (1, 2), (2, 7), (1, 13)]:
        np.testing.assert_allclose(sum_covariance(ma2_p3, i, j), brute_force_cov(ma2_p3, i, j),
                                   rtol=1e-10)


def test_sum_covariance_range(ma1_p1):
    with pytest.raises(RangeError):
        sum_covariance(ma1_p1, 3, 2)


def test_sample_mean_centered():
    spec = make_ma_process(1, 0, [1.0])
    batch = sample_paths(spec, 100, 10_000, 4)
    assert abs(batch.data.mean()) < 4 / np.sqrt(100 * 10_000)


def test_monte_carlo_variance(ma2_p3):
    n, R = 12, 20_000
    s = sample_sums(ma2_p3, n, R, 1)
    exact = sum_covariance(ma2_p3, 1, n)
    emp = np.cov(s.T)
    # standard error of a covariance entry: sqrt((S_kk S_ll + S_kl^2) / R)
    se = np.sqrt((np.outer(np.diag(exact), np.diag(exact)) + exact**2) / R)
    assert np.all(np.abs(emp - exact) <= 5 * se)


def test_thread_invariance(ma2_p3):
    a = sample_paths(ma2_p3, 30, 500, 9, threads=1)
    b = sample_paths(ma2_p3, 30, 500, 9, threads=4)
    assert np.array_equal(a.data, b.data)


def test_sums_match_paths(ma2_p3):
    batch = sample_paths(ma2_p3, 25, 300, 2)
    np.testing.assert_allclose(sample_sums(ma2_p3, 25, 300, 2), batch.data.sum(axis=1),
                               rtol=1e-12, atol=1e-12)


def test_paired_sums(ma2_p3):
    sx, sy = sample_sums_paired(ma2_p3, 20, 4000, 5, threads=2)
    assert np.array_equal(sx, sample_sums(ma2_p3, 20, 4000, 5))
    cov = sum_covariance(ma2_p3, 1, 20)
    se = np.sqrt(2 * np.diag(cov) ** 2 / 4000)
    assert np.all(np.abs(np.diag(np.cov(sy.T)) - np.diag(cov)) < 5 * se)
    assert np.corrcoef(sx[:, 0], sy[:, 0])[0, 1] > 0.7


def test_capacity_error(ma1_p1):
    with pytest.raises(CapacityError, match="sample_sums"):
        sample_paths(ma1_p1, 1000, 1000, 0, memory_cap=10_000)


def test_bad_sizes(ma1_p1):
    with pytest.raises(ConfigError):
        sample_paths(ma1_p1, 0, 10, 0)
    with pytest.raises(ConfigError):
        sample_sums(ma1_p1, 5, 0, 0)


def test_container_roundtrip(tmp_path, ma2_p3):
    batch = sample_paths(ma2_p3, 7, 11, 2**64 - 1)
    path = save_batch(batch, tmp_path / "b.bin")
    back = load_batch(path)
    assert back.spec == ma2_p3
    assert back.master_seed == 2**64 - 1
    assert np.array_equal(back.data, batch.data)


def test_container_rejects_garbage(tmp_path):
    p = tmp_path / "junk.bin"
    p.write_bytes(b"not a batch at all, definitely not")
    with pytest.raises(ConfigError):
        load_batch(p)
