import numpy as np
import pytest

from sdwnsim.errors import UndefinedMetricError
from sdwnsim.metrics import aggregate_trial, empirical_cdf, jain_index


def test_jain_known_values():
    assert jain_index([1.0, 1.0]) == pytest.approx(1.0)
    assert jain_index([1.0, 0.0]) == pytest.approx(0.5)
    assert jain_index([2.5, 1.5]) == pytest.approx(16.0 / 17.0)


def test_jain_errors():
    with pytest.raises(UndefinedMetricError):
        jain_index([0.0, 0.0])
    with pytest.raises(UndefinedMetricError):
        jain_index([])
    with pytest.raises(UndefinedMetricError):
        jain_index([1.0, -0.5])


@pytest.mark.parametrize("seed", range(20))
def test_jain_invariances(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(2, 8))
    t = rng.uniform(0.1, 10.0, size=k)
    j = jain_index(t)
    assert jain_index(rng.permutation(t)) == pytest.approx(j)
    c = float(rng.uniform(0.1, 100.0))
    assert jain_index(c * t) == pytest.approx(j)
    assert 1.0 / k <= j <= 1.0 + 1e-12


def test_cdf_counting():
    table = empirical_cdf([1.0, 2.0, 3.0])
    assert table.evaluate(2.0) == pytest.approx(2.0 / 3.0)
    assert table.evaluate(0.5) == 0.0
    assert table.evaluate(3.0) == 1.0


def test_cdf_constant_sample():
    table = empirical_cdf([4.0] * 10)
    assert table.evaluate(3.999) == 0.0
    assert table.evaluate(4.0) == 1.0


def test_cdf_max_is_one():
    rng = np.random.default_rng(0)
    v = rng.normal(size=257)
    table = empirical_cdf(v)
    assert table.evaluate(v.max()) == 1.0


def test_cdf_glivenko_cantelli():
    rng = np.random.default_rng(12345)
    v = rng.uniform(0.0, 1.0, size=10_000)
    table = empirical_cdf(v)
    xs = np.linspace(0.0, 1.0, 2001)
    gaps = [abs(table.evaluate(x) - x) for x in xs]
    assert max(gaps) < 0.02


def test_cdf_median_lower_interpolation():
    assert empirical_cdf([1.0, 2.0, 3.0, 4.0]).median() == 2.0
    assert empirical_cdf([5.0]).median() == 5.0


def test_cdf_empty_errors():
    with pytest.raises(UndefinedMetricError):
        empirical_cdf([])


def test_aggregate_partition_identity():
    rng = np.random.default_rng(3)
    per_sp = rng.uniform(0.0, 50.0, size=2)
    out = aggregate_trial(per_sp)
    assert out["total_throughput"] == pytest.approx(per_sp.sum(), rel=1e-9)
    assert out["per_sp_throughput"] == tuple(per_sp)


def test_aggregate_single_slice_jain_is_one():
    out = aggregate_trial([7.5])
    assert out["jain_index"] == pytest.approx(1.0)


def test_aggregate_symmetric_slices():
    out = aggregate_trial([3.0, 3.0])
    assert out["jain_index"] == pytest.approx(1.0)


def test_aggregate_edge_medians():
    rates = np.array([1.0, 2.0, 10.0, 20.0])
    flags = np.array([True, True, False, False])
    out = aggregate_trial([1.0, 2.0], per_user_rate=rates, edge_flags=flags)
    assert out["edge_median_rate"] == 1.0
    assert out["center_median_rate"] == 10.0


def test_aggregate_shape_mismatch():
    from sdwnsim.errors import ConfigError
    with pytest.raises(ConfigError):
        aggregate_trial([1.0], per_user_rate=np.ones(3), edge_flags=np.ones(2, dtype=bool))


def test_fairness_report_container():
    from sdwnsim.metrics import FairnessReport
    rep = FairnessReport(per_sp_throughput=(2.5, 1.5), jain_index=jain_index([2.5, 1.5]))
    assert rep.jain_index == pytest.approx(16.0 / 17.0)
