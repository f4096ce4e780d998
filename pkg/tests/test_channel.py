import numpy as np
import pytest
from scipy import stats

from eeas.channel import RandomStream, reciprocal_view, sample_realization
from eeas.paths import Path, path_metrics
from eeas.topology import Topology

T121 = Topology.from_antennas([1, 2, 1])


def test_shapes():
    real = sample_realization(T121, RandomStream(1))
    assert [h.shape for h in real.hops] == [(1, 2), (2, 1)]
    batch = sample_realization(T121, RandomStream(1), batch=5)
    assert [h.shape for h in batch.hops] == [(5, 1, 2), (5, 2, 1)]
    assert batch.batch_shape == (5,)


def test_unit_power():
    real = sample_realization(Topology.from_antennas([1, 1, 1]), RandomStream(11), batch=500_000)
    power = np.concatenate([np.abs(h).ravel() ** 2 for h in real.hops])
    assert power.size == 10**6
    assert abs(power.mean() - 1.0) < 0.01


def test_streams_are_distinct_and_reproducible():
    a = sample_realization(T121, RandomStream(99, 0))
    b = sample_realization(T121, RandomStream(99, 1))
    a2 = sample_realization(T121, RandomStream(99, 0))
    assert not np.allclose(a.hops[0], b.hops[0])
    for x, y in zip(a.hops, a2.hops):
        assert np.array_equal(x, y)


def test_lanes_are_independent_substreams():
    g0 = RandomStream(5, 3, 0).generator().standard_normal(4)
    g1 = RandomStream(5, 3, 1).generator().standard_normal(4)
    assert not np.allclose(g0, g1)


def test_seed_range():
    with pytest.raises(ValueError):
        RandomStream(-1)
    with pytest.raises(ValueError):
        RandomStream(2**64)


def test_gaussian_components():
    real = sample_realization(Topology.from_antennas([1, 1, 1]), RandomStream(2024), batch=50_000)
    h = np.concatenate([x.ravel() for x in real.hops])
    sd = np.sqrt(0.5)
    assert stats.kstest(h.real, "norm", args=(0, sd)).pvalue > 0.01
    assert stats.kstest(h.imag, "norm", args=(0, sd)).pvalue > 0.01


def test_reciprocal_view_is_involution():
    real = sample_realization(Topology.from_antennas([2, 3, 1, 2]), RandomStream(3))
    back = reciprocal_view(reciprocal_view(real))
    for x, y in zip(real.hops, back.hops):
        assert np.array_equal(x, y)
    rev = reciprocal_view(real)
    assert rev.stage_antennas == (2, 1, 3, 2)


def test_reciprocal_path_sees_same_scalars():
    real = sample_realization(Topology.from_antennas([2, 3, 2]), RandomStream(8))
    rev = reciprocal_view(real)
    p = Path([1, 2, 0])
    fwd = [real.hops[n][i, j] for n, (i, j) in enumerate(p.edges())]
    bwd = [rev.hops[n][i, j] for n, (i, j) in enumerate(p.reversed().edges())]
    assert sorted(fwd, key=abs) == sorted(bwd, key=abs)


def test_reciprocal_gain_equal_121():
    real = sample_realization(T121, RandomStream(17))
    rev = reciprocal_view(real)
    for p in (Path([0, 0, 0]), Path([0, 1, 0])):
        assert path_metrics(real, p, 2.0).gain == pytest.approx(path_metrics(rev, p.reversed(), 2.0).gain)
