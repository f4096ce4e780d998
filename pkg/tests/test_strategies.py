import numpy as np
import pytest
from scipy.stats import norm

from eeas import qam
from eeas.channel import ChannelRealization, RandomStream, reciprocal_view, sample_realization
from eeas.paths import Path, construct_independent_set, enumerate_paths, path_metrics
from eeas.strategies import (
    Kind,
    NoDisjointPath,
    PowerModel,
    SearchSpace,
    StrategySpec,
    UnsupportedTopology,
    dstbc_snr,
    propagate_af,
    run_trial_dstbc,
    run_trial_fd,
    run_trial_fd_df,
    run_trial_hd,
    run_trial_twoway,
    select_fd,
    select_fixed,
    select_hd_pair,
    select_twoway,
)
from eeas.topology import Topology

T121 = Topology.from_antennas([1, 2, 1])
T222 = Topology.from_antennas([2, 2, 2])


def _brute_best(real, power, paths, key):
    vals = [getattr(path_metrics(real, p, power), key) for p in paths]
    return paths[int(np.argmax(vals))]


def _disjoint(a: Path, b: Path) -> bool:
    return all(x != y for x, y in zip(a.antenna_indices, b.antenna_indices))


@pytest.mark.parametrize("m", [[2, 3, 2], [1, 2, 1], [3, 2, 2, 3]])
def test_fd_matches_brute_force(m):
    topo = Topology.from_antennas(m)
    paths = enumerate_paths(topo)
    for s in range(20):
        real = sample_realization(topo, RandomStream(100 + s))
        sel = select_fd(real, 10.0)
        assert sel.primary_path == _brute_best(real, 10.0, paths, "snr")
        assert sel.metrics.snr == pytest.approx(path_metrics(real, sel.primary_path, 10.0).snr)


def test_fd_batch_matches_single():
    real = sample_realization(T222, RandomStream(3), batch=50)
    sel = select_fd(real, 5.0)
    for k in (0, 17, 49):
        single = select_fd(real[k], 5.0)
        assert np.array_equal(sel.primary[k], single.primary)
        assert sel.metrics.snr[k] == pytest.approx(single.metrics.snr)


def test_fd_independent_search_space():
    indep = construct_independent_set(T222)
    real = sample_realization(T222, RandomStream(9), batch=200)
    sel = select_fd(real, 10.0, SearchSpace.INDEPENDENT_ONLY)
    for k in range(200):
        assert Path(sel.primary[k]) in indep
        assert Path(sel.primary[k]) == _brute_best(real[k], 10.0, indep, "snr")


def test_tie_goes_to_smallest_path():
    ones = ChannelRealization.from_matrices([np.ones((2, 3)), np.ones((3, 2))])
    assert select_fd(ones, 1.0).primary_path == Path([0, 0, 0])
    assert select_twoway(ones, 1.0).primary_path == Path([0, 0, 0])
    sel = select_hd_pair(ones, 1.0)
    assert sel.primary_path == Path([0, 0, 0])
    assert sel.secondary_path == Path([1, 1, 1])


def test_paired_dominance_over_every_fixed_path():
    real = sample_realization(T222, RandomStream(12), batch=5000)
    best = select_fd(real, 20.0).metrics.snr
    for p in enumerate_paths(T222):
        assert np.all(best >= select_fixed(real, 20.0, p).metrics.snr)


def test_fixed_default_path():
    real = sample_realization(T222, RandomStream(1))
    sel = select_fixed(real, 3.0)
    assert sel.primary_path == Path([0, 0, 0])


@pytest.mark.parametrize("m", [[2, 2, 2], [3, 3, 3], [2, 3, 2, 2]])
def test_hd_pair_matches_brute_force(m):
    topo = Topology.from_antennas(m)
    paths = enumerate_paths(topo)
    for s in range(15):
        real = sample_realization(topo, RandomStream(300 + s))
        sel = select_hd_pair(real, 10.0)
        first = _brute_best(real, 10.0, paths, "snr")
        avoid = [p for p in paths if _disjoint(p, first)]
        assert sel.primary_path == first
        assert _disjoint(sel.primary_path, sel.secondary_path)
        assert sel.secondary_path == _brute_best(real, 10.0, avoid, "snr")


def test_hd_needs_beta():
    real = sample_realization(T121, RandomStream(1))
    with pytest.raises(NoDisjointPath):
        select_hd_pair(real, 1.0)
    with pytest.raises(NoDisjointPath):
        StrategySpec(Kind.HD_ALTERNATING).check(T121)


def test_twoway_maximises_gain_product():
    topo = Topology.from_antennas([2, 3, 2])
    paths = enumerate_paths(topo)
    for s in range(20):
        real = sample_realization(topo, RandomStream(500 + s))
        assert select_twoway(real, 4.0).primary_path == _brute_best(real, 4.0, paths, "gain")


def test_twoway_reverse_selection_is_reversed_path():
    real = sample_realization(Topology.from_antennas([2, 3, 2, 2]), RandomStream(21), batch=2000)
    fwd = select_twoway(real, 10.0).primary
    rev = select_twoway(reciprocal_view(real), 10.0).primary
    assert np.array_equal(fwd[:, ::-1], rev)


def _bits(seed, shape):
    return qam.random_bits(np.random.default_rng(seed), shape)


def test_zero_noise_chains_are_error_free():
    rng = np.random.default_rng(0)
    real = sample_realization(T222, RandomStream(4), batch=300)
    bits = _bits(1, (300, 6))
    assert run_trial_fd(real, select_fd(real, 2.0), 2.0, bits, rng, noise_scale=0.0).total_errors == 0
    assert run_trial_fd_df(real, select_fd(real, 2.0), 2.0, bits, rng, noise_scale=0.0).total_errors == 0
    hd = run_trial_hd(real, select_hd_pair(real, 2.0), 2.0, bits, rng, noise_scale=0.0)
    assert hd["1"].total_errors == hd["2"].total_errors == 0
    tw = run_trial_twoway(real, select_twoway(real, 2.0), 2.0, bits, _bits(2, (300, 6)), rng, noise_scale=0.0)
    assert tw["fwd"].total_errors == tw["rev"].total_errors == 0
    r121 = sample_realization(T121, RandomStream(4), batch=300)
    assert run_trial_dstbc(r121, 2.0, bits, rng, noise_scale=0.0).total_errors == 0


def test_zero_channel_gives_coin_flip_ber():
    zero = ChannelRealization(tuple(np.zeros((1, 1, 1), dtype=complex) for _ in range(2)))
    bits = _bits(5, (1, 100_000))
    res = run_trial_fd(zero, select_fixed(zero, 10.0), 10.0, bits, np.random.default_rng(6))
    assert res.total_errors / (2 * 100_000) == pytest.approx(0.5, abs=0.01)


def test_af_post_detection_snr_matches_metric():
    real = sample_realization(Topology.from_antennas([2, 2, 3, 2]), RandomStream(7))
    sel = select_fd(real, 4.0)
    n = 400_000
    x = qam.modulate(_bits(3, n))
    received, eff = propagate_af(real, sel.primary, 4.0, x, np.random.default_rng(8))
    noise = received - eff * x
    empirical = abs(eff) ** 2 / np.mean(np.abs(noise) ** 2)
    assert empirical == pytest.approx(sel.metrics.snr, rel=0.02)


def test_df_ber_below_union_bound():
    topo = Topology.from_antennas([1, 2, 2, 1])
    real = sample_realization(topo, RandomStream(40))
    power = 3.0
    sel = select_fd(real, power)
    n = 200_000
    res = run_trial_fd_df(real, sel, power, _bits(9, n), np.random.default_rng(10))
    h2 = [abs(real.hops[k][i, j]) ** 2 for k, (i, j) in enumerate(sel.primary_path.edges())]
    per_hop = [norm.sf(np.sqrt(power * g)) for g in h2]
    ber = res.total_errors / (2 * n)
    assert ber <= sum(per_hop) + 3 * np.sqrt(sum(per_hop) / (2 * n))
    # and it cannot beat the weakest hop alone
    assert ber >= max(per_hop) - 3 * np.sqrt(max(per_hop) / (2 * n))


def test_dstbc_post_combining_snr():
    real = sample_realization(T121, RandomStream(14))
    n = 200_000
    bits = _bits(11, n)
    res = run_trial_dstbc(real, 5.0, bits, np.random.default_rng(12))
    snr = float(dstbc_snr(real, 5.0))
    # Per-bit error of co-phased 4-QAM with post-combining SNR snr.
    expected = norm.sf(np.sqrt(snr))
    assert res.total_errors / (2 * n) == pytest.approx(expected, abs=4 * np.sqrt(expected / (2 * n)) + 1e-4)


def test_dstbc_rejects_other_topologies():
    with pytest.raises(UnsupportedTopology):
        StrategySpec(Kind.DSTBC_ALAMOUTI).check(T222)
    real = sample_realization(T222, RandomStream(1))
    with pytest.raises(UnsupportedTopology):
        run_trial_dstbc(real, 1.0, _bits(1, 2), np.random.default_rng(0))


def test_dstbc_total_power_split():
    real = sample_realization(T121, RandomStream(2))
    assert float(dstbc_snr(real, 8.0, PowerModel.TOTAL)) < float(dstbc_snr(real, 8.0, PowerModel.PER_NODE))


def test_trials_are_reproducible():
    real = sample_realization(T222, RandomStream(31), batch=100)
    bits = _bits(1, (100, 4))
    a = run_trial_fd(real, select_fd(real, 3.0), 3.0, bits, RandomStream(7, 0, 2).generator())
    b = run_trial_fd(real, select_fd(real, 3.0), 3.0, bits, RandomStream(7, 0, 2).generator())
    assert np.array_equal(a.detected_bits, b.detected_bits)


def test_strategy_spec():
    spec = StrategySpec.parse("fd-af", "independent", "total")
    assert spec.node_power(12.0, Topology.from_antennas([1, 2, 2, 1])) == 4.0
    assert StrategySpec.parse("fd-af").node_power(12.0, T222) == 12.0
    assert spec.to_dict() == {"kind": "fd-af", "search": "independent", "power_model": "total"}
    with pytest.raises(ValueError):
        StrategySpec.parse("bogus")
