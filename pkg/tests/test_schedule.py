import pytest

from eeas.paths import Path
from eeas.schedule import ScheduleConflict, simulate_half_duplex


@pytest.mark.parametrize("hops", [2, 3, 4, 5])
def test_alternating_doubles_throughput(hops):
    a, b = Path([0] * (hops + 1)), Path([1] * (hops + 1))
    slots, warmup = 1000, 20
    single = simulate_half_duplex([a], slots)
    dual = simulate_half_duplex([a, b], slots)
    n_single = sum(1 for s in single.delivered if s >= warmup)
    n_dual = sum(1 for s in dual.delivered if s >= warmup)
    assert n_single == (slots - warmup) // 2
    assert n_dual == 2 * n_single
    assert dual.symbols_per_slot(warmup) == 1.0


def test_symbols_arrive_after_pipeline_delay():
    log = simulate_half_duplex([Path([0, 0, 0, 0])], 10)
    assert log.delivered[0] == 2
    assert log.delivered == sorted(log.delivered)


def test_shared_relay_antenna_conflicts():
    with pytest.raises(ScheduleConflict):
        simulate_half_duplex([Path([0, 0, 0]), Path([1, 0, 1])], 10)


def test_shared_end_antennas_are_allowed():
    # Source and destination never switch roles, so only relays must differ.
    log = simulate_half_duplex([Path([0, 0, 0]), Path([0, 1, 0])], 100)
    assert len(log.delivered) == 99


def test_path_count_checked():
    with pytest.raises(ValueError):
        simulate_half_duplex([], 10)
