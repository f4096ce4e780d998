import time

from eeas import topology, verify


def test_fast_suite_passes_quickly():
    lines = []
    t0 = time.perf_counter()
    results = verify.run_suite("fast", report=lines.append)
    assert time.perf_counter() - t0 < 10.0
    assert all(r.passed for r in results), lines
    assert len(lines) == len(verify.FAST)
    assert all(line.startswith("[PASS]") for line in lines)


def test_tampered_alpha_fails_fast_suite(monkeypatch):
    real_alpha = topology.alpha
    monkeypatch.setattr(topology, "alpha", lambda t: real_alpha(t) + (1 if max(t.stage_antennas) > 2 else 0))
    results = verify.run_suite("fast", report=None)
    combinatorics = next(r for r in results if r.key == "combinatorics")
    assert not combinatorics.passed
    assert "mismatches" in combinatorics.detail


def test_tampered_beta_fails_fast_suite(monkeypatch):
    monkeypatch.setattr(topology, "beta", lambda t: 1)
    results = verify.run_suite("fast", report=None)
    assert not next(r for r in results if r.key == "beta-oracle").passed


def test_crossing_interpolation():
    from eeas.montecarlo import CurvePoint, SimCurve
    from eeas.strategies import StrategySpec

    pts = [CurvePoint(10.0, 1e-2, 1, 1, 0, 0), CurvePoint(20.0, 1e-4, 1, 1, 0, 0)]
    curve = SimCurve("ber", StrategySpec.parse("fd-af"), topology.Topology.from_antennas([1, 2, 1]), pts)
    assert abs(verify._crossing_db(curve, 1e-3) - 15.0) < 1e-9
    assert verify._crossing_db(curve, 1e-6) is None


def test_unknown_level():
    import pytest

    with pytest.raises(ValueError):
        verify.run_suite("medium")
