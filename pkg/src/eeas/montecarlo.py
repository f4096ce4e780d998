"""Outage and BER estimation over an SNR grid, with diversity-order fits.

Work is split into fixed-size chunks addressed by ``(point, chunk)``. Every
chunk draws from its own substreams, so the merged counts depend only on
the inputs and never on how many worker processes ran them.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Callable, Sequence

import numpy as np

from . import qam
from .channel import LANE_BITS, LANE_CHANNEL, LANE_NOISE, RandomStream, reciprocal_view, sample_realization
from .paths import metrics_from_hop_gains, route_coefficients
from .strategies import (
    Kind,
    StrategySpec,
    dstbc_snr,
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
from .topology import Topology

__all__ = [
    "CurvePoint",
    "SimCurve",
    "SlopeFit",
    "InsufficientData",
    "wilson_interval",
    "estimate_outage",
    "estimate_ber",
    "fit_diversity_order",
    "CSV_HEADER",
]

log = logging.getLogger(__name__)

CHUNK_SIZE = 1 << 15
ROUND_CHUNKS = 16
MIN_FIT_EVENTS = 100
CSV_HEADER = ["snr_db", "metric", "strategy", "estimate", "trials", "events", "ci_low", "ci_high", "stream"]
AGGREGATE = "all"


class InsufficientData(ValueError):
    """Fewer than three curve points qualify for a slope fit."""


def wilson_interval(events: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        return 0.0, 1.0
    z = NormalDist().inv_cdf(0.5 + confidence / 2)
    p = events / trials
    denom = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass(frozen=True)
class CurvePoint:
    snr_db: float
    estimate: float
    trials: int
    events: int
    ci_low: float
    ci_high: float

    @classmethod
    def from_counts(cls, snr_db: float, events: int, trials: int) -> "CurvePoint":
        lo, hi = wilson_interval(events, trials)
        est = events / trials if trials else float("nan")
        return cls(float(snr_db), est, int(trials), int(events), lo, hi)


@dataclass
class SimCurve:
    """Estimates along the SNR axis for one topology and strategy.

    ``points`` aggregates all streams. ``streams`` breaks them down where a
    strategy carries more than one (``"1"``/``"2"`` for half-duplex,
    ``"fwd"``/``"rev"`` for two-way). For BER, ``trials`` counts bits; for
    outage it counts fading blocks. The SNR axis is ``10 log10(P)`` with
    unit noise per stage, ``P`` read through the strategy's power model.
    """

    metric: str
    strategy: StrategySpec
    topology: Topology
    points: list[CurvePoint]
    streams: dict[str, list[CurvePoint]] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def snr_db(self) -> np.ndarray:
        return np.array([p.snr_db for p in self.points])

    @property
    def estimates(self) -> np.ndarray:
        return np.array([p.estimate for p in self.points])

    def stream(self, name: str) -> "SimCurve":
        """The curve of a single stream, as its own :class:`SimCurve`."""
        pts = self.points if name == AGGREGATE else self.streams[name]
        return SimCurve(self.metric, self.strategy, self.topology, list(pts), {}, dict(self.meta, stream=name))

    def csv_rows(self) -> list[list[str]]:
        rows = []
        series = [(AGGREGATE, self.points)] + sorted(self.streams.items())
        for name, pts in series:
            for p in pts:
                rows.append(
                    [
                        _fmt(p.snr_db),
                        self.metric,
                        self.strategy.name,
                        _fmt(p.estimate),
                        str(p.trials),
                        str(p.events),
                        _fmt(p.ci_low),
                        _fmt(p.ci_high),
                        name,
                    ]
                )
        return rows


def _fmt(x: float) -> str:
    return format(float(x), ".12g")


@dataclass(frozen=True)
class SlopeFit:
    order_estimate: float
    window: tuple[float, float]
    stderr: float
    n_points: int = 0


def fit_diversity_order(
    curve: SimCurve,
    window: tuple[float, float] | None = None,
    *,
    prob_window: tuple[float, float] | None = None,
    min_events: int = MIN_FIT_EVENTS,
) -> SlopeFit:
    """Least-squares slope of ``-log10(estimate)`` against ``snr_db / 10``.

    A point qualifies if it has at least ``min_events`` events, lies in the
    SNR ``window`` (dB, inclusive) and its estimate lies in ``prob_window``.
    Raises :class:`InsufficientData` with fewer than three qualifying points.
    """
    xs, ys = [], []
    for p in curve.points:
        if p.events < min_events or p.estimate <= 0:
            continue
        if window is not None and not window[0] <= p.snr_db <= window[1]:
            continue
        if prob_window is not None and not prob_window[0] <= p.estimate <= prob_window[1]:
            continue
        xs.append(p.snr_db / 10.0)
        ys.append(-math.log10(p.estimate))
    if len(xs) < 3:
        raise InsufficientData(f"only {len(xs)} qualifying points (need 3)")
    x = np.array(xs)
    y = np.array(ys)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    dof = len(x) - 2
    sxx = float(np.sum((x - x.mean()) ** 2))
    stderr = math.sqrt(float(np.sum(resid**2)) / dof / sxx) if dof > 0 else 0.0
    return SlopeFit(float(slope), (10 * xs[0], 10 * xs[-1]), stderr, len(xs))


# --------------------------------------------------------------------------
# Per-chunk kernels
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class _Task:
    metric: str
    topology: Topology
    strategy: StrategySpec
    power: float
    point: int
    chunk: int
    n: int
    seed: int
    threshold: float = 0.0
    symbols: int = 1


def _stream(task: _Task, lane: int) -> RandomStream:
    return RandomStream(task.seed, (task.point << 32) | task.chunk, lane)


def instantaneous_snr(strategy: StrategySpec, realization, axis_power: float, topology: Topology) -> dict[str, np.ndarray]:
    """Per-stream SNR whose ``log2(1 + snr)`` is the block's mutual information."""
    kind = strategy.kind
    p = strategy.node_power(axis_power, topology)
    if kind is Kind.DSTBC_ALAMOUTI:
        return {AGGREGATE: dstbc_snr(realization, axis_power, strategy.power_model)}
    if kind is Kind.FIXED_PATH:
        return {AGGREGATE: select_fixed(realization, p).metrics.snr}
    if kind is Kind.FD_AF:
        return {AGGREGATE: select_fd(realization, p, strategy.search_space).metrics.snr}
    if kind is Kind.FD_DF:
        sel = select_fd(realization, p, strategy.search_space)
        weakest = np.min(np.abs(route_coefficients(realization, sel.primary)) ** 2, axis=-1)
        return {AGGREGATE: p * weakest}
    if kind is Kind.HD_ALTERNATING:
        sel = select_hd_pair(realization, p)
        return {"1": sel.metrics.snr, "2": sel.secondary_metrics.snr}
    if kind is Kind.TWO_WAY:
        sel = select_twoway(realization, p)
        rev = reciprocal_view(realization)
        g = np.abs(route_coefficients(rev, sel.primary[..., ::-1])) ** 2
        return {"fwd": sel.metrics.snr, "rev": metrics_from_hop_gains(g, p).snr}
    raise ValueError(f"unsupported strategy {kind}")


def _outage_chunk(task: _Task) -> dict[str, tuple[int, int]]:
    real = sample_realization(task.topology, _stream(task, LANE_CHANNEL), batch=task.n)
    snrs = instantaneous_snr(task.strategy, real, task.power, task.topology)
    return {k: (int(np.count_nonzero(v <= task.threshold)), task.n) for k, v in snrs.items()}


def _ber_chunk(task: _Task) -> dict[str, tuple[int, int]]:
    real = sample_realization(task.topology, _stream(task, LANE_CHANNEL), batch=task.n)
    bit_rng = _stream(task, LANE_BITS).generator()
    noise = _stream(task, LANE_NOISE).generator()
    spec = task.strategy
    p = spec.node_power(task.power, task.topology)
    bits = qam.random_bits(bit_rng, (task.n, task.symbols))
    kind = spec.kind
    if kind is Kind.DSTBC_ALAMOUTI:
        res = {AGGREGATE: run_trial_dstbc(real, task.power, bits, noise, spec.power_model)}
    elif kind is Kind.FIXED_PATH:
        res = {AGGREGATE: run_trial_fd(real, select_fixed(real, p), p, bits, noise)}
    elif kind is Kind.FD_AF:
        res = {AGGREGATE: run_trial_fd(real, select_fd(real, p, spec.search_space), p, bits, noise)}
    elif kind is Kind.FD_DF:
        res = {AGGREGATE: run_trial_fd_df(real, select_fd(real, p, spec.search_space), p, bits, noise)}
    elif kind is Kind.HD_ALTERNATING:
        res = run_trial_hd(real, select_hd_pair(real, p), p, bits, noise)
    elif kind is Kind.TWO_WAY:
        bits_back = qam.random_bits(bit_rng, (task.n, task.symbols))
        res = run_trial_twoway(real, select_twoway(real, p), p, bits, bits_back, noise)
    else:
        raise ValueError(f"unsupported strategy {kind}")
    return {k: (r.total_errors, r.bits_per_block * task.n) for k, r in res.items()}


def _run_task(task: _Task) -> dict[str, tuple[int, int]]:
    return _outage_chunk(task) if task.metric == "outage" else _ber_chunk(task)


# --------------------------------------------------------------------------
# Sweep driver
# --------------------------------------------------------------------------

def _sweep(
    make_task: Callable[[int, int, int], _Task],
    n_points: int,
    trials_per_point: int,
    chunk_size: int,
    workers: int,
    min_events: int | None,
    progress: Callable[[str], None] | None,
) -> list[dict[str, list[int]]]:
    """Run chunks round by round and merge counts per point.

    Without ``min_events`` every point runs ``trials_per_point`` trials.
    With it, a point stops after the first round (``ROUND_CHUNKS`` chunks)
    at which its aggregate events reach ``min_events``; the decision only
    sees completed rounds, so it is the same for any worker count.
    """
    n_chunks = -(-trials_per_point // chunk_size)
    sizes = [min(chunk_size, trials_per_point - c * chunk_size) for c in range(n_chunks)]
    totals: list[dict[str, list[int]]] = [{} for _ in range(n_points)]
    next_chunk = [0] * n_points
    active = set(range(n_points))
    per_round = n_chunks if min_events is None else ROUND_CHUNKS

    executor = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        while active:
            tasks = []
            for pt in sorted(active):
                stop = min(n_chunks, next_chunk[pt] + per_round)
                tasks.extend(make_task(pt, c, sizes[c]) for c in range(next_chunk[pt], stop))
                next_chunk[pt] = stop
            if executor is None:
                results = map(_run_task, tasks)
            else:
                results = executor.map(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * workers)))
            for task, counts in zip(tasks, results):
                acc = totals[task.point]
                for name, (ev, tr) in counts.items():
                    cur = acc.setdefault(name, [0, 0])
                    cur[0] += ev
                    cur[1] += tr
            for pt in sorted(active):
                events = sum(v[0] for v in totals[pt].values())
                if next_chunk[pt] >= n_chunks or (min_events is not None and events >= min_events):
                    active.discard(pt)
            if progress is not None:
                done = sum(next_chunk)
                progress(f"{done}/{n_chunks * n_points} chunks, {len(active)} points active")
    finally:
        if executor is not None:
            executor.shutdown()
    return totals


def _assemble(metric, topology, strategy, snr_grid, totals, meta) -> SimCurve:
    points, streams = [], {}
    for snr_db, acc in zip(snr_grid, totals):
        names = sorted(acc)
        ev = sum(acc[n][0] for n in names)
        tr = sum(acc[n][1] for n in names)
        points.append(CurvePoint.from_counts(snr_db, ev, tr))
        if names != [AGGREGATE]:
            for n in names:
                streams.setdefault(n, []).append(CurvePoint.from_counts(snr_db, *acc[n]))
    return SimCurve(metric, strategy, topology, points, streams, meta)


def _check_grid(snr_grid: Sequence[float]) -> list[float]:
    grid = [float(s) for s in snr_grid]
    if not grid or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("SNR grid must be non-empty and strictly increasing")
    return grid


def estimate_outage(
    topology: Topology,
    strategy: StrategySpec,
    rate_bits: float,
    snr_grid: Sequence[float],
    trials_per_point: int,
    master_seed: int,
    *,
    multiplexing_gain: float | None = None,
    workers: int = 1,
    min_events: int | None = None,
    chunk_size: int = CHUNK_SIZE,
    progress: Callable[[str], None] | None = None,
) -> SimCurve:
    """Fraction of fading blocks whose ``log2(1 + snr)`` does not exceed the rate.

    With ``multiplexing_gain`` set, the rate at each point is
    ``r * log2(P)`` instead of the fixed ``rate_bits``. ``trials_per_point``
    is a cap when ``min_events`` is given (see :func:`_sweep`).
    """
    if multiplexing_gain is None and not rate_bits > 0:
        raise ValueError("rate_bits must be positive")
    if trials_per_point < 10**4:
        raise ValueError("outage estimation needs at least 1e4 trials per point")
    strategy.check(topology)
    grid = _check_grid(snr_grid)

    def make(pt, chunk, n):
        power = 10 ** (grid[pt] / 10)
        rate = rate_bits if multiplexing_gain is None else multiplexing_gain * math.log2(power)
        return _Task("outage", topology, strategy, power, pt, chunk, n, master_seed, threshold=2.0**rate - 1.0)

    totals = _sweep(make, len(grid), trials_per_point, chunk_size, workers, min_events, progress)
    meta = {
        "rate_bits": rate_bits,
        "multiplexing_gain": multiplexing_gain,
        "master_seed": master_seed,
        "snr_axis": "10*log10(P), unit noise per stage",
    }
    return _assemble("outage", topology, strategy, grid, totals, meta)


def estimate_ber(
    topology: Topology,
    strategy: StrategySpec,
    snr_grid: Sequence[float],
    symbols_per_trial: int,
    trials_per_point: int,
    master_seed: int,
    *,
    workers: int = 1,
    min_events: int | None = None,
    chunk_size: int = CHUNK_SIZE,
    progress: Callable[[str], None] | None = None,
) -> SimCurve:
    """Uncoded Gray 4-QAM bit error rate, one fading block per trial."""
    if symbols_per_trial < 1:
        raise ValueError("symbols_per_trial must be >= 1")
    if strategy.kind is Kind.DSTBC_ALAMOUTI and symbols_per_trial % 2:
        raise ValueError("the Alamouti baseline needs an even number of symbols per trial")
    if strategy.kind is Kind.HD_ALTERNATING and symbols_per_trial < 2:
        raise ValueError("half-duplex alternation needs at least 2 symbols per trial")
    strategy.check(topology)
    grid = _check_grid(snr_grid)

    def make(pt, chunk, n):
        power = 10 ** (grid[pt] / 10)
        return _Task("ber", topology, strategy, power, pt, chunk, n, master_seed, symbols=symbols_per_trial)

    totals = _sweep(make, len(grid), trials_per_point, chunk_size, workers, min_events, progress)
    meta = {
        "symbols_per_trial": symbols_per_trial,
        "master_seed": master_seed,
        "snr_axis": "10*log10(P), unit noise per stage",
    }
    return _assemble("ber", topology, strategy, grid, totals, meta)
