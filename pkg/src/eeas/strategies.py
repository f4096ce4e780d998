"""Path selection rules and per-block transceiver chains.

Every function accepts a single :class:`ChannelRealization` or a batch of
them (leading axes on the hop matrices). Selections then hold index arrays
with the same leading axes, and trial functions return per-block counts.

``power`` arguments of the selection and trial functions are the transmit
power of each active node. :meth:`StrategySpec.node_power` converts an
x-axis power value to that, according to the power model.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import qam
from .channel import ChannelRealization, reciprocal_view
from .paths import (
    Path,
    PathMetrics,
    af_scales,
    construct_independent_set,
    hop_gains,
    metrics_from_hop_gains,
    path_table,
    route_coefficients,
)
from .topology import Topology, beta

__all__ = [
    "Kind",
    "SearchSpace",
    "PowerModel",
    "StrategySpec",
    "Selection",
    "TrialResult",
    "NoDisjointPath",
    "UnsupportedTopology",
    "select_fd",
    "select_fixed",
    "select_hd_pair",
    "select_twoway",
    "propagate_af",
    "run_trial_fd",
    "run_trial_hd",
    "run_trial_twoway",
    "run_trial_fd_df",
    "run_trial_dstbc",
    "dstbc_snr",
]

DSTBC_TOPOLOGY = (1, 2, 1)

# Upper bound on batch * paths elements evaluated at once.
_BLOCK_ELEMENTS = 1 << 20


class NoDisjointPath(ValueError):
    """No second path avoids every antenna of the first (beta == 0)."""


class UnsupportedTopology(ValueError):
    """The strategy is not defined for this topology."""


class Kind(str, Enum):
    FD_AF = "fd-af"
    FD_DF = "fd-df"
    HD_ALTERNATING = "hd"
    TWO_WAY = "two-way"
    FIXED_PATH = "fixed"
    DSTBC_ALAMOUTI = "dstbc"


class SearchSpace(str, Enum):
    ALL_PATHS = "all"
    INDEPENDENT_ONLY = "independent"


class PowerModel(str, Enum):
    PER_NODE = "per-node"
    TOTAL = "total"


@dataclass(frozen=True)
class StrategySpec:
    kind: Kind
    search_space: SearchSpace = SearchSpace.ALL_PATHS
    power_model: PowerModel = PowerModel.PER_NODE

    @classmethod
    def parse(cls, kind: str, search: str = "all", power_model: str = "per-node") -> "StrategySpec":
        return cls(Kind(kind), SearchSpace(search), PowerModel(power_model))

    @property
    def name(self) -> str:
        return self.kind.value

    def check(self, topology: Topology) -> None:
        """Raise if this strategy cannot run on ``topology``."""
        if self.kind is Kind.DSTBC_ALAMOUTI and topology.stage_antennas != DSTBC_TOPOLOGY:
            raise UnsupportedTopology(
                f"distributed Alamouti baseline needs stage antennas {list(DSTBC_TOPOLOGY)}, "
                f"got {list(topology.stage_antennas)}"
            )
        if self.kind is Kind.HD_ALTERNATING and beta(topology) < 1:
            raise NoDisjointPath(f"beta = 0 for topology {topology}: no antenna-disjoint second path")

    def node_power(self, power: float, topology: Topology) -> float:
        """Transmit power of each active node on a path for axis power ``power``.

        Under the total-power model the budget is shared equally by the N
        transmitters (source and one antenna per relay stage).
        """
        if self.power_model is PowerModel.TOTAL:
            return power / topology.hop_count
        return power

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "search": self.search_space.value, "power_model": self.power_model.value}


@dataclass(frozen=True)
class Selection:
    """Chosen path(s) as antenna-index arrays plus their AF metrics."""

    primary: np.ndarray
    metrics: PathMetrics
    secondary: np.ndarray | None = None
    secondary_metrics: PathMetrics | None = None

    @property
    def primary_path(self) -> Path:
        return Path(np.asarray(self.primary).reshape(-1))

    @property
    def secondary_path(self) -> Path | None:
        if self.secondary is None:
            return None
        return Path(np.asarray(self.secondary).reshape(-1))


@dataclass(frozen=True)
class TrialResult:
    """Detected bits and per-block bit error counts of one stream."""

    detected_bits: np.ndarray
    bit_errors: np.ndarray
    bits_per_block: int

    @property
    def total_errors(self) -> int:
        return int(np.sum(self.bit_errors))


# --------------------------------------------------------------------------
# Selection
# --------------------------------------------------------------------------

def _topology_of(realization: ChannelRealization) -> Topology:
    return Topology.from_antennas(realization.stage_antennas)


def _candidates(realization: ChannelRealization, search_space: SearchSpace) -> np.ndarray:
    topo = _topology_of(realization)
    if SearchSpace(search_space) is SearchSpace.INDEPENDENT_ONLY:
        return path_table(topo, construct_independent_set(topo))
    return path_table(topo)


def _argmax_over(realization, table, power, key="snr", exclude=None):
    """Best path per block and its metrics.

    Paths are scanned in table order and a later path only wins on a strict
    improvement of ``key`` (``"snr"`` or ``"gain"``), so ties go to the
    earliest (lexicographically smallest) row. ``exclude`` is an optional
    antenna-index array; paths sharing an antenna with it at any stage are
    skipped.
    """
    batch = realization.batch_shape
    size = int(np.prod(batch)) if batch else 1
    step = max(1, _BLOCK_ELEMENTS // max(size, 1))
    best_val = np.full(batch, -np.inf)
    best_idx = np.zeros(batch, dtype=np.intp)
    best = [np.zeros(batch) for _ in range(3)]
    for start in range(0, len(table), step):
        rows = table[start : start + step]
        met = metrics_from_hop_gains(hop_gains(realization, rows), power)
        val = getattr(met, key)
        if exclude is not None:
            clash = np.any(rows == exclude[..., None, :], axis=-1)
            val = np.where(clash, -np.inf, val)
        local = np.argmax(val, axis=-1)[..., None]
        local_val = np.take_along_axis(val, local, axis=-1)[..., 0]
        better = local_val > best_val
        best_val = np.where(better, local_val, best_val)
        best_idx = np.where(better, local[..., 0] + start, best_idx)
        for k, field in enumerate((met.gain, met.noise_var, met.snr)):
            best[k] = np.where(better, np.take_along_axis(field, local, axis=-1)[..., 0], best[k])
    if not batch:
        best = [float(b) for b in best]
    return table[best_idx], PathMetrics(*best)


def _metrics_on(realization: ChannelRealization, route: np.ndarray, power: float) -> PathMetrics:
    g = np.abs(route_coefficients(realization, route)) ** 2
    met = metrics_from_hop_gains(g, power)
    if np.ndim(met.snr) == 0:
        return PathMetrics(float(met.gain), float(met.noise_var), float(met.snr))
    return met


def select_fd(
    realization: ChannelRealization, power: float, search_space: SearchSpace = SearchSpace.ALL_PATHS
) -> Selection:
    """Full-duplex rule: the path with the largest end-to-end AF SNR."""
    route, met = _argmax_over(realization, _candidates(realization, search_space), power)
    return Selection(route, met)


def select_fixed(realization: ChannelRealization, power: float, path: Path | None = None) -> Selection:
    """Baseline without selection: always ``path`` (antenna 0 everywhere by default)."""
    if path is None:
        path = Path([0] * (realization.hop_count + 1))
    route = np.broadcast_to(np.array(path.antenna_indices), realization.batch_shape + (realization.hop_count + 1,))
    return Selection(route, _metrics_on(realization, route, power))


def select_hd_pair(realization: ChannelRealization, power: float) -> Selection:
    """Half-duplex rule: best path plus the best path avoiding all its antennas."""
    if beta(_topology_of(realization)) < 1:
        raise NoDisjointPath("some stage has a single antenna; no antenna-disjoint second path exists")
    table = path_table(_topology_of(realization))
    first, first_met = _argmax_over(realization, table, power)
    second, second_met = _argmax_over(realization, table, power, exclude=first)
    return Selection(first, first_met, second, second_met)


def select_twoway(realization: ChannelRealization, power: float) -> Selection:
    """Two-way rule: the path with the largest product of squared hop gains.

    The product is direction-agnostic under reciprocity, so the reversed
    path is the choice for the opposite direction as well. Metrics are for
    the forward direction.
    """
    route, met = _argmax_over(realization, path_table(_topology_of(realization)), power, key="gain")
    return Selection(route, met)


# --------------------------------------------------------------------------
# Transceiver chains
# --------------------------------------------------------------------------

def _cn(rng: np.random.Generator, shape) -> np.ndarray:
    ri = rng.standard_normal(tuple(shape) + (2,))
    return (ri[..., 0] + 1j * ri[..., 1]) * np.sqrt(0.5)


def propagate_af(
    realization: ChannelRealization,
    route: np.ndarray,
    power: float,
    symbols: np.ndarray,
    rng: np.random.Generator,
    noise_scale: float = 1.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Send ``symbols`` along ``route`` with AF at every relay antenna.

    Each stage adds its own unit-variance noise before scaling by its AF
    factor, so the destination noise is exactly the weighted sum of the
    per-stage noise samples. Returns ``(received, effective_gain)`` where
    ``effective_gain`` is the scalar multiplying the symbols.
    """
    coeffs = route_coefficients(realization, route)
    mu = af_scales(power, realization.hop_count)
    symbols = np.asarray(symbols)
    t = np.sqrt(power) * symbols
    for n in range(realization.hop_count):
        r = coeffs[..., n, None] * t + noise_scale * _cn(rng, symbols.shape)
        if n + 1 < realization.hop_count:
            t = np.sqrt(mu[n + 1]) * r
    effective = np.sqrt(power * np.prod(mu)) * np.prod(coeffs, axis=-1)
    return r, effective


def _count_errors(sent: np.ndarray, detected: np.ndarray) -> np.ndarray:
    return np.sum(sent != detected, axis=(-1, -2))


def run_trial_fd(
    realization: ChannelRealization,
    selection: Selection,
    power: float,
    bits: np.ndarray,
    rng: np.random.Generator,
    noise_scale: float = 1.0,
) -> TrialResult:
    """One block of 4-QAM symbols over the selected AF path, coherent ML detection.

    ``bits`` has shape ``batch_shape + (symbols, 2)``.
    """
    received, eff = propagate_af(realization, selection.primary, power, qam.modulate(bits), rng, noise_scale)
    detected = qam.detect(received, eff[..., None])
    return TrialResult(detected, _count_errors(bits, detected), 2 * bits.shape[-2])


def run_trial_hd(
    realization: ChannelRealization,
    selection: Selection,
    power: float,
    bits: np.ndarray,
    rng: np.random.Generator,
    noise_scale: float = 1.0,
) -> dict[str, TrialResult]:
    """Alternating two-path half-duplex block.

    Symbol ``t`` (0-based) enters in slot ``t``; even slots ride the best
    path and odd slots the antenna-disjoint second path, so one new symbol
    is delivered per slot. Returns stream ``"1"`` and ``"2"`` results.
    """
    if selection.secondary is None:
        raise ValueError("half-duplex trial needs a selection with a secondary path")
    x = qam.modulate(bits)
    out = {}
    for name, route, sl in (("1", selection.primary, slice(0, None, 2)), ("2", selection.secondary, slice(1, None, 2))):
        sent = bits[..., sl, :]
        received, eff = propagate_af(realization, route, power, x[..., sl], rng, noise_scale)
        detected = qam.detect(received, eff[..., None])
        out[name] = TrialResult(detected, _count_errors(sent, detected), 2 * sent.shape[-2])
    return out


def run_trial_twoway(
    realization: ChannelRealization,
    selection: Selection,
    power: float,
    bits_t1: np.ndarray,
    bits_t2: np.ndarray,
    rng: np.random.Generator,
    noise_scale: float = 1.0,
) -> dict[str, TrialResult]:
    """Both directions over the shared path after self-interference removal.

    Each terminal knows its own transmitted symbols, so only the direct
    term of the other terminal's signal plus that direction's forwarded
    noise remains. ``"fwd"`` is source to destination, ``"rev"`` the reverse.
    """
    out = {}
    fwd_rx, fwd_eff = propagate_af(realization, selection.primary, power, qam.modulate(bits_t1), rng, noise_scale)
    det = qam.detect(fwd_rx, fwd_eff[..., None])
    out["fwd"] = TrialResult(det, _count_errors(bits_t1, det), 2 * bits_t1.shape[-2])
    rev_route = np.asarray(selection.primary)[..., ::-1]
    rev_rx, rev_eff = propagate_af(
        reciprocal_view(realization), rev_route, power, qam.modulate(bits_t2), rng, noise_scale
    )
    det = qam.detect(rev_rx, rev_eff[..., None])
    out["rev"] = TrialResult(det, _count_errors(bits_t2, det), 2 * bits_t2.shape[-2])
    return out


def run_trial_fd_df(
    realization: ChannelRealization,
    selection: Selection,
    power: float,
    bits: np.ndarray,
    rng: np.random.Generator,
    noise_scale: float = 1.0,
) -> TrialResult:
    """Decode-and-forward on the selected path.

    Every relay antenna detects its hop's symbols by hard decision and
    re-modulates them at full node power; no coding.
    """
    coeffs = route_coefficients(realization, selection.primary)
    amp = np.sqrt(power)
    decided = bits
    for n in range(realization.hop_count):
        h = amp * coeffs[..., n, None]
        received = h * qam.modulate(decided) + noise_scale * _cn(rng, bits.shape[:-1])
        decided = qam.detect(received, h)
    return TrialResult(decided, _count_errors(bits, decided), 2 * bits.shape[-2])


def _dstbc_powers(power: float, power_model: PowerModel) -> tuple[float, float]:
    """(source power, power of each of the two relay antennas)."""
    if PowerModel(power_model) is PowerModel.TOTAL:
        return power / 2.0, power / 4.0
    return power, power


def _dstbc_equivalent(realization: ChannelRealization, power: float, power_model: PowerModel):
    if realization.stage_antennas != DSTBC_TOPOLOGY:
        raise UnsupportedTopology(
            f"distributed Alamouti baseline needs stage antennas {list(DSTBC_TOPOLOGY)}, "
            f"got {list(realization.stage_antennas)}"
        )
    p1, p2 = _dstbc_powers(power, power_model)
    f = realization.hops[0][..., 0, :]
    g = realization.hops[1][..., :, 0]
    c = np.sqrt(p2 / (p1 + 1.0))
    h1 = c * np.sqrt(p1) * g[..., 0] * f[..., 0]
    h2 = c * np.sqrt(p1) * g[..., 1] * np.conj(f[..., 1])
    noise_var = 1.0 + c**2 * (np.abs(g[..., 0]) ** 2 + np.abs(g[..., 1]) ** 2)
    return f, g, c, p1, h1, h2, noise_var


def dstbc_snr(realization: ChannelRealization, power: float, power_model: PowerModel = PowerModel.PER_NODE):
    """Post-combining SNR of the distributed Alamouti baseline."""
    *_, h1, h2, noise_var = _dstbc_equivalent(realization, power, power_model)
    return (np.abs(h1) ** 2 + np.abs(h2) ** 2) / noise_var


def run_trial_dstbc(
    realization: ChannelRealization,
    power: float,
    bits: np.ndarray,
    rng: np.random.Generator,
    power_model: PowerModel = PowerModel.PER_NODE,
    noise_scale: float = 1.0,
) -> TrialResult:
    """Two-relay distributed Alamouti block on the 1-2-1 topology.

    The source broadcasts ``s1, s2`` in two slots. Relay antenna 0 forwards
    its scaled receptions unchanged; antenna 1 forwards ``(-r(2)*, r(1)*)``.
    The destination therefore sees an Alamouti code with equivalent gains
    ``c sqrt(P1) g0 f0`` and ``c sqrt(P1) g1 conj(f1)`` and white noise,
    which linear combining decodes symbol by symbol.

    ``power`` is read per ``power_model``: per node, or a total split half
    to the source and half across the two relay antennas.
    """
    if bits.shape[-2] % 2:
        raise ValueError("the Alamouti block needs an even number of symbols")
    f, g, c, p1, h1, h2, _ = _dstbc_equivalent(realization, power, power_model)
    x = qam.modulate(bits)
    s1, s2 = x[..., 0::2], x[..., 1::2]
    shape = s1.shape
    amp = np.sqrt(p1)
    fb = lambda a: a[..., None]  # noqa: E731
    # Relay receptions in slots 1 and 2.
    r0_1 = amp * fb(f[..., 0]) * s1 + noise_scale * _cn(rng, shape)
    r0_2 = amp * fb(f[..., 0]) * s2 + noise_scale * _cn(rng, shape)
    r1_1 = amp * fb(f[..., 1]) * s1 + noise_scale * _cn(rng, shape)
    r1_2 = amp * fb(f[..., 1]) * s2 + noise_scale * _cn(rng, shape)
    y1 = c * (fb(g[..., 0]) * r0_1 - fb(g[..., 1]) * np.conj(r1_2)) + noise_scale * _cn(rng, shape)
    y2 = c * (fb(g[..., 0]) * r0_2 + fb(g[..., 1]) * np.conj(r1_1)) + noise_scale * _cn(rng, shape)
    h1, h2 = fb(h1), fb(h2)
    z1 = np.conj(h1) * y1 + h2 * np.conj(y2)
    z2 = np.conj(h1) * y2 - h2 * np.conj(y1)
    detected = np.empty_like(bits)
    detected[..., 0::2, :] = qam.demodulate(z1)
    detected[..., 1::2, :] = qam.demodulate(z2)
    return TrialResult(detected, _count_errors(bits, detected), 2 * bits.shape[-2])
