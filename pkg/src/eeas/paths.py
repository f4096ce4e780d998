"""Single antenna paths: enumeration, edge-disjoint sets and AF link metrics."""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .channel import ChannelRealization
from .topology import Topology

__all__ = [
    "Path",
    "PathMetrics",
    "enumerate_paths",
    "path_table",
    "construct_independent_set",
    "verify_edge_disjoint",
    "max_flow_alpha_oracle",
    "af_scales",
    "path_metrics",
    "hop_gains",
    "route_coefficients",
    "metrics_from_hop_gains",
]


@dataclass(frozen=True, order=True)
class Path:
    """One antenna index per stage, source first. Indices are 0-based."""

    antenna_indices: tuple[int, ...]

    def __init__(self, antenna_indices: Iterable[int]):
        object.__setattr__(self, "antenna_indices", tuple(int(i) for i in antenna_indices))

    @property
    def hop_count(self) -> int:
        return len(self.antenna_indices) - 1

    def edges(self) -> list[tuple[int, int]]:
        """Edge ``(i_n, i_{n+1})`` of every hop ``n``."""
        a = self.antenna_indices
        return [(a[n], a[n + 1]) for n in range(len(a) - 1)]

    def reversed(self) -> "Path":
        return Path(self.antenna_indices[::-1])

    def is_valid_for(self, topology: Topology) -> bool:
        m = topology.stage_antennas
        return len(self.antenna_indices) == len(m) and all(
            0 <= i < mi for i, mi in zip(self.antenna_indices, m)
        )

    @classmethod
    def parse(cls, text: str) -> "Path":
        return cls(int(tok) for tok in text.split("-"))

    def __str__(self) -> str:
        return "-".join(str(i) for i in self.antenna_indices)


@dataclass(frozen=True)
class PathMetrics:
    """End-to-end figures of an AF path.

    ``gain`` is the product of per-hop squared magnitudes, ``noise_var`` the
    variance of the accumulated forwarded noise at the destination and
    ``snr`` the selection metric. Fields are arrays when evaluated on a batch.
    """

    gain: float | np.ndarray
    noise_var: float | np.ndarray
    snr: float | np.ndarray


def enumerate_paths(topology: Topology) -> list[Path]:
    """All ``prod M_n`` paths in lexicographic order."""
    return [Path(p) for p in itertools.product(*(range(m) for m in topology.stage_antennas))]


@lru_cache(maxsize=64)
def _table(stage_antennas: tuple[int, ...]) -> np.ndarray:
    grids = np.meshgrid(*(np.arange(m) for m in stage_antennas), indexing="ij")
    table = np.stack([g.ravel() for g in grids], axis=1)
    table.setflags(write=False)
    return table


def path_table(topology: Topology, paths: Sequence[Path] | None = None) -> np.ndarray:
    """Integer array ``(P, N + 1)`` of antenna indices.

    Without ``paths`` this is the full lexicographic enumeration; row ``k``
    matches ``enumerate_paths(topology)[k]``.
    """
    if paths is None:
        return _table(topology.stage_antennas)
    return np.array([p.antenna_indices for p in paths], dtype=np.intp).reshape(-1, topology.hop_count + 1)


# --------------------------------------------------------------------------
# Edge-disjoint path sets
# --------------------------------------------------------------------------

def construct_independent_set(topology: Topology, method: str = "maxflow") -> list[Path]:
    """A deterministic set of ``alpha(topology)`` pairwise edge-disjoint paths.

    ``method="maxflow"`` decomposes a unit-capacity maximum flow found with
    lowest-index breadth-first augmentation. ``method="inductive"`` extends
    a balanced set hop by hop, reassigning the last edges so that every
    antenna of the newest stage terminates ``floor`` or ``ceil`` of
    ``alpha_k / M_k`` paths before the next hop is appended.
    """
    if method == "maxflow":
        return _maxflow_decomposition(topology)
    if method == "inductive":
        return _inductive_construction(topology)
    raise ValueError(f"unknown construction method {method!r}")


def _maxflow_decomposition(topology: Topology) -> list[Path]:
    m = topology.stage_antennas
    n_hops = topology.hop_count
    # Vertex ids: 0 = super source, 1 = super sink, stage antennas after.
    offsets = np.concatenate(([2], 2 + np.cumsum(m)))
    n_vertices = int(offsets[-1])

    def vid(stage: int, ant: int) -> int:
        return int(offsets[stage]) + ant

    cap: dict[tuple[int, int], int] = {}
    adj: list[list[int]] = [[] for _ in range(n_vertices)]

    def add_edge(u: int, v: int, c: int):
        cap[(u, v)] = cap.get((u, v), 0) + c
        cap.setdefault((v, u), 0)
        adj[u].append(v)
        adj[v].append(u)

    big = max(a * b for a, b in topology.hop_shapes)
    for i in range(m[0]):
        add_edge(0, vid(0, i), big)
    for n in range(n_hops):
        for i in range(m[n]):
            for j in range(m[n + 1]):
                add_edge(vid(n, i), vid(n + 1, j), 1)
    for j in range(m[-1]):
        add_edge(vid(n_hops, j), 1, big)
    for nbrs in adj:
        nbrs.sort()

    # Edmonds-Karp; sorted adjacency keeps the augmentation order fixed.
    while True:
        parent = [-1] * n_vertices
        parent[0] = 0
        queue = deque([0])
        while queue and parent[1] < 0:
            u = queue.popleft()
            for v in adj[u]:
                if parent[v] < 0 and cap[(u, v)] > 0:
                    parent[v] = u
                    queue.append(v)
        if parent[1] < 0:
            break
        v = 1
        while v != 0:
            u = parent[v]
            cap[(u, v)] -= 1
            cap[(v, u)] += 1
            v = u

    # Flow on a unit inter-stage edge is visible as residual capacity on its reverse.
    flow = {}
    for n in range(n_hops):
        for i in range(m[n]):
            for j in range(m[n + 1]):
                flow[(n, i, j)] = cap[(vid(n + 1, j), vid(n, i))]

    paths = []
    while True:
        start = next((i for i in range(m[0]) if any(flow[(0, i, j)] for j in range(m[1]))), None)
        if start is None:
            break
        route = [start]
        for n in range(n_hops):
            i = route[-1]
            j = next(j for j in range(m[n + 1]) if flow[(n, i, j)])
            flow[(n, i, j)] -= 1
            route.append(j)
        paths.append(Path(route))
    return sorted(paths)


def _inductive_construction(topology: Topology) -> list[Path]:
    m = topology.stage_antennas
    # One-hop channel: every edge is its own path.
    current = [[i, j] for i in range(m[0]) for j in range(m[1])]
    for k in range(1, topology.hop_count):
        current = _rebalance_last_edge(current, m[k])
        by_end: dict[int, list[list[int]]] = {}
        for p in current:
            by_end.setdefault(p[-1], []).append(p)
        extended = []
        for i in range(m[k]):
            for j, p in enumerate(by_end.get(i, [])[: m[k + 1]]):
                extended.append(p + [j])
        current = extended
    return sorted(Path(p) for p in current)


def _rebalance_last_edge(paths: list[list[int]], m_last: int) -> list[list[int]]:
    """Reassign final antennas so terminal loads differ by at most one.

    Paths sharing a penultimate antenna get distinct final antennas, chosen
    as the currently least-loaded ones (lowest index on ties); that keeps
    the last-hop edges distinct and the load spread within one.
    """
    groups: dict[int, list[list[int]]] = {}
    for p in paths:
        groups.setdefault(p[-2], []).append(p)
    load = [0] * m_last
    out = []
    for prev in sorted(groups):
        members = groups[prev]
        targets = sorted(range(m_last), key=lambda a: (load[a], a))[: len(members)]
        for p, t in zip(members, sorted(targets)):
            load[t] += 1
            out.append(p[:-1] + [t])
    return out


def verify_edge_disjoint(paths: Sequence[Path]) -> bool:
    """True iff no hop edge is used by two of ``paths``."""
    seen: set[tuple[int, int, int]] = set()
    for p in paths:
        for n, (i, j) in enumerate(p.edges()):
            if (n, i, j) in seen:
                return False
            seen.add((n, i, j))
    return True


def max_flow_alpha_oracle(topology: Topology) -> int:
    """Edge-disjoint path count from a generic max-flow solver.

    Independent of :func:`construct_independent_set`: the layered graph is
    handed to networkx with unit edge capacities and uncapacitated vertices.
    """
    import networkx as nx

    g = nx.DiGraph()
    m = topology.stage_antennas
    for i in range(m[0]):
        g.add_edge("s", (0, i))
    for n in range(topology.hop_count):
        for i in range(m[n]):
            for j in range(m[n + 1]):
                g.add_edge((n, i), (n + 1, j), capacity=1)
    for j in range(m[-1]):
        g.add_edge((topology.hop_count, j), "t")
    value, _ = nx.maximum_flow(g, "s", "t")
    return int(value)


# --------------------------------------------------------------------------
# AF metrics
# --------------------------------------------------------------------------

def af_scales(power: float, hop_count: int) -> list[float]:
    """Per-stage AF scaling ``[1, P/(P+1), ..., P/(P+1)]`` of length N.

    With unit-variance fading and noise a relay's average input power is
    ``P + 1``, so this factor keeps its average output power at ``P``.
    """
    if power <= 0:
        raise ValueError(f"transmit power must be positive, got {power}")
    return [1.0] + [power / (power + 1.0)] * (hop_count - 1)


def hop_gains(realization: ChannelRealization, table: np.ndarray) -> np.ndarray:
    """Squared hop magnitudes along each path of ``table``.

    Returns shape ``batch_shape + (P, N)``.
    """
    cols = []
    for n, h in enumerate(realization.hops):
        cols.append(np.abs(h[..., table[:, n], table[:, n + 1]]) ** 2)
    return np.stack(cols, axis=-1)


def route_coefficients(realization: ChannelRealization, route: np.ndarray) -> np.ndarray:
    """Complex hop coefficients along ``route`` (antenna indices, last axis).

    ``route`` has shape ``batch_shape + (N + 1,)`` (or just ``(N + 1,)`` to
    use one path for every block). Returns ``batch_shape + (N,)``.
    """
    route = np.asarray(route)
    batch = realization.batch_shape
    route = np.broadcast_to(route, batch + (realization.hop_count + 1,))
    flat_route = route.reshape(-1, route.shape[-1])
    rows = np.arange(flat_route.shape[0])
    cols = []
    for n, h in enumerate(realization.hops):
        flat_h = h.reshape((-1,) + h.shape[-2:])
        cols.append(flat_h[rows, flat_route[:, n], flat_route[:, n + 1]])
    return np.stack(cols, axis=-1).reshape(batch + (realization.hop_count,))


def metrics_from_hop_gains(gains: np.ndarray, power: float) -> PathMetrics:
    """Apply the AF gain/noise/SNR formulas to squared hop gains (last axis = hop)."""
    n_hops = gains.shape[-1]
    mu = af_scales(power, n_hops)
    gain = np.prod(gains, axis=-1)
    # Noise seen at stage n+1 is mu_n |h_n|^2 times that at stage n, plus fresh unit noise.
    noise_var = np.ones(gains.shape[:-1])
    for n in range(1, n_hops):
        noise_var = mu[n] * gains[..., n] * noise_var + 1.0
    snr = power * float(np.prod(mu)) * gain / noise_var
    return PathMetrics(gain, noise_var, snr)


def path_metrics(realization: ChannelRealization, path: Path, power: float) -> PathMetrics:
    """Gain, forwarded-noise variance and SNR of ``path`` under AF."""
    g = hop_gains(realization, np.array([path.antenna_indices]))[..., 0, :]
    met = metrics_from_hop_gains(g, power)
    if np.ndim(met.gain) == 0:
        return PathMetrics(float(met.gain), float(met.noise_var), float(met.snr))
    return met
