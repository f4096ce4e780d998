"""Shape of a multi-hop relay channel: stages, antennas and relay partitions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Mapping, Sequence

__all__ = ["Topology", "TopologyError", "validate", "alpha", "beta"]


class TopologyError(ValueError):
    """Raised when a topology description is inconsistent.

    ``field`` names the offending key so front-ends can report it.
    """

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


@dataclass(frozen=True)
class Topology:
    """An N-hop relay channel.

    Parameters
    ----------
    hop_count : int
        Number of hops N (relay stages + 1). At least 2.
    stage_antennas : tuple of int
        Antenna counts ``(M_0, ..., M_N)``; stage 0 is the source and
        stage N the destination.
    relay_partitions : tuple of tuple of int
        For every relay stage ``n = 1..N-1`` the per-relay antenna counts.
        They must sum to ``M_n``.
    """

    hop_count: int
    stage_antennas: tuple[int, ...]
    relay_partitions: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        n = self.hop_count
        if not isinstance(n, int) or n < 2:
            raise TopologyError(f"hop count must be an integer >= 2, got {n!r}", "hops")
        if len(self.stage_antennas) != n + 1:
            raise TopologyError(
                f"expected {n + 1} stage antenna counts for {n} hops, "
                f"got {len(self.stage_antennas)}",
                "stage_antennas",
            )
        for idx, m in enumerate(self.stage_antennas):
            if not isinstance(m, int) or m < 1:
                raise TopologyError(f"stage {idx} has invalid antenna count {m!r}", "stage_antennas")
        if len(self.relay_partitions) != n - 1:
            raise TopologyError(
                f"expected partitions for {n - 1} relay stages, got {len(self.relay_partitions)}",
                "relay_partitions",
            )
        for stage, part in enumerate(self.relay_partitions, start=1):
            if not part or any(not isinstance(m, int) or m < 1 for m in part):
                raise TopologyError(f"relay stage {stage} has an invalid partition {part!r}", "relay_partitions")
            if sum(part) != self.stage_antennas[stage]:
                raise TopologyError(
                    f"relay stage {stage}: partition {list(part)} sums to {sum(part)}, "
                    f"stage has {self.stage_antennas[stage]} antennas",
                    "relay_partitions",
                )

    @classmethod
    def from_antennas(cls, stage_antennas: Sequence[int]) -> "Topology":
        """One relay per stage holding all of that stage's antennas."""
        m = tuple(int(x) for x in stage_antennas)
        return cls(len(m) - 1, m, tuple((x,) for x in m[1:-1]))

    @property
    def hop_shapes(self) -> list[tuple[int, int]]:
        m = self.stage_antennas
        return [(m[n], m[n + 1]) for n in range(self.hop_count)]

    @property
    def path_count(self) -> int:
        total = 1
        for m in self.stage_antennas:
            total *= m
        return total

    def relay_of(self, stage: int, antenna: int) -> int:
        """Index of the relay (within ``stage``) owning ``antenna``."""
        if stage <= 0 or stage >= self.hop_count:
            return 0
        upper = 0
        for relay, count in enumerate(self.relay_partitions[stage - 1]):
            upper += count
            if antenna < upper:
                return relay
        raise IndexError(f"antenna {antenna} out of range for stage {stage}")

    def to_config(self) -> dict[str, Any]:
        return {
            "hops": self.hop_count,
            "stage_antennas": list(self.stage_antennas),
            "relay_partitions": [list(p) for p in self.relay_partitions],
        }

    def __str__(self) -> str:
        return "-".join(str(m) for m in self.stage_antennas)


def validate(config: Mapping[str, Any]) -> Topology:
    """Build a :class:`Topology` from a parsed key-value description.

    Recognised keys are ``hops``, ``stage_antennas`` and the optional
    ``relay_partitions``. Raises :class:`TopologyError` on any mismatch.
    """
    if "stage_antennas" not in config:
        raise TopologyError("missing key 'stage_antennas'", "stage_antennas")
    raw = config["stage_antennas"]
    if isinstance(raw, (str, bytes)) or not isinstance(raw, Sequence):
        raise TopologyError("'stage_antennas' must be a list of integers", "stage_antennas")
    antennas = tuple(_as_int(v, "stage_antennas") for v in raw)

    hops = config.get("hops", len(antennas) - 1)
    hops = _as_int(hops, "hops")
    if hops < 2:
        raise TopologyError(f"hop count must be >= 2, got {hops}", "hops")

    partitions = config.get("relay_partitions")
    if partitions is None:
        if len(antennas) != hops + 1:
            raise TopologyError(
                f"expected {hops + 1} stage antenna counts for {hops} hops, got {len(antennas)}",
                "stage_antennas",
            )
        partitions = [[m] for m in antennas[1:-1]]
    parts = tuple(tuple(_as_int(v, "relay_partitions") for v in p) for p in partitions)
    return Topology(hops, antennas, parts)


def _as_int(value: Any, field: str) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
        raise TopologyError(f"{field}: expected an integer, got {value!r}", field)
    return int(value)


def alpha(topology: Topology) -> int:
    """Maximum number of edge-disjoint single antenna paths, ``min M_n M_{n+1}``."""
    return min(a * b for a, b in topology.hop_shapes)


def beta(topology: Topology) -> int:
    """Edge-disjoint paths left after removing one antenna per stage.

    ``min (M_n - 1)(M_{n+1} - 1)``; zero when any stage has one antenna.
    """
    return min((a - 1) * (b - 1) for a, b in topology.hop_shapes)
