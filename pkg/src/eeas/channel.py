"""Block-fading channel draws with reproducible random substreams."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .topology import Topology

__all__ = ["RandomStream", "ChannelRealization", "sample_realization", "reciprocal_view"]

# Lane offsets keep channel, payload and noise draws on separate substreams,
# so e.g. every strategy sees the same channels for a given stream index.
LANE_CHANNEL = 0
LANE_BITS = 1
LANE_NOISE = 2


@dataclass(frozen=True)
class RandomStream:
    """Addressable random substream.

    Identical ``(master_seed, stream_index, lane)`` always yields the same
    sequence, independent of process or worker layout. Distinct indices map
    to independent ``SeedSequence`` children.
    """

    master_seed: int
    stream_index: int = 0
    lane: int = 0

    def __post_init__(self):
        if not 0 <= self.master_seed < 2**64:
            raise ValueError(f"master seed must fit in 64 unsigned bits, got {self.master_seed}")
        if self.stream_index < 0 or self.lane < 0:
            raise ValueError("stream index and lane must be non-negative")

    def with_lane(self, lane: int) -> "RandomStream":
        return RandomStream(self.master_seed, self.stream_index, lane)

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.master_seed, spawn_key=(self.stream_index, self.lane))
        return np.random.Generator(np.random.PCG64(seq))


@dataclass(frozen=True)
class ChannelRealization:
    """Hop matrices of one (or a batch of) coherence block(s).

    ``hops[n][..., i, j]`` is the gain from antenna ``i`` of stage ``n`` to
    antenna ``j`` of stage ``n + 1``. Leading axes, if any, index a batch of
    independent blocks.
    """

    hops: tuple[np.ndarray, ...]

    @property
    def hop_count(self) -> int:
        return len(self.hops)

    @property
    def batch_shape(self) -> tuple[int, ...]:
        return self.hops[0].shape[:-2]

    @property
    def stage_antennas(self) -> tuple[int, ...]:
        return tuple(h.shape[-2] for h in self.hops) + (self.hops[-1].shape[-1],)

    @classmethod
    def from_matrices(cls, matrices: Sequence[np.ndarray]) -> "ChannelRealization":
        hops = tuple(np.asarray(m, dtype=complex) for m in matrices)
        for a, b in zip(hops, hops[1:]):
            if a.shape[-1] != b.shape[-2]:
                raise ValueError("adjacent hop matrices disagree on the shared stage size")
        return cls(hops)

    def __getitem__(self, item) -> "ChannelRealization":
        """Select blocks along the batch axis."""
        return ChannelRealization(tuple(h[item] for h in self.hops))


def sample_realization(
    topology: Topology, stream: RandomStream | np.random.Generator, batch: int | None = None
) -> ChannelRealization:
    """Draw i.i.d. CN(0, 1) hop matrices for ``batch`` blocks (or a single one)."""
    rng = stream.generator() if isinstance(stream, RandomStream) else stream
    lead = () if batch is None else (batch,)
    hops = []
    for rows, cols in topology.hop_shapes:
        ri = rng.standard_normal(lead + (rows, cols, 2))
        ri *= np.sqrt(0.5)
        hops.append(ri.view(np.complex128)[..., 0])
    return ChannelRealization(tuple(hops))


def reciprocal_view(realization: ChannelRealization) -> ChannelRealization:
    """The destination-to-source direction under reciprocity.

    Reverse hop ``k`` is the transpose of forward hop ``N - 1 - k``; applying
    this twice returns the original matrices.
    """
    return ChannelRealization(tuple(np.swapaxes(h, -1, -2) for h in reversed(realization.hops)))
