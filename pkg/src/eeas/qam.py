"""Gray-mapped 4-QAM with unit average symbol energy."""

import numpy as np

_SCALE = 1.0 / np.sqrt(2.0)


def random_bits(rng: np.random.Generator, shape) -> np.ndarray:
    """Uniform bits with a trailing axis of 2 (one 4-QAM symbol per row)."""
    return rng.integers(0, 2, size=tuple(np.atleast_1d(shape)) + (2,), dtype=np.int8)


def modulate(bits: np.ndarray) -> np.ndarray:
    """Bit pairs ``(b0, b1)`` -> ``((1 - 2 b0) + 1j (1 - 2 b1)) / sqrt(2)``."""
    bits = np.asarray(bits)
    return ((1 - 2 * bits[..., 0]) + 1j * (1 - 2 * bits[..., 1])) * _SCALE


def demodulate(z: np.ndarray) -> np.ndarray:
    """Minimum-distance decisions on already co-phased samples."""
    return np.stack([(z.real < 0), (z.imag < 0)], axis=-1).astype(np.int8)


def detect(received: np.ndarray, gain: np.ndarray) -> np.ndarray:
    """ML detection of ``received = gain * x + noise`` with circular noise.

    Multiplying by ``conj(gain)`` rotates the constellation back without
    changing the per-axis decision boundaries.
    """
    return demodulate(np.conj(gain) * received)
