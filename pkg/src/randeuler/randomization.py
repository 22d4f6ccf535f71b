"""Per-path random streams.

Every path owns generators derived from ``(master_seed, path_index, purpose)``
through :class:`numpy.random.SeedSequence`, so a path's draws never depend on
which worker runs it or in what order.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

# smallest positive double; replaces an exact 0.0 so theta_j > t_{j-1} strictly
_TINY = np.nextafter(0.0, 1.0)


class Purpose(enum.IntEnum):
    TAU_DRAWS = 0
    NOISE_DRAWS = 1


@dataclass(frozen=True)
class StreamSpec:
    master_seed: int
    path_index: int
    purpose_tag: Purpose = Purpose.TAU_DRAWS

    def __post_init__(self):
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        if self.path_index < 0:
            raise ValueError("path_index must be nonnegative")

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(
            [int(self.master_seed), int(self.path_index), int(self.purpose_tag)]
        )
        return np.random.Generator(np.random.PCG64(seq))


def draw_uniforms(s: StreamSpec, count: int) -> np.ndarray:
    """The first ``count`` draws of the stream, all strictly inside (0, 1)."""
    if count < 1:
        raise ValueError("count must be positive")
    u = s.generator().random(count)
    u[u == 0.0] = _TINY
    return u


def split_for_path(master_seed: int, path_index: int) -> tuple[StreamSpec, StreamSpec]:
    return (
        StreamSpec(master_seed, path_index, Purpose.TAU_DRAWS),
        StreamSpec(master_seed, path_index, Purpose.NOISE_DRAWS),
    )


def tau_matrix(master_seed: int, paths, n: int) -> np.ndarray:
    """Stack the first ``n`` tau draws of each listed path into shape ``(len(paths), n)``."""
    return np.stack(
        [draw_uniforms(StreamSpec(master_seed, int(m), Purpose.TAU_DRAWS), n) for m in paths]
    )


def noise_matrix(master_seed: int, paths, n: int) -> np.ndarray:
    return np.stack(
        [draw_uniforms(StreamSpec(master_seed, int(m), Purpose.NOISE_DRAWS), n) for m in paths]
    )
