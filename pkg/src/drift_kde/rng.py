"""Counter-based random streams with explicit, immutable state.

Every stream is a Philox-4x64 generator identified by a 64-bit key. The state
is the pair ``(key, block)`` where ``block`` counts consumed 256-bit Philox
blocks (four 64-bit words each). Draws always consume whole blocks, so a
stream can be resumed from any recorded state and produces the same words as
an uninterrupted run.

Uniforms use the top 53 bits of each word. Normal variates come from the
Box-Muller transform applied to pairs of uniforms, never from library
samplers whose algorithm may change between numpy releases.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

WORDS_PER_BLOCK = 4
_MASK64 = (1 << 64) - 1
_TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class RngState:
    key: int
    block: int = 0

    def __post_init__(self):
        if not 0 <= self.key <= _MASK64:
            raise ValueError(f"key must fit in 64 bits, got {self.key}")
        if self.block < 0:
            raise ValueError("block counter must be nonnegative")


def stream(base_seed: int, index: int = 0) -> RngState:
    """Independent stream for replica ``index``: key = base_seed XOR index."""
    return RngState((int(base_seed) ^ int(index)) & _MASK64, 0)


def raw_words(state: RngState, n_blocks: int) -> tuple[np.ndarray, RngState]:
    if n_blocks < 0:
        raise ValueError("n_blocks must be nonnegative")
    bg = np.random.Philox(key=state.key, counter=state.block)
    words = bg.random_raw(n_blocks * WORDS_PER_BLOCK)
    return words, RngState(state.key, state.block + n_blocks)


def uniforms(state: RngState, n: int) -> tuple[np.ndarray, RngState]:
    """``n`` uniforms on [0, 1); consumption is rounded up to whole blocks."""
    n_blocks = -(-n // WORDS_PER_BLOCK)
    words, new_state = raw_words(state, n_blocks)
    u = (words[:n] >> np.uint64(11)).astype(np.float64) * 2.0**-53
    return u, new_state


def box_muller(u1: np.ndarray, u2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # 1 - u1 lies in (0, 1], keeping the log finite
    radius = np.sqrt(-2.0 * np.log1p(-u1))
    angle = _TWO_PI * u2
    return radius * np.cos(angle), radius * np.sin(angle)


def normals(state: RngState, n: int) -> tuple[np.ndarray, RngState]:
    half = -(-n // 2)
    u, new_state = uniforms(state, 2 * half)
    c, s = box_muller(u[0::2], u[1::2])
    out = np.empty(2 * half)
    out[0::2] = c
    out[1::2] = s
    return out[:n], new_state
