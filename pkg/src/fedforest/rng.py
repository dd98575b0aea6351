"""Seeded random streams.

Every stochastic component draws from a numpy ``Generator`` backed by PCG64,
so a single integer seed pins down all outputs bit for bit on any platform
numpy supports.
"""

from __future__ import annotations

import numpy as np

__all__ = ["make_rng", "client_stream_seed"]


def make_rng(seed: int) -> np.random.Generator:
    """Build the canonical generator for ``seed``."""
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    return np.random.Generator(np.random.PCG64(seed))


def client_stream_seed(general_seed: int, client_id: int) -> int:
    # contract relied on by reproduction scripts: client seed == general + id
    return general_seed + client_id
