"""Deterministic random-number streams.

All randomness in this package flows through Philox, a counter-based 64-bit
generator.  Substreams are keyed by ``(master_seed, *path)`` through numpy's
``SeedSequence`` spawn-key mechanism, so any component can be given its own
stream that never collides with (and never depends on the consumption order
of) any other stream.  Reordering or parallelising work across substreams
therefore cannot change results.
"""

from __future__ import annotations

import numpy as np

__all__ = ["substream"]


def substream(seed: int, *path: int) -> np.random.Generator:
    """Return the generator for stream ``path`` under ``seed``.

    The same ``(seed, path)`` always yields an identical stream; distinct
    paths are statistically independent.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(seed=ss))
