"""Named random substreams.

Every source of randomness in the library is derived from a single user
seed plus a stream name ("init", "shuffle", "dropout", one per search
candidate, ...).  Adding a new consumer therefore never perturbs the
draws seen by existing ones, which keeps runs reproducible as the
code evolves.
"""

from __future__ import annotations

import numpy as np

__all__ = ["substream", "derive_seed"]


def _tag(name: str) -> int:
    # Injective name -> int mapping; SeedSequence accepts arbitrary-size ints.
    return int.from_bytes(name.encode("utf-8"), "big")


def substream(seed: int, name: str) -> np.random.Generator:
    """Return an independent generator for stream `name` under `seed`."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), _tag(name)])))


def derive_seed(seed: int, name: str) -> int:
    """Fold `name` into `seed`, producing a new 63-bit seed.

    Used to give each search candidate its own seed lineage.
    """
    ss = np.random.SeedSequence([int(seed), _tag(name)])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> 1)
