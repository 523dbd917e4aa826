"""Hierarchical random streams.

One experiment seed fans out into named, independent streams per stage and
per worker index, so results do not depend on scheduling.
"""
import zlib
from typing import Union

import numpy as np

Key = Union[str, int]


def _key_to_int(key: Key) -> int:
    if isinstance(key, str):
        return zlib.crc32(key.encode('utf-8'))
    return int(key)


def stream(seed: int, *keys: Key) -> np.random.Generator:
    """Return the generator for ``seed`` followed by the path ``keys``"""
    entropy = [int(seed)] + [_key_to_int(k) for k in keys]
    return np.random.default_rng(np.random.SeedSequence(entropy))
