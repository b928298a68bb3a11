"""Named random sub-streams derived from one run seed."""

from __future__ import annotations

import zlib

import numpy as np


def substream(seed: int, name: str, *extra: int) -> np.random.Generator:
    """Independent generator for ``name`` (e.g. "init", "augment", "scene").

    The stream depends only on ``seed``, ``name`` and ``extra``, never on how
    much randomness other streams consumed.
    """
    key = (zlib.crc32(name.encode()),) + tuple(int(e) for e in extra)
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=key))
