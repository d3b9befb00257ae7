"""Seed derivation and block-buffered uniform draws.

Every random decision in the package comes from a numpy ``PCG64`` generator
whose seed is derived from a master seed plus a tuple of string/int keys:

    derive_seed(master, "mux", "en/mls", 3)

Keys are mapped to 64-bit integers with BLAKE2b so the derivation does not
depend on ``PYTHONHASHSEED``, and fed to ``numpy.random.SeedSequence`` as its
``spawn_key``. Two different key tuples give statistically independent streams.
"""
from __future__ import annotations

import hashlib
from typing import Union

import numpy as np

Key = Union[str, int]

_BLOCK = 8192


def _key_to_int(key: Key) -> int:
    if isinstance(key, (int, np.integer)):
        return int(key) & 0xFFFFFFFFFFFFFFFF
    digest = hashlib.blake2b(str(key).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def derive_seed(master: int, *keys: Key) -> np.random.SeedSequence:
    return np.random.SeedSequence(
        entropy=int(master) & 0xFFFFFFFFFFFFFFFF,
        spawn_key=tuple(_key_to_int(k) for k in keys),
    )


def make_generator(master: int, *keys: Key) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(master, *keys)))


class UniformStream:
    """Uniform doubles in [0, 1) pulled from a generator in fixed-size blocks.

    Scalar calls into numpy cost microseconds each; per-record sampling in the
    mux and shuffle buffer would be dominated by that overhead otherwise. The
    block size is fixed, so the sequence of values is a pure function of the seed.
    """

    __slots__ = ("_gen", "_buf", "_pos")

    def __init__(self, master: int, *keys: Key):
        self._gen = make_generator(master, *keys)
        self._buf: list[float] = []
        self._pos = 0

    def random(self) -> float:
        if self._pos >= len(self._buf):
            self._buf = self._gen.random(_BLOCK).tolist()
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return u

    def randbelow(self, n: int) -> int:
        # bias is at most n / 2**53
        return int(self.random() * n)
