"""Stochastic weighted multiplexing of per-stratum record streams.

For every output record a source stratum is drawn i.i.d. from the weight
map, then the next record of that stratum's stream is emitted. The source
distribution is therefore the same at every position of the output stream.

Randomness comes from :mod:`speechblend._random`; the stream of stratum
choices, the shuffle buffer and each stratum's epoch reshuffles use
separately derived generators:

* stratum choice:      ``derive_seed(seed, "mux-choice")``
* epoch ``k`` restart: ``derive_seed(seed, "mux-epoch", stratum, k)``
* shuffle buffer:      ``derive_seed(seed, "shuffle-buffer")``
"""
from __future__ import annotations

import bisect
import logging
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Callable, Dict, Hashable, Iterable, Iterator, List, Mapping, TypeVar, Union

from ._random import UniformStream, make_generator
from .manifest import format_stratum
from .weights import WeightMap

logger = logging.getLogger(__name__)

T = TypeVar("T")

MODES = ("infinite_repeat", "single_pass")

Source = Union[Iterable[T], Callable[[], Iterable[T]]]


class MuxError(ValueError):
    pass


@dataclass(frozen=True)
class MuxConfig:
    weights: WeightMap
    seed: int = 0
    mode: str = "infinite_repeat"
    shuffle_buffer_size: int = 10000

    def __post_init__(self):
        if not isinstance(self.weights, WeightMap):
            object.__setattr__(self, "weights", WeightMap(self.weights))
        if self.mode not in MODES:
            raise MuxError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.shuffle_buffer_size < 0:
            raise MuxError(f"shuffle_buffer_size must be >= 0, got {self.shuffle_buffer_size}")
        if not self.weights.positive():
            raise MuxError("weights are degenerate: no stratum has positive weight")


def shuffle_buffer(input: Iterable[T], capacity: int, seed: int = 0) -> Iterator[T]:
    """Approximate streaming shuffle with a bounded buffer.

    Fills ``capacity`` slots, then for every further input item emits a
    uniformly chosen slot and puts the new item in its place. At the end of
    input the buffer is drained in uniformly random order. Capacity 0 or 1
    leaves the order unchanged.
    """
    if capacity < 0:
        raise ValueError(f"capacity must be >= 0, got {capacity}")
    if capacity <= 1:
        yield from input
        return
    rand = UniformStream(seed, "shuffle-buffer")
    buf: List[T] = []
    it = iter(input)
    for item in it:
        buf.append(item)
        if len(buf) == capacity:
            break
    for item in it:
        j = rand.randbelow(capacity)
        yield buf[j]
        buf[j] = item
    while buf:
        j = rand.randbelow(len(buf))
        buf[j], buf[-1] = buf[-1], buf[j]
        yield buf.pop()


class Multiplexer(Iterator[T]):
    """Iterator over the multiplexed stream (no shuffle buffer applied).

    ``streams`` maps stratum to a re-iterable (list, tuple, any object whose
    ``__iter__`` returns a fresh iterator) or to a zero-argument callable
    returning one. In ``infinite_repeat`` mode an exhausted stratum starts a
    new epoch; sequences are permuted for each new epoch. In ``single_pass``
    mode its weight drops to zero and the others are renormalized; iteration
    stops once every positive-weight stratum is exhausted.

    ``counts`` holds how many records each stratum has contributed so far.
    """

    def __init__(self, streams: Mapping[Hashable, Source], config: MuxConfig):
        self.config = config
        self._keys: List[Hashable] = [k for k, w in config.weights.items() if w > 0]
        missing = [k for k in self._keys if k not in streams]
        if missing:
            raise MuxError(f"no stream for positive-weight strata: {', '.join(map(format_stratum, missing))}")
        self._sources = {k: streams[k] for k in self._keys}
        if config.mode == "infinite_repeat":
            for k, src in self._sources.items():
                if not callable(src) and iter(src) is src:
                    raise MuxError(
                        f"stream for {format_stratum(k)!r} is a one-shot iterator and cannot be repeated; "
                        "pass a sequence or a factory callable"
                    )
        self._weights = [config.weights[k] for k in self._keys]
        self._active = [True] * len(self._keys)
        self._epoch = [0] * len(self._keys)
        self._iters = [self._open(i) for i in range(len(self._keys))]
        self._rand = UniformStream(config.seed, "mux-choice")
        self._rebuild_cdf()
        self.counts: Dict[Hashable, int] = {k: 0 for k in config.weights}

    def _open(self, i: int) -> Iterator:
        key = self._keys[i]
        src = self._sources[key]
        items = src() if callable(src) else src
        epoch = self._epoch[i]
        if epoch > 0 and isinstance(items, Sequence):
            gen = make_generator(self.config.seed, "mux-epoch", format_stratum(key), epoch)
            order = gen.permutation(len(items))
            return (items[j] for j in order.tolist())
        return iter(items)

    def _rebuild_cdf(self):
        acc = 0.0
        cdf = []
        for w, on in zip(self._weights, self._active):
            acc += w if on else 0.0
            cdf.append(acc)
        self._cdf = cdf
        self._total = acc

    def _pick(self) -> int:
        u = self._rand.random() * self._total
        i = bisect.bisect_right(self._cdf, u)
        n = len(self._cdf)
        if i >= n:
            i = n - 1
        # skip zero-width entries that bisect may land on
        while not self._active[i] or self._weights[i] == 0:
            i -= 1
        return i

    def __iter__(self) -> "Multiplexer[T]":
        return self

    def __next__(self) -> T:
        while True:
            if not self._total > 0:
                raise StopIteration
            i = self._pick()
            item = next(self._iters[i], _SENTINEL)
            if item is _SENTINEL:
                if self.config.mode == "single_pass":
                    self._retire(i)
                    continue
                # the draw stands; it is served from the next epoch
                item = self._restart(i)
            self.counts[self._keys[i]] += 1
            return item

    def _restart(self, i: int):
        key = self._keys[i]
        self._epoch[i] += 1
        self._iters[i] = self._open(i)
        item = next(self._iters[i], _SENTINEL)
        if item is _SENTINEL:
            raise MuxError(f"stream for {format_stratum(key)!r} is empty and cannot be repeated")
        logger.debug("stratum %s starts epoch %d", format_stratum(key), self._epoch[i])
        return item

    def _retire(self, i: int):
        self._active[i] = False
        self._rebuild_cdf()
        logger.debug("stratum %s exhausted", format_stratum(self._keys[i]))


_SENTINEL = object()


def mux_streams(streams: Mapping[Hashable, Source], config: MuxConfig) -> Iterator:
    """Multiplex ``streams`` by ``config.weights``, then apply the shuffle buffer."""
    mux = Multiplexer(streams, config)
    if config.shuffle_buffer_size > 1:
        return shuffle_buffer(mux, config.shuffle_buffer_size, config.seed)
    return mux

