"""Dynamic duration bucketing with a cost-budgeted, variable batch size.

Bucket edges are estimated once from a duration sample so that each bucket
receives an equal share of the total (effective) duration. During iteration
records are routed into per-bucket FIFO queues that together hold at most
``buffer_size`` records; whenever the buffer is full a bucket is chosen at
random and a batch is popped from it until the duration budget is reached.

The cost of an utterance is its *effective duration*

    eff(d) = d + d**2 / q

which grows linearly for ``d << q`` and quadratically for ``d >> q``, a proxy
for the quadratic cost of self-attention over long inputs. Pass
``quadratic_duration=None`` to budget raw durations.
"""
from __future__ import annotations

import bisect
import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from ._random import UniformStream
from .manifest import UtteranceRecord

logger = logging.getLogger(__name__)

BUDGET_METRICS = ("effective", "raw")
BIN_METRICS = ("effective", "duration", "count")
BUCKET_CHOICES = ("uniform", "occupancy")


class BucketingError(ValueError):
    pass


@dataclass(frozen=True)
class BucketingConfig:
    num_buckets: int = 31
    batch_budget: float = 360.0
    quadratic_duration: Optional[float] = 20.0
    buffer_size: int = 20000
    seed: int = 0
    budget_metric: str = "effective"
    bin_metric: str = "effective"
    bucket_choice: str = "uniform"

    def __post_init__(self):
        if self.num_buckets < 1:
            raise BucketingError(f"num_buckets must be >= 1, got {self.num_buckets}")
        if not self.batch_budget > 0:
            raise BucketingError(f"batch_budget must be > 0, got {self.batch_budget}")
        if self.quadratic_duration is not None and not self.quadratic_duration > 0:
            raise BucketingError(f"quadratic_duration must be > 0 or None, got {self.quadratic_duration}")
        if self.buffer_size < self.num_buckets:
            raise BucketingError(f"buffer_size ({self.buffer_size}) must be >= num_buckets ({self.num_buckets})")
        if self.budget_metric not in BUDGET_METRICS:
            raise BucketingError(f"budget_metric must be one of {BUDGET_METRICS}")
        if self.bin_metric not in BIN_METRICS:
            raise BucketingError(f"bin_metric must be one of {BIN_METRICS}")
        if self.bucket_choice not in BUCKET_CHOICES:
            raise BucketingError(f"bucket_choice must be one of {BUCKET_CHOICES}")

    def cost(self, d: float) -> float:
        if self.budget_metric == "raw":
            return d
        return effective_duration(d, self.quadratic_duration)


@dataclass(frozen=True)
class BucketSpec:
    """Bucket ``i`` covers ``[edges[i-1], edges[i])``, open at both extremes."""

    edges: Tuple[float, ...] = ()

    def __post_init__(self):
        edges = tuple(float(e) for e in self.edges)
        object.__setattr__(self, "edges", edges)
        if any(e <= 0 for e in edges):
            raise BucketingError("bucket edges must be positive")
        if any(b <= a for a, b in zip(edges, edges[1:])):
            raise BucketingError("bucket edges must be strictly ascending")

    @property
    def num_buckets(self) -> int:
        return len(self.edges) + 1

    def bounds(self, index: int) -> Tuple[float, float]:
        lo = self.edges[index - 1] if index > 0 else 0.0
        hi = self.edges[index] if index < len(self.edges) else math.inf
        return lo, hi

    def to_json_dict(self) -> dict:
        return {"edges": list(self.edges), "num_buckets": self.num_buckets}


@dataclass(frozen=True)
class MiniBatch:
    records: Tuple[UtteranceRecord, ...]
    bucket_index: int
    max_duration: float
    total_duration: float
    total_effective_duration: float
    padding_ratio: float
    oversize: bool = False
    # cost of the record left at the head of the queue when the batch was
    # closed; None if the queue was emptied
    next_cost: Optional[float] = field(default=None, compare=False)

    def __len__(self) -> int:
        return len(self.records)

    @classmethod
    def from_records(cls, records: Sequence[UtteranceRecord], bucket_index: int,
                     q: Optional[float], oversize: bool = False, next_cost: Optional[float] = None) -> "MiniBatch":
        durations = [r.duration for r in records]
        return cls(
            records=tuple(records),
            bucket_index=bucket_index,
            max_duration=max(durations),
            total_duration=math.fsum(durations),
            total_effective_duration=math.fsum(effective_duration(d, q) for d in durations),
            padding_ratio=padding_ratio(durations),
            oversize=oversize,
            next_cost=next_cost,
        )


def effective_duration(d: float, q: Optional[float] = 20.0) -> float:
    if q is None:
        return d
    return d + d * d / q


def padding_ratio(batch) -> float:
    """Fraction of padded frames when every item is padded to the longest one.

    Accepts a :class:`MiniBatch` or a sequence of durations.
    """
    if isinstance(batch, MiniBatch):
        durations = [r.duration for r in batch.records]
    else:
        durations = list(batch)
    if not durations:
        raise BucketingError("padding_ratio of an empty batch is undefined")
    n = len(durations)
    if n == 1:
        return 0.0
    longest = max(durations)
    return (n * longest - math.fsum(durations)) / (n * longest)


def estimate_bins(durations: Iterable[float], config: BucketingConfig = BucketingConfig()) -> BucketSpec:
    """Edges giving every bucket an equal share of the sample's mass.

    Mass is effective duration by default (``config.bin_metric``). Edge ``k``
    is placed just above the first sorted sample at which cumulative mass
    reaches ``k / M`` of the total. Edges that coincide, or that would leave
    nothing above them, are dropped, so ``num_buckets`` of the result can be
    smaller than requested.
    """
    d = np.sort(np.asarray(list(durations) if not isinstance(durations, np.ndarray) else durations, dtype=np.float64))
    if d.size == 0:
        raise BucketingError("cannot estimate bins from an empty sample")
    if not np.all(d > 0):
        raise BucketingError("durations must be positive")
    m = config.num_buckets
    if m == 1:
        return BucketSpec(())
    if config.bin_metric == "count":
        mass = np.ones_like(d)
    elif config.bin_metric == "duration":
        mass = d
    else:
        q = config.quadratic_duration
        mass = d if q is None else d + d * d / q
    cum = np.cumsum(mass)
    total = cum[-1]
    targets = total * np.arange(1, m) / m
    idx = np.searchsorted(cum, targets, side="left")
    idx = np.minimum(idx, d.size - 1)
    top = d[-1]
    edges: List[float] = []
    for i in idx:
        if d[i] >= top:
            break
        edge = float(np.nextafter(d[i], np.inf))
        if not edges or edge > edges[-1]:
            edges.append(edge)
    if len(edges) + 1 < m:
        logger.info("estimate_bins: requested %d buckets, achieved %d", m, len(edges) + 1)
    return BucketSpec(tuple(edges))


def assign_bucket(d: float, spec: BucketSpec) -> int:
    return bisect.bisect_right(spec.edges, d)


class DynamicBucketer(Iterator[MiniBatch]):
    """Stream of mini-batches assembled from a record stream.

    A batch is popped whenever the queues hold ``buffer_size`` records, and
    repeatedly after the input ends until every record has been emitted.
    Eligible buckets are those whose queued cost reaches the budget; one is
    drawn uniformly (or proportional to queued cost with
    ``bucket_choice="occupancy"``). If none is eligible the bucket with the
    largest queued cost is used. Records leave a bucket in arrival order.
    """

    def __init__(self, input: Iterable[UtteranceRecord], spec: BucketSpec, config: BucketingConfig):
        self.spec = spec
        self.config = config
        self._input = iter(input)
        self._done = False
        m = spec.num_buckets
        self._queues: List[deque] = [deque() for _ in range(m)]
        self._queued = [0.0] * m
        self._count = 0
        self._rand = UniformStream(config.seed, "bucket-choice")
        self.oversize_count = 0

    def __iter__(self):
        return self

    def __next__(self) -> MiniBatch:
        cfg = self.config
        edges = self.spec.edges
        queues = self._queues
        queued = self._queued
        cost = cfg.cost
        limit = cfg.buffer_size
        while not self._done and self._count < limit:
            rec = next(self._input, None)
            if rec is None:
                self._done = True
                break
            b = bisect.bisect_right(edges, rec.duration)
            c = cost(rec.duration)
            queues[b].append((rec, c))
            queued[b] += c
            self._count += 1
        if self._count == 0:
            raise StopIteration
        return self._pop(self._choose())

    def _choose(self) -> int:
        budget = self.config.batch_budget
        queued = self._queued
        eligible = [i for i, c in enumerate(queued) if c >= budget and self._queues[i]]
        if not eligible:
            best = max(range(len(queued)), key=lambda i: (len(self._queues[i]) > 0, queued[i]))
            return best
        if len(eligible) == 1:
            return eligible[0]
        if self.config.bucket_choice == "occupancy":
            masses = [queued[i] for i in eligible]
            u = self._rand.random() * math.fsum(masses)
            acc = 0.0
            for i, w in zip(eligible, masses):
                acc += w
                if u < acc:
                    return i
            return eligible[-1]
        return eligible[self._rand.randbelow(len(eligible))]

    def _pop(self, b: int) -> MiniBatch:
        budget = self.config.batch_budget
        q = self.config.quadratic_duration
        queue = self._queues[b]
        rec, c = queue.popleft()
        taken = [rec]
        spent = c
        removed = [c]
        oversize = c > budget
        if oversize:
            self.oversize_count += 1
            logger.warning("record %s (%.2fs) exceeds the batch budget on its own; emitting it alone",
                           rec.id, rec.duration)
        else:
            while queue and spent + queue[0][1] <= budget:
                rec, c = queue.popleft()
                taken.append(rec)
                spent += c
                removed.append(c)
        self._count -= len(taken)
        # an emptied queue resets to exactly zero so rounding cannot accumulate
        self._queued[b] = max(self._queued[b] - math.fsum(removed), 0.0) if queue else 0.0
        next_cost = queue[0][1] if queue else None
        return MiniBatch.from_records(taken, b, q, oversize=oversize, next_cost=next_cost)


def assemble_batches(input: Iterable[UtteranceRecord], spec: BucketSpec,
                     config: BucketingConfig = BucketingConfig()) -> Iterator[MiniBatch]:
    if spec.num_buckets > config.buffer_size:
        raise BucketingError(f"bucket spec has {spec.num_buckets} buckets but buffer_size is {config.buffer_size}")
    return DynamicBucketer(input, spec, config)
