"""End-to-end sampling pipeline: weights -> mux -> shuffle buffer -> bucketing.

Used by the ``simulate`` and ``sample`` commands and by the acceptance tests.
Everything is metadata only; no audio is touched.
"""
from __future__ import annotations

import itertools
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Iterator, List, Optional, Sequence

import numpy as np

from ._random import derive_seed, make_generator
from .bucketing import BucketingConfig, BucketSpec, DynamicBucketer, MiniBatch, estimate_bins
from .manifest import UtteranceRecord, corpus_stats, format_stratum, split_by_stratum
from .mux import Multiplexer, MuxConfig, shuffle_buffer
from .weights import WeightMap, hierarchical_weights, temperature_weights

SYNTH_CHUNK = 65536


@dataclass(frozen=True)
class SimulationConfig:
    alpha: float = 0.5
    alpha_dataset: Optional[float] = None
    stratify: str = "language_then_dataset"
    num_buckets: int = 31
    batch_duration: float = 360.0
    quadratic_duration: Optional[float] = 20.0
    buffer_size: int = 20000
    shuffle_buffer_size: int = 10000
    seed: int = 0
    draws: Optional[int] = None
    mode: str = "infinite_repeat"
    budget_metric: str = "effective"
    bin_metric: str = "effective"
    bucket_choice: str = "uniform"
    bin_sample: int = 100_000

    def __post_init__(self):
        if self.draws is not None and self.draws <= 0:
            raise ValueError(f"draws must be positive, got {self.draws}")
        if self.mode == "infinite_repeat" and self.draws is None:
            raise ValueError("infinite_repeat mode needs a number of draws")
        if self.bin_sample <= 0:
            raise ValueError("bin_sample must be positive")

    def bucketing(self) -> BucketingConfig:
        return BucketingConfig(
            num_buckets=self.num_buckets,
            batch_budget=self.batch_duration,
            quadratic_duration=self.quadratic_duration,
            buffer_size=self.buffer_size,
            seed=self.seed,
            budget_metric=self.budget_metric,
            bin_metric=self.bin_metric,
            bucket_choice=self.bucket_choice,
        )


def parse_distribution(spec: str):
    """``loguniform:LO:HI``, ``uniform:LO:HI`` or ``const:D``."""
    parts = spec.split(":")
    kind = parts[0]
    try:
        args = [float(p) for p in parts[1:]]
    except ValueError:
        raise ValueError(f"bad distribution {spec!r}") from None
    if kind in ("loguniform", "uniform") and len(args) == 2 and 0 < args[0] < args[1]:
        lo, hi = args
        if kind == "loguniform":
            return lambda gen, n: np.exp(gen.uniform(math.log(lo), math.log(hi), n))
        return lambda gen, n: gen.uniform(lo, hi, n)
    if kind == "const" and len(args) == 1 and args[0] > 0:
        d = args[0]
        return lambda gen, n: np.full(n, d)
    raise ValueError(f"bad distribution {spec!r}; expected loguniform:LO:HI, uniform:LO:HI or const:D")


def synthetic_durations(n: int, dist: str = "loguniform:1:40", seed: int = 0, workers: int = 1) -> np.ndarray:
    """Durations drawn chunk by chunk; the output does not depend on ``workers``."""
    draw = parse_distribution(dist)
    bounds = [(s, min(s + SYNTH_CHUNK, n)) for s in range(0, n, SYNTH_CHUNK)]

    def one(k):
        lo, hi = bounds[k]
        return draw(make_generator(seed, "synthetic", k), hi - lo)

    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(one, range(len(bounds))))
    else:
        parts = [one(k) for k in range(len(bounds))]
    return np.concatenate(parts) if parts else np.empty(0)


def synthetic_corpus(n: int, dist: str = "loguniform:1:40", seed: int = 0,
                     langs: Sequence[str] = ("en",), workers: int = 1) -> List[UtteranceRecord]:
    """``n`` text-less records, languages assigned round-robin."""
    durations = synthetic_durations(n, dist, seed, workers).tolist()
    langs = list(langs)
    datasets = [f"synthetic-{lang}" for lang in langs]
    k = len(langs)
    return [
        UtteranceRecord(id=f"syn-{i:08d}", duration=d, lang=langs[i % k], dataset=datasets[i % k])
        for i, d in enumerate(durations)
    ]


def _sub_seed(seed: int, *keys) -> int:
    return int(derive_seed(seed, *keys).generate_state(1, np.uint64)[0])


class Pipeline:
    """Wired-up sampling pipeline over an in-memory corpus."""

    def __init__(self, records: Sequence[UtteranceRecord], config: SimulationConfig):
        if not records:
            raise ValueError("corpus is empty")
        self.config = config
        self.streams = split_by_stratum(records, config.stratify)
        stats = corpus_stats(records, config.stratify)
        if config.stratify == "language_then_dataset":
            alpha_ds = config.alpha if config.alpha_dataset is None else config.alpha_dataset
            self.weights: WeightMap = hierarchical_weights(stats, config.alpha, alpha_ds)
        else:
            self.weights = temperature_weights(stats, config.alpha)
        self.mux_config = MuxConfig(self.weights, config.seed, config.mode, config.shuffle_buffer_size)
        self.bucketing = config.bucketing()
        self.spec = self._estimate_spec()
        self.mux = Multiplexer(self.streams, self.mux_config)

    def _estimate_spec(self) -> BucketSpec:
        # bins come from a separate mux pass so they follow the blended distribution
        probe_cfg = MuxConfig(self.weights, _sub_seed(self.config.seed, "bin-sample"), self.config.mode, 0)
        probe = Multiplexer(self.streams, probe_cfg)
        sample = [r.duration for r in itertools.islice(probe, self.config.bin_sample)]
        return estimate_bins(np.asarray(sample), self.bucketing)

    def records(self) -> Iterator[UtteranceRecord]:
        stream: Iterator[UtteranceRecord] = self.mux
        if self.config.draws is not None:
            stream = itertools.islice(stream, self.config.draws)
        return shuffle_buffer(stream, self.config.shuffle_buffer_size, self.config.seed)

    def batches(self) -> DynamicBucketer:
        return DynamicBucketer(self.records(), self.spec, self.bucketing)


def _frequencies(counts: dict) -> dict:
    total = sum(counts.values())
    return {format_stratum(k): (c / total if total else 0.0) for k, c in counts.items()}


def run_simulation(records: Sequence[UtteranceRecord], config: SimulationConfig) -> dict:
    """Drive the pipeline to completion and summarize it as a JSON-able dict.

    All fields except ``wall_time`` are a deterministic function of the
    records and the config.
    """
    t0 = time.perf_counter()
    pipe = Pipeline(records, config)
    batcher = pipe.batches()
    pads: List[float] = []
    effs: List[float] = []
    sizes: List[int] = []
    oversize = 0
    for batch in batcher:
        pads.append(batch.padding_ratio)
        effs.append(batch.total_effective_duration)
        sizes.append(len(batch))
        oversize += batch.oversize
    pads_arr = np.asarray(pads)
    p50, p90, p99 = (np.percentile(pads_arr, [50, 90, 99]).tolist() if pads else [0.0, 0.0, 0.0])
    return {
        "config": asdict(config),
        "seed": config.seed,
        "records_in_corpus": len(records),
        "draws": sum(pipe.mux.counts.values()),
        "target_weights": pipe.weights.to_json_dict(),
        "empirical_frequencies": _frequencies(pipe.mux.counts),
        "bucket_edges": list(pipe.spec.edges),
        "num_buckets_achieved": pipe.spec.num_buckets,
        "batches_emitted": len(pads),
        "mean_padding_ratio": math.fsum(pads) / len(pads) if pads else 0.0,
        "padding_ratio_percentiles": {"p50": p50, "p90": p90, "p99": p99},
        "mean_batch_effective_duration": math.fsum(effs) / len(effs) if effs else 0.0,
        "max_batch_effective_duration": max(effs) if effs else 0.0,
        "mean_batch_size": sum(sizes) / len(sizes) if sizes else 0.0,
        "oversize_singletons": oversize,
        "wall_time": time.perf_counter() - t0,
    }


def batch_to_json_dict(index: int, batch: MiniBatch, ids_only: bool = False) -> dict:
    out = {
        "batch_index": index,
        "bucket_index": batch.bucket_index,
        "size": len(batch),
        "max_duration": batch.max_duration,
        "total_duration": batch.total_duration,
        "total_effective_duration": batch.total_effective_duration,
        "padding_ratio": batch.padding_ratio,
        "oversize": batch.oversize,
    }
    if ids_only:
        out["ids"] = [r.id for r in batch.records]
    else:
        out["records"] = [r.to_dict() for r in batch.records]
    return out

