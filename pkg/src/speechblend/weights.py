"""Stratum sampling probabilities.

Three flavours, all returning a :class:`WeightMap`:

* natural weights, proportional to each stratum's hours;
* temperature-scaled weights ``(n_s / N) ** alpha`` renormalized, where
  ``alpha < 1`` up-samples small strata and ``alpha = 0`` is uniform;
* two-level weights: temperature weights over languages times temperature
  weights over the datasets inside each language.

Non-speech audio is handled as just another language stratum.
"""
from __future__ import annotations

import math
from typing import Dict, Hashable, Iterator, Mapping, Tuple, Union

from .manifest import CorpusStats, format_stratum


class WeightError(ValueError):
    pass


class WeightMap(Mapping[Hashable, float]):
    """Immutable probability distribution over strata.

    Zero-weight strata are kept so reports can show them.
    """

    __slots__ = ("_entries",)

    def __init__(self, entries: Mapping[Hashable, float]):
        entries = {k: float(v) for k, v in entries.items()}
        for k, v in entries.items():
            if not (v >= 0.0) or math.isinf(v):
                raise WeightError(f"weight for {k!r} must be a finite non-negative number, got {v!r}")
        total = math.fsum(entries.values())
        if entries and abs(total - 1.0) > 1e-12:
            raise WeightError(f"weights sum to {total!r}, expected 1")
        self._entries = entries

    @classmethod
    def normalized(cls, raw: Mapping[Hashable, float]) -> "WeightMap":
        """Scale non-negative masses to sum to one."""
        total = math.fsum(raw.values())
        if not total > 0:
            raise WeightError("degenerate corpus: all strata have zero mass")
        return cls({k: v / total for k, v in raw.items()})

    def __getitem__(self, key: Hashable) -> float:
        return self._entries[key]

    def __iter__(self) -> Iterator[Hashable]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __repr__(self) -> str:
        inner = ", ".join(f"{k!r}: {v:.6g}" for k, v in self._entries.items())
        return f"WeightMap({{{inner}}})"

    def positive(self) -> Dict[Hashable, float]:
        return {k: v for k, v in self._entries.items() if v > 0}

    def to_json_dict(self) -> Dict[str, float]:
        return {format_stratum(k): v for k, v in self._entries.items()}


HoursLike = Union[CorpusStats, Mapping[Hashable, float]]


def _hours(source: HoursLike) -> Dict[Hashable, float]:
    if isinstance(source, CorpusStats):
        return source.hours
    return {k: float(v) for k, v in source.items()}


def temperature_weights(hours: HoursLike, alpha: float = 0.5) -> WeightMap:
    """Weights proportional to ``(hours_s / total) ** alpha``.

    Strata with zero hours keep weight 0, including at ``alpha = 0``.
    """
    if not 0.0 <= alpha <= 1.0:
        raise WeightError(f"alpha must lie in [0, 1], got {alpha!r}")
    hours = _hours(hours)
    for k, h in hours.items():
        if not (h >= 0.0) or math.isinf(h):
            raise WeightError(f"hours for {k!r} must be finite and non-negative, got {h!r}")
    total = math.fsum(hours.values())
    if not total > 0:
        raise WeightError("degenerate corpus: all strata have zero hours")
    scaled = {k: (h / total) ** alpha if h > 0 else 0.0 for k, h in hours.items()}
    return WeightMap.normalized(scaled)


def natural_weights(stats: HoursLike) -> WeightMap:
    """Weights proportional to each stratum's cumulative duration."""
    return temperature_weights(stats, alpha=1.0)


def hierarchical_weights(
    stats: Union[CorpusStats, Mapping[Tuple[str, str], float]],
    alpha_lang: float = 0.5,
    alpha_ds: float = 0.5,
) -> WeightMap:
    """Product of language-level and within-language dataset-level weights.

    ``stats`` is keyed by ``(language, dataset)`` pairs. Each dataset name
    must belong to a single language.
    """
    if isinstance(stats, CorpusStats) and stats.strata and stats.stratify_by != "language_then_dataset":
        raise WeightError(f"hierarchical weights need language_then_dataset stats, got {stats.stratify_by!r}")
    pair_hours = _hours(stats)
    owner: Dict[str, str] = {}
    by_lang: Dict[str, Dict[str, float]] = {}
    for key, h in pair_hours.items():
        if not (isinstance(key, tuple) and len(key) == 2):
            raise WeightError(f"expected (language, dataset) keys, got {key!r}")
        lang, ds = key
        if owner.setdefault(ds, lang) != lang:
            raise WeightError(f"ambiguous stratification: dataset {ds!r} appears under {owner[ds]!r} and {lang!r}")
        by_lang.setdefault(lang, {})[ds] = h

    lang_hours = {lang: math.fsum(d.values()) for lang, d in by_lang.items()}
    lang_w = temperature_weights(lang_hours, alpha_lang)
    out: Dict[Tuple[str, str], float] = {}
    for lang, datasets in by_lang.items():
        if lang_w[lang] == 0.0:
            for ds in datasets:
                out[(lang, ds)] = 0.0
            continue
        ds_w = temperature_weights(datasets, alpha_ds)
        for ds, w in ds_w.items():
            out[(lang, ds)] = lang_w[lang] * w
    return WeightMap(out)


def marginalize(weights: Mapping[Tuple[str, str], float], level: int = 0) -> Dict[str, float]:
    """Sum pair weights down to one component of the key."""
    acc: Dict[str, list] = {}
    for key, w in weights.items():
        acc.setdefault(key[level], []).append(w)
    return {k: math.fsum(v) for k, v in acc.items()}
