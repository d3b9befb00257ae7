"""JSONL manifests: utterance records, parsing, corpus statistics, PnC text policy."""
from __future__ import annotations

import io
import json
import logging
import math
import os
import re
import unicodedata
from dataclasses import dataclass, field
from typing import IO, Dict, Hashable, Iterable, Iterator, List, Mapping, Optional, Union

logger = logging.getLogger(__name__)

TASKS = ("transcribe", "translate")
STRATIFICATIONS = ("language", "dataset", "language_then_dataset")

_REQUIRED = ("id", "duration", "lang", "dataset")
_OPTIONAL_DEFAULTS = {
    "audio": None,
    "text": "",
    "pnc": False,
    "task": "transcribe",
    "target_lang": None,
    "target_text": None,
}
# serialization order
_FIELDS = ("id", "audio", "duration", "lang", "dataset", "text", "pnc", "task", "target_lang", "target_text")


class ManifestError(ValueError):
    """A manifest line that could not be turned into a valid record."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        self.reason = message
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True, slots=True)
class UtteranceRecord:
    id: str
    duration: float
    lang: str
    dataset: str
    text: str = ""
    pnc: bool = False
    audio: Optional[str] = None
    task: str = "transcribe"
    target_lang: Optional[str] = None
    target_text: Optional[str] = None

    def __post_init__(self):
        if not (self.duration > 0) or math.isinf(self.duration):
            raise ManifestError(f"nonpositive duration {self.duration!r} for record {self.id!r}")
        if not self.lang:
            raise ManifestError(f"empty lang for record {self.id!r}")
        if not self.dataset:
            raise ManifestError(f"empty dataset for record {self.id!r}")
        if self.task not in TASKS:
            raise ManifestError(f"unknown task {self.task!r} for record {self.id!r}")
        if self.task == "translate":
            if not self.target_lang:
                raise ManifestError(f"translate record {self.id!r} has no target_lang")
            if self.target_lang == self.lang:
                raise ManifestError(f"translate record {self.id!r} has target_lang equal to lang")
            if self.target_text is None:
                raise ManifestError(f"translate record {self.id!r} has no target_text")

    @property
    def target_language(self) -> str:
        return self.target_lang if self.task == "translate" else self.lang

    def to_dict(self) -> dict:
        """Populated fields only, in a fixed key order."""
        out = {}
        for name in _FIELDS:
            value = getattr(self, name)
            if value is None:
                continue
            out[name] = value
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False)

    @classmethod
    def from_dict(cls, obj: Mapping) -> "UtteranceRecord":
        missing = [k for k in _REQUIRED if k not in obj]
        if missing:
            raise ManifestError(f"missing required field(s): {', '.join(missing)}")
        try:
            duration = float(obj["duration"])
        except (TypeError, ValueError):
            raise ManifestError(f"duration is not a number: {obj['duration']!r}") from None
        pnc = obj.get("pnc", False)
        if not isinstance(pnc, bool):
            raise ManifestError(f"pnc must be a boolean, got {pnc!r}")
        kwargs = {k: obj.get(k, default) for k, default in _OPTIONAL_DEFAULTS.items()}
        kwargs["pnc"] = pnc
        if kwargs["task"] is None:
            kwargs["task"] = "transcribe"
        return cls(id=str(obj["id"]), duration=duration, lang=str(obj["lang"]), dataset=str(obj["dataset"]), **kwargs)


def _iter_lines(source) -> Iterator[str]:
    if isinstance(source, (bytes, bytearray)):
        source = io.BytesIO(source)
    for raw in source:
        if isinstance(raw, (bytes, bytearray)):
            raw = raw.decode("utf-8")
        yield raw


def parse_manifest(
    source: Union[IO, Iterable[Union[str, bytes]], bytes],
    *,
    skip_invalid: bool = False,
    errors: Optional[List[ManifestError]] = None,
    min_duration: Optional[float] = None,
    max_duration: Optional[float] = None,
) -> Iterator[UtteranceRecord]:
    """Yield records from a JSONL byte or text stream in file order.

    Blank lines are ignored. A malformed or invalid line raises
    :class:`ManifestError` carrying its 1-based line number, unless
    ``skip_invalid`` is set, in which case the error is logged, appended to
    ``errors`` (if given) and parsing continues.

    ``min_duration`` / ``max_duration`` drop records outside the range; both
    are off by default.
    """
    for lineno, line in enumerate(_iter_lines(source), start=1):
        if not line.strip():
            continue
        try:
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"invalid JSON: {exc.msg}") from None
            if not isinstance(obj, dict):
                raise ManifestError("line is not a JSON object")
            record = UtteranceRecord.from_dict(obj)
        except ManifestError as exc:
            err = ManifestError(exc.reason, line=lineno)
            if not skip_invalid:
                raise err from None
            logger.warning("skipping %s", err)
            if errors is not None:
                errors.append(err)
            continue
        if min_duration is not None and record.duration < min_duration:
            continue
        if max_duration is not None and record.duration > max_duration:
            continue
        yield record


def read_manifest(path: Union[str, os.PathLike], **kwargs) -> Iterator[UtteranceRecord]:
    with open(path, "rb") as f:
        yield from parse_manifest(f, **kwargs)


def write_manifest(records: Iterable[UtteranceRecord], stream: IO[str]) -> int:
    n = 0
    for rec in records:
        stream.write(rec.to_json())
        stream.write("\n")
        n += 1
    return n


@dataclass
class StratumStats:
    total_hours: float = 0.0
    count: int = 0
    min_dur: float = math.inf
    max_dur: float = 0.0


@dataclass
class CorpusStats:
    strata: Dict[Hashable, StratumStats] = field(default_factory=dict)
    total_hours: float = 0.0
    total_count: int = 0
    stratify_by: str = "language"

    @property
    def hours(self) -> Dict[Hashable, float]:
        return {k: s.total_hours for k, s in self.strata.items()}

    @classmethod
    def from_hours(cls, hours: Mapping[Hashable, float], stratify_by: str = "language") -> "CorpusStats":
        """Stats with only hour totals known, e.g. from a published table."""
        strata = {k: StratumStats(total_hours=float(h)) for k, h in hours.items()}
        total = math.fsum(st.total_hours for st in strata.values())
        return cls(strata=strata, total_hours=total, stratify_by=stratify_by)


def stratum_key(record: UtteranceRecord, stratify_by: str) -> Hashable:
    if stratify_by == "language":
        return record.lang
    if stratify_by == "dataset":
        return record.dataset
    if stratify_by == "language_then_dataset":
        return (record.lang, record.dataset)
    raise ValueError(f"unknown stratification {stratify_by!r}; expected one of {STRATIFICATIONS}")


def corpus_stats(records: Iterable[UtteranceRecord], stratify_by: str = "language") -> CorpusStats:
    if stratify_by not in STRATIFICATIONS:
        raise ValueError(f"unknown stratification {stratify_by!r}; expected one of {STRATIFICATIONS}")
    seconds: Dict[Hashable, List[float]] = {}
    strata: Dict[Hashable, StratumStats] = {}
    for rec in records:
        key = stratum_key(rec, stratify_by)
        st = strata.get(key)
        if st is None:
            st = strata[key] = StratumStats()
            seconds[key] = []
        seconds[key].append(rec.duration)
        st.count += 1
        st.min_dur = min(st.min_dur, rec.duration)
        st.max_dur = max(st.max_dur, rec.duration)
    # fsum keeps the totals independent of record order
    for key, st in strata.items():
        st.total_hours = math.fsum(seconds[key]) / 3600.0
    total_hours = math.fsum(st.total_hours for st in strata.values())
    return CorpusStats(
        strata=strata,
        total_hours=total_hours,
        total_count=sum(st.count for st in strata.values()),
        stratify_by=stratify_by,
    )


_KEEP_PUNCT = frozenset("',?.!")
_WS = re.compile(r"\s+")


def process_pnc_text(text: str) -> str:
    """Reduce punctuation to the five kept marks ``' , ? . !``.

    Any other Unicode punctuation (category ``P*``) becomes a space so words on
    either side do not fuse. U+2019 is folded to an ASCII apostrophe first.
    Case is preserved.
    """
    text = text.replace("’", "'")
    chars = [
        " " if (ch not in _KEEP_PUNCT and unicodedata.category(ch).startswith("P")) else ch
        for ch in text
    ]
    return _WS.sub(" ", "".join(chars)).strip()


def split_by_stratum(
    records: Iterable[UtteranceRecord], stratify_by: str = "language_then_dataset"
) -> Dict[Hashable, List[UtteranceRecord]]:
    out: Dict[Hashable, List[UtteranceRecord]] = {}
    for rec in records:
        out.setdefault(stratum_key(rec, stratify_by), []).append(rec)
    return out


def format_stratum(key: Hashable) -> str:
    if isinstance(key, tuple):
        return "/".join(str(k) for k in key)
    return str(key)


__all__ = [
    "CorpusStats",
    "ManifestError",
    "StratumStats",
    "UtteranceRecord",
    "corpus_stats",
    "format_stratum",
    "parse_manifest",
    "process_pnc_text",
    "read_manifest",
    "split_by_stratum",
    "stratum_key",
    "write_manifest",
]
