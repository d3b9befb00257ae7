"""Multitask prompt sequences and the concatenated-tokenizer ID space.

Global ID layout::

    [0, 32)                         special tokens
    [32 + k*V, 32 + (k+1)*V)        subword block of language k (V = per_lang_vocab)

The special block lists the named control tokens, then one token per
language, then the PnC switches, then ``<|reserved_k|>`` fillers.

A prompt is always five tokens::

    <|startoftranscript|> <|src|> <|transcribe|>|<|translate|> <|tgt|> <|pnc|>|<|nopnc|>
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, NamedTuple, Optional, Protocol, Sequence, Tuple

SOT = "<|startoftranscript|>"
TRANSCRIBE = "<|transcribe|>"
TRANSLATE = "<|translate|>"
NOSPEECH = "<|nospeech|>"
EOT = "<|endoftranscript|>"
PAD = "<|pad|>"
PNC = "<|pnc|>"
NOPNC = "<|nopnc|>"

NAMED_SPECIALS = (SOT, TRANSCRIBE, TRANSLATE, NOSPEECH, EOT, PAD)
SPECIAL_BLOCK = 32
DEFAULT_LANGUAGES = ("en", "de", "es", "fr")


class PromptError(ValueError):
    pass


def lang_token(code: str) -> str:
    return f"<|{code}|>"


class TokenRef(NamedTuple):
    kind: str  # "special" or "subword"
    lang_index: Optional[int]
    local_id: int


@dataclass(frozen=True)
class TokenLayout:
    languages: Tuple[str, ...] = DEFAULT_LANGUAGES
    per_lang_vocab: int = 1024
    special_vocab: Tuple[str, ...] = field(init=False)

    def __post_init__(self):
        langs = tuple(self.languages)
        object.__setattr__(self, "languages", langs)
        if len(set(langs)) != len(langs):
            raise PromptError(f"duplicate language codes in {langs}")
        if self.per_lang_vocab < 1:
            raise PromptError("per_lang_vocab must be positive")
        named = list(NAMED_SPECIALS) + [lang_token(c) for c in langs] + [PNC, NOPNC]
        if len(named) > SPECIAL_BLOCK:
            raise PromptError(f"{len(langs)} languages do not fit in the {SPECIAL_BLOCK}-token special block")
        if len(set(named)) != len(named):
            raise PromptError("language code collides with a control token")
        specials = named + [f"<|reserved_{k}|>" for k in range(SPECIAL_BLOCK - len(named))]
        object.__setattr__(self, "special_vocab", tuple(specials))
        object.__setattr__(self, "_special_index", {t: i for i, t in enumerate(specials)})

    @property
    def vocab_size(self) -> int:
        return SPECIAL_BLOCK + len(self.languages) * self.per_lang_vocab

    def special_id(self, token: str) -> int:
        try:
            return self._special_index[token]
        except KeyError:
            raise PromptError(f"unknown special token {token!r}") from None

    def lang_index(self, code: str) -> int:
        try:
            return self.languages.index(code)
        except ValueError:
            raise PromptError(f"unknown language {code!r}; layout has {list(self.languages)}") from None

    def to_json(self) -> str:
        return json.dumps({
            "special_vocab": list(self.special_vocab),
            "languages": list(self.languages),
            "special_block": SPECIAL_BLOCK,
            "per_lang_vocab": self.per_lang_vocab,
            "vocab_size": self.vocab_size,
        }, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "TokenLayout":
        obj = json.loads(text)
        layout = cls(languages=tuple(obj["languages"]), per_lang_vocab=int(obj["per_lang_vocab"]))
        if "special_vocab" in obj and tuple(obj["special_vocab"]) != layout.special_vocab:
            raise PromptError("special_vocab in JSON does not match the layout derived from its languages")
        return layout


def global_token_id(kind: str, lang_index: Optional[int], local_id: int, layout: TokenLayout) -> int:
    if kind == "special":
        if not 0 <= local_id < SPECIAL_BLOCK:
            raise PromptError(f"special local id {local_id} out of range [0, {SPECIAL_BLOCK})")
        return local_id
    if kind == "subword":
        if lang_index is None or not 0 <= lang_index < len(layout.languages):
            raise PromptError(f"language index {lang_index} out of range for {len(layout.languages)} languages")
        if not 0 <= local_id < layout.per_lang_vocab:
            raise PromptError(f"subword local id {local_id} out of range [0, {layout.per_lang_vocab})")
        return SPECIAL_BLOCK + lang_index * layout.per_lang_vocab + local_id
    raise PromptError(f"unknown token kind {kind!r}")


def resolve_token(global_id: int, layout: TokenLayout) -> TokenRef:
    if not 0 <= global_id < layout.vocab_size:
        raise PromptError(f"token id {global_id} out of range [0, {layout.vocab_size})")
    if global_id < SPECIAL_BLOCK:
        return TokenRef("special", None, global_id)
    lang_index, local_id = divmod(global_id - SPECIAL_BLOCK, layout.per_lang_vocab)
    return TokenRef("subword", lang_index, local_id)


@dataclass(frozen=True)
class PromptSpec:
    task: str
    source_lang: str
    target_lang: Optional[str] = None
    pnc: bool = True

    def __post_init__(self):
        if self.task not in ("transcribe", "translate"):
            raise PromptError(f"unknown task {self.task!r}")
        if self.target_lang is None:
            object.__setattr__(self, "target_lang", self.source_lang)
        if self.task == "transcribe" and self.target_lang != self.source_lang:
            raise PromptError("transcribe prompts need target_lang equal to source_lang")

    @classmethod
    def from_record(cls, record) -> "PromptSpec":
        return cls(task=record.task, source_lang=record.lang, target_lang=record.target_language, pnc=record.pnc)


@dataclass(frozen=True)
class PromptSequence:
    tokens: Tuple[str, ...]

    def ids(self, layout: TokenLayout) -> List[int]:
        return [layout.special_id(t) for t in self.tokens]

    def __iter__(self):
        return iter(self.tokens)

    def __len__(self):
        return len(self.tokens)


def build_prompt(spec: PromptSpec, layout: TokenLayout = TokenLayout()) -> PromptSequence:
    layout.lang_index(spec.source_lang)
    layout.lang_index(spec.target_lang)
    task_token = TRANSLATE if spec.task == "translate" else TRANSCRIBE
    return PromptSequence((
        SOT,
        lang_token(spec.source_lang),
        task_token,
        lang_token(spec.target_lang),
        PNC if spec.pnc else NOPNC,
    ))


def nospeech_target() -> Tuple[str, str]:
    """Reference output for a non-speech example."""
    return (NOSPEECH, EOT)


class SubwordTokenizer(Protocol):
    """Per-language tokenizer producing local ids in ``[0, vocab_size)``."""

    vocab_size: int

    def tokenize(self, text: str) -> List[int]: ...

    def detokenize(self, ids: Sequence[int]) -> str: ...


class ByteFallbackTokenizer:
    """Whitespace word tokenizer with UTF-8 byte fallback.

    Local ids: 0..255 are raw bytes, 256 is the word separator, and 257 up are
    whole words from ``words``. Unknown words are spelled out as bytes. Meant
    for tests and demos, not as a real subword model.
    """

    SEP = 256
    FIRST_WORD = 257

    def __init__(self, words: Iterable[str] = (), vocab_size: int = 1024):
        words = list(dict.fromkeys(words))
        if self.FIRST_WORD + len(words) > vocab_size:
            raise PromptError(f"{len(words)} words do not fit in a vocabulary of {vocab_size}")
        self.vocab_size = vocab_size
        self._word_ids: Dict[str, int] = {w: self.FIRST_WORD + i for i, w in enumerate(words)}
        self._id_words = {i: w for w, i in self._word_ids.items()}

    def tokenize(self, text: str) -> List[int]:
        out: List[int] = []
        for k, word in enumerate(text.split()):
            if k:
                out.append(self.SEP)
            wid = self._word_ids.get(word)
            if wid is not None:
                out.append(wid)
            else:
                out.extend(word.encode("utf-8"))
        return out

    def detokenize(self, ids: Sequence[int]) -> str:
        words: List[str] = []
        pending = bytearray()
        current: List[str] = []

        def flush():
            if pending:
                current.append(pending.decode("utf-8", errors="replace"))
                pending.clear()

        for i in ids:
            if i < 256:
                pending.append(i)
            elif i == self.SEP:
                flush()
                words.append("".join(current))
                current.clear()
            else:
                flush()
                current.append(self._id_words[i])
        flush()
        if current or words:
            words.append("".join(current))
        return " ".join(words)


class ConcatenatedTokenizer:
    """Maps text in a given language into that language's global id block."""

    def __init__(self, layout: TokenLayout, tokenizers: Mapping[str, SubwordTokenizer]):
        missing = [c for c in layout.languages if c not in tokenizers]
        if missing:
            raise PromptError(f"no tokenizer for languages {missing}")
        for code in layout.languages:
            if tokenizers[code].vocab_size > layout.per_lang_vocab:
                raise PromptError(f"tokenizer for {code!r} is larger than the per-language block")
        self.layout = layout
        self.tokenizers = dict(tokenizers)

    def encode(self, text: str, lang: str) -> List[int]:
        k = self.layout.lang_index(lang)
        return [global_token_id("subword", k, i, self.layout) for i in self.tokenizers[lang].tokenize(text)]

    def decode(self, ids: Sequence[int]) -> str:
        """Decode subword ids; special tokens are skipped.

        Consecutive ids from the same language block are detokenized together.
        """
        pieces: List[str] = []
        run: List[int] = []
        run_lang: Optional[int] = None
        for gid in ids:
            ref = resolve_token(gid, self.layout)
            if ref.kind == "special" or ref.lang_index != run_lang:
                if run:
                    pieces.append(self.tokenizers[self.layout.languages[run_lang]].detokenize(run))
                run = []
                run_lang = ref.lang_index
            if ref.kind == "subword":
                run.append(ref.local_id)
        if run:
            pieces.append(self.tokenizers[self.layout.languages[run_lang]].detokenize(run))
        return " ".join(p for p in pieces if p)

    def encode_example(self, record, nospeech_lang: Optional[str] = None) -> List[int]:
        """Prompt ids followed by the target text ids and end-of-transcript.

        A non-speech record (empty target text) gets ``<|nospeech|>`` as its
        output. Such records usually carry a pseudo-language code used only
        for sampling; ``nospeech_lang`` (default: the first layout language)
        is then used in the prompt.
        """
        if record.lang not in self.layout.languages and not record.text:
            code = nospeech_lang or self.layout.languages[0]
            spec = PromptSpec("transcribe", code, code, pnc=record.pnc)
        else:
            spec = PromptSpec.from_record(record)
        ids = build_prompt(spec, self.layout).ids(self.layout)
        text = record.target_text if record.task == "translate" else record.text
        if text:
            ids.extend(self.encode(text, spec.target_lang))
            ids.append(self.layout.special_id(EOT))
        else:
            ids.extend(self.layout.special_id(t) for t in nospeech_target())
        return ids
