# Task prompts and the shared token-id space.
# Run: python demos/04_prompts.py

from speechblend import (
    ByteFallbackTokenizer,
    ConcatenatedTokenizer,
    PromptSpec,
    TokenLayout,
    UtteranceRecord,
    build_prompt,
    resolve_token,
)

layout = TokenLayout()
print("vocab size", layout.vocab_size)
print(layout.special_vocab[:12])

p = build_prompt(PromptSpec("translate", "en", "de", pnc=True))
print(p.tokens, p.ids(layout))

p = build_prompt(PromptSpec("transcribe", "fr", pnc=False))
print(p.tokens, p.ids(layout))

# each language owns a contiguous 1024-id block after the specials
tok = ConcatenatedTokenizer(layout, {c: ByteFallbackTokenizer(["hallo"]) for c in layout.languages})
ids = tok.encode("hallo welt", "de")
print(ids[:6], [resolve_token(i, layout) for i in ids[:2]])
print(tok.decode(ids))

rec = UtteranceRecord("u1", 4.2, "en", "demo", text="Hello there.", pnc=True)
print(tok.encode_example(rec)[:8])
