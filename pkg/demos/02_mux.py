# Interleaving per-language streams by weighted random choice.
# Run: python demos/02_mux.py

import itertools
from collections import Counter

from speechblend import MuxConfig, UtteranceRecord, WeightMap, mux_streams

streams = {
    lang: [UtteranceRecord(f"{lang}-{i}", 2.0 + i % 5, lang, f"{lang}-set") for i in range(n)]
    for lang, n in [("en", 500), ("de", 40), ("fr", 7)]
}
weights = WeightMap({"en": 0.5, "de": 0.3, "fr": 0.2})

cfg = MuxConfig(weights, seed=1, shuffle_buffer_size=100)
draws = list(itertools.islice(mux_streams(streams, cfg), 20_000))
counts = Counter(r.lang for r in draws)
for k, p in weights.items():
    print(k, "target", p, "observed", counts[k] / len(draws))

# fr has only 7 utterances, so it gets recycled many times over (a new order each epoch)
print("distinct fr ids seen:", len({r.id for r in draws if r.lang == "fr"}))

# single_pass stops once every stream is used up
once = list(mux_streams(streams, MuxConfig(weights, seed=1, mode="single_pass")))
print("single pass emitted", len(once), "of", sum(map(len, streams.values())))
