# Duration buckets and budget-filled batches, and what they do to padding.
# Run: python demos/03_bucketing.py

import numpy as np

from speechblend import BucketingConfig, assemble_batches, effective_duration, estimate_bins, synthetic_corpus

corpus = synthetic_corpus(200_000, "loguniform:1:40", seed=0)
durations = np.array([r.duration for r in corpus])

for m in (1, 4, 31):
    cfg = BucketingConfig(num_buckets=m, seed=0)
    spec = estimate_bins(durations, cfg)
    batches = list(assemble_batches(corpus, spec, cfg))
    pad = np.mean([b.padding_ratio for b in batches])
    size = np.mean([len(b) for b in batches])
    print(f"M={m:2d}  batches={len(batches):6d}  mean size={size:6.1f}  mean padding={pad:.3f}")

# bucket edges for M=31 lean towards long utterances, which cost more per second
spec = estimate_bins(durations, BucketingConfig())
print("edges:", np.round(spec.edges, 2))

# a 30 s utterance costs 30 + 30^2/20 = 75 s of budget, so 4 fit in 360 s
print(effective_duration(30, 20), 360 // effective_duration(30, 20))
