# WER with a bootstrap interval, corpus BLEU, and the non-speech hallucination rate.
# Run: python demos/05_eval.py

import numpy as np

from speechblend import (
    bootstrap_wer_ci,
    corpus_bleu,
    corpus_wer,
    hallucination_rate,
    normalize_eval_text,
    stitch_long_form,
    tokenize_bleu,
)

refs = ["The cat sat on the mat.", "It's raining, again!", "one two three four"]
hyps = ["the cat sat on a mat", "its raining again", "one two four"]
refs = [normalize_eval_text(x) for x in refs]
hyps = [normalize_eval_text(x) for x in hyps]

total, per = corpus_wer(refs, hyps)
print(total.to_json_dict())

# a bigger fake test set so the interval means something
rng = np.random.default_rng(0)
words = rng.integers(5, 40, 2000)
errors = rng.binomial(words, 0.08)
ci = bootstrap_wer_ci(list(zip(words.tolist(), errors.tolist())), seed=0)
print(f"WER {ci.point:.4f}  95% CI [{ci.lower:.4f}, {ci.upper:.4f}]")

print("BLEU", corpus_bleu([tokenize_bleu("the cat sat on the mat .")], [tokenize_bleu("the cat sat on a mat .")]))

# long audio is decoded in 30 s pieces and glued back together
print(stitch_long_form(["so we start here ", "", " and then continue"]))

# anything emitted on non-speech audio counts, in characters per minute
print(hallucination_rate(["", "thank you", ""], total_minutes=1.5))
