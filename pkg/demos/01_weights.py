# Temperature-scaled sampling weights for a multilingual corpus.
# Run: python demos/01_weights.py

from speechblend import hierarchical_weights, marginalize, natural_weights, temperature_weights

hours = {"en": 63.4, "de": 6.1, "es": 6.6, "fr": 5.1, "ns": 0.3}  # thousands of hours, ns = non-speech

nat = natural_weights(hours)
flat = temperature_weights(hours, alpha=0.5)

print("lang  natural  alpha=0.5")
for k in hours:
    print(f"{k:4s}  {nat[k]:.4f}   {flat[k]:.4f}")

# alpha=0 gives every stratum the same share
print(dict(temperature_weights(hours, alpha=0.0)))

# two levels: pick a language, then a dataset inside it
# (dataset names must be unique across languages)
pairs = {
    ("en", "en-web"): 40.0, ("en", "en-books"): 23.4,
    ("de", "de-web"): 4.0, ("de", "de-books"): 2.1,
}
w = hierarchical_weights(pairs, alpha_lang=0.5, alpha_ds=0.5)
for key, p in w.items():
    print(key, round(p, 4))
print("language marginals", marginalize(w))
