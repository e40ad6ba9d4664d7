"""Phrase mining on planted collocations.

Collocations are found by z-scoring P(w2 | w1) across all frequent pairs.
On a flat background every ordinary pair sits near 1/|V|, so only the
planted pairs stand out. On a Zipfian background, P(w2 | w1) tracks how
common w2 is, and the upper tail of ordinary pairs crosses the threshold too.

Run: python3 notebooks/01_phrase_mining.py
"""

from semshift.phrases import bigram_stats, collapse_significant
from semshift.synth import collocation_corpus

for label, exponent, n_background in (("flat, 100 words", 0.0, 100), ("Zipfian, 2000 words", 1.0, 2000)):
    stream, planted = collocation_corpus(n_background=n_background, zipf_exponent=exponent, seed=0)
    history = []
    collapse_significant(stream, z_threshold=1.96, history=history)
    found = {(s.w1, s.w2) for round_stats in history for s in round_stats}
    print(f"{label}: {len(found & set(planted))}/5 planted found, {len(found - set(planted))} others joined")

# the five planted pairs carry the largest z-scores in both cases
stream, planted = collocation_corpus(seed=0)
top = sorted(bigram_stats(stream), key=lambda s: -s.z)[:7]
for s in top:
    print(f"  {s.w1:>10s} {s.w2:<10s} P={s.cond_prob:.3f} z={s.z:.1f}")
