"""Why an even split lowers kurtosis and a small splinter raises it.

NCD is the change in Pearson kurtosis of pairwise member similarities. When
a cohesive set splits into two equal halves, the similarities become
bimodal with equal weight and kurtosis falls toward 1. When a small splinter
breaks off, a few outlier pairs form a thin tail and kurtosis grows (roughly
like 1/p for an outlier-pair fraction p).

Run: python3 notebooks/03_kurtosis_signatures.py
"""

import numpy as np

from semshift.embedding import EmbeddingSpace
from semshift.metrics import UnionSet, kurtosis, ncd, pairwise_similarities


def space(vectors, period):
    terms = sorted(vectors)
    return EmbeddingSpace(period, terms, np.ones(len(terms), dtype=int), np.array([vectors[t] for t in terms]))


rng = np.random.default_rng(0)
axes = np.linalg.qr(rng.normal(size=(8, 8)))[0]
print(" split  kurtosis before -> after    NCD")
for big, small in ((29, 1), (28, 2), (25, 5), (20, 10), (15, 15)):
    terms = [f"m{i:02d}" for i in range(big + small)]
    before = {t: axes[0] + 0.3 * rng.normal(size=8) for t in terms}
    after = {t: (axes[0] if i < big else axes[1]) + 0.05 * rng.normal(size=8) for i, t in enumerate(terms)}
    a, b = space(before, "T1"), space(after, "T2")
    k_a = kurtosis(pairwise_similarities(a.unit()))
    k_b = kurtosis(pairwise_similarities(b.unit()))
    value = ncd(a, b, UnionSet("m00", frozenset(terms)))
    print(f" {big:2d}/{small:<2d}  {k_a:6.2f} -> {k_b:6.2f}        {value:+7.2f}")
