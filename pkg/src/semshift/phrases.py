"""Conditional-probability bigram detection and recursive phrase collapsing.

For each adjacent pair ``(w1, w2)`` the estimate ``P(w2 | w1) = c(w1 w2) / c(w1)``
is standardized against the distribution of all pairs seen at least
``min_pair_count`` times. Pairs whose z-score clears the threshold are joined
into ``w1_w2`` and the procedure is repeated on the rewritten stream, so
longer phrases can form from previously joined tokens.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from ._io import atomic_write_text, tsv
from .corpus import TokenStream

DEFAULT_Z_THRESHOLD = 1.96
DEFAULT_MIN_PAIR_COUNT = 5
DEFAULT_MAX_ROUNDS = 4


@dataclass(frozen=True)
class BigramStat:
    w1: str
    w2: str
    count_pair: int
    count_w1: int
    cond_prob: float
    z: float


def _count(documents: Iterable[list[str]]) -> tuple[Counter, Counter]:
    unigrams: Counter = Counter()
    pairs: Counter = Counter()
    for doc in documents:
        unigrams.update(doc)
        pairs.update(zip(doc, doc[1:]))
    return unigrams, pairs


def _raw_stats(stream: TokenStream, min_pair_count: int) -> list[tuple[str, str, int, int, float]]:
    unigrams, pairs = _count(stream.documents)
    rows = [
        (w1, w2, c, unigrams[w1], c / unigrams[w1])
        for (w1, w2), c in pairs.items()
        if c >= min_pair_count
    ]
    rows.sort(key=lambda r: (r[0], r[1]))
    return rows


def bigram_stats(stream: TokenStream, min_pair_count: int = DEFAULT_MIN_PAIR_COUNT) -> list[BigramStat]:
    """One stat per distinct adjacent pair, z-scored over the emitted pairs.

    The standard deviation is the population one; when it is zero every z is 0.
    """
    if min_pair_count < 1:
        raise ValueError("min_pair_count must be positive")
    if not any(stream.documents):
        raise ValueError(f"token stream {stream.period!r} is empty")
    rows = _raw_stats(stream, min_pair_count)
    if not rows:
        return []
    probs = np.array([r[4] for r in rows])
    mean, sd = probs.mean(), probs.std()
    z = (probs - mean) / sd if sd > 0 else np.zeros_like(probs)
    return [BigramStat(*r, float(zi)) for r, zi in zip(rows, z)]


def _significant(
    rows: list[tuple[str, str, int, int, float]], mean: float, sd: float, z_threshold: float
) -> list[BigramStat]:
    if sd <= 0:
        return []
    out = []
    for w1, w2, c, c1, p in rows:
        z = (p - mean) / sd
        if z > z_threshold:
            out.append(BigramStat(w1, w2, c, c1, p, z))
    out.sort(key=lambda s: (-s.z, s.w1, s.w2))
    return out


def collapse_pairs(doc: list[str], pairs: set[tuple[str, str]]) -> list[str]:
    """Greedy left-to-right joining of non-overlapping occurrences."""
    out = []
    i = 0
    n = len(doc)
    while i < n:
        if i + 1 < n and (doc[i], doc[i + 1]) in pairs:
            out.append(f"{doc[i]}_{doc[i + 1]}")
            i += 2
        else:
            out.append(doc[i])
            i += 1
    return out


def collapse_significant(
    stream: TokenStream,
    z_threshold: float = DEFAULT_Z_THRESHOLD,
    min_pair_count: int = DEFAULT_MIN_PAIR_COUNT,
    max_rounds: int = DEFAULT_MAX_ROUNDS,
    history: list[list[BigramStat]] | None = None,
) -> TokenStream:
    """Repeatedly join significant bigrams until none remain or ``max_rounds``.

    Significance in every round is judged against the conditional-probability
    distribution (mean, sd) of the input stream, i.e. the first round. If
    ``history`` is given, the pairs joined in each round are appended to it.
    """
    if z_threshold <= 0:
        raise ValueError("z_threshold must be positive")
    if max_rounds < 1:
        raise ValueError("max_rounds must be positive")
    docs = [list(doc) for doc in stream.documents]
    reference = None
    for _ in range(max_rounds):
        rows = _raw_stats(TokenStream(stream.period, docs), min_pair_count)
        if not rows:
            break
        if reference is None:
            probs = np.array([r[4] for r in rows])
            reference = (float(probs.mean()), float(probs.std()))
        chosen = _significant(rows, *reference, z_threshold)
        if not chosen:
            break
        if history is not None:
            history.append(chosen)
        pairs = {(s.w1, s.w2) for s in chosen}
        docs = [collapse_pairs(doc, pairs) for doc in docs]
    return TokenStream(stream.period, docs)


def phrases_path(directory: str | Path, period: str) -> Path:
    return Path(directory) / f"{period}.phrases.tsv"


def write_phrases(history: list[list[BigramStat]], directory: str | Path, period: str) -> Path:
    """Joined pairs across all rounds, ranked in the order they were applied."""
    flat = [s for round_stats in history for s in round_stats]
    rows = [(s.w1, s.w2, s.count_pair, s.cond_prob, s.z, rank) for rank, s in enumerate(flat, 1)]
    path = phrases_path(directory, period)
    atomic_write_text(path, tsv(["w1", "w2", "count_pair", "cond_prob", "z", "rank"], rows))
    return path
