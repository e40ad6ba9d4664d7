"""Per-period CBOW word embeddings trained with negative sampling.

The training loop follows the reference word2vec recipe: averaged context
vectors, a randomly shrunk window per position, a unigram^0.75 noise table,
and a learning rate decaying linearly over all epochs. Randomness comes from
the same 64-bit linear congruential generator word2vec uses, seeded from
``Hyperparams.seed``, so single-worker runs are bit-reproducible.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numba
import numpy as np

from ._io import atomic_write_text
from .corpus import TokenStream

log = logging.getLogger(__name__)

MODEL_MAGIC = "semshift-embedding"
MODEL_VERSION = "v1"
NOISE_POWER = 0.75


class EmbeddingError(RuntimeError):
    """Training could not produce a usable space."""


class OutOfVocabularyError(KeyError):
    pass


class ZeroVectorError(ArithmeticError):
    pass


class ModelFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Hyperparams:
    dim: int = 100
    window: int = 5
    min_count: int = 5
    negatives: int = 5
    epochs: int = 5
    learning_rate: float = 0.025
    seed: int = 1
    sample: float = 0.0
    workers: int = 1

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("dim must be at least 2")
        if self.window < 1:
            raise ValueError("window must be at least 1")
        if self.min_count < 1 or self.negatives < 1 or self.epochs < 1:
            raise ValueError("min_count, negatives and epochs must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


@dataclass
class EmbeddingSpace:
    """Vocabulary (descending frequency, ties lexicographic) with one row per term."""

    period: str
    vocab: list[str]
    freqs: np.ndarray
    vectors: np.ndarray
    hyperparams: Hyperparams | None = None
    _index: dict[str, int] = field(init=False, repr=False)
    _unit: np.ndarray | None = field(init=False, repr=False, default=None)

    def __post_init__(self):
        self.freqs = np.asarray(self.freqs, dtype=np.int64)
        self.vectors = np.asarray(self.vectors)
        if self.vectors.ndim != 2 or self.vectors.shape[0] != len(self.vocab):
            raise ValueError("vectors must have one row per vocabulary term")
        if len(self.freqs) != len(self.vocab):
            raise ValueError("freqs must have one entry per vocabulary term")
        self._index = {t: i for i, t in enumerate(self.vocab)}

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return len(self.vocab)

    def __contains__(self, term: str) -> bool:
        return term in self._index

    def index(self, term: str) -> int:
        try:
            return self._index[term]
        except KeyError:
            raise OutOfVocabularyError(f"{term!r} not in {self.period} vocabulary") from None

    def indices(self, terms) -> np.ndarray:
        return np.array([self.index(t) for t in terms], dtype=np.int64)

    def vector(self, term: str) -> np.ndarray:
        return self.vectors[self.index(term)]

    def unit(self) -> np.ndarray:
        """L2-normalized copy of all vectors (zero rows stay zero)."""
        if self._unit is None:
            v = self.vectors.astype(np.float64)
            norms = np.linalg.norm(v, axis=1, keepdims=True)
            self._unit = np.divide(v, norms, out=np.zeros_like(v), where=norms > 0)
        return self._unit

    def unit_vectors(self, terms) -> np.ndarray:
        return self.unit()[self.indices(terms)]

    def frequency(self, term: str) -> int:
        return int(self.freqs[self.index(term)])


def cosine(space: EmbeddingSpace, a: str, b: str) -> float:
    u = space.vector(a).astype(np.float64)
    v = space.vector(b).astype(np.float64)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise ZeroVectorError(f"zero vector for {a!r} or {b!r}")
    return float(np.clip(u @ v / (nu * nv), -1.0, 1.0))


def build_vocab(stream: TokenStream, min_count: int) -> tuple[list[str], np.ndarray]:
    counts = Counter(stream.tokens())
    kept = sorted(((t, c) for t, c in counts.items() if c >= min_count), key=lambda tc: (-tc[1], tc[0]))
    return [t for t, _ in kept], np.array([c for _, c in kept], dtype=np.int64)


def _encode(stream: TokenStream, index: dict[str, int]) -> tuple[np.ndarray, np.ndarray]:
    flat: list[int] = []
    offsets = [0]
    for doc in stream.documents:
        ids = [index[t] for t in doc if t in index]
        if len(ids) > 1:
            flat.extend(ids)
            offsets.append(len(flat))
    return np.array(flat, dtype=np.int32), np.array(offsets, dtype=np.int64)


def train(stream: TokenStream, hyperparams: Hyperparams = Hyperparams()) -> EmbeddingSpace:
    """Fit one CBOW model on a single period's stream.

    ``workers > 1`` runs documents in parallel with unsynchronized updates;
    results then vary from run to run. ``workers == 1`` is deterministic.
    """
    hp = hyperparams
    if not any(stream.documents):
        raise EmbeddingError(f"token stream {stream.period!r} is empty")
    vocab, freqs = build_vocab(stream, hp.min_count)
    if not vocab:
        raise EmbeddingError(
            f"{stream.period}: no term reaches min_count={hp.min_count} "
            f"({stream.n_tokens()} tokens in {len(stream)} documents)"
        )
    index = {t: i for i, t in enumerate(vocab)}
    corpus, offsets = _encode(stream, index)

    rng = np.random.default_rng(hp.seed)
    syn0 = ((rng.random((len(vocab), hp.dim)) - 0.5) / hp.dim).astype(np.float32)
    syn1 = np.zeros((len(vocab), hp.dim), dtype=np.float32)
    noise = freqs.astype(np.float64) ** NOISE_POWER
    noise_cdf = np.cumsum(noise / noise.sum())
    keep = _keep_probabilities(freqs, hp.sample)

    if len(corpus):
        args = (corpus, offsets, syn0, syn1, noise_cdf, keep, hp.window, hp.negatives,
                hp.epochs, np.float32(hp.learning_rate), np.uint64(hp.seed))
        if hp.workers > 1:
            numba.set_num_threads(min(hp.workers, numba.config.NUMBA_NUM_THREADS))
            _cbow_parallel(*args, hp.workers)
        else:
            _cbow_serial(*args)
    log.info("%s: trained %d terms x %d dims on %d tokens", stream.period, len(vocab), hp.dim, len(corpus))
    return EmbeddingSpace(stream.period, vocab, freqs, syn0, hp)


def _keep_probabilities(freqs: np.ndarray, sample: float) -> np.ndarray:
    if sample <= 0:
        return np.ones(len(freqs))
    threshold = sample * freqs.sum()
    f = freqs.astype(np.float64)
    return np.minimum(1.0, (np.sqrt(f / threshold) + 1.0) * threshold / f)


_LCG_MUL = np.uint64(25214903917)
_LCG_ADD = np.uint64(11)


@numba.njit(cache=True)
def _lcg(state):
    return state * _LCG_MUL + _LCG_ADD


@numba.njit(cache=True)
def _uniform(state):
    return np.float64(state >> np.uint64(11)) / 9007199254740992.0


@numba.njit(cache=True)
def _train_document(corpus, start, end, syn0, syn1, noise_cdf, keep, window, negatives,
                    alpha, state, sent, h, grad):
    n = 0
    for i in range(start, end):
        w = corpus[i]
        if keep[w] < 1.0:
            state = _lcg(state)
            if _uniform(state) > keep[w]:
                continue
        sent[n] = w
        n += 1
    dim = syn0.shape[1]
    for pos in range(n):
        state = _lcg(state)
        reduce = np.int64(state % np.uint64(window))
        span = window - reduce
        lo = max(0, pos - span)
        hi = min(n, pos + span + 1)
        count = 0
        for d in range(dim):
            h[d] = 0.0
            grad[d] = 0.0
        for c in range(lo, hi):
            if c != pos:
                row = sent[c]
                for d in range(dim):
                    h[d] += syn0[row, d]
                count += 1
        if count == 0:
            continue
        for d in range(dim):
            h[d] /= count
        target = sent[pos]
        for k in range(negatives + 1):
            if k == 0:
                out = target
                label = 1.0
            else:
                state = _lcg(state)
                out = np.searchsorted(noise_cdf, _uniform(state), side="right")
                if out >= noise_cdf.shape[0]:
                    out = noise_cdf.shape[0] - 1
                if out == target:
                    continue
                label = 0.0
            f = 0.0
            for d in range(dim):
                f += h[d] * syn1[out, d]
            if f > 6.0:
                g = (label - 1.0) * alpha
            elif f < -6.0:
                g = label * alpha
            else:
                g = (label - 1.0 / (1.0 + np.exp(-f))) * alpha
            for d in range(dim):
                grad[d] += g * syn1[out, d]
                syn1[out, d] += g * h[d]
        for c in range(lo, hi):
            if c != pos:
                row = sent[c]
                for d in range(dim):
                    syn0[row, d] += grad[d]
    return state


@numba.njit(cache=True)
def _cbow_serial(corpus, offsets, syn0, syn1, noise_cdf, keep, window, negatives, epochs,
                 lr, seed):
    n_docs = offsets.shape[0] - 1
    total = np.float64(corpus.shape[0]) * epochs
    dim = syn0.shape[1]
    longest = 0
    for s in range(n_docs):
        longest = max(longest, offsets[s + 1] - offsets[s])
    sent = np.empty(longest, dtype=np.int32)
    h = np.empty(dim, dtype=np.float32)
    grad = np.empty(dim, dtype=np.float32)
    state = seed
    done = 0.0
    for _ in range(epochs):
        for s in range(n_docs):
            alpha = lr * max(1e-4, 1.0 - done / total)
            state = _train_document(corpus, offsets[s], offsets[s + 1], syn0, syn1, noise_cdf,
                                    keep, window, negatives, np.float32(alpha), state, sent, h, grad)
            done += offsets[s + 1] - offsets[s]


@numba.njit(parallel=True, cache=True)
def _cbow_parallel(corpus, offsets, syn0, syn1, noise_cdf, keep, window, negatives, epochs,
                   lr, seed, workers):
    n_docs = offsets.shape[0] - 1
    dim = syn0.shape[1]
    longest = 0
    for s in range(n_docs):
        longest = max(longest, offsets[s + 1] - offsets[s])
    per_worker = (n_docs + workers - 1) // workers
    for e in range(epochs):
        alpha = lr * max(1e-4, 1.0 - e / epochs)
        for w in numba.prange(workers):
            sent = np.empty(longest, dtype=np.int32)
            h = np.empty(dim, dtype=np.float32)
            grad = np.empty(dim, dtype=np.float32)
            state = seed + np.uint64(w * 7919 + e * 104729)
            for s in range(w * per_worker, min(n_docs, (w + 1) * per_worker)):
                state = _train_document(corpus, offsets[s], offsets[s + 1], syn0, syn1, noise_cdf,
                                        keep, window, negatives, np.float32(alpha), state, sent,
                                        h, grad)


def model_path(directory: str | Path, period: str) -> Path:
    return Path(directory) / f"{period}.model.txt"


def save_space(space: EmbeddingSpace, path: str | Path) -> None:
    lines = [f"{MODEL_MAGIC} {MODEL_VERSION} {space.dim} {len(space)}"]
    for term, freq, vec in zip(space.vocab, space.freqs, space.vectors):
        lines.append(" ".join([term, str(int(freq))] + [format(float(x), ".9g") for x in vec]))
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_space(path: str | Path, period: str | None = None) -> EmbeddingSpace:
    path = Path(path)
    if period is None:
        period = path.name.split(".model.txt")[0]
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ModelFormatError(f"{path}: empty model file")
    header = lines[0].split()
    if len(header) != 4 or header[0] != MODEL_MAGIC or header[1] != MODEL_VERSION:
        raise ModelFormatError(f"{path}: bad header {lines[0]!r}")
    dim, size = int(header[2]), int(header[3])
    body = lines[1:]
    if len(body) != size:
        raise ModelFormatError(f"{path}: header says {size} terms, found {len(body)}")
    vocab, freqs = [], np.empty(size, dtype=np.int64)
    vectors = np.empty((size, dim), dtype=np.float32)
    for i, line in enumerate(body):
        parts = line.split(" ")
        if len(parts) != dim + 2:
            raise ModelFormatError(f"{path}:{i + 2}: expected {dim} components, got {len(parts) - 2}")
        vocab.append(parts[0])
        freqs[i] = int(parts[1])
        vectors[i] = np.array(parts[2:], dtype=np.float32)
    return EmbeddingSpace(period, vocab, freqs, vectors)


def hyperparams_dict(hp: Hyperparams) -> dict:
    return asdict(hp)
