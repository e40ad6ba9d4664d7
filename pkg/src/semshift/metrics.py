"""Change metrics between a concept's neighborhoods in two consecutive periods.

* HAD: Jensen-Shannon divergence between the anchor-to-member similarity
  histograms measured in the source and in the target space.
* CSD: mean cosine distance between the rotated (shadow) source neighborhood
  and the observed target neighborhood.
* NCD: change in Pearson kurtosis of all pairwise member similarities over
  the union of both neighborhoods, target minus source.
* LO: Jaccard similarity of the two neighborhoods' term sets.

Raw values are standardized against the same metrics computed for randomly
chosen non-concept anchors. This module also holds the distance-level
stratification used to export term pairs for human annotation.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from ._io import atomic_write_text, read_table, tsv
from .alignment import AlignmentMap, ShadowObject, shadow
from .clustering import SemanticObject
from .embedding import EmbeddingSpace

log = logging.getLogger(__name__)

METRICS = ("HAD", "CSD", "NCD", "LO")
DEFAULT_BINS = 20
MIN_TERMS = 5
SD_FLOOR = 1e-9
MIN_BASELINE = 30


class MetricError(ValueError):
    pass


class ZeroVarianceError(ArithmeticError):
    pass


class BaselineError(RuntimeError):
    pass


@dataclass(frozen=True)
class TransitionKey:
    concept: str
    source_period: str
    target_period: str

    @property
    def transition(self) -> str:
        return transition_name(self.source_period, self.target_period)


def transition_name(source_period: str, target_period: str) -> str:
    return f"{source_period}_{target_period}"


@dataclass(frozen=True)
class MetricValue:
    raw: float
    z: float
    baseline_mean: float
    baseline_sd: float
    n_baseline: int
    reliable: bool

    @classmethod
    def standardize(cls, raw: float, mean: float, sd: float, n: int, reliable: bool = True) -> "MetricValue":
        if not reliable or not math.isfinite(raw):
            return cls(float("nan"), float("nan"), mean, sd, n, False)
        return cls(raw, (raw - mean) / sd, mean, sd, n, True)


@dataclass(frozen=True)
class UnionSet:
    concept: str
    members: frozenset[str]

    def sorted_members(self) -> list[str]:
        return sorted(self.members)


def union_set(
    source_obj: SemanticObject, target_obj: SemanticObject, source: EmbeddingSpace, target: EmbeddingSpace
) -> UnionSet:
    both = source_obj.members | target_obj.members
    return UnionSet(source_obj.concept, frozenset(t for t in both if t in source and t in target))


# -- primitives -------------------------------------------------------------


def js_divergence(p: Sequence[float], q: Sequence[float]) -> float:
    """Jensen-Shannon divergence in nats; ``0 log 0`` is taken as 0."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape or p.ndim != 1:
        raise MetricError(f"histogram shapes differ: {p.shape} vs {q.shape}")
    for name, h in (("p", p), ("q", q)):
        if np.any(h < 0) or abs(h.sum() - 1.0) > 1e-9:
            raise MetricError(f"{name} is not a probability vector")
    m = 0.5 * (p + q)

    def kl(a):
        nz = a > 0
        return float(np.sum(a[nz] * np.log(a[nz] / m[nz])))

    return 0.5 * kl(p) + 0.5 * kl(q)


def similarity_histogram(values: Sequence[float], bins: int = DEFAULT_BINS) -> np.ndarray:
    """Add-one-smoothed, normalized histogram over ``[-1, 1]`` with equal-width bins."""
    if bins < 1:
        raise ValueError("bins must be positive")
    v = np.clip(np.asarray(values, dtype=np.float64), -1.0, 1.0)
    counts, _ = np.histogram(v, bins=bins, range=(-1.0, 1.0))
    counts = counts + 1.0
    return counts / counts.sum()


def kurtosis(values: Sequence[float]) -> float:
    """Pearson kurtosis ``m4 / m2**2`` with population moments (normal gives 3)."""
    v = np.asarray(values, dtype=np.float64)
    if v.size < 4:
        raise MetricError("kurtosis needs at least 4 values")
    dev = v - v.mean()
    m2 = np.mean(dev**2)
    if m2 <= 0:
        raise ZeroVarianceError("kurtosis undefined for zero variance")
    return float(np.mean(dev**4) / (m2 * m2))


def pairwise_similarities(U: np.ndarray) -> np.ndarray:
    """Cosine similarities of unit rows over unordered pairs ``i < j``."""
    S = U @ U.T
    i, j = np.triu_indices(len(U), k=1)
    return S[i, j]


# -- the four metrics -------------------------------------------------------


def had_terms(source: EmbeddingSpace, target: EmbeddingSpace, obj: SemanticObject) -> list[str]:
    return [t for t in obj.sorted_members() if t != obj.concept and t in source and t in target]


def had(
    source: EmbeddingSpace, target: EmbeddingSpace, obj: SemanticObject, bins: int = DEFAULT_BINS
) -> tuple[float, int]:
    """(raw HAD, number of terms it rests on). Raw is NaN when nothing is shared.

    The anchor itself is left out: its self-similarity is 1 in both spaces
    and says nothing about change.
    """
    if obj.concept not in source or obj.concept not in target:
        return float("nan"), 0
    terms = had_terms(source, target, obj)
    if not terms:
        return float("nan"), 0
    s = source.unit_vectors(terms) @ source.unit()[source.index(obj.concept)]
    t = target.unit_vectors(terms) @ target.unit()[target.index(obj.concept)]
    return js_divergence(similarity_histogram(s, bins), similarity_histogram(t, bins)), len(terms)


def csd(shade: ShadowObject, observed: SemanticObject, target: EmbeddingSpace) -> float:
    """Mean cosine distance over all (shadow member, observed member) pairs.

    Because every vector is normalized first, the mean of ``1 - a.b`` over the
    cross product equals ``1 - mean(a) . mean(b)``.
    """
    if not shade.members or not observed.members:
        raise MetricError("csd needs two non-empty neighborhoods")
    A = shade.matrix()
    norms = np.linalg.norm(A, axis=1, keepdims=True)
    A = np.divide(A, norms, out=np.zeros_like(A), where=norms > 0)
    B = target.unit_vectors(observed.sorted_members())
    return float(1.0 - A.mean(axis=0) @ B.mean(axis=0))


def ncd(source: EmbeddingSpace, target: EmbeddingSpace, union: UnionSet) -> float:
    """Kurtosis of pairwise similarities in the target space minus that in the source space."""
    terms = union.sorted_members()
    if len(terms) < 4:
        raise MetricError("ncd needs at least 4 union members")
    k_src = kurtosis(pairwise_similarities(source.unit_vectors(terms)))
    k_tgt = kurtosis(pairwise_similarities(target.unit_vectors(terms)))
    return k_tgt - k_src


def lexical_overlap(a: SemanticObject | Iterable[str], b: SemanticObject | Iterable[str]) -> float:
    A = a.members if isinstance(a, SemanticObject) else frozenset(a)
    B = b.members if isinstance(b, SemanticObject) else frozenset(b)
    if not A or not B:
        raise MetricError("lexical overlap needs two non-empty sets")
    return len(A & B) / len(A | B)


@dataclass(frozen=True)
class RawMetrics:
    """Unstandardized metric values for one anchor and transition."""

    values: dict[str, float]
    reliable: dict[str, bool]


def raw_metrics(
    source_obj: SemanticObject,
    target_obj: SemanticObject,
    source: EmbeddingSpace,
    target: EmbeddingSpace,
    alignment: AlignmentMap,
    bins: int = DEFAULT_BINS,
    min_terms: int = MIN_TERMS,
) -> RawMetrics:
    values: dict[str, float] = {}
    reliable: dict[str, bool] = {}

    h, n_shared = had(source, target, source_obj, bins)
    values["HAD"], reliable["HAD"] = h, n_shared >= min_terms and math.isfinite(h)

    values["CSD"] = csd(shadow(source_obj, alignment, source), target_obj, target)
    reliable["CSD"] = min(len(source_obj), len(target_obj)) >= min_terms

    union = union_set(source_obj, target_obj, source, target)
    try:
        values["NCD"] = ncd(source, target, union)
        reliable["NCD"] = len(union.members) >= min_terms
    except (MetricError, ZeroVarianceError) as exc:
        log.debug("NCD undefined for %s: %s", source_obj.concept, exc)
        values["NCD"], reliable["NCD"] = float("nan"), False

    values["LO"] = lexical_overlap(source_obj, target_obj)
    reliable["LO"] = True
    return RawMetrics(values, reliable)


# -- baselines --------------------------------------------------------------


@dataclass(frozen=True)
class Baseline:
    mean: float
    sd: float
    samples: tuple[float, ...]

    @property
    def n(self) -> int:
        return len(self.samples)


def eligible_anchors(
    source: EmbeddingSpace, target: EmbeddingSpace, exclusions: Iterable[str]
) -> list[str]:
    """Terms in both vocabularies, minus the exclusions, in source vocabulary order."""
    excluded = set(exclusions)
    return [t for t in source.vocab if t in target and t not in excluded]


def pick_anchors(eligible: Sequence[str], n_samples: int, seed: int) -> list[str]:
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    if len(eligible) < MIN_BASELINE:
        raise BaselineError(f"only {len(eligible)} eligible baseline anchors; need >= {MIN_BASELINE}")
    rng = np.random.default_rng(seed)
    k = min(n_samples, len(eligible))
    if k < n_samples:
        log.warning("only %d eligible baseline anchors for %d requested samples", k, n_samples)
    picked = rng.choice(len(eligible), size=k, replace=False)
    return [eligible[i] for i in picked]


def baseline_samples(
    anchors: Sequence[str],
    neighborhoods: Callable[[str], tuple[SemanticObject, SemanticObject] | None],
    source: EmbeddingSpace,
    target: EmbeddingSpace,
    alignment: AlignmentMap,
    bins: int = DEFAULT_BINS,
    min_terms: int = MIN_TERMS,
) -> dict[str, list[float]]:
    """Raw metrics of every anchor whose neighborhoods could be built, per metric.

    ``neighborhoods(anchor)`` returns the anchor's (source, target) objects or
    ``None`` if either could not be formed. Unreliable values are dropped.
    """
    out: dict[str, list[float]] = {m: [] for m in METRICS}
    for anchor in anchors:
        pair = neighborhoods(anchor)
        if pair is None:
            continue
        rm = raw_metrics(*pair, source, target, alignment, bins, min_terms)
        for m in METRICS:
            if rm.reliable[m] and math.isfinite(rm.values[m]):
                out[m].append(rm.values[m])
    return out


def baseline(samples: Sequence[float], metric: str = "") -> Baseline:
    """Mean and sample sd (floored) of baseline values; too few values is fatal."""
    if len(samples) < MIN_BASELINE:
        raise BaselineError(f"{metric or 'metric'} baseline has {len(samples)} samples; need >= {MIN_BASELINE}")
    arr = np.asarray(samples, dtype=np.float64)
    return Baseline(float(arr.mean()), max(float(arr.std(ddof=1)), SD_FLOOR), tuple(arr.tolist()))


@dataclass
class EvolutionReport:
    concept: str
    source_period: str
    target_period: str
    values: dict[str, MetricValue]
    label: str | None = None
    rule: int | None = None

    @property
    def transition(self) -> str:
        return transition_name(self.source_period, self.target_period)

    def zs(self) -> tuple[float, float, float, float]:
        return tuple(self.values[m].z for m in METRICS)


def evolution_report(
    key: TransitionKey, raw: RawMetrics, baselines: Mapping[str, Baseline]
) -> EvolutionReport:
    values = {
        m: MetricValue.standardize(raw.values[m], baselines[m].mean, baselines[m].sd, baselines[m].n, raw.reliable[m])
        for m in METRICS
    }
    return EvolutionReport(key.concept, key.source_period, key.target_period, values)


def metrics_path(directory: str | Path, transition: str) -> Path:
    return Path(directory) / f"{transition}.metrics.tsv"


_METRIC_HEADER = ["concept", "metric", "raw", "z", "baseline_mean", "baseline_sd", "n_baseline", "reliable"]


def write_metrics(reports: Sequence[EvolutionReport], directory: str | Path, transition: str) -> Path:
    rows = []
    for r in reports:
        for m in METRICS:
            v = r.values[m]
            rows.append((r.concept, m, v.raw, v.z, v.baseline_mean, v.baseline_sd, v.n_baseline, v.reliable))
    path = metrics_path(directory, transition)
    atomic_write_text(path, tsv(_METRIC_HEADER, rows))
    return path


def read_metrics(path: str | Path, source_period: str, target_period: str) -> list[EvolutionReport]:
    by_concept: dict[str, dict[str, MetricValue]] = {}
    for row in read_table(path):
        by_concept.setdefault(row["concept"], {})[row["metric"]] = MetricValue(
            float(row["raw"]),
            float(row["z"]),
            float(row["baseline_mean"]),
            float(row["baseline_sd"]),
            int(row["n_baseline"]),
            row["reliable"] == "true",
        )
    return [EvolutionReport(c, source_period, target_period, v) for c, v in by_concept.items()]


# -- distance levels and annotation export ---------------------------------


class LevelError(RuntimeError):
    pass


LEVEL_BANDS = {1: (-1.5, -0.5), 2: (-0.5, 0.5), 3: (0.5, 1.5)}


def assign_levels(distances: Mapping[str, float]) -> dict[str, int]:
    """Half-open one-sd bands centred on the mean; terms outside all bands are left out."""
    terms = sorted(distances)
    d = np.array([distances[t] for t in terms], dtype=np.float64)
    if d.size == 0:
        return {}
    mu, sigma = float(d.mean()), float(d.std())
    if sigma <= 0:
        raise LevelError("distance distribution has zero spread; levels undefined")
    out = {}
    for t, x in zip(terms, d):
        for level, (lo, hi) in LEVEL_BANDS.items():
            if mu + lo * sigma <= x < mu + hi * sigma:
                out[t] = level
                break
    return out


def distance_levels(space: EmbeddingSpace, objects: Sequence[SemanticObject]) -> dict[str, int]:
    """Level of every non-member term by its minimum cosine distance to any object centroid."""
    if not objects:
        raise LevelError("no objects to measure distance from")
    members = set().union(*(o.members for o in objects))
    C = np.array([o.centroid for o in objects], dtype=np.float64)
    norms = np.linalg.norm(C, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise LevelError("an object has a zero centroid")
    C = C / norms
    terms = [t for t in space.vocab if t not in members]
    if not terms:
        return {}
    dist = 1.0 - (space.unit_vectors(terms) @ C.T).max(axis=1)
    return assign_levels(dict(zip(terms, dist.tolist())))


@dataclass(frozen=True)
class AnnotationPair:
    pair_id: int
    level: int
    term_a: str
    term_b: str
    concept_position: str  # "a" or "b": which side carries the object member


def _allocation(n_pairs: int) -> dict[int, int]:
    base, extra = divmod(n_pairs, 3)
    return {level: base + (1 if level <= extra else 0) for level in (1, 2, 3)}


def export_annotation_pairs(
    levels: Mapping[str, int], objects: Sequence[SemanticObject], n_pairs: int, seed: int
) -> list[AnnotationPair]:
    """Pairs of (object member, leveled term), split evenly over levels, in shuffled order.

    Leveled terms are drawn without replacement, so each level must hold at
    least its share of pairs.
    """
    if n_pairs < 1:
        raise ValueError("n_pairs must be positive")
    members = sorted(set().union(*(o.members for o in objects))) if objects else []
    if not members:
        raise LevelError("no object members to pair with")
    by_level = {lv: sorted(t for t, l in levels.items() if l == lv) for lv in (1, 2, 3)}
    rng = np.random.default_rng(seed)
    drawn = []
    for level, count in _allocation(n_pairs).items():
        pool = by_level[level]
        if len(pool) < count:
            raise LevelError(f"level {level} holds {len(pool)} terms; {count} pairs requested")
        others = rng.choice(len(pool), size=count, replace=False)
        mine = rng.integers(0, len(members), size=count)
        drawn.extend((level, members[m], pool[o]) for m, o in zip(mine, others))
    order = rng.permutation(len(drawn))
    flips = rng.random(len(drawn)) < 0.5
    pairs = []
    for pid, (idx, flip) in enumerate(zip(order, flips), 1):
        level, member, other = drawn[idx]
        a, b, pos = (other, member, "b") if flip else (member, other, "a")
        pairs.append(AnnotationPair(pid, level, a, b, pos))
    return pairs


def write_annotation_pairs(pairs: Sequence[AnnotationPair], directory: str | Path) -> tuple[Path, Path]:
    directory = Path(directory)
    pairs_file = directory / "annotation_pairs.tsv"
    key_file = directory / "annotation_key.tsv"
    atomic_write_text(
        pairs_file, tsv(["pair_id", "level", "term_a", "term_b"], [(p.pair_id, p.level, p.term_a, p.term_b) for p in pairs])
    )
    atomic_write_text(
        key_file,
        tsv(
            ["pair_id", "concept_position", "concept_term"],
            [(p.pair_id, p.concept_position, p.term_a if p.concept_position == "a" else p.term_b) for p in pairs],
        ),
    )
    return pairs_file, key_file
