"""In-memory orchestration: streams in, per-transition reports out.

The command-line stages call these same functions and add file I/O around
them; tests and the notebooks call them directly.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .alignment import AlignmentMap, procrustes
from .clustering import (
    ClusterAssignment,
    ClusteringError,
    RefineParams,
    SemanticObject,
    coarse_partition,
    refine_neighborhood,
)
from .corpus import TokenStream
from .drift import DriftMatrix, drift_matrix
from .embedding import EmbeddingSpace, Hyperparams, OutOfVocabularyError, train
from .metrics import (
    DEFAULT_BINS,
    METRICS,
    MIN_TERMS,
    Baseline,
    EvolutionReport,
    TransitionKey,
    baseline,
    baseline_samples,
    eligible_anchors,
    evolution_report,
    pick_anchors,
    raw_metrics,
)
from .patterns import Thresholds, classify_report
from .phrases import collapse_significant

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PipelineParams:
    phrases: bool = True
    z_threshold: float = 1.96
    min_pair_count: int = 5
    max_rounds: int = 4
    embedding: Hyperparams = Hyperparams()
    coarse_sample: int = 15000
    coarse_min_cluster_size: int = 15
    coarse_min_samples: int = 5
    refine: RefineParams = RefineParams()
    bins: int = DEFAULT_BINS
    min_terms: int = MIN_TERMS
    n_baseline: int = 200
    thresholds: Thresholds = Thresholds()
    seed: int = 1


@dataclass
class PeriodModel:
    space: EmbeddingSpace
    coarse: ClusterAssignment
    objects: dict[str, SemanticObject]
    cache: dict = field(default_factory=dict, repr=False)


@dataclass
class TransitionResult:
    source_period: str
    target_period: str
    alignment: AlignmentMap
    reports: list[EvolutionReport]
    baselines: dict[str, Baseline]
    drift: DriftMatrix


def collapse_phrases(streams: Mapping[str, TokenStream], params: PipelineParams) -> dict[str, TokenStream]:
    if not params.phrases:
        return dict(streams)
    return {
        p: collapse_significant(s, params.z_threshold, params.min_pair_count, params.max_rounds)
        for p, s in streams.items()
    }


def build_period(
    space: EmbeddingSpace, concepts: Sequence[str], params: PipelineParams, coarse: ClusterAssignment | None = None
) -> PeriodModel:
    if coarse is None:
        coarse = coarse_partition(
            space,
            params.coarse_sample,
            params.coarse_min_cluster_size,
            params.coarse_min_samples,
            seed=params.seed,
        )
    model = PeriodModel(space, coarse, {})
    for concept in concepts:
        obj = neighborhood(model, concept, params)
        if obj is None:
            log.warning("concept %r has no neighborhood in %s", concept, space.period)
        else:
            model.objects[concept] = obj
    return model


def neighborhood(model: PeriodModel, anchor: str, params: PipelineParams) -> SemanticObject | None:
    try:
        return refine_neighborhood(model.space, anchor, model.coarse, params.refine, params.seed, model.cache)
    except (OutOfVocabularyError, ClusteringError) as exc:
        log.debug("no neighborhood for %r: %s", anchor, exc)
        return None


def transition(
    source: PeriodModel,
    target: PeriodModel,
    concepts: Sequence[str],
    params: PipelineParams,
    alignment: AlignmentMap | None = None,
) -> TransitionResult:
    """Metrics, z-scores, labels and drift for one consecutive pair of periods.

    ``alignment`` is fitted here unless a stored one is passed in.
    """
    if alignment is None:
        alignment = procrustes(source.space, target.space)
    exclusions = set(concepts)
    for model in (source, target):
        for obj in model.objects.values():
            exclusions |= obj.members
    anchors = pick_anchors(eligible_anchors(source.space, target.space, exclusions), params.n_baseline, params.seed)

    def pair(anchor):
        a, b = neighborhood(source, anchor, params), neighborhood(target, anchor, params)
        return None if a is None or b is None else (a, b)

    samples = baseline_samples(anchors, pair, source.space, target.space, alignment, params.bins, params.min_terms)
    baselines = {m: baseline(samples[m], m) for m in METRICS}
    reports = []
    for concept in concepts:
        if concept not in source.objects or concept not in target.objects:
            continue
        raw = raw_metrics(
            source.objects[concept], target.objects[concept], source.space, target.space, alignment,
            params.bins, params.min_terms,
        )
        key = TransitionKey(concept, source.space.period, target.space.period)
        reports.append(classify_report(evolution_report(key, raw, baselines), params.thresholds))
    drift = drift_matrix(source.objects, target.objects)
    return TransitionResult(source.space.period, target.space.period, alignment, reports, baselines, drift)


def run(
    streams: Mapping[str, TokenStream],
    periods: Sequence[str],
    concepts: Sequence[str],
    params: PipelineParams = PipelineParams(),
) -> list[TransitionResult]:
    """Full pipeline over consecutive periods, returning one result per transition."""
    streams = collapse_phrases({p: streams[p] for p in periods}, params)
    models = {}
    for p in periods:
        models[p] = build_period(train(streams[p], params.embedding), concepts, params)
    return [transition(models[a], models[b], concepts, params) for a, b in zip(periods, periods[1:])]
