"""End-to-end acceptance criteria, one test per criterion.

A summary line per criterion (PASS/FAIL) is printed at the end of the run.
"""

import math
import shutil
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import obj, space_from
from oracles import cosine_longhand, hdbscan_reference, jsd_longhand, pearson_kurtosis_longhand, same_partition
from semshift.alignment import AlignmentMap, procrustes, shadow
from semshift.cli import main
from semshift.clustering import RefineParams, coarse_partition, hdbscan_labels, refine_neighborhood, stability
from semshift.drift import drift_matrix, read_drift, write_drift
from semshift.embedding import Hyperparams, train
from semshift.metrics import UnionSet, csd, js_divergence, kurtosis, lexical_overlap, ncd
from semshift.patterns import PatternLabel, classify
from semshift.phrases import collapse_significant
from semshift.pipeline import PipelineParams, build_period, neighborhood, run
from semshift.synth import (
    STANDARD_DOCS,
    STANDARD_VOCAB,
    collocation_corpus,
    generate,
    small_fixtures,
    standard_scenarios,
    sub_blob_space,
    synonym_corpus,
)

ROOT = Path(__file__).resolve().parents[1]


@pytest.mark.criterion(1, "phrase mining recovers 5 planted collocations, <= 1 false positive, < 10 s")
def test_phrase_mining():
    stream, planted = collocation_corpus(n_docs=10_000, seed=0)
    history = []
    start = time.perf_counter()
    collapse_significant(stream, z_threshold=1.96, min_pair_count=5, max_rounds=4, history=history)
    elapsed = time.perf_counter() - start
    found = {(s.w1, s.w2) for round_stats in history for s in round_stats}
    assert set(planted) <= found
    assert len(found - set(planted)) <= 1
    assert elapsed < 10


def group_gap(space, groups):
    U = {t: space.unit()[space.index(t)] for g in groups for t in g}
    intra, inter = [], []
    for gi, g in enumerate(groups):
        for hi, h in enumerate(groups):
            for a in g:
                for b in h:
                    if a < b or gi != hi:
                        (intra if gi == hi else inter).append(float(U[a] @ U[b]))
    return np.mean(intra) - np.mean(inter)


@pytest.mark.criterion(2, "planted synonyms: intra minus inter mean cosine >= 0.2 over 5 seeds, < 2 min each")
def test_embedding_sanity():
    stream, groups = synonym_corpus(seed=0)
    for seed in range(5):
        start = time.perf_counter()
        space = train(stream, Hyperparams(seed=seed, workers=1))
        elapsed = time.perf_counter() - start
        assert group_gap(space, groups) >= 0.2, seed
        assert elapsed < 120


@pytest.mark.criterion(3, "HDBSCAN partitions equal the brute-force reference on every fixture of <= 50 points")
def test_hdbscan_oracle_equivalence():
    for name, X in small_fixtures().items():
        assert len(X) <= 50
        for mcs, ms in [(5, 5), (5, 3), (8, 4), (4, 1), (6, 2), (3, 3)]:
            ref = hdbscan_reference(X, mcs, ms)
            assert same_partition(hdbscan_labels(X, mcs, ms), ref), (name, mcs, ms)


@pytest.mark.criterion(4, "refinement returns exactly the 12 planted terms, trail decreasing, anchor kept")
def test_recursive_refinement():
    vectors, anchor, core, _ = sub_blob_space(seed=0)
    space = space_from(vectors)
    coarse = coarse_partition(space, min_cluster_size=15, min_samples=5)
    final = refine_neighborhood(space, anchor, coarse)
    assert final.members == frozenset(core) and len(core) == 12
    assert all(a > b for a, b in zip(final.trail, final.trail[1:]))
    for depth in range(1, final.depth + 1):
        partial = refine_neighborhood(space, anchor, coarse, RefineParams(max_depth=depth))
        assert anchor in partial.members
        assert partial.trail == final.trail[:depth]


@pytest.mark.criterion(5, "stability over 10 clustering runs: mean >= 0.85, sd <= 0.10")
def test_stability():
    scenarios = standard_scenarios(kinds=["stable"], seed=0)
    stream = generate(scenarios, STANDARD_DOCS, STANDARD_VOCAB, seed=0)["T1"]
    space = train(stream, Hyperparams(seed=1))
    concept = scenarios[0].anchor

    def one_run(r):
        # each run redraws the coarse sample and the tie-breaking seed
        params = PipelineParams(coarse_sample=1000, seed=100 + r)
        model = build_period(space, [], params)
        return space, neighborhood(model, concept, params)

    report = stability(one_run, concept, runs=10)
    assert not report.flagged
    assert report.mean_score >= 0.85
    assert report.sd_score <= 0.10


def random_orthogonal(dim, seed):
    q, r = np.linalg.qr(np.random.default_rng(seed).normal(size=(dim, dim)))
    return q * np.sign(np.diag(r))


@pytest.mark.criterion(6, "Procrustes: rotation within 1e-5, self residual < 1e-9, angles within 1e-6")
def test_procrustes():
    rng = np.random.default_rng(0)
    vectors = {f"w{i:03d}": rng.normal(size=10) for i in range(80)}
    source = space_from(vectors, "T1")
    Q = random_orthogonal(10, 1)
    target = space_from({t: v @ Q for t, v in vectors.items()}, "T2")
    found = procrustes(source, target)
    assert np.max(np.abs(found.rotation - Q)) < 1e-5
    assert procrustes(source, space_from(vectors, "T2")).residual < 1e-9
    sh = shadow(obj(source, "w000", list(vectors)), AlignmentMap("T1", "T2", (), Q, 0.0), source)
    terms = list(vectors)
    for a, b in zip(terms, terms[1:]):
        assert abs(cosine_longhand(sh.vectors[a], sh.vectors[b]) - cosine_longhand(vectors[a], vectors[b])) < 1e-6


@pytest.mark.criterion(7, "metric oracles: JSD, CSD, kurtosis, Jaccard; JSD <= ln 2; NCD antisymmetric")
def test_metric_oracles():
    rng = np.random.default_rng(7)
    for _ in range(50):
        n = int(rng.integers(2, 31))
        p, q = rng.dirichlet(np.ones(n)), rng.dirichlet(np.ones(n))
        assert abs(js_divergence(p, q) - jsd_longhand(p, q)) < 1e-9
        assert js_divergence(p, q) == js_divergence(q, p) <= math.log(2)
    assert abs(js_divergence([1, 0], [0, 1]) - math.log(2)) < 1e-12

    for _ in range(20):
        a = {f"a{i}": rng.normal(size=4) for i in range(int(rng.integers(1, 16)))}
        b = {f"b{i}": rng.normal(size=4) for i in range(int(rng.integers(1, 16)))}
        s, t = space_from(a, "T1"), space_from(b, "T2")
        sh = shadow(obj(s, next(iter(a)), a), AlignmentMap("T1", "T2", (), np.eye(4), 0.0), s)
        ref = np.mean([1 - cosine_longhand(u, v) for u in a.values() for v in b.values()])
        assert abs(csd(sh, obj(t, next(iter(b)), b), t) - ref) < 1e-9

    for _ in range(20):
        values = rng.normal(size=int(rng.integers(4, 31)))
        assert abs(kurtosis(values) - pearson_kurtosis_longhand(list(values))) < 1e-9
    assert abs(kurtosis([-1.0, 1.0] * 8) - 1.0) < 1e-12

    words = [f"t{i}" for i in range(30)]
    for _ in range(20):
        A = set(rng.choice(words, size=int(rng.integers(1, 16))))
        B = set(rng.choice(words, size=int(rng.integers(1, 16))))
        assert abs(lexical_overlap(A, B) - len(A & B) / len(A | B)) < 1e-12

    terms = [f"u{i}" for i in range(25)]
    x = space_from({t: rng.normal(size=6) for t in terms}, "T1")
    y = space_from({t: rng.normal(size=6) for t in terms}, "T2")
    u = UnionSet("u0", frozenset(terms))
    assert ncd(x, y, u) == -ncd(y, x, u)


def hand_vec(deg, r=1.0):
    return [r * math.cos(math.radians(deg)), r * math.sin(math.radians(deg))]


@pytest.mark.criterion(8, "six planted scenarios: >= 5 of 6 labels per seed over 3 seeds, stable never Replacement, < 15 min")
def test_end_to_end_pattern_recovery():
    # phrase collapsing is turned off: the synthetic documents are bags of words with no collocations
    start = time.perf_counter()
    for seed in range(3):
        scenarios = standard_scenarios(seed=seed)
        streams = generate(scenarios, STANDARD_DOCS, STANDARD_VOCAB, seed=seed)
        params = PipelineParams(phrases=False, n_baseline=200, seed=seed + 1, embedding=Hyperparams(seed=seed + 1))
        (result,) = run(streams, ["T1", "T2"], [s.anchor for s in scenarios], params)
        labels = {r.concept: r.label for r in result.reports}
        hits = sum(labels.get(s.anchor) == s.expected for s in scenarios)
        print(f"seed {seed}: {hits}/6 {labels}")
        assert hits >= 5, (seed, labels)
        assert labels.get("concept_stable") != PatternLabel.REPLACEMENT.value
    assert time.perf_counter() - start < 15 * 60


@pytest.mark.criterion(9, "drift: hand fixture to 1e-12, mask recomputable from CSV, self-transition all zero")
def test_drift_matrix(tmp_path):
    from semshift.clustering import SemanticObject

    def objects(angles, period, r=1.0):
        return {c: SemanticObject(c, period, frozenset([c]), np.array(hand_vec(d, r))) for c, d in angles.items()}

    src, tgt = {"a": 0, "b": 60, "c": 150}, {"a": 10, "b": 40, "c": 90}
    m = drift_matrix(objects(src, "T1", 3.0), objects(tgt, "T2"))
    for i, x in enumerate(m.concepts):
        for j, y in enumerate(m.concepts):
            want = 0.0 if i == j else math.cos(math.radians(tgt[x] - tgt[y])) - math.cos(math.radians(src[x] - src[y]))
            assert abs(m.delta[i, j] - want) < 1e-12
    back = read_drift(write_drift(m, tmp_path, "T1_T2"))
    assert np.array_equal(back.mask, m.mask)
    same = drift_matrix(objects(src, "T1"), objects(src, "T2"))
    assert np.all(same.delta == 0) and not same.mask.any()


@pytest.mark.criterion(10, "rule table examples and Replacement-over-Fragmentation precedence")
def test_classifier_rule_table():
    L = PatternLabel
    assert classify(2.0, 1.5, 0.3, -0.2) is L.REPLACEMENT
    assert classify(0.2, 0.3, 0.1, 0.5) is L.STABILITY
    assert classify(0.4, 0.2, 1.7, 0.9) is L.FRAGMENTATION
    assert classify(0.1, 0.1, 0.0, -2.0) is L.LEXICAL_REPLACEMENT
    assert classify(1.4, 0.3, 0.2, -1.5) is L.NARROWING
    assert classify(2.0, 2.0, 2.5, 0.0) is L.REPLACEMENT


def tree(root: Path) -> dict[str, bytes]:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.mark.criterion(11, "'all --deterministic --seed 7' twice gives byte-identical output trees")
def test_determinism(tmp_path):
    config = ROOT / "configs" / "synthetic.conf"
    for name in ("first", "second"):
        argv = ["all", "--config", str(config), "--paths.output", str(tmp_path / name), "--deterministic", "--seed", "7"]
        assert main(argv) == 0
    a, b = tree(tmp_path / "first"), tree(tmp_path / "second")
    assert a and a.keys() == b.keys()
    assert [k for k in a if a[k] != b[k]] == []
