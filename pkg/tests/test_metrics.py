import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import obj, space_from
from oracles import cosine_longhand, jsd_longhand, pearson_kurtosis_longhand
from semshift.alignment import AlignmentMap, shadow
from semshift.metrics import (
    LEVEL_BANDS,
    BaselineError,
    LevelError,
    MetricError,
    MetricValue,
    UnionSet,
    ZeroVarianceError,
    assign_levels,
    baseline,
    csd,
    distance_levels,
    export_annotation_pairs,
    had,
    js_divergence,
    kurtosis,
    lexical_overlap,
    ncd,
    pick_anchors,
    read_metrics,
    similarity_histogram,
    union_set,
    write_annotation_pairs,
    write_metrics,
    evolution_report,
    raw_metrics,
    TransitionKey,
)

probability = st.lists(st.floats(0, 1, allow_nan=False), min_size=2, max_size=12).filter(lambda v: sum(v) > 1e-3)


def normalize(v):
    s = sum(v)
    return [x / s for x in v]


def identity_map(dim, src="T1", tgt="T2"):
    return AlignmentMap(src, tgt, (), np.eye(dim), 0.0)


# -- JSD --------------------------------------------------------------------


def test_jsd_examples():
    p = [0.2, 0.3, 0.5]
    assert js_divergence(p, p) == pytest.approx(0.0, abs=1e-12)
    assert js_divergence([1, 0], [0, 1]) == pytest.approx(math.log(2), abs=1e-12)
    assert js_divergence([0.5, 0.5], [0.9, 0.1]) == pytest.approx(jsd_longhand([0.5, 0.5], [0.9, 0.1]), abs=1e-12)


def test_jsd_errors():
    with pytest.raises(MetricError):
        js_divergence([0.5, 0.5], [1 / 3] * 3)
    with pytest.raises(MetricError):
        js_divergence([0.5, 0.6], [0.5, 0.5])


@settings(max_examples=200)
@given(probability, st.data())
def test_jsd_symmetric_bounded_and_matches_longhand(p, data):
    q = data.draw(st.lists(st.floats(0, 1, allow_nan=False), min_size=len(p), max_size=len(p)).filter(lambda v: sum(v) > 1e-3))
    p, q = normalize(p), normalize(q)
    a, b = js_divergence(p, q), js_divergence(q, p)
    assert a == b
    assert -1e-15 <= a <= math.log(2) + 1e-12
    assert a == pytest.approx(jsd_longhand(p, q), abs=1e-9)


# -- HAD --------------------------------------------------------------------


def anchored_space(sims, period, dim=6, seed=0):
    """Anchor ``l`` on e0 and one term per similarity, each at exactly that cosine to ``l``."""
    rng = np.random.default_rng(seed)
    vectors = {"l": np.eye(dim)[0]}
    for i, s in enumerate(sims):
        perp = rng.normal(size=dim)
        perp[0] = 0
        perp /= np.linalg.norm(perp)
        vectors[f"t{i:02d}"] = s * np.eye(dim)[0] + math.sqrt(1 - s * s) * perp
    return space_from(vectors, period)


def longhand_histogram(values, bins):
    counts = [1] * bins
    for v in values:
        k = min(int((v + 1) / 2 * bins), bins - 1)
        counts[k] += 1
    return [c / sum(counts) for c in counts]


def test_had_same_space_near_zero():
    s = anchored_space(np.linspace(0.2, 0.9, 25), "T1")
    raw, n = had(s, s, obj(s, "l", s.vocab))
    assert n == 25
    assert raw < 0.01


def test_had_similarity_drop_matches_direct_histograms():
    rng = np.random.default_rng(1)
    before = 0.8 + 0.03 * rng.normal(size=24)
    after = 0.1 + 0.03 * rng.normal(size=24)
    s, t = anchored_space(before, "T1"), anchored_space(after, "T2")
    raw, n = had(s, t, obj(s, "l", s.vocab))
    ref = jsd_longhand(longhand_histogram(before, 20), longhand_histogram(after, 20))
    assert n == 24
    assert abs(raw - ref) <= 0.1 * ref


def test_had_excludes_anchor_and_missing_terms():
    s = anchored_space([0.5] * 6, "T1")
    t = space_from({"l": np.eye(6)[0], "zz": np.eye(6)[1]}, "T2")
    raw, n = had(s, t, obj(s, "l", s.vocab))
    assert n == 0 and math.isnan(raw)


def test_similarity_histogram_smoothing():
    h = similarity_histogram([1.0, -1.0, 0.0], bins=4)
    assert h.tolist() == pytest.approx([2 / 7, 1 / 7, 2 / 7, 2 / 7])


# -- CSD --------------------------------------------------------------------


def brute_csd(A_vectors, B_vectors):
    total = sum(1 - cosine_longhand(a, b) for a in A_vectors for b in B_vectors)
    return total / (len(A_vectors) * len(B_vectors))


def test_csd_trivial_cases():
    s = space_from({"a": [1.0, 0.0]}, "T1")
    t = space_from({"b": [0.0, 1.0], "a": [1.0, 0.0]}, "T2")
    assert csd(shadow(obj(s, "a", ["a"]), identity_map(2), s), obj(t, "b", ["b"]), t) == pytest.approx(1.0, abs=1e-15)
    assert csd(shadow(obj(s, "a", ["a"]), identity_map(2), s), obj(t, "a", ["a"]), t) == pytest.approx(0.0, abs=1e-15)


def test_csd_self_transition_is_mean_pairwise_distance(rng):
    vectors = {f"w{i}": rng.normal(size=5) for i in range(12)}
    s = space_from(vectors, "T1")
    t = space_from(vectors, "T2")
    o = obj(s, "w0", list(vectors))
    value = csd(shadow(o, identity_map(5), s), obj(t, "w0", list(vectors)), t)
    assert value == pytest.approx(brute_csd(list(vectors.values()), list(vectors.values())), abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 15), st.integers(1, 15), st.integers(0, 2**31))
def test_csd_matches_double_loop(n_a, n_b, seed):
    rng = np.random.default_rng(seed)
    s = space_from({f"a{i}": rng.normal(size=4) for i in range(n_a)}, "T1")
    t = space_from({f"b{i}": rng.normal(size=4) for i in range(n_b)}, "T2")
    q, _ = np.linalg.qr(rng.normal(size=(4, 4)))
    sh = shadow(obj(s, "a0", s.vocab), AlignmentMap("T1", "T2", (), q, 0.0), s)
    expected = brute_csd([sh.vectors[x] for x in s.vocab], [t.vector(x) for x in t.vocab])
    assert csd(sh, obj(t, "b0", t.vocab), t) == pytest.approx(expected, abs=1e-12)


def test_csd_empty_raises():
    s = space_from({"a": [1.0, 0.0]})
    sh = shadow(obj(s, "a", ["a"]), identity_map(2), s)
    empty = obj(s, "a", ["a"]).__class__("a", "T2", frozenset(), np.zeros(2))
    with pytest.raises(MetricError):
        csd(sh, empty, s)


# -- kurtosis and NCD -------------------------------------------------------


def test_kurtosis_examples():
    rng = np.random.default_rng(0)
    assert kurtosis(rng.normal(size=10_000)) == pytest.approx(3.0, abs=0.15)
    assert kurtosis([-1.0, 1.0] * 10) == pytest.approx(1.0, abs=1e-12)
    assert kurtosis(rng.uniform(size=100_000)) == pytest.approx(1.8, abs=0.05)


def test_kurtosis_errors():
    with pytest.raises(ZeroVarianceError):
        kurtosis([2.0] * 5)
    with pytest.raises(MetricError):
        kurtosis([1.0, 2.0, 3.0])


@settings(max_examples=100)
@given(st.lists(st.floats(-1, 1, allow_nan=False), min_size=4, max_size=30).filter(lambda v: np.var(v) > 1e-6))
def test_kurtosis_matches_longhand(values):
    assert kurtosis(values) == pytest.approx(pearson_kurtosis_longhand(values), rel=1e-9)


def brute_ncd(source, target, terms):
    def k(space):
        sims = [
            cosine_longhand(space.vector(terms[i]), space.vector(terms[j]))
            for i in range(len(terms))
            for j in range(i + 1, len(terms))
        ]
        return pearson_kurtosis_longhand(sims)

    return k(target) - k(source)


def split_fixture(seed=0, n_big=28, n_small=2, dim=8):
    """One isotropic blob in the source; a big and a small tight sub-blob in the target."""
    rng = np.random.default_rng(seed)
    axes = np.linalg.qr(rng.normal(size=(dim, dim)))[0]
    n = n_big + n_small
    terms = [f"m{i:02d}" for i in range(n)]
    source = {t: axes[0] + 0.3 * rng.normal(size=dim) for t in terms}
    target = {}
    for i, t in enumerate(terms):
        centre = axes[0] if i < n_big else axes[1]
        target[t] = centre + 0.05 * rng.normal(size=dim)
    return space_from(source, "T1"), space_from(target, "T2"), terms


def test_ncd_identical_spaces_is_zero(rng):
    vectors = {f"w{i}": rng.normal(size=6) for i in range(20)}
    s, t = space_from(vectors, "T1"), space_from(vectors, "T2")
    assert ncd(s, t, UnionSet("w0", frozenset(vectors))) == pytest.approx(0.0, abs=1e-9)


def test_ncd_split_fixture_positive_and_matches_brute_force():
    s, t, terms = split_fixture()
    union = UnionSet("m00", frozenset(terms))
    forward = ncd(s, t, union)
    assert forward > 0
    assert forward == pytest.approx(brute_ncd(s, t, sorted(terms)), abs=1e-9)
    backward = ncd(t, s, union)
    assert backward < 0
    assert backward == -forward


def test_ncd_two_equal_sub_blobs_flatten_the_distribution():
    # a bimodal similarity distribution has low kurtosis, so an even split reads as negative
    s, t, terms = split_fixture(n_big=15, n_small=15)
    value = ncd(s, t, UnionSet("m00", frozenset(terms)))
    assert value < 0
    assert value == pytest.approx(brute_ncd(s, t, sorted(terms)), abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.integers(5, 25))
def test_ncd_antisymmetric_on_swapped_spaces(seed, n):
    rng = np.random.default_rng(seed)
    terms = [f"w{i}" for i in range(n)]
    a = space_from({t: rng.normal(size=5) for t in terms}, "T1")
    b = space_from({t: rng.normal(size=5) for t in terms}, "T2")
    u = UnionSet("w0", frozenset(terms))
    assert ncd(a, b, u) == -ncd(b, a, u)


def test_union_set_restricted_to_shared_vocabulary():
    s = space_from({"a": [1, 0], "b": [0, 1], "c": [1, 1]}, "T1")
    t = space_from({"a": [1, 0], "b": [0, 1], "d": [1, 1]}, "T2")
    u = union_set(obj(s, "a", ["a", "c"]), obj(t, "a", ["a", "b", "d"]), s, t)
    assert u.members == {"a", "b"}


def test_ncd_too_few_members():
    s = space_from({"a": [1, 0], "b": [0, 1], "c": [1, 1]})
    with pytest.raises(MetricError):
        ncd(s, s, UnionSet("a", frozenset("abc")))


# -- LO ---------------------------------------------------------------------


def test_lexical_overlap_examples():
    assert lexical_overlap({"a", "b"}, {"a", "b"}) == 1.0
    assert lexical_overlap({"a"}, {"b"}) == 0.0
    assert lexical_overlap({"a", "b"}, {"b", "c"}) == pytest.approx(1 / 3, abs=1e-12)
    assert lexical_overlap({"new_york"}, {"new", "york"}) == 0.0
    with pytest.raises(MetricError):
        lexical_overlap(set(), {"a"})


terms = st.sets(st.sampled_from([f"t{i}" for i in range(20)]), min_size=1, max_size=15)


@given(terms, terms, st.sets(st.sampled_from([f"x{i}" for i in range(10)]), min_size=1, max_size=10))
def test_lexical_overlap_properties(a, b, extra):
    v = lexical_overlap(a, b)
    assert 0.0 <= v <= 1.0
    assert (v == 1.0) == (a == b)
    assert v == len(a & b) / len(a | b)
    assert lexical_overlap(a, b | extra) <= v


# -- z-scores and baselines -------------------------------------------------


@given(st.floats(-50, 50), st.floats(-50, 50), st.floats(1e-9, 50))
def test_metric_value_z_inverts(raw, mean, sd):
    v = MetricValue.standardize(raw, mean, sd, 200)
    assert v.z * v.baseline_sd + v.baseline_mean == pytest.approx(raw, abs=1e-9)


def test_unreliable_metric_value_is_missing():
    v = MetricValue.standardize(0.3, 0.1, 0.2, 50, reliable=False)
    assert math.isnan(v.raw) and math.isnan(v.z) and not v.reliable


def test_baseline_sample_sd_and_floor():
    b = baseline([float(i) for i in range(40)])
    assert b.mean == pytest.approx(19.5)
    assert b.sd == pytest.approx(np.std(np.arange(40), ddof=1))
    assert baseline([1.0] * 40).sd == 1e-9
    with pytest.raises(BaselineError):
        baseline([0.1] * 29)


def test_pick_anchors_seeded_and_guarded():
    pool = [f"w{i}" for i in range(500)]
    assert pick_anchors(pool, 100, 3) == pick_anchors(pool, 100, 3)
    assert len(set(pick_anchors(pool, 100, 3))) == 100
    assert pick_anchors(pool, 100, 3) != pick_anchors(pool, 100, 4)
    assert len(pick_anchors(pool[:40], 100, 3)) == 40
    with pytest.raises(BaselineError):
        pick_anchors(pool[:29], 100, 3)


def test_metrics_file_round_trip(tmp_path, rng):
    vectors = {f"w{i}": rng.normal(size=6) for i in range(12)}
    s, t = space_from(vectors, "T1"), space_from({k: v + 0.1 for k, v in vectors.items()}, "T2")
    members = list(vectors)[:8]
    raw = raw_metrics(obj(s, "w0", members), obj(t, "w0", members[2:]), s, t, identity_map(6))
    bl = {m: baseline([0.1 * k for k in range(40)]) for m in ("HAD", "CSD", "NCD", "LO")}
    report = evolution_report(TransitionKey("w0", "T1", "T2"), raw, bl)
    path = write_metrics([report], tmp_path, "T1_T2")
    assert path.read_text().splitlines()[0].split("\t") == [
        "concept", "metric", "raw", "z", "baseline_mean", "baseline_sd", "n_baseline", "reliable",
    ]
    back = read_metrics(path, "T1", "T2")[0]
    assert back.values == report.values


# -- distance levels and annotation pairs ------------------------------------


def test_levels_on_normal_distances():
    d = np.random.default_rng(9).normal(0.5, 0.1, size=20_000)
    levels = assign_levels({f"t{i}": x for i, x in enumerate(d)})
    share = {lv: sum(1 for v in levels.values() if v == lv) / len(d) for lv in (1, 2, 3)}
    assert share[1] == pytest.approx(0.24, abs=0.03)
    assert share[2] == pytest.approx(0.38, abs=0.03)
    assert share[3] == pytest.approx(0.24, abs=0.03)


def test_level_band_centre_and_half_open_edges():
    # mean 0, population sd 1
    levels = assign_levels({"lo": -1.0, "mid": 0.0, "hi": 1.0, "a": -0.5, "b": 0.5, "far": 1.5, "zz": -1.5})
    assert levels["mid"] == 2
    assert levels["a"] == 2 and levels["b"] == 3
    assert "far" not in levels and levels.get("zz") == 1
    assert len(LEVEL_BANDS) == 3


def test_levels_zero_spread():
    with pytest.raises(LevelError):
        assign_levels({"a": 0.3, "b": 0.3})


def test_distance_levels_exclude_members(rng):
    vectors = {f"w{i:02d}": rng.normal(size=5) for i in range(60)}
    s = space_from(vectors)
    o = obj(s, "w00", ["w00", "w01", "w02"])
    levels = distance_levels(s, [o])
    assert not (set(levels) & o.members)
    assert set(levels.values()) <= {1, 2, 3}


def leveled_terms(n_per_level):
    return {f"l{lv}_{i}": lv for lv in (1, 2, 3) for i in range(n_per_level)}


def member_object():
    s = space_from({f"m{i}": np.eye(4)[i] for i in range(4)})
    return obj(s, "m0", s.vocab)


def test_export_even_split():
    levels = leveled_terms(600)
    for n, each in ((1500, 500), (3, 1)):
        pairs = export_annotation_pairs(levels, [member_object()], n, seed=1)
        assert len(pairs) == n
        for lv in (1, 2, 3):
            assert sum(p.level == lv for p in pairs) == each
    pairs = export_annotation_pairs(levels, [member_object()], 100, seed=1)
    counts = [sum(p.level == lv for p in pairs) for lv in (1, 2, 3)]
    assert max(counts) - min(counts) <= 1


def test_export_pairs_structure_and_determinism(tmp_path):
    levels = leveled_terms(50)
    o = member_object()
    pairs = export_annotation_pairs(levels, [o], 60, seed=4)
    for p in pairs:
        member = p.term_a if p.concept_position == "a" else p.term_b
        other = p.term_b if p.concept_position == "a" else p.term_a
        assert member in o.members
        assert levels[other] == p.level
    a = write_annotation_pairs(pairs, tmp_path / "a")
    b = write_annotation_pairs(export_annotation_pairs(levels, [o], 60, seed=4), tmp_path / "b")
    assert a[0].read_bytes() == b[0].read_bytes() and a[1].read_bytes() == b[1].read_bytes()
    assert "concept" not in a[0].read_text()


def test_export_level_too_small():
    with pytest.raises(LevelError):
        export_annotation_pairs(leveled_terms(4), [member_object()], 30, seed=0)
