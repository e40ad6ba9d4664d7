import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semshift.clustering import SemanticObject
from semshift.drift import drift_matrix, read_drift, write_drift


def objects(centroids, period):
    return {c: SemanticObject(c, period, frozenset([c]), np.asarray(v, dtype=float)) for c, v in centroids.items()}


def cos_deg(a, b):
    return math.cos(math.radians(a - b))


def test_hand_fixture_three_concepts():
    # 2-D centroids at fixed angles; cosine of the angle difference is the similarity
    src = {"a": 0, "b": 90, "c": 180}
    tgt = {"a": 0, "b": 30, "c": 120}
    vec = lambda deg, r=1.0: [r * math.cos(math.radians(deg)), r * math.sin(math.radians(deg))]
    m = drift_matrix(objects({k: vec(v, 2.0) for k, v in src.items()}, "T1"), objects({k: vec(v) for k, v in tgt.items()}, "T2"))
    assert m.concepts == ("a", "b", "c")
    for i, x in enumerate(m.concepts):
        for j, y in enumerate(m.concepts):
            if i == j:
                assert m.delta[i, j] == 0 and not m.mask[i, j]
                continue
            expected = cos_deg(tgt[x], tgt[y]) - cos_deg(src[x], src[y])
            assert abs(m.delta[i, j] - expected) < 1e-12
    # ab: cos30 - cos90, ac: cos120 - cos180, bc: cos90 - cos90
    d = np.array([math.sqrt(3) / 2, 0.5, 0.0])
    assert m.threshold == pytest.approx(d.std(), abs=1e-12)
    assert [p[5] for p in m.pairs()] == list(np.abs(d) > d.std())


def test_self_transition_all_zero_and_unmasked():
    rng = np.random.default_rng(0)
    cents = {f"c{i}": rng.normal(size=5) for i in range(6)}
    m = drift_matrix(objects(cents, "T1"), objects(cents, "T2"))
    assert np.all(m.delta == 0)
    assert not m.mask.any()


def test_planted_convergence_is_significant_and_positive():
    rng = np.random.default_rng(1)
    dim = 10
    axes = np.linalg.qr(rng.normal(size=(dim, dim)))[0]
    src = {f"c{i}": axes[i] for i in range(6)}
    tgt = dict(src)
    tgt["c0"] = axes[0] + axes[1]
    tgt["c1"] = axes[1] + axes[0] + 0.1 * axes[2]
    m = drift_matrix(objects(src, "T1"), objects(tgt, "T2"))
    row = next(p for p in m.pairs() if p[:2] == ("c0", "c1"))
    assert row[4] > 0 and row[5]


def test_missing_concepts_excluded(caplog):
    m = drift_matrix(objects({"a": [1, 0], "b": [0, 1]}, "T1"), objects({"a": [1, 0], "c": [1, 1]}, "T2"))
    assert m.concepts == ("a",)
    assert "excluded" in caplog.text


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.integers(2, 8))
def test_antisymmetric_under_period_swap(seed, k):
    rng = np.random.default_rng(seed)
    a = objects({f"c{i}": rng.normal(size=4) for i in range(k)}, "T1")
    b = objects({f"c{i}": rng.normal(size=4) for i in range(k)}, "T2")
    fwd, back = drift_matrix(a, b), drift_matrix(b, a)
    assert np.array_equal(fwd.delta, -back.delta)
    assert np.array_equal(fwd.delta, fwd.delta.T)
    assert np.array_equal(fwd.mask, back.mask)


def test_csv_round_trip_recomputes_mask(tmp_path):
    rng = np.random.default_rng(3)
    a = objects({f"c{i}": rng.normal(size=4) for i in range(7)}, "T1")
    b = objects({f"c{i}": rng.normal(size=4) for i in range(7)}, "T2")
    m = drift_matrix(a, b)
    path = write_drift(m, tmp_path, "T1_T2")
    assert path.read_text().splitlines()[0] == "concept_a,concept_b,sim_source,sim_target,delta,significant"
    back = read_drift(path)
    assert back.concepts == m.concepts
    assert np.array_equal(back.delta, m.delta)
    assert np.array_equal(back.mask, m.mask)
    assert back.threshold == m.threshold
