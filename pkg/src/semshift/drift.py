"""Pairwise change in concept-centroid similarity across one transition."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from ._io import atomic_write_text, read_table, tsv
from .clustering import SemanticObject

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DriftMatrix:
    concepts: tuple[str, ...]
    sim_source: np.ndarray
    sim_target: np.ndarray
    delta: np.ndarray
    mask: np.ndarray
    threshold: float

    def pairs(self):
        """Upper-triangle entries as ``(a, b, sim_source, sim_target, delta, significant)``."""
        k = len(self.concepts)
        for i in range(k):
            for j in range(i + 1, k):
                yield (
                    self.concepts[i],
                    self.concepts[j],
                    float(self.sim_source[i, j]),
                    float(self.sim_target[i, j]),
                    float(self.delta[i, j]),
                    bool(self.mask[i, j]),
                )


def _cosines(centroids: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(centroids, axis=1, keepdims=True)
    C = centroids / norms
    S = C @ C.T
    np.fill_diagonal(S, 1.0)
    return S


def significance_mask(delta: np.ndarray) -> tuple[np.ndarray, float]:
    """Cells whose absolute change exceeds the population sd of the upper-triangle deltas."""
    k = len(delta)
    iu = np.triu_indices(k, k=1)
    threshold = float(np.std(delta[iu])) if len(iu[0]) else 0.0
    mask = np.abs(delta) > threshold
    np.fill_diagonal(mask, False)
    return mask, threshold


def drift_matrix(
    objects_source: Mapping[str, SemanticObject], objects_target: Mapping[str, SemanticObject]
) -> DriftMatrix:
    """Target-minus-source cosine between every pair of concept centroids.

    Each centroid lives in its own period's space, so no alignment is needed:
    similarities are compared, not vectors. Concepts missing in either period
    are left out.
    """
    concepts = []
    for c in objects_source:
        if c in objects_target:
            concepts.append(c)
        else:
            log.warning("concept %r has no target-period object; excluded from drift", c)
    for c in objects_target:
        if c not in objects_source:
            log.warning("concept %r has no source-period object; excluded from drift", c)
    concepts.sort()
    if not concepts:
        empty = np.zeros((0, 0))
        return DriftMatrix((), empty, empty, empty, empty.astype(bool), 0.0)
    S = _cosines(np.array([objects_source[c].centroid for c in concepts], dtype=np.float64))
    T = _cosines(np.array([objects_target[c].centroid for c in concepts], dtype=np.float64))
    delta = T - S
    delta = 0.5 * (delta + delta.T)
    np.fill_diagonal(delta, 0.0)
    mask, threshold = significance_mask(delta)
    return DriftMatrix(tuple(concepts), S, T, delta, mask, threshold)


def drift_path(directory: str | Path, transition: str) -> Path:
    return Path(directory) / f"{transition}.drift.csv"


_HEADER = ["concept_a", "concept_b", "sim_source", "sim_target", "delta", "significant"]


def write_drift(matrix: DriftMatrix, directory: str | Path, transition: str) -> Path:
    path = drift_path(directory, transition)
    atomic_write_text(path, tsv(_HEADER, matrix.pairs(), sep=","))
    return path


def read_drift(path: str | Path) -> DriftMatrix:
    """Rebuild the matrix from its long form; the mask is recomputed from the deltas."""
    rows = read_table(path, sep=",")
    concepts = sorted({r["concept_a"] for r in rows} | {r["concept_b"] for r in rows})
    pos = {c: i for i, c in enumerate(concepts)}
    k = len(concepts)
    S, T, D = np.eye(k), np.eye(k), np.zeros((k, k))
    for r in rows:
        i, j = pos[r["concept_a"]], pos[r["concept_b"]]
        for M, key in ((S, "sim_source"), (T, "sim_target"), (D, "delta")):
            M[i, j] = M[j, i] = float(r[key])
    mask, threshold = significance_mask(D)
    return DriftMatrix(tuple(concepts), S, T, D, mask, threshold)
