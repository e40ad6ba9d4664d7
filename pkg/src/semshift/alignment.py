"""Orthogonal Procrustes alignment between consecutive period spaces, and shadow objects.

A shadow object is a source-period neighborhood carried into the target
period's coordinates by the alignment rotation: where the neighborhood would
sit if its meaning had not moved.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._io import atomic_write_text, fmt
from .clustering import SemanticObject
from .embedding import EmbeddingSpace


class AlignmentError(RuntimeError):
    pass


@dataclass(frozen=True)
class AlignmentMap:
    source_period: str
    target_period: str
    shared_vocab: tuple[str, ...]
    rotation: np.ndarray
    residual: float

    @property
    def dim(self) -> int:
        return self.rotation.shape[0]

    def apply(self, vectors: np.ndarray) -> np.ndarray:
        return np.asarray(vectors, dtype=np.float64) @ self.rotation


@dataclass(frozen=True)
class ShadowObject:
    concept: str
    period: str
    members: frozenset[str]
    vectors: dict[str, np.ndarray]

    def matrix(self, terms=None) -> np.ndarray:
        terms = sorted(self.members) if terms is None else terms
        return np.array([self.vectors[t] for t in terms])


def shared_vocabulary(source: EmbeddingSpace, target: EmbeddingSpace) -> list[str]:
    """Terms in both spaces, by descending joint frequency then lexicographically."""
    common = [t for t in source.vocab if t in target]
    return sorted(common, key=lambda t: (-(source.frequency(t) + target.frequency(t)), t))


def _unit_rows(M: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(M, axis=1, keepdims=True)
    return np.divide(M, norms, out=np.zeros_like(M), where=norms > 0)


def orthogonal_procrustes(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Orthogonal ``R`` minimizing ``||X R - Y||_F``; reflections are allowed."""
    try:
        U, _, Vt = np.linalg.svd(X.T @ Y)
    except np.linalg.LinAlgError as exc:
        raise AlignmentError(f"SVD did not converge: {exc}") from exc
    return U @ Vt


def procrustes(source: EmbeddingSpace, target: EmbeddingSpace) -> AlignmentMap:
    """Fit the rotation taking ``source`` coordinates into ``target`` coordinates."""
    if source.dim != target.dim:
        raise AlignmentError(f"dimension mismatch: {source.dim} vs {target.dim}")
    shared = shared_vocabulary(source, target)
    if len(shared) < source.dim:
        raise AlignmentError(
            f"only {len(shared)} shared terms between {source.period} and {target.period}; need >= {source.dim}"
        )
    X = _unit_rows(source.vectors[source.indices(shared)].astype(np.float64))
    Y = _unit_rows(target.vectors[target.indices(shared)].astype(np.float64))
    R = orthogonal_procrustes(X, Y)
    residual = float(np.linalg.norm(X @ R - Y))
    return AlignmentMap(source.period, target.period, tuple(shared), R, residual)


def shadow(obj: SemanticObject, alignment: AlignmentMap, source: EmbeddingSpace) -> ShadowObject:
    """Rotate each member's source vector into the target space; membership is kept verbatim."""
    if obj.period != alignment.source_period:
        raise AlignmentError(f"object period {obj.period!r} != alignment source {alignment.source_period!r}")
    if source.period != obj.period:
        raise AlignmentError(f"space period {source.period!r} != object period {obj.period!r}")
    terms = sorted(obj.members)
    rotated = alignment.apply(source.vectors[source.indices(terms)])
    return ShadowObject(obj.concept, alignment.target_period, obj.members, dict(zip(terms, rotated)))


def alignment_path(directory: str | Path, source_period: str, target_period: str) -> Path:
    return Path(directory) / f"{source_period}_{target_period}.alignment.txt"


def write_alignment(alignment: AlignmentMap, directory: str | Path) -> Path:
    head = (
        f"#source\t{alignment.source_period}\n#target\t{alignment.target_period}\n"
        f"#dim\t{alignment.dim}\n#shared_vocab\t{len(alignment.shared_vocab)}\n"
        f"#residual\t{fmt(alignment.residual)}\n"
    )
    rows = "".join(" ".join(fmt(float(x)) for x in row) + "\n" for row in alignment.rotation)
    path = alignment_path(directory, alignment.source_period, alignment.target_period)
    atomic_write_text(path, head + rows)
    return path


def read_alignment(path: str | Path) -> AlignmentMap:
    """Rotation and header fields; the shared vocabulary itself is not stored."""
    meta, rows = {}, []
    with open(path, encoding="utf-8") as fh:
        for line in fh.read().splitlines():
            if line.startswith("#"):
                key, value = line[1:].split("\t", 1)
                meta[key] = value
            elif line:
                rows.append([float(x) for x in line.split()])
    R = np.array(rows)
    if R.shape != (int(meta["dim"]), int(meta["dim"])):
        raise ValueError(f"{path}: rotation shape {R.shape} does not match dim {meta['dim']}")
    return AlignmentMap(meta["source"], meta["target"], (), R, float(meta["residual"]))
