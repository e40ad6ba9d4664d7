"""HDBSCAN and the recursive, concept-anchored neighborhood refinement built on it.

Distances are cosine-based: vectors are L2-normalized and compared with the
Euclidean metric, which orders pairs exactly as cosine distance does.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from ._io import atomic_write_text, fmt, tsv
from .embedding import EmbeddingSpace, OutOfVocabularyError

log = logging.getLogger(__name__)

NOISE = -1
LAMBDA_CAP = 1e12
_DENSE_LIMIT = 4096
_CHUNK = 2048


class ClusteringError(RuntimeError):
    pass


def _normalize(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    return np.divide(X, norms, out=np.zeros_like(X), where=norms > 0)


def _distance_rows(U: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """Euclidean distances between unit rows ``U[rows]`` and every row of ``U``."""
    dots = U[rows] @ U.T
    d = np.sqrt(np.maximum(0.0, 2.0 - 2.0 * dots))
    d[np.arange(len(rows)), rows] = 0.0
    return d


def pairwise_distances(U: np.ndarray) -> np.ndarray:
    """Symmetric distance matrix; exact symmetry keeps genuine ties tied."""
    d = _distance_rows(U, np.arange(len(U)))
    return np.minimum(d, d.T)


def core_distances(U: np.ndarray, min_samples: int, dense: np.ndarray | None = None) -> np.ndarray:
    """Distance to the ``min_samples``-th nearest point, the point itself counting as the first."""
    n = len(U)
    k = min(min_samples, n)
    if dense is not None:
        return np.partition(dense, k - 1, axis=1)[:, k - 1]
    core = np.empty(n)
    for lo in range(0, n, _CHUNK):
        rows = np.arange(lo, min(n, lo + _CHUNK))
        d = _distance_rows(U, rows)
        core[rows] = np.partition(d, k - 1, axis=1)[:, k - 1]
    return core


def mutual_reachability(U: np.ndarray, core: np.ndarray) -> np.ndarray:
    d = pairwise_distances(U)
    return np.maximum(d, np.maximum(core[:, None], core[None, :]))


def _prim_mst(U: np.ndarray, core: np.ndarray, dense: np.ndarray | None = None) -> np.ndarray:
    """Minimum spanning tree of the mutual reachability graph, rows ``(a, b, weight)``."""
    n = len(U)
    in_tree = np.zeros(n, dtype=bool)
    best = np.full(n, np.inf)
    parent = np.full(n, -1, dtype=np.int64)
    edges = np.empty((n - 1, 3))
    current = 0
    in_tree[0] = True
    for step in range(n - 1):
        row = dense[current] if dense is not None else _distance_rows(U, np.array([current]))[0]
        mr = np.maximum(np.maximum(row, core[current]), core)
        better = ~in_tree & (mr < best)
        best[better] = mr[better]
        parent[better] = current
        nxt = int(np.argmin(np.where(in_tree, np.inf, best)))
        edges[step] = (parent[nxt], nxt, best[nxt])
        in_tree[nxt] = True
        current = nxt
    return edges


def single_linkage(mst: np.ndarray, n: int) -> np.ndarray:
    """Merge tree in scipy linkage layout: ``(left, right, distance, size)``, internal ids from ``n``."""
    order = np.argsort(mst[:, 2], kind="mergesort")
    parent = np.arange(2 * n - 1)
    size = np.ones(2 * n - 1, dtype=np.int64)

    def find(x):
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    tree = np.empty((n - 1, 4))
    for k, e in enumerate(order):
        a, b, w = int(mst[e, 0]), int(mst[e, 1]), mst[e, 2]
        ra, rb = find(a), find(b)
        node = n + k
        parent[ra] = parent[rb] = node
        size[node] = size[ra] + size[rb]
        tree[k] = (ra, rb, w, size[node])
    return tree


@dataclass
class CondensedTree:
    """Rows ``(parent, child, lambda, child_size)``; cluster ids start at ``n_points``."""

    parent: np.ndarray
    child: np.ndarray
    lam: np.ndarray
    child_size: np.ndarray
    n_points: int

    @property
    def root(self) -> int:
        return self.n_points

    def cluster_ids(self) -> np.ndarray:
        kids = self.child[self.child_size > 1] if len(self.child) else np.array([], dtype=np.int64)
        return np.concatenate([[self.root], np.sort(kids)]).astype(np.int64)


def _lambda(distance: float) -> float:
    return 1.0 / distance if distance > 1.0 / LAMBDA_CAP else LAMBDA_CAP


def condense_tree(tree: np.ndarray, n: int, min_cluster_size: int) -> CondensedTree:
    """Prune the merge tree at ``min_cluster_size``.

    Consecutive merges at exactly the same distance are treated as one
    multi-way split, so everything that separates at a given density level
    does so simultaneously and the result does not depend on tie order.
    """
    root = 2 * n - 2
    sizes = np.ones(2 * n - 1, dtype=np.int64)
    sizes[n:] = tree[:, 3].astype(np.int64)
    children = tree[:, :2].astype(np.int64)
    dist = tree[:, 2]

    def leaves(node):
        out, stack = [], [node]
        while stack:
            x = stack.pop()
            if x < n:
                out.append(x)
            else:
                stack.extend(children[x - n])
        return out

    def parts(node):
        """Subtrees hanging off ``node`` once equal-distance merges are flattened."""
        out, stack = [], list(children[node - n])
        while stack:
            x = stack.pop()
            if x >= n and dist[x - n] == dist[node - n]:
                stack.extend(children[x - n])
            else:
                out.append(x)
        return sorted(out)

    rows: list[tuple[int, int, float, int]] = []
    label = {root: n}
    next_label = n + 1
    stack = [root]
    while stack:
        node = stack.pop()
        if node < n:
            continue
        lam = _lambda(dist[node - n])
        here = label[node]
        kids = parts(node)
        big = [k for k in kids if sizes[k] >= min_cluster_size]
        for k in kids:
            if sizes[k] < min_cluster_size:
                rows.extend((here, p, lam, 1) for p in leaves(k))
        if len(big) >= 2:
            for k in big:
                label[k] = next_label
                rows.append((here, next_label, lam, int(sizes[k])))
                next_label += 1
                stack.append(k)
        elif big:
            label[big[0]] = here
            stack.append(big[0])
    # Children are labelled after their parent, so sorting by parent keeps a top-down order.
    rows.sort(key=lambda r: (r[0], r[1]))
    arr = np.array(rows, dtype=np.float64).reshape(-1, 4)
    return CondensedTree(
        arr[:, 0].astype(np.int64), arr[:, 1].astype(np.int64), arr[:, 2], arr[:, 3].astype(np.int64), n
    )


def cluster_stability(ct: CondensedTree) -> dict[int, float]:
    birth = {ct.root: 0.0}
    for c, lam, s in zip(ct.child, ct.lam, ct.child_size):
        if s > 1:
            birth[int(c)] = lam
    stability = {int(c): 0.0 for c in ct.cluster_ids()}
    for p, lam, s in zip(ct.parent, ct.lam, ct.child_size):
        stability[int(p)] += (lam - birth[int(p)]) * s
    return stability


def select_eom(ct: CondensedTree, allow_single_cluster: bool = False) -> list[int]:
    """Excess-of-mass selection over the condensed tree's clusters."""
    stability = cluster_stability(ct)
    kids: dict[int, list[int]] = {c: [] for c in stability}
    for p, c, s in zip(ct.parent, ct.child, ct.child_size):
        if s > 1:
            kids[int(p)].append(int(c))
    selected = {c: True for c in stability}
    nodes = sorted(stability, reverse=True)
    if not allow_single_cluster:
        nodes = [c for c in nodes if c != ct.root]
        selected[ct.root] = False
    for node in nodes:
        subtree = sum(stability[k] for k in kids[node])
        if subtree > stability[node]:
            selected[node] = False
            stability[node] = subtree
        else:
            stack = list(kids[node])
            while stack:
                k = stack.pop()
                selected[k] = False
                stack.extend(kids[k])
    return sorted(c for c, ok in selected.items() if ok)


def label_points(ct: CondensedTree, selected: Sequence[int]) -> np.ndarray:
    up = {int(c): int(p) for p, c, s in zip(ct.parent, ct.child, ct.child_size) if s > 1}
    chosen = {c: i for i, c in enumerate(sorted(selected))}
    labels = np.full(ct.n_points, NOISE, dtype=np.int64)
    for p, c, s in zip(ct.parent, ct.child, ct.child_size):
        if s != 1:
            continue
        node = int(p)
        while node not in chosen and node in up:
            node = up[node]
        if node in chosen:
            labels[int(c)] = chosen[node]
    return labels


def hdbscan_labels(
    X: np.ndarray,
    min_cluster_size: int = 5,
    min_samples: int = 5,
    seed: int | None = None,
    allow_single_cluster: bool = False,
) -> np.ndarray:
    """Cluster labels for the rows of ``X`` under cosine distance; ``-1`` marks noise.

    ``seed`` permutes the processing order, which only matters for exact
    distance ties. A set of identical points of sufficient size is a single
    cluster.
    """
    if min_cluster_size < 2:
        raise ValueError("min_cluster_size must be at least 2")
    if min_samples < 1:
        raise ValueError("min_samples must be positive")
    U = _normalize(X)
    n = len(U)
    if n < max(2, min_cluster_size):
        return np.full(n, NOISE, dtype=np.int64)
    order = np.random.default_rng(seed).permutation(n) if seed is not None else np.arange(n)
    Up = U[order]
    dense = pairwise_distances(Up) if n <= _DENSE_LIMIT else None
    core = core_distances(Up, min_samples, dense)
    mst = _prim_mst(Up, core, dense)
    if mst[:, 2].max() == 0.0:
        return np.zeros(n, dtype=np.int64)
    ct = condense_tree(single_linkage(mst, n), n, min_cluster_size)
    permuted = label_points(ct, select_eom(ct, allow_single_cluster))
    labels = np.empty(n, dtype=np.int64)
    labels[order] = permuted
    return canonical_labels(labels)


def canonical_labels(labels: np.ndarray) -> np.ndarray:
    """Renumber clusters by their lowest point index so ids ignore input order."""
    labels = np.asarray(labels, dtype=np.int64)
    out = np.full(len(labels), NOISE, dtype=np.int64)
    mapping: dict[int, int] = {}
    for i, c in enumerate(labels.tolist()):
        if c != NOISE:
            out[i] = mapping.setdefault(c, len(mapping))
    return out


@dataclass
class ClusterAssignment:
    terms: list[str]
    label_array: np.ndarray
    centroids: dict[int, np.ndarray]
    _labels: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.label_array = np.asarray(self.label_array, dtype=np.int64)
        self._labels = dict(zip(self.terms, self.label_array.tolist()))

    @property
    def labels(self) -> dict[str, int]:
        return self._labels

    @property
    def n_clusters(self) -> int:
        return len(self.centroids)

    def members(self, cluster: int) -> list[str]:
        return [t for t, c in zip(self.terms, self.label_array) if c == cluster]


def _centroids(U: np.ndarray, labels: np.ndarray) -> dict[int, np.ndarray]:
    return {int(c): U[labels == c].mean(axis=0) for c in np.unique(labels) if c != NOISE}


def hdbscan(
    points: Mapping[str, Sequence[float]],
    min_cluster_size: int = 5,
    min_samples: int = 5,
    metric: str = "cosine",
    seed: int | None = None,
) -> ClusterAssignment:
    if metric != "cosine":
        raise ValueError(f"unsupported metric {metric!r}")
    terms = list(points)
    if len(terms) < 2:
        raise ValueError("need at least two points")
    U = _normalize(np.array([points[t] for t in terms]))
    labels = hdbscan_labels(U, min_cluster_size, min_samples, seed)
    return ClusterAssignment(terms, labels, _centroids(U, labels))


def nearest_centroid(U: np.ndarray, centroids: Mapping[int, np.ndarray]) -> np.ndarray:
    """Cluster id of the centroid with the smallest cosine distance; lowest id wins ties."""
    ids = np.array(sorted(centroids), dtype=np.int64)
    C = _normalize(np.array([centroids[i] for i in ids]))
    out = np.empty(len(U), dtype=np.int64)
    for lo in range(0, len(U), 65536):
        out[lo:lo + 65536] = ids[np.argmax(U[lo:lo + 65536] @ C.T, axis=1)]
    return out


def coarse_partition(
    space: EmbeddingSpace,
    sample_size: int = 15000,
    min_cluster_size: int = 15,
    min_samples: int = 5,
    seed: int | None = None,
) -> ClusterAssignment:
    """Cluster the most frequent ``sample_size`` terms, then attach every other term.

    Terms left unlabeled (outside the sample, or noise inside it) go to the
    nearest cluster centroid, so the result labels the whole vocabulary.
    """
    n = min(sample_size, len(space))
    if n < len(space):
        log.info("%s: coarse clustering on %d of %d terms", space.period, n, len(space))
    U = space.unit()
    labels = np.full(len(space), NOISE, dtype=np.int64)
    labels[:n] = hdbscan_labels(U[:n], min_cluster_size, min_samples, seed)
    centroids = _centroids(U[:n], labels[:n])
    if not centroids:
        raise ClusteringError(
            f"{space.period}: no density structure among the first {n} terms "
            f"(min_cluster_size={min_cluster_size}, min_samples={min_samples})"
        )
    todo = np.flatnonzero(labels == NOISE)
    labels[todo] = nearest_centroid(U[todo], centroids)
    return ClusterAssignment(list(space.vocab), labels, centroids)


@dataclass(frozen=True)
class SemanticObject:
    """A concept's converged neighborhood in one period."""

    concept: str
    period: str
    members: frozenset[str]
    centroid: np.ndarray = field(compare=False)
    depth: int = 1
    trail: tuple[int, ...] = ()

    def __len__(self) -> int:
        return len(self.members)

    def sorted_members(self) -> list[str]:
        return sorted(self.members)


def make_object(space: EmbeddingSpace, concept: str, members, trail: Sequence[int] = ()) -> SemanticObject:
    members = frozenset(members)
    trail = tuple(trail) or (len(members),)
    centroid = space.unit_vectors(sorted(members)).mean(axis=0)
    return SemanticObject(concept, space.period, members, centroid, len(trail), trail)


@dataclass(frozen=True)
class RefineParams:
    min_cluster_size: int = 5
    min_samples: int = 5
    sample: int | None = None
    max_depth: int = 64


def refine_neighborhood(
    space: EmbeddingSpace,
    concept: str,
    coarse: ClusterAssignment,
    params: RefineParams = RefineParams(),
    seed: int | None = None,
    cache: dict | None = None,
) -> SemanticObject:
    """Drill down from the concept's coarse cluster to its tightest dense sub-cluster.

    Each pass clusters the current member set (or a seeded random sample of it
    when ``params.sample`` is set), reassigns every current member to the
    nearest sub-cluster centroid and keeps the group holding the concept.
    Stops when the pass finds only noise or the member set no longer changes.
    ``cache`` memoizes unsampled passes by member set, for callers refining
    many anchors over the same coarse partition.
    """
    if concept not in space:
        raise OutOfVocabularyError(f"{concept!r} not in {space.period} vocabulary")
    start = coarse.labels.get(concept)
    if start is None:
        raise OutOfVocabularyError(f"{concept!r} missing from coarse assignment")
    idx = np.flatnonzero(coarse.label_array == start)
    members = np.sort(space.indices([coarse.terms[i] for i in idx]))
    if len(members) == 0:
        raise ClusteringError(f"coarse cluster of {concept!r} is empty")
    anchor = space.index(concept)
    U = space.unit()
    rng = np.random.default_rng(seed)
    trail = [len(members)]
    while len(trail) < params.max_depth:
        use_cache = cache is not None and not params.sample
        key = (tuple(members.tolist()), seed)
        if use_cache and key in cache:
            kept = cache[key]
        else:
            kept = _refine_pass(U, members, anchor, params, rng, seed)
            if use_cache:
                cache[key] = kept
        if kept is None or len(kept) == len(members):
            break
        members = kept
        trail.append(len(members))
    terms = [space.vocab[i] for i in members]
    return make_object(space, concept, terms, trail)


def _refine_pass(U, members, anchor, params, rng, seed):
    fit = members
    if params.sample and len(members) > params.sample:
        fit = np.sort(rng.choice(members, params.sample, replace=False))
    labels = hdbscan_labels(U[fit], params.min_cluster_size, params.min_samples, seed)
    centroids = _centroids(U[fit], labels)
    if not centroids:
        return None
    assigned = nearest_centroid(U[members], centroids)
    own = assigned[np.searchsorted(members, anchor)]
    return members[assigned == own]


@dataclass(frozen=True)
class StabilityReport:
    concept: str
    runs: int
    mean_score: float
    sd_score: float
    scores: tuple[float, ...] = ()
    flagged: tuple[int, ...] = ()


def neighborhood_score(space: EmbeddingSpace, obj: SemanticObject) -> float | None:
    """Mean cosine between the concept and its other members; ``None`` if it has none."""
    others = sorted(obj.members - {obj.concept})
    if not others:
        return None
    sims = space.unit_vectors(others) @ space.unit()[space.index(obj.concept)]
    return float(sims.mean())


def stability(
    pipeline: Callable[[int], tuple[EmbeddingSpace, SemanticObject]],
    concept: str,
    runs: int = 10,
) -> StabilityReport:
    """Rerun a clustering pipeline ``runs`` times and summarize anchor-to-member cosine.

    ``pipeline(run)`` returns the space and the concept's object for that run.
    A run whose neighborhood holds nothing but the concept scores 0 and is
    flagged.
    """
    if runs < 2:
        raise ValueError("runs must be at least 2")
    scores, flagged = [], []
    for run in range(runs):
        space, obj = pipeline(run)
        score = neighborhood_score(space, obj)
        if score is None:
            flagged.append(run)
            score = 0.0
        scores.append(score)
    arr = np.array(scores)
    return StabilityReport(concept, runs, float(arr.mean()), float(arr.std(ddof=1)), tuple(scores), tuple(flagged))


def object_path(directory: str | Path, period: str, concept: str) -> Path:
    return Path(directory) / f"{period}.{concept}.object.tsv"


def write_object(obj: SemanticObject, space: EmbeddingSpace, directory: str | Path) -> Path:
    anchor = space.unit()[space.index(obj.concept)]
    members = sorted(obj.members)
    sims = space.unit_vectors(members) @ anchor
    ranked = sorted(zip(members, sims.tolist()), key=lambda ms: (-ms[1], ms[0]))
    head = (
        f"#concept\t{obj.concept}\n#period\t{obj.period}\n#depth\t{obj.depth}\n"
        f"#trail\t{','.join(map(str, obj.trail))}\n"
    )
    path = object_path(directory, obj.period, obj.concept)
    atomic_write_text(path, head + tsv(["term", "cosine"], ranked))
    return path


def read_object(path: str | Path, space: EmbeddingSpace) -> SemanticObject:
    meta, members = {}, []
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    for line in lines:
        if line.startswith("#"):
            key, value = line[1:].split("\t", 1)
            meta[key] = value
        elif line and not line.startswith("term\t"):
            members.append(line.split("\t")[0])
    if meta.get("period") != space.period:
        raise ValueError(f"{path}: object period {meta.get('period')!r} != space {space.period!r}")
    trail = tuple(int(x) for x in meta["trail"].split(","))
    return make_object(space, meta["concept"], members, trail)


def stability_path(directory: str | Path, period: str) -> Path:
    return Path(directory) / f"{period}.stability.tsv"


def write_stability(reports: Sequence[StabilityReport], directory: str | Path, period: str) -> Path:
    rows = [(r.concept, r.runs, r.mean_score, r.sd_score) for r in reports]
    path = stability_path(directory, period)
    atomic_write_text(path, tsv(["concept", "runs", "mean", "sd"], rows))
    return path


def write_coarse(assign: ClusterAssignment, directory: str | Path, period: str) -> Path:
    """Term labels plus centroid rows (``#centroid<TAB>id<TAB>components``)."""
    lines = [f"#centroid\t{c}\t" + " ".join(fmt(float(x)) for x in assign.centroids[c]) for c in sorted(assign.centroids)]
    path = Path(directory) / f"{period}.coarse.tsv"
    body = tsv(["term", "cluster"], zip(assign.terms, assign.label_array.tolist()))
    atomic_write_text(path, "\n".join(lines) + "\n" + body)
    return path


def read_coarse(path: str | Path) -> ClusterAssignment:
    centroids, terms, labels = {}, [], []
    with open(path, encoding="utf-8") as fh:
        for line in fh.read().splitlines():
            if line.startswith("#centroid\t"):
                _, cid, comps = line.split("\t")
                centroids[int(cid)] = np.array(comps.split(), dtype=np.float64)
            elif line and line != "term\tcluster":
                term, label = line.split("\t")
                terms.append(term)
                labels.append(int(label))
    return ClusterAssignment(terms, np.array(labels), centroids)
