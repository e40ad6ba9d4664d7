"""Synthetic diachronic corpora with planted, labelled meaning change.

Every document is drawn from a mixture: a topic (background, or a planted
scenario topic), plus tokens from a global Zipfian distribution so that
frequencies and phrase statistics look like real text. Each scenario owns an
anchor term whose co-occurring context changes between the first two periods
in the way its kind names; later periods repeat the second period's state.

Also here: small fixtures used by the test and acceptance suites (a
planted-synonym corpus, a planted-collocation corpus, and vector fixtures
for clustering).
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping, Sequence

import numpy as np

from ._io import atomic_write_text, tsv
from .corpus import TokenStream

KINDS = ("stable", "lexical_churn", "replacement", "narrowing", "fragmentation", "defragmentation")
EXPECTED = {
    "stable": "Stability",
    "lexical_churn": "LexicalReplacement",
    "replacement": "Replacement",
    "narrowing": "Narrowing",
    "fragmentation": "Fragmentation",
    "defragmentation": "Defragmentation",
}
DEFAULT_PERIODS = ("T1", "T2")
# corpus size at which the standard scenarios are reliably recoverable
STANDARD_DOCS = 20000
STANDARD_VOCAB = 1500

_ONSETS = "b d f g k l m n p r s t v z".split()
_VOWELS = "a e i o u".split()


class ScenarioError(ValueError):
    pass


def word_names(start: int = 0, syllables: int = 3) -> Iterator[str]:
    """Deterministic pronounceable names: ``babaka``, ``babake``, ..."""
    sylls = [o + v for o in _ONSETS for v in _VOWELS]
    base = len(sylls)
    for i in itertools.count(start):
        parts, x = [], i
        for _ in range(syllables):
            x, r = divmod(x, base)
            parts.append(sylls[r])
        if x:
            raise ScenarioError("ran out of synthetic word names")
        yield "".join(reversed(parts))


@dataclass(frozen=True)
class DriftScenario:
    """An anchor and, per period, the context sets it co-occurs with.

    ``context_sets[period]`` lists ``(terms, weight)``; a weight is a volume
    of anchor documents relative to the generator's base count, so adding a
    set never takes documents away from another. An empty ``terms`` tuple
    stands for the anchor's everyday use inside ordinary background
    documents of random topics. ``echo_sets``
    lists the sets that also occur without the anchor in that period, which
    keeps their words in the vocabulary and their geometry intact.
    ``host_slots`` pairs each set with a small integer: sets sharing a slot
    are embedded in the same background topic. ``host_share`` is the share
    of a scenario document's topical tokens drawn from that host topic.
    """

    kind: str
    anchor: str
    context_sets: Mapping[str, tuple[tuple[tuple[str, ...], float], ...]]
    echo_sets: Mapping[str, tuple[tuple[str, ...], ...]] = field(default_factory=dict)
    host_slots: tuple[tuple[tuple[str, ...], int], ...] = ()
    host_share: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.host_share < 1.0:
            raise ScenarioError(f"{self.anchor}: host_share must be in [0, 1)")
        if self.kind not in KINDS:
            raise ScenarioError(f"unknown scenario kind {self.kind!r}")
        for period, sets in self.context_sets.items():
            if not sets:
                raise ScenarioError(f"{self.anchor}: no context sets in {period}")
            if any(w <= 0 for _, w in sets):
                raise ScenarioError(f"{self.anchor}: mixing weights must be positive")

    @property
    def expected(self) -> str:
        return EXPECTED[self.kind]

    def all_sets(self) -> list[tuple[str, ...]]:
        out: list[tuple[str, ...]] = []
        for sets in self.context_sets.values():
            out.extend(t for t, _ in sets if t and t not in out)
        for sets in self.echo_sets.values():
            out.extend(t for t in sets if t not in out)
        return out

    def terms(self) -> set[str]:
        out = {self.anchor}
        for t in self.all_sets():
            out.update(t)
        return out

    def slot(self, terms: tuple[str, ...]) -> int:
        return dict(self.host_slots).get(terms, 0)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "anchor": self.anchor,
            "seed": self.seed,
            "context_sets": {p: [[list(t), w] for t, w in s] for p, s in self.context_sets.items()},
            "echo_sets": {p: [list(t) for t in s] for p, s in self.echo_sets.items()},
            "host_slots": [[list(t), k] for t, k in self.host_slots],
            "host_share": self.host_share,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "DriftScenario":
        return cls(
            d["kind"],
            d["anchor"],
            {p: tuple((tuple(t), float(w)) for t, w in s) for p, s in d["context_sets"].items()},
            {p: tuple(tuple(t) for t in s) for p, s in d.get("echo_sets", {}).items()},
            tuple((tuple(t), int(k)) for t, k in d.get("host_slots", [])),
            float(d.get("host_share", 0.0)),
            int(d.get("seed", 0)),
        )


@dataclass(frozen=True)
class ScenarioSizes:
    """Term counts and weights used when building the standard scenario of each kind."""

    context: int = 60
    churn_kept: int = 15
    churn_swapped: int = 45
    side_share: float = 0.5
    dilution: float = 1.0
    host_share: float = 0.0
    churn_host_share: float = 0.5
    fragment_core: int = 60
    fragments: int = 1
    fragment_size: int = 2
    fragment_share: float = 0.1


def build_scenario(
    kind: str,
    anchor: str,
    names: Iterator[str],
    periods: Sequence[str] = DEFAULT_PERIODS,
    sizes: ScenarioSizes = ScenarioSizes(),
    seed: int = 0,
) -> DriftScenario:
    """The canonical scenario of ``kind``; change happens between the first two periods.

    * stable: one context set throughout.
    * lexical_churn: most context words are swapped for new ones (absent
      before) in the same host topic; the old ones disappear.
    * replacement: the anchor moves to a context set in another host topic;
      the old set lives on without it.
    * narrowing: the anchor keeps its context set at constant volume while
      its diffuse everyday use in background documents grows, so its
      neighborhood stays put but the anchor itself drifts away from it.
    * fragmentation: a small splinter of a cohesive set starts to appear in
      its own documents, apart from the rest, so the set gains a tight
      subgroup and its similarity distribution gets a heavy tail;
      defragmentation is the reverse.
    """
    if len(periods) < 2:
        raise ScenarioError("need at least two periods")

    def take(n):
        return tuple(next(names) for _ in range(n))

    slots: list[tuple[tuple[str, ...], int]] = []
    if kind == "stable":
        c = take(sizes.context)
        before = after = ((c, 1.0),)
        echo_before = echo_after = ()
    elif kind == "lexical_churn":
        kept, old, new = take(sizes.churn_kept), take(sizes.churn_swapped), take(sizes.churn_swapped)
        before, after = ((kept + old, 1.0),), ((kept + new, 1.0),)
        echo_before = echo_after = ()
    elif kind == "replacement":
        c, d = take(sizes.context), take(sizes.context)
        before, after = ((c, 1.0),), ((d, 1.0),)
        echo_before = echo_after = (c, d)
        slots = [(d, 1)]
    elif kind == "narrowing":
        c = take(sizes.context)
        before = ((c, 1.0), ((), sizes.side_share))
        after = ((c, 1.0), ((), sizes.side_share + sizes.dilution))
        echo_before = echo_after = ()
    elif kind in ("fragmentation", "defragmentation"):
        k, m = sizes.fragments, sizes.fragment_size
        whole = take(sizes.fragment_core + k * m)
        parts = tuple(whole[i * m:(i + 1) * m] for i in range(k))
        core = whole[k * m:]
        share = sizes.fragment_share
        unified = ((whole, 1.0),)
        split = ((core, 1.0 - share),) + tuple((p, share / k) for p in parts)
        if kind == "fragmentation":
            before, after = unified, split
        else:
            before, after = split, unified
        echo_before = echo_after = ()
        slots = [(p, i + 1) for i, p in enumerate(parts)]
    else:
        raise ScenarioError(f"unknown scenario kind {kind!r}")
    context = {periods[0]: before}
    echo = {periods[0]: echo_before}
    for p in periods[1:]:
        context[p], echo[p] = after, echo_after
    host = sizes.churn_host_share if kind == "lexical_churn" else sizes.host_share
    return DriftScenario(kind, anchor, context, echo, tuple(slots), host, seed)


def standard_scenarios(
    kinds: Sequence[str] = KINDS,
    periods: Sequence[str] = DEFAULT_PERIODS,
    sizes: ScenarioSizes = ScenarioSizes(),
    seed: int = 0,
) -> list[DriftScenario]:
    """One scenario per kind with anchors ``concept_<kind>`` and fresh context words."""
    names = word_names(start=5000)
    return [build_scenario(k, f"concept_{k}", names, periods, sizes, seed) for k in kinds]


@dataclass(frozen=True)
class GeneratorConfig:
    """Shape of the background and of scenario documents.

    Every word has a latent position. Background words are grouped into
    topics with subtopics; scenario context sets form their own small
    groups. A document picks a group and a random center near one of the
    group's subtopic centers, then favours words close to that center, so
    each word has its own, reproducible co-occurrence profile.
    """

    n_topics: int = 30
    n_subtopics: int = 1
    latent_dim: int = 16
    subtopic_spread: float = 1.0
    word_spread: float = 0.7
    center_spread: float = 0.5
    concentration: float = 10.0
    doc_length: int = 24
    global_share: float = 0.1
    zipf_exponent: float = 1.0
    topic_zipf: float = 0.3
    anchor_doc_rate: float = 0.025
    echo_doc_rate: float = 0.03
    anchor_repeats: int = 1
    set_concentration: float = 20.0
    set_zipf: float = 0.0


def _zipf(n: int, exponent: float) -> np.ndarray:
    w = 1.0 / np.arange(1, n + 1) ** exponent
    return w / w.sum()


def _unit(X: np.ndarray) -> np.ndarray:
    return X / np.linalg.norm(X, axis=-1, keepdims=True)


class _Sampler:
    """Draws tokens from a fixed weighted word list via a cumulative table."""

    def __init__(self, words: Sequence[str], weights: np.ndarray):
        self.words = list(words)
        self.cdf = np.cumsum(weights)
        self.cdf /= self.cdf[-1]

    def draw(self, rng: np.random.Generator, n: int) -> list[str]:
        idx = np.searchsorted(self.cdf, rng.random(n), side="right")
        return [self.words[i] for i in np.minimum(idx, len(self.words) - 1)]


class _Group:
    """Words with latent positions; each draw uses a fresh document center."""

    def __init__(self, words, pos, base, centers, config: GeneratorConfig):
        self.words = list(words)
        self.pos = pos
        self.base = np.asarray(base, dtype=np.float64)
        self.centers = centers
        self.spread = config.center_spread / np.sqrt(pos.shape[1])
        self.kappa = config.concentration

    def draw(self, rng: np.random.Generator, n: int) -> list[str]:
        if n <= 0:
            return []
        c = self.centers[int(rng.integers(len(self.centers)))]
        c = _unit(c + self.spread * rng.normal(size=c.shape))
        logits = self.kappa * (self.pos @ c)
        w = self.base * np.exp(logits - logits.max())
        cdf = np.cumsum(w)
        idx = np.searchsorted(cdf, rng.random(n) * cdf[-1], side="right")
        return [self.words[i] for i in np.minimum(idx, len(self.words) - 1)]


def _check(scenarios: Sequence[DriftScenario]) -> None:
    anchors = [s.anchor for s in scenarios]
    dupes = {a for a in anchors if anchors.count(a) > 1}
    if dupes:
        raise ScenarioError(f"scenarios share anchors: {sorted(dupes)}")
    seen: dict[str, str] = {}
    for s in scenarios:
        for t in s.terms():
            if t in seen and seen[t] != s.anchor:
                raise ScenarioError(f"term {t!r} used by both {seen[t]} and {s.anchor}")
            seen[t] = s.anchor


def _layout(words, scenario_words, config: GeneratorConfig, rng: np.random.Generator):
    """Background topic groups, latent positions of scenario words, and the global sampler."""
    n, L, T, S = len(words), config.latent_dim, config.n_topics, config.n_subtopics
    topic_of = rng.permutation(np.arange(n) % T)
    sub_of = rng.integers(0, S, n)
    topic_centers = _unit(rng.normal(size=(T, L)))
    sub_centers = _unit(topic_centers[:, None, :] + config.subtopic_spread * rng.normal(size=(T, S, L)) / np.sqrt(L))
    pos = _unit(sub_centers[topic_of, sub_of] + config.word_spread * rng.normal(size=(n, L)) / np.sqrt(L))
    base = rng.permutation(_zipf(n, config.topic_zipf) * n)
    topics = []
    for k in range(T):
        idx = np.flatnonzero(topic_of == k)
        topics.append(_Group([words[i] for i in idx], pos[idx], base[idx], sub_centers[k], config))
    global_sampler = _Sampler([words[i] for i in rng.permutation(n)], _zipf(n, config.zipf_exponent))
    scenario_pos = {
        w: _unit(rng.normal(size=L)) for w in scenario_words
    }
    return topics, global_sampler, scenario_pos


def _set_group(terms, scenario_pos, config: GeneratorConfig) -> _Group:
    pos = np.array([scenario_pos[t] for t in terms])
    center = _unit(pos.mean(axis=0))
    # pull members toward their common center so the set is cohesive but not degenerate
    pos = _unit(center + config.word_spread * (pos - center) / np.sqrt(config.latent_dim) * 2.0)
    group = _Group(terms, pos, _zipf(len(terms), config.set_zipf), center[None, :], config)
    group.kappa = config.set_concentration
    return group


def generate(
    scenarios: Sequence[DriftScenario],
    docs_per_period: int,
    vocab_size: int,
    seed: int,
    periods: Sequence[str] = DEFAULT_PERIODS,
    config: GeneratorConfig = GeneratorConfig(),
) -> dict[str, TokenStream]:
    """Token streams per period; identical inputs give identical output.

    The background (``vocab_size`` minus all scenario terms) is the same in
    every period. Scenario documents mix their context set with a host
    background topic. Documents appear in a fixed, seeded order.
    """
    _check(scenarios)
    scenario_terms = set().union(*(s.terms() for s in scenarios)) if scenarios else set()
    n_background = vocab_size - len(scenario_terms)
    if n_background < 4 * config.n_topics * config.n_subtopics:
        raise ScenarioError(f"vocab_size {vocab_size} too small for {len(scenario_terms)} scenario terms")
    if docs_per_period < 1:
        raise ScenarioError("docs_per_period must be positive")
    names = (w for w in word_names() if w not in scenario_terms)
    words = [next(names) for _ in range(n_background)]

    root = np.random.SeedSequence(seed)
    layout_seed, *period_seeds = root.spawn(len(periods) + 1)
    layout_rng = np.random.default_rng(layout_seed)
    topics, global_sampler, scenario_pos = _layout(words, sorted(scenario_terms), config, layout_rng)
    host_order = layout_rng.permutation(config.n_topics)
    hosts: dict[tuple[str, ...], int] = {}
    host_share: dict[tuple[str, ...], float] = {}
    slot_base = 0
    for s in scenarios:
        for terms in s.all_sets():
            hosts[terms] = int(host_order[(slot_base + s.slot(terms)) % config.n_topics])
            host_share[terms] = s.host_share
        slot_base += 1 + max((k for _, k in s.host_slots), default=0)
    groups = {t: _set_group(t, scenario_pos, config) for t in hosts}

    streams = {}
    for period, period_seed in zip(periods, period_seeds):
        rng = np.random.default_rng(period_seed)
        plan: list[tuple] = []
        n_anchor = int(round(config.anchor_doc_rate * docs_per_period))
        n_echo = int(round(config.echo_doc_rate * docs_per_period))
        for s in scenarios:
            sets = s.context_sets.get(period, ())
            for terms, weight in sets:
                for _ in range(int(round(weight * n_anchor))):
                    # an empty set is the anchor's everyday use in an ordinary background document
                    plan.append((s.anchor, terms if terms else int(rng.integers(config.n_topics))))
            echoes = s.echo_sets.get(period, ())
            for j in range(n_echo if echoes else 0):
                plan.append((None, echoes[j % len(echoes)]))
        n_background_docs = docs_per_period - len(plan)
        if n_background_docs < 0:
            raise ScenarioError("docs_per_period too small for the scenario documents")
        plan.extend((None, int(k)) for k in rng.integers(0, config.n_topics, n_background_docs))
        docs = []
        for i in rng.permutation(len(plan)):
            anchor, source = plan[i]
            n = config.doc_length
            n_global = int(rng.binomial(n, config.global_share))
            n_topical = n - n_global
            if isinstance(source, int):
                tokens = topics[source].draw(rng, n_topical)
            else:
                n_host = int(rng.binomial(n_topical, host_share[source]))
                tokens = groups[source].draw(rng, n_topical - n_host) + topics[hosts[source]].draw(rng, n_host)
            tokens += global_sampler.draw(rng, n_global)
            if anchor is not None:
                tokens += [anchor] * config.anchor_repeats
            rng.shuffle(tokens)
            docs.append(tokens)
        streams[period] = TokenStream(period, docs)
    return streams


def cooccurrence_rates(stream: TokenStream, scenario: DriftScenario) -> list[float]:
    """Share of anchor documents whose context matches each configured set, in order."""
    sets = scenario.context_sets[stream.period]
    hits = np.zeros(len(sets))
    total = 0
    for doc in stream.documents:
        if scenario.anchor not in doc:
            continue
        total += 1
        words = set(doc)
        # background usage (empty set) wins only when no set term is present
        overlaps = [len(words & set(terms)) if terms else 0.5 for terms, _ in sets]
        hits[int(np.argmax(overlaps))] += 1
    return (hits / max(total, 1)).tolist()


def scenario_path(directory: str | Path) -> Path:
    return Path(directory) / "scenarios.json"


def write_scenarios(scenarios: Sequence[DriftScenario], directory: str | Path, **params) -> Path:
    payload = {"params": params, "scenarios": [s.to_dict() for s in scenarios]}
    path = scenario_path(directory)
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def read_scenarios(path: str | Path) -> tuple[list[DriftScenario], dict]:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    return [DriftScenario.from_dict(d) for d in payload["scenarios"]], payload.get("params", {})


def ground_truth_rows(scenarios: Sequence[DriftScenario], periods: Sequence[str]) -> list[tuple[str, str, str]]:
    """(anchor, transition, expected label); only the planted transition is labelled."""
    transition = f"{periods[0]}_{periods[1]}"
    return [(s.anchor, transition, s.expected) for s in scenarios]


def write_ground_truth(scenarios: Sequence[DriftScenario], periods: Sequence[str], directory: str | Path) -> Path:
    path = Path(directory) / "ground_truth.tsv"
    atomic_write_text(path, tsv(["anchor", "transition", "expected"], ground_truth_rows(scenarios, periods)))
    return path


# -- small fixtures ---------------------------------------------------------


def synonym_corpus(
    n_groups: int = 5,
    group_size: int = 4,
    n_docs: int = 3000,
    doc_length: int = 20,
    n_background: int = 400,
    seed: int = 0,
) -> tuple[TokenStream, list[list[str]]]:
    """Groups of interchangeable words: every document on topic ``g`` uses any member of group ``g``.

    Group members never co-occur by construction (one variant per doc), so
    their similarity has to come from shared contexts alone.
    """
    rng = np.random.default_rng(seed)
    names = word_names()
    groups = [[f"syn{g}_{i}" for i in range(group_size)] for g in range(n_groups)]
    contexts = [[next(names) for _ in range(30)] for _ in range(n_groups)]
    filler = _Sampler([next(names) for _ in range(n_background)], _zipf(n_background, 1.0))
    docs = []
    for _ in range(n_docs):
        g = int(rng.integers(n_groups))
        ctx = _Sampler(contexts[g], np.ones(len(contexts[g])))
        variant = groups[g][int(rng.integers(group_size))]
        tokens = ctx.draw(rng, doc_length // 2) + filler.draw(rng, doc_length // 2 - 2) + [variant, variant]
        rng.shuffle(tokens)
        docs.append(tokens)
    return TokenStream("T1", docs), groups


def collocation_corpus(
    n_docs: int = 10000,
    doc_length: int = 20,
    n_background: int = 100,
    n_planted: int = 5,
    planted_rate: float = 0.3,
    zipf_exponent: float = 0.0,
    seed: int = 0,
) -> tuple[TokenStream, list[tuple[str, str]]]:
    """Word salad with ``n_planted`` fixed two-word collocations inserted.

    Each document contains each collocation with probability
    ``planted_rate / n_planted``; the first word of a collocation never
    appears on its own, so its conditional probability is 1. With the
    default flat background every other pair sits near ``1 / n_background``.
    A skewed background (``zipf_exponent`` > 0) spreads background
    conditional probabilities out, since they follow the second word's
    frequency.
    """
    rng = np.random.default_rng(seed)
    names = word_names()
    words = [next(names) for _ in range(n_background)]
    planted = [(f"col{i}a", f"col{i}b") for i in range(n_planted)]
    filler = _Sampler(words, _zipf(n_background, zipf_exponent))
    docs = []
    for _ in range(n_docs):
        tokens = filler.draw(rng, doc_length)
        for pair in planted:
            if rng.random() < planted_rate / n_planted:
                pos = int(rng.integers(0, len(tokens) + 1))
                tokens[pos:pos] = list(pair)
        docs.append(tokens)
    return TokenStream("T1", docs), planted


def blob_fixture(
    sizes: Sequence[int], dim: int = 8, spread: float = 0.05, n_noise: int = 0, seed: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Tight blobs around random unit directions plus uniform noise on the sphere; truth ``-1`` is noise."""
    rng = np.random.default_rng(seed)
    centers = rng.normal(size=(len(sizes), dim))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    parts, truth = [], []
    for k, n in enumerate(sizes):
        parts.append(centers[k] + spread * rng.normal(size=(n, dim)))
        truth += [k] * n
    if n_noise:
        parts.append(rng.normal(size=(n_noise, dim)))
        truth += [-1] * n_noise
    return np.vstack(parts), np.array(truth)


def sub_blob_space(
    n_cluster: int = 60, n_core: int = 12, dim: int = 16, n_other: int = 120, seed: int = 0
) -> tuple[dict[str, np.ndarray], str, list[str], list[str]]:
    """A cluster of ``n_cluster`` terms containing a much tighter ``n_core``-term sub-blob with the anchor.

    Returns (term vectors, anchor, core terms, cluster terms); the remaining
    ``n_other`` terms form two far-away clusters.
    """
    rng = np.random.default_rng(seed)
    axes = np.linalg.qr(rng.normal(size=(dim, dim)))[0]
    main, far1, far2 = axes[0], axes[1], axes[2]
    loose_dir = axes[3]
    vectors: dict[str, np.ndarray] = {}
    core = [f"core{i:02d}" for i in range(n_core)]
    loose = [f"loose{i:02d}" for i in range(n_cluster - n_core)]
    core_center = main + 0.35 * loose_dir
    for t in core:
        vectors[t] = core_center + 0.01 * rng.normal(size=dim)
    for t in loose:
        vectors[t] = main + 0.05 * rng.normal(size=dim)
    for i in range(n_other):
        center = far1 if i % 2 == 0 else far2
        vectors[f"other{i:03d}"] = center + 0.15 * rng.normal(size=dim)
    return vectors, core[0], core, core + loose


def small_fixtures() -> dict[str, np.ndarray]:
    """Named point sets of at most 50 rows, for exact comparison against a reference clusterer."""
    out = {}
    X, _ = blob_fixture([20, 20], dim=4, spread=0.08, n_noise=5, seed=1)
    out["two_blobs_noise"] = X
    X, _ = blob_fixture([15, 15, 15], dim=6, spread=0.1, seed=2)
    out["three_blobs"] = X
    X, _ = blob_fixture([30, 8], dim=5, spread=0.05, n_noise=4, seed=3)
    out["big_and_small"] = X
    out["identical"] = np.tile(np.array([[1.0, 2.0, 3.0]]), (10, 1))
    out["uniform"] = np.random.default_rng(4).normal(size=(40, 3))
    X, _ = blob_fixture([12, 12, 12, 12], dim=3, spread=0.2, seed=5)
    out["overlapping"] = X
    # exact ties: groups of duplicated points plus a few strays
    rng = np.random.default_rng(6)
    C = rng.normal(size=(3, 4))
    out["duplicates"] = np.vstack([np.tile(C[0], (8, 1)), np.tile(C[1], (8, 1)), np.tile(C[2], (6, 1)), rng.normal(size=(3, 4))])
    return out
