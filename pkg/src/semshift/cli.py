"""Stage-oriented command line: ``semshift <stage> --config FILE [--key value ...]``.

Every stage reads only files of earlier stages and writes only into its own
directory under ``<paths.output>/<run.id>/``. A stage records a stamp (a hash
of its inputs and parameters, plus digests of what it wrote); when the stamp
still matches, the stage is skipped.

Exit codes: 0 success, 1 internal error, 2 missing upstream input,
3 invalid configuration.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import synth
from ._io import atomic_write_text, file_digest, read_table, tsv
from .alignment import procrustes, read_alignment, write_alignment
from .clustering import (
    read_coarse,
    read_object,
    stability,
    write_coarse,
    write_object,
    write_stability,
)
from .config import SCHEMA, ConfigError, RunConfig, load_config
from .corpus import (
    TokenStream,
    ingest,
    load_lemma_table,
    load_stopwords,
    partition,
    preprocess,
    read_token_stream,
    stream_path,
    write_token_stream,
)
from .drift import drift_matrix, write_drift
from .embedding import load_space, model_path, save_space, train
from .metrics import (
    METRICS,
    LevelError,
    distance_levels,
    export_annotation_pairs,
    read_metrics,
    transition_name,
    write_annotation_pairs,
    write_metrics,
)
from .patterns import classify_report, write_classification
from .phrases import collapse_significant, write_phrases
from .pipeline import PeriodModel, build_period, neighborhood, transition

log = logging.getLogger("semshift")

EXIT_OK, EXIT_INTERNAL, EXIT_MISSING, EXIT_CONFIG = 0, 1, 2, 3


class MissingInput(RuntimeError):
    def __init__(self, path: Path):
        super().__init__(f"missing upstream input: {path}")
        self.path = path


@dataclass(frozen=True)
class Stage:
    name: str
    directory: str
    inputs: Callable[[RunConfig], list[Path]]
    params: Callable[[RunConfig], dict]
    body: Callable[[RunConfig, Path], None]


def _dir(config: RunConfig, stage: str) -> Path:
    return config.run_dir / STAGES[stage].directory


def _transitions(config: RunConfig) -> list[tuple[str, str]]:
    labels = config.labels
    return list(zip(labels, labels[1:]))


def _pick(config: RunConfig, *prefixes: str) -> dict:
    return {k: config[k] for k in sorted(SCHEMA) if k.startswith(prefixes)}


# -- stage inputs ------------------------------------------------------------


def _model_files(config):
    return [model_path(_dir(config, "train"), p) for p in config.labels]


def _object_files(config) -> list[Path]:
    """The cluster index plus every object file it lists (the index must exist first)."""
    index = _dir(config, "cluster") / "objects.tsv"
    if not index.exists():
        return [index]
    return [index] + [index.parent / row["file"] for row in read_table(index)]


def _cluster_files(config):
    coarse = [_dir(config, "cluster") / f"{p}.coarse.tsv" for p in config.labels]
    return _model_files(config) + coarse + _object_files(config)


def _models_and_objects(config):
    return _model_files(config) + _object_files(config)


def _preprocess_inputs(config):
    kind = config["input.kind"]
    if kind == "synth":
        files = [stream_path(_dir(config, "synth"), p) for p in config.labels]
    elif kind == "tokens":
        files = [stream_path(config.path("paths.input"), p) for p in config.labels]
    else:
        files = [config.path("paths.input")]
    return files + [p for p in (config.optional_path("paths.stopwords"), config.optional_path("paths.lemmas")) if p]


def _metric_files(config):
    return [_dir(config, "metrics") / f"{transition_name(a, b)}.metrics.tsv" for a, b in _transitions(config)]


def _report_inputs(config):
    names = [transition_name(a, b) for a, b in _transitions(config)]
    return (
        _metric_files(config)
        + [_dir(config, "classify") / f"{t}.classification.tsv" for t in names]
        + [_dir(config, "drift") / f"{t}.drift.csv" for t in names]
        + _cluster_files(config)
    )


# -- stage bodies ------------------------------------------------------------


def _do_synth(config: RunConfig, out: Path) -> None:
    seed = config["run.seed"]
    scenarios = synth.standard_scenarios(config["synth.kinds"], config.labels, seed=seed)
    streams = synth.generate(scenarios, config["synth.docs"], config["synth.vocab"], seed, config.labels)
    for stream in streams.values():
        write_token_stream(stream, out)
    synth.write_scenarios(scenarios, out, docs=config["synth.docs"], vocab=config["synth.vocab"], seed=seed)
    synth.write_ground_truth(scenarios, config.labels, out)


def _do_preprocess(config: RunConfig, out: Path) -> None:
    stopwords = load_stopwords(config.optional_path("paths.stopwords"))
    lemmas = load_lemma_table(config.optional_path("paths.lemmas"))
    rows = []
    if config["input.kind"] == "records":
        got = ingest(config.path("paths.input"), config.schema())
        streams, dropped = partition(got.records, config.periods, stopwords, lemmas)
        rows += [("skipped_lines", got.skipped), ("out_of_range", dropped)]
    else:
        src = _dir(config, "synth") if config["input.kind"] == "synth" else config.path("paths.input")
        streams = {}
        for p in config.labels:
            raw = read_token_stream(stream_path(src, p), p)
            streams[p] = TokenStream(p, [preprocess(" ".join(doc), stopwords, lemmas) for doc in raw.documents])
    for p in config.labels:
        write_token_stream(streams[p], out)
        rows += [(f"{p}.documents", len(streams[p])), (f"{p}.tokens", streams[p].n_tokens())]
    atomic_write_text(out / "summary.tsv", tsv(["item", "count"], rows))


def _do_phrases(config: RunConfig, out: Path) -> None:
    for p in config.labels:
        stream = read_token_stream(stream_path(_dir(config, "preprocess"), p), p)
        history: list = []
        if config["phrases.enabled"]:
            stream = collapse_significant(
                stream, config["phrases.z"], config["phrases.min_count"], config["phrases.max_rounds"], history
            )
        write_phrases(history, out, p)
        write_token_stream(stream, out)


def _do_train(config: RunConfig, out: Path) -> None:
    for p in config.labels:
        stream = read_token_stream(stream_path(_dir(config, "phrases"), p), p)
        save_space(train(stream, config.hyperparams()), model_path(out, p))


def _do_cluster(config: RunConfig, out: Path) -> None:
    params = config.pipeline_params()
    rows = []
    for p in config.labels:
        space = load_space(model_path(_dir(config, "train"), p), p)
        model = build_period(space, config.concepts, params)
        write_coarse(model.coarse, out, p)
        for concept in config.concepts:
            obj = model.objects.get(concept)
            if obj is not None:
                path = write_object(obj, space, out)
                rows.append((p, concept, path.name, len(obj), obj.depth))
        runs = config["clustering.stability_runs"]
        if runs:
            reports = []
            for concept in model.objects:
                def one(r, concept=concept):
                    shifted = PeriodModel(space, model.coarse, {})
                    seeded = dataclasses.replace(params, seed=params.seed + r)
                    return space, neighborhood(shifted, concept, seeded)
                reports.append(stability(one, concept, runs))
            write_stability(reports, out, p)
    atomic_write_text(out / "objects.tsv", tsv(["period", "concept", "file", "size", "depth"], rows))


def _load_models(config: RunConfig, with_coarse: bool = True) -> dict[str, PeriodModel]:
    models = {}
    index = read_table(_dir(config, "cluster") / "objects.tsv")
    for p in config.labels:
        space = load_space(model_path(_dir(config, "train"), p), p)
        coarse = read_coarse(_dir(config, "cluster") / f"{p}.coarse.tsv") if with_coarse else None
        objects = {
            row["concept"]: read_object(_dir(config, "cluster") / row["file"], space)
            for row in index
            if row["period"] == p
        }
        models[p] = PeriodModel(space, coarse, objects)
    return models


def _do_align(config: RunConfig, out: Path) -> None:
    spaces = {p: load_space(model_path(_dir(config, "train"), p), p) for p in config.labels}
    for a, b in _transitions(config):
        write_alignment(procrustes(spaces[a], spaces[b]), out)


def _do_metrics(config: RunConfig, out: Path) -> None:
    params = config.pipeline_params()
    models = _load_models(config)
    for a, b in _transitions(config):
        alignment = read_alignment(_dir(config, "align") / f"{a}_{b}.alignment.txt")
        result = transition(models[a], models[b], config.concepts, params, alignment)
        name = transition_name(a, b)
        write_metrics(result.reports, out, name)
        rows = [(m, result.baselines[m].mean, result.baselines[m].sd, result.baselines[m].n) for m in METRICS]
        atomic_write_text(out / f"{name}.baselines.tsv", tsv(["metric", "mean", "sd", "n"], rows))


def _do_classify(config: RunConfig, out: Path) -> None:
    th = config.pipeline_params().thresholds
    for a, b in _transitions(config):
        name = transition_name(a, b)
        reports = [classify_report(r, th) for r in read_metrics(_dir(config, "metrics") / f"{name}.metrics.tsv", a, b)]
        write_classification(reports, out, name)


def _do_drift(config: RunConfig, out: Path) -> None:
    models = _load_models(config, with_coarse=False)
    for a, b in _transitions(config):
        write_drift(drift_matrix(models[a].objects, models[b].objects), out, transition_name(a, b))


def _do_annotate(config: RunConfig, out: Path) -> None:
    models = _load_models(config, with_coarse=False)
    for offset, p in enumerate(config.labels):
        objects = [models[p].objects[c] for c in sorted(models[p].objects)]
        if not objects:
            log.warning("%s: no objects; no annotation pairs", p)
            continue
        try:
            levels = distance_levels(models[p].space, objects)
        except LevelError as exc:
            log.warning("%s: %s", p, exc)
            continue
        room = 3 * min(sum(1 for v in levels.values() if v == lv) for lv in (1, 2, 3))
        n_pairs = min(config["annotate.n_pairs"], room)
        if n_pairs < config["annotate.n_pairs"]:
            log.warning("%s: only %d annotation pairs available", p, n_pairs)
        if n_pairs:
            write_annotation_pairs(export_annotation_pairs(levels, objects, n_pairs, config["run.seed"] + offset), out / p)


def projection_rows(models: dict[str, PeriodModel]) -> list[tuple]:
    """PCA 2-D coordinates of every object member, one fit per period."""
    rows = []
    for p, model in models.items():
        entries = [(c, t) for c in sorted(model.objects) for t in model.objects[c].sorted_members()]
        if not entries:
            continue
        X = model.space.unit_vectors([t for _, t in entries]).astype(np.float64)
        X = X - X.mean(axis=0)
        _, _, Vt = np.linalg.svd(X, full_matrices=False)
        axes = Vt[:2]
        # fix each axis' sign so its largest loading is positive
        axes = axes * np.sign(axes[np.arange(len(axes)), np.abs(axes).argmax(axis=1)])[:, None]
        XY = X @ axes.T
        if XY.shape[1] < 2:
            XY = np.hstack([XY, np.zeros((len(XY), 2 - XY.shape[1]))])
        rows += [(p, c, t, float(x), float(y)) for (c, t), (x, y) in zip(entries, XY)]
    return rows


def _do_report(config: RunConfig, out: Path) -> None:
    models = _load_models(config, with_coarse=False)
    atomic_write_text(out / "projection.csv", tsv(["period", "concept", "term", "x", "y"], projection_rows(models), sep=","))
    lines = [f"# Run {config['run.id']}", "", f"Periods: {', '.join(config.labels)}. Concepts: {len(config.concepts)}.", ""]
    for p in config.labels:
        sizes = ", ".join(f"{c} ({len(o)})" for c, o in sorted(models[p].objects.items())) or "none"
        lines += [f"Objects in {p}: {sizes}", ""]
    for a, b in _transitions(config):
        name = transition_name(a, b)
        labels = {r["concept"]: r["label"] for r in read_table(_dir(config, "classify") / f"{name}.classification.tsv")}
        reports = read_metrics(_dir(config, "metrics") / f"{name}.metrics.tsv", a, b)
        lines += [f"## {a} to {b}", "", "| concept | " + " | ".join(f"{m} raw | {m} z" for m in METRICS) + " | label |"]
        lines.append("|---" * (2 + 2 * len(METRICS)) + "|")
        for r in reports:
            cells = " | ".join(f"{r.values[m].raw:.4f} | {r.values[m].z:+.2f}" for m in METRICS)
            lines.append(f"| {r.concept} | {cells} | {labels.get(r.concept, '')} |")
        drift = read_table(_dir(config, "drift") / f"{name}.drift.csv", sep=",")
        marked = [d for d in drift if d["significant"] == "true"]
        lines += ["", f"Drift: {len(marked)} of {len(drift)} concept pairs changed significantly."]
        lines += [f"- {d['concept_a']} / {d['concept_b']}: {float(d['delta']):+.4f}" for d in marked]
        lines.append("")
    atomic_write_text(out / "report.md", "\n".join(lines))


STAGES: dict[str, Stage] = {
    s.name: s
    for s in (
        Stage("synth", "synth", lambda c: [], lambda c: _pick(c, "synth.", "corpus.", "run.seed"), _do_synth),
        Stage("preprocess", "corpus", _preprocess_inputs, lambda c: _pick(c, "input.", "corpus."), _do_preprocess),
        Stage(
            "phrases",
            "phrases",
            lambda c: [stream_path(_dir(c, "preprocess"), p) for p in c.labels],
            lambda c: _pick(c, "phrases."),
            _do_phrases,
        ),
        Stage(
            "train",
            "models",
            lambda c: [stream_path(_dir(c, "phrases"), p) for p in c.labels],
            lambda c: {**_pick(c, "embedding.", "run.seed"), "workers": c.workers},
            _do_train,
        ),
        Stage(
            "cluster",
            "clusters",
            _model_files,
            lambda c: {**_pick(c, "clustering.", "run.seed"), "concepts": list(c.concepts)},
            _do_cluster,
        ),
        Stage("align", "align", _model_files, lambda c: {}, _do_align),
        Stage(
            "metrics",
            "metrics",
            lambda c: _cluster_files(c)
            + [_dir(c, "align") / f"{a}_{b}.alignment.txt" for a, b in _transitions(c)],
            lambda c: {**_pick(c, "metrics.", "clustering.", "run.seed"), "concepts": list(c.concepts)},
            _do_metrics,
        ),
        Stage("classify", "classify", _metric_files, lambda c: _pick(c, "patterns."), _do_classify),
        Stage("drift", "drift", _models_and_objects, lambda c: {}, _do_drift),
        Stage(
            "annotate-export",
            "annotate",
            _models_and_objects,
            lambda c: _pick(c, "annotate.", "run.seed"),
            _do_annotate,
        ),
        Stage("report", "report", _report_inputs, lambda c: _pick(c, "run.id"), _do_report),
    )
}

PIPELINE = ("preprocess", "phrases", "train", "cluster", "align", "metrics", "classify", "drift", "annotate-export", "report")
STAGE_CHOICES = ("synth",) + PIPELINE + ("all",)


# -- stamps ------------------------------------------------------------------


def _stamp_path(config: RunConfig, stage: str) -> Path:
    return config.run_dir / ".stamps" / f"{stage}.json"


def _stamp_key(config: RunConfig, stage: Stage) -> str:
    files = stage.inputs(config)
    for f in files:
        if not f.exists():
            raise MissingInput(f)
    payload = {
        "stage": stage.name,
        "params": stage.params(config),
        "inputs": [[str(f.name), file_digest(f)] for f in files],
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True, default=str).encode()).hexdigest()


def _outputs(directory: Path) -> dict[str, str]:
    if not directory.exists():
        return {}
    return {
        str(f.relative_to(directory)): file_digest(f)
        for f in sorted(directory.rglob("*"))
        if f.is_file() and not f.name.startswith(".")
    }


def run_stage(config: RunConfig, name: str) -> bool:
    """Run one stage unless its stamp matches; returns whether work was done."""
    stage = STAGES[name]
    key = _stamp_key(config, stage)
    out = _dir(config, name)
    stamp = _stamp_path(config, name)
    if stamp.exists():
        recorded = json.loads(stamp.read_text("utf-8"))
        if recorded.get("key") == key and recorded.get("outputs") == _outputs(out):
            log.info("stamp hit: %s is up to date (%s)", name, stamp)
            return False
    log.info("running %s", name)
    out.mkdir(parents=True, exist_ok=True)
    stage.body(config, out)
    atomic_write_text(stamp, json.dumps({"stage": name, "key": key, "outputs": _outputs(out)}, indent=1, sort_keys=True) + "\n")
    return True


def run(stage: str, config: RunConfig) -> int:
    """Run ``stage`` (or every stage in order for ``all``) and return the exit status."""
    if stage == "all":
        names = (("synth",) if config["input.kind"] == "synth" else ()) + PIPELINE
    elif stage in STAGES:
        names = (stage,)
    else:
        print(f"unknown stage {stage!r}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        for name in names:
            run_stage(config, name)
    except MissingInput as exc:
        print(f"missing upstream input: {exc.path}", file=sys.stderr)
        return EXIT_MISSING
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - every other failure maps to the internal-error code
        log.exception("stage failed: %s", exc)
        return EXIT_INTERNAL
    return EXIT_OK


# -- argument parsing --------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def parse_args(argv: Sequence[str]) -> tuple[argparse.Namespace, dict[str, str]]:
    parser = _Parser(prog="semshift", description=__doc__.split("\n")[0])
    parser.add_argument("stage", choices=STAGE_CHOICES)
    parser.add_argument("--config", help="configuration file with dotted 'key = value' lines")
    parser.add_argument("--workers", type=int, help="worker threads for training")
    parser.add_argument("--deterministic", action="store_true", help="force single-worker, reproducible paths")
    parser.add_argument("--seed", type=int, help="global seed")
    parser.add_argument("-v", "--verbose", action="store_true")
    args, rest = parser.parse_known_args(argv)
    overrides: dict[str, str] = {}
    i = 0
    while i < len(rest):
        tok = rest[i]
        if not tok.startswith("--"):
            raise ConfigError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, value = key.split("=", 1)
            i += 1
        elif i + 1 < len(rest):
            value = rest[i + 1]
            i += 2
        else:
            raise ConfigError(f"flag {tok} needs a value")
        if key not in SCHEMA:
            raise ConfigError(f"unknown configuration key {key!r}")
        overrides[key] = value
    if args.workers is not None:
        overrides["run.workers"] = str(args.workers)
    if args.seed is not None:
        overrides["run.seed"] = str(args.seed)
    if args.deterministic:
        overrides["run.deterministic"] = "true"
    return args, overrides


def main(argv: Sequence[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args, overrides = parse_args(argv)
        logging.basicConfig(
            level=logging.DEBUG if args.verbose else logging.INFO,
            format="%(levelname)s %(name)s: %(message)s",
            stream=sys.stderr,
        )
        config = load_config(args.config, overrides)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(args.stage, config)


if __name__ == "__main__":
    sys.exit(main())
