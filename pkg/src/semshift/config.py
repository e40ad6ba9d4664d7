"""Run configuration: flat dotted keys in a text file, with command-line overrides.

A configuration file holds ``key = value`` lines; ``#`` starts a comment.
Values are typed by the key's default: integers, floats, booleans
(``true``/``false``), strings, and comma-separated lists. Bundled defaults
live in ``semshift/data/defaults.conf``; a user file and then ``--key value``
flags are layered on top of them.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

from .clustering import RefineParams
from .corpus import PeriodConfigError, TimePeriod, validate_periods
from .embedding import Hyperparams
from .patterns import Thresholds
from .pipeline import PipelineParams
from .synth import KINDS

INPUT_KINDS = ("records", "tokens", "synth")


class ConfigError(ValueError):
    pass


# key -> type; the bundled defaults file must define every key
SCHEMA: dict[str, type] = {
    "run.id": str,
    "run.seed": int,
    "run.workers": int,
    "run.deterministic": bool,
    "paths.input": str,
    "paths.output": str,
    "paths.stopwords": str,
    "paths.lemmas": str,
    "paths.concepts": str,
    "input.kind": str,
    "input.id_field": str,
    "input.body_field": str,
    "input.timestamp_field": str,
    "corpus.periods": list,
    "concepts.list": list,
    "phrases.enabled": bool,
    "phrases.z": float,
    "phrases.min_count": int,
    "phrases.max_rounds": int,
    "embedding.dim": int,
    "embedding.window": int,
    "embedding.min_count": int,
    "embedding.negatives": int,
    "embedding.epochs": int,
    "embedding.learning_rate": float,
    "embedding.sample": float,
    "clustering.sample": int,
    "clustering.min_cluster_size": int,
    "clustering.min_samples": int,
    "clustering.refine_min_cluster_size": int,
    "clustering.refine_min_samples": int,
    "clustering.refine_sample": int,
    "clustering.stability_runs": int,
    "metrics.bins": int,
    "metrics.min_terms": int,
    "metrics.n_baseline": int,
    "patterns.high": float,
    "patterns.low": float,
    "patterns.lo_low": float,
    "annotate.n_pairs": int,
    "synth.kinds": list,
    "synth.docs": int,
    "synth.vocab": int,
}

_LINE = re.compile(r"^\s*([A-Za-z_][\w.]*)\s*=\s*(.*?)\s*$")
_PERIOD = re.compile(r"^(\w+):(\d+)(-|\.\.)(\d+)$")


def parse_value(key: str, raw: str) -> Any:
    kind = SCHEMA.get(key)
    if kind is None:
        raise ConfigError(f"unknown configuration key {key!r}")
    raw = raw.strip()
    try:
        if kind is bool:
            if raw.lower() not in ("true", "false"):
                raise ValueError(raw)
            return raw.lower() == "true"
        if kind is list:
            return [part.strip() for part in raw.split(",") if part.strip()]
        return kind(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot read {raw!r} as {kind.__name__}") from None


def parse_text(text: str, origin: str = "<config>") -> dict[str, Any]:
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0]
        if not line.strip():
            continue
        m = _LINE.match(line)
        if not m:
            raise ConfigError(f"{origin}:{n}: expected 'key = value', got {line.strip()!r}")
        out[m.group(1)] = parse_value(m.group(1), m.group(2))
    return out


def default_values() -> dict[str, Any]:
    text = resources.files("semshift.data").joinpath("defaults.conf").read_text("utf-8")
    values = parse_text(text, "defaults.conf")
    missing = set(SCHEMA) - set(values)
    if missing:
        raise ConfigError(f"bundled defaults lack {sorted(missing)}")
    return values


def parse_period(spec: str) -> TimePeriod:
    """``T1:2012-2014`` covers whole calendar years; ``T1:0..1000`` is epoch seconds, end-exclusive."""
    m = _PERIOD.match(spec.replace(" ", ""))
    if not m:
        raise ConfigError(f"cannot parse period {spec!r}; use LABEL:YYYY-YYYY or LABEL:START..END")
    label, a, sep, b = m.groups()
    try:
        if sep == "-":
            return TimePeriod.from_years(label, int(a), int(b))
        return TimePeriod(label, float(a), float(b))
    except PeriodConfigError as exc:
        raise ConfigError(str(exc)) from None


@dataclass(frozen=True)
class RunConfig:
    values: Mapping[str, Any]
    base_dir: Path
    periods: tuple[TimePeriod, ...]
    concepts: tuple[str, ...]

    def __getitem__(self, key: str) -> Any:
        return self.values[key]

    @property
    def run_dir(self) -> Path:
        return self.path("paths.output") / self["run.id"]

    def path(self, key: str) -> Path:
        p = Path(self[key])
        return p if p.is_absolute() else self.base_dir / p

    def optional_path(self, key: str) -> Path | None:
        return self.path(key) if self[key] else None

    @property
    def labels(self) -> list[str]:
        return [p.label for p in self.periods]

    @property
    def workers(self) -> int:
        return 1 if self["run.deterministic"] else self["run.workers"]

    def hyperparams(self) -> Hyperparams:
        v = self.values
        return Hyperparams(
            dim=v["embedding.dim"],
            window=v["embedding.window"],
            min_count=v["embedding.min_count"],
            negatives=v["embedding.negatives"],
            epochs=v["embedding.epochs"],
            learning_rate=v["embedding.learning_rate"],
            seed=v["run.seed"],
            sample=v["embedding.sample"],
            workers=self.workers,
        )

    def pipeline_params(self) -> PipelineParams:
        v = self.values
        return PipelineParams(
            phrases=v["phrases.enabled"],
            z_threshold=v["phrases.z"],
            min_pair_count=v["phrases.min_count"],
            max_rounds=v["phrases.max_rounds"],
            embedding=self.hyperparams(),
            coarse_sample=v["clustering.sample"],
            coarse_min_cluster_size=v["clustering.min_cluster_size"],
            coarse_min_samples=v["clustering.min_samples"],
            refine=RefineParams(
                v["clustering.refine_min_cluster_size"],
                v["clustering.refine_min_samples"],
                v["clustering.refine_sample"] or None,
            ),
            bins=v["metrics.bins"],
            min_terms=v["metrics.min_terms"],
            n_baseline=v["metrics.n_baseline"],
            thresholds=Thresholds(v["patterns.high"], v["patterns.low"], v["patterns.lo_low"]),
            seed=v["run.seed"],
        )

    def schema(self) -> dict[str, str]:
        return {
            "id": self["input.id_field"],
            "body": self["input.body_field"],
            "timestamp": self["input.timestamp_field"],
        }


def _read_concepts(path: Path | None) -> list[str]:
    if path is None:
        text = resources.files("semshift.data").joinpath("concepts.txt").read_text("utf-8")
    else:
        try:
            text = path.read_text("utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read concept list {path}: {exc}") from None
    return [line.strip() for line in text.splitlines() if line.strip() and not line.startswith("#")]


def load_config(path: str | Path | None = None, overrides: Mapping[str, str] | None = None) -> RunConfig:
    """Defaults, then the file at ``path``, then string ``overrides``; validated in full."""
    values = default_values()
    base_dir = Path.cwd()
    if path is not None:
        path = Path(path)
        try:
            text = path.read_text("utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read configuration {path}: {exc}") from None
        values.update(parse_text(text, str(path)))
        base_dir = path.resolve().parent
    for key, raw in (overrides or {}).items():
        values[key] = parse_value(key, raw)
    return validate(values, base_dir)


def validate(values: Mapping[str, Any], base_dir: Path) -> RunConfig:
    v = dict(values)
    if not re.fullmatch(r"[\w.-]+", v["run.id"]) or v["run.id"] in (".", ".."):
        raise ConfigError(f"run.id {v['run.id']!r} must be a plain file name")
    if v["input.kind"] not in INPUT_KINDS:
        raise ConfigError(f"input.kind must be one of {INPUT_KINDS}, got {v['input.kind']!r}")
    if v["input.kind"] != "synth" and not v["paths.input"]:
        raise ConfigError("paths.input is required unless input.kind = synth")
    if v["run.workers"] < 1:
        raise ConfigError("run.workers must be positive")
    periods = tuple(parse_period(s) for s in v["corpus.periods"])
    if len(periods) < 2:
        raise ConfigError("at least two periods are needed")
    try:
        validate_periods(periods)
    except PeriodConfigError as exc:
        raise ConfigError(str(exc)) from None
    bad = [k for k in v["synth.kinds"] if k not in KINDS]
    if bad:
        raise ConfigError(f"unknown scenario kinds {bad}")
    if v["input.kind"] == "synth" and not v["concepts.list"] and not v["paths.concepts"]:
        concepts = [f"concept_{k}" for k in v["synth.kinds"]]
    elif v["concepts.list"]:
        concepts = list(v["concepts.list"])
    else:
        concepts = _read_concepts(Path(base_dir, v["paths.concepts"]) if v["paths.concepts"] else None)
    if not concepts:
        raise ConfigError("no concepts configured")
    if len(set(concepts)) != len(concepts):
        raise ConfigError("duplicate concepts")
    for key in ("metrics.bins", "metrics.min_terms", "metrics.n_baseline", "annotate.n_pairs", "synth.docs", "synth.vocab"):
        if v[key] < 1:
            raise ConfigError(f"{key} must be positive")
    config = RunConfig(v, base_dir, periods, tuple(concepts))
    try:
        config.pipeline_params()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return config


def render(values: Mapping[str, Any]) -> str:
    """Canonical text form of a configuration (sorted keys)."""
    def show(x):
        if isinstance(x, bool):
            return str(x).lower()
        if isinstance(x, list):
            return ", ".join(x)
        return str(x)

    return "".join(f"{k} = {show(values[k])}\n" for k in sorted(values))
