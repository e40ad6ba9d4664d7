"""Rule table mapping four metric z-scores to an evolutionary pattern.

Rules are tried in a fixed order and the first one whose antecedent holds
wins. All comparisons are strict, so a z-score exactly at a threshold is
neither high nor low.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from ._io import atomic_write_text, tsv
from .metrics import EvolutionReport

log = logging.getLogger(__name__)


class PatternLabel(str, enum.Enum):
    STABILITY = "Stability"
    NARROWING = "Narrowing"
    REPLACEMENT = "Replacement"
    FRAGMENTATION = "Fragmentation"
    DEFRAGMENTATION = "Defragmentation"
    LEXICAL_REPLACEMENT = "LexicalReplacement"
    UNCLASSIFIED = "Unclassified"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Thresholds:
    high: float = 1.0
    low: float = 1.0
    lo_low: float = -1.0

    def __post_init__(self):
        if not self.high > 0:
            raise ValueError("high threshold must be positive")
        if not self.lo_low < 0:
            raise ValueError("lo_low threshold must be negative")


def match_rule(had_z: float, csd_z: float, ncd_z: float, lo_z: float, th: Thresholds = Thresholds()) -> tuple[PatternLabel, int]:
    """Label and 1-based index of the rule that fired (7 means no rule matched)."""
    zs = (had_z, csd_z, ncd_z, lo_z)
    if any(not math.isfinite(z) for z in zs):
        log.info("non-finite z-score in %s; unclassified", zs)
        return PatternLabel.UNCLASSIFIED, 7
    had_hi, csd_hi = had_z > th.high, csd_z > th.high
    had_lo, csd_lo = had_z < th.low, csd_z < th.low
    ncd_flat = abs(ncd_z) < th.low
    if had_hi and csd_hi:
        return PatternLabel.REPLACEMENT, 1
    if had_hi and csd_lo and ncd_flat:
        return PatternLabel.NARROWING, 2
    if ncd_z > th.high and had_lo and csd_lo:
        return PatternLabel.FRAGMENTATION, 3
    if ncd_z < -th.high and had_lo and csd_lo:
        return PatternLabel.DEFRAGMENTATION, 4
    if had_lo and csd_lo and ncd_flat:
        if lo_z <= th.lo_low:
            return PatternLabel.LEXICAL_REPLACEMENT, 5
        return PatternLabel.STABILITY, 6
    return PatternLabel.UNCLASSIFIED, 7


def classify(had_z: float, csd_z: float, ncd_z: float, lo_z: float, th: Thresholds = Thresholds()) -> PatternLabel:
    return match_rule(had_z, csd_z, ncd_z, lo_z, th)[0]


def classify_report(report: EvolutionReport, th: Thresholds = Thresholds()) -> EvolutionReport:
    """Fill in the label and rule of a report (unreliable metrics carry NaN z)."""
    label, rule = match_rule(*report.zs(), th)
    report.label, report.rule = label.value, rule
    return report


def classification_path(directory: str | Path, transition: str) -> Path:
    return Path(directory) / f"{transition}.classification.tsv"


def write_classification(reports: Sequence[EvolutionReport], directory: str | Path, transition: str) -> Path:
    header = ["concept", "transition", "had_z", "csd_z", "ncd_z", "lo_z", "label", "rule"]
    rows = [(r.concept, r.transition, *r.zs(), r.label, r.rule) for r in reports]
    path = classification_path(directory, transition)
    atomic_write_text(path, tsv(header, rows))
    return path
