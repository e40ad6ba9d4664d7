import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from semshift.clustering import make_object  # noqa: E402
from semshift.embedding import EmbeddingSpace  # noqa: E402


def space_from(vectors: dict, period: str = "T1", freqs: dict | None = None) -> EmbeddingSpace:
    """Space over the given term vectors; frequency defaults to descending insertion order."""
    terms = list(vectors)
    f = [freqs[t] if freqs else len(terms) - i for i, t in enumerate(terms)]
    order = sorted(range(len(terms)), key=lambda i: (-f[i], terms[i]))
    return EmbeddingSpace(
        period,
        [terms[i] for i in order],
        np.array([f[i] for i in order]),
        np.array([np.asarray(vectors[terms[i]], dtype=np.float64) for i in order]),
    )


def obj(space, concept, members):
    return make_object(space, concept, members)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance reporting ----------------------------------------------------

_CRITERIA: dict[int, tuple[str, list[str]]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by a test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (report.when != "call" and report.passed):
        return
    number, title = mark.args
    _, outcomes = _CRITERIA.setdefault(number, (title, []))
    outcomes.append(report.outcome if report.when == "call" else "failed")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, outcomes = _CRITERIA[number]
        verdict = "PASS" if outcomes and all(o == "passed" for o in outcomes) else "FAIL"
        terminalreporter.write_line(f"criterion {number:2d} {verdict}  {title}")
