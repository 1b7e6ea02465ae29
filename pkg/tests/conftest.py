"""Shared fixtures.

The expensive fixtures (trained detectors) are session-scoped because several
test modules interrogate the same model; retraining per test would push the
suite past any reasonable wall-clock budget. Everything is seeded, so sharing
does not introduce order dependence.
"""

from __future__ import annotations

import time
from types import SimpleNamespace

import numpy as np
import pytest

from dbdiag import (
    TrainConfig,
    default_scenario,
    drift_scenario,
    generate,
    null_scenario,
    train,
)

# One line per acceptance criterion, echoed in the terminal summary so the
# verdicts survive pytest's output capturing.
_acceptance_lines: list[str] = []


@pytest.fixture(scope="session")
def acceptance():
    def record(num: int, name: str, ok: bool, detail: str = ""):
        verdict = "PASS" if ok else "FAIL"
        line = f"ACCEPTANCE {num} {name}: {verdict}"
        if detail:
            line += f" ({detail})"
        _acceptance_lines.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.line(line)


@pytest.fixture(scope="session")
def default_run():
    """Three-injection scenario plus a detector trained on it.

    Timed end to end (generation + training) because the detection criterion
    carries a wall-clock budget.
    """
    t0 = time.perf_counter()
    scenario = generate(default_scenario())
    result = train(scenario.stats,
                   TrainConfig(seed=0, max_epochs=100, patience=15))
    elapsed = time.perf_counter() - t0
    return SimpleNamespace(scenario=scenario, result=result,
                           build_seconds=elapsed)


@pytest.fixture(scope="session")
def drift_runs():
    """Level-drifting scenario trained under three normalization choices."""
    scenario = generate(drift_scenario())
    out = {}
    for tag, arch in (("plain", "(150)-(50)-(150*)"),
                      ("btn", "BTN-(150)-(50)-(150*)-BTN*"),
                      ("bn", "BN-(150)-(50)-(150*)-BN*")):
        out[tag] = train(scenario.stats,
                         TrainConfig(architecture=arch, seed=0,
                                     max_epochs=100, patience=15))
    return SimpleNamespace(scenario=scenario, results=out)


@pytest.fixture(scope="session")
def null_run():
    """Injection-free scenario and a detector trained on it."""
    scenario = generate(null_scenario())
    result = train(scenario.stats,
                   TrainConfig(seed=0, max_epochs=100, patience=15))
    return SimpleNamespace(scenario=scenario, result=result)


@pytest.fixture(scope="session")
def tiny_run():
    """Small, fast scenario + model for plumbing tests (save/load, CLI, report).

    Uses a short duration and a narrow network; nothing here depends on
    detection quality.
    """
    scenario = generate(default_scenario(seed=3, duration_minutes=1200))
    result = train(scenario.stats,
                   TrainConfig(architecture="BTN-(24)-(8)-(24*)-BTN*",
                               seed=0, max_epochs=8, patience=8,
                               batch_size=256))
    return SimpleNamespace(scenario=scenario, result=result)


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
