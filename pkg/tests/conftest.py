"""Shared fixtures: the seeded synthetic corpus and the acceptance log."""

import time

import pytest

from vinemark import synth

CORPUS_SIZE = 1000

_acceptance_lines = []


def log_acceptance(line: str) -> None:
    _acceptance_lines.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def acceptance_log():
    return log_acceptance


@pytest.fixture(scope="session")
def corpus():
    """Deterministic synthetic scenes (<= 64x64) with perturbed detections.

    Returns (cases, generation_seconds); the timing feeds the oracle
    equivalence budget check.
    """
    start = time.perf_counter()
    cases = [synth.generate_case(seed) for seed in range(CORPUS_SIZE)]
    return cases, time.perf_counter() - start
