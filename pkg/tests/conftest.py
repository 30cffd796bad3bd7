import numpy as np
import pytest

from topospec import graph


@pytest.fixture
def presets():
    return {
        "chain": graph.make_chain(12),
        "star": graph.make_star(4),
        "mesh": graph.make_mesh(4),
    }


def sorted_moduli(M):
    return np.sort(np.abs(np.linalg.eigvals(M)))


def pytest_configure(config):
    config.acceptance_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""

    def record(number, title, checks):
        ok = all(passed for _, passed in checks)
        detail = "; ".join(f"{'ok' if passed else 'FAILED'} {desc}" for desc, passed in checks)
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {title} [{detail}]"
        request.config.acceptance_lines.append(line)
        print(line)
        assert ok, line

    return record
