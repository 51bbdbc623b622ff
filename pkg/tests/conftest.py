import pytest

from rulebench.bench import default_config
from rulebench.survey import default_generator_config, generate_synthetic

_CRITERIA_PREFIX = "tests/test_acceptance.py"


@pytest.fixture(scope="session")
def dataset5():
    """The bundled benchmark dataset: 5 apps x 1000 records, seed 42."""
    return generate_synthetic(default_generator_config(), seed=42)


@pytest.fixture(scope="session")
def bench_config():
    return default_config(seed=42)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion."""
    lines = []
    for outcome in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance" in nodeid and "::test_criterion_" in nodeid:
                name = nodeid.split("::test_criterion_", 1)[1]
                number, _, slug = name.partition("_")
                status = "PASS" if outcome == "passed" else "FAIL"
                lines.append((int(number), f"CRITERION {number} ({slug.replace('_', ' ')}): {status}"))
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
