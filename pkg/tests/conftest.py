import pytest
from hypothesis import settings

from nocqos import preset, run_scenario

settings.register_profile("repo", deadline=None, max_examples=100)
settings.load_profile("repo")

# criterion number -> (passed, detail); filled by the acceptance tests
ACCEPTANCE_RESULTS = {}


@pytest.fixture(scope="session")
def preset_report():
    """Full-length preset runs, computed once per session and shared."""
    cache = {}

    def get(name, **overrides):
        key = (name, tuple(sorted(overrides.items())))
        if key not in cache:
            cache[key] = run_scenario(preset(name, **overrides))
        return cache[key]

    return get


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
