import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def ont():
    from scenec.router import default_ontology

    return default_ontology()


@pytest.fixture
def template(ont):
    from scenec.backend.template import TemplateBackend

    return TemplateBackend(0, ont)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        title, ok, elapsed, detail = results[n]
        terminalreporter.write_line(f"criterion {n:>2} {'PASS' if ok else 'FAIL'} {elapsed:7.2f}s  {title}{detail}")
