import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from condyletraj.phantom import PhantomSpec, make_dataset
from condyletraj.pipeline import process_subject

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def ideal_phantom():
    spec = PhantomSpec(subject="ideal")
    ds, truths = make_dataset(spec)
    return spec, ds, truths


@pytest.fixture(scope="session")
def ideal_result(ideal_phantom):
    _, ds, _ = ideal_phantom
    return process_subject(ds)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "REPORT", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
