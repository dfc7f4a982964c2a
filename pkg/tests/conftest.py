import numpy as np
import pytest

from pifslp.ci_model import assemble_instance, generate_scenario
from pifslp.partition import make_partition


def desk_instance(realization=0, gamma_db=10.0, n_tx=16, n_users=12, seed=11):
    sc = generate_scenario(n_tx, n_users, 4, 10 ** (gamma_db / 10), 1.0, seed, realization)
    return assemble_instance(sc)


@pytest.fixture
def desk():
    return desk_instance()


@pytest.fixture
def desk_partition():
    return make_partition(32, 8, "adjacent")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for k in sorted(results):
            terminalreporter.write_line(results[k])
