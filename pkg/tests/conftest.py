import os
import sys
import warnings

from hypothesis import HealthCheck, settings
import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_CRITERIA = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")
    config.addinivalue_line("markers", "slow: needs the cached CQGLE simulations")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        detail = getattr(item, "criterion_detail", "")
        _CRITERIA.append((mark.args[0], mark.args[1], rep.outcome, detail))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number, title, outcome, detail in sorted(_CRITERIA, key=lambda c: c[0]):
        verdict = "PASS" if outcome == "passed" else "FAIL"
        line = f"criterion {number:>2} {verdict}: {title}"
        tr.write_line(line + (f" | {detail}" if detail else ""))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ------------------------------------------------------------------ CQGLE fixtures

@pytest.fixture(scope="session")
def cqgle_config():
    from deimga.config import ExperimentConfig
    return ExperimentConfig()


@pytest.fixture(scope="session")
def cqgle_problem(cqgle_config):
    from deimga.experiment import build_problem
    return build_problem(cqgle_config)


@pytest.fixture(scope="session")
def cqgle_evaluator(cqgle_problem, cqgle_config):
    from deimga.experiment import make_evaluator
    return make_evaluator(cqgle_problem, cqgle_config)


@pytest.fixture(scope="session")
def cqgle_starts(cqgle_problem):
    from deimga.experiment import deim_starts
    return deim_starts(cqgle_problem)


@pytest.fixture(scope="session")
def cqgle_brute(cqgle_problem, cqgle_config, cqgle_evaluator):
    from deimga.experiment import run_brute
    return run_brute(cqgle_problem, cqgle_config, cqgle_evaluator)


@pytest.fixture(scope="session")
def cqgle_ga(cqgle_problem, cqgle_config, cqgle_evaluator, cqgle_starts):
    from deimga.experiment import run_ga
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return {name: run_ga(cqgle_problem, cqgle_config, start, cqgle_evaluator)
                for name, start in zip(("DEIM", "DEIM+1"), cqgle_starts)}


@pytest.fixture(scope="session")
def cqgle_scorecard(cqgle_problem, cqgle_config, cqgle_evaluator, cqgle_ga, cqgle_brute):
    from deimga.experiment import compare_strategies
    return compare_strategies(cqgle_problem, cqgle_config, cqgle_ga["DEIM+1"], cqgle_brute,
                              cqgle_evaluator)
