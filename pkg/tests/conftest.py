import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sparsett.dictionary import DictionaryConfig, TimeGrid, build_gamma_dictionary, build_ml_dictionary
from sparsett.parzen import KernelSpec, build_kernel_matrix

settings.register_profile(
    "default", max_examples=50, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("ci", max_examples=200, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# acceptance tests record (criterion, title, passed, detail); one line per criterion is
# printed at the end of the run, failing if any of its parts failed
ACCEPTANCE_RESULTS: list = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    by_criterion: dict = {}
    for number, title, ok, detail in ACCEPTANCE_RESULTS:
        entry = by_criterion.setdefault(number, [title, True, []])
        entry[1] = entry[1] and ok
        entry[2].append(("" if ok else "FAILED ") + detail)
    for number in sorted(by_criterion):
        title, ok, details = by_criterion[number]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  [{number}] {title}: {'; '.join(details)}")


@pytest.fixture(scope="session")
def record():
    def _record(number, title, ok, detail):
        ACCEPTANCE_RESULTS.append((number, title, bool(ok), detail))
        return bool(ok)

    return _record


@pytest.fixture(scope="session")
def small_grid():
    return TimeGrid(1.0, 160, 60, 1)


@pytest.fixture(scope="session")
def small_ml(small_grid):
    return build_ml_dictionary(small_grid, DictionaryConfig(scales=(1.0, 2.0, 3.0)))


@pytest.fixture(scope="session")
def small_gamma(small_grid):
    return build_gamma_dictionary(small_grid, 1.0)


@pytest.fixture(scope="session")
def small_km(small_grid):
    return build_kernel_matrix(small_grid, KernelSpec(1.5))


@pytest.fixture(scope="session")
def bimodal_samples():
    rng = np.random.default_rng(11)
    return np.concatenate([rng.normal(20, 3, 300), rng.normal(45, 4, 200)])


@pytest.fixture(scope="session")
def full_grid():
    return TimeGrid(1.0, 600, 300, 1)


@pytest.fixture(scope="session")
def ml10(full_grid):
    return build_ml_dictionary(full_grid, DictionaryConfig(scales=tuple(float(s) for s in range(1, 11))))


@pytest.fixture(scope="session")
def ml5(full_grid):
    return build_ml_dictionary(full_grid, DictionaryConfig(scales=(1.0, 2.0, 3.0, 4.0, 5.0)))


@pytest.fixture(scope="session")
def gamma1(full_grid):
    return build_gamma_dictionary(full_grid, 1.0)
