import numpy as np
import pytest

from eta_stack import config, stack
from eta_stack.ingest import attach_temperature, build_dataset, default_schema, filter_outliers
from eta_stack.synthetic import SyntheticConfig, generate


def make_split(n_trips=5000, seed=0, cfg=None):
    cfg = cfg or config.profile("desk")
    data = generate(SyntheticConfig(n_trips=n_trips, seed=seed))
    trips, _ = attach_temperature(data.trips, data.weather)
    trips, _ = filter_outliers(trips, cfg.outlier_criteria())
    return build_dataset(trips, default_schema(), cfg.split_spec())


@pytest.fixture(scope="session")
def fixture_split():
    """Train/validation/test of the 5000-row synthetic fixture."""
    return make_split()


@pytest.fixture(scope="session")
def desk_ensembles(fixture_split):
    train, val, _ = fixture_split
    cfg = config.profile("desk")
    return stack.train_stacked_ensembles(train, val, cfg.l1_specs(), cfg.l2_specs())


@pytest.fixture(scope="session")
def nn_ensemble(desk_ensembles):
    return next(e for e in desk_ensembles if e.name == "L2-NN")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
