import warnings

import pytest

from mcharvest import ChannelModel, ChannelParams, GridSpec, fibonacci_layout, single_receptor_layout
from mcharvest.eigen import spectrum_for

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def params():
    return ChannelParams()


@pytest.fixture(scope="session")
def spectrum(params):
    return spectrum_for(params)


@pytest.fixture(scope="session")
def single(params):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        return single_receptor_layout(0.1, params.r_T)


@pytest.fixture(scope="session")
def even11(params):
    return fibonacci_layout(11, 0.1, params.r_T)


@pytest.fixture(scope="session")
def single_model(params, single, spectrum):
    return ChannelModel(params, single, GridSpec(1e-3, 23.0), spectrum)


@pytest.fixture(scope="session")
def even_model(params, even11, spectrum):
    return ChannelModel(params, even11, GridSpec(1e-3, 23.0), spectrum)
