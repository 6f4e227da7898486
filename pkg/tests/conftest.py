import pytest

from spinprep import build_pulse, response_functions


@pytest.fixture(scope="session")
def exp_pulse():
    return response_functions(build_pulse("exponential"))


@pytest.fixture(scope="session")
def spectral_pulse():
    return response_functions(build_pulse("optimal_x_spectral"))


@pytest.fixture(scope="session")
def long10_pulse():
    return response_functions(build_pulse("long_exponential", n_t=10.0))
