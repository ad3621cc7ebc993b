from dataclasses import replace

import numpy as np
import pytest

from stablehinf.factorization import BlaschkeProduct, factorize
from stablehinf.np_design import build_data
from stablehinf.quasipoly import QuasiPoly
from stablehinf.rational import RationalFn

# the two-zero pair quoted for the example plant, to printed precision
PUBLISHED_PAIR = 0.3125 + 0.8548j


def example_R():
    return QuasiPoly([(RationalFn.const(1.0), 0), (RationalFn.from_coeffs([4.0], [1.0, 1.0]), 3)])


def example_T():
    return QuasiPoly([(RationalFn.const(1.0), 0), (RationalFn.from_coeffs([2.0, -2.0], [1.0, 1.0]), 2)])


def example_W():
    return RationalFn.from_coeffs([0.1, 1.0], [1.0, 1.0])


@pytest.fixture(scope="session")
def R():
    return example_R()


@pytest.fixture(scope="session")
def T():
    return example_T()


@pytest.fixture(scope="session")
def W():
    return example_W()


@pytest.fixture(scope="session")
def factors(R, T):
    return factorize(R, T)


@pytest.fixture(scope="session")
def pair_factors(factors):
    """Factorization restricted to the dominant zero pair near 0.3125 +- 0.8548j."""
    pair = tuple(z for z in factors.m_n.zeros if abs(z.real - PUBLISHED_PAIR.real) < 1e-3)
    return replace(factors, m_n=BlaschkeProduct(pair))


@pytest.fixture(scope="session")
def data(factors, W):
    return build_data(factors, W)


@pytest.fixture(scope="session")
def pair_data(pair_factors, W):
    return build_data(pair_factors, W)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_acceptance_lines = []


def record_acceptance(line: str):
    _acceptance_lines.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
