from __future__ import annotations

import functools

import pytest

from sturmlab.bands import build_tree
from sturmlab.contfrac import GOLDEN, SILVER, ContinuedFraction
from sturmlab.tracemap import Precision

LAM = "24"
PERIOD_12 = ContinuedFraction.parse("(1,2)")
PERIOD_21 = ContinuedFraction.parse("(2,1)")


@functools.lru_cache(maxsize=None)
def cached_tree(depth: int, lam: str, literal: str, bits: int = 128):
    return build_tree(depth, lam, ContinuedFraction.parse(literal), Precision(bits))


def tree_factory(depth, lam, cf, prec):
    return cached_tree(depth, str(lam), cf.literal(), prec.mantissa_bits)


@pytest.fixture(scope="session")
def golden_tree():
    return cached_tree(8, LAM, GOLDEN.literal())


@pytest.fixture(scope="session")
def silver_tree():
    return cached_tree(6, LAM, SILVER.literal())


@pytest.fixture(scope="session")
def period12_tree():
    return cached_tree(8, LAM, PERIOD_12.literal())


# acceptance criteria report their verdicts here; printed after the run
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
