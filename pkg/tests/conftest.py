import os
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from depconc.model import CoordinateSpace, JointLaw, ProductModel  # noqa: E402

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
KERNEL_M1 = [[0.9, 0.1], [0.2, 0.8]]

# acceptance outcomes, filled by test_acceptance and printed at the end of the run
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def unit_coords(n, m=2):
    return tuple(CoordinateSpace.trivial(m) for _ in range(n))


def make_p1() -> ProductModel:
    return ProductModel(unit_coords(3), JointLaw.product([[0.5, 0.5]] * 3))


def make_m1() -> ProductModel:
    return ProductModel(unit_coords(3), JointLaw.markov([0.5, 0.5], [KERNEL_M1, KERNEL_M1]))


def hamming(model) -> np.ndarray:
    return model.states().sum(axis=1).astype(float)


@pytest.fixture
def p1():
    return make_p1()


@pytest.fixture
def m1():
    return make_m1()


@pytest.fixture
def fixtures_dir():
    return FIXTURES


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
