"""Shared fixtures: a few transforms are expensive enough to build once."""

import numpy as np
import pytest

import gamblets as gb


@pytest.fixture(scope="session")
def hier_1d_q4():
    return gb.build_dyadic(1, 4)


@pytest.fixture(scope="session")
def op_1d_rough_q4(hier_1d_q4):
    return gb.assemble_fem(gb.coeff_1d(), hier_1d_q4)


@pytest.fixture(scope="session")
def sys_1d_rough_q4(op_1d_rough_q4, hier_1d_q4):
    return gb.transform(op_1d_rough_q4, hier_1d_q4)


@pytest.fixture(scope="session")
def hier_1d_q6():
    return gb.build_dyadic(1, 6)


@pytest.fixture(scope="session")
def op_1d_rough_q6(hier_1d_q6):
    return gb.assemble_fem(gb.coeff_1d(), hier_1d_q6)


@pytest.fixture(scope="session")
def sys_1d_rough_q6(op_1d_rough_q6, hier_1d_q6):
    return gb.transform(op_1d_rough_q6, hier_1d_q6)


@pytest.fixture(scope="session")
def hier_2d_q3():
    return gb.build_dyadic(2, 3)


@pytest.fixture(scope="session")
def op_2d_rough_q3(hier_2d_q3):
    return gb.assemble_fem(gb.coeff_2d(), hier_2d_q3)


@pytest.fixture(scope="session")
def sys_2d_rough_q3(op_2d_rough_q3, hier_2d_q3):
    return gb.transform(op_2d_rough_q3, hier_2d_q3)


def random_spd(n: int, seed: int) -> np.ndarray:
    """Well-conditioned random SPD test matrix."""
    rng = np.random.default_rng(seed)
    m = rng.standard_normal((n, n))
    return m @ m.T + n * np.eye(n)
