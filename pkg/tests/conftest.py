"""Shared fixtures: the large patches are expensive enough to build once."""

import numpy as np
import pytest

from quasidiff import (
    Box,
    dual_peaks,
    model_set,
    named_substitution,
    preset_scheme,
    substitution_fixed_point,
)

TAU = (1.0 + np.sqrt(5.0)) / 2.0

# physical lengths chosen so the golden-chain patches hold ~1e5 / ~1e4 points
L_BIG = 138197.0
L_MID = 13820.0


@pytest.fixture(scope="session")
def fib_scheme():
    return preset_scheme("fibonacci")


@pytest.fixture(scope="session")
def fib_patch_big(fib_scheme):
    return model_set(fib_scheme, Box([0.0], [L_BIG]))


@pytest.fixture(scope="session")
def fib_patch_mid(fib_scheme):
    return model_set(fib_scheme, Box([0.0], [L_MID]))


@pytest.fixture(scope="session")
def fib_peaks(fib_scheme):
    # every Bragg candidate with intensity >= 1e-3 and frequency in [0, 3]
    return dual_peaks(fib_scheme, Box([0.0], [3.0 + 1e-9]), 1e-3)


@pytest.fixture(scope="session")
def fib_word():
    # 1e5 letters plus slack for offset windows
    return substitution_fixed_point(named_substitution("fibonacci"), 100100)
