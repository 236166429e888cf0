# --------------------------------------------------------------------------------------
# Copyright (c) 2026, L0bse contributors, see git history for details
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# --------------------------------------------------------------------------------------
import numpy as np
import pytest
from hypothesis import settings

from l0bse.probspace import FilteredSpace, build_space

settings.register_profile("l0bse", max_examples=30, deadline=None)
settings.load_profile("l0bse")


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20260417)


@pytest.fixture
def binomial() -> FilteredSpace:
    """Three step binomial tree with a trivial F_0, 8 atoms."""
    return build_space([2, 2, 2])


@pytest.fixture
def two_blocks() -> FilteredSpace:
    """Three step binomial tree behind two initial scenarios, 16 atoms."""
    return build_space([2, 2, 2], base_branching=2)


@pytest.fixture
def uneven() -> FilteredSpace:
    """Two step tree with uneven edge probabilities and two initial scenarios."""
    return build_space(
        [2, 3],
        [[0.3, 0.7], [0.2, 0.5, 0.3]],
        base_branching=2,
        base_probabilities=[0.4, 0.6],
    )


@pytest.fixture
def marked() -> FilteredSpace:
    """Two step tree with one jump mark and one excess branch per node."""
    return build_space([4, 4], marks=1, base_branching=2)
