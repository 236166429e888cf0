# --------------------------------------------------------------------------------------
# Copyright (c) 2026, L0bse contributors, see git history for details
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# --------------------------------------------------------------------------------------
"""Hypothesis strategies drawing finite filtered spaces and L0 values."""

import math

import numpy as np
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from l0bse.probspace import FilteredSpace, L0Value, PartitionLike, build_space

FINITE = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False, allow_infinity=False)


@st.composite
def probability_rows(draw, branching: int) -> list[float]:
    raw = draw(
        st.lists(
            st.floats(min_value=0.1, max_value=1.0), min_size=branching, max_size=branching
        )
    )
    total = math.fsum(raw)
    return [r / total for r in raw]


@st.composite
def spaces(draw, max_atoms: int = 24, max_steps: int = 3) -> FilteredSpace:
    """Trees of at most max_atoms atoms with per node edge probabilities."""
    base = draw(st.integers(1, 3))
    remaining = max_atoms // base
    branching = []
    for _ in range(draw(st.integers(1, max_steps))):
        b = draw(st.integers(1, max(1, min(3, remaining))))
        branching.append(b)
        remaining //= b
    nodes = base
    probabilities = []
    for b in branching:
        probabilities.append([draw(probability_rows(b)) for _ in range(nodes)])
        nodes *= b
    return build_space(
        branching,
        probabilities,
        base_branching=base,
        base_probabilities=draw(probability_rows(base)),
    )


@st.composite
def l0_values(
    draw, space: FilteredSpace, *, meas: PartitionLike | None = None, dim: int = 1
) -> L0Value:
    """Bounded values, measurable w.r.t. meas when given."""
    array = draw(arrays(np.float64, (space.n_atoms, dim), elements=FINITE))
    if meas is not None:
        array = array[space.partition(meas).representatives]
    return L0Value(space, array)
