"""Random CIP instances shared by the test modules."""

from __future__ import annotations

import numpy as np
from hypothesis import strategies as st

from cipshare.core import Instance


def random_instance(rng: np.random.Generator, n: int, m: int, integer: bool = False,
                    density: float = 0.7) -> Instance:
    """Feasible by construction: every requirement is a fraction of the user's total coverage."""
    if integer:
        a = rng.integers(0, 6, (n, m)).astype(float)
        c = rng.integers(1, 10, n).astype(float)
    else:
        a = rng.uniform(0, 1, (n, m)) * (rng.uniform(size=(n, m)) < density)
        c = rng.uniform(0.05, 1, n)
    a[0, a.sum(axis=0) == 0] = 1.0
    r = a.sum(axis=0) * rng.uniform(0.2, 0.9, m)
    if integer:
        r = np.maximum(np.floor(r), 1.0)
    return Instance(c, r, a)


@st.composite
def instances(draw, max_n: int = 6, max_m: int = 3, integer: bool = False):
    n = draw(st.integers(1, max_n))
    m = draw(st.integers(1, max_m))
    seed = draw(st.integers(0, 2**32 - 1))
    return random_instance(np.random.default_rng(seed), n, m, integer=integer)
