"""Shared hypothesis strategies: seeded numpy draws keep shrinking cheap."""

import numpy as np
from hypothesis import strategies as st

seeds = st.integers(min_value=0, max_value=2**32 - 1)
small_dims = st.integers(min_value=1, max_value=8)


def complex_matrix(seed: int, rows: int, cols: int) -> np.ndarray:
    r = np.random.default_rng(seed)
    return r.standard_normal((rows, cols)) + 1j * r.standard_normal((rows, cols))


def unit_vector(seed: int, dim: int) -> np.ndarray:
    v = complex_matrix(seed, dim, 1)[:, 0]
    return v / np.linalg.norm(v)
