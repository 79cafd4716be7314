import numpy as np
import pytest
from hypothesis import settings, strategies as st

from fullspec.graph import Graph

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


@st.composite
def graphs(draw, n_min=1, n_max=8, labelled=False, k=3):
    n = draw(st.integers(n_min, n_max))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    mask = draw(st.lists(st.booleans(), min_size=len(pairs), max_size=len(pairs)))
    edges = tuple(p for p, keep in zip(pairs, mask) if keep)
    labels = None
    if labelled:
        labels = tuple(draw(st.lists(st.integers(0, k - 1), min_size=n, max_size=n)))
    return Graph(n, edges, labels)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
