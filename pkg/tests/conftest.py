from pathlib import Path

import numpy as np
import pytest

import umfield as um

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures"
T2_PATH = FIXTURES / "T2.json"


@pytest.fixture(scope="session")
def t2():
    return um.load_tree(T2_PATH)


@pytest.fixture(scope="session")
def t2_ids(t2):
    return {name: t2.name_to_id[name] for name in ("R", "A", "B", "a1", "a2", "b1", "b2")}


@pytest.fixture(scope="session")
def t2_basis(t2):
    return um.build_basis(t2)


@pytest.fixture(scope="session")
def t2_symbol(t2):
    return um.symbol_from_tree(t2)


@pytest.fixture(scope="session")
def t2_spectrum(t2, t2_symbol):
    return um.spectrum(t2, t2_symbol)


def leaf_vec(t, **named_values):
    """Leaf-order vector with the given values at the named leaves."""
    v = np.zeros(t.n_leaves)
    pos = {t.names[l]: i for i, l in enumerate(t.leaf_order)}
    for name, val in named_values.items():
        v[pos[name]] = val
    return v


def dense_row(basis, w):
    """Dense leaf vector of a single wavelet (via evaluate, the slow path)."""
    t = basis.tree
    return np.array([um.evaluate(basis, w, x) for x in t.leaf_order])


def random_trees(seeds, max_depth=4, max_branching=3):
    for seed in seeds:
        yield um.generate_random(seed, max_depth, max_branching)
