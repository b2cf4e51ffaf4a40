import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from wannierframes.errors import DegenerateLatticeError, GridTooCoarseError
from wannierframes.lattice import KGrid, Lattice, kgrid, reciprocal_basis, square_lattice


def test_square_reciprocal_is_two_pi_identity():
    for dim in (1, 2, 3):
        assert np.allclose(square_lattice(dim).reciprocal, 2 * np.pi * np.eye(dim))


def test_triangular_duality():
    lat = Lattice([[1.0, 0.0], [0.5, np.sqrt(3) / 2]])
    b = reciprocal_basis(lat)
    assert np.allclose(lat.vectors @ b.T, 2 * np.pi * np.eye(2), atol=1e-14)


@pytest.mark.parametrize("vectors", [[[1, 0], [2, 0]], [[0.0]], np.zeros((3, 3))])
def test_degenerate_lattices_rejected(vectors):
    with pytest.raises(DegenerateLatticeError):
        Lattice(vectors)


def test_dimension_four_rejected():
    with pytest.raises(DegenerateLatticeError):
        Lattice(np.eye(4))


def test_grid_needs_two_points():
    with pytest.raises(GridTooCoarseError):
        kgrid(square_lattice(2), (1, 8))


def test_grid_sizes_must_match_dimension():
    with pytest.raises(ValueError):
        KGrid(square_lattice(2), (4, 4, 4))


def test_grid_indices_row_major():
    g = kgrid(square_lattice(2), (3, 4))
    flat = g.flat_indices()
    assert flat.shape == (12, 2)
    assert tuple(flat[5]) == (1, 1)
    assert g.flat_index((1, 1)) == 5
    assert g.flat_index((-1, 4)) == g.flat_index((2, 0))


def test_grid_points_are_fractional_reciprocal_combinations():
    lat = Lattice([[1.0, 0.0], [0.5, np.sqrt(3) / 2]])
    g = kgrid(lat, (6, 4))
    m = np.array([5, 3])
    expected = (m / np.array([6, 4])) @ lat.reciprocal
    assert np.allclose(g.points[5, 3], expected)
    # k . a_j = 2 pi m_j / N_j
    assert np.allclose(lat.vectors @ g.points[5, 3], g.angles[5, 3])


def test_grid_equality_and_hash():
    a = kgrid(square_lattice(2), (4, 4))
    b = kgrid(square_lattice(2), (4, 4))
    assert a == b and hash(a) == hash(b)
    assert a != kgrid(square_lattice(2), (4, 5))


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.floats(-3, 3, allow_nan=False), min_size=9, max_size=9),
)
def test_reciprocal_duality_property(entries):
    vecs = np.array(entries).reshape(3, 3)
    assume(abs(np.linalg.det(vecs)) > 1e-3)
    lat = Lattice(vecs)
    assert np.allclose(lat.vectors @ lat.reciprocal.T, 2 * np.pi * np.eye(3), atol=1e-8)


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.integers(2, 7), min_size=1, max_size=3).flatmap(
        lambda sizes: st.tuples(
            st.just(tuple(sizes)),
            st.tuples(*[st.integers(-20, 20) for _ in sizes]),
            st.tuples(*[st.integers(-20, 20) for _ in sizes]),
            st.tuples(*[st.integers(-20, 20) for _ in sizes]),
        )
    )
)
def test_torus_addition_is_an_abelian_group(data):
    sizes, a, b, c = data
    g = kgrid(square_lattice(len(sizes)), sizes)
    assert g.add(a, b) == g.add(b, a)
    assert g.add(g.add(a, b), c) == g.add(a, g.add(b, c))
    zero = (0,) * len(sizes)
    neg = tuple(-x for x in a)
    assert g.add(a, neg) == zero
    assert all(0 <= x < n for x, n in zip(g.add(a, b), sizes))
