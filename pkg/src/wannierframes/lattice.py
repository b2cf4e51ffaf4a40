"""Real and reciprocal lattices and uniform Gamma-centred k-grids.

Lattice vectors are stored as the *rows* of ``vectors``; ``a_j = vectors[j]``.
Reciprocal vectors follow the same convention with ``b_i . a_j = 2 pi delta_ij``.

A :class:`KGrid` indexes the discrete Brillouin torus by integer tuples
``m = (m_1, ..., m_dim)`` with ``0 <= m_j < N_j``; the quasi-momentum is
``k(m) = sum_j (m_j / N_j) b_j``.  Integer indices are authoritative, the
Cartesian points are derived from them.  Fields living on a grid are stored as
arrays whose leading axes have shape ``grid.shape``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import DegenerateLatticeError, GridTooCoarseError

__all__ = ["Lattice", "KGrid", "reciprocal_basis", "kgrid", "square_lattice"]

_DET_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Lattice:
    """Bravais lattice spanned by ``dim`` basis vectors (rows of ``vectors``)."""

    vectors: np.ndarray

    def __post_init__(self):
        vecs = np.array(self.vectors, dtype=float)
        if vecs.ndim == 1:
            vecs = vecs.reshape(1, 1) if vecs.size == 1 else vecs[None, :]
        if vecs.ndim != 2 or vecs.shape[0] != vecs.shape[1]:
            raise DegenerateLatticeError(
                f"need dim basis vectors of length dim, got shape {vecs.shape}"
            )
        if vecs.shape[0] not in (1, 2, 3):
            raise DegenerateLatticeError(f"dimension must be 1, 2 or 3, got {vecs.shape[0]}")
        det = np.linalg.det(vecs)
        if abs(det) <= _DET_TOL:
            raise DegenerateLatticeError(f"basis is singular (|det| = {abs(det):.3e})")
        vecs.setflags(write=False)
        object.__setattr__(self, "vectors", vecs)

    @property
    def dim(self) -> int:
        return self.vectors.shape[0]

    @cached_property
    def reciprocal(self) -> np.ndarray:
        """Reciprocal basis, one vector per row."""
        b = 2 * np.pi * np.linalg.inv(self.vectors).T
        b.setflags(write=False)
        return b

    def reciprocal_lattice(self) -> "Lattice":
        return Lattice(self.reciprocal)

    def cartesian(self, coords) -> np.ndarray:
        """Integer (or fractional) lattice coordinates to Cartesian positions."""
        return np.asarray(coords, dtype=float) @ self.vectors

    def __eq__(self, other):
        return isinstance(other, Lattice) and np.array_equal(self.vectors, other.vectors)

    def __hash__(self):
        return hash(self.vectors.tobytes())

    def __repr__(self):
        return f"Lattice({self.vectors.tolist()})"


def square_lattice(dim: int) -> Lattice:
    """The integer lattice Z^dim."""
    return Lattice(np.eye(dim))


def reciprocal_basis(lattice: Lattice) -> np.ndarray:
    return lattice.reciprocal


@dataclass(frozen=True, eq=False)
class KGrid:
    """Uniform Gamma-centred discretisation of the Brillouin torus."""

    lattice: Lattice
    sizes: tuple[int, ...] = field()

    def __post_init__(self):
        sizes = tuple(int(n) for n in np.atleast_1d(self.sizes))
        if len(sizes) != self.lattice.dim:
            raise ValueError(
                f"grid has {len(sizes)} sizes but the lattice is {self.lattice.dim}-dimensional"
            )
        if any(n < 2 for n in sizes):
            raise GridTooCoarseError(f"every grid size must be at least 2, got {sizes}")
        object.__setattr__(self, "sizes", sizes)

    @property
    def dim(self) -> int:
        return len(self.sizes)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.sizes

    @property
    def n_points(self) -> int:
        return int(np.prod(self.sizes))

    def __len__(self):
        return self.n_points

    @cached_property
    def indices(self) -> np.ndarray:
        """Integer indices, shape ``(*sizes, dim)``; flattening is row-major."""
        grids = np.meshgrid(*[np.arange(n) for n in self.sizes], indexing="ij")
        idx = np.stack(grids, axis=-1)
        idx.setflags(write=False)
        return idx

    @cached_property
    def fractional(self) -> np.ndarray:
        """Reduced coordinates ``m_j / N_j`` in ``[0, 1)``."""
        frac = self.indices / np.array(self.sizes, dtype=float)
        frac.setflags(write=False)
        return frac

    @property
    def angles(self) -> np.ndarray:
        """Phases ``2 pi m_j / N_j``, i.e. ``k . a_j``."""
        return 2 * np.pi * self.fractional

    @cached_property
    def points(self) -> np.ndarray:
        """Cartesian quasi-momenta, shape ``(*sizes, dim)``."""
        pts = self.fractional @ self.lattice.reciprocal
        pts.setflags(write=False)
        return pts

    def flat_points(self) -> np.ndarray:
        return self.points.reshape(-1, self.dim)

    def flat_indices(self) -> np.ndarray:
        return self.indices.reshape(-1, self.dim)

    @property
    def steps(self) -> np.ndarray:
        """Cartesian length of one grid step along each reciprocal axis."""
        return np.linalg.norm(self.lattice.reciprocal, axis=1) / np.array(self.sizes)

    def flat_index(self, m: Sequence[int]) -> int:
        m = [int(x) % n for x, n in zip(m, self.sizes)]
        return int(np.ravel_multi_index(m, self.sizes))

    def add(self, m: Sequence[int], mp: Sequence[int]) -> tuple[int, ...]:
        """Group operation of the discrete torus."""
        return tuple((a + b) % n for a, b, n in zip(m, mp, self.sizes))

    def same_grid(self, other: "KGrid") -> bool:
        return self.sizes == other.sizes and self.lattice == other.lattice

    def __eq__(self, other):
        return isinstance(other, KGrid) and self.same_grid(other)

    def __hash__(self):
        return hash((self.lattice, self.sizes))

    def __repr__(self):
        return f"KGrid(sizes={self.sizes}, lattice={self.lattice!r})"


def kgrid(lattice: Lattice, sizes) -> KGrid:
    return KGrid(lattice, tuple(np.atleast_1d(sizes)))
