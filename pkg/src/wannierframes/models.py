"""Finite-range hopping models and the built-in gallery.

A model is a finite table ``gamma -> H_gamma`` of ``d x d`` complex matrices
indexed by integer lattice vectors.  The Bloch Hamiltonian is

    H(k) = sum_gamma H_gamma exp(i k . gamma),

with ``(H_gamma)_{ab} = <a, 0 | H | b, gamma>``.  Orbitals carry no intra-cell
positions, so ``H(k)`` is exactly periodic under reciprocal lattice shifts.

Model file grammar (one record per line, ``#`` starts a comment)::

    wannierframes-model 1
    name <word>
    param <key> <float>            (zero or more)
    lattice <float> ... <float>    (dim lines, one basis vector each)
    fiber_dim <int>
    hopping <g_1> ... <g_dim>      (one block per stored lattice vector)
    re <float> ... <float>         (fiber_dim rows of the real part)
    im <float> ... <float>         (fiber_dim rows of the imaginary part)
    end

Floats are written with ``repr`` so a write/read round trip is bit-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

from .errors import ModelFileError, NonHermitianError, UnknownModelError
from .lattice import KGrid, Lattice, square_lattice

__all__ = [
    "BlochModel",
    "bloch_hamiltonian",
    "builtin",
    "gallery",
    "dumps_model",
    "loads_model",
    "read_model",
    "write_model",
    "SIGMA_0",
    "SIGMA_X",
    "SIGMA_Y",
    "SIGMA_Z",
]

SIGMA_0 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)

_HERM_TOL = 1e-14


def _key(gamma, dim):
    key = tuple(int(g) for g in np.atleast_1d(gamma))
    if len(key) != dim:
        raise ValueError(f"lattice vector {key} does not have {dim} components")
    return key


@dataclass(frozen=True, eq=False)
class BlochModel:
    """Hermitian hopping model on a lattice.

    ``hoppings`` may be one-sided; the missing partners ``H_{-gamma} = H_gamma^dagger``
    are filled in at construction and any supplied pair is checked for consistency.
    """

    lattice: Lattice
    fiber_dim: int
    hoppings: Mapping[tuple[int, ...], np.ndarray]
    name: str = "custom"
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        d = int(self.fiber_dim)
        dim = self.lattice.dim
        table: dict[tuple[int, ...], np.ndarray] = {}
        for gamma, mat in self.hoppings.items():
            key = _key(gamma, dim)
            mat = np.array(mat, dtype=complex)
            if mat.shape != (d, d):
                raise ValueError(f"hopping {key} has shape {mat.shape}, expected {(d, d)}")
            if key in table:
                table[key] = table[key] + mat
            else:
                table[key] = mat
        zero = (0,) * dim
        table.setdefault(zero, np.zeros((d, d), dtype=complex))

        closed = dict(table)
        for key, mat in table.items():
            partner = tuple(-g for g in key)
            if partner in table:
                err = np.max(np.abs(table[partner] - mat.conj().T), initial=0.0)
                if err > _HERM_TOL:
                    raise NonHermitianError(
                        f"H{partner} differs from H{key}^dagger by {err:.3e}"
                    )
            else:
                closed[partner] = mat.conj().T.copy()
        for mat in closed.values():
            mat.setflags(write=False)
        object.__setattr__(self, "fiber_dim", d)
        object.__setattr__(self, "hoppings", dict(sorted(closed.items())))
        object.__setattr__(self, "params", dict(self.params))

    @property
    def dim(self) -> int:
        return self.lattice.dim

    @property
    def hopping_range(self) -> int:
        """Largest max-norm of a stored lattice vector."""
        return max(max(abs(g) for g in key) for key in self.hoppings)

    def hamiltonian(self, k) -> np.ndarray:
        """``H(k)`` at one or many Cartesian quasi-momenta (last axis is the dimension)."""
        k = np.asarray(k, dtype=float)
        single = k.ndim == 1
        k = np.atleast_2d(k)
        out = np.zeros(k.shape[:-1] + (self.fiber_dim, self.fiber_dim), dtype=complex)
        for gamma, mat in self.hoppings.items():
            r = self.lattice.cartesian(gamma)
            out += np.exp(1j * (k @ r))[..., None, None] * mat
        return out[0] if single else out

    def hamiltonians(self, grid: KGrid) -> np.ndarray:
        """``H(k)`` on every grid point, shape ``(*grid.shape, d, d)``.

        Phases are computed from integer indices so that the family is exactly
        periodic on the discrete torus.
        """
        if grid.lattice != self.lattice:
            raise ValueError("model and grid live on different lattices")
        idx = grid.indices
        sizes = np.array(grid.sizes)
        out = np.zeros(grid.shape + (self.fiber_dim, self.fiber_dim), dtype=complex)
        for gamma, mat in self.hoppings.items():
            turns = ((idx * np.array(gamma)) % sizes / sizes).sum(axis=-1)
            out += np.exp(2j * np.pi * turns)[..., None, None] * mat
        return out

    def hamiltonian_derivative(self, k, axis: int) -> np.ndarray:
        """Derivative of ``H`` with respect to the reduced phase ``k . a_axis``."""
        k = np.asarray(k, dtype=float)
        out = np.zeros(k.shape[:-1] + (self.fiber_dim, self.fiber_dim), dtype=complex)
        for gamma, mat in self.hoppings.items():
            if gamma[axis] == 0:
                continue
            r = self.lattice.cartesian(gamma)
            out += (1j * gamma[axis]) * np.exp(1j * (k @ r))[..., None, None] * mat
        return out

    def conjugate(self) -> "BlochModel":
        """Entrywise complex conjugate family ``conj(H(-k))`` realised as a model.

        Conjugating every hopping gives ``conj(H(-k))``; its spectral projectors are
        the complex conjugates of the original ones evaluated at ``-k``.
        """
        return BlochModel(
            self.lattice,
            self.fiber_dim,
            {g: m.conj() for g, m in self.hoppings.items()},
            name=f"conj-{self.name}",
            params=self.params,
        )

    def __repr__(self):
        return (
            f"BlochModel(name={self.name!r}, dim={self.dim}, fiber_dim={self.fiber_dim}, "
            f"params={self.params}, n_hoppings={len(self.hoppings)})"
        )


def bloch_hamiltonian(model: BlochModel, k) -> np.ndarray:
    return model.hamiltonian(k)


# --------------------------------------------------------------------- gallery


def _atomic(d: float = 2, dim: float = 2) -> BlochModel:
    d, dim = int(d), int(dim)
    onsite = np.diag(np.arange(d, dtype=float)).astype(complex)
    return BlochModel(square_lattice(dim), d, {(0,) * dim: onsite}, "atomic", {"d": d, "dim": dim})


def _ssh(t1: float = 1.0, t2: float = 0.5) -> BlochModel:
    # H(k) = (t1 + t2 cos k) sx + t2 sin k sy
    hop = np.array([[0, 0], [t2, 0]], dtype=complex)
    return BlochModel(
        square_lattice(1), 2, {(0,): t1 * SIGMA_X, (1,): hop}, "ssh", {"t1": t1, "t2": t2}
    )


def _qwz_hoppings(u, dim=2):
    pad = (0,) * (dim - 2)
    return {
        (0, 0) + pad: u * SIGMA_Z,
        (1, 0) + pad: (SIGMA_Z - 1j * SIGMA_X) / 2,
        (0, 1) + pad: (SIGMA_Z - 1j * SIGMA_Y) / 2,
    }


def _qwz(u: float = 1.0) -> BlochModel:
    # H(k) = sin k1 sx + sin k2 sy + (u + cos k1 + cos k2) sz
    return BlochModel(square_lattice(2), 2, _qwz_hoppings(u), "qwz", {"u": u})


def _qwz_stack_3d(u: float = 1.0, tz: float = 0.1) -> BlochModel:
    # qwz layers coupled along a_3: the mass becomes u + 2 tz cos k3
    hops = _qwz_hoppings(u, dim=3)
    hops[(0, 0, 1)] = tz * SIGMA_Z
    return BlochModel(square_lattice(3), 2, hops, "qwz_stack_3d", {"u": u, "tz": tz})


def _haldane(t1: float = 1.0, t2: float = 0.15, phi: float = math.pi / 2, M: float = 0.0) -> BlochModel:
    """Honeycomb model with complex second-neighbour hopping.

    Sublattice A sits at the cell origin and B at (a1 + a2)/3.  The model is in
    the Chern phase when ``|M| < 3 sqrt(3) |t2 sin phi|``.
    """
    lat = Lattice([[1.0, 0.0], [0.5, math.sqrt(3) / 2]])
    hops: dict[tuple[int, int], np.ndarray] = {}

    def add_pair(g, mat):
        # adds the hop and its Hermitian partner so the table is complete
        for key, term in ((g, mat), (tuple(-x for x in g), mat.conj().T)):
            hops[key] = hops.get(key, np.zeros((2, 2), dtype=complex)) + term

    add_pair((0, 0), np.diag([M, -M]).astype(complex) / 2)
    for g in [(0, 0), (-1, 0), (0, -1)]:
        add_pair(g, t1 * np.array([[0, 1], [0, 0]], dtype=complex))
    # second neighbours at 0, 120, 240 degrees
    for g in [(1, 0), (-1, 1), (0, -1)]:
        add_pair(g, t2 * np.diag([np.exp(1j * phi), np.exp(-1j * phi)]))
    return BlochModel(lat, 2, hops, "haldane", {"t1": t1, "t2": t2, "phi": phi, "M": M})


_GALLERY: dict[str, tuple[Callable[..., BlochModel], dict[str, float], str]] = {
    "atomic": (_atomic, {"d": 2, "dim": 2}, "flat bands 0..d-1 on Z^dim"),
    "ssh": (_ssh, {"t1": 1.0, "t2": 0.5}, "1D dimerised chain"),
    "qwz": (_qwz, {"u": 1.0}, "2D two-band Chern insulator, c12 = -1 for 0 < u < 2"),
    "haldane": (
        _haldane,
        {"t1": 1.0, "t2": 0.15, "phi": math.pi / 2, "M": 0.0},
        "honeycomb Chern insulator",
    ),
    "qwz_stack_3d": (_qwz_stack_3d, {"u": 1.0, "tz": 0.1}, "weakly coupled qwz layers"),
}


def gallery() -> dict[str, tuple[dict[str, float], str]]:
    """Name -> (default parameters, one-line description)."""
    return {name: (dict(defaults), doc) for name, (_, defaults, doc) in _GALLERY.items()}


def builtin(name: str, **params) -> BlochModel:
    if name not in _GALLERY:
        raise UnknownModelError(f"unknown model {name!r}; valid models: {', '.join(_GALLERY)}")
    factory, defaults, _ = _GALLERY[name]
    unknown = set(params) - set(defaults)
    if unknown:
        raise UnknownModelError(
            f"model {name!r} has no parameter(s) {sorted(unknown)}; valid: {sorted(defaults)}"
        )
    return factory(**{**defaults, **params})


# ------------------------------------------------------------------ model files


def dumps_model(model: BlochModel) -> str:
    lines = ["wannierframes-model 1", f"name {model.name}"]
    for key, value in model.params.items():
        lines.append(f"param {key} {float(value)!r}")
    for vec in model.lattice.vectors:
        lines.append("lattice " + " ".join(repr(float(x)) for x in vec))
    lines.append(f"fiber_dim {model.fiber_dim}")
    for gamma, mat in model.hoppings.items():
        lines.append("hopping " + " ".join(str(g) for g in gamma))
        for tag, part in (("re", mat.real), ("im", mat.imag)):
            for row in part + 0.0:  # + 0.0 folds -0.0 into 0.0
                lines.append(f"{tag} " + " ".join(repr(float(x)) for x in row))
    lines.append("end")
    return "\n".join(lines) + "\n"


def loads_model(text: str) -> BlochModel:
    records = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            head, *rest = line.split()
            records.append((lineno, head, rest))
    if not records or records[0][1:] != ("wannierframes-model", ["1"]):
        raise ModelFileError("missing 'wannierframes-model 1' header")

    name, params, basis, fiber_dim = "custom", {}, [], None
    hoppings: dict[tuple[int, ...], np.ndarray] = {}
    current, re_rows, im_rows = None, [], []
    ended = False

    def flush():
        if current is None:
            return
        if fiber_dim is None or len(re_rows) != fiber_dim or len(im_rows) != fiber_dim:
            raise ModelFileError(f"hopping {current}: expected {fiber_dim} re and im rows")
        if current in hoppings:
            raise ModelFileError(f"hopping {current} listed twice")
        hoppings[current] = np.array(re_rows) + 1j * np.array(im_rows)

    try:
        for lineno, head, rest in records[1:]:
            if ended:
                raise ModelFileError(f"line {lineno}: content after 'end'")
            if head == "name":
                name = " ".join(rest)
            elif head == "param":
                params[rest[0]] = float(rest[1])
            elif head == "lattice":
                basis.append([float(x) for x in rest])
            elif head == "fiber_dim":
                fiber_dim = int(rest[0])
            elif head == "hopping":
                flush()
                current, re_rows, im_rows = tuple(int(g) for g in rest), [], []
            elif head in ("re", "im"):
                if current is None:
                    raise ModelFileError(f"line {lineno}: matrix row outside a hopping block")
                row = [float(x) for x in rest]
                if len(row) != fiber_dim:
                    raise ModelFileError(f"line {lineno}: expected {fiber_dim} entries")
                (re_rows if head == "re" else im_rows).append(row)
            elif head == "end":
                flush()
                current, ended = None, True
            else:
                raise ModelFileError(f"line {lineno}: unknown record {head!r}")
    except (ValueError, IndexError) as exc:
        raise ModelFileError(f"malformed model file: {exc}") from exc
    if not ended:
        raise ModelFileError("model file is missing 'end'")
    if fiber_dim is None or not basis:
        raise ModelFileError("model file needs 'lattice' and 'fiber_dim' records")
    return BlochModel(Lattice(basis), fiber_dim, hoppings, name, params)


def read_model(path) -> BlochModel:
    return loads_model(Path(path).read_text())


def write_model(model: BlochModel, path) -> None:
    Path(path).write_text(dumps_model(model))
