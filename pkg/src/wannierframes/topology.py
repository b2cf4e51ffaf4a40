"""First Chern numbers of projector fields and complementary line bundles.

Sign convention
---------------
For the coordinate plane ``(i, j)`` with ``i < j`` the Chern number is

    c_ij = (i / 2 pi) * integral of tr(P [d_i P, d_j P]) dk_i dk_j,

the usual first Chern class of the range bundle.  On the grid it is evaluated
with lattice field strengths: each plaquette contributes the argument of
``det`` of the overlap cycle ``k -> k + e_j -> k + e_i + e_j -> k + e_i -> k``.
With this convention the lower band of ``qwz(u)`` has ``c_12 = -1`` for
``0 < u < 2``.  Axes are 0-based in the API; reports label planes ``c12`` etc.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import (
    DegenerateOverlapError,
    GenericityFailure,
    GridTooCoarseError,
    NumericalFailure,
    UnsupportedChernError,
)
from .lattice import KGrid
from .spectral import ProjectorField

__all__ = [
    "ChernReport",
    "LineBundleField",
    "Section",
    "chern_sum",
    "chern_number",
    "chern_report",
    "nonvanishing_section",
    "section_vortices",
    "complementary_line_bundle",
    "plane_label",
]

OVERLAP_TOL = 1e-6
RESIDUAL_TOL = 0.01
MIN_PLANE_SIZE = 6
MAX_ABS_CHERN = 4


def plane_label(plane) -> str:
    i, j = plane
    return f"c{i + 1}{j + 1}"


def _dagger(x):
    return np.swapaxes(x.conj(), -1, -2)


def _links(frames: np.ndarray, axis: int) -> np.ndarray:
    """``det(V(k)^dagger V(k + e_axis))`` on the whole grid (periodic)."""
    nxt = np.roll(frames, -1, axis=axis)
    return np.linalg.det(_dagger(frames) @ nxt)


def _plaquette_cycles(frames: np.ndarray, i: int, j: int):
    li = _links(frames, i)
    lj = _links(frames, j)
    cycle = lj * np.roll(li, -1, axis=j) * np.roll(lj, -1, axis=i).conj() * li.conj()
    return cycle, li, lj


def _plane_slice(arr: np.ndarray, plane, dim: int, index) -> np.ndarray:
    """Restrict a full-grid array to the plane through transverse index ``index``."""
    sl = []
    for ax in range(dim):
        sl.append(slice(None) if ax in plane else index)
    return arr[tuple(sl)]


def chern_sum(field: ProjectorField, plane=(0, 1), slice_index: int = 0) -> float:
    """Pre-rounding plaquette sum ``(2 pi)^-1 sum F`` over one coordinate plane."""
    i, j = sorted(plane)
    grid = field.grid
    if i == j or j >= grid.dim:
        raise ValueError(f"invalid plane {plane} for a {grid.dim}-dimensional grid")
    if min(grid.sizes[i], grid.sizes[j]) < MIN_PLANE_SIZE:
        raise GridTooCoarseError(
            f"plane {plane_label((i, j))} needs at least {MIN_PLANE_SIZE} points per direction, "
            f"grid is {grid.sizes}"
        )
    frames = _plane_slice(field.eigenframe(), (i, j), grid.dim, slice_index)
    # after slicing, the plane axes are the first two
    cycle, li, lj = _plaquette_cycles(frames, 0, 1)
    smallest = min(np.abs(li).min(), np.abs(lj).min())
    if smallest < OVERLAP_TOL:
        raise DegenerateOverlapError(
            f"overlap determinant {smallest:.2e} < {OVERLAP_TOL:.0e} in plane {plane_label((i, j))}; "
            "refine the grid"
        )
    # fixed-order reduction keeps the result reproducible
    return float(np.sum(np.angle(cycle).ravel()) / (2 * np.pi))


def chern_number(field: ProjectorField, plane=(0, 1), slice_index: int = 0) -> int:
    total = chern_sum(field, plane, slice_index)
    c = round(total)
    if abs(total - c) > RESIDUAL_TOL:
        raise GridTooCoarseError(
            f"Chern sum {total:.4f} in plane {plane_label(sorted(plane))} is not close to an integer"
        )
    return int(c)


@dataclass(frozen=True)
class ChernReport:
    chern: dict  # (i, j) -> int, 0-based axes with i < j
    residuals: dict  # (i, j) -> |sum - round(sum)|

    @property
    def trivial(self) -> bool:
        return all(c == 0 for c in self.chern.values())

    def negated(self) -> dict:
        return {plane: -c for plane, c in self.chern.items()}

    def labelled(self) -> dict[str, int]:
        return {plane_label(p): c for p, c in self.chern.items()}


def chern_report(field: ProjectorField) -> ChernReport:
    """Chern numbers of every coordinate plane.

    In three dimensions each plane is evaluated on the zero slice of the
    transverse index and, as a consistency check, on the middle slice.
    """
    dim = field.grid.dim
    if dim > 3:
        raise ValueError("Chern reports are only defined for dimension <= 3")
    chern, residuals = {}, {}
    for plane in itertools.combinations(range(dim), 2):
        total = chern_sum(field, plane, 0)
        c = round(total)
        residual = abs(total - c)
        if residual > RESIDUAL_TOL:
            raise GridTooCoarseError(
                f"Chern sum {total:.4f} in plane {plane_label(plane)} is not close to an integer"
            )
        if dim == 3:
            (t,) = set(range(3)) - set(plane)
            mid = field.grid.sizes[t] // 2
            other = chern_number(field, plane, mid)
            if other != c:
                raise NumericalFailure(
                    f"{plane_label(plane)} differs between slices 0 and {mid}: {c} vs {other}"
                )
        chern[plane] = int(c)
        residuals[plane] = residual
    return ChernReport(chern, residuals)


# ------------------------------------------------------------ sections


@dataclass(frozen=True, eq=False)
class Section:
    values: np.ndarray  # (*shape, n)
    vector: np.ndarray
    min_norm: float
    mean_norm: float
    attempts: int


def section_vortices(field: ProjectorField, values: np.ndarray) -> int:
    """Number of plaquettes around which a section of a line bundle winds.

    For each plaquette the wrapped edge phases of ``<s(k), s(k')>`` are summed
    and the bundle's own flux through the plaquette is subtracted; the integer
    left over is the winding of the section, nonzero only where it vanishes.
    """
    if field.rank != 1:
        raise ValueError("vortex counting needs a rank-1 field")
    dim = field.grid.dim
    frames = field.eigenframe()
    s = values[..., None]
    count = 0
    for i, j in itertools.combinations(range(dim), 2):
        cycle, _, _ = _plaquette_cycles(frames, i, j)
        _, ei, ej = _plaquette_cycles(s, i, j)
        pi_, pj_ = np.angle(ei), np.angle(ej)
        edge_sum = pj_ + np.roll(pi_, -1, axis=j) - np.roll(pj_, -1, axis=i) - pi_
        winding = np.rint((edge_sum - np.angle(cycle)) / (2 * np.pi)).astype(int)
        count += int(np.count_nonzero(winding))
    return count


def _random_unit(rng, n):
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    return v / np.linalg.norm(v)


def nonvanishing_section(
    field: ProjectorField,
    seed=None,
    max_retries: int = 20,
    nu_rel: float = 1e-3,
    vector: np.ndarray | None = None,
) -> Section:
    """Find a constant vector ``v`` whose projection ``P(k) v`` never vanishes.

    A draw is accepted when ``min_k |P(k) v| > nu_rel * mean_k |P(k) v|``.  For
    line bundles the sampled minimum can miss a zero between grid points, so
    rank-1 draws must additionally be free of vortices.

    Raises GenericityFailure (carrying the per-draw minimum norms) when every
    draw fails.
    """
    rng = np.random.default_rng(seed)
    n = field.fiber_dim
    profile = []
    for attempt in range(1, max_retries + 1):
        v = _random_unit(rng, n) if vector is None or attempt > 1 else np.asarray(vector, complex)
        s = field.data @ v
        norms = np.linalg.norm(s, axis=-1)
        lo, mean = float(norms.min()), float(norms.mean())
        profile.append(lo)
        if lo <= nu_rel * mean:
            continue
        if field.rank == 1 and field.grid.dim >= 2 and section_vortices(field, s):
            continue
        return Section(s, v, lo, mean, attempt)
    raise GenericityFailure(
        f"no nonvanishing section after {max_retries} draws "
        f"(smallest minimum norm {min(profile):.3e})",
        profile,
    )


# ------------------------------------------------- complementary line bundle


@dataclass(frozen=True, eq=False)
class LineBundleField(ProjectorField):
    target: dict = dc_field(default_factory=dict)


def _qwz_lower_frame(theta_a, theta_b, conjugate):
    """Lower-band eigenvector of qwz(1) in the phases of one coordinate plane."""
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    sy = np.array([[0, -1j], [1j, 0]], dtype=complex)
    sz = np.array([[1, 0], [0, -1]], dtype=complex)
    h = (
        np.sin(theta_a)[..., None, None] * sx
        + np.sin(theta_b)[..., None, None] * sy
        + (1 + np.cos(theta_a) + np.cos(theta_b))[..., None, None] * sz
    )
    vec = np.linalg.eigh(h)[1][..., 0]
    return vec.conj() if conjugate else vec


def complementary_line_bundle(grid: KGrid, target: dict) -> LineBundleField:
    """Line bundle with prescribed Chern numbers, built from Kronecker powers.

    Each plane with a nonzero target contributes ``|c|`` copies of the qwz(1)
    lower-band bundle pulled back to that plane (complex conjugated when the
    target is positive).  Chern numbers add under tensor products, which is
    checked on the result rather than assumed.
    """
    if grid.dim > 3:
        raise ValueError("complementary bundles are only built for dimension <= 3")
    target = {tuple(sorted(p)): int(c) for p, c in target.items()}
    for plane, c in target.items():
        if len(plane) != 2 or plane[1] >= grid.dim or plane[0] == plane[1]:
            raise ValueError(f"invalid plane {plane}")
        if abs(c) > MAX_ABS_CHERN:
            raise UnsupportedChernError(
                f"|{plane_label(plane)}| = {abs(c)} exceeds the supported maximum {MAX_ABS_CHERN}"
            )
    vec = np.ones(grid.shape + (1,), dtype=complex)
    angles = grid.angles
    for plane in sorted(target):
        c = target[plane]
        if c == 0:
            continue
        factor = _qwz_lower_frame(angles[..., plane[0]], angles[..., plane[1]], conjugate=c > 0)
        for _ in range(abs(c)):
            vec = (vec[..., :, None] * factor[..., None, :]).reshape(grid.shape + (-1,))
    frame = vec[..., None]
    data = frame @ _dagger(frame)
    bundle = LineBundleField(grid, data, 1, frame, target)
    for plane in itertools.combinations(range(grid.dim), 2):
        want = target.get(plane, 0)
        got = chern_number(bundle, plane)
        if got != want:
            raise NumericalFailure(
                f"complementary bundle has {plane_label(plane)} = {got}, expected {want}"
            )
    return bundle
