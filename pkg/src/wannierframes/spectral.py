"""Band structures, gap checks and spectral projector fields.

The projector field ``P(k)`` onto the bands of an isolated window is the
discrete Bloch bundle.  Two independent constructions are provided: summing
window eigenvectors, and contour integration of the resolvent around the
window (the Riesz projector).
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import ContourPlacementError, GaplessError, NotIsolatedError, NumericalFailure
from .lattice import KGrid
from .models import BlochModel

__all__ = [
    "SpectralWindow",
    "BandStructure",
    "GapReport",
    "ProjectorField",
    "band_structure",
    "gap_check",
    "projector_field",
    "riesz_projectors",
    "bands_table",
    "projector_diagnostics_table",
]

GAP_TOL = 1e-8


@dataclass(frozen=True)
class SpectralWindow:
    """Either a 1-based inclusive band range or a closed energy interval."""

    lo: int | None = None
    hi: int | None = None
    energy: tuple[float, float] | None = None

    def __post_init__(self):
        if self.energy is None:
            if self.lo is None or self.hi is None:
                raise ValueError("give either band indices (lo, hi) or an energy interval")
            if not 1 <= self.lo <= self.hi:
                raise ValueError(f"band range [{self.lo}, {self.hi}] is not a valid 1-based range")
        elif self.energy[0] >= self.energy[1]:
            raise ValueError(f"empty energy interval {self.energy}")

    @classmethod
    def bands(cls, lo: int, hi: int | None = None) -> "SpectralWindow":
        return cls(lo=lo, hi=lo if hi is None else hi)

    @classmethod
    def interval(cls, e_lo: float, e_hi: float) -> "SpectralWindow":
        return cls(energy=(float(e_lo), float(e_hi)))

    def resolve(self, eigenvalues: np.ndarray) -> tuple[int, int]:
        """Band range ``(lo, hi)`` (1-based) selected at every grid point.

        Raises NotIsolatedError if the selection differs between k-points.
        """
        d = eigenvalues.shape[-1]
        if self.energy is None:
            if self.hi > d:
                raise ValueError(f"window [{self.lo}, {self.hi}] exceeds fiber dimension {d}")
            return self.lo, self.hi
        e_lo, e_hi = self.energy
        inside = (eigenvalues >= e_lo) & (eigenvalues <= e_hi)
        counts = inside.sum(axis=-1)
        if counts.min() != counts.max():
            raise NotIsolatedError(
                f"energy window {self.energy} holds between {counts.min()} and {counts.max()} bands"
            )
        if counts.min() == 0:
            raise NotIsolatedError(f"energy window {self.energy} contains no bands")
        first = np.argmax(inside, axis=-1)
        if first.min() != first.max():
            raise NotIsolatedError(f"energy window {self.energy} crosses a band")
        lo = int(first.flat[0]) + 1
        return lo, lo + int(counts.flat[0]) - 1


@dataclass(frozen=True, eq=False)
class BandStructure:
    grid: KGrid
    eigenvalues: np.ndarray  # (*shape, d), ascending
    eigenvectors: np.ndarray | None = None  # (*shape, d, d), columns

    @property
    def n_bands(self) -> int:
        return self.eigenvalues.shape[-1]

    def band(self, j: int) -> np.ndarray:
        """Band function lambda_j on the grid (1-based)."""
        return self.eigenvalues[..., j - 1]


@dataclass(frozen=True)
class GapReport:
    """Direct gaps around a window plus the global gaps used for contour placement."""

    lo: int
    hi: int
    gap_below: float
    gap_above: float
    window_min: float
    window_max: float
    tol: float = GAP_TOL
    gap_below_global: float = np.inf
    gap_above_global: float = np.inf

    @property
    def m(self) -> int:
        return self.hi - self.lo + 1

    @property
    def passed(self) -> bool:
        return self.gap_below > self.tol and self.gap_above > self.tol

    @property
    def mid_below(self) -> float | None:
        if np.isinf(self.gap_below):
            return None
        return self.window_min - self.gap_below_global / 2

    @property
    def mid_above(self) -> float | None:
        if np.isinf(self.gap_above):
            return None
        return self.window_max + self.gap_above_global / 2


def band_structure(model: BlochModel, grid: KGrid, vectors: bool = True) -> BandStructure:
    """Diagonalise ``H(k)`` on every grid point."""
    ham = model.hamiltonians(grid)
    try:
        if vectors:
            vals, vecs = np.linalg.eigh(ham)
        else:
            vals, vecs = np.linalg.eigvalsh(ham), None
    except np.linalg.LinAlgError:
        # locate the first offending point for the error message
        for flat, h in enumerate(ham.reshape(-1, model.fiber_dim, model.fiber_dim)):
            try:
                np.linalg.eigh(h)
            except np.linalg.LinAlgError:
                idx = tuple(int(i) for i in np.unravel_index(flat, grid.shape))
                raise NumericalFailure(f"eigensolver did not converge at k index {idx}") from None
        raise
    return BandStructure(grid, vals, vecs)


def gap_check(bands: BandStructure, window: SpectralWindow, gap_tol: float = GAP_TOL) -> GapReport:
    """Direct gaps separating the window from the bands below and above.

    ``gap_below = min_k (lambda_lo - lambda_{lo-1})`` (infinite when the window
    starts at the bottom band), and similarly above.  Both must exceed
    ``gap_tol``.  The report also records the global (indirect) gaps used to
    place the Riesz contour.
    """
    lam = bands.eigenvalues
    lo, hi = window.resolve(lam)
    d = bands.n_bands
    win = lam[..., lo - 1 : hi]
    below = above = np.inf
    g_below = g_above = np.inf
    if lo > 1:
        below = float(np.min(lam[..., lo - 1] - lam[..., lo - 2]))
        g_below = float(np.min(lam[..., lo - 1]) - np.max(lam[..., lo - 2]))
    if hi < d:
        above = float(np.min(lam[..., hi] - lam[..., hi - 1]))
        g_above = float(np.min(lam[..., hi]) - np.max(lam[..., hi - 1]))
    report = GapReport(
        lo, hi, below, above, float(win.min()), float(win.max()), gap_tol, g_below, g_above
    )
    if not report.passed:
        side = "below" if below <= gap_tol else "above"
        raise GaplessError(
            f"window [{lo}, {hi}] is not separated {side}: "
            f"gap_below={below:.3e}, gap_above={above:.3e} (tol {gap_tol:.1e})"
        )
    return report


@dataclass(frozen=True, eq=False)
class ProjectorField:
    """Rank-``rank`` orthogonal projectors on every grid point.

    ``frame`` optionally stores an orthonormal basis of each range; consumers
    that need one compute it from ``data`` when it is absent.
    """

    grid: KGrid
    data: np.ndarray  # (*shape, n, n)
    rank: int
    frame: np.ndarray | None = None  # (*shape, n, rank)

    @property
    def fiber_dim(self) -> int:
        return self.data.shape[-1]

    def eigenframe(self) -> np.ndarray:
        if self.frame is not None:
            return self.frame
        _, vecs = np.linalg.eigh(self.data)
        return vecs[..., self.fiber_dim - self.rank :]

    def residuals(self) -> dict[str, float]:
        """Worst idempotency, Hermiticity and trace errors over the grid."""
        p = self.data
        herm = np.abs(p - np.swapaxes(p.conj(), -1, -2)).max()
        idem = np.abs(p @ p - p).max()
        trace = np.abs(np.trace(p, axis1=-2, axis2=-1) - self.rank).max()
        return {"idempotency": float(idem), "hermiticity": float(herm), "trace": float(trace)}

    def check(self, tol: float = 1e-10) -> None:
        res = self.residuals()
        bad = {k: v for k, v in res.items() if v > tol}
        if bad:
            raise NumericalFailure(f"projector field invariants violated: {bad}")

    def smoothness(self) -> float:
        """Largest ``||P(k + step) - P(k)||_F / |step|`` over grid neighbours."""
        worst = 0.0
        for axis in range(self.grid.dim):
            diff = np.roll(self.data, -1, axis=axis) - self.data
            norm = np.sqrt((np.abs(diff) ** 2).sum(axis=(-2, -1)))
            worst = max(worst, float(norm.max() / self.grid.steps[axis]))
        return worst

    def conj(self) -> "ProjectorField":
        frame = None if self.frame is None else self.frame.conj()
        return ProjectorField(self.grid, self.data.conj(), self.rank, frame)

    def direct_sum(self, other: "ProjectorField") -> "ProjectorField":
        """Block-diagonal field ``P (+) other`` on the concatenated fiber."""
        if not self.grid.same_grid(other.grid):
            raise ValueError("fields live on different grids")
        n1, n2 = self.fiber_dim, other.fiber_dim
        data = np.zeros(self.grid.shape + (n1 + n2, n1 + n2), dtype=complex)
        data[..., :n1, :n1] = self.data
        data[..., n1:, n1:] = other.data
        frame = np.zeros(self.grid.shape + (n1 + n2, self.rank + other.rank), dtype=complex)
        frame[..., :n1, : self.rank] = self.eigenframe()
        frame[..., n1:, self.rank :] = other.eigenframe()
        return ProjectorField(self.grid, data, self.rank + other.rank, frame)


def _contour(report: GapReport, lam: np.ndarray) -> tuple[float, float, float]:
    radius = float(np.abs(lam).max())
    left = report.mid_below
    right = report.mid_above
    if left is None:
        left = float(lam.min()) - 1.0
    if right is None:
        right = float(lam.max()) + 1.0
    return left, right, radius + 1.0


def _gauss_rectangle(left, right, height, n_nodes):
    """Nodes and weights of ``dz`` on the counter-clockwise rectangle boundary.

    Each side receives ``n_nodes // 4`` Gauss-Legendre nodes.
    """
    per_side = max(n_nodes // 4, 1)
    x, w = np.polynomial.legendre.leggauss(per_side)
    t, wt = (x + 1) / 2, w / 2
    corners = [
        complex(left, -height),
        complex(right, -height),
        complex(right, height),
        complex(left, height),
    ]
    nodes, weights = [], []
    for a, b in zip(corners, corners[1:] + corners[:1]):
        nodes.append(a + (b - a) * t)
        weights.append((b - a) * wt)
    return np.concatenate(nodes), np.concatenate(weights)


def riesz_projectors(
    model: BlochModel, grid: KGrid, report: GapReport, q_pts: int = 256, bands: BandStructure | None = None
) -> np.ndarray:
    """``(2 pi i)^-1`` times the contour integral of ``(z - H(k))^-1`` on every grid point.

    The contour is an axis-aligned rectangle whose vertical sides sit at mid-gap
    energies and whose horizontal sides sit at +-(spectral radius + 1); the same
    contour is used for all k.
    """
    ham = model.hamiltonians(grid)
    d = model.fiber_dim
    lam = np.linalg.eigvalsh(ham) if bands is None else bands.eigenvalues
    left, right, height = _contour(report, lam)
    clearance = min(np.abs(lam - left).min(), np.abs(lam - right).min())
    if clearance <= 1e-10 * height:
        raise ContourPlacementError(f"contour passes within {clearance:.3e} of the spectrum")
    inside = ((lam > left) & (lam < right)).sum(axis=-1)
    if inside.min() != report.m or inside.max() != report.m:
        raise ContourPlacementError(
            f"contour encloses {inside.min()}..{inside.max()} eigenvalues, expected {report.m}"
        )
    nodes, weights = _gauss_rectangle(left, right, height, q_pts)
    eye = np.eye(d)
    acc = np.zeros_like(ham)
    for z, w in zip(nodes, weights):
        acc += w * np.linalg.inv(z * eye - ham)
    proj = acc / (2j * np.pi)
    # the exact projector is Hermitian; symmetrise away quadrature round-off
    return (proj + np.swapaxes(proj.conj(), -1, -2)) / 2


def projector_field(
    model: BlochModel,
    grid: KGrid,
    window: SpectralWindow,
    method: Literal["eigensum", "riesz"] = "eigensum",
    q_pts: int = 256,
    gap_tol: float = GAP_TOL,
    bands: BandStructure | None = None,
) -> ProjectorField:
    if bands is None:
        bands = band_structure(model, grid)
    report = gap_check(bands, window, gap_tol)
    if method == "eigensum":
        vecs = bands.eigenvectors
        if vecs is None:
            vecs = np.linalg.eigh(model.hamiltonians(grid))[1]
        frame = vecs[..., report.lo - 1 : report.hi]
        data = frame @ np.swapaxes(frame.conj(), -1, -2)
        return ProjectorField(grid, data, report.m, frame)
    if method == "riesz":
        data = riesz_projectors(model, grid, report, q_pts, bands)
        return ProjectorField(grid, data, report.m)
    raise ValueError(f"unknown projector method {method!r}")


# ------------------------------------------------------------------- exports


def bands_table(bands: BandStructure) -> str:
    """CSV: grid indices, Cartesian k, then one column per band."""
    grid = bands.grid
    out = io.StringIO()
    head = [f"m{j + 1}" for j in range(grid.dim)] + [f"k{j + 1}" for j in range(grid.dim)]
    head += [f"lambda_{j + 1}" for j in range(bands.n_bands)]
    out.write(",".join(head) + "\n")
    idx = grid.flat_indices()
    pts = grid.flat_points()
    lam = bands.eigenvalues.reshape(-1, bands.n_bands)
    for m, k, row in zip(idx, pts, lam):
        cells = [str(int(x)) for x in m] + [f"{x:.12e}" for x in k] + [f"{x:.12e}" for x in row]
        out.write(",".join(cells) + "\n")
    return out.getvalue()


def projector_diagnostics_table(field: ProjectorField) -> str:
    """CSV of per-k idempotency, Hermiticity and trace residuals."""
    p = field.data
    herm = np.abs(p - np.swapaxes(p.conj(), -1, -2)).max(axis=(-2, -1)).ravel()
    idem = np.abs(p @ p - p).max(axis=(-2, -1)).ravel()
    trace = np.trace(p, axis1=-2, axis2=-1).real.ravel()
    out = io.StringIO()
    out.write(",".join([f"m{j + 1}" for j in range(field.grid.dim)] + ["idempotency", "hermiticity", "trace"]) + "\n")
    for m, a, b, c in zip(field.grid.flat_indices(), idem, herm, trace):
        out.write(",".join([str(int(x)) for x in m] + [f"{a:.3e}", f"{b:.3e}", f"{c:.12f}"]) + "\n")
    return out.getvalue()
