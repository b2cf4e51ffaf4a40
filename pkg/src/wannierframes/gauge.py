"""Smooth periodic orthonormal frames for projector fields with zero Chern numbers.

Two independent algorithms:

``transport``
    Peel off ``r - 1`` orthonormal sections ``P(k) v / |P(k) v|`` from
    generic constant vectors (in dimension <= 3 a bundle of rank >= 2 has such
    nonvanishing sections), leaving a line bundle.  The line is parallel
    transported along ``k_1`` from ``k = 0``, then along ``k_2`` from every point
    of that line, then along ``k_3``.  Each closure phase is lifted to a
    continuous periodic function of the transverse momenta and spread evenly
    along the transport direction.  The lift exists exactly when the relevant
    Chern numbers vanish.

``projection``
    Project ``r`` random constant vectors and orthonormalise them with the
    inverse square root of their Gram matrix.  Fails wherever the projected
    vectors become linearly dependent.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import (
    BranchCutError,
    DegenerateOverlapError,
    GenericityFailure,
    SingularGramError,
    TopologyObstructionError,
)
from .lattice import KGrid
from .spectral import ProjectorField
from .topology import OVERLAP_TOL, ChernReport, chern_report, plane_label

__all__ = [
    "BlochSectionSet",
    "WindingReport",
    "trivialize",
    "transport_frame",
    "projection_frame",
    "projection_min_gram",
    "winding_diagnostic",
]

GRAM_TOL = 1e-6
TRANSPORT_SEEDS = 10
SPLIT_CANDIDATES = 16
SPLIT_GOOD_RATIO = 0.2
SPLIT_MIN_RATIO = 1e-3


def _dagger(x):
    return np.swapaxes(x.conj(), -1, -2)


@dataclass(frozen=True, eq=False)
class BlochSectionSet:
    """``l`` sections of the fiber bundle over the grid, ``values[..., :, j] = psi_j(k)``."""

    grid: KGrid
    values: np.ndarray  # (*shape, n, l)

    @property
    def count(self) -> int:
        return self.values.shape[-1]

    @property
    def fiber_dim(self) -> int:
        return self.values.shape[-2]

    def section(self, j: int) -> np.ndarray:
        return self.values[..., :, j]

    @property
    def smoothness(self) -> float:
        """Largest neighbour difference ``|psi(k + step) - psi(k)|_F / |step|``."""
        worst = 0.0
        for axis in range(self.grid.dim):
            diff = np.roll(self.values, -1, axis=axis) - self.values
            norm = np.sqrt((np.abs(diff) ** 2).sum(axis=(-2, -1)))
            worst = max(worst, float(norm.max() / self.grid.steps[axis]))
        return worst

    def outer_sum(self) -> np.ndarray:
        """``sum_j psi_j psi_j^dagger`` on every grid point."""
        return self.values @ _dagger(self.values)

    def gram_residual(self) -> float:
        gram = _dagger(self.values) @ self.values
        return float(np.abs(gram - np.eye(self.count)).max())

    def subspace_residual(self, field: ProjectorField) -> float:
        """``max_k max_j |(I - P(k)) psi_j(k)|``."""
        outside = self.values - field.data @ self.values
        return float(np.linalg.norm(outside, axis=-2).max())

    def completeness_residual(self, field: ProjectorField) -> float:
        """``max_k |sum_j psi_j psi_j^dagger - P(k)|_F``."""
        diff = self.outer_sum() - field.data
        return float(np.sqrt((np.abs(diff) ** 2).sum(axis=(-2, -1))).max())

    def top_block(self, n: int) -> "BlochSectionSet":
        return BlochSectionSet(self.grid, self.values[..., :n, :])

    def projected(self, field: ProjectorField) -> "BlochSectionSet":
        return BlochSectionSet(self.grid, field.data @ self.values)


# ----------------------------------------------------------------- transport


def _fix_phase(vec):
    """Make the largest-modulus component real and positive."""
    k = int(np.argmax(np.abs(vec)))
    return vec * np.exp(-1j * np.angle(vec[k]))


def _wrap(x):
    return (x + np.pi) % (2 * np.pi) - np.pi


def _lift_periodic(theta: np.ndarray) -> np.ndarray:
    """Continuous lift of a phase field on a discrete torus.

    Lifts along axis 0 at the origin, then along axis 1 from every point of
    that line, and so on.  Raises BranchCutError when the phase winds around a
    cycle or jumps by more than pi/2 between neighbours after lifting.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.ndim == 0:
        return theta
    out = theta.copy()
    for axis in range(theta.ndim):
        # cells with index 0 on all later axes
        base = tuple(slice(None) if ax <= axis else 0 for ax in range(theta.ndim))
        part = np.moveaxis(out[base], axis, -1)
        steps = _wrap(np.diff(part, axis=-1, append=part[..., :1]))
        winding = steps.sum(axis=-1) / (2 * np.pi)
        if np.abs(winding).max() > 0.5:
            raise BranchCutError(
                f"closure phase winds {int(np.rint(winding.flat[np.argmax(np.abs(winding))]))} "
                f"times along axis {axis + 1}"
            )
        lifted = part[..., :1] + np.concatenate(
            [np.zeros(part.shape[:-1] + (1,)), np.cumsum(steps[..., :-1], axis=-1)], axis=-1
        )
        out[base] = np.moveaxis(lifted, -1, axis)
    for axis in range(theta.ndim):
        jump = np.abs(np.roll(out, -1, axis=axis) - out)
        if jump.max() > np.pi / 2:
            raise BranchCutError(f"closure phase jumps by {jump.max():.3f} along axis {axis + 1}")
    return out


def _transport_line(lines: np.ndarray, grid: KGrid) -> np.ndarray:
    """Smooth periodic unit section of a rank-1 projector field ``lines``."""
    dim = grid.dim
    shape = grid.shape
    origin = (0,) * dim
    start = np.linalg.eigh(lines[origin])[1][:, -1]
    u = np.zeros(shape + (lines.shape[-1],), dtype=complex)
    u[origin] = _fix_phase(start)
    for axis in range(dim):
        n_steps = shape[axis]

        def at(t):
            return tuple(slice(None) if ax < axis else (t if ax == axis else 0) for ax in range(dim))

        for t in range(1, n_steps):
            x = np.einsum("...ab,...b->...a", lines[at(t)], u[at(t - 1)])
            norm = np.linalg.norm(x, axis=-1)
            if norm.min() < OVERLAP_TOL:
                raise DegenerateOverlapError(
                    f"transport step {t} along axis {axis + 1} lost the line (|overlap| {norm.min():.2e})"
                )
            u[at(t)] = x / norm[..., None]
        x = np.einsum("...ab,...b->...a", lines[at(0)], u[at(n_steps - 1)])
        closure = np.einsum("...a,...a->...", u[at(0)].conj(), x)
        theta = _lift_periodic(np.angle(closure))
        for t in range(1, n_steps):
            u[at(t)] *= np.asarray(np.exp(-1j * theta * t / n_steps))[..., None]
    return u


def _split_vector(data: np.ndarray, rng):
    """Constant vector whose projection is comfortably nonvanishing.

    Candidates are drawn from ``rng`` in a fixed order and the first with
    ``min |P v| >= SPLIT_GOOD_RATIO * mean |P v|`` is used, which keeps the choice
    stable when the grid is refined; otherwise the best candidate is used.
    """
    n = data.shape[-1]
    best, best_ratio = None, -1.0
    for _ in range(SPLIT_CANDIDATES):
        v = rng.normal(size=n) + 1j * rng.normal(size=n)
        v /= np.linalg.norm(v)
        norms = np.linalg.norm(data @ v, axis=-1)
        ratio = norms.min() / norms.mean()
        if ratio >= SPLIT_GOOD_RATIO:
            return v, ratio
        if ratio > best_ratio:
            best, best_ratio = v, ratio
    return best, best_ratio


def transport_frame(field: ProjectorField, seed=None) -> np.ndarray:
    """Orthonormal frame of ``field`` by section splitting plus parallel transport.

    Retries with fresh random vectors (at most ``TRANSPORT_SEEDS`` times) when a
    closure phase cannot be lifted; the caller is responsible for having
    checked that the Chern numbers vanish.
    """
    rng = np.random.default_rng(seed)
    last = None
    profile = []
    for _ in range(TRANSPORT_SEEDS):
        data = field.data.copy()
        columns = []
        ok = True
        for _ in range(field.rank - 1):
            v, ratio = _split_vector(data, rng)
            profile.append(float(ratio))
            if ratio < SPLIT_MIN_RATIO:
                ok = False
                break
            s = data @ v
            e = s / np.linalg.norm(s, axis=-1, keepdims=True)
            columns.append(e)
            data = data - e[..., :, None] * e[..., None, :].conj()
        if not ok:
            continue
        try:
            columns.append(_transport_line(data, field.grid))
        except BranchCutError as exc:
            last = exc
            continue
        return np.stack(columns, axis=-1)
    if last is not None:
        raise BranchCutError(f"transport failed for {TRANSPORT_SEEDS} seeds: {last}")
    raise GenericityFailure(
        f"no well-conditioned splitting vector in {TRANSPORT_SEEDS} seeds", profile
    )


# ---------------------------------------------------------------- projection


def _projection_gram(field: ProjectorField, rng):
    n, r = field.fiber_dim, field.rank
    vecs = rng.normal(size=(n, r)) + 1j * rng.normal(size=(n, r))
    vecs /= np.linalg.norm(vecs, axis=0)
    x = field.data @ vecs
    gram = _dagger(x) @ x
    return x, gram


def projection_min_gram(field: ProjectorField, seed=None) -> float:
    """Smallest Gram eigenvalue of the projected random vectors over the grid."""
    _, gram = _projection_gram(field, np.random.default_rng(seed))
    return float(np.linalg.eigvalsh(gram)[..., 0].min())


def projection_frame(field: ProjectorField, seed=None) -> np.ndarray:
    x, gram = _projection_gram(field, np.random.default_rng(seed))
    w, q = np.linalg.eigh(gram)
    if w[..., 0].min() < GRAM_TOL:
        raise SingularGramError(
            f"projected vectors are nearly dependent: smallest Gram eigenvalue {w[..., 0].min():.3e}",
            float(w[..., 0].min()),
        )
    inv_sqrt = q @ (q.conj().swapaxes(-1, -2) / np.sqrt(w)[..., :, None])
    return x @ inv_sqrt


# -------------------------------------------------------------------- driver


def trivialize(
    field: ProjectorField,
    method: Literal["transport", "projection"] = "transport",
    seed=None,
    report: ChernReport | None = None,
    check_topology: bool = True,
) -> BlochSectionSet:
    """Orthonormal frame ``psi_1..psi_r`` of ``Ran P(k)``, periodic on the grid.

    Raises TopologyObstructionError if any Chern number of ``field`` is nonzero.
    """
    if check_topology and field.grid.dim >= 2:
        report = report if report is not None else chern_report(field)
        if not report.trivial:
            bad = {plane_label(p): c for p, c in report.chern.items() if c}
            raise TopologyObstructionError(
                f"bundle is not trivial: {', '.join(f'{k} = {v}' for k, v in bad.items())}",
                report.chern,
            )
    if method == "transport":
        frame = transport_frame(field, seed)
    elif method == "projection":
        frame = projection_frame(field, seed)
    else:
        raise ValueError(f"unknown trivialization method {method!r}")
    return BlochSectionSet(field.grid, frame)


# ------------------------------------------------------------------- winding


@dataclass(frozen=True)
class WindingReport:
    direction: int
    phases: np.ndarray  # Berry phase / 2 pi of each loop along `direction`, lifted
    total_change: dict  # plane -> integer change, oriented like chern_number


def winding_diagnostic(field: ProjectorField, direction: int = 0) -> WindingReport:
    """Berry phase of the loops along ``direction`` as a function of the other momenta.

    The phase profile is lifted along each transverse axis ``t`` (other
    transverse indices held at 0); its total change around that cycle equals
    the Chern number of the plane spanned by ``direction`` and ``t``.
    """
    if field.rank != 1:
        raise ValueError("winding diagnostic needs a rank-1 field")
    grid = field.grid
    u = field.eigenframe()[..., 0]
    nxt = np.roll(u, -1, axis=direction)
    overlaps = np.einsum("...a,...a->...", u.conj(), nxt)
    if np.abs(overlaps).min() < OVERLAP_TOL:
        raise DegenerateOverlapError(
            f"overlap {np.abs(overlaps).min():.2e} < {OVERLAP_TOL:.0e} along axis {direction + 1}"
        )
    loop = np.prod(overlaps, axis=direction)
    theta = np.angle(loop)
    transverse = [ax for ax in range(grid.dim) if ax != direction]
    profile = theta.copy()
    total = {}
    for pos, ax in enumerate(transverse):
        line = theta[tuple(slice(None) if p == pos else 0 for p in range(len(transverse)))]
        steps = _wrap(np.diff(line, append=line[:1]))
        change = int(np.rint(steps.sum() / (2 * np.pi)))
        sign = 1 if direction < ax else -1
        total[tuple(sorted((direction, ax)))] = sign * change
    if len(transverse) == 1:
        steps = _wrap(np.diff(theta, append=theta[:1]))
        profile = theta[0] + np.concatenate([[0.0], np.cumsum(steps[:-1])])
    return WindingReport(direction, profile / (2 * np.pi), total)
