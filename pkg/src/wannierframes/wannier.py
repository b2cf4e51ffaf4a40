"""Real-space side: discrete Bloch transform, Wannier synthesis, decay and frame checks.

Everything lives on the periodic box of cells dual to the k-grid, so lattice
shifts are cyclic and the transform pair is exactly unitary up to the
``1 / N_tot`` normalisation:

    f_hat(k) = sum_gamma f(gamma) exp(-i k . gamma)
    w(gamma) = (1 / N_tot) sum_k psi(k) exp(+i k . gamma)

With ``k . gamma = 2 pi sum_j m_j gamma_j / N_j`` these are exactly numpy's
``fftn`` and ``ifftn`` over the cell axes.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .errors import CertificateRejected, GridTooCoarseError
from .frames import FrameCertificate
from .gauge import BlochSectionSet
from .lattice import KGrid
from .spectral import ProjectorField

__all__ = [
    "LatticeFunction",
    "DecayFit",
    "DecayProfile",
    "WannierSet",
    "ShiftOrthonormality",
    "bloch_transform",
    "inverse_transform",
    "synthesize",
    "shell_norms",
    "directional_shell_norms",
    "fit_decay",
    "decay_profile",
    "default_fit_range",
    "max_torus_distance",
    "real_space_projection",
    "frame_coefficients",
    "parseval_identity_check",
    "shift_orthonormality_check",
    "coefficients_table",
    "shells_table",
]

NOISE_FLOOR = 1e3 * np.finfo(float).eps
MIN_FIT_SHELLS = 3
ORTHO_TOL = 1e-10


def _cell_axes(dim: int) -> tuple[int, ...]:
    return tuple(range(dim))


@dataclass(frozen=True, eq=False)
class LatticeFunction:
    """Fiber-vector valued function on the periodic box, ``values[gamma] in C^n``."""

    grid: KGrid
    values: np.ndarray  # (*grid.shape, n)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.shape[:-1] != self.grid.shape or values.ndim != self.grid.dim + 1:
            raise ValueError(
                f"lattice function of shape {values.shape} does not match the {self.grid.shape} box"
            )
        object.__setattr__(self, "values", values)

    @property
    def fiber_dim(self) -> int:
        return self.values.shape[-1]

    def norm_squared(self) -> float:
        return float((np.abs(self.values) ** 2).sum())

    def cell_norms(self) -> np.ndarray:
        return np.linalg.norm(self.values, axis=-1)

    def shifted(self, gamma) -> "LatticeFunction":
        """``(T_gamma f)(x) = f(x - gamma)`` with cyclic wrap-around."""
        return LatticeFunction(self.grid, np.roll(self.values, tuple(gamma), axis=_cell_axes(self.grid.dim)))

    def inner(self, other: "LatticeFunction") -> complex:
        """``<self, other>``, antilinear in the first argument."""
        return complex(np.vdot(self.values, other.values))


def bloch_transform(f: LatticeFunction) -> np.ndarray:
    """``f_hat(k) = sum_gamma f(gamma) e^{-i k . gamma}`` as an array ``(*shape, n)``."""
    return np.fft.fftn(f.values, axes=_cell_axes(f.grid.dim))


def inverse_transform(grid: KGrid, values: np.ndarray) -> LatticeFunction:
    """Inverse of :func:`bloch_transform` for one section ``(*shape, n)``."""
    values = np.asarray(values, dtype=complex)
    if values.shape[: grid.dim] != grid.shape:
        raise ValueError(f"section of shape {values.shape} does not live on the {grid.shape} grid")
    return LatticeFunction(grid, np.fft.ifftn(values, axes=_cell_axes(grid.dim)))


# ----------------------------------------------------------------- shells


def max_torus_distance(grid: KGrid) -> int:
    """Largest max-metric distance at which every shell is complete."""
    return min(grid.sizes) // 2


def _torus_offsets(grid: KGrid, center) -> list[np.ndarray]:
    """Per-axis torus distances of every cell from ``center``."""
    out = []
    for ax, n in enumerate(grid.sizes):
        d = (np.arange(n) - center[ax]) % n
        d = np.minimum(d, n - d)
        shape = [1] * grid.dim
        shape[ax] = n
        out.append(np.broadcast_to(d.reshape(shape), grid.shape))
    return out


def _peak(norms: np.ndarray) -> tuple[int, ...]:
    return tuple(int(i) for i in np.unravel_index(int(np.argmax(norms)), norms.shape))


def _shell_max(norms: np.ndarray, dist: np.ndarray, count: int) -> np.ndarray:
    r = np.zeros(count)
    np.maximum.at(r, dist.ravel(), norms.ravel())
    return r


def shell_norms(f: LatticeFunction, center=None) -> np.ndarray:
    """``r_t`` = largest cell norm at max-metric torus distance ``t`` from the peak cell."""
    norms = f.cell_norms()
    center = _peak(norms) if center is None else tuple(center)
    dist = np.maximum.reduce(_torus_offsets(f.grid, center))
    return _shell_max(norms, dist, max(f.grid.sizes) // 2 + 1)


def directional_shell_norms(f: LatticeFunction, axis: int, center=None) -> np.ndarray:
    """Largest cell norm at torus distance ``t`` along one lattice direction only."""
    norms = f.cell_norms()
    center = _peak(norms) if center is None else tuple(center)
    dist = _torus_offsets(f.grid, center)[axis]
    return _shell_max(norms, dist, f.grid.sizes[axis] // 2 + 1)


@dataclass(frozen=True)
class DecayFit:
    """Least-squares line ``-log r_t ~ intercept + rate * t`` over a shell range."""

    rate: float | None
    intercept: float | None
    r2: float | None
    shells: tuple[int, ...]
    super_exponential: bool = False


def fit_decay(r: np.ndarray, fit_range: tuple[int, int]) -> DecayFit:
    lo, hi = fit_range
    scale = float(np.max(r)) if np.max(r) > 0 else 1.0
    t = np.arange(lo, min(hi, len(r) - 1) + 1)
    keep = r[t] > NOISE_FLOOR * scale
    t = t[keep]
    if len(t) < MIN_FIT_SHELLS:
        # (numerically) compact support: nothing to fit a rate to
        return DecayFit(None, None, None, tuple(int(x) for x in t), super_exponential=True)
    y = -np.log(r[t] / scale)
    slope, intercept = np.polyfit(t, y, 1)
    resid = y - (intercept + slope * t)
    total = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid**2).sum()) / total if total > 0 else 0.0
    return DecayFit(float(slope), float(intercept), r2, tuple(int(x) for x in t))


@dataclass(frozen=True)
class DecayProfile:
    isotropic: DecayFit
    directional: tuple[DecayFit, ...]
    fit_range: tuple[int, int]


def default_fit_range(grid: KGrid) -> tuple[int, int]:
    return 2, max(2, max_torus_distance(grid) // 2)


def _check_fit_range(grid: KGrid, fit_range) -> tuple[int, int]:
    lo, hi = (int(x) for x in fit_range)
    limit = max_torus_distance(grid) / 2
    if lo <= 1 or hi > limit or hi < lo:
        raise GridTooCoarseError(
            f"fit range {lo}..{hi} must satisfy 1 < lo <= hi <= {limit:g} on the {grid.shape} box"
        )
    return lo, hi


# --------------------------------------------------------------- Wannier set


@dataclass(frozen=True, eq=False)
class WannierSet:
    """Wannier functions ``w_1..w_l`` on the periodic box with their decay statistics."""

    grid: KGrid
    values: np.ndarray  # (*shape, n, l)
    shell_norms: tuple[np.ndarray, ...]
    profiles: tuple[DecayProfile | None, ...]
    certificate: FrameCertificate | None = None

    @property
    def count(self) -> int:
        return self.values.shape[-1]

    @property
    def fiber_dim(self) -> int:
        return self.values.shape[-2]

    def function(self, j: int) -> LatticeFunction:
        return LatticeFunction(self.grid, self.values[..., :, j])

    @property
    def fitted_rates(self) -> list[dict]:
        """Per function: ``{"isotropic": rate, "axis1": rate, ...}`` (``None`` when not fitted)."""
        out = []
        for prof in self.profiles:
            if prof is None:
                out.append({})
                continue
            row = {"isotropic": prof.isotropic.rate}
            row.update({f"axis{a + 1}": fit.rate for a, fit in enumerate(prof.directional)})
            out.append(row)
        return out

    def sections(self) -> BlochSectionSet:
        return BlochSectionSet(self.grid, np.fft.fftn(self.values, axes=_cell_axes(self.grid.dim)))


def decay_profile(w: WannierSet | LatticeFunction, fit_range=None) -> DecayProfile | list[DecayProfile]:
    """Isotropic and per-direction exponential fits of the shell maxima.

    ``fit_range`` is an inclusive shell interval ``(lo, hi)`` with ``lo > 1``
    and ``hi`` at most half the largest complete torus distance, which keeps
    the fitted shells away from the wrap-around region.
    """
    if isinstance(w, WannierSet):
        return [decay_profile(w.function(j), fit_range) for j in range(w.count)]
    grid = w.grid
    fit_range = _check_fit_range(grid, default_fit_range(grid) if fit_range is None else fit_range)
    center = _peak(w.cell_norms())
    iso = fit_decay(shell_norms(w, center), fit_range)
    directional = tuple(
        fit_decay(directional_shell_norms(w, ax, center), fit_range) for ax in range(grid.dim)
    )
    return DecayProfile(iso, directional, fit_range)


def synthesize(
    sections: BlochSectionSet, certificate: FrameCertificate | None = None, fit_range=None
) -> WannierSet:
    """Wannier functions ``w_j(gamma) = (1/N_tot) sum_k psi_j(k) e^{i k . gamma}``.

    Shell norms are always recorded.  Decay fits are attached when the box is
    large enough for a valid fit range, and left as ``None`` otherwise.
    """
    grid = sections.grid
    values = np.fft.ifftn(sections.values, axes=_cell_axes(grid.dim))
    funcs = [LatticeFunction(grid, values[..., :, j]) for j in range(values.shape[-1])]
    shells = tuple(shell_norms(f) for f in funcs)
    try:
        profiles = tuple(decay_profile(f, fit_range) for f in funcs)
    except GridTooCoarseError:
        if fit_range is not None:
            raise
        profiles = (None,) * len(funcs)
    return WannierSet(grid, values, shells, profiles, certificate)


# ----------------------------------------------------------- frame checks


def real_space_projection(field: ProjectorField, g: LatticeFunction) -> LatticeFunction:
    """Apply the orthogonal projector onto ``H_S`` (multiplication by ``P(k)`` in k-space)."""
    if not field.grid.same_grid(g.grid):
        raise ValueError("lattice function and projector field live on different grids")
    ghat = bloch_transform(g)
    return inverse_transform(g.grid, np.einsum("...ab,...b->...a", field.data, ghat))


def frame_coefficients(w: WannierSet, f: LatticeFunction) -> np.ndarray:
    """``c[gamma, j] = <w_{j,gamma}, f>`` for every cyclic shift, as ``(*shape, l)``.

    The correlation over shifts becomes a pointwise product in k-space.
    """
    what = np.fft.fftn(w.values, axes=_cell_axes(w.grid.dim))  # (*shape, n, l)
    fhat = bloch_transform(f)  # (*shape, n)
    prod = np.einsum("...aj,...a->...j", what.conj(), fhat)
    return np.fft.ifftn(prod, axes=_cell_axes(w.grid.dim))


def parseval_identity_check(
    w: WannierSet,
    field: ProjectorField,
    trials: int = 20,
    seed=None,
    certificate: FrameCertificate | None = None,
) -> float:
    """Largest relative error of ``sum_{j,gamma} |<f, w_{j,gamma}>|^2`` against ``||f||^2``.

    Trial functions are random lattice functions pushed through the
    projector onto ``H_S``.  Frames whose certificate was not accepted are
    refused.
    """
    cert = certificate if certificate is not None else w.certificate
    if cert is not None and not cert.accepted:
        raise CertificateRejected(
            f"frame certificate not accepted (route {cert.route}, residual "
            f"{cert.max_parseval_residual:.3e}, bounds {cert.frame_bounds})"
        )
    rng = np.random.default_rng(seed)
    shape = w.grid.shape + (w.fiber_dim,)
    worst = 0.0
    for _ in range(trials):
        g = LatticeFunction(w.grid, rng.normal(size=shape) + 1j * rng.normal(size=shape))
        f = real_space_projection(field, g)
        norm2 = f.norm_squared()
        energy = float((np.abs(frame_coefficients(w, f)) ** 2).sum())
        worst = max(worst, abs(energy - norm2) / norm2)
    return worst


@dataclass(frozen=True)
class ShiftOrthonormality:
    orthogonal: bool
    shift_deviation: float  # max_gamma |<w, T_gamma w> - delta_{gamma,0} ||w||^2|
    norm_deviation: float  # max_k | ||psi(k)||^2 - mean |
    consistent: bool


def shift_orthonormality_check(
    w: LatticeFunction, psi: np.ndarray, tol: float = ORTHO_TOL
) -> ShiftOrthonormality:
    """Compare the two sides of "shifts orthogonal iff ``||psi(k)||`` is constant".

    The shift Gram sequence is computed from ``w`` itself.  The norm profile
    comes from the paired section.  Since the Gram sequence is the inverse
    transform of ``||psi(k)||^2``, its deviation is at most the norm deviation,
    which is at most ``N_tot`` times it; ``consistent`` tests that the two
    vanish together on that scale.
    """
    vals = w.values
    axes = _cell_axes(w.grid.dim)
    auto = np.fft.ifftn((np.abs(np.fft.fftn(vals, axes=axes)) ** 2).sum(axis=-1))
    # auto[gamma] = sum_x w(x)^dagger w(x + gamma) = <w, T_{-gamma} w>
    target = np.zeros(w.grid.shape)
    target[(0,) * w.grid.dim] = w.norm_squared()
    shift_dev = float(np.abs(auto - target).max())
    sq = (np.abs(np.asarray(psi)) ** 2).sum(axis=-1)
    norm_dev = float(np.abs(sq - sq.mean()).max())
    orthogonal = shift_dev <= tol
    consistent = orthogonal == (norm_dev <= tol * w.grid.n_points)
    return ShiftOrthonormality(orthogonal, shift_dev, norm_dev, consistent)


# ----------------------------------------------------------------- tables


def _signed(idx: np.ndarray, n: int) -> np.ndarray:
    return np.where(idx >= (n + 1) // 2, idx - n, idx)


def coefficients_table(w: WannierSet, threshold: float = 0.0) -> str:
    """CSV rows ``function,g1..gd,orbital,re,im`` with cells in signed box coordinates."""
    dim = w.grid.dim
    out = io.StringIO()
    out.write(",".join(["function", *(f"g{a + 1}" for a in range(dim)), "orbital", "re", "im"]) + "\n")
    cells = np.stack(
        [_signed(ix, n) for ix, n in zip(np.indices(w.grid.shape), w.grid.sizes)], axis=-1
    ).reshape(-1, dim)
    flat = w.values.reshape(-1, w.fiber_dim, w.count)
    for j in range(w.count):
        for c in range(flat.shape[0]):
            for a in range(w.fiber_dim):
                z = flat[c, a, j]
                if abs(z) <= threshold:
                    continue
                gam = ",".join(str(int(x)) for x in cells[c])
                out.write(f"{j + 1},{gam},{a + 1},{z.real:.17g},{z.imag:.17g}\n")
    return out.getvalue()


def shells_table(w: WannierSet) -> str:
    """CSV rows ``function,shell,r_iso,r_axis1..`` (blank where a shell does not exist)."""
    dim = w.grid.dim
    out = io.StringIO()
    out.write(",".join(["function", "shell", "r_iso", *(f"r_axis{a + 1}" for a in range(dim))]) + "\n")
    for j in range(w.count):
        f = w.function(j)
        center = _peak(f.cell_norms())
        iso = shell_norms(f, center)
        dirs = [directional_shell_norms(f, ax, center) for ax in range(dim)]
        for t in range(len(iso)):
            cols = [f"{iso[t]:.17g}"] + [f"{d[t]:.17g}" if t < len(d) else "" for d in dirs]
            out.write(f"{j + 1},{t}," + ",".join(cols) + "\n")
    return out.getvalue()
