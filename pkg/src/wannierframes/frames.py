"""Parseval frames of Bloch sections for an isolated spectral window.

When the Bloch bundle is trivial an orthonormal frame of ``m`` sections is
returned.  Otherwise a line bundle with opposite Chern numbers is added so the
rank ``m + 1`` sum is trivial; an orthonormal frame of the sum, projected back
onto ``Ran P(k)``, gives ``m + 1`` sections with

    sum_j psi_j(k) psi_j(k)^dagger = P(k)

at every k, i.e. a Parseval frame.  The extra line bundle either lives on an
auxiliary fiber (``augmented``) or is embedded into ``Ran(I - P(k))`` by a
random linear map (``embedded``).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import (
    EmbeddingDefectError,
    GenericityFailure,
    SubspaceMismatchError,
    TopologyObstructionError,
)
from .gauge import BlochSectionSet, trivialize
from .spectral import ProjectorField
from .topology import ChernReport, chern_report, complementary_line_bundle, plane_label

__all__ = [
    "FrameCertificate",
    "Embedding",
    "frame_bounds",
    "certify",
    "embed_line_bundle",
    "parseval_sections",
]

RESIDUAL_TOL = 1e-9
SUBSPACE_TOL = 1e-8
EMBED_REL_THRESHOLD = 1e-4
EMBED_RETRIES = 50

Route = Literal["auto", "basis", "augmented", "embedded"]


def _dagger(x):
    return np.swapaxes(x.conj(), -1, -2)


@dataclass(frozen=True)
class FrameCertificate:
    l: int
    max_parseval_residual: float
    frame_bounds: tuple[float, float]
    smoothness: float
    route: str
    tol: float = RESIDUAL_TOL
    embedding_attempts: int = 0

    @property
    def accepted(self) -> bool:
        a, b = self.frame_bounds
        return (
            self.max_parseval_residual <= self.tol
            and abs(a - 1) <= self.tol
            and abs(b - 1) <= self.tol
        )


def frame_bounds(sections: BlochSectionSet, field: ProjectorField) -> tuple[float, float]:
    """Extreme eigenvalues of the frame operator restricted to ``Ran P(k)``.

    By the discrete Plancherel identity these are the optimal frame bounds of
    the lattice-shift system on the periodic box.
    """
    if sections.subspace_residual(field) > SUBSPACE_TOL:
        raise SubspaceMismatchError(
            f"sections leave Ran P by {sections.subspace_residual(field):.3e} > {SUBSPACE_TOL:.0e}"
        )
    basis = field.eigenframe()
    coeffs = _dagger(basis) @ sections.values  # (*shape, m, l)
    restricted = coeffs @ _dagger(coeffs)
    eig = np.linalg.eigvalsh(restricted)
    return float(eig[..., 0].min()), float(eig[..., -1].max())


def certify(
    sections: BlochSectionSet, field: ProjectorField, route: str, tol: float = RESIDUAL_TOL, attempts: int = 0
) -> FrameCertificate:
    return FrameCertificate(
        l=sections.count,
        max_parseval_residual=sections.completeness_residual(field),
        frame_bounds=frame_bounds(sections, field),
        smoothness=sections.smoothness,
        route=route,
        tol=tol,
        embedding_attempts=attempts,
    )


@dataclass(frozen=True, eq=False)
class Embedding:
    field: ProjectorField  # rank-1 image inside Ran(I - P)
    map: np.ndarray  # auxiliary fiber -> model fiber
    attempts: int
    min_weight: float
    mean_weight: float


def embed_line_bundle(
    field: ProjectorField,
    report: ChernReport,
    seed=None,
    max_retries: int = EMBED_RETRIES,
    threshold: float = EMBED_REL_THRESHOLD,
) -> Embedding:
    """Embed the complementary line bundle into ``Ran(I - P(k))`` with a random map.

    A map ``J`` is accepted when ``|(I - P(k)) J e(k)|^2``, the only nonzero
    eigenvalue of ``(I - P) J l(k) J^dagger (I - P)``, stays above
    ``threshold`` times its mean over the grid and the image line bundle
    carries the Chern numbers of the complementary bundle; otherwise a fresh
    map is drawn.
    """
    d, m = field.fiber_dim, field.rank
    if d - m < 1:
        raise ValueError(f"embedding needs a nonzero complement (fiber {d}, rank {m})")
    target = report.negated()
    line = complementary_line_bundle(field.grid, target)
    e = line.eigenframe()[..., 0]  # (*shape, D)
    comp = np.eye(d) - field.data
    rng = np.random.default_rng(seed)
    profile = []
    defects = []
    for attempt in range(1, max_retries + 1):
        jmap = rng.normal(size=(d, line.fiber_dim)) + 1j * rng.normal(size=(d, line.fiber_dim))
        y = np.einsum("...ab,bc,...c->...a", comp, jmap, e)
        weight = (np.abs(y) ** 2).sum(axis=-1)
        lo, mean = float(weight.min()), float(weight.mean())
        profile.append(lo / mean)
        if lo <= threshold * mean:
            continue
        unit = y / np.sqrt(weight)[..., None]
        image = ProjectorField(field.grid, unit[..., :, None] * unit[..., None, :].conj(), 1, unit[..., None])
        # a nowhere-vanishing y makes e -> y a bundle isomorphism, so a Chern
        # mismatch means the grid under-resolves y; draw again
        measured = chern_report(image).chern
        if any(measured.get(p, 0) != c for p, c in target.items()):
            defects.append(attempt)
            continue
        return Embedding(image, jmap, attempt, lo, mean)
    if defects:
        raise EmbeddingDefectError(
            f"embedded line bundle had the wrong Chern numbers in draws {defects} "
            f"and no draw out of {max_retries} was accepted",
            profile,
        )
    raise GenericityFailure(
        f"no embedding accepted in {max_retries} draws (best min/mean weight {max(profile):.3e})",
        profile,
    )


def _sum_field(field: ProjectorField, image: ProjectorField) -> ProjectorField:
    frame = np.concatenate([field.eigenframe(), image.eigenframe()], axis=-1)
    return ProjectorField(field.grid, field.data + image.data, field.rank + 1, frame)


def parseval_sections(
    field: ProjectorField,
    report: ChernReport | None = None,
    route: Route = "auto",
    seed=None,
    method: Literal["transport", "projection"] = "transport",
    tol: float = RESIDUAL_TOL,
) -> tuple[BlochSectionSet, FrameCertificate]:
    """Sections of ``Ran P`` forming a Parseval frame, with their certificate.

    ``basis`` needs a trivial bundle and returns ``m`` orthonormal sections;
    ``augmented`` and ``embedded`` return ``m + 1``; ``auto`` picks ``basis``
    for trivial bundles and ``augmented`` otherwise.
    """
    if report is None:
        report = chern_report(field) if field.grid.dim >= 2 else ChernReport({}, {})
    if route == "auto":
        route = "basis" if report.trivial else "augmented"
    seeds = np.random.SeedSequence(seed).spawn(2)
    attempts = 0

    if route == "basis":
        if not report.trivial:
            bad = ", ".join(f"{plane_label(p)} = {c}" for p, c in report.chern.items() if c)
            raise TopologyObstructionError(
                f"no orthonormal frame of {field.rank} sections exists: {bad}", report.chern
            )
        sections = trivialize(field, method, seeds[0], report=report)
    elif route == "augmented":
        line = complementary_line_bundle(field.grid, report.negated())
        total = field.direct_sum(line)
        frame = trivialize(total, method, seeds[0])
        sections = frame.top_block(field.fiber_dim)
    elif route == "embedded":
        emb = embed_line_bundle(field, report, seeds[1])
        attempts = emb.attempts
        total = _sum_field(field, emb.field)
        frame = trivialize(total, method, seeds[0])
        sections = frame.projected(field)
    else:
        raise ValueError(f"unknown route {route!r}")
    return sections, certify(sections, field, route, tol, attempts)
