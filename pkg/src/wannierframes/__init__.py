"""Parseval frames of exponentially localized Wannier functions for periodic tight-binding operators."""

__version__ = "0.1.0"

from .errors import WannierFramesError
from .lattice import KGrid, Lattice, kgrid, square_lattice
from .models import BlochModel, builtin, gallery, read_model, write_model
from .spectral import SpectralWindow, band_structure, gap_check, projector_field
from .topology import ChernReport, chern_number, chern_report, complementary_line_bundle
from .gauge import BlochSectionSet, trivialize, winding_diagnostic
from .frames import FrameCertificate, parseval_sections
from .wannier import LatticeFunction, WannierSet, bloch_transform, synthesize, parseval_identity_check

__all__ = [
    "__version__",
    "WannierFramesError",
    "KGrid",
    "Lattice",
    "kgrid",
    "square_lattice",
    "BlochModel",
    "builtin",
    "gallery",
    "read_model",
    "write_model",
    "SpectralWindow",
    "band_structure",
    "gap_check",
    "projector_field",
    "ChernReport",
    "chern_number",
    "chern_report",
    "complementary_line_bundle",
    "BlochSectionSet",
    "trivialize",
    "winding_diagnostic",
    "FrameCertificate",
    "parseval_sections",
    "LatticeFunction",
    "WannierSet",
    "bloch_transform",
    "synthesize",
    "parseval_identity_check",
]
