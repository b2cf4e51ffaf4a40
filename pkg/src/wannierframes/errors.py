"""Exception hierarchy.

Every error carries an ``exit_code`` so the command line runner can map a
failed stage onto its documented process status without a lookup table.
"""


class WannierFramesError(Exception):
    """Base class for all library errors."""

    exit_code = 1
    kind = "error"


class ConfigError(WannierFramesError):
    exit_code = 2
    kind = "config"


class DegenerateLatticeError(WannierFramesError):
    kind = "degenerate-lattice"


class GridTooCoarseError(WannierFramesError):
    exit_code = 4
    kind = "grid-too-coarse"


class NonHermitianError(WannierFramesError):
    kind = "non-hermitian"


class UnknownModelError(ConfigError):
    kind = "unknown-model"


class ModelFileError(ConfigError):
    kind = "model-file"


class NumericalFailure(WannierFramesError):
    kind = "numerical-failure"


class GaplessError(WannierFramesError):
    exit_code = 3
    kind = "gapless"


class NotIsolatedError(GaplessError):
    kind = "not-isolated"


class ContourPlacementError(WannierFramesError):
    exit_code = 3
    kind = "contour-placement"


class DegenerateOverlapError(GridTooCoarseError):
    kind = "degenerate-overlap"


class GenericityFailure(WannierFramesError):
    exit_code = 5
    kind = "genericity-failure"

    def __init__(self, message, profile=None):
        super().__init__(message)
        self.profile = list(profile or [])


class BranchCutError(GenericityFailure):
    kind = "branch-cut"


class SingularGramError(GenericityFailure):
    kind = "singular-gram"

    def __init__(self, message, min_eigenvalue):
        super().__init__(message, [min_eigenvalue])
        self.min_eigenvalue = min_eigenvalue


class EmbeddingDefectError(GenericityFailure):
    kind = "embedding-defect"


class UnsupportedChernError(WannierFramesError):
    kind = "unsupported-chern"


class TopologyObstructionError(WannierFramesError):
    """A construction that needs a trivial bundle received a nontrivial one."""

    exit_code = 6
    kind = "obstructed"

    def __init__(self, message, chern=None):
        super().__init__(message)
        self.chern = dict(chern or {})


class SubspaceMismatchError(WannierFramesError):
    exit_code = 6
    kind = "subspace-mismatch"


class CertificateRejected(WannierFramesError):
    exit_code = 6
    kind = "certificate-rejection"
