"""Exception types shared across the package."""


class MagcError(Exception):
    """Base class for all errors raised by this package."""


# --- graph construction ---

class EmptyGraph(MagcError):
    """Graph has no edges; degree-normalized quantities are undefined."""


class AsymmetricAdjacency(MagcError):
    """Adjacency matrix is not symmetric within tolerance."""


class SelfLoop(MagcError):
    """Self-loops are rejected, not silently dropped."""


class NegativeWeight(MagcError):
    """Edge weights must be nonnegative."""


class DimensionMismatch(MagcError):
    """Operands have incompatible shapes."""


# --- solver ---

class SingularCoarseLaplacian(MagcError):
    """Coarsened Laplacian plus rank-one shift is not positive definite.

    Signals a degenerate assignment matrix whose coarsened graph is
    disconnected in a rank-deficient way.
    """


class SingularSystem(MagcError):
    """The k-by-k normal system of the coarsened-feature update is singular.

    Usually means a cluster went empty (a zero column in the assignment).
    """


class NonFinite(MagcError):
    """An iterate contains NaN or Inf; step-size control failed."""


class MissingFeatures(MagcError):
    """Graph has no node features and no substitute was supplied."""


class InvalidConfig(MagcError):
    """Configuration violates a documented invariant."""


class InvalidDegrees(MagcError):
    """Block-matrix degree parameters are inconsistent (d must exceed d_out)."""


class GroupMismatch(MagcError):
    """Feature group count is incompatible with the block count."""


# --- metrics ---

class LengthMismatch(MagcError):
    """Label vectors differ in length."""


class ZeroVolumeCluster(MagcError):
    """A cluster (or its complement) has zero edge volume; conductance undefined."""


# --- io ---

class ParseError(MagcError):
    """Malformed input file; message carries the offending line number."""
