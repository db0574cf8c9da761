"""Hierarchical polynomial-preserving Cholesky preconditioners for sparse
SPD systems from elliptic PDE discretizations, with a PCG solver and a
benchmark harness."""

from .basis import PolyBasis, build_polynomial_basis
from .blockmatrix import BlockMatrix
from .densela import CholeskyFactor, PivotedQR, cholesky, pivoted_qr, tri_solve
from .errors import (
    CountMismatchError,
    DimensionMismatchError,
    GridTooSmallError,
    IndefiniteDetectedError,
    NonPositiveFieldError,
    NonSymmetricPatternError,
    NotSPDError,
    NotSymmetricError,
    ParseError,
    PolyprecError,
    ShapeMismatchError,
)
from .factorization import (
    MODES,
    SCHEMES,
    Preconditioner,
    RankTrace,
    default_b,
    default_skip_levels,
    factorize,
)
from .krylov import SolveReport, estimate_extreme_eigs, pcg
from .partition import (
    CartesianGrid,
    Cell,
    PartitionHierarchy,
    build_general_hierarchy,
    build_nested_hierarchy,
    compute_adjacency,
    expand_to_unknowns,
)
from .problems import (
    ProblemInstance,
    ScalarField,
    darcy_tpfa,
    elasticity_hex_beam,
    poisson7,
    read_mtx,
    read_perm_field,
    synth_perm_field,
    tile_field,
    write_mtx,
    write_perm_field,
)

__version__ = "0.1.0"
