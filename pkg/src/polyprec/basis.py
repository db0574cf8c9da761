"""Discretized polynomial bases over grid vertex coordinates.

The preserved subspace of the factorization is spanned by the columns of a
tall matrix holding low-degree monomials evaluated at unknown locations:
degree 0 is the constant vector, degree 1 adds the coordinates, degree 2
adds squares and cross terms. For vector PDEs with several unknowns per
vertex the scalar basis is replicated block-diagonally under component-major
ordering, so the rigid body modes of elasticity lie in the degree-1 span.
"""

from dataclasses import dataclass

import numpy as np

PI_COLS_SCALAR = {0: 1, 1: 4, 2: 10}


@dataclass
class PolyBasis:
    """Basis matrix (n_unknowns x pi_cols), degree, and column count."""

    Pi: np.ndarray
    degree: int
    pi_cols: int


def _scalar_columns(coords, degree):
    x, y, z = coords[:, 0], coords[:, 1], coords[:, 2]
    one = np.ones(len(coords))
    cols = [one]
    if degree >= 1:
        cols += [x, y, z]
    if degree >= 2:
        cols += [x * x, y * y, z * z, x * y, y * z, z * x]
    return np.column_stack(cols)


def build_polynomial_basis(coords, degree, components=1):
    """Polynomial basis over vertex coordinates, one block per component.

    Columns are scaled to unit max-norm so that quadratic monomials on
    large grids do not dominate the rank decisions downstream; the scaling
    changes only the basis, not its span. Zero columns (degenerate
    coordinate sets) are left untouched.
    """
    coords = np.asarray(coords, dtype=float)
    if degree not in (0, 1, 2):
        raise ValueError(f"degree must be 0, 1, or 2, got {degree}")
    if components not in (1, 3):
        raise ValueError(f"components must be 1 or 3, got {components}")
    P = _scalar_columns(coords, degree)
    nv, ps = P.shape
    if components == 1:
        Pi = P
    else:
        Pi = np.zeros((components * nv, components * ps))
        for c in range(components):
            Pi[c * nv : (c + 1) * nv, c * ps : (c + 1) * ps] = P
    scale = np.abs(Pi).max(axis=0)
    scale[scale == 0] = 1.0
    Pi = Pi / scale
    return PolyBasis(Pi=Pi, degree=degree, pi_cols=Pi.shape[1])
