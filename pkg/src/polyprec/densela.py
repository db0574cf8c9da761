"""Small dense linear-algebra kernels used on per-node blocks.

Every block handled by the factorization is small and dense, so the kernels
here favor predictable behavior over peak throughput: Cholesky with an
explicit breakdown threshold, triangular solves, and a Householder QR with
classical column-norm pivoting. All of them report their analytic flop
counts to a module-level tally so benchmark counters are exact integers.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import NotSPDError, ShapeMismatchError

# Relative pivot threshold below which a Cholesky is declared broken down.
CHOL_PIVOT_RTOL = 1e-14

# Default relative truncation tolerance for the pivoted QR rank decision.
DEFAULT_RANK_TOL = 1e-10


class FlopCounter(object):
    """Running tally of analytic flop counts of the dense kernels."""

    def __init__(self):
        self.total = 0

    def add(self, flops):
        self.total += int(flops)

    def reset(self):
        self.total = 0


#: Global tally; factorization code snapshots it around a run. Kernels are
#: pure apart from this counter, which is why factorization is documented
#: as single-threaded.
FLOPS = FlopCounter()


def _as_matrix(a):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ShapeMismatchError(f"expected a 2-d array, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise ValueError("matrix contains NaN or Inf entries")
    return a


@dataclass
class CholeskyFactor:
    """Lower-triangular factor L with A = L L^T."""

    L: np.ndarray

    @property
    def size(self):
        return self.L.shape[0]


@dataclass
class PivotedQR:
    """Column-pivoted QR decomposition A[:, perm] = Q R.

    Q has orthonormal columns (m-by-k, or m-by-m when a full basis was
    requested), R is upper trapezoidal with |R_ii| non-increasing, and
    rank counts the diagonal entries above the relative truncation
    tolerance.
    """

    Q: np.ndarray
    R: np.ndarray
    perm: np.ndarray
    rank: int


def matmul(a, b):
    """Matrix product with its 2*m*k*n flops added to the tally."""
    m, k = a.shape
    n = b.shape[1]
    FLOPS.add(2 * m * k * n)
    return a @ b


def cholesky(A):
    """Cholesky factorization of a dense SPD matrix.

    Left-looking column algorithm. A pivot below CHOL_PIVOT_RTOL times the
    largest diagonal entry raises NotSPDError; in exact arithmetic the
    factorization pipeline only ever feeds SPD blocks here, so a breakdown
    signals an invalid input matrix.
    """
    A = _as_matrix(A)
    m, n = A.shape
    if m != n:
        raise ShapeMismatchError(f"cholesky needs a square matrix, got {A.shape}")
    if m > 0:
        scale = np.abs(A).max()
        if scale > 0:
            asym = np.abs(A - A.T).max()
            if asym > 1e-12 * scale:
                raise ValueError(f"matrix is not symmetric (asymmetry {asym:.2e})")
    L = np.zeros_like(A)
    diag_floor = CHOL_PIVOT_RTOL * max(A.diagonal().max(initial=0.0), 0.0)
    for j in range(m):
        d = A[j, j] - L[j, :j] @ L[j, :j]
        if d <= diag_floor or not np.isfinite(d):
            raise NotSPDError(f"non-positive pivot {d:.3e} at index {j}")
        d = np.sqrt(d)
        L[j, j] = d
        if j + 1 < m:
            L[j + 1 :, j] = (A[j + 1 :, j] - L[j + 1 :, :j] @ L[j, :j]) / d
    FLOPS.add(m ** 3 // 3)
    return CholeskyFactor(L)


def tri_solve(chol, B, mode="left"):
    """Triangular solve against a Cholesky factor.

    mode selects the product:
      "left"    -> L^{-1} B
      "left_t"  -> L^{-T} B
      "right_t" -> B L^{-T}
    """
    L = chol.L if isinstance(chol, CholeskyFactor) else np.asarray(chol, dtype=float)
    B = np.asarray(B, dtype=float)
    vec = B.ndim == 1
    if vec:
        B = B[:, None]
    m = L.shape[0]
    if mode in ("left", "left_t"):
        if B.shape[0] != m:
            raise ShapeMismatchError(f"solve: L is {L.shape}, B is {B.shape}")
        FLOPS.add(m * m * B.shape[1])
        X = solve_triangular(L, B, lower=True, trans="T" if mode == "left_t" else "N")
    elif mode == "right_t":
        if B.shape[1] != m:
            raise ShapeMismatchError(f"solve: L is {L.shape}, B is {B.shape}")
        FLOPS.add(m * m * B.shape[0])
        # B L^{-T} = (L^{-1} B^T)^T
        X = solve_triangular(L, B.T, lower=True, trans="N").T
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return X[:, 0] if vec else X


def pivoted_qr(A, rank_tol=DEFAULT_RANK_TOL, full_q=False):
    """Householder QR with classical column-norm pivoting.

    Column norms are downdated after each reflection and recomputed
    exactly once a downdate has cancelled about half the digits. The
    numerical rank is the number of diagonal entries of R larger than
    rank_tol * |R_00| (zero for an empty input). With full_q=True, Q is
    completed to an m-by-m orthogonal matrix whose trailing columns span
    the orthogonal complement of the range.
    """
    A = _as_matrix(A)
    m, c = A.shape
    kmax = min(m, c)
    R = A.copy()
    perm = np.arange(c)
    W = np.zeros((m, kmax))
    taus = np.zeros(kmax)
    norms2 = (R * R).sum(axis=0)
    ref2 = norms2.copy()
    abs_floor = np.finfo(float).eps * max(np.abs(A).max(initial=0.0), 1.0)
    ksteps = 0
    for k in range(kmax):
        piv = k + int(np.argmax(norms2[k:]))
        if norms2[piv] <= abs_floor ** 2:
            # remaining columns are numerically zero
            R[k:, k:] = 0.0
            break
        if piv != k:
            R[:, [k, piv]] = R[:, [piv, k]]
            perm[[k, piv]] = perm[[piv, k]]
            norms2[[k, piv]] = norms2[[piv, k]]
            ref2[[k, piv]] = ref2[[piv, k]]
        x = R[k:, k]
        nrm = np.linalg.norm(x)
        if nrm <= abs_floor:
            R[k:, k:] = 0.0
            break
        sign = -np.sign(x[0]) if x[0] != 0 else -1.0
        u1 = x[0] - sign * nrm
        w = x / u1
        w[0] = 1.0
        tau = -sign * u1 / nrm
        R[k:, k:] -= np.outer(tau * w, w @ R[k:, k:])
        R[k, k] = sign * nrm
        R[k + 1 :, k] = 0.0
        W[k:, k] = w
        taus[k] = tau
        ksteps = k + 1
        if k + 1 < c:
            norms2[k + 1 :] = np.maximum(norms2[k + 1 :] - R[k, k + 1 :] ** 2, 0.0)
            stale = norms2[k + 1 :] <= np.finfo(float).eps * ref2[k + 1 :]
            if stale.any():
                cols = k + 1 + np.nonzero(stale)[0]
                fresh = (R[k + 1 :, cols] ** 2).sum(axis=0)
                norms2[cols] = fresh
                ref2[cols] = np.maximum(fresh, abs_floor ** 2)
    FLOPS.add(2 * m * c * c)
    qcols = m if full_q else kmax
    Q = np.eye(m, qcols)
    for k in range(ksteps - 1, -1, -1):
        w = W[k:, k]
        Q[k:, :] -= np.outer(taus[k] * w, w @ Q[k:, :])
    R = np.triu(R[:kmax, :])
    diag = np.abs(np.diagonal(R))
    if diag.size == 0 or diag[0] == 0.0:
        rank = 0
    else:
        rank = int((diag > rank_tol * diag[0]).sum())
    return PivotedQR(Q=Q, R=R, perm=perm, rank=rank)
