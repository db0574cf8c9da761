"""Preconditioned Conjugate Gradient and Lanczos extreme-eigenvalue estimates."""

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import IndefiniteDetectedError, ShapeMismatchError


@dataclass
class SolveReport:
    """Outcome of one PCG solve.

    residual_history holds relative 2-norm residuals, one entry per
    iteration plus the initial 1.0 (0.0 for a zero right-hand side);
    final_rel_residual is recomputed from scratch after the loop.
    """

    iterations: int
    residual_history: list = field(default_factory=list)
    converged: bool = False
    wall_time: float = 0.0
    final_rel_residual: float = 0.0


def _as_linop(op):
    if callable(op):
        return op
    return lambda x: op @ x


def pcg(matvec, b, precond=None, tol=1e-10, maxit=5000, true_residual_every=50):
    """Conjugate Gradient on an SPD operator with an SPD preconditioner.

    Stops when the relative 2-norm residual drops below tol; the true
    residual is recomputed every true_residual_every iterations (and at
    any tentative convergence) to guard against recurrence drift.

    Raises IndefiniteDetectedError when a non-positive curvature direction
    or a non-positive preconditioned inner product shows up, which signals
    that the operator or the preconditioner is not SPD.
    """
    A = _as_linop(matvec)
    M = _as_linop(precond) if precond is not None else (lambda x: x)
    b = np.asarray(b, dtype=float)
    if b.ndim != 1:
        raise ShapeMismatchError(f"right-hand side must be a vector, got {b.shape}")
    t0 = time.perf_counter()
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b), SolveReport(
            iterations=0, residual_history=[0.0], converged=True,
            wall_time=time.perf_counter() - t0, final_rel_residual=0.0,
        )
    x = np.zeros_like(b)
    r = b.copy()
    history = [1.0]
    z = M(r)
    rz = float(r @ z)
    if rz <= 0.0:
        raise IndefiniteDetectedError(f"initial r'Mr = {rz:.3e} is not positive")
    p = z.copy()
    converged = False
    it = 0
    while it < maxit:
        it += 1
        Ap = A(p)
        pAp = float(p @ Ap)
        if pAp <= 0.0:
            raise IndefiniteDetectedError(f"p'Ap = {pAp:.3e} at iteration {it}")
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        if it % true_residual_every == 0:
            r = b - A(x)
        rel = np.linalg.norm(r) / bnorm
        if rel <= tol:
            r = b - A(x)
            rel = np.linalg.norm(r) / bnorm
            history.append(rel)
            if rel <= tol:
                converged = True
                break
        else:
            history.append(rel)
        z = M(r)
        rz_new = float(r @ z)
        if rz_new <= 0.0:
            raise IndefiniteDetectedError(f"r'Mr = {rz_new:.3e} at iteration {it}")
        beta = rz_new / rz
        rz = rz_new
        p = z + beta * p
    final = float(np.linalg.norm(b - A(x)) / bnorm)
    return x, SolveReport(
        iterations=it,
        residual_history=history,
        converged=converged and final <= tol,
        wall_time=time.perf_counter() - t0,
        final_rel_residual=final,
    )


def estimate_extreme_eigs(op, dim, iters=60, seed=0):
    """Lanczos estimates of the extreme eigenvalues of an SPD operator.

    Runs `iters` Lanczos steps with full reorthogonalization from a random
    seeded start vector and returns the largest and smallest Ritz values.
    """
    A = _as_linop(op)
    rng = np.random.default_rng(seed)
    steps = min(max(1, iters), dim)
    V = np.empty((steps, dim))
    V[0] = rng.standard_normal(dim)
    V[0] /= np.linalg.norm(V[0])
    alphas = []
    betas = []
    scale = None
    for j in range(steps):
        w = A(V[j])
        alpha = float(V[j] @ w)
        if alpha <= 0.0:
            raise IndefiniteDetectedError(f"v'Av = {alpha:.3e} is not positive")
        alphas.append(alpha)
        if scale is None:
            scale = abs(alpha)
        w = w - alpha * V[j]
        if j > 0:
            w = w - betas[-1] * V[j - 1]
        # full reorthogonalization, twice for good measure
        Vm = V[: j + 1]
        for _ in range(2):
            w = w - Vm.T @ (Vm @ w)
        beta = float(np.linalg.norm(w))
        if j == steps - 1 or beta <= 1e-14 * scale:
            break
        betas.append(beta)
        V[j + 1] = w / beta
    if betas:
        vals = eigh_tridiagonal(
            np.asarray(alphas), np.asarray(betas), eigvals_only=True
        )
    else:
        vals = np.asarray(alphas)
    return float(vals.max()), float(vals.min())
