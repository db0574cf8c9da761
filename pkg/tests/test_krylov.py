import numpy as np
import pytest

from polyprec.errors import IndefiniteDetectedError
from polyprec.factorization import factorize
from polyprec.krylov import estimate_extreme_eigs, pcg
from polyprec.problems import poisson7


class TestPCG:
    def test_identity_one_iteration(self):
        b = np.arange(1.0, 6.0)
        x, rep = pcg(np.eye(5), b)
        assert rep.iterations == 1
        assert rep.converged
        assert np.allclose(x, b)

    def test_zero_rhs(self):
        x, rep = pcg(np.eye(4), np.zeros(4))
        assert rep.iterations == 0
        assert rep.residual_history == [0.0]
        assert rep.converged
        assert np.allclose(x, 0.0)

    def test_exact_preconditioner_two_iterations(self):
        prob = poisson7(11)
        P = factorize(prob, scheme="nest-2-2", compression=False)
        rng = np.random.default_rng(0)
        b = rng.uniform(-1, 1, prob.n)
        x, rep = pcg(lambda v: prob.matrix @ v, b, precond=P.apply_inverse, tol=1e-10)
        assert rep.converged
        assert rep.iterations <= 2

    def test_history_shape_and_first_entry(self):
        prob = poisson7(6)
        rng = np.random.default_rng(1)
        b = rng.standard_normal(prob.n)
        x, rep = pcg(lambda v: prob.matrix @ v, b, tol=1e-8)
        assert rep.residual_history[0] == 1.0
        assert len(rep.residual_history) == rep.iterations + 1
        assert rep.converged
        assert rep.final_rel_residual <= 1e-8

    def test_final_residual_matches_recomputation(self):
        prob = poisson7(8)
        rng = np.random.default_rng(2)
        b = rng.standard_normal(prob.n)
        x, rep = pcg(lambda v: prob.matrix @ v, b, tol=1e-9)
        check = np.linalg.norm(b - prob.matrix @ x) / np.linalg.norm(b)
        assert abs(rep.final_rel_residual - check) <= 1e-12

    def test_unpreconditioned_matches_direct(self):
        prob = poisson7(6)
        rng = np.random.default_rng(3)
        b = rng.standard_normal(prob.n)
        x, rep = pcg(lambda v: prob.matrix @ v, b, tol=1e-12)
        want = np.linalg.solve(prob.matrix.toarray(), b)
        assert np.linalg.norm(x - want) <= 1e-9 * np.linalg.norm(want)

    def test_indefinite_operator_detected(self):
        A = np.diag([1.0, -1.0])
        with pytest.raises(IndefiniteDetectedError):
            pcg(A, np.array([1.0, 1.0]))

    def test_indefinite_preconditioner_detected(self):
        A = np.eye(3) * 2.0
        M = np.diag([1.0, 1.0, -1.0])
        with pytest.raises(IndefiniteDetectedError):
            pcg(A, np.array([0.1, 0.1, 1.0]), precond=M)

    def test_maxit_reported_unconverged(self):
        prob = poisson7(8)
        rng = np.random.default_rng(4)
        b = rng.standard_normal(prob.n)
        x, rep = pcg(lambda v: prob.matrix @ v, b, tol=1e-14, maxit=3)
        assert not rep.converged
        assert rep.iterations == 3

    def test_true_residual_recompute_guards_drift(self):
        prob = poisson7(10)
        rng = np.random.default_rng(5)
        b = rng.standard_normal(prob.n)
        x, rep = pcg(lambda v: prob.matrix @ v, b, tol=1e-10, true_residual_every=10)
        assert rep.converged
        assert np.linalg.norm(b - prob.matrix @ x) / np.linalg.norm(b) <= 1e-10


class TestLanczos:
    def test_identity(self):
        hi, lo = estimate_extreme_eigs(np.eye(7), 7, iters=10)
        assert abs(hi - 1.0) <= 1e-12
        assert abs(lo - 1.0) <= 1e-12

    def test_full_krylov_diagonal(self):
        A = np.diag(np.arange(1.0, 11.0))
        hi, lo = estimate_extreme_eigs(A, 10, iters=10)
        assert abs(hi - 10.0) <= 1e-10
        assert abs(lo - 1.0) <= 1e-10

    def test_indefinite_detected(self):
        A = np.diag([1.0, -5.0, 2.0])
        with pytest.raises(IndefiniteDetectedError):
            estimate_extreme_eigs(A, 3, iters=3, seed=1)

    def test_poisson_extremes_match_dense(self):
        prob = poisson7(5)
        w = np.linalg.eigvalsh(prob.matrix.toarray())
        hi, lo = estimate_extreme_eigs(lambda v: prob.matrix @ v, prob.n, iters=125)
        assert abs(hi - w[-1]) <= 1e-8 * w[-1]
        assert abs(lo - w[0]) <= 1e-6 * w[0]

    def test_preconditioning_shrinks_condition_number(self):
        prob = poisson7(24)
        A = prob.matrix
        hi0, lo0 = estimate_extreme_eigs(lambda v: A @ v, prob.n, iters=100)
        P = factorize(prob, scheme="nest-2-2", degree=2)
        op = lambda v: P.apply_half_inverse(A @ P.apply_half_inverse_t(v))
        hi1, lo1 = estimate_extreme_eigs(op, prob.n, iters=40)
        assert (hi1 / lo1) <= (hi0 / lo0) / 100.0

    def test_report_serializable(self):
        import dataclasses
        import json

        prob = poisson7(4)
        _, rep = pcg(lambda v: prob.matrix @ v, np.ones(prob.n), tol=1e-8)
        text = json.dumps(dataclasses.asdict(rep))
        assert json.loads(text)["iterations"] == rep.iterations
