import numpy as np
import pytest
import scipy.sparse as sp

from polyprec.basis import build_polynomial_basis
from polyprec.blockmatrix import BlockMatrix
from polyprec.errors import NotSPDError, ShapeMismatchError
from polyprec.factorization import (
    NodeState,
    RankTrace,
    compress_node,
    eliminate_node,
    factorize,
    merge_level,
)
from polyprec.partition import (
    build_general_hierarchy,
    build_nested_hierarchy,
    expand_to_unknowns,
)
from polyprec.problems import poisson7


def level1_setup(prob, nested=True, b=3, degree=1):
    builder = build_nested_hierarchy if nested else build_general_hierarchy
    hierarchy = builder(prob.grid, b)
    basis = build_polynomial_basis(prob.coords, degree, prob.components)
    nodes = {}
    unknowns = {}
    for cell in hierarchy.levels[0].cells:
        idx = expand_to_unknowns(cell, prob.grid)
        unknowns[cell.id] = idx
        nodes[cell.id] = NodeState(
            id=cell.id, full=idx.copy(), active=idx.copy(),
            phi=basis.Pi[idx].copy(), role=cell.role, kind=cell.kind,
        )
    M = BlockMatrix.from_csr(prob.matrix, unknowns)
    return hierarchy, basis, nodes, M


def two_node_setup(A, n0):
    n = A.shape[0]
    nodes = {
        0: NodeState(0, np.arange(n0), np.arange(n0), np.ones((n0, 1)), "interior", "cell3"),
        1: NodeState(1, np.arange(n0, n), np.arange(n0, n), np.ones((n - n0, 1)), "separator", "cell2"),
    }
    M = BlockMatrix.from_csr(sp.csr_matrix(A), {0: np.arange(n0), 1: np.arange(n0, n)})
    return nodes, M


class TestEliminate:
    def test_no_neighbors(self):
        A = np.diag([4.0, 9.0])
        nodes = {0: NodeState(0, np.arange(2), np.arange(2), np.ones((2, 1)), "interior", "cell3")}
        M = BlockMatrix.from_csr(sp.csr_matrix(A), {0: np.arange(2)})
        fac = eliminate_node(M, nodes, 0)
        assert np.allclose(fac.L, np.diag([2.0, 3.0]))
        assert fac.couplings == []
        assert M.block_keys() == []

    def test_identity_pivot_schur(self):
        rng = np.random.default_rng(0)
        C = rng.standard_normal((2, 3))
        D = np.eye(3) * 9.0
        A = np.block([[np.eye(2), C], [C.T, D]])
        nodes, M = two_node_setup(A, 2)
        eliminate_node(M, nodes, 0)
        assert np.allclose(M.get(1, 1), D - C.T @ C)

    def test_chain_matches_dense_schur(self):
        # 1-d chain of 8 unknowns split 4|4 against a dense Schur oracle
        A = (np.diag(np.full(8, 2.0)) + np.diag(np.full(7, -1.0), 1)
             + np.diag(np.full(7, -1.0), -1))
        nodes, M = two_node_setup(A, 4)
        eliminate_node(M, nodes, 0)
        S = A[4:, 4:] - A[4:, :4] @ np.linalg.solve(A[:4, :4], A[:4, 4:])
        assert np.abs(M.get(1, 1) - S).max() <= 1e-13

    def test_not_spd_propagates(self):
        A = np.diag([1.0, -1.0, 2.0])
        nodes, M = two_node_setup(A, 2)
        with pytest.raises(NotSPDError):
            eliminate_node(M, nodes, 0)

    def test_fill_blocks_created(self):
        # two separators coupled only through the eliminated interior
        A = np.array([
            [4.0, 1.0, 1.0],
            [1.0, 4.0, 0.0],
            [1.0, 0.0, 4.0],
        ])
        nodes = {
            i: NodeState(i, np.array([i]), np.array([i]), np.ones((1, 1)),
                         "interior" if i == 0 else "separator", "cell3" if i == 0 else "cell2")
            for i in range(3)
        }
        M = BlockMatrix.from_csr(sp.csr_matrix(A), {i: np.array([i]) for i in range(3)})
        assert not M.has_block(1, 2)
        eliminate_node(M, nodes, 0)
        assert M.has_block(1, 2)
        assert np.allclose(M.get(1, 2), [[-0.25]])


def dense_with_factor(M, nodes, order, factor, pre_sizes):
    """Embed the post-compression trailing matrix into the pre-compression
    layout (identity on dropped coordinates) and form the block-diagonal
    congruence factor."""
    offs = {}
    pos = 0
    for i in order:
        offs[i] = pos
        pos += pre_sizes[i]
    n0 = pos
    Mfull = np.zeros((n0, n0))
    for i in order:
        for j in order:
            if M.has_block(i, j):
                blk = M.get(i, j)
                Mfull[offs[i]:offs[i] + blk.shape[0], offs[j]:offs[j] + blk.shape[1]] = blk
    nid = factor.node
    m = pre_sizes[nid]
    Mfull[offs[nid]:offs[nid] + m, offs[nid]:offs[nid] + m] = np.eye(m)
    B = np.eye(n0)
    B[offs[nid]:offs[nid] + m, offs[nid]:offs[nid] + m] = factor.L @ factor.Q
    return Mfull, B, offs, n0


class TestCompress:
    def test_isolated_node_degree0(self):
        # no couplings, degree-0 basis: the rank basis is L^T * ones -> rank 1
        A = np.diag([4.0, 9.0, 16.0])
        nodes = {0: NodeState(0, np.arange(3), np.arange(3), np.ones((3, 1)), "separator", "general")}
        M = BlockMatrix.from_csr(sp.csr_matrix(A), {0: np.arange(3)})
        fac = compress_node(M, nodes, 0)
        assert fac.retained == 1
        assert len(nodes[0].active) == 1
        assert np.allclose(M.get(0, 0), np.eye(1))

    def test_full_rank_congruence_exact(self):
        # when the rank basis spans everything the update is an exact congruence
        rng = np.random.default_rng(3)
        G = rng.standard_normal((6, 6))
        A = G @ G.T + 6 * np.eye(6)
        nodes, M = two_node_setup(A, 3)
        nodes[0].phi = np.eye(3)  # full basis forces rank 3
        dense0, _ = M.densify()
        pre_sizes = dict(M.sizes)
        fac = compress_node(M, nodes, 0)
        assert fac.retained == 3
        Mfull, B, _, _ = dense_with_factor(M, nodes, [0, 1], fac, pre_sizes)
        assert np.abs(B @ Mfull @ B.T - dense0).max() <= 1e-12 * np.abs(dense0).max()

    def _preservation_check(self, prob, degree, b, expect_shrink):
        hierarchy, basis, nodes, M = level1_setup(prob, degree=degree, b=b)
        target = next(c.id for c in hierarchy.levels[0].cells if c.kind == "cell2"
                      and all(lo > 0 for lo, _ in c.box))
        order = sorted(nodes)
        pre_sizes = dict(M.sizes)
        pre_phi = {i: nodes[i].phi.copy() for i in order}
        dense0, _ = M.densify(order=order)
        fac = compress_node(M, nodes, target)
        if expect_shrink:
            assert 0 < fac.retained < pre_sizes[target]
        Mfull, B, offs, n0 = dense_with_factor(M, nodes, order, fac, pre_sizes)
        Phi = np.zeros((n0, len(order) * basis.pi_cols))
        for k, i in enumerate(order):
            Phi[offs[i]:offs[i] + pre_sizes[i], k * basis.pi_cols:(k + 1) * basis.pi_cols] = pre_phi[i]
        lhs = dense0 @ Phi
        rhs = B @ (Mfull @ (B.T @ Phi))
        assert np.linalg.norm(lhs - rhs) <= 1e-10 * np.linalg.norm(lhs)

    def test_poisson_2cell_preserves_polynomials(self):
        # 9^3 face cells are small enough that the linear rank basis spans
        # them whole: the update is an exact congruence and the identity
        # M Phi = B M+ B^T Phi holds trivially
        self._preservation_check(poisson7(9), degree=1, b=3, expect_shrink=False)

    def test_poisson_2cell_shrinks_and_preserves(self):
        # with b = 5 a face cell holds 16 vertices and the constant basis
        # genuinely drops coordinates; the polynomial action must survive
        self._preservation_check(poisson7(15), degree=0, b=5, expect_shrink=True)

    def test_lowrank_mode_needs_rank(self):
        A = np.diag([4.0, 9.0])
        nodes = {0: NodeState(0, np.arange(2), np.arange(2), np.ones((2, 1)), "separator", "general")}
        M = BlockMatrix.from_csr(sp.csr_matrix(A), {0: np.arange(2)})
        with pytest.raises(ValueError):
            compress_node(M, nodes, 0, mode="lowrank")

    def test_lowrank_rank_clipped(self):
        A = np.diag([4.0, 9.0])
        nodes = {0: NodeState(0, np.arange(2), np.arange(2), np.ones((2, 1)), "separator", "general")}
        M = BlockMatrix.from_csr(sp.csr_matrix(A), {0: np.arange(2)})
        with pytest.warns(UserWarning):
            fac = compress_node(M, nodes, 0, mode="lowrank", forced_rank=5)
        assert fac.retained == 2

    def test_phi_update_shape(self):
        prob = poisson7(6)
        hierarchy, basis, nodes, M = level1_setup(prob, nested=False, degree=1)
        nid = sorted(nodes)[0]
        fac = compress_node(M, nodes, nid)
        assert nodes[nid].phi.shape == (fac.retained, basis.pi_cols)


class TestMerge:
    def test_phi_stacking_and_blocks(self):
        prob = poisson7(6)
        hierarchy, basis, nodes, M = level1_setup(prob, nested=False, b=3, degree=1)
        father = hierarchy.levels[0].father
        newM, newnodes = merge_level(M, nodes, father, hierarchy.levels[1].cells,
                                     prob.grid, basis.pi_cols)
        # single coarse box: actives concatenate in child id order
        assert len(newnodes) == 1
        top = newnodes[max(newnodes)]
        want = np.concatenate([nodes[c].active for c in sorted(nodes)])
        assert np.array_equal(top.active, want)
        assert top.phi.shape == (len(want), basis.pi_cols)
        # the merged diagonal block reproduces the permuted matrix
        dense, _ = newM.densify()
        perm = want
        assert np.allclose(dense, prob.matrix.toarray()[np.ix_(perm, perm)])

    def test_merged_diag_contains_children_couplings(self):
        prob = poisson7(6)
        hierarchy, basis, nodes, M = level1_setup(prob, nested=False, b=3, degree=0)
        father = hierarchy.levels[0].father
        c0, c1 = sorted(nodes)[:2]
        cross = M.get(c0, c1).copy()
        newM, newnodes = merge_level(M, nodes, father, hierarchy.levels[1].cells,
                                     prob.grid, basis.pi_cols)
        top = max(newnodes)
        n0 = len(nodes[c0].active)
        n1 = len(nodes[c1].active)
        diag = newM.get(top, top)
        assert np.allclose(diag[:n0, n0:n0 + n1], cross)


class TestFactorize:
    def test_exact_mode_matches_dense_solve(self):
        prob = poisson7(9)
        P = factorize(prob, scheme="nest-2-2", compression=False)
        rng = np.random.default_rng(1)
        b = rng.standard_normal(prob.n)
        x = P.apply_inverse(b)
        want = np.linalg.solve(prob.matrix.toarray(), b)
        assert np.linalg.norm(x - want) <= 1e-10 * np.linalg.norm(want)

    def test_exact_mode_reconstructs_matrix(self):
        prob = poisson7(7)
        P = factorize(prob, scheme="nest-2-2", compression=False)
        A = prob.matrix.toarray()
        cols = [P.apply_operator(e) for e in np.eye(prob.n)]
        assert np.abs(np.column_stack(cols) - A).max() <= 1e-11 * np.abs(A).max()

    def test_congruence_consistency_per_level(self):
        # after each exact-mode level, accumulated factors conjugating the
        # densified trailing matrix reconstruct A
        prob = poisson7(7)
        hierarchy, basis, nodes, M = level1_setup(prob, degree=0)
        A = prob.matrix.toarray()
        n = prob.n
        factors = []
        for t, level in enumerate(hierarchy.levels):
            if len(level.cells) == 1:
                break
            for nid in sorted(nodes):
                if nodes[nid].role == "interior" and len(nodes[nid].active):
                    factors.append(eliminate_node(M, nodes, nid))
            mid = np.eye(n)
            for i in sorted(nodes):
                if not len(nodes[i].active):
                    continue
                for j in sorted(nodes):
                    if len(nodes[j].active) and M.has_block(i, j):
                        mid[np.ix_(nodes[i].active, nodes[j].active)] = M.get(i, j)
            W = np.eye(n)
            for f in reversed(factors):
                for c in range(n):
                    f.mult_forward(W[:, c])
            rec = W @ mid @ W.T
            assert np.abs(rec - A).max() <= 1e-11 * np.abs(A).max()
            if t + 1 < len(hierarchy.levels):
                M, nodes = merge_level(M, nodes, hierarchy.levels[t].father,
                                       hierarchy.levels[t + 1].cells, prob.grid,
                                       basis.pi_cols)

    @pytest.mark.parametrize("scheme,degree", [
        ("nest-all-all", 0), ("nest-all-all", 2),
        ("nest-2-all", 1), ("nest-2-2", 2), ("gen-all-all", 0), ("gen-all-all", 1),
    ])
    def test_polynomial_preservation(self, scheme, degree):
        prob = poisson7(9)
        P = factorize(prob, scheme=scheme, degree=degree, skip_levels=0)
        Pi = P.basis.Pi
        APi = prob.matrix @ Pi
        AlPi = np.column_stack([P.apply_operator(Pi[:, c]) for c in range(Pi.shape[1])])
        assert np.linalg.norm(AlPi - APi) <= 1e-8 * np.linalg.norm(APi)

    def test_inverse_preserves_polynomial_solutions(self):
        prob = poisson7(11)
        P = factorize(prob, scheme="nest-all-all", degree=1)
        rng = np.random.default_rng(5)
        c = rng.standard_normal(P.basis.pi_cols)
        u = P.basis.Pi @ c
        x = P.apply_inverse(prob.matrix @ u)
        assert np.linalg.norm(x - u) <= 1e-8 * np.linalg.norm(u)

    def test_apply_inverse_of_operator_is_identity(self):
        prob = poisson7(8)
        P = factorize(prob, scheme="gen-all-all", degree=0)
        rng = np.random.default_rng(2)
        x = rng.standard_normal(prob.n)
        y = P.apply_inverse(P.apply_operator(x))
        assert np.linalg.norm(y - x) <= 1e-10 * np.linalg.norm(x)

    def test_spd_on_random_vectors(self):
        prob = poisson7(8)
        P = factorize(prob, scheme="gen-all-all", degree=0)
        rng = np.random.default_rng(3)
        for _ in range(100):
            x = rng.standard_normal(prob.n)
            assert x @ P.apply_operator(x) > 0
            assert x @ P.apply_inverse(x) > 0

    def test_zero_maps_to_zero(self):
        prob = poisson7(8)
        P = factorize(prob, scheme="gen-all-all", degree=0)
        assert np.linalg.norm(P.apply_inverse(np.zeros(prob.n))) == 0.0

    def test_shape_mismatch(self):
        prob = poisson7(8)
        P = factorize(prob, scheme="gen-all-all", degree=0)
        with pytest.raises(ShapeMismatchError):
            P.apply_inverse(np.zeros(prob.n + 1))

    def test_degree0_rank_bound(self):
        # with a scalar constant basis, retained rank <= neighbors + 1 <= 7
        # for the 7-point stencil box partition
        prob = poisson7(12)
        P = factorize(prob, scheme="gen-all-all", degree=0, b=3)
        for lv in P.stats["per_level"]:
            assert all(r <= 7 for r in lv["ranks"])

    def test_determinism(self):
        prob = poisson7(9)
        P1 = factorize(prob, scheme="gen-all-all", degree=1)
        P2 = factorize(prob, scheme="gen-all-all", degree=1)
        assert P1.rank_trace == P2.rank_trace
        x = np.random.default_rng(4).standard_normal(prob.n)
        assert np.array_equal(P1.apply_inverse(x), P2.apply_inverse(x))

    def test_congruence_consistency_compressed(self):
        # the compressed operator reconstructs A on the basis columns
        prob = poisson7(9)
        P = factorize(prob, scheme="gen-all-all", degree=1, b=3)
        Pi = P.basis.Pi
        lhs = np.column_stack([P.apply_operator(Pi[:, c]) for c in range(Pi.shape[1])])
        rhs = prob.matrix @ Pi
        assert np.linalg.norm(lhs - rhs) <= 1e-9 * np.linalg.norm(rhs)

    def test_unknown_scheme(self):
        prob = poisson7(8)
        with pytest.raises(ValueError):
            factorize(prob, scheme="bogus")


class TestRandomizedConfigurations:
    def test_invariants_across_random_configs(self):
        # seeded sweep over grid shapes, schemes, degrees, and block sizes:
        # the polynomial action is preserved, the operator pair is SPD, and
        # inverse composed with operator is the identity
        rng = np.random.default_rng(2024)
        schemes = ["nest-all-all", "nest-2-all", "nest-2-2", "gen-all-all"]
        for trial in range(8):
            dims = tuple(int(d) for d in rng.integers(5, 11, size=3))
            scheme = schemes[trial % 4]
            degree = int(rng.integers(0, 3))
            b = int(rng.integers(2, 4)) if scheme == "gen-all-all" else 3
            prob = poisson7(*dims)
            P = factorize(prob, scheme=scheme, degree=degree, b=b, skip_levels=1)
            Pi = P.basis.Pi
            APi = prob.matrix @ Pi
            AlPi = np.column_stack(
                [P.apply_operator(Pi[:, c]) for c in range(Pi.shape[1])]
            )
            assert np.linalg.norm(AlPi - APi) <= 1e-8 * np.linalg.norm(APi), (
                dims, scheme, degree, b)
            x = rng.standard_normal(prob.n)
            assert x @ P.apply_operator(x) > 0
            y = P.apply_inverse(P.apply_operator(x))
            assert np.linalg.norm(y - x) <= 1e-9 * np.linalg.norm(x)


class TestDegenerateShapes:
    def test_flat_grid_single_z_layer(self):
        # 2-d problems enter as nz = 1 grids and use the same code paths
        from polyprec.problems import darcy_tpfa, synth_perm_field

        fld = synth_perm_field((12, 12, 1), layers=2, contrast=100.0, seed=0)
        prob = darcy_tpfa(fld)
        for scheme in ("nest-2-2", "gen-all-all"):
            P = factorize(prob, scheme=scheme, degree=1)
            b = np.random.default_rng(0).uniform(-1, 1, prob.n)
            x = P.apply_inverse(P.apply_operator(b))
            assert np.linalg.norm(x - b) <= 1e-10 * np.linalg.norm(b)

    def test_vector_problem_on_general_partition(self):
        from polyprec.problems import elasticity_hex_beam

        prob = elasticity_hex_beam(3)
        P = factorize(prob, scheme="gen-all-all", degree=1)
        Pi = P.basis.Pi
        APi = prob.matrix @ Pi
        AlPi = np.column_stack([P.apply_operator(Pi[:, c]) for c in range(Pi.shape[1])])
        assert np.linalg.norm(AlPi - APi) <= 1e-8 * max(np.linalg.norm(APi), 1.0)


class TestLowRankReplay:
    def test_structural_identity(self):
        prob = poisson7(9)
        poly = factorize(prob, scheme="gen-all-all", degree=0)
        low = factorize(prob, scheme="gen-all-all", degree=0,
                        mode="lowrank", rank_trace=poly.rank_trace)
        assert len(low.factors) == len(poly.factors)
        assert low.stats["flops_apply"] == poly.stats["flops_apply"]
        got = [(f.idx.shape, getattr(f, "retained", None)) for f in low.factors]
        want = [(f.idx.shape, getattr(f, "retained", None)) for f in poly.factors]
        assert got == want

    def test_divergent_trace_aborts(self):
        prob = poisson7(9)
        poly = factorize(prob, scheme="gen-all-all", degree=0)
        bad = RankTrace(poly.rank_trace.entries[:-1])  # one entry short
        with pytest.raises(RuntimeError):
            factorize(prob, scheme="gen-all-all", degree=0,
                      mode="lowrank", rank_trace=bad)
        shifted = RankTrace([(lv, nid + 1, r) for lv, nid, r in poly.rank_trace.entries])
        with pytest.raises(RuntimeError):
            factorize(prob, scheme="gen-all-all", degree=0,
                      mode="lowrank", rank_trace=shifted)

    def test_trace_missing(self):
        prob = poisson7(9)
        with pytest.raises(ValueError):
            factorize(prob, scheme="gen-all-all", degree=0, mode="lowrank")

    def test_trace_file_roundtrip(self, tmp_path):
        prob = poisson7(9)
        poly = factorize(prob, scheme="gen-all-all", degree=0)
        path = tmp_path / "trace.json"
        poly.rank_trace.save(path)
        loaded = RankTrace.load(path)
        assert loaded == poly.rank_trace
