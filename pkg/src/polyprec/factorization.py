"""Hierarchical approximate Cholesky factorization with polynomial preservation.

The factorization walks a partition hierarchy level by level. Interior nodes
are eliminated exactly by block Cholesky; selected separator nodes are then
compressed: the node block row is scaled by the inverse Cholesky factor of
its diagonal block, an orthogonal basis is computed for the scaled couplings
filtered through the per-node polynomial bases, and the component of the
couplings orthogonal to that basis is dropped. Dropping it leaves the action
of the matrix on piecewise-polynomial vectors exactly unchanged and keeps
the trailing matrix SPD, so the recursion never breaks. After each level,
sibling nodes merge into their father and the per-node polynomial bases are
stacked, which keeps their column count fixed across levels.

The result is an ordered list of elementary factors F_1 .. F_m with
A approx= F_1 ... F_m F_m^T ... F_1^T; applying the inverse is a forward
sweep of factor inverses followed by a backward sweep of their transposes.
"""

import json
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .basis import build_polynomial_basis
from .blockmatrix import BlockMatrix
from .densela import DEFAULT_RANK_TOL, FLOPS, cholesky, matmul, pivoted_qr, tri_solve
from .errors import ShapeMismatchError
from .partition import build_general_hierarchy, build_nested_hierarchy, expand_to_unknowns

SCHEMES = ("nest-all-all", "nest-2-all", "nest-2-2", "gen-all-all")
MODES = ("polynomial", "lowrank", "exact")

# Cell kinds whose interactions each scheme compresses. Corner cells carry a
# single unknown so compressing them changes nothing; they are skipped.
COMPRESS_KINDS = {
    "nest-all-all": ("cell1", "cell2"),
    "nest-2-all": ("cell2",),
    "nest-2-2": ("cell2",),
    "gen-all-all": ("general",),
}

# For nest-2-2, couplings to adjacent corner/edge cells enter the rank basis
# unfiltered, so those interactions are retained exactly and only the
# (mostly face-to-face) remainder is compressed.
UNFILTERED_KINDS = {"nest-2-2": ("cell0", "cell1")}


def default_b(scheme, degree):
    """Default level-1 cell side: 3 for nested schemes, 3 + degree for the
    general scheme so boxes stay larger than their compressed rank."""
    return 3 + degree if scheme == "gen-all-all" else 3


def default_skip_levels(scheme):
    """Nested schemes skip compression while nodes are still small."""
    return 0 if scheme == "gen-all-all" else 2


@dataclass
class NodeState:
    """A partition cell with its active unknowns and polynomial basis."""

    id: int
    full: np.ndarray     # all unknown ids that ever belonged to the cell
    active: np.ndarray   # global ids of the not-yet-eliminated unknowns
    phi: np.ndarray      # |active| x pi restriction of the (updated) basis
    role: str
    kind: str


class RankTrace(object):
    """Recorded (level, node, retained rank) triples of a compression run.

    A polynomial-mode run records one entry per compression; replaying the
    trace forces the same ranks onto a run that builds its orthogonal bases
    from the raw couplings instead, producing the rank-revealing comparison
    operator with identical costs.
    """

    def __init__(self, entries=None):
        self.entries = list(entries or [])

    def append(self, level, node, rank):
        self.entries.append((int(level), int(node), int(rank)))

    def to_json(self):
        return json.dumps({"entries": [list(e) for e in self.entries]})

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        return cls([tuple(e) for e in data["entries"]])

    def save(self, path):
        with open(path, "w") as f:
            f.write(self.to_json())

    @classmethod
    def load(cls, path):
        with open(path) as f:
            return cls.from_json(f.read())

    def __len__(self):
        return len(self.entries)

    def __eq__(self, other):
        return isinstance(other, RankTrace) and self.entries == other.entries


class EliminationFactor(object):
    """Exact block elimination of one interior node.

    Stores the Cholesky factor L of the node's diagonal block and, per
    neighbor, the coupling E_N = A_NB L^{-T} present at elimination time.
    """

    def __init__(self, node, idx, L, couplings):
        self.node = node
        self.idx = np.asarray(idx, dtype=np.intp)
        self.L = L
        self.couplings = [(np.asarray(i, dtype=np.intp), E) for i, E in couplings]
        self._Linv = solve_triangular(L, np.eye(L.shape[0]), lower=True)

    def solve_forward(self, x):
        zb = self._Linv @ x[self.idx]
        x[self.idx] = zb
        for idxn, E in self.couplings:
            x[idxn] -= E @ zb

    def solve_transpose(self, x):
        acc = x[self.idx].copy()
        for idxn, E in self.couplings:
            acc -= E.T @ x[idxn]
        x[self.idx] = self._Linv.T @ acc

    def mult_transpose(self, x):
        acc = self.L.T @ x[self.idx]
        for idxn, E in self.couplings:
            acc += E.T @ x[idxn]
        x[self.idx] = acc

    def mult_forward(self, x):
        xb = x[self.idx].copy()
        for idxn, E in self.couplings:
            x[idxn] += E @ xb
        x[self.idx] = self.L @ xb

    def apply_flops(self):
        m = len(self.idx)
        c = sum(len(i) for i, _ in self.couplings)
        return 4 * m * m + 4 * m * c


class CompressionFactor(object):
    """One compression: the block-diagonal factor L Q on the node's actives.

    Q is the full orthogonal basis from the pivoted QR of the filtered (or
    raw) interaction matrix; the first `retained` coordinates of the rotated
    node stay coupled, the rest become inert.
    """

    def __init__(self, node, idx, L, Q, retained):
        self.node = node
        self.idx = np.asarray(idx, dtype=np.intp)
        self.L = L
        self.Q = Q
        self.retained = int(retained)
        self._LQ = L @ Q
        self._inv = Q.T @ solve_triangular(L, np.eye(L.shape[0]), lower=True)

    def solve_forward(self, x):
        x[self.idx] = self._inv @ x[self.idx]

    def solve_transpose(self, x):
        x[self.idx] = self._inv.T @ x[self.idx]

    def mult_transpose(self, x):
        x[self.idx] = self._LQ.T @ x[self.idx]

    def mult_forward(self, x):
        x[self.idx] = self._LQ @ x[self.idx]

    def apply_flops(self):
        m = len(self.idx)
        return 4 * m * m


class DenseFactor(object):
    """Exact Cholesky of whatever remains at the top of the hierarchy."""

    def __init__(self, idx, L):
        self.node = None
        self.idx = np.asarray(idx, dtype=np.intp)
        self.L = L
        self._Linv = solve_triangular(L, np.eye(L.shape[0]), lower=True)

    def solve_forward(self, x):
        x[self.idx] = self._Linv @ x[self.idx]

    def solve_transpose(self, x):
        x[self.idx] = self._Linv.T @ x[self.idx]

    def mult_transpose(self, x):
        x[self.idx] = self.L.T @ x[self.idx]

    def mult_forward(self, x):
        x[self.idx] = self.L @ x[self.idx]

    def apply_flops(self):
        m = len(self.idx)
        return 4 * m * m


class Preconditioner(object):
    """Ordered elementary factors representing an SPD operator close to A.

    With W the product of the factors, the operator is A_approx = W W^T;
    apply_inverse computes W^{-T} W^{-1} x and apply_operator computes
    W W^T x. Both are exact, deterministic linear maps. The finished object
    is immutable and safe to share across threads.
    """

    def __init__(self, n, factors, stats, rank_trace, basis, scheme, degree, mode):
        self.n = n
        self.factors = factors
        self.stats = stats
        self.rank_trace = rank_trace
        self.basis = basis
        self.scheme = scheme
        self.degree = degree
        self.mode = mode

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise ShapeMismatchError(f"expected a vector of length {self.n}, got {x.shape}")
        return x.copy()

    def apply_half_inverse(self, x):
        """W^{-1} x: the forward sweep of factor inverses."""
        y = self._check(x)
        for f in self.factors:
            f.solve_forward(y)
        return y

    def apply_half_inverse_t(self, x):
        """W^{-T} x: the backward sweep of transposed factor inverses."""
        y = self._check(x)
        for f in reversed(self.factors):
            f.solve_transpose(y)
        return y

    def apply_inverse(self, x):
        """Solve A_approx y = x."""
        y = self._check(x)
        for f in self.factors:
            f.solve_forward(y)
        for f in reversed(self.factors):
            f.solve_transpose(y)
        return y

    def apply_operator(self, x):
        """Multiply A_approx x."""
        y = self._check(x)
        for f in self.factors:
            f.mult_transpose(y)
        for f in reversed(self.factors):
            f.mult_forward(y)
        return y

    def stats_json(self):
        return json.dumps(self.stats, indent=1, sort_keys=True)


def eliminate_node(M, nodes, nid):
    """Eliminate an interior node: record G = [[L, 0], [E, I]] and apply the
    Schur complement update to every pair of its neighbors."""
    node = nodes[nid]
    L = cholesky(M.get(nid, nid))
    nbrs = M.neighbors(nid)
    E = {}
    couplings = []
    for nb in nbrs:
        E[nb] = tri_solve(L, M.get(nb, nid), "right_t")
        couplings.append((nodes[nb].active.copy(), E[nb]))
    for a, ni in enumerate(nbrs):
        for nj in nbrs[a:]:
            upd = matmul(E[ni], E[nj].T)
            if ni == nj:
                upd = 0.5 * (upd + upd.T)
            M.add(ni, nj, -upd)
    M.drop_node(nid)
    M.resize_node(nid, 0)
    fac = EliminationFactor(nid, node.active, L.L, couplings)
    node.active = node.active[:0]
    node.phi = node.phi[:0, :]
    return fac


def compress_node(M, nodes, nid, mode="polynomial", rank_tol=DEFAULT_RANK_TOL,
                  unfiltered_kinds=(), forced_rank=None):
    """Compress the interactions of one node.

    Polynomial mode builds the rank basis from [L^T Phi_B | Mhat_N Phi_N ...]
    so the dropped coupling components annihilate every piecewise-polynomial
    vector; couplings to nodes whose kind is in unfiltered_kinds enter whole
    and are therefore retained exactly. Low-rank mode builds the basis from
    the raw scaled couplings and truncates at forced_rank, which replays the
    ranks of a previous polynomial run. Either way the node's diagonal block
    becomes the identity on the retained coordinates, its couplings shrink to
    `retained` rows, and its basis is updated to Q1^T L^T Phi_B.
    """
    node = nodes[nid]
    m = len(node.active)
    L = cholesky(M.get(nid, nid))
    nbrs = M.neighbors(nid)
    Mhat = {nb: tri_solve(L, M.get(nid, nb), "left") for nb in nbrs}
    LtPhi = matmul(L.L.T, node.phi)
    if mode == "polynomial":
        blocks = [LtPhi]
        for nb in nbrs:
            if nodes[nb].kind in unfiltered_kinds:
                blocks.append(Mhat[nb])
            else:
                blocks.append(matmul(Mhat[nb], nodes[nb].phi))
        N = np.hstack(blocks)
        qr = pivoted_qr(N, rank_tol=rank_tol, full_q=True)
        r = qr.rank
    elif mode == "lowrank":
        if forced_rank is None:
            raise ValueError("low-rank compression needs a forced rank")
        N = np.hstack([Mhat[nb] for nb in nbrs]) if nbrs else np.zeros((m, 0))
        qr = pivoted_qr(N, rank_tol=rank_tol, full_q=True)
        r = int(forced_rank)
        if r > m:
            warnings.warn(f"forced rank {r} exceeds node size {m}; clipping")
            r = m
    else:
        raise ValueError(f"unknown compression mode {mode!r}")
    Q1 = qr.Q[:, :r]
    fac = CompressionFactor(nid, node.active, L.L, qr.Q, r)
    new_blocks = {nb: matmul(Q1.T, Mhat[nb]) for nb in nbrs}
    M.drop_node(nid)
    M.resize_node(nid, r)
    if r > 0:
        M.set(nid, nid, np.eye(r))
        for nb in nbrs:
            M.set(nid, nb, new_blocks[nb])
    node.phi = matmul(Q1.T, LtPhi)
    node.active = node.active[:r]
    return fac


def merge_level(M, nodes, father_map, next_cells, grid, pi_cols):
    """Merge sibling nodes into their fathers for the next level.

    Father actives and bases are the concatenation of their children's, in
    ascending child id order; blocks of the trailing matrix are re-keyed to
    father ids with children placed at their concatenation offsets.
    """
    children = {}
    for cid, fid in father_map.items():
        children.setdefault(fid, []).append(cid)
    new_nodes = {}
    sizes = {}
    offsets = {}
    for cell in next_cells:
        fid = cell.id
        ch = sorted(children.get(fid, []))
        pos = 0
        for c in ch:
            offsets[c] = (fid, pos)
            pos += len(nodes[c].active)
        parts_a = [nodes[c].active for c in ch]
        parts_p = [nodes[c].phi for c in ch]
        parts_f = [nodes[c].full for c in ch]
        new_nodes[fid] = NodeState(
            id=fid,
            full=np.concatenate(parts_f) if parts_f else np.empty(0, dtype=np.intp),
            active=np.concatenate(parts_a) if parts_a else np.empty(0, dtype=np.intp),
            phi=np.vstack(parts_p) if parts_p else np.zeros((0, pi_cols)),
            role=cell.role,
            kind=cell.kind,
        )
        sizes[fid] = pos
    newM = BlockMatrix(sizes)
    for (a, b) in M.block_keys():
        blk = M.get(a, b)
        if blk.size == 0:
            continue
        fa, oa = offsets[a]
        fb, ob = offsets[b]
        sa, sb = blk.shape
        if not newM.has_block(fa, fb):
            newM.set(fa, fb, np.zeros((sizes[fa], sizes[fb])))
        if fa == fb:
            tgt = newM.get(fa, fa)
            tgt[oa : oa + sa, ob : ob + sb] = blk
            if a != b:
                tgt[ob : ob + sb, oa : oa + sa] = blk.T
        elif fa <= fb:
            newM.get(fa, fb)[oa : oa + sa, ob : ob + sb] = blk
        else:
            newM.get(fb, fa)[ob : ob + sb, oa : oa + sa] = blk.T
    return newM, new_nodes


def factorize(problem, scheme="nest-2-2", degree=1, b=None, skip_levels=None,
              compression=True, mode="polynomial", rank_tol=DEFAULT_RANK_TOL,
              rank_trace=None):
    """Build the hierarchical preconditioner for a problem instance.

    Per level: eliminate interior nodes (the general scheme has none),
    compress the scheme's selected separators in ascending cell id order,
    then merge into the next coarser partition. When the remaining active
    unknowns fit below the largest node size encountered, or the hierarchy
    reaches a single cell, the rest is factorized by one exact dense
    Cholesky. With compression=False the result is an exact factorization.

    mode="lowrank" replays the retained ranks recorded by a previous
    polynomial run (rank_trace) with orthogonal bases computed from the raw
    couplings; all block shapes outside the compression step match the
    polynomial run exactly.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    if mode == "exact":
        compression = False
    if mode == "lowrank" and compression and rank_trace is None:
        raise ValueError("mode='lowrank' requires the rank trace of a polynomial run")
    grid = problem.grid
    n = grid.n_unknowns
    if problem.matrix.shape != (n, n):
        raise ShapeMismatchError(
            f"matrix is {problem.matrix.shape} but grid has {n} unknowns"
        )
    if b is None:
        b = default_b(scheme, degree)
    if skip_levels is None:
        skip_levels = default_skip_levels(scheme)
    if scheme == "gen-all-all":
        hierarchy = build_general_hierarchy(grid, b)
    else:
        hierarchy = build_nested_hierarchy(grid, b)
    basis = build_polynomial_basis(problem.coords, degree, grid.components_per_vertex)
    Pi = basis.Pi

    nodes = {}
    unknowns = {}
    for cell in hierarchy.levels[0].cells:
        idx = expand_to_unknowns(cell, grid)
        unknowns[cell.id] = idx
        nodes[cell.id] = NodeState(
            id=cell.id, full=idx.copy(), active=idx.copy(),
            phi=Pi[idx, :].copy(), role=cell.role, kind=cell.kind,
        )
    M = BlockMatrix.from_csr(problem.matrix, unknowns)

    flops0 = FLOPS.total
    factors = []
    trace_out = RankTrace()
    replay = iter(rank_trace.entries) if rank_trace is not None else None
    compress_kinds = COMPRESS_KINDS[scheme]
    unfiltered = UNFILTERED_KINDS.get(scheme, ())
    max_seen = 0
    max_after_compress = 0
    peak_bytes = 0
    per_level = []

    for t, level in enumerate(hierarchy.levels):
        remaining = sum(len(nd.active) for nd in nodes.values())
        if remaining == 0:
            break
        if t > 0 and remaining < max_seen:
            break
        if len(level.cells) == 1:
            break
        max_seen = max(max_seen, max(len(nd.active) for nd in nodes.values()))
        stats_level = {"level": t + 1, "nodes": len(level.cells),
                       "eliminated": 0, "compressed": 0, "ranks": []}
        for nid in sorted(nodes):
            nd = nodes[nid]
            if nd.role == "interior" and len(nd.active):
                factors.append(eliminate_node(M, nodes, nid))
                stats_level["eliminated"] += 1
        if compression and (t + 1) > skip_levels:
            for nid in sorted(nodes):
                nd = nodes[nid]
                if nd.kind not in compress_kinds or len(nd.active) == 0:
                    continue
                forced = None
                if mode == "lowrank":
                    try:
                        lv, rec_nid, forced = next(replay)
                    except StopIteration:
                        raise RuntimeError(
                            "rank trace exhausted; structural divergence at "
                            f"level {t + 1}, node {nid}"
                        )
                    if (lv, rec_nid) != (t + 1, nid):
                        raise RuntimeError(
                            "rank trace divergence: expected "
                            f"{json.dumps([lv, rec_nid])}, reached "
                            f"{json.dumps([t + 1, nid])}"
                        )
                fac = compress_node(
                    M, nodes, nid,
                    mode=mode if mode == "lowrank" else "polynomial",
                    rank_tol=rank_tol, unfiltered_kinds=unfiltered,
                    forced_rank=forced,
                )
                factors.append(fac)
                trace_out.append(t + 1, nid, fac.retained)
                stats_level["ranks"].append(fac.retained)
                stats_level["compressed"] += 1
        sizes_now = [len(nd.active) for nd in nodes.values()]
        if sizes_now:
            max_after_compress = max(max_after_compress, max(sizes_now))
        per_level.append(stats_level)
        peak_bytes = max(peak_bytes, M.peak_bytes)
        if t + 1 < len(hierarchy.levels):
            old_live = M.live_bytes
            M, nodes = merge_level(
                M, nodes, hierarchy.levels[t].father,
                hierarchy.levels[t + 1].cells, grid, basis.pi_cols,
            )
            peak_bytes = max(peak_bytes, old_live + M.live_bytes)
        else:
            break

    rem_ids = [nid for nid in sorted(nodes) if len(nodes[nid].active)]
    if rem_ids:
        order_idx = np.concatenate([nodes[nid].active for nid in rem_ids])
        dense, _ = M.densify(order=rem_ids)
        Lf = cholesky(dense)
        factors.append(DenseFactor(order_idx, Lf.L))
        peak_bytes = max(peak_bytes, M.peak_bytes)

    if replay is not None:
        leftover = list(replay)
        if leftover:
            raise RuntimeError(
                f"rank trace has {len(leftover)} unreplayed entries; "
                f"first: {json.dumps(list(leftover[0]))}"
            )

    stats = {
        "n": n,
        "scheme": scheme,
        "degree": degree,
        "mode": mode if compression else "exact",
        "b": b,
        "skip_levels": skip_levels,
        "levels": len(per_level),
        "per_level": per_level,
        "max_node_size": max_after_compress,
        "max_node_seen": max_seen,
        "final_dense_size": len(factors[-1].idx) if rem_ids else 0,
        "flops_factorize": FLOPS.total - flops0,
        "flops_apply": sum(f.apply_flops() for f in factors),
        "peak_blocks_bytes": peak_bytes,
        "factors": len(factors),
    }
    return Preconditioner(
        n=n, factors=factors, stats=stats,
        rank_trace=trace_out, basis=basis,
        scheme=scheme, degree=degree,
        mode=mode if compression else "exact",
    )
