"""Symmetric block-sparse trailing matrix indexed by node pairs.

Only blocks with i <= j are stored; the transpose orientation is produced
on access. Block shapes track the nodes' active sizes, which shrink as the
factorization eliminates and compresses nodes. The accumulated live-byte
count doubles as the memory metric reported by the benchmark harness.
"""

import numpy as np

from .errors import NonSymmetricPatternError, ShapeMismatchError


class BlockMatrix(object):
    def __init__(self, sizes):
        # sizes: node id -> active size
        self.sizes = dict(sizes)
        self._blocks = {}
        self._adj = {i: set() for i in self.sizes}
        self.live_bytes = 0
        self.peak_bytes = 0

    # -- storage hooks ---------------------------------------------------

    def _insert(self, key, arr):
        old = self._blocks.get(key)
        if old is not None:
            self.live_bytes -= old.nbytes
        self._blocks[key] = arr
        self.live_bytes += arr.nbytes
        self.peak_bytes = max(self.peak_bytes, self.live_bytes)
        a, b = key
        if a != b:
            self._adj[a].add(b)
            self._adj[b].add(a)

    def _remove(self, key):
        arr = self._blocks.pop(key)
        self.live_bytes -= arr.nbytes
        a, b = key
        if a != b:
            self._adj[a].discard(b)
            self._adj[b].discard(a)

    # -- access ----------------------------------------------------------

    def has_block(self, i, j):
        return (min(i, j), max(i, j)) in self._blocks

    def get(self, i, j):
        """Block with row space i and column space j (transposed on demand)."""
        blk = self._blocks[(min(i, j), max(i, j))]
        return blk if i <= j else blk.T

    def set(self, i, j, values):
        values = np.asarray(values, dtype=float)
        if values.shape != (self.sizes[i], self.sizes[j]):
            raise ShapeMismatchError(
                f"block ({i},{j}) must be {(self.sizes[i], self.sizes[j])}, got {values.shape}"
            )
        if i > j:
            i, j, values = j, i, values.T
        self._insert((i, j), values)

    def add(self, i, j, delta):
        """Accumulate into block (i, j), creating a zero block if absent."""
        if i > j:
            i, j, delta = j, i, delta.T
        key = (i, j)
        if key not in self._blocks:
            self._insert(key, np.zeros((self.sizes[i], self.sizes[j])))
        self._blocks[key] += delta

    def neighbors(self, i):
        """Sorted ids of nodes coupled to i by a stored off-diagonal block."""
        return sorted(self._adj[i])

    def drop_node(self, i):
        """Remove every block involving node i."""
        for j in list(self._adj[i]):
            self._remove((min(i, j), max(i, j)))
        if (i, i) in self._blocks:
            self._remove((i, i))

    def resize_node(self, i, new_size):
        """Shrink node i's declared size; its blocks must be re-set after."""
        self.sizes[i] = int(new_size)

    def node_ids(self):
        return sorted(self.sizes)

    def block_keys(self):
        return sorted(self._blocks)

    # -- construction ----------------------------------------------------

    @classmethod
    def from_csr(cls, A, node_unknowns, sym_rtol=1e-12):
        """Scatter a CSR matrix into blocks given per-node unknown lists.

        The unknown lists must partition range(A.shape[0]). The pattern and
        values must be symmetric; blocks reproduce the matrix entrywise.
        """
        A = A.tocsr()
        n = A.shape[0]
        asym = abs(A - A.T)
        scale = abs(A).max() if A.nnz else 0.0
        if asym.nnz and asym.max() > sym_rtol * max(scale, 1e-300):
            raise NonSymmetricPatternError(
                f"matrix is not symmetric (max asymmetry {asym.max():.2e})"
            )
        owner = np.full(n, -1, dtype=np.int64)
        local = np.zeros(n, dtype=np.int64)
        sizes = {}
        for nid, idx in node_unknowns.items():
            idx = np.asarray(idx)
            owner[idx] = nid
            local[idx] = np.arange(len(idx))
            sizes[nid] = len(idx)
        if (owner < 0).any():
            raise ValueError("node unknown lists do not cover all unknowns")
        M = cls(sizes)
        coo = A.tocoo()
        bi, bj = owner[coo.row], owner[coo.col]
        li, lj = local[coo.row], local[coo.col]
        flip = bi > bj
        bi, bj, li, lj = (
            np.where(flip, bj, bi),
            np.where(flip, bi, bj),
            np.where(flip, lj, li),
            np.where(flip, li, lj),
        )
        order = np.lexsort((bj, bi))
        bi, bj, li, lj = bi[order], bj[order], li[order], lj[order]
        vals = coo.data[order]
        cut = np.nonzero((bi[1:] != bi[:-1]) | (bj[1:] != bj[:-1]))[0] + 1
        starts = np.concatenate([[0], cut])
        ends = np.concatenate([cut, [len(vals)]])
        for s, e in zip(starts, ends):
            i, j = int(bi[s]), int(bj[s])
            blk = np.zeros((sizes[i], sizes[j]))
            blk[li[s:e], lj[s:e]] = vals[s:e]
            M._insert((i, j), blk)
        return M

    # -- test support ----------------------------------------------------

    def densify(self, order=None):
        """Dense matrix over the concatenated node actives (for tests).

        Returns (dense, offsets) where offsets maps node id to its slice
        start; nodes are concatenated in ascending id order unless an
        explicit order is given.
        """
        ids = list(order) if order is not None else self.node_ids()
        offsets = {}
        pos = 0
        for i in ids:
            offsets[i] = pos
            pos += self.sizes[i]
        dense = np.zeros((pos, pos))
        for (a, b), blk in self._blocks.items():
            if a not in offsets or b not in offsets:
                continue
            ra = slice(offsets[a], offsets[a] + self.sizes[a])
            rb = slice(offsets[b], offsets[b] + self.sizes[b])
            dense[ra, rb] = blk
            if a != b:
                dense[rb, ra] = blk.T
        return dense, offsets
