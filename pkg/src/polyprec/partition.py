"""Level-wise partition hierarchies of a cartesian vertex grid.

Two families are built here. The nested family cuts the grid with axis
planes of doubling period d = 2^(t-1) * b; the single vertex layer bracketed
by each plane pair acts as a separator, and the boxes between layers are
interiors. Classifying each cell by how many axes it is thin in yields the
0/1/2/3-cell taxonomy; 3-cells are the interiors eliminated exactly. The
general family tiles the grid with boxes of side d and treats every cell as
a separator, so no exact elimination ever happens.

Both families coarsen exactly: every cell at level t+1 is the union of the
level-t cells mapped to it by the father map.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import GridTooSmallError

KIND_NAMES = {0: "cell0", 1: "cell1", 2: "cell2", 3: "cell3"}


@dataclass(frozen=True)
class CartesianGrid:
    """Vertex lattice with per-axis spacing and unknowns per vertex."""

    dims: tuple
    spacing: tuple = (1.0, 1.0, 1.0)
    components_per_vertex: int = 1

    def __post_init__(self):
        if len(self.dims) != 3 or any(d < 1 for d in self.dims):
            raise ValueError(f"bad grid dims {self.dims}")
        if len(self.spacing) != 3 or any(h <= 0 for h in self.spacing):
            raise ValueError(f"bad grid spacing {self.spacing}")

    @property
    def n_vertices(self):
        nx, ny, nz = self.dims
        return nx * ny * nz

    @property
    def n_unknowns(self):
        return self.n_vertices * self.components_per_vertex


@dataclass
class Cell:
    """One partition cell: a set of grid vertices with a role and a kind."""

    id: int
    vertex_ids: np.ndarray
    kind: str
    role: str
    box: tuple  # ((lo_x, hi_x), (lo_y, hi_y), (lo_z, hi_z)) vertex-index extents

    @property
    def size(self):
        return len(self.vertex_ids)


@dataclass
class Level:
    cells: list
    father: dict = field(default_factory=dict)  # cell id -> cell id at next level
    adjacency: set = field(default_factory=set)


@dataclass
class PartitionHierarchy:
    grid: CartesianGrid
    b: int
    kind: str  # "nested" or "general"
    levels: list

    def to_debug_json(self):
        """Diagnostic dump of the hierarchy; the format is not stable."""
        out = []
        for t, level in enumerate(self.levels):
            out.append(
                {
                    "level": t + 1,
                    "cells": [
                        {
                            "id": c.id,
                            "size": c.size,
                            "kind": c.kind,
                            "role": c.role,
                            "box": [list(map(int, ex)) for ex in c.box],
                        }
                        for c in level.cells
                    ],
                    "father": {str(k): v for k, v in sorted(level.father.items())},
                }
            )
        return json.dumps({"b": self.b, "type": self.kind, "levels": out}, indent=1)


# Per-axis vertex labels. A label is (sep, group): sep is 1 on separator
# layers, and group numbers the band or the separator layer along the axis.


def _axis_tags_nested(n, d):
    """Separator layers at indices i with (i+1) % d == 0; bands in between
    are d-1 indices wide away from the boundary."""
    idx = np.arange(n)
    sep = (idx + 1) % d == 0
    group = np.where(sep, (idx + 1) // d - 1, idx // d)
    return sep.astype(np.int64), group


def _father_tag_nested(s, g):
    """Label at the next level (d doubled): odd separator layers survive,
    even ones are absorbed into the band containing them."""
    if s:
        return (1, (g - 1) // 2) if g % 2 == 1 else (0, g // 2)
    return (0, g // 2)


def _axis_tags_general(n, d):
    idx = np.arange(n)
    return np.zeros(n, dtype=np.int64), idx // d


def _father_tag_general(s, g):
    return (0, g // 2)


def _classify_nested(tag):
    n_band_axes = 3 - (tag[0] + tag[2] + tag[4])
    kind = KIND_NAMES[n_band_axes]
    role = "interior" if n_band_axes == 3 else "separator"
    return kind, role


def _classify_general(_tag):
    return "general", "separator"


def _cells_from_tags(dims, tags, classify):
    """Group vertices by their per-axis labels into cells, ids in tag order."""
    nx, ny, nz = dims
    vid = np.arange(nx * ny * nz)
    i = vid % nx
    rest = vid // nx
    j = rest % ny
    k = rest // ny
    key = np.stack(
        [tags[0][0][i], tags[0][1][i], tags[1][0][j], tags[1][1][j], tags[2][0][k], tags[2][1][k]],
        axis=1,
    )
    order = np.lexsort(key.T[::-1])
    key_sorted = key[order]
    vid_sorted = vid[order]
    boundaries = np.nonzero((key_sorted[1:] != key_sorted[:-1]).any(axis=1))[0] + 1
    starts = np.concatenate([[0], boundaries])
    ends = np.concatenate([boundaries, [len(vid_sorted)]])
    cells = []
    keymap = {}
    for cid, (s, e) in enumerate(zip(starts, ends)):
        tag = tuple(int(v) for v in key_sorted[s])
        verts = np.sort(vid_sorted[s:e])
        ci = verts % nx
        cj = (verts // nx) % ny
        ck = verts // (nx * ny)
        box = (
            (int(ci.min()), int(ci.max())),
            (int(cj.min()), int(cj.max())),
            (int(ck.min()), int(ck.max())),
        )
        kind, role = classify(tag)
        cells.append(Cell(id=cid, vertex_ids=verts, kind=kind, role=role, box=box))
        keymap[tag] = cid
    return cells, keymap


def _build_levels(grid, b, axis_tags, father_tag, classify):
    levels = []
    d = b
    prev = None  # keymap of previous level
    while True:
        tags = [axis_tags(n, d) for n in grid.dims]
        cells, keymap = _cells_from_tags(grid.dims, tags, classify)
        levels.append(Level(cells=cells))
        if prev is not None:
            father = {}
            for tag, pcid in prev.items():
                ftag = ()
                for ax in range(3):
                    ftag += father_tag(tag[2 * ax], tag[2 * ax + 1])
                father[pcid] = keymap[ftag]
            levels[-2].father = father
        if len(cells) == 1:
            break
        prev = keymap
        d *= 2
    return levels


def build_nested_hierarchy(grid, b):
    """Nested-dissection hierarchy with separator planes of period 2^(t-1)*b.

    Away from the boundary, level-t interior cells are (d-1)^3 boxes for
    d = 2^(t-1) * b, face cells hold (d-1)^2 vertices, edge cells d-1, and
    corner cells a single vertex. Boundary-clipped cells keep the kind
    given by their plane membership regardless of vertex count.
    """
    if b <= 1:
        raise ValueError("b must be > 1")
    if all(n < b for n in grid.dims):
        raise GridTooSmallError(
            f"grid {grid.dims} admits no cutting plane at level 1 with b={b}"
        )
    levels = _build_levels(grid, b, _axis_tags_nested, _father_tag_nested, _classify_nested)
    return PartitionHierarchy(grid=grid, b=b, kind="nested", levels=levels)


def build_general_hierarchy(grid, b):
    """Box tiling with side 2^(t-1)*b; every cell is a separator."""
    if b < 2:
        raise ValueError("b must be >= 2")
    if all(n <= b for n in grid.dims):
        raise GridTooSmallError(
            f"grid {grid.dims} yields a single box at level 1 with b={b}"
        )
    levels = _build_levels(grid, b, _axis_tags_general, _father_tag_general, _classify_general)
    return PartitionHierarchy(grid=grid, b=b, kind="general", levels=levels)


def expand_to_unknowns(cell, grid):
    """Unknown indices of all components of the cell's vertices.

    Component-major: unknown c * n_vertices + v for component c of vertex v,
    all component-0 unknowns first.
    """
    nv = grid.n_vertices
    comps = grid.components_per_vertex
    if comps == 1:
        return cell.vertex_ids.copy()
    return np.concatenate([cell.vertex_ids + c * nv for c in range(comps)])


def compute_adjacency(cells, rows, cols, grid):
    """Cell-pair adjacency induced by a matrix sparsity pattern.

    rows/cols are the nonzero positions of the matrix restricted to active
    unknowns; a pair of distinct cells is adjacent iff some nonzero couples
    one unknown of each. Unknowns map to vertices component-major.
    """
    nv = grid.n_vertices
    owner = np.full(nv, -1, dtype=np.int64)
    for c in cells:
        owner[c.vertex_ids] = c.id
    ci = owner[np.asarray(rows) % nv]
    cj = owner[np.asarray(cols) % nv]
    keep = (ci != cj) & (ci >= 0) & (cj >= 0)
    lo = np.minimum(ci[keep], cj[keep])
    hi = np.maximum(ci[keep], cj[keep])
    return set(zip(lo.tolist(), hi.tolist()))
