"""Test-problem generators and external matrix ingestion.

Three generators cover the benchmark families: the 7-point Poisson
discretization on a box with homogeneous Dirichlet conditions, a two-point
flux finite-volume pressure system with a heterogeneous mobility field, and
a two-material cantilever beam of trilinear hexahedral elements. A plain
Matrix Market reader/writer plus a coordinates CSV round out generic input.
"""

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import (
    CountMismatchError,
    DimensionMismatchError,
    NonPositiveFieldError,
    NotSymmetricError,
    ParseError,
)
from .partition import CartesianGrid


@dataclass
class ProblemInstance:
    """A sparse SPD system with per-unknown geometry.

    coords holds one 3-d location per grid vertex; for vector problems the
    unknowns are ordered component-major (all first components of all
    vertices, then all second components, ...).
    """

    matrix: sp.csr_matrix
    coords: np.ndarray
    grid: CartesianGrid
    components: int
    rhs: np.ndarray
    label: str

    def __post_init__(self):
        n = self.grid.n_unknowns
        if self.matrix.shape != (n, n):
            raise DimensionMismatchError(
                f"matrix is {self.matrix.shape}, grid implies {n} unknowns"
            )
        if self.coords.shape != (self.grid.n_vertices, 3):
            raise DimensionMismatchError(
                f"coords are {self.coords.shape}, expected ({self.grid.n_vertices}, 3)"
            )
        asym = abs(self.matrix - self.matrix.T)
        if asym.nnz and asym.max() > 1e-12 * abs(self.matrix).max():
            raise NotSymmetricError(f"matrix asymmetry {asym.max():.2e}")

    @property
    def n(self):
        return self.matrix.shape[0]


def _spacing3(spacing):
    if np.isscalar(spacing):
        return (float(spacing),) * 3
    s = tuple(float(h) for h in spacing)
    if len(s) != 3:
        raise ValueError(f"spacing must be a scalar or 3 values, got {spacing}")
    return s


def _lattice_coords(dims, spacing, offset):
    nx, ny, nz = dims
    hx, hy, hz = spacing
    i = np.arange(nx)
    j = np.arange(ny)
    k = np.arange(nz)
    # x-fastest vertex order: id = i + nx * (j + ny * k)
    coords = np.empty((nx * ny * nz, 3))
    coords[:, 0] = np.tile((i + offset) * hx, ny * nz)
    coords[:, 1] = np.repeat(np.tile((j + offset) * hy, nz), nx)
    coords[:, 2] = np.repeat((k + offset) * hz, nx * ny)
    return coords


def _tridiag_1d(n, h):
    main = np.full(n, 2.0 / h ** 2)
    off = np.full(n - 1, -1.0 / h ** 2)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


def poisson7(nx, ny=None, nz=None, spacing=1.0):
    """3-d Poisson with the 7-point stencil and Dirichlet boundaries folded in.

    nx, ny, nz count the interior vertices along each axis (the unknowns);
    the zero boundary layers are eliminated, so boundary-adjacent rows keep
    the full diagonal and strictly positive row sums.
    """
    ny = nx if ny is None else ny
    nz = nx if nz is None else nz
    if min(nx, ny, nz) < 2:
        raise ValueError("each axis needs at least 2 interior vertices")
    hx, hy, hz = _spacing3(spacing)
    Tx = _tridiag_1d(nx, hx)
    Ty = _tridiag_1d(ny, hy)
    Tz = _tridiag_1d(nz, hz)
    Ix, Iy, Iz = (sp.identity(m, format="csr") for m in (nx, ny, nz))
    A = (
        sp.kron(Iz, sp.kron(Iy, Tx))
        + sp.kron(Iz, sp.kron(Ty, Ix))
        + sp.kron(Tz, sp.kron(Iy, Ix))
    ).tocsr()
    grid = CartesianGrid(dims=(nx, ny, nz), spacing=(hx, hy, hz))
    coords = _lattice_coords((nx, ny, nz), (hx, hy, hz), offset=1.0)
    rhs = np.ones(grid.n_unknowns)
    return ProblemInstance(
        matrix=A, coords=coords, grid=grid, components=1, rhs=rhs,
        label=f"poisson-{nx}x{ny}x{nz}",
    )


def poisson_eigenpair(dims, spacing, harmonics):
    """Analytic eigenpair of the 7-point Poisson matrix.

    harmonics = (k1, k2, k3) with 1 <= k <= n per axis; returns
    (eigenvalue, unit eigenvector). (1, 1, 1) gives the smallest
    eigenvalue, (nx, ny, nz) the largest.
    """
    nx, ny, nz = dims
    hx, hy, hz = _spacing3(spacing)
    k1, k2, k3 = harmonics
    lam = (
        (2.0 - 2.0 * math.cos(k1 * math.pi / (nx + 1))) / hx ** 2
        + (2.0 - 2.0 * math.cos(k2 * math.pi / (ny + 1))) / hy ** 2
        + (2.0 - 2.0 * math.cos(k3 * math.pi / (nz + 1))) / hz ** 2
    )
    sx = np.sin(k1 * np.pi * np.arange(1, nx + 1) / (nx + 1))
    sy = np.sin(k2 * np.pi * np.arange(1, ny + 1) / (ny + 1))
    sz = np.sin(k3 * np.pi * np.arange(1, nz + 1) / (nz + 1))
    v = (sz[:, None, None] * sy[None, :, None] * sx[None, None, :]).ravel()
    return lam, v / np.linalg.norm(v)


@dataclass
class ScalarField:
    """Per-cell positive coefficients on a cartesian cell grid, x-fastest."""

    dims: tuple
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).ravel()
        cx, cy, cz = self.dims
        if len(self.values) != cx * cy * cz:
            raise CountMismatchError(
                f"field declares {cx * cy * cz} cells but has {len(self.values)} values"
            )
        if not np.isfinite(self.values).all() or (self.values <= 0).any():
            raise NonPositiveFieldError("field values must be positive and finite")

    def cube(self):
        """Values as a (cx, cy, cz) array."""
        return self.values.reshape(self.dims, order="F")


def read_perm_field(path):
    """Read a mobility field: first line `cx cy cz`, then the per-cell
    values whitespace-separated in x-fastest order, wrapping freely."""
    with open(path) as f:
        tokens = f.read().split()
    if len(tokens) < 3:
        raise ParseError(f"{path}: missing dimension header")
    try:
        dims = tuple(int(t) for t in tokens[:3])
        values = np.array([float(t) for t in tokens[3:]])
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if len(values) != dims[0] * dims[1] * dims[2]:
        raise CountMismatchError(
            f"{path}: header declares {dims[0] * dims[1] * dims[2]} values, "
            f"found {len(values)}"
        )
    return ScalarField(dims=dims, values=values)


def write_perm_field(field, path):
    cx, cy, cz = field.dims
    with open(path, "w") as f:
        f.write(f"{cx} {cy} {cz}\n")
        for start in range(0, len(field.values), 8):
            row = field.values[start : start + 8]
            f.write(" ".join(repr(float(v)) for v in row) + "\n")


def synth_perm_field(dims, layers=4, contrast=1e3, seed=0):
    """Synthetic layered mobility field.

    Layers stack along the first axis, transverse to the default Dirichlet
    face of darcy_tpfa, so low-mobility layers act as series bottlenecks
    the way tight geological strata do. Quiet layers carry mildly varying,
    heavily smoothed log-mobility; rough layers vary strongly at a short
    correlation length; a random per-layer offset dominates the range and
    puts sharp interfaces between layers. The log field is rescaled so
    max/min equals `contrast` exactly. Deterministic for a fixed seed.
    """
    from scipy.ndimage import uniform_filter

    cx, cy, cz = dims
    if contrast < 1.0:
        raise ValueError("contrast must be >= 1")
    if layers < 1:
        raise ValueError("layers must be >= 1")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((cx, cy, cz))
    lay = (np.arange(cx) * layers) // max(cx, 1)
    rough = (lay % 2 == 1)[:, None, None]
    smooth_part = 0.5 * uniform_filter(g, size=7, mode="nearest")
    rough_part = 2.0 * uniform_filter(g, size=3, mode="nearest")
    shift = 4.0 * rng.standard_normal(layers)[lay][:, None, None]
    g = np.where(rough, rough_part, smooth_part) + shift
    gmin, gmax = g.min(), g.max()
    if contrast == 1.0 or gmax == gmin:
        vals = np.ones((cx, cy, cz))
    else:
        vals = np.exp(np.log(contrast) * (g - gmin) / (gmax - gmin))
    return ScalarField(dims=dims, values=vals.ravel(order="F"))


def tile_field(field, reps):
    """Tile the field periodically; dims scale by reps."""
    rx, ry, rz = reps
    cube = np.tile(field.cube(), (rx, ry, rz))
    return ScalarField(dims=cube.shape, values=cube.ravel(order="F"))


def darcy_tpfa(field, spacing=1.0, dirichlet_face="x-"):
    """Two-point flux pressure system on the cells of a mobility field.

    Face transmissibility is the harmonic mean of the two adjacent cell
    mobilities times face area over center distance. All outer boundaries
    are no-flow except dirichlet_face, where a fixed pressure is folded
    into the diagonal (half-cell distance); a constant inflow on the
    opposite face provides the physical right-hand side.
    """
    if dirichlet_face not in ("x-", "x+", "y-", "y+", "z-", "z+"):
        raise ValueError(f"bad dirichlet_face {dirichlet_face!r}")
    hx, hy, hz = _spacing3(spacing)
    cx, cy, cz = field.dims
    lam = field.cube()
    ids = np.arange(cx * cy * cz).reshape((cx, cy, cz), order="F")
    n = ids.size
    diag = np.zeros(n)
    rows, cols, vals = [], [], []
    geo = {0: hy * hz / hx, 1: hx * hz / hy, 2: hx * hy / hz}
    for axis in range(3):
        if lam.shape[axis] < 2:
            continue
        sl_a = [slice(None)] * 3
        sl_b = [slice(None)] * 3
        sl_a[axis] = slice(None, -1)
        sl_b[axis] = slice(1, None)
        la, lb = lam[tuple(sl_a)].ravel(), lam[tuple(sl_b)].ravel()
        ia, ib = ids[tuple(sl_a)].ravel(), ids[tuple(sl_b)].ravel()
        T = 2.0 * la * lb / (la + lb) * geo[axis]
        rows.append(ia)
        cols.append(ib)
        vals.append(-T)
        np.add.at(diag, ia, T)
        np.add.at(diag, ib, T)
    axis = "xyz".index(dirichlet_face[0])
    side = 0 if dirichlet_face[1] == "-" else -1
    sl = [slice(None)] * 3
    sl[axis] = side
    bcells = ids[tuple(sl)].ravel()
    blam = lam[tuple(sl)].ravel()
    # Dirichlet value at the face itself: half-cell distance to the center
    np.add.at(diag, bcells, 2.0 * blam * geo[axis])
    rows = np.concatenate(rows) if rows else np.empty(0, int)
    cols = np.concatenate(cols) if cols else np.empty(0, int)
    vals = np.concatenate(vals) if vals else np.empty(0)
    A = sp.coo_matrix(
        (
            np.concatenate([vals, vals, diag]),
            (
                np.concatenate([rows, cols, np.arange(n)]),
                np.concatenate([cols, rows, np.arange(n)]),
            ),
        ),
        shape=(n, n),
    ).tocsr()
    # physical rhs: constant inflow on the face opposite the Dirichlet one
    rhs = np.zeros(n)
    sl_in = [slice(None)] * 3
    sl_in[axis] = -1 if side == 0 else 0
    rhs[ids[tuple(sl_in)].ravel()] = geo[axis] * (hx, hy, hz)[axis]
    grid = CartesianGrid(dims=(cx, cy, cz), spacing=(hx, hy, hz))
    coords = _lattice_coords((cx, cy, cz), (hx, hy, hz), offset=0.5)
    return ProblemInstance(
        matrix=A, coords=coords, grid=grid, components=1, rhs=rhs,
        label=f"darcy-{cx}x{cy}x{cz}",
    )


# -- linear elasticity on trilinear hexahedra ------------------------------

_GP = 1.0 / math.sqrt(3.0)
# local corner c = ix + 2*iy + 4*iz, natural coordinates in {-1, +1}
_CORNERS = np.array(
    [[(c >> s) & 1 for s in (0, 1, 2)] for c in range(8)], dtype=float
) * 2.0 - 1.0


def hex_element_stiffness(h, lam, mu):
    """24x24 stiffness of one trilinear hexahedral element of size h.

    Element dofs are component-grouped: columns 0..7 are the first
    displacement component at corners 0..7, then the second, then the
    third. Uses 2x2x2 Gauss quadrature and the isotropic stress
    sigma = lam * tr(eps) I + 2 mu * eps.
    """
    hx, hy, hz = _spacing3(h)
    K = np.zeros((24, 24))
    D = np.zeros((6, 6))
    D[:3, :3] = lam
    D[np.arange(3), np.arange(3)] += 2.0 * mu
    D[np.arange(3, 6), np.arange(3, 6)] = mu
    detJ = hx * hy * hz / 8.0
    for gz in (-_GP, _GP):
        for gy in (-_GP, _GP):
            for gx in (-_GP, _GP):
                xi = np.array([gx, gy, gz])
                # dN/dxi for the 8 trilinear shape functions
                dN = np.empty((8, 3))
                for a in range(8):
                    s = _CORNERS[a]
                    dN[a, 0] = 0.125 * s[0] * (1 + s[1] * xi[1]) * (1 + s[2] * xi[2])
                    dN[a, 1] = 0.125 * s[1] * (1 + s[0] * xi[0]) * (1 + s[2] * xi[2])
                    dN[a, 2] = 0.125 * s[2] * (1 + s[0] * xi[0]) * (1 + s[1] * xi[1])
                dN[:, 0] *= 2.0 / hx
                dN[:, 1] *= 2.0 / hy
                dN[:, 2] *= 2.0 / hz
                B = np.zeros((6, 24))
                B[0, 0:8] = dN[:, 0]
                B[1, 8:16] = dN[:, 1]
                B[2, 16:24] = dN[:, 2]
                B[3, 0:8] = dN[:, 1]
                B[3, 8:16] = dN[:, 0]
                B[4, 8:16] = dN[:, 2]
                B[4, 16:24] = dN[:, 1]
                B[5, 0:8] = dN[:, 2]
                B[5, 16:24] = dN[:, 0]
                K += detJ * (B.T @ D @ B)
    return 0.5 * (K + K.T)


def rigid_body_modes(coords):
    """Six rigid displacement fields (3 translations, 3 rotations about the
    centroid) as columns, component-major over the given vertices."""
    coords = np.asarray(coords, dtype=float)
    nv = len(coords)
    c = coords - coords.mean(axis=0)
    x, y, z = c[:, 0], c[:, 1], c[:, 2]
    zero = np.zeros(nv)
    one = np.ones(nv)
    modes = [
        (one, zero, zero),
        (zero, one, zero),
        (zero, zero, one),
        (-y, x, zero),   # rotation about z
        (zero, -z, y),   # rotation about x
        (z, zero, -x),   # rotation about y
    ]
    R = np.zeros((3 * nv, 6))
    for m, (ux, uy, uz) in enumerate(modes):
        R[:nv, m] = ux
        R[nv : 2 * nv, m] = uy
        R[2 * nv :, m] = uz
    return R


def _beam_lattice(refinement, aspect):
    ax_, ay_, az_ = aspect
    ex, ey, ez = ax_ * refinement, ay_ * refinement, az_ * refinement
    h = 1.0 / refinement
    return (ex, ey, ez), (ex + 1, ey + 1, ez + 1), h


def _assemble_beam(refinement, lame_left, lame_right, aspect=(8, 1, 1)):
    """Global free-free stiffness of the two-material beam, plus vertex
    coordinates; dofs are component-major over the full vertex lattice."""
    (ex, ey, ez), (vx, vy, vz), h = _beam_lattice(refinement, aspect)
    nv = vx * vy * vz
    K1 = hex_element_stiffness((h, h, h), 1.0, 0.0)
    K2 = hex_element_stiffness((h, h, h), 0.0, 1.0)
    eids = np.arange(ex * ey * ez)
    ei = eids % ex
    ej = (eids // ex) % ey
    ek = eids // (ex * ey)
    # element -> 8 corner vertex ids, local corner c = ix + 2*iy + 4*iz
    corners = np.empty((len(eids), 8), dtype=np.int64)
    for c in range(8):
        cx, cy, cz = c & 1, (c >> 1) & 1, (c >> 2) & 1
        corners[:, c] = (ei + cx) + vx * ((ej + cy) + vy * (ek + cz))
    dofs = np.concatenate([corners + comp * nv for comp in range(3)], axis=1)
    mid = ex // 2
    lam = np.where(ei < mid, lame_left[0], lame_right[0])
    mu = np.where(ei < mid, lame_left[1], lame_right[1])
    data = lam[:, None, None] * K1 + mu[:, None, None] * K2
    rows = np.repeat(dofs, 24, axis=1).ravel()
    cols = np.tile(dofs, (1, 24)).ravel()
    K = sp.coo_matrix((data.ravel(), (rows, cols)), shape=(3 * nv, 3 * nv)).tocsr()
    coords = _lattice_coords((vx, vy, vz), (h, h, h), offset=0.0)
    return K, coords, (vx, vy, vz), h


def elasticity_hex_beam(refinement, lame_left=(1.0, 1.0), lame_right=(50.0, 50.0)):
    """Two-material cantilever beam (8:1:1) of trilinear hexahedra.

    The left half of the beam uses lame_left, the right half lame_right.
    Every displacement on the x=0 face is fixed (rows and columns
    eliminated); a constant downward traction on the free end face fills
    the physical right-hand side. The free vertices form a cartesian
    lattice, so the partition hierarchies apply directly.
    """
    if refinement < 1:
        raise ValueError("refinement must be >= 1")
    K, coords, (vx, vy, vz), h = _assemble_beam(refinement, lame_left, lame_right)
    nv = vx * vy * vz
    vids = np.arange(nv)
    free_v = vids[vids % vx != 0]  # drop the x = 0 face
    free = np.concatenate([free_v + c * nv for c in range(3)])
    A = K[free][:, free].tocsr()
    fcoords = coords[free_v]
    nfree = len(free_v)
    rhs = np.zeros(3 * nfree)
    end = np.nonzero(free_v % vx == vx - 1)[0]
    rhs[2 * nfree + end] = -1.0 / len(end)
    grid = CartesianGrid(dims=(vx - 1, vy, vz), spacing=(h, h, h), components_per_vertex=3)
    return ProblemInstance(
        matrix=A, coords=fcoords, grid=grid, components=3, rhs=rhs,
        label=f"elasticity-r{refinement}",
    )


def elasticity_free_beam(refinement, lame_left=(1.0, 1.0), lame_right=(50.0, 50.0)):
    """Unconstrained beam stiffness and vertex coordinates (for rigid-mode
    checks; the matrix is singular, not a ProblemInstance)."""
    K, coords, _, _ = _assemble_beam(refinement, lame_left, lame_right)
    return K, coords


# -- Matrix Market + coordinates CSV ---------------------------------------


def read_mtx(matrix_path, coords_path, dims=None, spacing=None):
    """Read a symmetric real coordinate Matrix Market file plus a CSV of
    0-based `id,x,y,z` vertex coordinates.

    The unknown count must be n_vertices times 1 or 3. Unless dims is
    given, the coordinates must form an x-fastest cartesian lattice from
    which the grid is inferred.
    """
    with open(matrix_path) as f:
        header = f.readline().split()
        if len(header) < 5 or header[0] != "%%MatrixMarket":
            raise ParseError(f"{matrix_path}: not a MatrixMarket file")
        if header[2] != "coordinate" or header[3] != "real":
            raise ParseError(f"{matrix_path}: need coordinate real format")
        symmetric = header[4] == "symmetric"
        line = f.readline()
        while line.startswith("%"):
            line = f.readline()
        try:
            nrows, ncols, nnz = (int(t) for t in line.split())
        except ValueError as exc:
            raise ParseError(f"{matrix_path}: bad size line {line!r}") from exc
        if nrows != ncols:
            raise DimensionMismatchError(f"{matrix_path}: matrix is not square")
        try:
            body = np.loadtxt(f, ndmin=2)
        except ValueError as exc:
            raise ParseError(f"{matrix_path}: {exc}") from exc
    if body.shape != (nnz, 3):
        raise ParseError(f"{matrix_path}: expected {nnz} entries, got {body.shape}")
    r = body[:, 0].astype(int) - 1
    c = body[:, 1].astype(int) - 1
    v = body[:, 2]
    if symmetric:
        off = r != c
        r, c, v = (
            np.concatenate([r, c[off]]),
            np.concatenate([c, r[off]]),
            np.concatenate([v, v[off]]),
        )
    A = sp.coo_matrix((v, (r, c)), shape=(nrows, nrows)).tocsr()
    asym = abs(A - A.T)
    if asym.nnz and asym.max() > 1e-12 * abs(A).max():
        raise NotSymmetricError(f"{matrix_path}: asymmetry {asym.max():.2e}")

    coords = _read_coords_csv(coords_path)
    nvert = len(coords)
    if nrows % nvert != 0 or nrows // nvert not in (1, 3):
        raise DimensionMismatchError(
            f"{nrows} unknowns for {nvert} vertices is neither scalar nor 3-component"
        )
    components = nrows // nvert
    grid = _infer_grid(coords, dims, spacing, components)
    rhs = np.ones(nrows)
    return ProblemInstance(
        matrix=A, coords=coords, grid=grid, components=components, rhs=rhs,
        label="mtx",
    )


def _read_coords_csv(path):
    rows = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if len(parts) != 4:
                raise ParseError(f"{path}: expected `id,x,y,z`, got {line!r}")
            try:
                rows.append((int(parts[0]), float(parts[1]), float(parts[2]), float(parts[3])))
            except ValueError:
                if not rows:  # tolerate one header line
                    continue
                raise ParseError(f"{path}: bad row {line!r}")
    if not rows:
        raise ParseError(f"{path}: no coordinate rows")
    rows.sort()
    ids = np.array([r[0] for r in rows])
    if not np.array_equal(ids, np.arange(len(rows))):
        raise ParseError(f"{path}: ids must be 0..{len(rows) - 1}")
    return np.array([[r[1], r[2], r[3]] for r in rows])


def _infer_grid(coords, dims, spacing, components):
    if dims is None:
        axes = [np.unique(coords[:, ax]) for ax in range(3)]
        dims = tuple(len(a) for a in axes)
        if dims[0] * dims[1] * dims[2] != len(coords):
            raise DimensionMismatchError(
                f"coordinates do not fill a {dims} lattice"
            )
        if spacing is None:
            spacing = tuple(
                float(np.diff(a).mean()) if len(a) > 1 else 1.0 for a in axes
            )
    else:
        dims = tuple(int(d) for d in dims)
        if dims[0] * dims[1] * dims[2] != len(coords):
            raise DimensionMismatchError(
                f"{len(coords)} vertices do not fill a {dims} lattice"
            )
        if spacing is None:
            spacing = (1.0, 1.0, 1.0)
    grid = CartesianGrid(dims=dims, spacing=_spacing3(spacing), components_per_vertex=components)
    # verify x-fastest ordering against the lattice
    expect = _lattice_coords(dims, (1.0, 1.0, 1.0), offset=0.0)
    for ax in range(3):
        vals = np.unique(coords[:, ax])
        pos = np.searchsorted(vals, coords[:, ax])
        if not np.array_equal(pos, expect[:, ax].astype(int)):
            raise DimensionMismatchError(
                "coordinates are not in x-fastest lattice order"
            )
    return grid


def write_mtx(matrix, coords, matrix_path, coords_path):
    """Write a symmetric matrix (lower triangle) and the coordinates CSV."""
    A = sp.tril(matrix.tocoo())
    with open(matrix_path, "w") as f:
        f.write("%%MatrixMarket matrix coordinate real symmetric\n")
        f.write(f"{matrix.shape[0]} {matrix.shape[1]} {A.nnz}\n")
        for r, c, v in zip(A.row, A.col, A.data):
            f.write(f"{r + 1} {c + 1} {float(v)!r}\n")
    with open(coords_path, "w") as f:
        f.write("id,x,y,z\n")
        for i, (x, y, z) in enumerate(np.asarray(coords)):
            f.write(f"{i},{float(x)!r},{float(y)!r},{float(z)!r}\n")
