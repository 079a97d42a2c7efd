"""Structured triangulations of the unit square and Lagrange FE assembly.

The mesh is the classic uniform n x n grid of squares, each split along its
southwest-northeast diagonal.  Continuous P1 (and optionally P2) elements are
assembled into a mass matrix M realizing the L2 inner product and a stiffness
matrix A realizing the H1_0 inner product (grad u, grad v).  Dirichlet
constraints are eliminated: the operators act on free degrees of freedom only,
which keeps both matrices symmetric positive definite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .exceptions import AssemblyFailure

GAMMA1 = "Gamma1"
GAMMA2 = "Gamma2"
DIRICHLET_ALL = "DirichletAll"

BC_DIRICHLET_ALL = "dirichlet_all"
BC_BRUSSELATOR_MIXED = "brusselator_mixed"

_DIRICHLET_TAGS = (GAMMA1, DIRICHLET_ALL)


@dataclass(frozen=True)
class Mesh:
    """Triangulation of the unit square.

    ``boundary_edges`` holds node index pairs; ``boundary_tags`` the matching
    tag (Gamma1 / Gamma2 / DirichletAll) per edge.
    """

    n_subdiv: int
    nodes: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]


@dataclass(frozen=True)
class FemSpace:
    """Continuous Lagrange space with Dirichlet dofs marked for elimination."""

    mesh: Mesh
    degree: int
    dof_coords: np.ndarray
    dirichlet_mask: np.ndarray
    h: float
    free_idx: np.ndarray = field(repr=False, default=None)
    fixed_idx: np.ndarray = field(repr=False, default=None)

    @property
    def n_dofs(self) -> int:
        return self.dof_coords.shape[0]

    @property
    def n_free(self) -> int:
        return self.free_idx.size

    def extend(self, free_values: np.ndarray, boundary_value: float = 0.0) -> np.ndarray:
        """Scatter a free-dof vector into a full-dof vector."""
        free_values = np.asarray(free_values, dtype=float)
        if free_values.shape != (self.n_free,):
            raise ValueError(
                f"expected {self.n_free} free values, got {free_values.shape}"
            )
        full = np.full(self.n_dofs, float(boundary_value))
        full[self.free_idx] = free_values
        return full

    def restrict(self, full_values: np.ndarray) -> np.ndarray:
        """Keep only the free-dof entries of a full-dof vector."""
        full_values = np.asarray(full_values, dtype=float)
        if full_values.shape != (self.n_dofs,):
            raise ValueError(f"expected {self.n_dofs} values, got {full_values.shape}")
        return full_values[self.free_idx].copy()


@dataclass(frozen=True)
class QuadratureData:
    """Per-element quadrature of the space, used for nonlinear load assembly.

    ``basis`` maps full-dof coefficient vectors to values at all quadrature
    points; ``weights`` already include the element Jacobians, so a load
    vector is ``basis.T @ (weights * values_at_points)``.
    """

    points: np.ndarray
    weights: np.ndarray
    basis: sp.csr_matrix
    basis_free: sp.csr_matrix


@dataclass(frozen=True)
class AssembledOperators:
    """Mass and stiffness matrices on the free dofs, plus assembly extras.

    ``full_mass`` / ``full_stiffness`` keep the unconstrained operators for
    oracles and for formulations that impose boundary values directly.
    """

    mass: sp.csr_matrix
    stiffness: sp.csr_matrix
    full_mass: sp.csr_matrix
    full_stiffness: sp.csr_matrix
    space: FemSpace
    quadrature: QuadratureData

    _stacked_cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_free(self) -> int:
        return self.mass.shape[0]

    def stacked(self, n_components: int) -> tuple[sp.csr_matrix, sp.csr_matrix]:
        """Block-diagonal mass/stiffness for systems of n stacked components."""
        if n_components < 1:
            raise ValueError("n_components must be >= 1")
        if n_components == 1:
            return self.mass, self.stiffness
        key = n_components
        if key not in self._stacked_cache:
            self._stacked_cache[key] = (
                sp.block_diag([self.mass] * n_components, format="csr"),
                sp.block_diag([self.stiffness] * n_components, format="csr"),
            )
        return self._stacked_cache[key]

    def components_of(self, coeffs: np.ndarray) -> int:
        """Number of stacked components in a coefficient vector."""
        n = np.asarray(coeffs).shape[0]
        if n % self.n_free != 0 or n == 0:
            raise ValueError(
                f"coefficient length {n} is not a multiple of {self.n_free} free dofs"
            )
        return n // self.n_free


def build_uniform_mesh(n: int, bc_layout: str = BC_DIRICHLET_ALL) -> Mesh:
    """Uniform n-per-side triangulation with southwest-northeast diagonals."""
    if n < 1:
        raise ValueError("n must be a positive integer")
    if bc_layout not in (BC_DIRICHLET_ALL, BC_BRUSSELATOR_MIXED):
        raise ValueError(f"unknown bc_layout {bc_layout!r}")

    side = np.linspace(0.0, 1.0, n + 1)
    xx, yy = np.meshgrid(side, side, indexing="xy")
    nodes = np.column_stack([xx.ravel(), yy.ravel()])

    def nid(i, j):
        # column i (x direction), row j (y direction)
        return j * (n + 1) + i

    triangles = np.empty((2 * n * n, 3), dtype=np.int64)
    k = 0
    for j in range(n):
        for i in range(n):
            a = nid(i, j)
            b = nid(i + 1, j)
            c = nid(i + 1, j + 1)
            d = nid(i, j + 1)
            # diagonal a-c runs southwest to northeast
            triangles[k] = (a, b, c)
            triangles[k + 1] = (a, c, d)
            k += 2

    edges = []
    tags = []

    def tag_for(p, q):
        if bc_layout == BC_DIRICHLET_ALL:
            return DIRICHLET_ALL
        mid = 0.5 * (nodes[p] + nodes[q])
        on_gamma1 = np.isclose(mid[0], 1.0) or np.isclose(mid[1], 1.0)
        return GAMMA1 if on_gamma1 else GAMMA2

    for i in range(n):
        edges.append((nid(i, 0), nid(i + 1, 0)))          # y = 0
        edges.append((nid(i, n), nid(i + 1, n)))          # y = 1
        edges.append((nid(0, i), nid(0, i + 1)))          # x = 0
        edges.append((nid(n, i), nid(n, i + 1)))          # x = 1
    edges = np.asarray(edges, dtype=np.int64)
    tags = np.asarray([tag_for(p, q) for p, q in edges])

    return Mesh(
        n_subdiv=n,
        nodes=nodes,
        triangles=triangles,
        boundary_edges=edges,
        boundary_tags=tags,
    )


def _edge_midpoint_numbering(mesh: Mesh) -> tuple[dict, np.ndarray]:
    """Assign ids to unique element edges; midpoint coords follow the nodes."""
    edge_ids: dict[tuple[int, int], int] = {}
    mids = []
    for tri in mesh.triangles:
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[0], tri[2])):
            key = (min(a, b), max(a, b))
            if key not in edge_ids:
                edge_ids[key] = len(mids)
                mids.append(0.5 * (mesh.nodes[key[0]] + mesh.nodes[key[1]]))
    return edge_ids, np.asarray(mids)


def build_space(mesh: Mesh, degree: int = 1) -> FemSpace:
    """P1 or P2 space on the mesh with Dirichlet dofs flagged from edge tags."""
    if degree not in (1, 2):
        raise ValueError("degree must be 1 (default) or 2")

    dirichlet_edges = [
        tuple(e) for e, t in zip(mesh.boundary_edges, mesh.boundary_tags)
        if t in _DIRICHLET_TAGS
    ]
    constrained_nodes = set()
    for p, q in dirichlet_edges:
        constrained_nodes.add(int(p))
        constrained_nodes.add(int(q))

    if degree == 1:
        dof_coords = mesh.nodes.copy()
        mask = np.zeros(mesh.n_nodes, dtype=bool)
        mask[list(constrained_nodes)] = True
    else:
        edge_ids, mids = _edge_midpoint_numbering(mesh)
        dof_coords = np.vstack([mesh.nodes, mids])
        mask = np.zeros(dof_coords.shape[0], dtype=bool)
        mask[list(constrained_nodes)] = True
        for p, q in dirichlet_edges:
            mask[mesh.n_nodes + edge_ids[(min(p, q), max(p, q))]] = True

    free_idx = np.flatnonzero(~mask)
    fixed_idx = np.flatnonzero(mask)
    h = np.sqrt(2.0) / mesh.n_subdiv
    return FemSpace(
        mesh=mesh,
        degree=degree,
        dof_coords=dof_coords,
        dirichlet_mask=mask,
        h=h,
        free_idx=free_idx,
        fixed_idx=fixed_idx,
    )


def triangle_rule(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature on the unit triangle, exact for polynomials of the degree.

    Built as a collapsed Gauss-Legendre product rule; weights are positive and
    sum to the triangle area 1/2.
    """
    if degree < 0:
        raise ValueError("degree must be nonnegative")
    n_u = max(1, -(-(degree + 1) // 2))
    n_v = max(1, -(-(degree + 2) // 2))
    xu, wu = np.polynomial.legendre.leggauss(n_u)
    xv, wv = np.polynomial.legendre.leggauss(n_v)
    # map [-1, 1] -> [0, 1]
    xu, wu = 0.5 * (xu + 1.0), 0.5 * wu
    xv, wv = 0.5 * (xv + 1.0), 0.5 * wv
    U, V = np.meshgrid(xu, xv, indexing="ij")
    WU, WV = np.meshgrid(wu, wv, indexing="ij")
    x = (U * (1.0 - V)).ravel()
    y = V.ravel()
    w = (WU * WV * (1.0 - V)).ravel()
    return np.column_stack([x, y]), w


def _p1_shape(bary: np.ndarray) -> np.ndarray:
    return bary


def _p2_shape(bary: np.ndarray) -> np.ndarray:
    l0, l1, l2 = bary[:, 0], bary[:, 1], bary[:, 2]
    return np.column_stack([
        l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
        4 * l0 * l1, 4 * l1 * l2, 4 * l0 * l2,
    ])


def _element_dofs(mesh: Mesh, degree: int) -> np.ndarray:
    if degree == 1:
        return mesh.triangles
    edge_ids, _ = _edge_midpoint_numbering(mesh)
    tris = mesh.triangles
    n0 = mesh.n_nodes
    dofs = np.empty((tris.shape[0], 6), dtype=np.int64)
    dofs[:, :3] = tris
    for k, tri in enumerate(tris):
        a, b, c = int(tri[0]), int(tri[1]), int(tri[2])
        dofs[k, 3] = n0 + edge_ids[(min(a, b), max(a, b))]
        dofs[k, 4] = n0 + edge_ids[(min(b, c), max(b, c))]
        dofs[k, 5] = n0 + edge_ids[(min(a, c), max(a, c))]
    return dofs


def _geometry(mesh: Mesh) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Signed areas and barycentric gradient components per triangle."""
    p = mesh.nodes[mesh.triangles]          # (ne, 3, 2)
    x, y = p[:, :, 0], p[:, :, 1]
    # b_i = y_j - y_k, c_i = x_k - x_j for cyclic (i, j, k)
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    area = 0.5 * (
        (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0])
        - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0])
    )
    return area, b, c


def p1_local_matrices(vertices: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Exact P1 stiffness and mass matrices of a single triangle."""
    x, y = vertices[:, 0], vertices[:, 1]
    b = np.array([y[1] - y[2], y[2] - y[0], y[0] - y[1]])
    c = np.array([x[2] - x[1], x[0] - x[2], x[1] - x[0]])
    area = 0.5 * ((x[1] - x[0]) * (y[2] - y[0]) - (x[2] - x[0]) * (y[1] - y[0]))
    if area <= 0:
        raise AssemblyFailure(f"triangle with nonpositive area {area:.3e}")
    stiff = (np.outer(b, b) + np.outer(c, c)) / (4.0 * area)
    mass = (area / 12.0) * (np.ones((3, 3)) + np.eye(3))
    return stiff, mass


def assemble_operators(space: FemSpace) -> AssembledOperators:
    """Assemble mass/stiffness (exact integrals) and load quadrature data."""
    mesh = space.mesh
    area, b, c = _geometry(mesh)
    if np.any(area <= 0):
        bad = int(np.argmax(area <= 0))
        raise AssemblyFailure(f"triangle {bad} has nonpositive area {area[bad]:.3e}")

    dofs = _element_dofs(mesh, space.degree)
    ne, nl = dofs.shape

    if space.degree == 1:
        # closed-form local matrices, vectorized over elements
        stiff_loc = (
            np.einsum("ei,ej->eij", b, b) + np.einsum("ei,ej->eij", c, c)
        ) / (4.0 * area)[:, None, None]
        mass_loc = (np.ones((3, 3)) + np.eye(3))[None, :, :] * (area / 12.0)[:, None, None]
    else:
        stiff_loc = _quad_local(mesh, area, b, c, dofs, which="stiffness")
        mass_loc = _quad_local(mesh, area, b, c, dofs, which="mass")

    rows = np.repeat(dofs, nl, axis=1).ravel()
    cols = np.tile(dofs, (1, nl)).ravel()
    n_dofs = space.n_dofs
    full_stiff = sp.coo_matrix(
        (stiff_loc.ravel(), (rows, cols)), shape=(n_dofs, n_dofs)
    ).tocsr()
    full_mass = sp.coo_matrix(
        (mass_loc.ravel(), (rows, cols)), shape=(n_dofs, n_dofs)
    ).tocsr()

    # symmetrize round-off
    full_stiff = 0.5 * (full_stiff + full_stiff.T)
    full_mass = 0.5 * (full_mass + full_mass.T)

    free = space.free_idx
    stiff = full_stiff[free][:, free].tocsr()
    mass = full_mass[free][:, free].tocsr()

    quad = _build_quadrature(space, dofs, area)
    return AssembledOperators(
        mass=mass,
        stiffness=stiff,
        full_mass=full_mass.tocsr(),
        full_stiffness=full_stiff.tocsr(),
        space=space,
        quadrature=quad,
    )


def _quad_local(mesh, area, b, c, dofs, which: str) -> np.ndarray:
    """P2 local matrices by quadrature of exactly-integrable polynomials."""
    degree = 2 if which == "stiffness" else 4
    pts, w = triangle_rule(degree)
    bary = np.column_stack([1.0 - pts[:, 0] - pts[:, 1], pts[:, 0], pts[:, 1]])
    if which == "mass":
        phi = _p2_shape(bary)                       # (nq, 6)
        ref = np.einsum("q,qi,qj->ij", w, phi, phi)  # reference-triangle integrals
        # mass scales with |detJ| = 2*area only
        return ref[None, :, :] * (2.0 * area)[:, None, None]
    # stiffness: gradients mix geometry, do it per quadrature point
    l0, l1, l2 = bary[:, 0], bary[:, 1], bary[:, 2]
    coef = np.stack([
        np.column_stack([4 * l0 - 1, np.zeros_like(l0), np.zeros_like(l0)]),
        np.column_stack([np.zeros_like(l1), 4 * l1 - 1, np.zeros_like(l1)]),
        np.column_stack([np.zeros_like(l2), np.zeros_like(l2), 4 * l2 - 1]),
        np.column_stack([4 * l1, 4 * l0, np.zeros_like(l0)]),
        np.column_stack([np.zeros_like(l0), 4 * l2, 4 * l1]),
        np.column_stack([4 * l2, np.zeros_like(l0), 4 * l0]),
    ], axis=0)                                       # (6, nq, 3): d phi_i / d lambda_k
    # grad lambda_k = (b_k, c_k) / (2 area)
    gx = np.einsum("iqk,ek->eiq", coef, b) / (2.0 * area)[:, None, None]
    gy = np.einsum("iqk,ek->eiq", coef, c) / (2.0 * area)[:, None, None]
    stiff = (
        np.einsum("q,eiq,ejq->eij", w, gx, gx)
        + np.einsum("q,eiq,ejq->eij", w, gy, gy)
    ) * (2.0 * area)[:, None, None]
    return stiff


def _build_quadrature(space: FemSpace, dofs: np.ndarray, area: np.ndarray) -> QuadratureData:
    degree = 4 if space.degree == 1 else 8
    pts, w = triangle_rule(degree)
    nq = w.size
    bary = np.column_stack([1.0 - pts[:, 0] - pts[:, 1], pts[:, 0], pts[:, 1]])
    shape = _p1_shape(bary) if space.degree == 1 else _p2_shape(bary)  # (nq, nl)

    mesh = space.mesh
    ne, nl = dofs.shape
    verts = mesh.nodes[mesh.triangles]               # (ne, 3, 2)
    # global coordinates of all quadrature points
    pts_glob = np.einsum("qk,ekd->eqd", bary, verts).reshape(ne * nq, 2)
    weights = (w[None, :] * (2.0 * area)[:, None]).reshape(ne * nq)

    rows = np.repeat(np.arange(ne * nq), nl)
    cols = np.repeat(dofs[:, None, :], nq, axis=1).reshape(ne * nq, nl).ravel()
    vals = np.tile(shape, (ne, 1)).ravel()
    basis = sp.coo_matrix(
        (vals, (rows, cols)), shape=(ne * nq, space.n_dofs)
    ).tocsr()
    basis_free = basis[:, space.free_idx].tocsr()
    return QuadratureData(points=pts_glob, weights=weights, basis=basis,
                          basis_free=basis_free)


def l2_norm(coeffs: np.ndarray, ops: AssembledOperators) -> float:
    """sqrt(c' M c); stacked multi-component vectors give the combined norm."""
    coeffs = np.asarray(coeffs, dtype=float)
    k = ops.components_of(coeffs)
    mass, _ = ops.stacked(k)
    return float(np.sqrt(max(coeffs @ (mass @ coeffs), 0.0)))


def h1_seminorm(coeffs: np.ndarray, ops: AssembledOperators) -> float:
    """sqrt(c' A c); stacked multi-component vectors give the combined norm."""
    coeffs = np.asarray(coeffs, dtype=float)
    k = ops.components_of(coeffs)
    _, stiff = ops.stacked(k)
    return float(np.sqrt(max(coeffs @ (stiff @ coeffs), 0.0)))


def interpolate(space: FemSpace, fn, restrict: bool = True) -> np.ndarray:
    """Nodal interpolation of ``fn(x, y)`` onto the space."""
    vals = np.asarray(fn(space.dof_coords[:, 0], space.dof_coords[:, 1]), dtype=float)
    vals = np.broadcast_to(vals, (space.n_dofs,)).copy()
    if restrict:
        return vals[space.free_idx]
    return vals


def dump_matrix_csv(matrix: sp.spmatrix, path) -> None:
    """Triplet dump (row,col,value) used behind the debug flag."""
    coo = sp.coo_matrix(matrix)
    with open(path, "w") as f:
        f.write("row,col,value\n")
        for r, c, v in zip(coo.row, coo.col, coo.data):
            f.write(f"{r},{c},{float(v)!r}\n")


def dump_mesh_csv(mesh: Mesh, path) -> None:
    """Node and triangle dump behind the debug flag."""
    with open(path, "w") as f:
        f.write("kind,i0,i1,i2\n")
        for k, (x, y) in enumerate(mesh.nodes):
            f.write(f"node,{k},{float(x)!r},{float(y)!r}\n")
        for t in mesh.triangles:
            f.write(f"triangle,{t[0]},{t[1]},{t[2]}\n")
