"""Lifted convex hull, regular triangulation, power diagram, and the face
lattice connecting them.

Weighted sites in R^d are lifted to R^{d+1} via p -> (p, |p|^2 - w(p)); the
lower hull of the lifted points projects to the regular triangulation, whose
face lattice (children/parents) is built explicitly. Dual power-diagram
vertices (power centers, plus synthetic points marking unbounded rays) are
attached to every face by descending the lattice.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from itertools import combinations

import numpy as np
from scipy.spatial import ConvexHull
from scipy.spatial import QhullError


class DegenerateInputError(ValueError):
    """All points lie in a lower-dimensional affine subspace."""


class DegenerateConfigurationError(ValueError):
    """Cospherical/copower sites: a lower-hull facet is not a simplex."""

    def __init__(self, msg: str, vertex_set: tuple[int, ...] | None = None):
        super().__init__(msg)
        self.vertex_set = vertex_set


class SingularSystemError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class HullFacet:
    vertex_indices: tuple[int, ...]
    inward_normal: np.ndarray  # unit normal, points . n >= offset for hull points
    offset: float


@dataclass(frozen=True)
class DualVertex:
    position: np.ndarray
    synthetic: bool = False  # True for the marker point placed along an unbounded ray


@dataclass
class LatticeFace:
    dim: int
    vertex_indices: tuple[int, ...]             # sorted site indices
    children: list[tuple[int, ...]] = dc_field(default_factory=list)
    parents: list[tuple[int, ...]] = dc_field(default_factory=list)
    dual_vertex_ids: list[int] = dc_field(default_factory=list)


@dataclass
class FaceLattice:
    top_dim: int
    faces: dict[tuple[int, ...], LatticeFace]
    simplices: list[tuple[int, ...]]            # top-dimensional faces
    dual_vertices: list[DualVertex] = dc_field(default_factory=list)

    def faces_of_dim(self, j: int) -> list[LatticeFace]:
        return [f for f in self.faces.values() if f.dim == j]

    def dual_positions(self, key: tuple[int, ...]) -> np.ndarray:
        ids = self.faces[key].dual_vertex_ids
        return np.array([self.dual_vertices[i].position for i in ids])


def lift(points: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Map each weighted site p to (p, |p|^2 - w(p)) in R^{d+1}."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    weights = np.atleast_1d(np.asarray(weights, dtype=float))
    return np.column_stack([points, np.sum(points**2, axis=1) - weights])


def convex_hull(points: np.ndarray) -> list[HullFacet]:
    """Facets of the convex hull with inward unit normals.

    Backed by Qhull with triangulated output; degenerate (affinely
    dependent) input raises DegenerateInputError.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    try:
        hull = ConvexHull(points, qhull_options="Qt")
    except QhullError as exc:
        raise DegenerateInputError(f"convex hull failed: {exc}") from exc
    facets = []
    for simplex, eq in zip(hull.simplices, hull.equations):
        # Qhull equations satisfy normal . x + offset <= 0 inside.
        facets.append(HullFacet(tuple(sorted(int(i) for i in simplex)),
                                -eq[:-1], float(eq[-1])))
    return facets


def lower_hull(facets: list[HullFacet]) -> list[HullFacet]:
    """Facets whose inward normal has (strictly) positive last coordinate."""
    return [f for f in facets if f.inward_normal[-1] > 1e-12]


def power_center(simplex_points: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """The point with equal power to all d+1 vertices of a d-simplex."""
    p = np.atleast_2d(np.asarray(simplex_points, dtype=float))
    w = np.atleast_1d(np.asarray(weights, dtype=float))
    lhs = 2.0 * (p[1:] - p[0])
    rhs = w[0] - w[1:] + np.sum(p[1:] ** 2, axis=1) - p[0] @ p[0]
    try:
        rho = np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(f"degenerate simplex: {exc}") from exc
    if not np.all(np.isfinite(rho)):
        raise SingularSystemError("degenerate simplex: non-finite power center")
    return rho


def _simplex_volume_ok(points: np.ndarray, rel_tol: float = 1e-9) -> bool:
    diffs = points[1:] - points[0]
    scale = np.max(np.abs(diffs)) or 1.0
    det = np.linalg.det(diffs / scale)
    return abs(det) > rel_tol


def _lower_hull_simplices(points: np.ndarray, weights: np.ndarray) -> list[tuple[int, ...]]:
    d = points.shape[1]
    lifted = lift(points, weights)
    low = lower_hull(convex_hull(lifted))
    # Two lower-hull simplices on one hyperplane mean Qhull triangulated a
    # non-simplicial (copower) facet.
    keys: dict[tuple, tuple[int, ...]] = {}
    for f in low:
        key = tuple(np.round(np.append(f.inward_normal, f.offset), 9))
        if key in keys:
            raise DegenerateConfigurationError(
                "copower sites: lower-hull facet is not a simplex",
                tuple(sorted(set(keys[key]) | set(f.vertex_indices))))
        keys[key] = f.vertex_indices
    for f in low:
        if not _simplex_volume_ok(points[list(f.vertex_indices)]):
            raise DegenerateConfigurationError(
                "degenerate projected simplex", f.vertex_indices)
    return [f.vertex_indices for f in low]


def build_lattice(points: np.ndarray, weights: np.ndarray) -> FaceLattice:
    """All faces of the regular triangulation with children/parents.

    Supports N >= d+2 (via the lifted hull) and the simplex case N == d+1;
    fewer points cannot be in general position in R^d.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    weights = np.atleast_1d(np.asarray(weights, dtype=float))
    n, d = points.shape
    if n == d + 1:
        if not _simplex_volume_ok(points):
            raise DegenerateConfigurationError(
                "sites are affinely dependent", tuple(range(n)))
        simplices = [tuple(range(n))]
    elif n >= d + 2:
        simplices = _lower_hull_simplices(points, weights)
    else:
        raise DegenerateConfigurationError(
            f"need at least d+1={d + 1} sites in general position, got {n}")

    faces: dict[tuple[int, ...], LatticeFace] = {}
    for simplex in simplices:
        for size in range(1, len(simplex) + 1):
            for sub in combinations(simplex, size):
                if sub not in faces:
                    faces[sub] = LatticeFace(size - 1, sub)
    for key, face in faces.items():
        if face.dim >= 1:
            face.children = [tuple(c) for c in combinations(key, len(key) - 1)]
        face.parents = []
    for key, face in faces.items():
        for child in face.children:
            faces[child].parents.append(key)
    for face in faces.values():
        face.parents.sort()
    return FaceLattice(top_dim=d, faces=faces, simplices=sorted(simplices))


def orthonormal_basis(vectors: np.ndarray, d: int, rel_tol: float = 1e-9) -> np.ndarray:
    """Orthonormal basis (rows) of the span of the given row vectors."""
    if len(vectors) == 0:
        return np.zeros((0, d))
    vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
    u, s, vt = np.linalg.svd(vectors, full_matrices=False)
    rank = int(np.sum(s > rel_tol * s[0])) if s.size and s[0] > 0 else 0
    return vt[:rank]


def orthonormal_complement(basis: np.ndarray, d: int) -> np.ndarray:
    """Orthonormal basis (rows) of the orthogonal complement in R^d."""
    if basis.shape[0] == 0:
        return np.eye(d)
    _, _, vt = np.linalg.svd(basis, full_matrices=True)
    return vt[basis.shape[0]:]


def build_power_diagram(lattice: FaceLattice, points: np.ndarray,
                        weights: np.ndarray) -> FaceLattice:
    """Populate every face's dual power-diagram vertex list.

    Top simplices get their power center; exterior ridges additionally get
    a synthetic point one data-diameter out along the unbounded dual ray;
    lower faces take the union of their parents' dual vertices.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    weights = np.atleast_1d(np.asarray(weights, dtype=float))
    d = lattice.top_dim
    spread = points.max(axis=0) - points.min(axis=0)
    ray_length = float(np.linalg.norm(spread)) or 1.0

    lattice.dual_vertices = []
    center_id: dict[tuple[int, ...], int] = {}
    for simplex in lattice.simplices:
        rho = power_center(points[list(simplex)], weights[list(simplex)])
        center_id[simplex] = len(lattice.dual_vertices)
        lattice.dual_vertices.append(DualVertex(rho))
        lattice.faces[simplex].dual_vertex_ids = [center_id[simplex]]

    # Synthetic ray points for exterior ridges (one parent simplex).
    ridge_extra: dict[tuple[int, ...], int] = {}
    for face in lattice.faces_of_dim(d - 1):
        if len(face.parents) == 1:
            parent = face.parents[0]
            ridge_pts = points[list(face.vertex_indices)]
            basis = orthonormal_basis(ridge_pts[1:] - ridge_pts[0], d)
            normal = orthonormal_complement(basis, d)[0]
            opposite = (set(parent) - set(face.vertex_indices)).pop()
            if normal @ (points[opposite] - ridge_pts[0]) > 0:
                normal = -normal
            origin = lattice.dual_vertices[center_id[parent]].position
            ridge_extra[face.vertex_indices] = len(lattice.dual_vertices)
            lattice.dual_vertices.append(DualVertex(origin + ray_length * normal,
                                                    synthetic=True))

    for j in range(d - 1, -1, -1):
        for face in lattice.faces_of_dim(j):
            ids: set[int] = set()
            for parent in face.parents:
                ids.update(lattice.faces[parent].dual_vertex_ids)
            if face.vertex_indices in ridge_extra:
                ids.add(ridge_extra[face.vertex_indices])
            face.dual_vertex_ids = sorted(ids)
    return lattice


def lattice_dump(lattice: FaceLattice) -> str:
    """Structured text dump of the lattice for golden-file comparisons."""
    lines = []
    for key in sorted(lattice.faces, key=lambda k: (len(k), k)):
        face = lattice.faces[key]
        duals = ";".join(
            ("S" if lattice.dual_vertices[i].synthetic else "C")
            + ",".join(f"{c:.12g}" for c in lattice.dual_vertices[i].position)
            for i in face.dual_vertex_ids)
        lines.append(f"dim={face.dim} verts={key} children={sorted(face.children)} "
                     f"parents={sorted(face.parents)} duals=[{duals}]")
    return "\n".join(lines)
