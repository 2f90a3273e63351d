"""One-time construction of the piecewise-quadratic interpolant.

Given a 1-field and an admissible seminorm bound M, sites are shifted by
-gradient/M, the regular triangulation and power diagram of the shifted
points are built, and every face S of the triangulation yields one convex
cell T_S = (hull(S~) + dual(S)) / 2 stored in halfspace form together with
the anchor point S_C, the value offset at the anchor, and orthonormal bases
of the two orthogonal direction spaces the quadratic piece lives on.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import geom
from .core import OneField, validate
from .gamma import gamma1_exact, wells_condition_check


class WellsConditionViolatedError(ValueError):
    def __init__(self, pair: tuple[int, int], M: float):
        super().__init__(f"M={M} violates the admissibility condition at site pair {pair}")
        self.pair = pair


class RankDeficiencyError(np.linalg.LinAlgError):
    pass


@dataclass
class WellsCell:
    face_key: tuple[int, ...]
    A: np.ndarray            # (rows, d) halfspace normals
    b: np.ndarray            # (rows,)   offsets: inside iff A x <= b
    mu: np.ndarray           # centroid of the cell vertex set
    anchor: np.ndarray       # S_C
    offset: float            # d_S(S_C)
    basis_H: np.ndarray      # (j, d)   directions of the triangulation face
    basis_E: np.ndarray      # (d-j, d) directions of the dual face
    vertices: np.ndarray     # (m, d)   (site + dual vertex)/2 points

    @property
    def face_dim(self) -> int:
        return self.basis_H.shape[0]

    def contains(self, x: np.ndarray, tol_scale: float = 1e-9) -> bool:
        if self.A.shape[0] == 0:
            return True
        return bool(np.all(self.A @ x <= self.b + tol_scale * (1.0 + np.abs(self.b))))


@dataclass
class WellsModel:
    field: OneField
    M: float
    shifted: np.ndarray                      # (N, d)
    weights: np.ndarray                      # (N,) power weights of shifted sites
    lattice: geom.FaceLattice | None
    cells: list[WellsCell]
    uncovered_sites: list[int] = dc_field(default_factory=list)

    @property
    def dim(self) -> int:
        return self.field.dim

    @property
    def is_affine(self) -> bool:
        """True when all jets agree with one global affine function (M == 0)."""
        return self.lattice is None and len(self.cells) == 0


def distance_fn(field: OneField, M: float, a_index: int, x: np.ndarray) -> float:
    """d_a(x) = f_a - |D_a f|^2 / (2M) + (M/4) |x - a~|^2."""
    if M <= 0:
        raise ValueError("M must be positive")
    g = field.gradients[a_index]
    shifted = field.sites[a_index] - g / M
    r = np.asarray(x, dtype=float) - shifted
    return float(field.values[a_index] - (g @ g) / (2.0 * M) + 0.25 * M * (r @ r))


def power_weights(field: OneField, M: float) -> np.ndarray:
    """Weights making the shifted-site power function equal (4/M) d_a."""
    g2 = np.einsum("nd,nd->n", field.gradients, field.gradients)
    return 2.0 * g2 / M**2 - 4.0 * field.values / M


def compute_SC(face: geom.LatticeFace, shifted: np.ndarray,
               dual_positions: np.ndarray, field: OneField, M: float
               ) -> tuple[np.ndarray, float, np.ndarray, np.ndarray]:
    """Anchor point S_C, the value offset d_S(S_C), and the orthonormal
    direction bases of the face's affine hull and its orthogonal complement.

    S_C is the intersection of the face's affine hull with the orthogonal
    affine hull of the dual face; with orthonormal bases in hand it is the
    projection of any dual vertex onto the face's hull.
    """
    d = shifted.shape[1]
    idx = list(face.vertex_indices)
    pts = shifted[idx]
    basis_H = geom.orthonormal_basis(pts[1:] - pts[0], d)
    if basis_H.shape[0] != face.dim:
        raise RankDeficiencyError(
            f"face {face.vertex_indices} spans {basis_H.shape[0]} dims, expected {face.dim}")
    basis_E = geom.orthonormal_complement(basis_H, d)
    if face.dim == 0:
        anchor = pts[0]
    elif face.dim == d:
        anchor = dual_positions[0]
    else:
        if dual_positions.shape[0] == 0:
            raise RankDeficiencyError(f"face {face.vertex_indices} has no dual vertices")
        z = dual_positions[0]
        anchor = pts[0] + basis_H.T @ (basis_H @ (z - pts[0]))
    offset = float(np.mean([distance_fn(field, M, k, anchor) for k in idx]))
    return anchor, offset, basis_H, basis_E


def _row(normal: np.ndarray, point: np.ndarray, mu: np.ndarray) -> tuple[np.ndarray, float]:
    b = float(normal @ point)
    if normal @ mu > b:
        return -normal, -b
    return normal, b


def build_cell(face: geom.LatticeFace, lattice: geom.FaceLattice,
               shifted: np.ndarray, field: OneField, M: float) -> WellsCell:
    """Halfspace form of T_S for one lattice face.

    One bounding hyperplane per child of the face (spanning the dual face's
    directions plus the child's) and one per parent (spanning the face's
    directions plus the parent's dual face's); rows are oriented so that the
    cell's own vertices satisfy A x <= b.
    """
    d = shifted.shape[1]
    duals = lattice.dual_positions(face.vertex_indices)
    anchor, offset, basis_H, basis_E = compute_SC(face, shifted, duals, field, M)

    site_pts = shifted[list(face.vertex_indices)]
    vertices = 0.5 * (site_pts[:, None, :] + duals[None, :, :]).reshape(-1, d)
    mu = vertices.mean(axis=0)

    rows_A: list[np.ndarray] = []
    rows_b: list[float] = []
    # Hyperplanes (child + dual face)/2: normal lies in the face's direction
    # space, orthogonal to the child.
    for child in face.children:
        child_pts = shifted[list(child)]
        coords = (child_pts[1:] - child_pts[0]) @ basis_H.T  # (j-1, j)
        w = geom.orthonormal_complement(geom.orthonormal_basis(coords, basis_H.shape[0]),
                                        basis_H.shape[0])
        if w.shape[0] != 1:
            raise geom.SingularSystemError(
                f"child {child} of face {face.vertex_indices} is rank deficient")
        normal = w[0] @ basis_H
        point = 0.5 * (child_pts[0] + duals[0])
        a, b = _row(normal, point, mu)
        rows_A.append(a)
        rows_b.append(b)
    # Hyperplanes (face + parent's dual face)/2: normal lies in the dual
    # direction space, orthogonal to the parent's dual directions.
    for parent in face.parents:
        parent_pts = shifted[list(parent)]
        parent_H = geom.orthonormal_basis(parent_pts[1:] - parent_pts[0], d)
        if parent_H.shape[0] != len(parent) - 1:
            raise geom.SingularSystemError(
                f"parent {parent} of face {face.vertex_indices} is rank deficient")
        parent_E = geom.orthonormal_complement(parent_H, d)
        coords = parent_E @ basis_E.T  # parent dual dirs inside this dual space
        w = geom.orthonormal_complement(geom.orthonormal_basis(coords, basis_E.shape[0]),
                                        basis_E.shape[0])
        if w.shape[0] != 1:
            raise geom.SingularSystemError(
                f"parent {parent} of face {face.vertex_indices}: dual face rank deficient")
        normal = w[0] @ basis_E
        parent_duals = lattice.dual_positions(parent)
        point = 0.5 * (site_pts[0] + parent_duals[0])
        a, b = _row(normal, point, mu)
        rows_A.append(a)
        rows_b.append(b)

    A = np.array(rows_A).reshape(-1, d)
    b = np.array(rows_b)
    return WellsCell(face.vertex_indices, A, b, mu, anchor, offset,
                     basis_H, basis_E, vertices)


def build_model(field: OneField, M: float | None = None,
                check_condition: bool = True) -> WellsModel:
    """Run the one-time construction.

    M defaults to the exact minimal seminorm. M == 0 (all jets from one
    affine function) short-circuits to a single global affine piece.
    """
    validate(field)
    if M is None:
        M = gamma1_exact(field).value
    n, d = field.sites.shape
    if M < 0:
        raise ValueError("M must be nonnegative")
    # Jets within floating-point noise of one global affine function: the
    # curvature M contributes at most M * diam^2 anywhere on the data, so a
    # negligible M short-circuits to the affine interpolant (site shifts
    # gradient/M would blow up otherwise).
    diam = float(np.linalg.norm(field.sites.max(axis=0) - field.sites.min(axis=0)))
    scale = 1.0 + float(np.max(np.abs(field.values))) \
        + float(np.max(np.abs(field.gradients))) * (1.0 + diam)
    if M * (1.0 + diam) ** 2 <= 1e-12 * scale:
        return WellsModel(field, 0.0, field.sites.copy(), np.zeros(n), None, [])
    if check_condition:
        bad = wells_condition_check(field, M)
        if bad is not None:
            raise WellsConditionViolatedError(bad, M)

    shifted = field.sites - field.gradients / M
    if n == 1:
        # Single site: one unbounded cell covering all of R^d.
        cell = WellsCell((0,), np.zeros((0, d)), np.zeros(0), shifted[0],
                         shifted[0], distance_fn(field, M, 0, shifted[0]),
                         np.zeros((0, d)), np.eye(d), shifted[:1].copy())
        return WellsModel(field, M, shifted, power_weights(field, M), None, [cell])

    dupe = _duplicate_rows(shifted)
    if dupe is not None:
        raise geom.DegenerateConfigurationError(
            f"shifted sites {dupe[0]} and {dupe[1]} coincide", dupe)
    weights = power_weights(field, M)
    try:
        lattice = geom.build_lattice(shifted, weights)
    except geom.DegenerateInputError as exc:
        raise geom.DegenerateConfigurationError(str(exc)) from exc
    geom.build_power_diagram(lattice, shifted, weights)

    cells = [build_cell(lattice.faces[key], lattice, shifted, field, M)
             for key in sorted(lattice.faces, key=lambda k: (len(k), k))]
    uncovered = [k for k in range(n) if (k,) not in lattice.faces]
    if uncovered:
        warnings.warn(
            f"sites {uncovered} have empty power cells; interpolation "
            f"exactness at those sites is not guaranteed", RuntimeWarning)
    return WellsModel(field, M, shifted, weights, lattice, cells, uncovered)


def _duplicate_rows(points: np.ndarray) -> tuple[int, int] | None:
    seen: dict[bytes, int] = {}
    for i, row in enumerate(points):
        key = row.tobytes()
        if key in seen:
            return seen[key], i
        seen[key] = i
    return None


SCHEMA_VERSION = 1


def model_to_json(model: WellsModel) -> str:
    """Versioned JSON document; floats keep full round-trip precision."""
    lattice = model.lattice
    doc = {
        "schema_version": SCHEMA_VERSION,
        "field": {
            "dim": model.dim,
            "sites": model.field.sites.tolist(),
            "values": model.field.values.tolist(),
            "gradients": model.field.gradients.tolist(),
        },
        "M": model.M,
        "shifted": model.shifted.tolist(),
        "weights": model.weights.tolist(),
        "uncovered_sites": model.uncovered_sites,
        "faces": None if lattice is None else [
            {
                "dim": f.dim,
                "vertex_indices": list(f.vertex_indices),
                "children": [list(c) for c in f.children],
                "parents": [list(p) for p in f.parents],
                "dual_vertex_ids": f.dual_vertex_ids,
            }
            for f in (lattice.faces[k] for k in sorted(lattice.faces,
                                                       key=lambda k: (len(k), k)))
        ],
        "dual_vertices": None if lattice is None else [
            {"position": v.position.tolist(), "synthetic": v.synthetic}
            for v in lattice.dual_vertices
        ],
        "cells": [
            {
                "face_key": list(c.face_key),
                "A": c.A.tolist(),
                "b": c.b.tolist(),
                "mu": c.mu.tolist(),
                "anchor": c.anchor.tolist(),
                "offset": c.offset,
                "basis_H": c.basis_H.tolist(),
                "basis_E": c.basis_E.tolist(),
                "vertices": c.vertices.tolist(),
            }
            for c in model.cells
        ],
    }
    return json.dumps(doc)


def model_from_json(text: str) -> WellsModel:
    doc = json.loads(text)
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported model schema version {doc.get('schema_version')}")
    fd = doc["field"]
    field = OneField(np.array(fd["sites"], dtype=float).reshape(-1, fd["dim"]),
                     np.array(fd["values"], dtype=float),
                     np.array(fd["gradients"], dtype=float).reshape(-1, fd["dim"]))
    d = field.dim
    lattice = None
    if doc["faces"] is not None:
        faces = {}
        simplices = []
        for f in doc["faces"]:
            key = tuple(f["vertex_indices"])
            faces[key] = geom.LatticeFace(
                f["dim"], key,
                [tuple(c) for c in f["children"]],
                [tuple(p) for p in f["parents"]],
                list(f["dual_vertex_ids"]))
            if f["dim"] == d:
                simplices.append(key)
        duals = [geom.DualVertex(np.array(v["position"], dtype=float), v["synthetic"])
                 for v in doc["dual_vertices"]]
        lattice = geom.FaceLattice(d, faces, sorted(simplices), duals)
    cells = [
        WellsCell(tuple(c["face_key"]),
                  np.array(c["A"], dtype=float).reshape(-1, d),
                  np.array(c["b"], dtype=float),
                  np.array(c["mu"], dtype=float),
                  np.array(c["anchor"], dtype=float),
                  float(c["offset"]),
                  np.array(c["basis_H"], dtype=float).reshape(-1, d),
                  np.array(c["basis_E"], dtype=float).reshape(-1, d),
                  np.array(c["vertices"], dtype=float).reshape(-1, d))
        for c in doc["cells"]
    ]
    return WellsModel(field, float(doc["M"]),
                      np.array(doc["shifted"], dtype=float).reshape(-1, d),
                      np.array(doc["weights"], dtype=float),
                      lattice, cells, list(doc["uncovered_sites"]))
