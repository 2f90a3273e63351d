"""Point location and evaluation of the piecewise-quadratic interpolant.

Locating x in a cell T_S gives the split x = (y + z)/2 with y in the
triangulation face's affine hull and z in the dual face's; the interpolant
and its gradient then follow in closed form from the cell's anchor, offset,
and bound M. A simple hyperplane-split locator tree accelerates location for
large models, falling back to the exhaustive scan whenever a leaf misses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import jet_eval
from .wells import WellsCell, WellsModel


class NoCellFoundError(RuntimeError):
    def __init__(self, x: np.ndarray):
        super().__init__(f"no cell contains the query point {x}")
        self.point = np.asarray(x, dtype=float)


@dataclass(frozen=True)
class QueryResult:
    value: float
    gradient: np.ndarray
    cell_index: int


def locate(model: WellsModel, x: np.ndarray, tol_scale: float = 1e-9) -> int:
    """Index of the lowest-indexed cell whose halfspaces admit x."""
    x = np.asarray(x, dtype=float)
    for i, cell in enumerate(model.cells):
        if cell.contains(x, tol_scale):
            return i
    raise NoCellFoundError(x)


def split_point(cell: WellsCell, x: np.ndarray,
                shifted: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Decompose x = (y + z)/2 with y in the face hull, z in the dual hull.

    With the anchor c on both affine hulls: y = c + 2 P_H (x - c) and
    z = c + 2 P_E (x - c), where P_H, P_E project on the two orthogonal
    direction spaces.
    """
    c = cell.anchor
    r = np.asarray(x, dtype=float) - c
    y = c + 2.0 * (cell.basis_H.T @ (cell.basis_H @ r))
    z = c + 2.0 * (cell.basis_E.T @ (cell.basis_E @ r))
    return y, z


def eval_in_cell(model: WellsModel, cell: WellsCell, x: np.ndarray) -> tuple[float, np.ndarray]:
    M = model.M
    y, z = split_point(cell, x, model.shifted)
    c = cell.anchor
    value = cell.offset + 0.125 * M * float((z - c) @ (z - c)) \
        - 0.125 * M * float((y - c) @ (y - c))
    gradient = 0.5 * M * (z - y)
    return value, gradient


def evaluate(model: WellsModel, x: np.ndarray,
             tree: "LocatorTree | None" = None) -> QueryResult:
    """Interpolant value and gradient at x.

    Location tolerance is retried 10x looser before giving up; points on
    cell boundaries resolve to the lowest cell index, where all incident
    cells agree in value and gradient.
    """
    x = np.asarray(x, dtype=float)
    if model.is_affine:
        value, gradient = _affine_eval(model, x)
        return QueryResult(value, gradient, -1)
    if len(model.cells) == 1 and model.lattice is None:
        value, gradient = eval_in_cell(model, model.cells[0], x)
        return QueryResult(value, gradient, 0)
    idx = None
    if tree is not None:
        idx = tree.locate(x)
    if idx is None:
        try:
            idx = locate(model, x)
        except NoCellFoundError:
            idx = locate(model, x, tol_scale=1e-8)
    value, gradient = eval_in_cell(model, model.cells[idx], x)
    return QueryResult(value, gradient, idx)


def evaluate_many(model: WellsModel, points: np.ndarray,
                  tree: "LocatorTree | None" = None) -> tuple[np.ndarray, np.ndarray]:
    """Batch evaluation; the containment tests run matrix-at-a-time, with a
    per-point looser-tolerance retry for any stragglers."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if model.is_affine or (len(model.cells) == 1 and model.lattice is None):
        values = np.empty(len(points))
        gradients = np.empty_like(points)
        for i, x in enumerate(points):
            res = evaluate(model, x, tree)
            values[i] = res.value
            gradients[i] = res.gradient
        return values, gradients

    cells = model.cells
    A = np.vstack([c.A for c in cells])
    b = np.concatenate([c.b for c in cells])
    counts = np.array([c.A.shape[0] for c in cells])
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    tol = 1e-9 * (1.0 + np.abs(b))
    sat = (A @ points.T) <= (b + tol)[:, None]           # (rows, P)
    inside = np.add.reduceat(sat, starts, axis=0) == counts[:, None]
    first = np.argmax(inside, axis=0)
    missed = ~inside[first, np.arange(len(points))]

    values = np.empty(len(points))
    gradients = np.empty_like(points)
    for ci in np.unique(first):
        sel = (first == ci) & ~missed
        if not np.any(sel):
            continue
        cell = cells[ci]
        r = points[sel] - cell.anchor
        y = 2.0 * (r @ cell.basis_H.T @ cell.basis_H)    # y - c
        z = 2.0 * (r @ cell.basis_E.T @ cell.basis_E)    # z - c
        values[sel] = cell.offset + 0.125 * model.M * (
            np.einsum("pd,pd->p", z, z) - np.einsum("pd,pd->p", y, y))
        gradients[sel] = 0.5 * model.M * (z - y)
    for i in np.flatnonzero(missed):
        res = evaluate(model, points[i], tree)
        values[i] = res.value
        gradients[i] = res.gradient
    return values, gradients


def _affine_eval(model: WellsModel, x: np.ndarray) -> tuple[float, np.ndarray]:
    g = model.field.gradients[0]
    return jet_eval(model.field.jet(0), model.field.sites[0], x), g.copy()


@dataclass
class _TreeNode:
    cell_indices: np.ndarray
    normal: np.ndarray | None = None
    offset: float = 0.0
    low: "_TreeNode | None" = None
    high: "_TreeNode | None" = None


class LocatorTree:
    """Greedy most-balanced splits by hyperplanes taken from the cells' rows.

    A cell goes to the low (high) side when any of its vertices does; cells
    straddling a split go to both sides, so every leaf holds all candidates
    for probes near its member cells' vertex hulls. A miss at a leaf returns
    None and the caller falls back to the exhaustive scan; no balance is
    guaranteed.
    """

    def __init__(self, model: WellsModel, leaf_size: int = 16,
                 max_depth: int = 32, max_candidates: int = 48):
        self.model = model
        self.leaf_size = leaf_size
        self.max_candidates = max_candidates
        self.root = self._build(np.arange(len(model.cells)), 0, max_depth)

    def _candidate_rows(self, idx: np.ndarray) -> list[tuple[np.ndarray, float]]:
        rows = [(cell.A[r], float(cell.b[r]))
                for i in idx for cell in (self.model.cells[i],)
                for r in range(cell.A.shape[0])]
        if len(rows) > self.max_candidates:
            stride = len(rows) // self.max_candidates
            rows = rows[::stride][: self.max_candidates]
        return rows

    def _build(self, idx: np.ndarray, depth: int, max_depth: int) -> _TreeNode:
        if len(idx) <= self.leaf_size or depth >= max_depth:
            return _TreeNode(idx)
        verts = [self.model.cells[i].vertices for i in idx]
        best = None
        for normal, offset in self._candidate_rows(idx):
            side_min = np.array([float((v @ normal).min()) for v in verts])
            side_max = np.array([float((v @ normal).max()) for v in verts])
            go_low = side_min <= offset
            go_high = side_max >= offset
            cost = max(int(go_low.sum()), int(go_high.sum()))
            if best is None or cost < best[0]:
                best = (cost, normal, offset, go_low, go_high)
        if best is None or best[0] >= len(idx):  # no separating row; stop
            return _TreeNode(idx)
        cost, normal, offset, go_low, go_high = best
        return _TreeNode(idx, normal, offset,
                         self._build(idx[go_low], depth + 1, max_depth),
                         self._build(idx[go_high], depth + 1, max_depth))

    def locate(self, x: np.ndarray, tol_scale: float = 1e-9) -> int | None:
        node = self.root
        while node.normal is not None:
            node = node.low if float(node.normal @ x) <= node.offset else node.high
        for i in node.cell_indices:
            if self.model.cells[i].contains(x, tol_scale):
                return int(i)
        return None
