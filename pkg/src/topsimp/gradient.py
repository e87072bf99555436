"""Lower-star discrete gradient and its localized update."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _kernels as K
from .grid import Grid, ScalarField, VertexOrder


@dataclass(frozen=True)
class DiscreteGradient:
    """Pairing of simplices into gradient vectors.

    ``partner[gid]`` holds the id of the simplex paired with ``gid`` (a facet
    or a cofacet) or -1 when ``gid`` is critical. Entries at invalid ids are
    meaningless.
    """

    grid: Grid
    partner: np.ndarray

    def critical(self, k: int) -> np.ndarray:
        lo, hi = self.grid.base[k], self.grid.base[k + 1]
        mask = (self.partner[lo:hi] == -1) & self.grid.valid[lo:hi]
        return np.flatnonzero(mask) + lo

    def critical_counts(self) -> list[int]:
        return [int(self.critical(k).size) for k in range(self.grid.d + 1)]

    def is_critical(self, gid: int) -> bool:
        return self.partner[gid] == -1

    def copy(self) -> "DiscreteGradient":
        return DiscreteGradient(self.grid, self.partner.copy())

    def __eq__(self, other):
        if not isinstance(other, DiscreteGradient):
            return NotImplemented
        v = self.grid.valid
        return self.grid.shape == other.grid.shape and np.array_equal(self.partner[v], other.partner[v])


class Violation(NamedTuple):
    kind: str
    simplex: int
    other: int


def process_lower_star(grid: Grid, v: int, order: VertexOrder) -> dict[int, int]:
    """Local pairing of the lower star of ``v`` as {gid: partner or -1}."""
    partner = np.full(grid.n_ids, -3, dtype=np.int64)
    K.gradient_for(np.array([v], dtype=np.int64), order.rank, partner, *grid.tables)
    touched = np.flatnonzero(partner != -3)
    return {int(s): int(partner[s]) for s in touched}


def build_gradient(grid: Grid, order: VertexOrder) -> DiscreteGradient:
    partner = np.full(grid.n_ids, -1, dtype=np.int64)
    K.gradient_for(np.arange(grid.n_vertices, dtype=np.int64), order.rank, partner, *grid.tables)
    return DiscreteGradient(grid, partner)


def reprocess_set(grid: Grid, updated) -> np.ndarray:
    """Vertices whose lower star may change when ``updated`` vertices move."""
    updated = np.asarray(sorted(updated), dtype=np.int64)
    if updated.size == 0:
        return updated
    return K.expand_neighbors(updated, grid.n_vertices, *grid.tables)


def update_gradient(g: DiscreteGradient, order: VertexOrder, updated, check: bool = False) -> DiscreteGradient:
    """Recompute the gradient only on lower stars touched by ``updated``.

    ``order`` is the vertex order of the new field. With ``check`` the result
    is compared against a full rebuild.
    """
    redo = reprocess_set(g.grid, updated)
    if redo.size == 0:
        return g
    partner = g.partner.copy()
    K.gradient_for(redo, order.rank, partner, *g.grid.tables)
    out = DiscreteGradient(g.grid, partner)
    if check:
        full = build_gradient(g.grid, order)
        if not out == full:
            raise AssertionError("incremental gradient differs from full rebuild; stale updated-vertex set?")
    return out


def validate_gradient(g: DiscreteGradient) -> Violation | None:
    """Return the first violation found, or None for a valid gradient field."""
    grid = g.grid
    valid = grid.valid
    partner = g.partner
    ids = np.flatnonzero(valid & (partner >= 0))
    for s in ids:
        p = int(partner[s])
        if p >= grid.n_ids or not valid[p]:
            return Violation("invalid-partner", int(s), p)
        if partner[p] != s:
            return Violation("involution", int(s), p)
        ks, kp = grid.simplex_dim(int(s)), grid.simplex_dim(p)
        if abs(ks - kp) != 1:
            return Violation("dimension", int(s), p)
        lo, hi = (s, p) if ks < kp else (p, s)
        if lo not in grid.facets(int(hi)):
            return Violation("not-a-facet", int(lo), int(hi))
    color = np.zeros(grid.n_ids, dtype=np.int64)
    for k in range(grid.d):
        starts = grid.simplices(k + 1)
        if K.has_cycle(starts, partner, k, color, *grid.tables):
            return Violation("cycle", k, k + 1)
    return None
