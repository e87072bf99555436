"""Persistence diagrams of the lexicographic lower-star filtration.

``compute_diagram`` pairs critical simplices of the discrete gradient:
union-find along descending V-paths for dimension 0, union-find along
ascending V-paths on the dual for dimension d-1, and a mod-2 reduction of the
Morse-complex boundary for the saddle-saddle pairs of 3D grids.
``brute_force_diagram`` reduces the full boundary matrix and serves as an
independent oracle on small grids.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from collections import Counter

import numpy as np

from . import _kernels as K
from .grid import Grid, ScalarField, VertexOrder, build_vertex_order
from .gradient import DiscreteGradient, build_gradient, update_gradient

ORACLE_MAX_SIMPLICES = 50_000


class OracleSizeError(RuntimeError):
    pass


@dataclass(frozen=True)
class PersistencePair:
    dim: int
    birth_simplex: int
    death_simplex: int  # -1 for infinite pairs
    birth_vertex: int
    death_vertex: int  # last vertex of the global order for infinite pairs
    birth: float
    death: float
    finite: bool

    @property
    def persistence(self) -> float:
        return self.death - self.birth

    @property
    def key(self) -> tuple[int, bool, int, int]:
        return (self.dim, self.finite, self.birth_vertex, self.death_vertex)

    @property
    def point(self) -> tuple[float, float]:
        return (self.birth, self.death)


@dataclass
class PersistenceDiagram:
    pairs: list[PersistencePair] = dc_field(default_factory=list)
    n_zero_persistence: int = 0

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def __getitem__(self, i):
        return self.pairs[i]

    def finite(self, dim: int | None = None) -> list[PersistencePair]:
        return [p for p in self.pairs if p.finite and (dim is None or p.dim == dim)]

    def infinite(self) -> list[PersistencePair]:
        return [p for p in self.pairs if not p.finite]

    def signature(self) -> Counter:
        """Multiset of (dim, birthVertex, deathVertex, finite)."""
        return Counter((p.dim, p.birth_vertex, p.death_vertex, p.finite) for p in self.pairs)

    def same_pairs(self, other: "PersistenceDiagram") -> bool:
        return self.signature() == other.signature()

    def points(self, dim: int, finite: bool = True) -> np.ndarray:
        pts = [p.point for p in self.pairs if p.dim == dim and p.finite == finite]
        return np.array(pts, dtype=float).reshape(-1, 2)


def _make_pair(dim, bs, ds, bv, dv, values, finite):
    return PersistencePair(dim, int(bs), int(ds), int(bv), int(dv), float(values[bv]), float(values[dv]), finite)


def _assemble(grid, values, order, raw_pairs, unpaired):
    """Build the diagram from (dim, birth_gid, death_gid) triples plus unpaired critical ids."""
    ids = np.array([b for _, b, _ in raw_pairs] + [dd for _, _, dd in raw_pairs] + list(unpaired),
                   dtype=np.int64)
    mv = K.max_vertex(ids, order.rank, *grid.tables) if ids.size else ids
    n = len(raw_pairs)
    vmax = int(order.inverse[-1])
    pairs, zero = [], 0
    for i, (dim, b, dd) in enumerate(raw_pairs):
        bv, dv = mv[i], mv[n + i]
        if bv == dv:
            zero += 1
            continue
        pairs.append(_make_pair(dim, b, dd, bv, dv, values, True))
    for j, s in enumerate(unpaired):
        bv = mv[2 * n + j]
        pairs.append(_make_pair(grid.simplex_dim(int(s)), s, -1, bv, vmax, values, False))
    rank = order.rank
    pairs.sort(key=lambda p: (p.dim, not p.finite, rank[p.birth_vertex], rank[p.death_vertex]))
    return PersistenceDiagram(pairs, zero)


class _UnionFind:
    def __init__(self):
        self.parent = {}

    def find(self, x):
        parent = self.parent
        root = x
        while parent.get(root, root) != root:
            root = parent[root]
        while parent.get(x, x) != root:
            parent[x], x = root, parent[x]
        return root


def pair_critical_simplices(g: DiscreteGradient, field: ScalarField, order: VertexOrder) -> PersistenceDiagram:
    """Persistence pairs from the critical simplices of a lower-star gradient."""
    grid = g.grid
    d = grid.d
    values = field.values
    rank = order.rank
    tables = grid.tables
    raw = []
    paired = set()

    # dimension 0: components merge along critical edges
    pos_edges = []
    if d >= 1:
        edges = grid.sort_by_key(g.critical(1), order)
        ends = K.descend_ends(edges, g.partner, *tables)
        uf = _UnionFind()
        for e, (a, b) in zip(edges.tolist(), ends.tolist()):
            ra, rb = uf.find(a), uf.find(b)
            if ra == rb:
                pos_edges.append(e)
                continue
            young, old = (ra, rb) if rank[ra] > rank[rb] else (rb, ra)
            uf.parent[young] = old
            raw.append((0, young, e))
            paired.update((young, e))

    # dimension d-1: dual components (d-cells plus the outside) merge along critical (d-1)-cells
    if d >= 2:
        top = g.critical(d)
        top_sorted = grid.sort_by_key(top, order)
        age = {int(t): i for i, t in enumerate(top_sorted.tolist())}
        age[K.OUTSIDE] = len(age)
        cells = grid.sort_by_key(g.critical(d - 1), order)[::-1]
        ends = K.ascend_ends(np.ascontiguousarray(cells), g.partner, *tables)
        uf = _UnionFind()
        for c, (a, b) in zip(cells.tolist(), ends.tolist()):
            ra, rb = uf.find(a), uf.find(b)
            if ra == rb:
                continue
            young, old = (ra, rb) if age[ra] < age[rb] else (rb, ra)
            uf.parent[young] = old
            raw.append((d - 1, c, young))
            paired.update((c, young))

    # saddle-saddle pairs: reduce the Morse boundary of the remaining triangles
    if d == 3:
        pos_set = set(pos_edges)
        edge_pos = {e: i for i, e in enumerate(pos_edges)}
        tris = [t for t in grid.sort_by_key(g.critical(2), order).tolist() if t not in paired]
        n = grid.n_ids
        indeg = np.zeros(n, dtype=np.int64)
        cnt = np.zeros(n, dtype=np.int64)
        mark = np.zeros(n, dtype=np.int64)
        owner = {}
        for t in tris:
            tg, tc = K.count_paths(t, True, 0, g.partner, indeg, cnt, mark, *tables)
            col = 0
            for e, c in zip(tg.tolist(), tc.tolist()):
                if c and e in pos_set:
                    col ^= 1 << edge_pos[e]
            while col:
                low = col.bit_length() - 1
                if low not in owner:
                    break
                col ^= owner[low]
            if col:
                low = col.bit_length() - 1
                owner[low] = col
                e = pos_edges[low]
                raw.append((1, e, t))
                paired.update((e, t))

    unpaired = []
    for k in range(d + 1):
        unpaired.extend(s for s in g.critical(k).tolist() if s not in paired)
    unpaired = [int(s) for s in grid.sort_by_key(np.array(unpaired, dtype=np.int64), order)]
    return _assemble(grid, values, order, raw, unpaired)


def compute_diagram(field: ScalarField, grid: Grid | None = None):
    """Return (diagram, gradient, order) for ``field``."""
    grid = grid or Grid(field.dims)
    order = build_vertex_order(field)
    g = build_gradient(grid, order)
    return pair_critical_simplices(g, field, order), g, order


def update_diagram(prev: DiscreteGradient, field: ScalarField, updated, check: bool = False):
    """Same result as ``compute_diagram(field)``, reusing ``prev`` outside the updated region."""
    order = build_vertex_order(field)
    g = update_gradient(prev, order, updated, check=check)
    return pair_critical_simplices(g, field, order), g, order


def brute_force_diagram(field: ScalarField, grid: Grid | None = None) -> PersistenceDiagram:
    """Standard Z/2 boundary-matrix reduction over the full lexicographic filtration."""
    grid = grid or Grid(field.dims)
    if grid.n_simplices > ORACLE_MAX_SIMPLICES:
        raise OracleSizeError(f"{grid.n_simplices} simplices exceed the oracle limit of {ORACLE_MAX_SIMPLICES}")
    order = build_vertex_order(field)
    ids = np.flatnonzero(grid.valid)
    filt = grid.sort_by_key(ids, order).tolist()
    pos = {s: i for i, s in enumerate(filt)}
    low_owner = {}
    death_of = {}
    for j, s in enumerate(filt):
        col = 0
        for f in grid.facets(s):
            col ^= 1 << pos[f]
        while col:
            low = col.bit_length() - 1
            other = low_owner.get(low)
            if other is None:
                break
            col ^= other
        if col:
            low = col.bit_length() - 1
            low_owner[low] = col
            death_of[low] = j
    killers = set(death_of.values())
    raw = [(grid.simplex_dim(filt[i]), filt[i], filt[j]) for i, j in sorted(death_of.items())]
    unpaired = [filt[i] for i in range(len(filt)) if i not in death_of and i not in killers]
    return _assemble(grid, field.values, order, raw, unpaired)
