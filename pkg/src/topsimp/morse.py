"""Saddle connectors, gradient reversal and filament extraction on 3D gradients.

A V-path is stored as an alternating list of cell ids. A connector of a
saddle pair (edge e, triangle t) starts at t and ends at e:
``[t, e1, t1, e2, t2, ..., e]`` where each ``(e_i, t_i)`` is a gradient vector.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from . import _kernels as K
from .gradient import DiscreteGradient
from .grid import InputError, ScalarField
from .persistence import PersistenceDiagram, PersistencePair


class _Scratch:
    """Zeroed per-id work arrays shared by the path kernels."""

    def __init__(self, n: int):
        self.indeg = np.zeros(n, dtype=np.int64)
        self.cnt = np.zeros(n, dtype=np.int64)
        self.mark = np.zeros(n, dtype=np.int64)


def _scratch(g: DiscreteGradient, scratch: _Scratch | None) -> _Scratch:
    if scratch is None or scratch.mark.size != g.grid.n_ids:
        return _Scratch(g.grid.n_ids)
    return scratch


def _is_saddle_pair(g: DiscreteGradient, pair: PersistencePair) -> bool:
    grid = g.grid
    return (grid.d == 3 and pair.dim == 1 and pair.finite
            and grid.simplex_dim(pair.birth_simplex) == 1 and grid.simplex_dim(pair.death_simplex) == 2)


def saddle_connector(g: DiscreteGradient, pair: PersistencePair, scratch: _Scratch | None = None) -> list[int] | None:
    """The unique V-path from the death triangle down to the birth edge, or None.

    None is returned when either saddle is no longer critical, when no path
    exists, or when more than one path exists.
    """
    if not _is_saddle_pair(g, pair):
        raise ValueError(f"not a saddle-saddle pair: dimension {pair.dim}, finite={pair.finite}")
    t, e = pair.death_simplex, pair.birth_simplex
    if g.partner[t] != -1 or g.partner[e] != -1:
        return None
    s = _scratch(g, scratch)
    tables = g.grid.tables
    targets, counts = K.count_paths(t, True, 2, g.partner, s.indeg, s.cnt, s.mark, *tables)
    hit = counts[targets == e]
    if hit.size == 0 or hit[0] != 1:
        return None
    path = K.find_path(t, e, g.partner, s.mark, *tables)
    return [int(x) for x in path] or None


def _check_path(g: DiscreteGradient, path: list[int]):
    grid = g.grid
    if len(path) < 2:
        raise ValueError("empty connector")
    if len(path) % 2:
        raise ValueError("a connector alternates (k+1)-cells and k-cells and has even length")
    k = grid.simplex_dim(path[-1])
    if g.partner[path[0]] != -1 or g.partner[path[-1]] != -1:
        raise ValueError("connector endpoints must be critical")
    for i in range(0, len(path), 2):
        hi, lo = path[i], path[i + 1]
        if grid.simplex_dim(hi) != k + 1 or lo not in grid.facets(hi):
            raise ValueError(f"cell {lo} is not a facet of {hi}")
        if i + 2 < len(path) and g.partner[lo] != path[i + 2]:
            raise ValueError(f"({lo}, {path[i + 2]}) is not a gradient vector")
    return k


def reverse_connector(g: DiscreteGradient, path: list[int]) -> bool:
    """Reverse the gradient along ``path`` in place.

    Returns False and leaves ``g`` unchanged when the reversal would close a V-path.
    """
    k = _check_path(g, path)
    cells = np.asarray(path, dtype=np.int64)
    old = g.partner[cells].copy()
    for i in range(0, len(path), 2):
        g.partner[path[i]] = path[i + 1]
        g.partner[path[i + 1]] = path[i]
    color = np.zeros(g.grid.n_ids, dtype=np.int64)
    if K.has_cycle(cells[0::2].copy(), g.partner, k, color, *g.grid.tables):
        g.partner[cells] = old
        return False
    return True


@dataclass
class SkipHistogram:
    """Counts of skipped cancellations per persistence bin."""

    edges: np.ndarray
    counts: np.ndarray
    processed: int = 0
    cancelled: int = 0
    skipped: list = dc_field(default_factory=list)  # persistence of each skipped pair

    @property
    def n_skipped(self) -> int:
        return self.processed - self.cancelled

    def skips_above(self, persistence: float) -> int:
        return sum(1 for p in self.skipped if p > persistence)

    def to_dict(self) -> dict:
        return {
            "binEdges": self.edges.tolist(),
            "counts": self.counts.tolist(),
            "processed": self.processed,
            "cancelled": self.cancelled,
            "skipped": self.n_skipped,
        }


def cancel_saddle_pairs(g: DiscreteGradient, D: PersistenceDiagram, pairs=None,
                        bins: int = 20) -> tuple[DiscreteGradient, SkipHistogram]:
    """Cancel saddle pairs in increasing persistence by connector reversal.

    ``pairs`` defaults to every finite dimension-1 pair of ``D`` on a 3D grid.
    The input gradient is not modified.
    """
    g = g.copy()
    if pairs is None:
        pairs = [p for p in D if _is_saddle_pair(g, p)]
    pairs = sorted(pairs, key=lambda p: (p.persistence, p.birth_vertex, p.death_vertex))
    top = max((p.persistence for p in pairs), default=0.0)
    edges = np.linspace(0.0, top if top > 0 else 1.0, bins + 1)
    hist = SkipHistogram(edges, np.zeros(bins, dtype=np.int64))
    scratch = _Scratch(g.grid.n_ids)
    for p in pairs:
        hist.processed += 1
        path = saddle_connector(g, p, scratch)
        if path is not None and reverse_connector(g, path):
            hist.cancelled += 1
            continue
        hist.skipped.append(p.persistence)
        b = min(int(np.searchsorted(edges, p.persistence, side="right")) - 1, bins - 1)
        hist.counts[max(b, 0)] += 1
    return g, hist


@dataclass
class Filament:
    saddle: int
    ends: tuple[int, int]  # critical 3-cells, or OUTSIDE (-2)
    points: np.ndarray  # (m, 3) barycenters in grid coordinates


def extract_filaments(g: DiscreteGradient, field: ScalarField, min_value: float) -> list[Filament]:
    """Upward integral lines from each critical triangle whose lowest vertex is at least ``min_value``.

    Each filament joins the two ends reached from the triangle's two tetrahedra.
    """
    grid = g.grid
    if grid.d != 3:
        raise InputError("filaments are extracted from 3D fields only")
    values = field.values
    out = []
    for t in g.critical(2).tolist():
        if values[grid.vertices(t)].min() < min_value:
            continue
        sides = [K.ascend_path(t, s, g.partner, *grid.tables) for s in range(2)]
        ends = tuple(int(p[-1]) for p in sides)
        cells = [c for c in sides[0][::-1] if c != K.OUTSIDE] + [c for c in sides[1][1:] if c != K.OUTSIDE]
        pts = np.array([grid.barycenter(c) for c in cells], dtype=float).reshape(-1, 3)
        out.append(Filament(t, ends, pts))
    return out


def filament_cycles(filaments: list[Filament]) -> int:
    """Independent cycles of the graph whose nodes are filament ends.

    Each exit through the grid boundary counts as its own leaf.
    """
    parent: dict = {}

    def find(x):
        while parent.setdefault(x, x) != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    cycles = 0
    for i, f in enumerate(filaments):
        a, b = (("out", i, s) if e == K.OUTSIDE else e for s, e in enumerate(f.ends))
        ra, rb = find(a), find(b)
        if ra == rb:
            cycles += 1
        else:
            parent[ra] = rb
    return cycles
