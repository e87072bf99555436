"""Implicit Freudenthal triangulation of 1D/2D/3D regular grids.

Simplices are never stored. A k-simplex is a chain of k+1 grid vertices
``a, a + o1, ..., a + ok`` where the offsets ``o1 < o2 < ... < ok`` are nested
non-empty subsets of the active axes (Kuhn subdivision). The anchor ``a`` and
the slot of the chain in a fixed per-dimension table identify the simplex:

    gid = base[k] + anchor * nslots[k] + slot

Ids whose chain leaves the grid are simply invalid (see ``Grid.valid``).
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations

import numpy as np

from . import _kernels as K

MAX_SLOTS = 12
MAX_COF = 14
MAX_STAR = 36


class InputError(ValueError):
    """Raised on malformed user input (bad field, bad dims)."""


@dataclass(frozen=True)
class ScalarField:
    """One real value per grid vertex, x-fastest row-major."""

    dims: tuple[int, ...]
    values: np.ndarray

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        if not 1 <= len(dims) <= 3 or any(n < 1 for n in dims):
            raise InputError(f"dims must hold 1 to 3 positive extents, got {self.dims}")
        values = np.ascontiguousarray(self.values, dtype=np.float64).reshape(-1)
        if values.size != int(np.prod(dims)):
            raise InputError(f"expected {int(np.prod(dims))} values for dims {dims}, got {values.size}")
        if not np.all(np.isfinite(values)):
            raise InputError("scalar field contains non-finite values")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_array(cls, arr) -> "ScalarField":
        """Wrap an array indexed ``arr[z, y, x]`` (C order, x fastest)."""
        arr = np.asarray(arr, dtype=np.float64)
        return cls(tuple(reversed(arr.shape)), arr.reshape(-1))

    def as_array(self) -> np.ndarray:
        return self.values.reshape(tuple(reversed(self.dims)))

    def with_values(self, values: np.ndarray) -> "ScalarField":
        return ScalarField(self.dims, values)


@dataclass(frozen=True)
class VertexOrder:
    """Global vertex order: ``rank[v]`` is the position of vertex v, ``inverse[r]`` the vertex at rank r."""

    rank: np.ndarray
    inverse: np.ndarray


def build_vertex_order(field: ScalarField) -> VertexOrder:
    """Sort vertices by (value, index); the index breaks exact ties."""
    values = np.asarray(field.values)
    if not np.all(np.isfinite(values)):
        raise InputError("scalar field contains non-finite values")
    inverse = np.argsort(values, kind="stable").astype(np.int64)
    rank = np.empty_like(inverse)
    rank[inverse] = np.arange(inverse.size, dtype=np.int64)
    return VertexOrder(rank, inverse)


def _all_chains(axes: list[int], k: int) -> list[tuple[int, ...]]:
    found = set()
    for perm in permutations(axes):
        full, m = [], 0
        for ax in perm:
            m |= 1 << ax
            full.append(m)
        _pick(full, k, 0, (), found)
    return sorted(found, key=lambda c: (bin(c[-1]).count("1"), c[-1], c))


def _pick(full, k, start, acc, found):
    if len(acc) == k:
        found.add(acc)
        return
    for i in range(start, len(full)):
        _pick(full, k, i + 1, acc + (full[i],), found)


def _offset(mask: int) -> tuple[int, int, int]:
    return (mask & 1, (mask >> 1) & 1, (mask >> 2) & 1)


class Grid:
    """Freudenthal triangulation of a regular grid with implicit simplex ids."""

    def __init__(self, dims):
        dims = tuple(int(n) for n in dims)
        if not 1 <= len(dims) <= 3 or any(n < 1 for n in dims):
            raise InputError(f"dims must hold 1 to 3 positive extents, got {dims}")
        self.shape = dims
        self.dims3 = np.array(list(dims) + [1] * (3 - len(dims)), dtype=np.int64)
        self.axes = [a for a in range(3) if self.dims3[a] > 1]
        self.d = len(self.axes)
        self.n_vertices = int(np.prod(self.dims3))

        nslots = np.zeros(4, dtype=np.int64)
        voff = np.zeros((4, MAX_SLOTS, 4, 3), dtype=np.int64)
        chains = {0: [()]}
        nslots[0] = 1
        for k in range(1, self.d + 1):
            chains[k] = _all_chains(self.axes, k)
            nslots[k] = len(chains[k])
            for s, chain in enumerate(chains[k]):
                for i, m in enumerate(chain):
                    voff[k, s, i + 1] = _offset(m)
        self.nslots = nslots
        self.voff = voff

        # facet table: removing vertex i of slot s gives (shift, facet slot)
        index = {k: {c: s for s, c in enumerate(chains[k])} for k in chains}
        fac = np.full((4, MAX_SLOTS, 4, 4), -1, dtype=np.int64)
        for k in range(1, self.d + 1):
            for s, chain in enumerate(chains[k]):
                for i in range(k + 1):
                    if i == 0:
                        shift = _offset(chain[0])
                        rest = tuple(m & ~chain[0] for m in chain[1:])
                    else:
                        shift = (0, 0, 0)
                        rest = chain[: i - 1] + chain[i:]
                    fac[k, s, i, :3] = shift
                    fac[k, s, i, 3] = index[k - 1][rest]
        self.fac = fac

        # cofacet table: inverse of the facet table
        cof = np.full((4, MAX_SLOTS, MAX_COF, 4), -1, dtype=np.int64)
        ncof = np.zeros((4, MAX_SLOTS), dtype=np.int64)
        for k in range(1, self.d + 1):
            for s in range(nslots[k]):
                for i in range(k + 1):
                    fs = fac[k, s, i, 3]
                    j = ncof[k - 1, fs]
                    cof[k - 1, fs, j, :3] = -fac[k, s, i, :3]
                    cof[k - 1, fs, j, 3] = s
                    ncof[k - 1, fs] += 1
        self.cof = cof
        self.ncof = ncof

        # vertex star table: (slot, position of the vertex in the chain)
        star = np.full((4, MAX_STAR, 2), -1, dtype=np.int64)
        nstar = np.zeros(4, dtype=np.int64)
        for k in range(1, self.d + 1):
            j = 0
            for s in range(nslots[k]):
                for i in range(k + 1):
                    star[k, j] = (s, i)
                    j += 1
            nstar[k] = j
        self.star = star
        self.nstar = nstar

        base = np.zeros(5, dtype=np.int64)
        for k in range(4):
            base[k + 1] = base[k] + self.n_vertices * nslots[k]
        self.base = base
        self.n_ids = int(base[4])
        self._valid = None

    # -- tables bundle passed to kernels
    @property
    def tables(self):
        return (self.dims3, self.d, self.nslots, self.voff, self.fac, self.cof, self.ncof,
                self.star, self.nstar, self.base)

    @property
    def valid(self) -> np.ndarray:
        """Boolean mask over all ids; True where the id names a simplex."""
        if self._valid is None:
            self._valid = K.valid_mask(*self.tables)
        return self._valid

    def simplex_counts(self) -> list[int]:
        v = self.valid
        return [int(v[self.base[k]:self.base[k + 1]].sum()) for k in range(self.d + 1)]

    @property
    def n_simplices(self) -> int:
        return sum(self.simplex_counts())

    def simplex_dim(self, gid: int) -> int:
        return int(np.searchsorted(self.base, gid, side="right") - 1)

    def simplex_id(self, k: int, anchor: int, slot: int) -> int:
        return int(self.base[k] + anchor * self.nslots[k] + slot)

    def simplices(self, k: int) -> np.ndarray:
        """All valid ids of dimension k."""
        lo, hi = self.base[k], self.base[k + 1]
        return np.flatnonzero(self.valid[lo:hi]) + lo

    def vertices(self, gid: int) -> list[int]:
        out = np.empty(4, dtype=np.int64)
        n = K.simplex_vertices(gid, out, *self.tables)
        return [int(x) for x in out[:n]]

    def coords(self, v: int) -> tuple[int, int, int]:
        nx, ny, _ = self.dims3
        return (int(v % nx), int((v // nx) % ny), int(v // (nx * ny)))

    def facets(self, gid: int) -> list[int]:
        out = np.empty(4, dtype=np.int64)
        n = K.facets(gid, out, *self.tables)
        return [int(x) for x in out[:n]]

    def cofacets(self, gid: int) -> list[int]:
        out = np.empty(MAX_COF, dtype=np.int64)
        n = K.cofacets(gid, out, *self.tables)
        return [int(x) for x in out[:n]]

    def simplex_key(self, gid: int, order: VertexOrder) -> tuple[int, ...]:
        return tuple(sorted((int(order.rank[v]) for v in self.vertices(gid)), reverse=True))

    def lower_star(self, v: int, order: VertexOrder) -> list[int]:
        """Cofaces of v whose highest-ranked vertex is v (v itself included)."""
        out = np.empty(1 + 14 + 36 + 24, dtype=np.int64)
        n = K.lower_star_ids(v, order.rank, out, *self.tables)
        return [int(x) for x in out[:n]]

    def neighbors(self, v: int) -> list[int]:
        """Vertices joined to v by an edge."""
        out = np.empty(MAX_COF, dtype=np.int64)
        n = K.vertex_neighbors(v, out, *self.tables)
        return [int(x) for x in out[:n]]

    def keys(self, gids: np.ndarray, order: VertexOrder) -> np.ndarray:
        """(n, 4) array of keys padded with -1; row order sorts like the filtration."""
        return K.keys_of(np.asarray(gids, dtype=np.int64), order.rank, *self.tables)

    def sort_by_key(self, gids: np.ndarray, order: VertexOrder) -> np.ndarray:
        gids = np.asarray(gids, dtype=np.int64)
        if gids.size == 0:
            return gids
        k = self.keys(gids, order)
        return gids[np.lexsort((k[:, 3], k[:, 2], k[:, 1], k[:, 0]))]

    def barycenter(self, gid: int) -> tuple[float, float, float]:
        pts = np.array([self.coords(v) for v in self.vertices(gid)], dtype=float)
        return tuple(pts.mean(axis=0))
