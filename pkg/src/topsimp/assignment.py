"""Wasserstein distance between persistence diagrams.

Points are matched class by class, a class being (dimension, finiteness).
Finite classes are augmented with diagonal slots and solved with an
epsilon-scaling auction; infinite classes are matched by sorted birth.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.optimize import linear_sum_assignment

from .persistence import PersistenceDiagram, PersistencePair

EXACT_MAX_CLASS = 512
AUCTION_PRECISION = 0.01


class StructuralMismatch(ValueError):
    """Diagrams whose infinite classes differ, or assignments that do not fit their diagram."""


class ExactSizeError(RuntimeError):
    pass


@dataclass
class Assignment:
    """Optimal matching of a diagram onto a target.

    ``targets[i]`` is the index in the target diagram assigned to point i,
    or -1 when point i goes to its diagonal projection. Target points not
    listed in ``targets`` are matched to the diagonal.
    """

    targets: np.ndarray
    cost: float
    q: float = 2.0

    @property
    def distance(self) -> float:
        return self.cost ** (1.0 / self.q)


def diagonal_projection(p) -> tuple[float, float]:
    m = 0.5 * (p[0] + p[1])
    return (m, m)


def _dist(a, b) -> float:
    return float(np.hypot(a[0] - b[0], a[1] - b[1]))


def _diag_dist(p) -> float:
    return abs(p[1] - p[0]) / np.sqrt(2.0)


def augmented_cost_matrix(P: np.ndarray, Q: np.ndarray, q: float = 2.0) -> np.ndarray:
    """(n+m) square cost matrix: rows are P then diagonal copies of Q, columns Q then diagonal copies of P.

    Each real point may only use its own diagonal slot; diagonal-to-diagonal costs 0.
    Forbidden entries are +inf.
    """
    n, m = len(P), len(Q)
    C = np.full((n + m, n + m), np.inf)
    if n and m:
        diff = P[:, None, :] - Q[None, :, :]
        C[:n, :m] = np.sqrt((diff ** 2).sum(-1)) ** q
    if n:
        C[np.arange(n), m + np.arange(n)] = (np.abs(P[:, 1] - P[:, 0]) / np.sqrt(2.0)) ** q
    if m:
        C[n + np.arange(m), np.arange(m)] = (np.abs(Q[:, 1] - Q[:, 0]) / np.sqrt(2.0)) ** q
        C[n:, m:] = 0.0
    return C


@njit(cache=True)
def _auction(C, eps0, factor, rel_gap, abs_tol):
    n = C.shape[0]
    prices = np.zeros(n)
    row_of = np.full(n, -1, dtype=np.int64)
    col_of = np.full(n, -1, dtype=np.int64)
    eps = eps0
    stack = np.empty(n, dtype=np.int64)
    while True:
        for i in range(n):
            row_of[i] = -1
            col_of[i] = -1
            stack[i] = n - 1 - i
        top = n
        while top > 0:
            top -= 1
            i = stack[top]
            best = -1
            v1 = -np.inf
            v2 = -np.inf
            for j in range(n):
                c = C[i, j]
                if c == np.inf:
                    continue
                v = -c - prices[j]
                if v > v1:
                    v2 = v1
                    v1 = v
                    best = j
                elif v > v2:
                    v2 = v
            if v2 == -np.inf:
                inc = eps
            else:
                inc = v1 - v2 + eps
            prices[best] += inc
            old = col_of[best]
            if old >= 0:
                row_of[old] = -1
                stack[top] = old
                top += 1
            col_of[best] = i
            row_of[i] = best
        primal = 0.0
        for i in range(n):
            primal += C[i, row_of[i]]
        lb = 0.0
        for i in range(n):
            mn = np.inf
            for j in range(n):
                c = C[i, j]
                if c != np.inf and c + prices[j] < mn:
                    mn = c + prices[j]
            lb += mn
        for j in range(n):
            lb -= prices[j]
        gap = primal - lb
        if gap <= rel_gap * lb or gap <= abs_tol:
            return row_of, primal
        eps /= factor


def auction_assignment(C: np.ndarray, precision: float = AUCTION_PRECISION) -> tuple[np.ndarray, float]:
    """Row-to-column assignment minimizing total cost, within ``precision`` relative duality gap."""
    n = C.shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.int64), 0.0
    finite = C[np.isfinite(C)]
    cmax = float(finite.max()) if finite.size else 0.0
    if cmax == 0.0:
        cols = linear_sum_assignment(np.where(np.isfinite(C), C, 1.0))[1]
        return cols.astype(np.int64), 0.0
    abs_tol = 1e-13 * cmax
    rows, cost = _auction(np.ascontiguousarray(C), cmax / 4.0, 5.0, precision, abs_tol)
    return rows, float(cost)


def exact_assignment_matrix(C: np.ndarray) -> tuple[np.ndarray, float]:
    n = C.shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.int64), 0.0
    finite = C[np.isfinite(C)]
    big = (float(finite.max()) + 1.0) * (n + 1)
    r, c = linear_sum_assignment(np.where(np.isfinite(C), C, big))
    cols = np.empty(n, dtype=np.int64)
    cols[r] = c
    return cols, float(C[r, c].sum())


def _classes(D) -> dict:
    out = {}
    for i, p in enumerate(D):
        out.setdefault((p.dim, p.finite), []).append(i)
    return out


def _solve_class(P, Q, q, exact):
    """Targets (index into Q, or -1) for each row of P and the class cost."""
    n, m = len(P), len(Q)
    if m == 0:
        return np.full(n, -1, dtype=np.int64), float(sum(_diag_dist(p) ** q for p in P))
    if n == 0:
        return np.zeros(0, dtype=np.int64), float(sum(_diag_dist(p) ** q for p in Q))
    C = augmented_cost_matrix(P, Q, q)
    if exact:
        if n + m > 2 * EXACT_MAX_CLASS:
            raise ExactSizeError(f"class of {n}+{m} points exceeds the exact solver limit")
        cols, cost = exact_assignment_matrix(C)
    else:
        cols, cost = auction_assignment(C)
    t = cols[:n].copy()
    t[t >= m] = -1
    return t, cost


def _points(D, idx) -> np.ndarray:
    return np.array([D[i].point for i in idx], dtype=float).reshape(-1, 2)


def wasserstein(D1, D2, q: float = 2.0, exact: bool = False) -> tuple[float, Assignment]:
    """W_q between two diagrams and the assignment of D1's points onto D2."""
    c1, c2 = _classes(D1), _classes(D2)
    for key in set(c1) | set(c2):
        if not key[1] and len(c1.get(key, [])) != len(c2.get(key, [])):
            raise StructuralMismatch(
                f"dimension-{key[0]} infinite pairs differ: {len(c1.get(key, []))} vs {len(c2.get(key, []))}")
    targets = np.full(len(D1), -1, dtype=np.int64)
    total = 0.0
    for key in sorted(set(c1) | set(c2)):
        i1, i2 = c1.get(key, []), c2.get(key, [])
        P, Q = _points(D1, i1), _points(D2, i2)
        if not key[1]:
            a = sorted(range(len(i1)), key=lambda k: (P[k, 0], i1[k]))
            b = sorted(range(len(i2)), key=lambda k: (Q[k, 0], i2[k]))
            for x, y in zip(a, b):
                targets[i1[x]] = i2[y]
                total += _dist(P[x], Q[y]) ** q
            continue
        t, cost = _solve_class(P, Q, q, exact)
        for x, y in enumerate(t):
            targets[i1[x]] = i2[y] if y >= 0 else -1
        total += cost
    return total ** (1.0 / q), Assignment(targets, total, q)


def exact_assignment(D1, D2, q: float = 2.0) -> tuple[float, Assignment]:
    """Exact optimum (Hungarian-style solver); limited to classes of at most 512 points."""
    return wasserstein(D1, D2, q, exact=True)


def assignment_cost(D, DT, targets: np.ndarray, q: float = 2.0) -> float:
    """Total cost of a given assignment, evaluated at the current coordinates."""
    used = np.zeros(len(DT), dtype=bool)
    total = 0.0
    for i, p in enumerate(D):
        t = targets[i]
        if t >= 0:
            total += _dist(p.point, DT[t].point) ** q
            used[t] = True
        else:
            total += _diag_dist(p.point) ** q
    for j in np.flatnonzero(~used):
        total += _diag_dist(DT[j].point) ** q
    return total


def _by_key(D) -> dict:
    groups = {}
    for i, p in enumerate(D):
        groups.setdefault(p.key, []).append(i)
    for idx in groups.values():
        if len(idx) > 1:
            idx.sort(key=lambda i: (D[i].birth, D[i].death, D[i].birth_simplex, D[i].death_simplex))
    return groups


def still_pairs(Dj, Dprev) -> list[tuple[int, int]]:
    """Index pairs (i, i') whose (dim, finite, birthVertex, deathVertex) agree.

    Distinct saddle pairs of a 3D grid can share both vertices. Such
    duplicates are matched in order of value, then of birth and death simplex.
    """
    prev = _by_key(Dprev)
    out = []
    for key, idx in _by_key(Dj).items():
        out.extend(zip(idx, prev.get(key, [])))
    out.sort()
    return out


def update_assignment(prev: Assignment, Dj, Dprev, DT, q: float = 2.0,
                      still: list[tuple[int, int]] | None = None) -> tuple[float, Assignment]:
    """Reuse ``prev`` on still pairs and solve only the reduced problem.

    Returns (cost, assignment); for q = 2 the cost is the squared distance.
    """
    if len(prev.targets) != len(Dprev):
        raise StructuralMismatch("previous assignment does not match the previous diagram")
    if still is None:
        still = still_pairs(Dj, Dprev)
    targets = np.full(len(Dj), -2, dtype=np.int64)
    used = np.zeros(len(DT), dtype=bool)
    for i, j in still:
        t = prev.targets[j]
        targets[i] = t
        if t >= 0:
            if used[t]:
                raise StructuralMismatch("previous assignment maps two points to one target")
            used[t] = True
    red = np.flatnonzero(targets == -2)
    red_t = np.flatnonzero(~used)
    if red.size or red_t.size:
        sub_d = PersistenceDiagram([Dj[i] for i in red])
        sub_t = PersistenceDiagram([DT[j] for j in red_t])
        _, a = wasserstein(sub_d, sub_t, q)
        for x, y in enumerate(a.targets):
            targets[red[x]] = red_t[y] if y >= 0 else -1
    cost = assignment_cost(Dj, DT, targets, q)
    return cost, Assignment(targets, cost, q)
