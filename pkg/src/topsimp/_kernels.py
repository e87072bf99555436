"""Compiled kernels over the implicit grid triangulation.

Every kernel takes the grid tables unpacked in the order produced by
``Grid.tables``: dims3, d, nslots, voff, fac, cof, ncof, star, nstar, base.
"""
import numpy as np
from numba import njit

MAX_LS = 75  # 1 + 14 + 36 + 24: largest lower star in 3D
OUTSIDE = -2


@njit(cache=True)
def _dim_of(gid, base, d):
    k = 0
    while k < d and gid >= base[k + 1]:
        k += 1
    return k


@njit(cache=True)
def _decode(gid, base, nslots, d):
    k = _dim_of(gid, base, d)
    rel = gid - base[k]
    return k, rel // nslots[k], rel % nslots[k]


@njit(cache=True)
def _in_grid(x, y, z, k, slot, dims3, voff):
    if x < 0 or y < 0 or z < 0:
        return False
    return (x + voff[k, slot, k, 0] < dims3[0] and y + voff[k, slot, k, 1] < dims3[1]
            and z + voff[k, slot, k, 2] < dims3[2])


@njit(cache=True)
def valid_mask(dims3, d, nslots, voff, fac, cof, ncof, star, nstar, base):
    out = np.zeros(base[4], dtype=np.bool_)
    nx, ny = dims3[0], dims3[1]
    nv = dims3[0] * dims3[1] * dims3[2]
    for k in range(d + 1):
        for a in range(nv):
            x = a % nx
            y = (a // nx) % ny
            z = a // (nx * ny)
            for s in range(nslots[k]):
                if _in_grid(x, y, z, k, s, dims3, voff):
                    out[base[k] + a * nslots[k] + s] = True
    return out


@njit(cache=True)
def simplex_vertices(gid, out, dims3, d, nslots, voff, fac, cof, ncof, star, nstar, base):
    k, a, s = _decode(gid, base, nslots, d)
    nx, ny = dims3[0], dims3[1]
    for i in range(k + 1):
        out[i] = a + voff[k, s, i, 0] + nx * (voff[k, s, i, 1] + ny * voff[k, s, i, 2])
    return k + 1


@njit(cache=True)
def facets(gid, out, dims3, d, nslots, voff, fac, cof, ncof, star, nstar, base):
    k, a, s = _decode(gid, base, nslots, d)
    if k == 0:
        return 0
    nx, ny = dims3[0], dims3[1]
    for i in range(k + 1):
        a2 = a + fac[k, s, i, 0] + nx * (fac[k, s, i, 1] + ny * fac[k, s, i, 2])
        out[i] = base[k - 1] + a2 * nslots[k - 1] + fac[k, s, i, 3]
    return k + 1


@njit(cache=True)
def cofacets(gid, out, dims3, d, nslots, voff, fac, cof, ncof, star, nstar, base):
    k, a, s = _decode(gid, base, nslots, d)
    if k >= d:
        return 0
    nx, ny = dims3[0], dims3[1]
    x = a % nx
    y = (a // nx) % ny
    z = a // (nx * ny)
    n = 0
    for j in range(ncof[k, s]):
        x2 = x + cof[k, s, j, 0]
        y2 = y + cof[k, s, j, 1]
        z2 = z + cof[k, s, j, 2]
        cs = cof[k, s, j, 3]
        if _in_grid(x2, y2, z2, k + 1, cs, dims3, voff):
            out[n] = base[k + 1] + (x2 + nx * (y2 + ny * z2)) * nslots[k + 1] + cs
            n += 1
    return n


@njit(cache=True)
def _key(gid, rank, key, dims3, d, nslots, voff, fac, cof, ncof, star, nstar, base):
    k, a, s = _decode(gid, base, nslots, d)
    nx, ny = dims3[0], dims3[1]
    for i in range(4):
        key[i] = -1
    for i in range(k + 1):
        key[i] = rank[a + voff[k, s, i, 0] + nx * (voff[k, s, i, 1] + ny * voff[k, s, i, 2])]
    # descending insertion sort
    for i in range(1, k + 1):
        x = key[i]
        j = i - 1
        while j >= 0 and key[j] < x:
            key[j + 1] = key[j]
            j -= 1
        key[j + 1] = x


@njit(cache=True)
def keys_of(gids, rank, dims3, d, nslots, voff, fac, cof, ncof, star, nstar, base):
    out = np.empty((gids.size, 4), dtype=np.int64)
    for i in range(gids.size):
        _key(gids[i], rank, out[i], dims3, d, nslots, voff, fac, cof, ncof, star, nstar, base)
    return out


@njit(cache=True)
def max_vertex(gids, rank, dims3, d, nslots, voff, fac, cof, ncof, star, nstar, base):
    """Highest-ranked vertex of each simplex."""
    out = np.empty(gids.size, dtype=np.int64)
    verts = np.empty(4, dtype=np.int64)
    for i in range(gids.size):
        n = simplex_vertices(gids[i], verts, dims3, d, nslots, voff, fac, cof, ncof, star, nstar, base)
        best = verts[0]
        for j in range(1, n):
            if rank[verts[j]] > rank[best]:
                best = verts[j]
        out[i] = best
    return out


@njit(cache=True)
def _key_less(a, b):
    for i in range(4):
        if a[i] != b[i]:
            return a[i] < b[i]
    return False


@njit(cache=True)
def _collect_lower_star(v, rank, lgid, ldim, lpos, dims3, d, nslots, voff, fac, cof, ncof, star, nstar, base):
    nx, ny = dims3[0], dims3[1]
    x = v % nx
    y = (v // nx) % ny
    z = v // (nx * ny)
    rv = rank[v]
    n = 0
    lgid[0] = base[0] + v
    ldim[0] = 0
    lpos[0] = 0
    n = 1
    for k in range(1, d + 1):
        for j in range(nstar[k]):
            s = star[k, j, 0]
            pos = star[k, j, 1]
            ax = x - voff[k, s, pos, 0]
            ay = y - voff[k, s, pos, 1]
            az = z - voff[k, s, pos, 2]
            if not _in_grid(ax, ay, az, k, s, dims3, voff):
                continue
            a = ax + nx * (ay + ny * az)
            lower = True
            for i in range(k + 1):
                if i == pos:
                    continue
                u = a + voff[k, s, i, 0] + nx * (voff[k, s, i, 1] + ny * voff[k, s, i, 2])
                if rank[u] > rv:
                    lower = False
                    break
            if lower:
                lgid[n] = base[k] + a * nslots[k] + s
                ldim[n] = k
                lpos[n] = pos
                n += 1
    return n


@njit(cache=True)
def lower_star_ids(v, rank, out, dims3, d, nslots, voff, fac, cof, ncof, star, nstar, base):
    lgid = np.empty(MAX_LS, dtype=np.int64)
    ldim = np.empty(MAX_LS, dtype=np.int64)
    lpos = np.empty(MAX_LS, dtype=np.int64)
    n = _collect_lower_star(v, rank, lgid, ldim, lpos, dims3, d, nslots, voff, fac, cof, ncof, star, nstar, base)
    for i in range(n):
        out[i] = lgid[i]
    return n


@njit(cache=True)
def vertex_neighbors(v, out, dims3, d, nslots, voff, fac, cof, ncof, star, nstar, base):
    nx, ny = dims3[0], dims3[1]
    x = v % nx
    y = (v // nx) % ny
    z = v // (nx * ny)
    n = 0
    if d == 0:
        return 0
    for j in range(nstar[1]):
        s = star[1, j, 0]
        pos = star[1, j, 1]
        ax = x - voff[1, s, pos, 0]
        ay = y - voff[1, s, pos, 1]
        az = z - voff[1, s, pos, 2]
        if not _in_grid(ax, ay, az, 1, s, dims3, voff):
            continue
        a = ax + nx * (ay + ny * az)
        o = 1 - pos
        out[n] = a + voff[1, s, o, 0] + nx * (voff[1, s, o, 1] + ny * voff[1, s, o, 2])
        n += 1
    return n


@njit(cache=True)
def _process_lower_star(v, rank, partner, lgid, ldim, lpos, lkey, sgid, sdim, skey, lfac, nfac,
                        status, inzero, inone, tmp, tmp_idx,
                        dims3, d, nslots, voff, fac, cof, ncof, star, nstar, base):
    n = _collect_lower_star(v, rank, lgid, ldim, lpos, dims3, d, nslots, voff, fac, cof, ncof, star, nstar, base)
    if n == 1:
        partner[lgid[0]] = -1
        return

    # sort the lower star by simplex key
    for i in range(n):
        _key(lgid[i], rank, lkey[i], dims3, d, nslots, voff, fac, cof, ncof, star, nstar, base)
    idx = tmp_idx
    for i in range(n):
        idx[i] = i
    for i in range(1, n):
        cur = idx[i]
        j = i - 1
        while j >= 0 and _key_less(lkey[cur], lkey[idx[j]]):
            idx[j + 1] = idx[j]
            j -= 1
        idx[j + 1] = cur
    for i in range(n):
        sgid[i] = lgid[idx[i]]
        sdim[i] = ldim[idx[i]]
        for c in range(4):
            skey[i, c] = lkey[idx[i], c]

    # facets of each entry that contain v, as local indices
    for i in range(n):
        nfac[i] = 0
        k = sdim[i]
        if k == 0:
            continue
        nf = facets(sgid[i], tmp, dims3, d, nslots, voff, fac, cof, ncof, star, nstar, base)
        for f in range(nf):
            g = tmp[f]
            for j in range(n):
                if sdim[j] == k - 1 and sgid[j] == g:
                    lfac[i, nfac[i]] = j
                    nfac[i] += 1
                    break

    for i in range(n):
        status[i] = 0
        inzero[i] = False
        inone[i] = False

    # v pairs with its smallest lower edge
    delta = -1
    for i in range(n):
        if sdim[i] == 1:
            delta = i
            break
    partner[sgid[0]] = sgid[delta]
    partner[sgid[delta]] = sgid[0]
    status[0] = 1
    status[delta] = 1
    for i in range(n):
        if sdim[i] == 1 and i != delta:
            inzero[i] = True
    for i in range(n):
        if status[i] == 0 and _is_cof(i, delta, lfac, nfac) and _nuf(i, lfac, nfac, status) == 1:
            inone[i] = True

    while True:
        while True:
            a = -1
            for i in range(n):
                if inone[i]:
                    a = i
                    break
            if a < 0:
                break
            inone[a] = False
            if status[a] != 0:
                continue
            if _nuf(a, lfac, nfac, status) == 0:
                inzero[a] = True
            else:
                pf = -1
                for f in range(nfac[a]):
                    if status[lfac[a, f]] == 0:
                        pf = lfac[a, f]
                partner[sgid[pf]] = sgid[a]
                partner[sgid[a]] = sgid[pf]
                status[pf] = 1
                status[a] = 1
                inzero[pf] = False
                for b in range(n):
                    if status[b] == 0 and (_is_cof(b, a, lfac, nfac) or _is_cof(b, pf, lfac, nfac)) \
                            and _nuf(b, lfac, nfac, status) == 1:
                        inone[b] = True
        g = -1
        for i in range(n):
            if inzero[i]:
                g = i
                break
        if g < 0:
            break
        inzero[g] = False
        if status[g] != 0:
            continue
        status[g] = 2
        partner[sgid[g]] = -1
        for b in range(n):
            if status[b] == 0 and _is_cof(b, g, lfac, nfac) and _nuf(b, lfac, nfac, status) == 1:
                inone[b] = True

    for i in range(n):
        if status[i] == 0:
            # cannot happen for a valid lower star; keep the output total anyway
            partner[sgid[i]] = -1


@njit(cache=True)
def _is_cof(b, a, lfac, nfac):
    for f in range(nfac[b]):
        if lfac[b, f] == a:
            return True
    return False


@njit(cache=True)
def _nuf(i, lfac, nfac, status):
    c = 0
    for f in range(nfac[i]):
        if status[lfac[i, f]] == 0:
            c += 1
    return c


@njit(cache=True)
def gradient_for(vertices, rank, partner, dims3, d, nslots, voff, fac, cof, ncof, star, nstar, base):
    """Run the lower-star pairing for each vertex listed, writing into ``partner``."""
    lgid = np.empty(MAX_LS, dtype=np.int64)
    ldim = np.empty(MAX_LS, dtype=np.int64)
    lpos = np.empty(MAX_LS, dtype=np.int64)
    lkey = np.empty((MAX_LS, 4), dtype=np.int64)
    sgid = np.empty(MAX_LS, dtype=np.int64)
    sdim = np.empty(MAX_LS, dtype=np.int64)
    skey = np.empty((MAX_LS, 4), dtype=np.int64)
    lfac = np.empty((MAX_LS, 4), dtype=np.int64)
    nfac = np.empty(MAX_LS, dtype=np.int64)
    status = np.empty(MAX_LS, dtype=np.int64)
    inzero = np.empty(MAX_LS, dtype=np.bool_)
    inone = np.empty(MAX_LS, dtype=np.bool_)
    tmp = np.empty(4, dtype=np.int64)
    tmp_idx = np.empty(MAX_LS, dtype=np.int64)
    for i in range(vertices.size):
        _process_lower_star(vertices[i], rank, partner, lgid, ldim, lpos, lkey, sgid, sdim, skey,
                            lfac, nfac, status, inzero, inone, tmp, tmp_idx,
                            dims3, d, nslots, voff, fac, cof, ncof, star, nstar, base)


@njit(cache=True)
def expand_neighbors(vertices, n_vertices, dims3, d, nslots, voff, fac, cof, ncof, star, nstar, base):
    """Vertices in ``vertices`` plus every vertex sharing an edge with one of them."""
    mark = np.zeros(n_vertices, dtype=np.bool_)
    buf = np.empty(14, dtype=np.int64)
    for i in range(vertices.size):
        v = vertices[i]
        mark[v] = True
        n = vertex_neighbors(v, buf, dims3, d, nslots, voff, fac, cof, ncof, star, nstar, base)
        for j in range(n):
            mark[buf[j]] = True
    return np.flatnonzero(mark)


# -- V-path traversal ---------------------------------------------------------

@njit(cache=True)
def descend_ends(edges, partner, dims3, d, nslots, voff, fac, cof, ncof, star, nstar, base):
    """For each edge, the critical vertices reached from both endpoints."""
    out = np.empty((edges.size, 2), dtype=np.int64)
    verts = np.empty(4, dtype=np.int64)
    for i in range(edges.size):
        simplex_vertices(edges[i], verts, dims3, d, nslots, voff, fac, cof, ncof, star, nstar, base)
        ends0 = verts[0]
        ends1 = verts[1]
        for side in range(2):
            u = ends0 if side == 0 else ends1
            while partner[u] != -1:
                e = partner[u]
                simplex_vertices(e, verts, dims3, d, nslots, voff, fac, cof, ncof, star, nstar, base)
                u = verts[1] if verts[0] == u else verts[0]
            out[i, side] = u
    return out


@njit(cache=True)
def ascend_ends(cells, partner, dims3, d, nslots, voff, fac, cof, ncof, star, nstar, base):
    """For each (d-1)-cell, the critical d-cells (or OUTSIDE) reached upward on both sides."""
    out = np.full((cells.size, 2), OUTSIDE, dtype=np.int64)
    buf = np.empty(14, dtype=np.int64)
    for i in range(cells.size):
        c = cells[i]
        nc = cofacets(c, buf, dims3, d, nslots, voff, fac, cof, ncof, star, nstar, base)
        first0 = buf[0]
        first1 = buf[1]
        for side in range(nc):
            t = first0 if side == 0 else first1
            cur = c
            while True:
                if partner[t] == -1:
                    out[i, side] = t
                    break
                c2 = partner[t]
                m = cofacets(c2, buf, dims3, d, nslots, voff, fac, cof, ncof, star, nstar, base)
                nxt = OUTSIDE
                for j in range(m):
                    if buf[j] != t:
                        nxt = buf[j]
                if nxt == OUTSIDE:
                    out[i, side] = OUTSIDE
                    break
                cur = c2
                t = nxt
    return out


@njit(cache=True)
def ascend_path(c, side, partner, dims3, d, nslots, voff, fac, cof, ncof, star, nstar, base):
    """Cells visited from (d-1)-cell c through its ``side``-th cofacet up to a critical d-cell.

    The last entry is OUTSIDE when the path leaves through the grid boundary.
    """
    buf = np.empty(14, dtype=np.int64)
    path = [c]
    nc = cofacets(c, buf, dims3, d, nslots, voff, fac, cof, ncof, star, nstar, base)
    if side >= nc:
        path.append(OUTSIDE)
        return path
    t = buf[side]
    while True:
        path.append(t)
        if partner[t] == -1:
            return path
        c2 = partner[t]
        path.append(c2)
        m = cofacets(c2, buf, dims3, d, nslots, voff, fac, cof, ncof, star, nstar, base)
        nxt = OUTSIDE
        for j in range(m):
            if buf[j] != t:
                nxt = buf[j]
        if nxt == OUTSIDE:
            path.append(OUTSIDE)
            return path
        t = nxt


@njit(cache=True)
def _next_down(x, e, partner, base, k):
    """Cell following facet e of (k+1)-cell x on a descending V-path, or -1 to stop.

    Returns -2 when e is critical (path end).
    """
    p = partner[e]
    if p == -1:
        return -2
    if p >= base[k + 1] and p < base[k + 2]:
        return p
    return -1


@njit(cache=True)
def count_paths(src, critical_only, cap, partner, indeg, cnt, mark, dims3, d, nslots, voff, fac, cof,
                ncof, star, nstar, base):
    """Count descending V-paths from (k+1)-cell ``src`` to each critical k-cell.

    ``cap`` > 0 saturates counts at ``cap``; ``cap`` == 0 counts mod 2.
    Scratch arrays indeg/cnt/mark (one slot per id) must be zero and are left zero.
    Returns (targets, counts).
    """
    k = _dim_of(src, base, d) - 1
    fb = np.empty(4, dtype=np.int64)
    nodes = [src]
    mark[src] = 1
    stack = [src]
    while len(stack) > 0:
        x = stack.pop()
        nf = facets(x, fb, dims3, d, nslots, voff, fac, cof, ncof, star, nstar, base)
        for f in range(nf):
            e = fb[f]
            if partner[x] == e:
                continue
            nx_ = _next_down(x, e, partner, base, k)
            if nx_ >= 0:
                indeg[nx_] += 1
                if mark[nx_] == 0:
                    mark[nx_] = 1
                    nodes.append(nx_)
                    stack.append(nx_)
    ends = []
    cnt[src] = 1
    queue = [src]
    qi = 0
    while qi < len(queue):
        x = queue[qi]
        qi += 1
        c = cnt[x]
        nf = facets(x, fb, dims3, d, nslots, voff, fac, cof, ncof, star, nstar, base)
        for f in range(nf):
            e = fb[f]
            if partner[x] == e:
                continue
            nx_ = _next_down(x, e, partner, base, k)
            if nx_ == -2:
                if mark[e] == 0:
                    mark[e] = 1
                    ends.append(e)
                if cap == 0:
                    cnt[e] = (cnt[e] + c) % 2
                else:
                    cnt[e] = min(cap, cnt[e] + c)
            elif nx_ >= 0:
                if cap == 0:
                    cnt[nx_] = (cnt[nx_] + c) % 2
                else:
                    cnt[nx_] = min(cap, cnt[nx_] + c)
                indeg[nx_] -= 1
                if indeg[nx_] == 0:
                    queue.append(nx_)
    tg = np.empty(len(ends), dtype=np.int64)
    tc = np.empty(len(ends), dtype=np.int64)
    for i in range(len(ends)):
        tg[i] = ends[i]
        tc[i] = cnt[ends[i]]
        cnt[ends[i]] = 0
        mark[ends[i]] = 0
    for x in nodes:
        cnt[x] = 0
        mark[x] = 0
        indeg[x] = 0
    return tg, tc


@njit(cache=True)
def find_path(src, dst, partner, mark, dims3, d, nslots, voff, fac, cof, ncof, star, nstar, base):
    """Some descending V-path from (k+1)-cell src to critical k-cell dst, alternating cells.

    Returns an empty list when none exists. ``mark`` is zero scratch, left zero.
    """
    k = _dim_of(src, base, d) - 1
    fb = np.empty(4, dtype=np.int64)
    prev = {src: -1}
    via = {src: -1}
    stack = [src]
    mark[src] = 1
    found = -1
    visited = [src]
    while len(stack) > 0 and found < 0:
        x = stack.pop()
        nf = facets(x, fb, dims3, d, nslots, voff, fac, cof, ncof, star, nstar, base)
        for f in range(nf):
            e = fb[f]
            if partner[x] == e:
                continue
            if e == dst:
                found = x
                break
            nx_ = _next_down(x, e, partner, base, k)
            if nx_ >= 0 and mark[nx_] == 0:
                mark[nx_] = 1
                visited.append(nx_)
                prev[nx_] = x
                via[nx_] = e
                stack.append(nx_)
    for x in visited:
        mark[x] = 0
    path = [np.int64(0) for _ in range(0)]
    if found < 0:
        return path
    rev = [dst]
    x = found
    while x != -1:
        rev.append(x)
        if via[x] != -1:
            rev.append(via[x])
        x = prev[x]
    for i in range(len(rev) - 1, -1, -1):
        path.append(rev[i])
    return path


@njit(cache=True)
def has_cycle(starts, partner, k, color, dims3, d, nslots, voff, fac, cof, ncof, star, nstar, base):
    """Detect a closed V-path among (k+1)-cells reachable downward from ``starts``.

    ``color`` is zero scratch over all ids and is left zero.
    """
    fb = np.empty(4, dtype=np.int64)
    touched = []
    cyc = False
    for s0 in range(starts.size):
        s = starts[s0]
        if color[s] != 0:
            continue
        # iterative DFS with explicit facet cursor
        stack_x = [s]
        stack_i = [0]
        color[s] = 1
        touched.append(s)
        while len(stack_x) > 0 and not cyc:
            x = stack_x[-1]
            i = stack_i[-1]
            nf = facets(x, fb, dims3, d, nslots, voff, fac, cof, ncof, star, nstar, base)
            if i >= nf:
                color[x] = 2
                stack_x.pop()
                stack_i.pop()
                continue
            stack_i[-1] = i + 1
            e = fb[i]
            if partner[x] == e:
                continue
            nx_ = _next_down(x, e, partner, base, k)
            if nx_ < 0:
                continue
            if color[nx_] == 1:
                cyc = True
            elif color[nx_] == 0:
                color[nx_] = 1
                touched.append(nx_)
                stack_x.append(nx_)
                stack_i.append(0)
        if cyc:
            break
    for x in touched:
        color[x] = 0
    return cyc
