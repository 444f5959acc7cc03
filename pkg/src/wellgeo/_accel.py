"""Hot kernels with a numba path and a pure numpy/python fallback.

The numba path is used when numba imports cleanly and the environment
variable ``WELLGEO_DISABLE_NUMBA`` is not set to a truthy value.  Both
implementations are always importable under explicit names so that tests
and the benchmark can compare them directly.
"""
from __future__ import annotations

import heapq
import os

import numpy as np
from scipy.linalg import solveh_banded

_TRUTHY = {"1", "true", "yes", "on"}

NUMBA_DISABLED = os.environ.get("WELLGEO_DISABLE_NUMBA", "").strip().lower() in _TRUTHY

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def decorator(func):
            return func

        return decorator


USE_NUMBA = HAVE_NUMBA and not NUMBA_DISABLED


# ---------------------------------------------------------------------------
# Block tridiagonal SPD solve
#
# Solves  D_i x_i - w_{i-1} x_{i-1} - w_i x_{i+1} = r_i  for i = 0..K-1,
# i.e. a symmetric block tridiagonal system whose off-diagonal blocks are
# scalar multiples of the identity.  This is the preconditioner of the
# geodesic solver.
# ---------------------------------------------------------------------------


def block_tridiag_solve_numpy(diag, off, rhs):
    """Banded-Cholesky fallback.  ``diag`` (K,N,N), ``off`` (K-1,), ``rhs`` (K,N)."""
    K, N, _ = diag.shape
    u = 2 * N - 1
    size = K * N
    ab = np.zeros((u + 1, size))
    # upper-form band storage: ab[u + r - c, c] = A[r, c] for r <= c
    for a in range(N):
        for b in range(a, N):
            cols = np.arange(K) * N + b
            ab[u + a - b, cols] = diag[:, a, b]
    if K > 1:
        for a in range(N):
            cols = np.arange(1, K) * N + a
            ab[u - N, cols] = -off
    x = solveh_banded(ab, rhs.reshape(size), check_finite=False)
    return x.reshape(K, N)


def _invert_spd_into(a, out):
    """Gauss-Jordan inverse of the small SPD matrix ``a`` (overwritten) into ``out``."""
    n = a.shape[0]
    for r in range(n):
        for c in range(n):
            out[r, c] = 1.0 if r == c else 0.0
    for k in range(n):
        piv = a[k, k]
        for c in range(n):
            a[k, c] /= piv
            out[k, c] /= piv
        for r in range(n):
            if r != k:
                f = a[r, k]
                if f != 0.0:
                    for c in range(n):
                        a[r, c] -= f * a[k, c]
                        out[r, c] -= f * out[k, c]


def _block_tridiag_solve_loops(diag, off, rhs):
    K, N, _ = diag.shape
    cinv = np.empty((K, N, N))
    y = np.empty((K, N))
    work = np.empty((N, N))
    for r in range(N):
        for c in range(N):
            work[r, c] = diag[0, r, c]
    _invert_spd_into(work, cinv[0])
    for a in range(N):
        y[0, a] = rhs[0, a]
    for i in range(1, K):
        w = off[i - 1]
        w2 = w * w
        for r in range(N):
            acc = rhs[i, r]
            for c in range(N):
                work[r, c] = diag[i, r, c] - w2 * cinv[i - 1, r, c]
                acc += w * cinv[i - 1, r, c] * y[i - 1, c]
            y[i, r] = acc
        _invert_spd_into(work, cinv[i])
    x = np.empty((K, N))
    for r in range(N):
        acc = 0.0
        for c in range(N):
            acc += cinv[K - 1, r, c] * y[K - 1, c]
        x[K - 1, r] = acc
    for i in range(K - 2, -1, -1):
        for r in range(N):
            acc = 0.0
            for c in range(N):
                acc += cinv[i, r, c] * (y[i, c] + off[i] * x[i + 1, c])
            x[i, r] = acc
    return x


if HAVE_NUMBA:
    _invert_spd_into = njit(cache=True)(_invert_spd_into)
    block_tridiag_solve_numba = njit(cache=True)(_block_tridiag_solve_loops)
else:  # pragma: no cover
    block_tridiag_solve_numba = _block_tridiag_solve_loops


def block_tridiag_solve(diag, off, rhs):
    diag = np.ascontiguousarray(diag, dtype=np.float64)
    off = np.ascontiguousarray(off, dtype=np.float64)
    rhs = np.ascontiguousarray(rhs, dtype=np.float64)
    if USE_NUMBA:
        return block_tridiag_solve_numba(diag, off, rhs)
    return block_tridiag_solve_numpy(diag, off, rhs)


# ---------------------------------------------------------------------------
# Dijkstra on an implicit lattice
#
# ``shape``      (d,) node counts per axis, C order flattening
# ``offsets``    (S, d) full stencil in lexicographic order
# ``half_index`` (S,) row of ``weights`` holding the edge weight
# ``use_target`` (S,) 1 if the weight is stored at the neighbour node
#                (backward half of the stencil), 0 if at the current node
# ``weights``    (H, n_nodes) weight of the edge node -> node + forward offset
#
# Heap entries are ordered by (distance, node index) so ties resolve towards
# the lexicographically smallest flat index; both paths below agree exactly.
# ---------------------------------------------------------------------------


@njit(cache=True)
def _unravel(u, shape, coords):
    d = shape.shape[0]
    for a in range(d - 1, -1, -1):
        coords[a] = u % shape[a]
        u //= shape[a]


def lattice_dijkstra_python(shape, offsets, half_index, use_target, weights, source, target):
    shape = np.asarray(shape, dtype=np.int64)
    d = shape.shape[0]
    n_nodes = int(np.prod(shape))
    strides = np.ones(d, dtype=np.int64)
    for a in range(d - 2, -1, -1):
        strides[a] = strides[a + 1] * shape[a + 1]
    offs = [tuple(int(v) for v in row) for row in offsets]
    flat_off = [int(np.dot(row, strides)) for row in offsets]
    hidx = [int(h) for h in half_index]
    at_tgt = [bool(t) for t in use_target]
    shp = [int(s) for s in shape]
    wts = weights
    dist = np.full(n_nodes, np.inf)
    pred = np.full(n_nodes, -1, dtype=np.int64)
    done = np.zeros(n_nodes, dtype=bool)
    dist[source] = 0.0
    heap = [(0.0, int(source))]
    coords = [0] * d
    while heap:
        du, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        if u == target:
            break
        rem = u
        for a in range(d - 1, -1, -1):
            coords[a] = rem % shp[a]
            rem //= shp[a]
        for s in range(len(offs)):
            o = offs[s]
            ok = True
            for a in range(d):
                c = coords[a] + o[a]
                if c < 0 or c >= shp[a]:
                    ok = False
                    break
            if not ok:
                continue
            v = u + flat_off[s]
            if done[v]:
                continue
            w = wts[hidx[s], v] if at_tgt[s] else wts[hidx[s], u]
            nd = du + w
            if nd < dist[v]:
                dist[v] = nd
                pred[v] = u
                heapq.heappush(heap, (nd, v))
    return dist[target], pred


@njit(cache=True)
def _heap_less(k1, v1, k2, v2):
    return k1 < k2 or (k1 == k2 and v1 < v2)


@njit(cache=True)
def _heap_push(keys, vals, size, key, val):
    if size >= keys.shape[0]:
        nk = np.empty(keys.shape[0] * 2)
        nv = np.empty(vals.shape[0] * 2, dtype=np.int64)
        nk[:size] = keys[:size]
        nv[:size] = vals[:size]
        keys = nk
        vals = nv
    i = size
    keys[i] = key
    vals[i] = val
    while i > 0:
        parent = (i - 1) // 2
        if _heap_less(keys[i], vals[i], keys[parent], vals[parent]):
            keys[i], keys[parent] = keys[parent], keys[i]
            vals[i], vals[parent] = vals[parent], vals[i]
            i = parent
        else:
            break
    return keys, vals, size + 1


@njit(cache=True)
def _heap_pop(keys, vals, size):
    key = keys[0]
    val = vals[0]
    size -= 1
    keys[0] = keys[size]
    vals[0] = vals[size]
    i = 0
    while True:
        left = 2 * i + 1
        right = left + 1
        best = i
        if left < size and _heap_less(keys[left], vals[left], keys[best], vals[best]):
            best = left
        if right < size and _heap_less(keys[right], vals[right], keys[best], vals[best]):
            best = right
        if best == i:
            break
        keys[i], keys[best] = keys[best], keys[i]
        vals[i], vals[best] = vals[best], vals[i]
        i = best
    return key, val, size


@njit(cache=True)
def _lattice_dijkstra_numba(shape, offsets, half_index, use_target, weights, source, target):
    d = shape.shape[0]
    n_nodes = 1
    for a in range(d):
        n_nodes *= shape[a]
    strides = np.ones(d, dtype=np.int64)
    for a in range(d - 2, -1, -1):
        strides[a] = strides[a + 1] * shape[a + 1]
    S = offsets.shape[0]
    flat_off = np.zeros(S, dtype=np.int64)
    for s in range(S):
        for a in range(d):
            flat_off[s] += offsets[s, a] * strides[a]
    dist = np.full(n_nodes, np.inf)
    pred = np.full(n_nodes, -1, dtype=np.int64)
    done = np.zeros(n_nodes, dtype=np.bool_)
    keys = np.empty(1024)
    vals = np.empty(1024, dtype=np.int64)
    size = 0
    dist[source] = 0.0
    keys, vals, size = _heap_push(keys, vals, size, 0.0, source)
    coords = np.empty(d, dtype=np.int64)
    while size > 0:
        du, u, size = _heap_pop(keys, vals, size)
        if done[u]:
            continue
        done[u] = True
        if u == target:
            break
        _unravel(u, shape, coords)
        for s in range(S):
            ok = True
            for a in range(d):
                c = coords[a] + offsets[s, a]
                if c < 0 or c >= shape[a]:
                    ok = False
                    break
            if not ok:
                continue
            v = u + flat_off[s]
            if done[v]:
                continue
            if use_target[s]:
                w = weights[half_index[s], v]
            else:
                w = weights[half_index[s], u]
            nd = du + w
            if nd < dist[v]:
                dist[v] = nd
                pred[v] = u
                keys, vals, size = _heap_push(keys, vals, size, nd, v)
    return dist[target], pred


def lattice_dijkstra_numba(shape, offsets, half_index, use_target, weights, source, target):
    return _lattice_dijkstra_numba(
        np.ascontiguousarray(shape, dtype=np.int64),
        np.ascontiguousarray(offsets, dtype=np.int64),
        np.ascontiguousarray(half_index, dtype=np.int64),
        np.ascontiguousarray(use_target, dtype=np.bool_),
        np.ascontiguousarray(weights, dtype=np.float64),
        np.int64(source),
        np.int64(target),
    )


def lattice_dijkstra(shape, offsets, half_index, use_target, weights, source, target):
    if USE_NUMBA:
        return lattice_dijkstra_numba(shape, offsets, half_index, use_target, weights, source, target)
    return lattice_dijkstra_python(shape, offsets, half_index, use_target, weights, source, target)
