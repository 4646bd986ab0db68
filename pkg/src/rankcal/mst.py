"""Euclidean minimum spanning tree lengths.

Dense Prim on a cached distance matrix. Tree lengths are summed over the
sorted edge weights: every minimum spanning tree of a graph has the same
sorted weight sequence, so the sum is bit-reproducible regardless of which
tree the traversal happens to build (coincident points give equal lengths).
"""
import numpy as np

from ._accel import USE_NUMBA, njit
from .errors import InsufficientPointsError, InvalidInputError

__all__ = [
    "DistanceCache",
    "pairwise_distances",
    "mst_length",
    "mst_length_kruskal",
    "mst_length_all_removals",
    "mst_removal_lengths",
]


# ---------------------------------------------------------------- numba kernels


@njit
def _distances_numba(X):
    n, m, d = X.shape
    D = np.zeros((n, m, m))
    for c in range(n):
        for i in range(m):
            for j in range(i + 1, m):
                acc = 0.0
                for k in range(d):
                    diff = X[c, i, k] - X[c, j, k]
                    acc += diff * diff
                acc = np.sqrt(acc)
                D[c, i, j] = acc
                D[c, j, i] = acc
    return D


@njit
def _sorted_sum(edges, n):
    # insertion sort in place (n is small), then sequential sum
    for i in range(1, n):
        x = edges[i]
        j = i - 1
        while j >= 0 and edges[j] > x:
            edges[j + 1] = edges[j]
            j -= 1
        edges[j + 1] = x
    total = 0.0
    for i in range(n):
        total += edges[i]
    return total


@njit
def _prim_sorted_sum(D, skip, key, rem, edges):
    # MST length over all nodes except `skip` (pass -1 to keep all);
    # `rem` holds the nodes not yet in the tree, swap-removed as they join
    m = D.shape[0]
    start = 1 if skip == 0 else 0
    nrem = 0
    for i in range(m):
        if i != start and i != skip:
            rem[nrem] = i
            key[nrem] = D[start, i]
            nrem += 1
    n_edges = 0
    while nrem > 0:
        pos = 0
        best = key[0]
        for p in range(1, nrem):
            if key[p] < best:
                best = key[p]
                pos = p
        node = rem[pos]
        edges[n_edges] = best
        n_edges += 1
        nrem -= 1
        rem[pos] = rem[nrem]
        key[pos] = key[nrem]
        for p in range(nrem):
            key[p] = min(key[p], D[node, rem[p]])
    return _sorted_sum(edges, n_edges)


@njit
def _removals_numba(D):
    n, m, _ = D.shape
    out = np.empty((n, m))
    key = np.empty(m)
    rem = np.empty(m, dtype=np.int64)
    edges = np.empty(m)
    for c in range(n):
        for r in range(m):
            out[c, r] = _prim_sorted_sum(D[c], r, key, rem, edges)
    return out


@njit
def _full_numba(D):
    n, m, _ = D.shape
    out = np.empty(n)
    key = np.empty(m)
    rem = np.empty(m, dtype=np.int64)
    edges = np.empty(m)
    for c in range(n):
        out[c] = _prim_sorted_sum(D[c], -1, key, rem, edges)
    return out


# ----------------------------------------------------------------- numpy path


def _distances_numpy(X):
    # sequential accumulation over components, same order as the numba kernel
    diff = X[:, :, None, 0] - X[:, None, :, 0]
    acc = diff * diff
    for k in range(1, X.shape[2]):
        diff = X[:, :, None, k] - X[:, None, :, k]
        acc += diff * diff
    return np.sqrt(acc)


def _prim_numpy(D, skip):
    """Vectorised Prim over instances ``D[b]`` with node ``skip[b]`` removed."""
    B, m, _ = D.shape
    rows = np.arange(B)
    done = np.zeros((B, m), dtype=bool)
    has_skip = skip >= 0
    done[rows[has_skip], skip[has_skip]] = True
    start = np.where(skip == 0, 1, 0)
    done[rows, start] = True
    key = D[rows, start].copy()
    n_edges = m - 2 if has_skip.all() else m - 1
    edges = np.empty((B, n_edges))
    for t in range(n_edges):
        masked = np.where(done, np.inf, key)
        arg = masked.argmin(axis=1)
        edges[:, t] = masked[rows, arg]
        done[rows, arg] = True
        np.minimum(key, D[rows, arg], out=key)
    edges.sort(axis=1)
    total = np.zeros(B)
    for t in range(n_edges):
        total += edges[:, t]
    return total


def _removals_numpy(D, chunk=20000):
    n, m, _ = D.shape
    out = np.empty((n, m))
    per = max(1, chunk // m)
    for lo in range(0, n, per):
        Dc = D[lo:lo + per]
        b = Dc.shape[0]
        rep = np.repeat(Dc, m, axis=0)
        skip = np.tile(np.arange(m), b)
        out[lo:lo + b] = _prim_numpy(rep, skip).reshape(b, m)
    return out


def _full_numpy(D):
    return _prim_numpy(D, np.full(D.shape[0], -1))


# ------------------------------------------------------------------ public API


def pairwise_distances(X, use_numba=None) -> np.ndarray:
    """Euclidean distance matrices for a batch of point sets ``(n, m, d)``."""
    X = np.ascontiguousarray(X, dtype=float)
    use_numba = USE_NUMBA if use_numba is None else use_numba
    return _distances_numba(X) if use_numba else _distances_numpy(X)


class DistanceCache:
    """Pairwise distances among the points of one set, computed once.

    Stored as the upper triangle; :attr:`matrix` expands it on demand.
    """

    def __init__(self, points):
        P = np.asarray(points, dtype=float)
        if P.ndim == 1:
            P = P[:, None]
        if P.ndim != 2:
            raise InvalidInputError("points must have shape (m, d)")
        self.m = P.shape[0]
        D = pairwise_distances(P[None])[0]
        self._iu = np.triu_indices(self.m, 1)
        self.upper = D[self._iu]

    @property
    def matrix(self) -> np.ndarray:
        D = np.zeros((self.m, self.m))
        D[self._iu] = self.upper
        D.T[self._iu] = self.upper
        return D


def mst_length(points) -> float:
    """Total edge length of a Euclidean minimum spanning tree."""
    P = np.asarray(points, dtype=float)
    if P.ndim == 1:
        P = P[:, None]
    if P.ndim != 2 or P.shape[0] < 2:
        raise InvalidInputError("mst_length needs at least 2 points")
    D = pairwise_distances(P[None])
    return float((_full_numba(D) if USE_NUMBA else _full_numpy(D))[0])


def mst_length_kruskal(points) -> float:
    """Kruskal's construction with union-find; an independent cross-check."""
    P = np.asarray(points, dtype=float)
    if P.ndim == 1:
        P = P[:, None]
    m = P.shape[0]
    if m < 2:
        raise InvalidInputError("mst_length needs at least 2 points")
    parent = list(range(m))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    edges = sorted(
        (float(np.sqrt(np.sum((P[i] - P[j]) ** 2))), i, j)
        for i in range(m) for j in range(i + 1, m)
    )
    weights = []
    for w, i, j in edges:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
            weights.append(w)
            if len(weights) == m - 1:
                break
    return float(np.sum(sorted(weights)))


def mst_length_all_removals(cache: DistanceCache) -> np.ndarray:
    """Entry ``i`` is the MST length of the set with point ``i`` removed."""
    if cache.m < 3:
        raise InsufficientPointsError("need at least 3 points to remove one and span the rest")
    D = cache.matrix[None]
    return (_removals_numba(D) if USE_NUMBA else _removals_numpy(D))[0]


def mst_removal_lengths(S, use_numba=None) -> np.ndarray:
    """Leave-one-out MST lengths for a batch of sets ``(..., m, d)``."""
    S = np.asarray(S, dtype=float)
    if S.shape[-2] < 3:
        raise InsufficientPointsError("need m >= 3 for leave-one-out spanning trees")
    lead = S.shape[:-2]
    X = S.reshape((-1,) + S.shape[-2:])
    use_numba = USE_NUMBA if use_numba is None else use_numba
    D = pairwise_distances(X, use_numba)
    out = _removals_numba(D) if use_numba else _removals_numpy(D)
    return out.reshape(lead + (S.shape[-2],))
