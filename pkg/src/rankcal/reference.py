"""Slow, direct reference implementations used as test oracles.

These enumerate definitions literally, in exact arithmetic where it matters,
and are only meant for small ``m``.
"""
import itertools
import math
from fractions import Fraction

import numpy as np

from .errors import InvalidInputError

__all__ = [
    "modified_band_depth_bruteforce",
    "band_depth_counts_bruteforce",
    "multivariate_prerank_bruteforce",
    "average_prerank_bruteforce",
    "prufer_to_edges",
    "mst_length_bruteforce",
]


def band_depth_counts_bruteforce(S):
    """Per element, the number of (component, pair ``j1 < j2``) with the value inside the pair's band."""
    S = np.asarray(S, dtype=float)
    m, d = S.shape
    out = []
    for i in range(m):
        total = 0
        for k in range(d):
            x = S[i, k]
            for j1, j2 in itertools.combinations(range(m), 2):
                lo, hi = min(S[j1, k], S[j2, k]), max(S[j1, k], S[j2, k])
                total += lo <= x <= hi
        out.append(total)
    return out


def modified_band_depth_bruteforce(S):
    """Modified band depth with bands from pairs, as exact fractions in [0, 1]."""
    S = np.asarray(S, dtype=float)
    m, d = S.shape
    pairs = m * (m - 1) // 2
    return [Fraction(c, d * pairs) for c in band_depth_counts_bruteforce(S)]


def multivariate_prerank_bruteforce(S):
    S = np.asarray(S, dtype=float)
    return [sum(bool(np.all(y <= x)) for y in S) for x in S]


def average_prerank_bruteforce(S):
    S = np.asarray(S, dtype=float)
    m, d = S.shape
    return [Fraction(sum(int(np.sum(S[:, k] <= S[i, k])) for k in range(d)), d) for i in range(m)]


def prufer_to_edges(seq, m):
    """Decode a Prüfer sequence of length ``m - 2`` into the ``m - 1`` tree edges."""
    degree = [1] * m
    for v in seq:
        degree[v] += 1
    edges = []
    for v in seq:
        leaf = next(u for u in range(m) if degree[u] == 1)
        edges.append((leaf, v))
        degree[leaf] -= 1
        degree[v] -= 1
    u, w = (u for u in range(m) if degree[u] == 1)
    edges.append((u, w))
    return edges


def mst_length_bruteforce(points):
    """Minimum total length over all ``m**(m-2)`` labelled spanning trees."""
    P = np.asarray(points, dtype=float)
    if P.ndim == 1:
        P = P[:, None]
    m = P.shape[0]
    if m < 2:
        raise InvalidInputError("need at least 2 points")
    if m > 8:
        raise InvalidInputError("exhaustive enumeration is limited to m <= 8")
    dist = [[math.sqrt(math.fsum((a - b) ** 2 for a, b in zip(P[i], P[j]))) for j in range(m)]
            for i in range(m)]
    if m == 2:
        return dist[0][1]
    best = math.inf
    for seq in itertools.product(range(m), repeat=m - 2):
        length = math.fsum(dist[a][b] for a, b in prufer_to_edges(seq, m))
        best = min(best, length)
    return best
