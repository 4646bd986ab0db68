"""Pre-rank functions.

Every function takes a single ensemble set of shape ``(m, d)`` (or a
:class:`~rankcal.core.ForecastCase`) or a batch ``(..., m, d)`` and returns
pre-ranks of shape ``(..., m)``, one per element, observation last.
"""
from enum import Enum

import numpy as np

from ._accel import USE_NUMBA, njit
from .core import as_ensemble_set
from .errors import InvalidParameterError
from .mst import mst_removal_lengths

__all__ = [
    "PreRankMethod",
    "univariate_ranks",
    "prerank_multivariate",
    "prerank_band_depth",
    "prerank_average",
    "prerank_mst",
    "compute_preranks",
    "compute_preranks_many",
]


class PreRankMethod(str, Enum):
    MULTIVARIATE = "mv"
    BAND_DEPTH = "bd"
    AVERAGE = "avg"
    MST = "mst"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise InvalidParameterError(
                f"unknown pre-rank method {value!r}; choose from "
                + ", ".join(m.value for m in cls)
            ) from None

    @classmethod
    def parse_list(cls, value):
        """Parse ``"all"``, a comma-separated string or an iterable of names."""
        if isinstance(value, str):
            if value.lower() == "all":
                return list(cls)
            value = [v for v in value.split(",") if v.strip()]
        return [cls.parse(v.strip() if isinstance(v, str) else v) for v in value]


@njit
def _univariate_numba(X):
    n, m, d = X.shape
    ranks = np.empty((n, m, d), dtype=np.int64)
    ties = np.empty((n, m, d), dtype=np.int64)
    for c in range(n):
        for k in range(d):
            for i in range(m):
                x = X[c, i, k]
                le = 0
                eq = 0
                for j in range(m):
                    y = X[c, j, k]
                    le += y <= x
                    eq += y == x
                ranks[c, i, k] = le
                ties[c, i, k] = eq
    return ranks, ties


def univariate_ranks(x, use_numba=None):
    """Componentwise ranks and tie counts.

    ``ranks[..., i, k]`` counts the elements ``j`` with ``x[j, k] <= x[i, k]``
    (so tied values share the largest rank of their group) and
    ``tie_counts[..., i, k]`` counts those with ``x[j, k] == x[i, k]``.
    The compiled path counts directly (quadratic in m, fast for small m);
    the numpy path sorts.
    """
    S = as_ensemble_set(x)
    use_numba = USE_NUMBA if use_numba is None else use_numba
    if use_numba and S.shape[-2] <= 64:
        X = np.ascontiguousarray(S.reshape((-1,) + S.shape[-2:]))
        r, t = _univariate_numba(X)
        return r.reshape(S.shape), t.reshape(S.shape)
    return _univariate_sorted(S)


def _univariate_sorted(S):
    m = S.shape[-2]
    order = np.argsort(S, axis=-2, kind="stable")
    srt = np.take_along_axis(S, order, axis=-2)
    pos_shape = (1,) * (S.ndim - 2) + (m, 1)
    pos = np.arange(m).reshape(pos_shape)

    differs = srt[..., 1:, :] != srt[..., :-1, :]
    pad = np.ones(S.shape[:-2] + (1, S.shape[-1]), dtype=bool)
    is_end = np.concatenate([differs, pad], axis=-2)
    is_start = np.concatenate([pad, differs], axis=-2)

    end = np.where(is_end, pos, m)
    end = np.flip(np.minimum.accumulate(np.flip(end, axis=-2), axis=-2), axis=-2)
    start = np.maximum.accumulate(np.where(is_start, pos, 0), axis=-2)

    ranks = np.empty(S.shape, dtype=np.int64)
    ties = np.empty(S.shape, dtype=np.int64)
    np.put_along_axis(ranks, order, end + 1, axis=-2)
    np.put_along_axis(ties, order, end - start + 1, axis=-2)
    return ranks, ties


# ------------------------------------------------------------- multivariate


@njit
def _dominance_numba(X):
    n, m, d = X.shape
    out = np.zeros((n, m), dtype=np.int64)
    for c in range(n):
        for i in range(m):
            count = 0
            for j in range(m):
                below = True
                for k in range(d):
                    if X[c, j, k] > X[c, i, k]:
                        below = False
                        break
                if below:
                    count += 1
            out[c, i] = count
    return out


def _dominance_numpy(X, max_elems=2 ** 24):
    n, m, d = X.shape
    out = np.empty((n, m), dtype=np.int64)
    step = max(1, max_elems // (m * m * d))
    for lo in range(0, n, step):
        blk = X[lo:lo + step]
        below = (blk[:, None, :, :] <= blk[:, :, None, :]).all(axis=-1)
        out[lo:lo + step] = below.sum(axis=-1)
    return out


def prerank_multivariate(x, use_numba=None):
    """Number of elements of S componentwise below-or-equal each element.

    Self is counted, so every value is at least 1.
    """
    S = as_ensemble_set(x)
    X = np.ascontiguousarray(S.reshape((-1,) + S.shape[-2:]))
    use_numba = USE_NUMBA if use_numba is None else use_numba
    counts = _dominance_numba(X) if use_numba else _dominance_numpy(X)
    return counts.reshape(S.shape[:-1]).astype(float)


# --------------------------------------------------------------- band depth


def band_depth_counts(x, tie_free=None):
    """Band-membership counts summed over components (integer valued).

    For each element and component this is the number of pairs
    ``i1 < i2`` whose closed band ``[min, max]`` contains the element's value:
    ``r (m - r) + (r - 1) t - t (t - 1) / 2`` with ``r`` the rank and ``t``
    the tie count. Without ties it reduces to ``(m - r)(r - 1) + (m - 1)``,
    which is used when ``tie_free`` is true (auto-detected when ``None``).
    """
    S = as_ensemble_set(x)
    r, t = univariate_ranks(S)
    return _band_counts(r, t, S.shape[-2], tie_free)


def _band_counts(r, t, m, tie_free=None):
    if tie_free is None:
        tie_free = bool(np.all(t == 1))
    if tie_free:
        per = (m - r) * (r - 1) + (m - 1)
    else:
        per = r * (m - r) + (r - 1) * t - t * (t - 1) // 2
    return per.sum(axis=-1)


def prerank_band_depth(x, tie_free=None):
    """Band depth (pairs, n = 2) pre-rank: mean band-membership count over components.

    Dividing by ``m (m - 1) / 2`` gives the modified band depth in [0, 1].
    """
    S = as_ensemble_set(x)
    return band_depth_counts(S, tie_free) / S.shape[-1]


def prerank_average(x):
    """Mean of the componentwise ranks."""
    S = as_ensemble_set(x)
    r, _ = univariate_ranks(S)
    return r.sum(axis=-1) / S.shape[-1]


def _standardize(S):
    mean = S.mean(axis=-2, keepdims=True)
    sd = S.std(axis=-2, ddof=1, keepdims=True)
    sd = np.where(sd > 0, sd, 1.0)
    return (S - mean) / sd


def prerank_mst(x, standardize=False, use_numba=None):
    """Length of the minimum spanning tree of S with the element removed.

    Outlying elements get short trees and therefore low pre-ranks. With
    ``standardize`` each component is centred and scaled by its sample mean
    and standard deviation over S first (constant components are only
    centred).
    """
    S = as_ensemble_set(x)
    if standardize:
        S = _standardize(S)
    return mst_removal_lengths(S, use_numba)


def compute_preranks(x, method, standardize=False):
    """Dispatch to the pre-rank function named by ``method``."""
    method = PreRankMethod.parse(method)
    if method is PreRankMethod.MULTIVARIATE:
        return prerank_multivariate(x)
    if method is PreRankMethod.BAND_DEPTH:
        return prerank_band_depth(x)
    if method is PreRankMethod.AVERAGE:
        return prerank_average(x)
    return prerank_mst(x, standardize=standardize)


def compute_preranks_many(x, methods, standardize=False):
    """Pre-ranks for several methods, sharing the componentwise ranks."""
    S = as_ensemble_set(x)
    methods = PreRankMethod.parse_list(methods)
    out = {}
    ranks = None
    for method in methods:
        if method in (PreRankMethod.BAND_DEPTH, PreRankMethod.AVERAGE):
            if ranks is None:
                ranks = univariate_ranks(S)
            r, t = ranks
            d = S.shape[-1]
            if method is PreRankMethod.AVERAGE:
                out[method] = r.sum(axis=-1) / d
            else:
                out[method] = _band_counts(r, t, S.shape[-2]) / d
        else:
            out[method] = compute_preranks(S, method, standardize=standardize)
    return out
