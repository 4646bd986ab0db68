"""Data model, random streams and the generic observation-ranking step.

An ensemble set ``S`` is stored as an array of shape ``(m, d)`` with the
observation in the last row; batches of cases stack to ``(n, m, d)``.
"""
import hashlib
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence, Union

import numpy as np
from scipy import stats

from .errors import EmptyHistogramError, InvalidInputError, InvalidParameterError

__all__ = [
    "ForecastCase",
    "RankHistogram",
    "HistogramSummary",
    "RandomSource",
    "as_ensemble_set",
    "stream_key",
    "hash_uniforms",
    "batch_normals",
    "rank_of_observation",
    "observation_ranks",
    "accumulate_histogram",
    "histogram_summary",
    "chi_square_quantile",
]

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class ForecastCase:
    """One verification instance: ``m - 1`` members and one observation.

    Parameters
    ----------
    members : array_like, shape (m - 1, d)
    observation : array_like, shape (d,)
    case_id : hashable, optional
    """

    members: np.ndarray
    observation: np.ndarray
    case_id: object = 0

    def __post_init__(self):
        members = np.array(self.members, dtype=float)
        obs = np.array(self.observation, dtype=float)
        if obs.ndim != 1 or obs.size < 1:
            raise InvalidInputError("observation must be a non-empty vector")
        if members.ndim == 1 and obs.size == 1:
            members = members[:, None]
        if members.ndim != 2 or members.shape[0] < 1:
            raise InvalidInputError("need at least one ensemble member (m >= 2)")
        if members.shape[1] != obs.size:
            raise InvalidInputError(
                f"member length {members.shape[1]} != observation length {obs.size}"
            )
        if not (np.all(np.isfinite(members)) and np.all(np.isfinite(obs))):
            raise InvalidInputError("all entries must be finite")
        members.setflags(write=False)
        obs.setflags(write=False)
        object.__setattr__(self, "members", members)
        object.__setattr__(self, "observation", obs)

    @property
    def m(self) -> int:
        return self.members.shape[0] + 1

    @property
    def d(self) -> int:
        return self.observation.size

    def ensemble_set(self) -> np.ndarray:
        """The set S as an ``(m, d)`` array, observation last."""
        return np.vstack([self.members, self.observation[None, :]])

    @classmethod
    def from_set(cls, S, case_id=0):
        S = np.asarray(S, dtype=float)
        return cls(S[:-1], S[-1], case_id)


def as_ensemble_set(x) -> np.ndarray:
    """Return ``x`` as a float array of shape ``(..., m, d)``."""
    if isinstance(x, ForecastCase):
        return x.ensemble_set()
    S = np.asarray(x, dtype=float)
    if S.ndim < 2:
        raise InvalidInputError("ensemble set must have shape (..., m, d)")
    if S.shape[-2] < 2 or S.shape[-1] < 1:
        raise InvalidInputError("ensemble set needs m >= 2 and d >= 1")
    return S


def stream_key(case_id) -> tuple:
    """Map a case identifier to a tuple of non-negative integers.

    Integers (and decimal strings) map to themselves so that simulated case
    indices and their CSV round trip share a stream; anything else is hashed.
    """
    if isinstance(case_id, tuple):
        return tuple(k for part in case_id for k in stream_key(part))
    if isinstance(case_id, (int, np.integer)) and not isinstance(case_id, bool):
        if case_id < 0:
            raise InvalidParameterError("integer stream keys must be non-negative")
        return (int(case_id),)
    text = str(case_id).strip()
    if text.isdigit():
        return (int(text),)
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    # two-part key, so hashed ids never collide with numeric ones
    return (_MASK64, int.from_bytes(digest, "little"))


def _mix64(z):
    z = z ^ (z >> np.uint64(30))
    z = z * np.uint64(0xBF58476D1CE4E5B9)
    z = z ^ (z >> np.uint64(27))
    z = z * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def _to_u64(value):
    if isinstance(value, int):
        return np.array(value & _MASK64, dtype=np.uint64)
    return np.asarray(value).astype(np.uint64)


# purposes: independent sub-substreams of one (seed, key) stream
SAMPLE, TIE, PERMUTE = 0, 1, 2


def hash_uniforms(seed: int, *parts) -> np.ndarray:
    """Counter-based uniforms on [0, 1).

    ``parts`` are integers or integer arrays that broadcast together, usually
    ``(*key, purpose, counter)``. The value at a given index depends only on
    ``seed`` and that index's parts, never on what else is evaluated in the
    same call, so results are independent of batching and processing order.
    Each part is folded in with one round of the SplitMix64 finaliser.
    """
    golden = np.uint64(0x9E3779B97F4A7C15)
    with np.errstate(over="ignore"):
        z = _mix64(_to_u64(int(seed)) + golden)
        for part in parts:
            z = _mix64((z ^ _to_u64(part)) + golden)
    return (z >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


def batch_normals(seed: int, keys, n: int, purpose: int = SAMPLE) -> np.ndarray:
    """Standard normals, ``n`` per key, by the Box-Muller transform.

    Normal ``2p`` and ``2p + 1`` of a key come from uniforms ``2p`` and
    ``2p + 1`` of its stream as ``r cos(2 pi v)`` and ``r sin(2 pi v)`` with
    ``r = sqrt(-2 log(1 - u))``.

    Parameters
    ----------
    keys : int array of shape (N,), or tuple of such arrays for composite keys

    Returns
    -------
    ndarray, shape (N, n)
    """
    if not isinstance(keys, tuple):
        keys = (keys,)
    keys = tuple(np.asarray(k, dtype=np.uint64).reshape(-1, 1) if not isinstance(k, int) else k
                 for k in keys)
    pairs = (n + 1) // 2
    j = np.arange(2 * pairs, dtype=np.uint64)[None, :]
    U = hash_uniforms(seed, *keys, purpose, j)
    U = np.atleast_2d(U)
    r = np.sqrt(-2.0 * np.log1p(-U[:, 0::2]))
    angle = 2.0 * np.pi * U[:, 1::2]
    z = np.empty((U.shape[0], 2 * pairs))
    z[:, 0::2] = r * np.cos(angle)
    z[:, 1::2] = r * np.sin(angle)
    return z[:, :n]


@dataclass(frozen=True)
class RandomSource:
    """A reproducible substream identified by ``(seed, stream_key)``.

    Uniforms, normals, permutations and the tie-breaking draw are
    counter-based (:func:`hash_uniforms`), so a batch of cases can be drawn
    in one vectorised call with values identical to drawing them one by one.
    :meth:`generator` gives a PCG64 generator seeded from
    ``SeedSequence(seed, spawn_key=(*key, purpose))`` for anything else.
    """

    seed: int
    stream_key: Union[int, str, tuple] = 0
    _key: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not 0 <= int(self.seed) <= _MASK64:
            raise InvalidParameterError("seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "_key", stream_key(self.stream_key))

    @property
    def key(self) -> tuple:
        return self._key

    def uniforms(self, n: int, purpose: int = SAMPLE) -> np.ndarray:
        return np.atleast_1d(hash_uniforms(self.seed, *self._key, purpose,
                                           np.arange(n, dtype=np.uint64)))

    def normals(self, shape, purpose: int = SAMPLE) -> np.ndarray:
        size = int(np.prod(shape))
        keys = tuple(np.array([k], dtype=np.uint64) for k in self._key)
        return batch_normals(self.seed, keys, size, purpose)[0].reshape(shape)

    def permutation(self, n: int, purpose: int = PERMUTE) -> np.ndarray:
        return np.argsort(self.uniforms(n, purpose), kind="stable")

    def tie_uniform(self) -> float:
        return float(hash_uniforms(self.seed, *self._key, TIE, 0))

    def generator(self, purpose: int = SAMPLE) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=self._key + (purpose,))
        return np.random.Generator(np.random.PCG64(ss))


class HistogramSummary(NamedTuple):
    mean_rank: float
    rank_variance: float
    chi_square: float


@dataclass(frozen=True)
class RankHistogram:
    """Counts of observation ranks ``1..m``; ``counts[r - 1]`` holds rank ``r``."""

    m: int
    counts: np.ndarray
    n_cases: int

    def __post_init__(self):
        counts = np.array(self.counts, dtype=np.int64)
        if counts.shape != (self.m,):
            raise InvalidInputError("counts must have length m")
        if np.any(counts < 0) or int(counts.sum()) != self.n_cases:
            raise InvalidInputError("counts must be non-negative and sum to n_cases")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    def summary(self) -> HistogramSummary:
        return histogram_summary(self)

    def __add__(self, other):
        if not isinstance(other, RankHistogram) or other.m != self.m:
            return NotImplemented
        return RankHistogram(self.m, self.counts + other.counts, self.n_cases + other.n_cases)


def observation_ranks(preranks, u) -> np.ndarray:
    """Rank of the last pre-rank in each row, ties resolved by ``u``.

    Parameters
    ----------
    preranks : array_like, shape (n, m)
    u : array_like, shape (n,)
        Uniforms on [0, 1) used to pick one of the tied positions.

    Returns
    -------
    ndarray of int64, shape (n,), values in ``1..m``
    """
    p = np.asarray(preranks)
    u = np.asarray(u, dtype=float)
    obs = p[..., -1:]
    below = np.count_nonzero(p < obs, axis=-1)
    tied = np.count_nonzero(p == obs, axis=-1)
    offset = np.minimum(np.floor(u * tied).astype(np.int64), tied - 1)
    return below + 1 + offset


def rank_of_observation(case, preranks, rng: RandomSource) -> int:
    """Rank of the observation's pre-rank among all ``m`` pre-ranks."""
    m = case.m if isinstance(case, ForecastCase) else as_ensemble_set(case).shape[-2]
    p = np.asarray(preranks, dtype=float)
    if p.shape != (m,):
        raise InvalidInputError(f"expected {m} pre-ranks, got shape {p.shape}")
    return int(observation_ranks(p[None, :], [rng.tie_uniform()])[0])


def accumulate_histogram(ranks: Sequence[int], m: int) -> RankHistogram:
    r = np.asarray(ranks, dtype=np.int64).ravel()
    if m < 1:
        raise InvalidParameterError("m must be positive")
    if r.size and (r.min() < 1 or r.max() > m):
        raise InvalidInputError(f"ranks must lie in 1..{m}")
    counts = np.bincount(r - 1, minlength=m) if r.size else np.zeros(m, np.int64)
    return RankHistogram(m, counts, int(r.size))


def histogram_summary(h: RankHistogram) -> HistogramSummary:
    """Mean, population variance and uniformity chi-square of a histogram.

    The chi-square statistic is descriptive: forecast cases are rarely
    independent, so it is not a calibrated test.
    """
    if h.n_cases == 0:
        raise EmptyHistogramError("histogram has no cases")
    ranks = np.arange(1, h.m + 1, dtype=float)
    p = h.counts / h.n_cases
    mean = float(ranks @ p)
    var = float(((ranks - mean) ** 2) @ p)
    expected = h.n_cases / h.m
    chi2 = float(((h.counts - expected) ** 2).sum() / expected)
    return HistogramSummary(mean, var, chi2)


def chi_square_quantile(m: int, q: float = 0.999) -> float:
    """Quantile of the chi-square distribution with ``m - 1`` degrees of freedom."""
    return float(stats.chi2.ppf(q, m - 1))
