"""Synthetic Gaussian scenarios and the Monte Carlo ranking driver.

Each case draws from its own substream ``RandomSource(seed, case_index)``:
one ``(m, d)`` block of counter-based standard normals (Box-Muller, see
:func:`rankcal.core.batch_normals`), row 0 for the observation and rows
``1..m-1`` for the members, each row mapped through the lower Cholesky
factor of its model's covariance. Results therefore do not depend on chunk
size or worker count.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Optional

import numpy as np

from .core import (
    TIE,
    ForecastCase,
    RandomSource,
    RankHistogram,
    accumulate_histogram,
    batch_normals,
    hash_uniforms,
    observation_ranks,
)
from .errors import InvalidParameterError, NotPositiveDefiniteError, RankcalError
from .prerank import PreRankMethod, compute_preranks_many

__all__ = [
    "CovarianceModel",
    "Scenario",
    "ScenarioConfig",
    "ScenarioResult",
    "covariance_matrix",
    "cholesky_with_jitter",
    "parse_scenario",
    "sample_gaussian_case",
    "sample_sets",
    "sample_appendix_sets",
    "run_scenario",
    "run_scenario_multi",
    "pooled_member_rank_stats",
]

KINDS = ("iid", "ar1", "damped-cosine", "long-range", "truncated-linear")
_ALIASES = {"corr-a": "damped-cosine", "corr-b": "long-range", "corr-c": "truncated-linear"}
JITTER = 1e-10


@dataclass(frozen=True)
class CovarianceModel:
    """Covariance of a stationary Gaussian vector on ``t = 1..d``.

    ``iid`` is ``sigma**2 * I``; the other kinds are correlation functions
    of the lag ``h = |i - j|``. ``ar1`` takes ``tau``; the three complex
    models have fixed constants.
    """

    kind: str
    d: int
    sigma: float = 1.0
    tau: Optional[float] = None

    def __post_init__(self):
        kind = _ALIASES.get(self.kind, self.kind)
        if kind not in KINDS:
            raise InvalidParameterError(f"unknown covariance kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if int(self.d) < 1:
            raise InvalidParameterError("d must be at least 1")
        if kind == "ar1" and (self.tau is None or not self.tau > 0):
            raise InvalidParameterError("ar1 needs tau > 0")
        if kind == "iid" and not self.sigma > 0:
            raise InvalidParameterError("sigma must be positive")


def covariance_matrix(model: CovarianceModel) -> np.ndarray:
    d = model.d
    h = np.abs(np.subtract.outer(np.arange(d), np.arange(d))).astype(float)
    if model.kind == "iid":
        return model.sigma ** 2 * np.eye(d)
    if model.kind == "ar1":
        return np.exp(-h / model.tau)
    if model.kind == "damped-cosine":
        return np.exp(-h / 4.5) * (0.75 + 0.25 * np.cos(np.pi * h / 2))
    if model.kind == "long-range":
        return 1.0 / (1.0 + h / 2.5)
    return np.where(h <= 5, 1.0 - h / 5.0, 0.0)


def cholesky_with_jitter(C) -> np.ndarray:
    """Lower Cholesky factor; retries once with ``1e-10 * I`` added."""
    C = np.asarray(C, dtype=float)
    try:
        return np.linalg.cholesky(C)
    except np.linalg.LinAlgError:
        pass
    try:
        return np.linalg.cholesky(C + JITTER * np.eye(C.shape[0]))
    except np.linalg.LinAlgError:
        raise NotPositiveDefiniteError("covariance matrix is not positive definite") from None


@lru_cache(maxsize=64)
def _factor(model: CovarianceModel) -> np.ndarray:
    L = cholesky_with_jitter(covariance_matrix(model))
    L.setflags(write=False)
    return L


@dataclass(frozen=True)
class Scenario:
    model: CovarianceModel
    mean: float = 0.0

    @property
    def d(self):
        return self.model.d


def parse_scenario(name: str, d: int) -> Scenario:
    """Parse ``iid:<mu>:<sigma>``, ``ar1:<tau>``, ``corr-a``, ``corr-b``, ``corr-c``."""
    parts = str(name).strip().split(":")
    head = parts[0].lower()
    try:
        if head == "iid":
            if len(parts) != 3:
                raise InvalidParameterError("iid scenario is iid:<mu>:<sigma>")
            return Scenario(CovarianceModel("iid", d, sigma=float(parts[2])), float(parts[1]))
        if head == "ar1":
            if len(parts) != 2:
                raise InvalidParameterError("ar1 scenario is ar1:<tau>")
            return Scenario(CovarianceModel("ar1", d, tau=float(parts[1])))
        if head in _ALIASES and len(parts) == 1:
            return Scenario(CovarianceModel(head, d))
    except ValueError as exc:
        if isinstance(exc, InvalidParameterError):
            raise
        raise InvalidParameterError(f"bad number in scenario {name!r}") from None
    raise InvalidParameterError(f"unknown scenario {name!r}")


@dataclass(frozen=True)
class ScenarioConfig:
    obs: Scenario
    fcst: Scenario
    m: int
    n_cases: int
    seed: int = 0

    def __post_init__(self):
        if self.obs.d != self.fcst.d:
            raise InvalidParameterError("observation and forecast models must share d")
        if self.m < 2:
            raise InvalidParameterError("m must be at least 2")
        if self.n_cases < 1:
            raise InvalidParameterError("n_cases must be at least 1")

    @property
    def d(self):
        return self.obs.d

    @classmethod
    def from_names(cls, fcst: str, obs: str, d: int, m: int, n_cases: int, seed: int = 0):
        return cls(parse_scenario(obs, d), parse_scenario(fcst, d), m, n_cases, seed)


def _apply_factor(z, L):
    # z @ L.T accumulated in a fixed order; BLAS kernels may round differently
    # depending on batch shape, which would break bit-reproducibility
    out = z[..., :1] * L[:, 0]
    for k in range(1, L.shape[1]):
        out += z[..., k:k + 1] * L[:, k]
    return out


def _transform(config: ScenarioConfig, z: np.ndarray) -> np.ndarray:
    S = np.empty_like(z)
    S[..., -1, :] = config.obs.mean + _apply_factor(z[..., 0, :], _factor(config.obs.model))
    S[..., :-1, :] = config.fcst.mean + _apply_factor(z[..., 1:, :], _factor(config.fcst.model))
    return S


def sample_sets(config: ScenarioConfig, indices) -> np.ndarray:
    """Ensemble sets ``(len(indices), m, d)`` for the given case indices."""
    indices = np.asarray(indices, dtype=np.int64).ravel()
    if indices.size and indices.min() < 0:
        raise InvalidParameterError("case indices must be non-negative")
    m, d = config.m, config.d
    z = batch_normals(config.seed, indices, m * d).reshape(-1, m, d)
    return _transform(config, z)


def sample_gaussian_case(config: ScenarioConfig, case_index: int, rng: RandomSource = None) -> ForecastCase:
    """Draw one case. ``rng`` defaults to the case's own substream."""
    rng = RandomSource(config.seed, case_index) if rng is None else rng
    z = rng.normals((config.m, config.d))
    return ForecastCase.from_set(_transform(config, z), case_index)


def sample_appendix_sets(m: int, d: int, indices, seed: int = 0) -> np.ndarray:
    """Observation with ``d`` identical standard normal components, members iid N(0, I)."""
    indices = np.asarray(indices, dtype=np.int64).ravel()
    z = batch_normals(seed, indices, m * d).reshape(-1, m, d)
    S = z[:, [*range(1, m), 0], :].copy()
    S[:, -1, :] = z[:, 0, :1]
    return S


@dataclass
class ScenarioResult:
    m: int
    histograms: Dict[PreRankMethod, RankHistogram]
    ranks: Dict[PreRankMethod, np.ndarray] = field(repr=False)


def _chunk_ranks(sampler, methods, seed, lo, hi, standardize):
    idx = np.arange(lo, hi)
    try:
        S = sampler(idx)
    except RankcalError as exc:
        raise type(exc)(f"cases {lo}..{hi - 1}: {exc}") from exc
    u = hash_uniforms(seed, idx.astype(np.uint64), TIE, 0)
    try:
        pre = compute_preranks_many(S, methods, standardize=standardize)
    except RankcalError as exc:
        raise type(exc)(f"cases {lo}..{hi - 1}: {exc}") from exc
    return {method: observation_ranks(p, u) for method, p in pre.items()}


def run_ranks(sampler, m, n_cases, methods, seed, workers=1, chunk=2000, standardize=False):
    """Rank the observation in ``n_cases`` sampled sets for each method.

    ``sampler(indices)`` must return the sets for those case indices.
    """
    methods = PreRankMethod.parse_list(methods)
    bounds = [(lo, min(lo + chunk, n_cases)) for lo in range(0, n_cases, chunk)]

    def job(b):
        return _chunk_ranks(sampler, methods, seed, b[0], b[1], standardize)

    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, bounds))
    else:
        parts = [job(b) for b in bounds]
    ranks = {meth: np.concatenate([p[meth] for p in parts]) for meth in methods}
    hists = {meth: accumulate_histogram(r, m) for meth, r in ranks.items()}
    return ScenarioResult(m, hists, ranks)


def run_scenario_multi(config: ScenarioConfig, methods="all", workers=1, chunk=2000,
                       standardize=False) -> ScenarioResult:
    """Sample ``config.n_cases`` cases once and rank them under each method."""
    return run_ranks(lambda idx: sample_sets(config, idx), config.m, config.n_cases,
                     methods, config.seed, workers, chunk, standardize)


def run_scenario(config: ScenarioConfig, method, **kwargs) -> RankHistogram:
    method = PreRankMethod.parse(method)
    return run_scenario_multi(config, [method], **kwargs).histograms[method]


def pooled_member_rank_stats(obs_ranks, m):
    """Mean and variance of the rank of a uniformly chosen ensemble member.

    With random tie resolution the ``m`` ranks of a case are a permutation of
    ``1..m``, so the members' ranks sum to ``m(m+1)/2 - r_obs`` (and likewise
    for squares); pooling them is exact, not an approximation.
    """
    r = np.asarray(obs_ranks, dtype=float)
    s1 = m * (m + 1) / 2.0 - r
    s2 = m * (m + 1) * (2 * m + 1) / 6.0 - r * r
    n = r.size * (m - 1)
    mean = s1.sum() / n
    return float(mean), float(s2.sum() / n - mean * mean)
