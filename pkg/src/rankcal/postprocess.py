"""Rolling-window bias correction and error dressing of raw ensembles.

For every verification day the preceding ``window`` days train a per-lead-time
regression of the observation on the raw ensemble mean. The new ensemble is
the corrected mean plus the training residuals (each used once), optionally
inflated by the regression prediction standard-error factor

    c = sqrt(1 + 1/n + (xbar - mean_train(xbar))**2 / Sxx).

Dependence across lead times is then handled by one of three strategies:

``independent``
    residuals are permuted independently per lead time.
``ecc``
    the independent ensemble is reordered to the raw ensemble's rank pattern.
``mvn``
    errors are drawn from a zero-mean normal with the residuals' empirical
    covariance, scaled per lead time by ``c``.
"""
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np

from .core import PERMUTE, SAMPLE, TIE, RandomSource, RankHistogram, accumulate_histogram, hash_uniforms, observation_ranks
from .errors import (
    InsufficientHistoryError,
    InvalidInputError,
    InvalidParameterError,
)
from .prerank import PreRankMethod, compute_preranks_many
from .simulate import CovarianceModel, cholesky_with_jitter, covariance_matrix

__all__ = [
    "ForecastSeries",
    "PostprocessConfig",
    "RegressionFit",
    "PostprocessResult",
    "STRATEGIES",
    "fit_bias_correction",
    "error_dressing",
    "ecc_reorder",
    "mvn_error_sampling",
    "postprocessed_ensemble",
    "run_postprocessing",
    "SyntheticSpec",
    "synthetic_series",
]

STRATEGIES = ("independent", "ecc", "mvn")


@dataclass(frozen=True)
class ForecastSeries:
    """Daily raw ensembles ``(n_days, m_raw, d)`` and observations ``(n_days, d)``."""

    days: np.ndarray
    raw: np.ndarray
    obs: np.ndarray

    def __post_init__(self):
        days = np.asarray(self.days, dtype=np.int64)
        raw = np.asarray(self.raw, dtype=float)
        obs = np.asarray(self.obs, dtype=float)
        if raw.ndim != 3 or obs.ndim != 2:
            raise InvalidInputError("raw must be (days, members, d) and obs (days, d)")
        if not (days.shape[0] == raw.shape[0] == obs.shape[0]):
            raise InvalidInputError("days, raw and obs disagree on the number of days")
        if raw.shape[2] != obs.shape[1]:
            raise InvalidInputError("raw ensemble and observation disagree on d")
        if days.size > 1 and np.any(np.diff(days) <= 0):
            raise InvalidInputError("days must be strictly increasing")
        if not (np.all(np.isfinite(raw)) and np.all(np.isfinite(obs))):
            raise InvalidInputError("series contains non-finite values")
        for name, arr in (("days", days), ("raw", raw), ("obs", obs)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_days(self):
        return self.days.size

    @property
    def m_raw(self):
        return self.raw.shape[1]

    @property
    def d(self):
        return self.raw.shape[2]


@dataclass(frozen=True)
class PostprocessConfig:
    window: int = 50
    strategy: str = "independent"
    inflate: bool = True

    def __post_init__(self):
        if int(self.window) < 2:
            raise InvalidParameterError("window must be at least 2")
        if self.strategy not in STRATEGIES:
            raise InvalidParameterError(
                f"unknown strategy {self.strategy!r}; choose from {', '.join(STRATEGIES)}"
            )


@dataclass(frozen=True)
class RegressionFit:
    """Per-lead-time least squares of observation on ensemble mean."""

    intercept: np.ndarray
    slope: np.ndarray
    rss: np.ndarray
    n: int
    xbar_mean: np.ndarray
    sxx: np.ndarray
    errors: np.ndarray = field(repr=False)

    def predict(self, xbar):
        return self.intercept + self.slope * np.asarray(xbar, dtype=float)

    def inflation(self, xbar):
        xbar = np.asarray(xbar, dtype=float)
        lever = np.divide((xbar - self.xbar_mean) ** 2, self.sxx,
                          out=np.zeros_like(self.sxx), where=self.sxx > 0)
        return np.sqrt(1.0 + 1.0 / self.n + lever)


def _ols(x, y):
    """Columnwise least squares ``y ~ a + b x`` for ``(n, d)`` arrays."""
    n = x.shape[0]
    xm = x.mean(axis=0)
    ym = y.mean(axis=0)
    sxx = ((x - xm) ** 2).sum(axis=0)
    sxy = ((x - xm) * (y - ym)).sum(axis=0)
    # zero-variance predictor: flat fit through the mean of y
    slope = np.divide(sxy, sxx, out=np.zeros_like(sxx), where=sxx > 0)
    intercept = ym - slope * xm
    resid = y - (intercept + slope * x)
    return RegressionFit(intercept, slope, (resid ** 2).sum(axis=0), n, xm, sxx, resid)


def fit_bias_correction(series: ForecastSeries, day: int, config: PostprocessConfig) -> RegressionFit:
    """Fit on the ``config.window`` days preceding day index ``day``."""
    w = config.window
    if day < w or day >= series.n_days:
        raise InsufficientHistoryError(
            f"day index {day} needs {w} preceding days", required=w + 1
        )
    x = series.raw[day - w:day].mean(axis=1)
    y = series.obs[day - w:day]
    return _ols(x, y)


def _day_source(seed, day, strategy):
    return RandomSource(seed, (day, STRATEGIES.index(strategy)))


def error_dressing(series, day, fit: RegressionFit, config: PostprocessConfig, rng: RandomSource):
    """Corrected mean plus each training error once, shuffled per lead time."""
    xbar = series.raw[day].mean(axis=0)
    mu = fit.predict(xbar)
    c = fit.inflation(xbar) if config.inflate else np.ones_like(mu)
    n, d = fit.errors.shape
    keys = rng.uniforms(n * d, PERMUTE).reshape(d, n)
    order = np.argsort(keys, axis=1, kind="stable").T
    shuffled = np.take_along_axis(fit.errors, order, axis=0)
    return mu + c * shuffled


def ecc_reorder(template, samples):
    """Give ``samples`` the per-component rank order of ``template``.

    The member holding the j-th smallest template value in component k gets
    the j-th smallest sample value; template ties go by member index.
    """
    T = np.asarray(template, dtype=float)
    X = np.asarray(samples, dtype=float)
    if T.shape != X.shape or T.ndim != 2:
        raise InvalidInputError(f"template shape {T.shape} != samples shape {X.shape}")
    order = np.argsort(T, axis=0, kind="stable")
    out = np.empty_like(X)
    np.put_along_axis(out, order, np.sort(X, axis=0), axis=0)
    return out


def mvn_error_sampling(series, day, fit: RegressionFit, config: PostprocessConfig, rng: RandomSource):
    """Corrected mean plus multivariate normal errors with the residual covariance."""
    xbar = series.raw[day].mean(axis=0)
    mu = fit.predict(xbar)
    n, d = fit.errors.shape
    cov = np.atleast_2d(np.cov(fit.errors, rowvar=False))
    if not np.any(cov):
        return np.tile(mu, (n, 1))
    L = cholesky_with_jitter(cov)
    if config.inflate:
        L = fit.inflation(xbar)[:, None] * L
    z = rng.normals((n, d), SAMPLE)
    return mu + z @ L.T


def postprocessed_ensemble(series, day, config: PostprocessConfig, seed: int = 0):
    """The ``(window, d)`` postprocessed ensemble for one day index."""
    fit = fit_bias_correction(series, day, config)
    rng = _day_source(seed, day, config.strategy)
    if config.strategy == "mvn":
        return mvn_error_sampling(series, day, fit, config, rng)
    ens = error_dressing(series, day, fit, config, rng)
    if config.strategy == "ecc":
        ens = ecc_reorder(series.raw[day], ens)
    return ens


@dataclass
class PostprocessResult:
    strategy: str
    days: np.ndarray
    univariate: List[RankHistogram]
    multivariate: Dict[PreRankMethod, RankHistogram]
    ranks: Dict[PreRankMethod, np.ndarray] = field(repr=False)
    univariate_ranks: np.ndarray = field(repr=False, default=None)


def run_postprocessing(series: ForecastSeries, config: PostprocessConfig, methods="all",
                       seed: int = 0, standardize: bool = False) -> PostprocessResult:
    """Postprocess every day with a full training window and rank the observation.

    Returns per-lead-time univariate histograms and one multivariate histogram
    per method, all over the same verification days.
    """
    w = config.window
    if series.n_days <= w:
        raise InsufficientHistoryError(
            f"series has {series.n_days} days; at least {w + 1} are required", required=w + 1
        )
    methods = PreRankMethod.parse_list(methods)
    idx = np.arange(w, series.n_days)
    S = np.empty((idx.size, w + 1, series.d))
    for pos, day in enumerate(idx):
        S[pos, :w] = postprocessed_ensemble(series, int(day), config, seed)
        S[pos, w] = series.obs[day]
    code = STRATEGIES.index(config.strategy)
    key_day = idx.astype(np.uint64)
    u_mv = hash_uniforms(seed, key_day, code, TIE, 0)
    lead = np.arange(1, series.d + 1, dtype=np.uint64)[None, :]
    u_uni = hash_uniforms(seed, key_day[:, None], code, TIE, lead)
    uni = np.stack([observation_ranks(S[:, :, k], u_uni[:, k]) for k in range(series.d)], axis=1)
    pre = compute_preranks_many(S, methods, standardize=standardize)
    ranks = {meth: observation_ranks(p, u_mv) for meth, p in pre.items()}
    m = w + 1
    return PostprocessResult(
        config.strategy,
        series.days[idx],
        [accumulate_histogram(uni[:, k], m) for k in range(series.d)],
        {meth: accumulate_histogram(r, m) for meth, r in ranks.items()},
        ranks,
        uni,
    )


@dataclass(frozen=True)
class SyntheticSpec:
    """Synthetic truth and raw ensemble standing in for a real forecast archive.

    Each day draws a predictable signal and a forecast error, both AR(1)
    across lead times with scale ``tau``; the observation is their sum. Raw
    members are the signal plus ``bias`` plus member noise with standard
    deviation ``spread * error_sd`` and AR(1) scale ``tau + tau_offset``.
    """

    days: int = 873
    d: int = 12
    members: int = 50
    bias: float = -1.5
    spread: float = 0.5
    tau: float = 3.0
    tau_offset: float = -1.0
    signal_sd: float = 3.0
    error_sd: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.days < 1 or self.d < 1 or self.members < 1:
            raise InvalidParameterError("days, d and members must be positive")
        if not (self.tau > 0 and self.tau + self.tau_offset > 0):
            raise InvalidParameterError("tau and tau + tau_offset must be positive")
        if self.spread < 0 or self.signal_sd < 0 or self.error_sd < 0:
            raise InvalidParameterError("spread and standard deviations must be non-negative")

    @classmethod
    def parse(cls, text: str):
        """Parse ``key=value`` pairs separated by commas, e.g. ``days=900,bias=2``."""
        kwargs = {}
        names = cls.__dataclass_fields__
        for item in filter(None, (p.strip() for p in str(text).split(","))):
            if "=" not in item:
                raise InvalidParameterError(f"synthetic spec item {item!r} is not key=value")
            key, value = (s.strip() for s in item.split("=", 1))
            if key not in names:
                raise InvalidParameterError(f"unknown synthetic spec key {key!r}")
            kind = names[key].type
            try:
                kwargs[key] = int(value) if kind in (int, "int") else float(value)
            except ValueError:
                raise InvalidParameterError(f"bad value for {key}: {value!r}") from None
        return cls(**kwargs)

    def as_text(self):
        return ",".join(f"{k}={getattr(self, k)!r}" for k in self.__dataclass_fields__)


def synthetic_series(spec: SyntheticSpec = SyntheticSpec()) -> ForecastSeries:
    d, m = spec.d, spec.members
    L_truth = cholesky_with_jitter(covariance_matrix(CovarianceModel("ar1", d, tau=spec.tau)))
    L_raw = cholesky_with_jitter(
        covariance_matrix(CovarianceModel("ar1", d, tau=spec.tau + spec.tau_offset))
    )
    raw = np.empty((spec.days, m, d))
    obs = np.empty((spec.days, d))
    for t in range(spec.days):
        z = RandomSource(spec.seed, t).normals((m + 2, d))
        signal = spec.signal_sd * (L_truth @ z[0])
        obs[t] = signal + spec.error_sd * (L_truth @ z[1])
        raw[t] = signal + spec.bias + spec.spread * spec.error_sd * (z[2:] @ L_raw.T)
    return ForecastSeries(np.arange(spec.days), raw, obs)
