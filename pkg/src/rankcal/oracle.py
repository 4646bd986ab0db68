"""Closed-form moments of the average and band-depth pre-ranks.

All quantities refer to the extreme dependence regime: observation
components identical, forecast components independent, all curves
independent. Componentwise ranks are then uniform on ``1..m``.

Everything is computed in exact rational arithmetic and converted to float
at the end.
"""
from dataclasses import asdict, dataclass
from fractions import Fraction

from .errors import InvalidParameterError

__all__ = [
    "OracleReport",
    "expected_preranks",
    "prerank_variances",
    "rank_covariance",
    "faulhaber_power_sums",
    "band_depth_component_moments",
    "cross_rank_moments",
    "oracle_report",
]

MAX_M = 1000


def _check_m(m, lower=2):
    if int(m) != m or m < lower:
        raise InvalidParameterError(f"m must be an integer >= {lower}")
    return int(m)


def _check_d(d):
    if int(d) != d or d < 1:
        raise InvalidParameterError("d must be an integer >= 1")
    return int(d)


def _out(values, exact):
    return tuple(values) if exact else tuple(float(v) for v in values)


def faulhaber_power_sums(m: int, exact: bool = True):
    """``(sum i, sum i^2, sum i^3, sum i^4)`` for ``i = 1..m``."""
    m = _check_m(m, lower=1)
    if m > MAX_M:
        raise InvalidParameterError(f"m > {MAX_M} is not supported")
    s1 = m * (m + 1) // 2
    s2 = m * (m + 1) * (2 * m + 1) // 6
    s3 = m * m * (m + 1) * (m + 1) // 4
    s4 = m * (m + 1) * (2 * m + 1) * (3 * m * m + 3 * m - 1) // 30
    return _out((s1, s2, s3, s4), exact)


def expected_preranks(m: int, exact: bool = False):
    """Means ``(avg, bd)`` of the average and band-depth pre-ranks."""
    m = _check_m(m)
    avg = Fraction(m + 1, 2)
    bd = Fraction(m * m + 3 * m - 4, 6)
    return _out((avg, bd), exact)


def rank_covariance(m: int, exact: bool = False):
    """Covariance of the observation's ranks in two different components."""
    m = _check_m(m)
    value = Fraction((m - 1) ** 2, 12)
    return value if exact else float(value)


def prerank_variances(m: int, d: int, exact: bool = False):
    """Pre-rank variances ``(avg_member, avg_obs, bd_member, bd_obs)``.

    The band-depth member term is the published closed form
    ``(m + 1)(m - 1)(7m^2 + 8m + 12) / (60 d)``. It does not agree with the
    variance of ``(m + 1) R - R^2`` for ``R`` uniform on ``1..m``, which is
    ``(m^2 - 1)(m^2 - 4) / 180`` per component; see
    :func:`band_depth_component_moments` for the exact values.
    """
    m = _check_m(m)
    d = _check_d(d)
    avg_member = Fraction(m * m - 1, 12 * d)
    avg_obs = avg_member + Fraction((m - 1) ** 2 * (d - 1), 12 * d)
    bd_member = Fraction((m + 1) * (m - 1) * (7 * m * m + 8 * m + 12), 60 * d)
    bd_obs = bd_member + Fraction(
        (m ** 4 - 6 * m ** 3 + 13 * m ** 2 - 12 * m + 4) * (d - 1), 180 * d
    )
    return _out((avg_member, avg_obs, bd_member, bd_obs), exact)


def cross_rank_moments(m: int, exact: bool = False):
    """``E(R R')``, ``E(R R'^2)`` and ``E(R^2 R'^2)`` for two components of the observation."""
    m = _check_m(m)
    e11 = m + Fraction((m - 1) ** 2, 3)
    e12 = Fraction(3 * m ** 3 + 4 * m ** 2 + 3 * m + 2, 12)
    e22 = Fraction(6 * m ** 4 + 9 * m ** 3 + 8 * m ** 2 + 3 * m + 4, 30)
    return _out((e11, e12, e22), exact)


def band_depth_component_moments(m: int, exact: bool = False):
    """Variance and cross-component covariance of ``g(R) = (m + 1) R - R^2``.

    The variance is for a single uniform rank; the covariance is between the
    observation's two components and is assembled from
    :func:`cross_rank_moments`. The band-depth pre-rank variance over ``d``
    components is ``var / d + cov (d - 1) / d``.
    """
    m = _check_m(m)
    s1, s2, s3, s4 = faulhaber_power_sums(m)
    a = m + 1
    eg = Fraction(a * s1 - s2, m)
    eg2 = Fraction(a * a * s2 - 2 * a * s3 + s4, m)
    var = eg2 - eg * eg
    e11, e12, e22 = cross_rank_moments(m, exact=True)
    cov = a * a * e11 - 2 * a * e12 + e22 - eg * eg
    return _out((var, cov), exact)


@dataclass(frozen=True)
class OracleReport:
    m: int
    d: int
    expected_prerank_avg: float
    expected_prerank_bd: float
    var_avg_member: float
    var_avg_obs: float
    var_bd_member: float
    var_bd_obs: float
    rank_covariance: float

    def to_dict(self):
        return asdict(self)


def oracle_report(m: int, d: int) -> OracleReport:
    avg, bd = expected_preranks(m)
    va_m, va_o, vb_m, vb_o = prerank_variances(m, d)
    return OracleReport(int(m), int(d), avg, bd, va_m, va_o, vb_m, vb_o, rank_covariance(m))
