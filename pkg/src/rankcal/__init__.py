"""Rank histograms for assessing the calibration of multivariate ensemble forecasts."""
from ._accel import backend
from .core import (
    ForecastCase,
    HistogramSummary,
    RandomSource,
    RankHistogram,
    accumulate_histogram,
    chi_square_quantile,
    histogram_summary,
    observation_ranks,
    rank_of_observation,
)
from .errors import (
    DataError,
    EmptyHistogramError,
    InsufficientHistoryError,
    InsufficientPointsError,
    InvalidInputError,
    InvalidParameterError,
    NotPositiveDefiniteError,
    ParseError,
    RankcalError,
    UsageError,
)
from .mst import DistanceCache, mst_length, mst_length_all_removals
from .oracle import OracleReport, oracle_report
from .prerank import (
    PreRankMethod,
    compute_preranks,
    prerank_average,
    prerank_band_depth,
    prerank_mst,
    prerank_multivariate,
)
from .simulate import CovarianceModel, ScenarioConfig, run_scenario, run_scenario_multi

__version__ = "0.1.0"
