"""Acceptance checks, one function per numbered criterion.

Each check returns a :class:`CheckResult`; :func:`run_suite` groups them
into the named suites used by ``rankcal verify``.
"""
import math
import tempfile
import time
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

import numpy as np

from .core import RandomSource, chi_square_quantile, histogram_summary
from .errors import InvalidParameterError
from .mst import mst_length
from .oracle import band_depth_component_moments, prerank_variances, rank_covariance
from .postprocess import STRATEGIES, PostprocessConfig, SyntheticSpec, run_postprocessing, synthetic_series
from .prerank import PreRankMethod, band_depth_counts, compute_preranks_many, univariate_ranks
from .reference import modified_band_depth_bruteforce, mst_length_bruteforce
from .simulate import ScenarioConfig, pooled_member_rank_stats, run_scenario_multi, sample_appendix_sets

__all__ = ["CheckResult", "CHECKS", "SUITES", "run_suite"]

MV, BD, AVG, MST = PreRankMethod


@dataclass
class CheckResult:
    criterion: int
    name: str
    passed: bool
    detail: str
    values: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] criterion {self.criterion}: {self.name} ({self.seconds:.1f}s) {self.detail}"


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.seconds = time.perf_counter() - t0
        return res
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _chi(h):
    return histogram_summary(h).chi_square


# ------------------------------------------------------------------ criterion 1


@_timed
def check_uniformity(runs=100, n_cases=10000, seed=1000, time_limit=60.0):
    """iid Gaussian truth and forecasts: chi-square below the 0.999 quantile in >= 99% of runs."""
    q = chi_square_quantile(20)
    below = {m: 0 for m in PreRankMethod}
    worst = {m: 0.0 for m in PreRankMethod}
    t0 = time.perf_counter()
    for r in range(runs):
        cfg = ScenarioConfig.from_names("iid:0:1", "iid:0:1", 3, 20, n_cases, seed + r)
        res = run_scenario_multi(cfg, "all")
        for meth, h in res.histograms.items():
            c = _chi(h)
            below[meth] += c < q
            worst[meth] = max(worst[meth], c)
    elapsed = time.perf_counter() - t0
    need = math.ceil(0.99 * runs)
    ok = all(v >= need for v in below.values()) and elapsed < time_limit
    detail = ", ".join(f"{m.value} {below[m]}/{runs}" for m in PreRankMethod)
    return CheckResult(1, "uniformity under calibration", ok,
                       f"{detail}; {elapsed:.1f}s (limit {time_limit:.0f}s)",
                       {"below": {m.value: below[m] for m in below}, "quantile": q,
                        "max_chi_square": {m.value: worst[m] for m in worst}, "seconds": elapsed})


# -------------------------------------------------------------- criteria 2, 3

# observation / member cells, (m, method) -> value
TABLE1 = {(20, AVG): (10.5, 10.5), (20, BD): (10.7, 10.5),
          (100, AVG): (50.4, 50.6), (100, BD): (51.7, 50.6)}
# (m, method) -> (obs, obs tol, member, member tol)
TABLE2 = {(20, AVG): (37, 3, 33, 3), (20, BD): (37, 3, 33, 3),
          (100, AVG): (940, 60, 830, 55), (100, BD): (946, 60, 835, 55)}


@lru_cache(maxsize=4)
def _ar1_table_run(m, n_cases, seed):
    t0 = time.perf_counter()
    cfg = ScenarioConfig.from_names("ar1:2", "ar1:3", 5, m, n_cases, seed)
    res = run_scenario_multi(cfg, [AVG, BD])
    stats = {}
    for meth in (AVG, BD):
        s = histogram_summary(res.histograms[meth])
        mem_mean, mem_var = pooled_member_rank_stats(res.ranks[meth], m)
        stats[meth] = (s.mean_rank, s.rank_variance, mem_mean, mem_var)
    return stats, time.perf_counter() - t0


@_timed
def check_table_means(n_cases=30000, seed=2000, time_limit=120.0):
    """Observation and member mean ranks for AR(1) truth tau=3 vs forecasts tau=2, d=5."""
    ok, parts, values, total = True, [], {}, 0.0
    for m in (20, 100):
        stats, sec = _ar1_table_run(m, n_cases, seed)
        total += sec
        for meth in (AVG, BD):
            obs_t, mem_t = TABLE1[m, meth]
            obs, _, mem, _ = stats[meth]
            good = abs(obs - obs_t) <= 0.2 and abs(mem - mem_t) <= 0.2
            ok &= good
            parts.append(f"m={m} {meth.value}: obs {obs:.2f} ({obs_t}) mem {mem:.2f} ({mem_t})")
            values[f"{m}/{meth.value}"] = {"obs": obs, "member": mem}
    ok &= total < time_limit
    return CheckResult(2, "mean ranks, AR(1) tau 3 vs 2", ok, "; ".join(parts) + f"; {total:.1f}s",
                       values)


@_timed
def check_table_variances(n_cases=30000, seed=2000):
    """Observation and member rank variances for the same setting as the mean check."""
    ok, parts, values = True, [], {}
    for m in (20, 100):
        stats, _ = _ar1_table_run(m, n_cases, seed)
        for meth in (AVG, BD):
            obs_t, obs_tol, mem_t, mem_tol = TABLE2[m, meth]
            _, obs, _, mem = stats[meth]
            good = abs(obs - obs_t) <= obs_tol and abs(mem - mem_t) <= mem_tol
            ok &= good
            parts.append(f"m={m} {meth.value}: obs {obs:.1f} ({obs_t}) mem {mem:.1f} ({mem_t})")
            values[f"{m}/{meth.value}"] = {"obs": obs, "member": mem}
    return CheckResult(3, "rank variances, AR(1) tau 3 vs 2", ok, "; ".join(parts), values)


# ------------------------------------------------------------------ criterion 4


def appendix_moments(m=20, d=5, n_cases=30000, seed=4000):
    """Empirical pre-rank variances and observation rank covariance in the extreme regime."""
    S = sample_appendix_sets(m, d, np.arange(n_cases), seed)
    pre = compute_preranks_many(S, [AVG, BD])
    r, _ = univariate_ranks(S)
    obs_r = r[:, -1, :].astype(float)
    C = np.cov(obs_r, rowvar=False)
    cov = C[np.triu_indices(d, 1)].mean()
    return {
        "var_avg_member": float(pre[AVG][:, :-1].var()),
        "var_avg_obs": float(pre[AVG][:, -1].var()),
        "var_bd_member": float(pre[BD][:, :-1].var()),
        "var_bd_obs": float(pre[BD][:, -1].var()),
        "rank_covariance": float(cov),
    }


@_timed
def check_appendix(m=20, d=5, n_cases=30000, seed=4000, tol=0.05):
    """Monte Carlo pre-rank variances and rank covariance against the closed forms."""
    emp = appendix_moments(m, d, n_cases, seed)
    names = ("var_avg_member", "var_avg_obs", "var_bd_member", "var_bd_obs")
    target = dict(zip(names, prerank_variances(m, d)))
    target["rank_covariance"] = rank_covariance(m)
    var_g, cov_g = band_depth_component_moments(m)
    exact_bd = {"var_bd_member": var_g / d, "var_bd_obs": var_g / d + cov_g * (d - 1) / d}
    rel = {k: abs(emp[k] - target[k]) / abs(target[k]) for k in target}
    ok = all(v <= tol for v in rel.values())
    parts = [f"{k} {emp[k]:.4g} vs {target[k]:.6g} ({100 * rel[k]:.1f}%)" for k in target]
    failing = [k for k in target if rel[k] > tol]
    if failing:
        parts.append("exact band-depth values: " + ", ".join(
            f"{k} {v:.6g}" for k, v in exact_bd.items()))
    return CheckResult(4, "appendix regime moments", ok, "; ".join(parts),
                       {"empirical": emp, "target": target, "relative_error": rel,
                        "exact_band_depth": exact_bd})


# ------------------------------------------------------------------ criteria 5, 6


def _random_case(gen, max_m, max_d, ties):
    m = int(gen.integers(2, max_m + 1))
    d = int(gen.integers(1, max_d + 1))
    if ties:
        return gen.integers(0, 4, size=(m, d)).astype(float)
    return gen.standard_normal((m, d))


@_timed
def check_band_depth_bruteforce(n_cases=1000, seed=5000):
    """Closed-form band-depth counts against pair enumeration, with and without ties."""
    gen = RandomSource(seed, 0).generator()
    mismatch = fast_mismatch = tie_free = with_ties = 0
    for i in range(n_cases):
        S = _random_case(gen, 8, 4, ties=(i % 2 == 0))
        m, d = S.shape
        counts = band_depth_counts(S, tie_free=False)
        pairs = m * (m - 1) // 2
        closed = [Fraction(int(c), d * pairs) for c in counts]
        if closed != modified_band_depth_bruteforce(S):
            mismatch += 1
        has_ties = any(len(set(S[:, k])) < m for k in range(d))
        if has_ties:
            with_ties += 1
        else:
            tie_free += 1
            if not np.array_equal(band_depth_counts(S, tie_free=True), counts):
                fast_mismatch += 1
    ok = mismatch == 0 and fast_mismatch == 0
    return CheckResult(5, "band depth brute-force equivalence", ok,
                       f"{mismatch} mismatches over {n_cases} cases ({with_ties} with ties); "
                       f"tie-free shortcut mismatches {fast_mismatch}/{tie_free}",
                       {"mismatch": mismatch, "fast_mismatch": fast_mismatch,
                        "tie_free": tie_free, "with_ties": with_ties})


@_timed
def check_mst_bruteforce(n_cases=200, seed=6000, rtol=1e-12):
    """MST length against the minimum over all labelled spanning trees."""
    gen = RandomSource(seed, 0).generator()
    worst = 0.0
    for _ in range(n_cases):
        m = int(gen.integers(2, 7))
        d = int(gen.integers(1, 4))
        P = gen.standard_normal((m, d))
        a, b = mst_length(P), mst_length_bruteforce(P)
        worst = max(worst, abs(a - b) / max(abs(b), 1e-300))
    return CheckResult(6, "MST exhaustive oracle", worst <= rtol,
                       f"max relative error {worst:.3g} (tol {rtol:g})", {"max_rel": worst})


# ------------------------------------------------------------------ criterion 7


def _end_ratios(h):
    c = h.counts.astype(float)
    e = h.n_cases / h.m
    dec = max(1, h.m // 10)
    return c[0] / e, c[-1] / e, c[:dec].sum(), c[-dec:].sum()


@_timed
def check_shapes(n_cases=10000, seed=7000):
    """Under- and overdispersed iid forecasts: histogram shapes and multivariate identifiability."""
    ok, parts, values = True, [], {}
    for sigma in (0.5, 2.0):
        for d in (3, 5, 15):
            cfg = ScenarioConfig.from_names(f"iid:0:{sigma}", "iid:0:1", d, 20, n_cases, seed + d)
            res = run_scenario_multi(cfg, [MV, BD, AVG])
            lo, hi, _, _ = _end_ratios(res.histograms[AVG])
            _, _, bottom, top = _end_ratios(res.histograms[BD])
            if sigma < 1:
                good = lo > 2 and hi > 2 and bottom > 2 * top
            else:
                good = lo < 0.5 and hi < 0.5 and top > 2 * bottom
            mv_chi, bd_chi = _chi(res.histograms[MV]), _chi(res.histograms[BD])
            if d == 15:
                good &= mv_chi < bd_chi / 3
            ok &= bool(good)
            key = f"sigma={sigma} d={d}"
            values[key] = {"avg_first": lo, "avg_last": hi, "bd_bottom": int(bottom),
                           "bd_top": int(top), "mv_chi": mv_chi, "bd_chi": bd_chi}
            parts.append(f"{key}: avg ends {lo:.2f}/{hi:.2f}, bd deciles {bottom}/{top}"
                         + (f", mv/bd chi {mv_chi:.0f}/{bd_chi:.0f}" if d == 15 else "")
                         + ("" if good else " FAIL"))
    return CheckResult(7, "dispersion shape diagnostics", ok, "; ".join(parts), values)


# ------------------------------------------------------------------ criterion 8


@_timed
def check_method_ordering(n_cases=10000, seed=8000):
    """Correlation-model misspecification: which pre-rank detects it."""
    q = chi_square_quantile(20)
    chis = {}
    for name in ("corr-a", "corr-b"):
        cfg = ScenarioConfig.from_names("ar1:3", name, 15, 20, n_cases, seed)
        res = run_scenario_multi(cfg, "all")
        chis[name] = {m.value: _chi(h) for m, h in res.histograms.items()}
    a, b = chis["corr-a"], chis["corr-b"]
    ok_a = a["avg"] < q < a["mst"]
    ok_b = b["avg"] == max(b.values())
    fmt = lambda c: ", ".join(f"{k} {v:.1f}" for k, v in c.items())  # noqa: E731
    return CheckResult(8, "method sensitivity ordering", ok_a and ok_b,
                       f"model a: {fmt(a)} (q={q:.2f}); model b: {fmt(b)}",
                       {"corr-a": a, "corr-b": b, "quantile": q})


# ------------------------------------------------------------------ criterion 9


def _bins_within(h, z=4.0):
    p = 1.0 / h.m
    se = math.sqrt(h.n_cases * p * (1 - p))
    return bool(np.all(np.abs(h.counts - h.n_cases * p) <= z * se))


@lru_cache(maxsize=2)
def _postprocess_runs(seed, spec_seed):
    series = synthetic_series(SyntheticSpec(seed=spec_seed))
    return {s: run_postprocessing(series, PostprocessConfig(strategy=s), seed=seed)
            for s in STRATEGIES}


@_timed
def check_postprocess(seed=9000, spec_seed=9001):
    """Rolling bias correction and error dressing on the synthetic series."""
    runs = _postprocess_runs(seed, spec_seed)
    ind = runs["independent"]
    n_days = ind.days.size
    lo, hi, _, _ = _end_ratios(ind.multivariate[AVG])
    cup = lo > 1.5 and hi > 1.5
    chis = {s: {m.value: _chi(h) for m, h in r.multivariate.items()} for s, r in runs.items()}
    better = all(chis[s][k] < 0.5 * chis["independent"][k]
                 for s in ("ecc", "mvn") for k in ("avg", "bd"))
    uniform = {s: all(_bins_within(h) for h in r.univariate) for s, r in runs.items()}
    ok = n_days >= 823 and cup and better and all(uniform.values())
    detail = (f"{n_days} days; independent avg ends {lo:.2f}/{hi:.2f}; chi-square "
              + "; ".join(f"{s} avg {c['avg']:.0f} bd {c['bd']:.0f}" for s, c in chis.items())
              + "; univariate within 4 SE: "
              + ", ".join(f"{s} {'yes' if u else 'no'}" for s, u in uniform.items()))
    return CheckResult(9, "postprocessing pipeline", ok, detail,
                       {"days": int(n_days), "chi_square": chis, "univariate_ok": uniform,
                        "avg_end_ratios": (lo, hi)})


# ------------------------------------------------------------------ criterion 10


def determinism_commands(out_root):
    """CLI invocations (argument lists) exercised by the determinism check."""
    root = Path(out_root)
    return [
        ["simulate", "--scenario", "ar1:2", "--obs-scenario", "ar1:3", "--d", "5", "--m", "20",
         "--cases", "600", "--method", "all", "--seed", "11", "--svg", "--save-cases",
         "--chunk", "128", "--out", str(root / "simulate")],
        ["rank", "--in", str(root / "simulate" / "cases.csv"), "--method", "bd", "--seed", "11",
         "--out", str(root / "rank")],
        ["postprocess", "--synthetic", "days=140,d=6,members=20", "--window", "20",
         "--strategy", "ecc", "--methods", "all", "--seed", "5", "--svg",
         "--out", str(root / "postprocess")],
        ["oracle", "--m", "20", "--d", "5", "--out", str(root / "oracle")],
    ]


def _snapshot(directory):
    d = Path(directory)
    return {p.relative_to(d).as_posix(): p.read_bytes()
            for p in sorted(d.rglob("*")) if p.is_file() and p.name != "manifest.json"}


@_timed
def check_determinism(workdir=None):
    """Every command re-run from its manifest, with other worker counts, is byte-identical."""
    from . import cli

    with tempfile.TemporaryDirectory(dir=workdir) as tmp:
        tmp = Path(tmp)
        problems, checked = [], 0
        for args in determinism_commands(tmp / "first"):
            if cli.main(args) != 0:
                problems.append(f"{args[0]} failed")
                continue
            out = Path(args[args.index("--out") + 1])
            before = _snapshot(out)
            for workers in (1, 3):
                replay = tmp / f"replay-{args[0]}-{workers}"
                code = cli.main(["rerun", "--manifest", str(out / "manifest.json"),
                                 "--out", str(replay), "--workers", str(workers)])
                checked += 1
                if code != 0:
                    problems.append(f"rerun of {args[0]} failed")
                elif _snapshot(replay) != before:
                    problems.append(f"{args[0]} differs with {workers} workers")
    ok = not problems and checked > 0
    return CheckResult(10, "determinism from manifests", ok,
                       f"{checked} replays" + ("; " + "; ".join(problems) if problems else ", all identical"),
                       {"problems": problems})


CHECKS = {
    1: check_uniformity,
    2: check_table_means,
    3: check_table_variances,
    4: check_appendix,
    5: check_band_depth_bruteforce,
    6: check_mst_bruteforce,
    7: check_shapes,
    8: check_method_ordering,
    9: check_postprocess,
    10: check_determinism,
}

SUITES = {
    "figures": (1, 7, 8),
    "tables": (2, 3),
    "appendix": (4,),
    "bruteforce": (5, 6),
    "postprocess": (9,),
    "determinism": (10,),
    "all": tuple(range(1, 11)),
}


def run_suite(name, report=None):
    """Run the checks of suite ``name``; ``report`` is called with each result."""
    if name not in SUITES:
        raise InvalidParameterError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    results = []
    for number in SUITES[name]:
        res = CHECKS[number]()
        if report is not None:
            report(res)
        results.append(res)
    return results
