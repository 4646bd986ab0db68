import numpy as np
import pytest

from rankcal.core import RandomSource, chi_square_quantile, histogram_summary
from rankcal.errors import InsufficientPointsError, InvalidParameterError, NotPositiveDefiniteError
from rankcal.simulate import (
    CovarianceModel,
    ScenarioConfig,
    cholesky_with_jitter,
    covariance_matrix,
    parse_scenario,
    pooled_member_rank_stats,
    run_ranks,
    run_scenario,
    run_scenario_multi,
    sample_appendix_sets,
    sample_gaussian_case,
    sample_sets,
)


class TestCovariance:
    def test_ar1(self):
        C = covariance_matrix(CovarianceModel("ar1", 6, tau=3.0))
        assert C[0, 3] == pytest.approx(0.367879, abs=1e-6)
        assert np.all(np.diag(C) == 1)

    def test_truncated_linear(self):
        C = covariance_matrix(CovarianceModel("corr-c", 8))
        assert C[0, 5] == 0 and C[2, 2] == 1 and C[0, 7] == 0
        assert C[0, 1] == pytest.approx(0.8)

    def test_damped_cosine(self):
        C = covariance_matrix(CovarianceModel("corr-a", 4))
        assert C[0, 2] == pytest.approx(np.exp(-2 / 4.5) * 0.5, rel=1e-15)
        assert C[0, 2] == pytest.approx(0.32054, abs=1e-4)

    def test_long_range(self):
        C = covariance_matrix(CovarianceModel("long-range", 4))
        assert C[0, 3] == pytest.approx(1 / (1 + 3 / 2.5))

    def test_iid(self):
        np.testing.assert_array_equal(covariance_matrix(CovarianceModel("iid", 3, sigma=2.0)),
                                      4 * np.eye(3))

    @pytest.mark.parametrize("kwargs", [dict(kind="ar1", d=3, tau=0.0), dict(kind="ar1", d=3),
                                        dict(kind="ar1", d=3, tau=-1.0),
                                        dict(kind="nope", d=3), dict(kind="iid", d=0),
                                        dict(kind="iid", d=2, sigma=0.0)])
    def test_invalid(self, kwargs):
        with pytest.raises(InvalidParameterError):
            CovarianceModel(**kwargs)

    @pytest.mark.parametrize("kind", ["ar1", "damped-cosine", "long-range", "truncated-linear"])
    def test_factorizes_at_large_d(self, kind):
        model = CovarianceModel(kind, 200, tau=3.0 if kind == "ar1" else None)
        C = covariance_matrix(model)
        L = cholesky_with_jitter(C)
        np.testing.assert_allclose(L @ L.T, C, atol=1e-8)

    def test_jitter_and_failure(self):
        L = cholesky_with_jitter(np.ones((3, 3)))
        np.testing.assert_allclose(L @ L.T, np.ones((3, 3)), atol=1e-8)
        with pytest.raises(NotPositiveDefiniteError):
            cholesky_with_jitter([[1.0, 2.0], [2.0, 1.0]])


class TestScenarioParsing:
    def test_forms(self):
        s = parse_scenario("iid:1.5:0.5", 4)
        assert s.mean == 1.5 and s.model.sigma == 0.5 and s.d == 4
        assert parse_scenario("ar1:2", 3).model.tau == 2.0
        assert parse_scenario("corr-b", 3).model.kind == "long-range"

    @pytest.mark.parametrize("name", ["iid:0", "ar1", "ar1:x", "corr-d", "corr-a:1", "gauss"])
    def test_invalid(self, name):
        with pytest.raises(InvalidParameterError):
            parse_scenario(name, 3)

    def test_config_validation(self):
        with pytest.raises(InvalidParameterError):
            ScenarioConfig.from_names("iid:0:1", "iid:0:1", 3, 1, 10)
        with pytest.raises(InvalidParameterError):
            ScenarioConfig.from_names("iid:0:1", "iid:0:1", 3, 5, 0)


class TestSampling:
    def test_draw_order(self):
        cfg = ScenarioConfig.from_names("iid:0:2", "iid:1:1", 3, 5, 10, seed=4)
        z = RandomSource(4, 7).normals((5, 3))
        S = sample_sets(cfg, [7])[0]
        np.testing.assert_allclose(S[-1], 1 + z[0])
        np.testing.assert_allclose(S[:-1], 2 * z[1:])

    def test_single_case_matches_batch(self):
        cfg = ScenarioConfig.from_names("ar1:2", "ar1:3", 5, 6, 10, seed=1)
        batch = sample_sets(cfg, np.arange(10))
        for k in (0, 3, 9):
            case = sample_gaussian_case(cfg, k)
            np.testing.assert_array_equal(case.ensemble_set(), batch[k])
            assert case.case_id == k

    def test_marginals(self):
        cfg = ScenarioConfig.from_names("iid:0.5:2", "iid:0:1", 4, 20, 10000, seed=2)
        M = sample_sets(cfg, np.arange(10000))[:, :-1, :].reshape(-1, 4)
        n = M.shape[0]
        assert np.all(np.abs(M.mean(axis=0) - 0.5) < 3 * 2 / np.sqrt(n))
        # var of sample variance for normal data: 2 sigma^4 / n
        assert np.all(np.abs(M.var(axis=0) - 4) < 3 * np.sqrt(2 * 16 / n))

    def test_ar1_lag_correlation(self):
        tau = 3.0
        cfg = ScenarioConfig.from_names(f"ar1:{tau}", "iid:0:1", 6, 20, 10000, seed=3)
        M = sample_sets(cfg, np.arange(10000))[:, :-1, :]
        a, b = M[..., :-1].ravel(), M[..., 1:].ravel()
        assert abs(np.corrcoef(a, b)[0, 1] - np.exp(-1 / tau)) < 0.02

    def test_appendix_sets(self):
        S = sample_appendix_sets(8, 4, np.arange(50), seed=1)
        assert np.all(S[:, -1, :] == S[:, -1, :1])
        assert S.shape == (50, 8, 4)
        assert np.all(np.std(S[:, :-1, :], axis=-1) > 0)


class TestDriver:
    def test_independent_of_chunks_and_workers(self):
        cfg = ScenarioConfig.from_names("ar1:2", "ar1:3", 4, 10, 900, seed=5)
        a = run_scenario_multi(cfg, "all", chunk=900)
        b = run_scenario_multi(cfg, "all", chunk=97, workers=3)
        for meth in a.ranks:
            np.testing.assert_array_equal(a.ranks[meth], b.ranks[meth])

    def test_calibrated_mean_rank(self):
        cfg = ScenarioConfig.from_names("iid:0:1", "iid:0:1", 3, 20, 10000, seed=6)
        h = run_scenario(cfg, "avg")
        assert abs(h.summary().mean_rank - 10.5) <= 0.2

    def test_underdispersed_cup(self):
        cfg = ScenarioConfig.from_names("iid:0:0.5", "iid:0:1", 3, 20, 10000, seed=7)
        h = run_scenario(cfg, "avg")
        assert h.counts[0] > 2 * 500 and h.counts[-1] > 2 * 500

    def test_too_much_dependence_cap(self):
        cfg = ScenarioConfig.from_names("ar1:4", "ar1:3", 5, 20, 10000, seed=8)
        h = run_scenario(cfg, "avg")
        assert h.counts[7:13].mean() > h.n_cases / 20
        assert h.counts[[0, -1]].mean() < h.n_cases / 20

    def test_univariate_non_detection(self):
        cfg = ScenarioConfig.from_names("ar1:2", "ar1:3", 5, 20, 10000, seed=9)
        for k in (0, 2, 4):
            res = run_ranks(lambda idx: sample_sets(cfg, idx)[..., k:k + 1], 20, 10000,
                            ["avg"], cfg.seed)
            assert histogram_summary(res.histograms["avg"]).chi_square < chi_square_quantile(20)

    def test_errors_carry_case_range(self):
        cfg = ScenarioConfig.from_names("iid:0:1", "iid:0:1", 2, 2, 10)
        with pytest.raises(InsufficientPointsError, match="cases 0..9"):
            run_scenario(cfg, "mst")

    def test_pooled_member_stats_exact(self, gen):
        m, n = 7, 500
        perms = np.array([gen.permutation(m) + 1 for _ in range(n)])
        mean, var = pooled_member_rank_stats(perms[:, -1], m)
        members = perms[:, :-1].ravel()
        assert mean == pytest.approx(members.mean(), rel=1e-12)
        assert var == pytest.approx(members.var(), rel=1e-12)
