import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import robusttrack as rt

from conftest import MU5, SIGMA5, WEIGHTS5


class TestGaussianSampling:
    def test_mean_law_of_large_numbers(self, gaussian5):
        n = 100_000
        x = rt.sample_gaussian(gaussian5, n, seed=3)
        assert np.all(np.abs(x.mean(axis=0) - MU5) < 4.0 / np.sqrt(n))

    def test_covariance_entry(self, gaussian5):
        n = 1_000_000
        x = rt.sample_gaussian(gaussian5, n, seed=5)
        var0 = x[:, 0].var(ddof=1)
        se = np.sqrt(2.0 / (n - 1)) * 0.0020   # sampling std of a Gaussian variance
        assert abs(var0 - 0.0020) < 3 * se

    def test_deterministic_per_seed(self, gaussian5):
        a = rt.sample_gaussian(gaussian5, 1000, seed=42)
        b = rt.sample_gaussian(gaussian5, 1000, seed=42)
        assert np.array_equal(a, b)
        c = rt.sample_gaussian(gaussian5, 1000, seed=43)
        assert not np.array_equal(a, c)

    def test_deterministic_across_chunk_boundary(self, gaussian5):
        n = 300_000   # spans two sampling chunks
        a = rt.sample_gaussian(gaussian5, n, seed=9)
        b = rt.sample_gaussian(gaussian5, n, seed=9)
        assert np.array_equal(a, b)

    def test_non_pd_covariance_rejected(self):
        bad = np.array([[1.0, 2.0], [2.0, 1.0]])   # indefinite
        with pytest.raises(ValueError, match="positive definite"):
            rt.NominalModel.gaussian(np.zeros(2), bad)

    def test_requires_gaussian_kind(self):
        t = rt.NominalModel.student_t(np.zeros(2), np.eye(2), 5.0)
        with pytest.raises(ValueError):
            rt.sample_gaussian(t, 10, seed=0)


class TestStudentTSampling:
    def test_large_dof_matches_gaussian_moments(self):
        model = rt.NominalModel.student_t(np.zeros(3), np.eye(3), dof=1e6)
        n = 200_000
        x = rt.sample_student_t(model, n, seed=1)
        assert np.all(np.abs(x.mean(axis=0)) < 4.0 / np.sqrt(n))
        assert np.all(np.abs(x.var(axis=0, ddof=1) - 1.0) < 0.02)

    def test_variance_scaling(self):
        # componentwise variance is dof/(dof-2) = 1.25 at dof=10
        model = rt.NominalModel.student_t(np.zeros(2), np.eye(2), dof=10.0)
        n = 400_000
        x = rt.sample_student_t(model, n, seed=2)
        se = 1.25 * np.sqrt(2.0 / n) * 2.0   # t variance estimate is noisier
        assert np.all(np.abs(x.var(axis=0, ddof=1) - 1.25) < 3 * se)

    def test_deterministic_per_seed(self):
        model = rt.NominalModel.student_t(MU5, SIGMA5, dof=8.0)
        a = rt.sample_student_t(model, 777, seed=6)
        b = rt.sample_student_t(model, 777, seed=6)
        assert np.array_equal(a, b)

    def test_covariance_property(self):
        model = rt.NominalModel.student_t(np.zeros(2), np.eye(2), dof=10.0)
        assert np.allclose(model.covariance, 1.25 * np.eye(2))
        shallow = rt.NominalModel.student_t(np.zeros(2), np.eye(2), dof=2.0)
        with pytest.raises(ValueError, match="dof > 2"):
            shallow.covariance


class TestSynthesizeIndex:
    def test_single_asset_identity(self):
        r = np.array([[0.02], [-0.01]])
        comp = rt.IndexComposition(np.array([1.0]))
        assert np.allclose(rt.synthesize_index(r, comp), [0.02, -0.01])

    def test_uniform_two_assets(self):
        comp = rt.IndexComposition(np.array([0.5, 0.5]))
        out = rt.synthesize_index(np.array([[0.02, 0.04]]), comp)
        assert np.allclose(out, [0.03])

    def test_benchmark_expected_index_return(self, composition5):
        # independent dot-product check of the benchmark market's index mean
        expected = sum(w * m for w, m in zip(WEIGHTS5, MU5))
        assert abs(expected - 0.0027) < 1e-12
        out = rt.synthesize_index(MU5[None, :], composition5)
        assert abs(out[0] - expected) < 1e-15

    def test_dimension_mismatch(self, composition5):
        with pytest.raises(ValueError):
            rt.synthesize_index(np.zeros((3, 4)), composition5)

    @given(st.integers(0, 2**31 - 1), st.floats(-2, 2), st.floats(-2, 2))
    def test_linearity(self, seed, a, b):
        rng = np.random.default_rng(seed)
        r1 = rng.normal(size=(6, 3))
        r2 = rng.normal(size=(6, 3))
        comp = rt.IndexComposition(np.array([0.2, 0.3, 0.5]))
        lhs = rt.synthesize_index(a * r1 + b * r2, comp)
        rhs = a * rt.synthesize_index(r1, comp) + b * rt.synthesize_index(r2, comp)
        assert np.allclose(lhs, rhs, atol=1e-9)


class TestScenariosFrom:
    def test_zero_returns(self):
        scen = rt.scenarios_from(np.zeros((2, 2)), np.zeros(2))
        assert np.all(scen.R == 1.0) and np.all(scen.B == 1.0)

    def test_gross_conversion(self):
        scen = rt.scenarios_from(np.array([[0.01]]), np.array([0.02]))
        assert np.allclose(scen.R, [[1.01]]) and np.allclose(scen.B, [1.02])

    def test_source_tag(self):
        scen = rt.scenarios_from(np.zeros((2, 1)), np.zeros(2), source="historical-window")
        assert scen.source == "historical-window"
        with pytest.raises(ValueError):
            rt.scenarios_from(np.zeros((2, 1)), np.zeros(2), source="other")

    def test_rejects_nan(self):
        with pytest.raises(rt.DataError):
            rt.scenarios_from(np.array([[np.nan]]), np.array([0.0]))
        with pytest.raises(rt.DataError):
            rt.scenarios_from(np.array([[0.0]]), np.array([np.inf]))

    def test_arrays_are_read_only(self):
        scen = rt.scenarios_from(np.zeros((2, 1)), np.zeros(2))
        with pytest.raises(ValueError):
            scen.R[0, 0] = 5.0


class TestLoadPricesCsv:
    def _write(self, tmp_path, text, name="prices.csv"):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path

    def test_two_prices_one_return(self, tmp_path):
        loaded = rt.load_prices_csv(self._write(tmp_path, "100\n101\n"))
        assert np.allclose(loaded.returns, [[0.01]])

    def test_constant_prices(self, tmp_path):
        loaded = rt.load_prices_csv(self._write(tmp_path, "100\n100\n100\n"))
        assert np.allclose(loaded.returns, np.zeros((2, 1)))

    def test_291_rows_gives_290_returns(self, tmp_path):
        prices = np.linspace(50.0, 80.0, 291)
        text = "\n".join(f"{float(p)!r},{float(p) * 2!r}" for p in prices) + "\n"
        loaded = rt.load_prices_csv(self._write(tmp_path, text))
        assert loaded.returns.shape == (290, 2)

    def test_header_row(self, tmp_path):
        loaded = rt.load_prices_csv(self._write(tmp_path, "idx,a\n100,50\n110,55\n"))
        assert loaded.columns == ["idx", "a"]
        assert np.allclose(loaded.returns, [[0.1, 0.1]])

    @pytest.mark.parametrize("text,match", [
        ("100,abc\n101,1\n", "non-numeric"),
        ("100\n", "at least 2"),
        ("100,2\n101\n", "ragged"),
        ("100\n-5\n", "strictly positive"),
    ])
    def test_rejects_bad_input(self, tmp_path, text, match):
        with pytest.raises(rt.DataError, match=match):
            rt.load_prices_csv(self._write(tmp_path, text))

    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(4)
        prices = 100.0 * np.cumprod(1 + 0.02 * rng.standard_normal((40, 3)), axis=0)
        text = "\n".join(",".join(repr(float(v)) for v in row) for row in prices) + "\n"
        loaded = rt.load_prices_csv(self._write(tmp_path, text))
        rebuilt = loaded.first_prices * np.cumprod(1 + loaded.returns, axis=0)
        assert np.all(np.abs(rebuilt / prices[1:] - 1.0) < 1e-9)


class TestTypes:
    def test_composition_must_sum_to_one(self):
        with pytest.raises(ValueError, match="sum to 1"):
            rt.IndexComposition(np.array([0.5, 0.6]))
        with pytest.raises(ValueError, match="non-negative"):
            rt.IndexComposition(np.array([1.5, -0.5]))

    def test_perturbation_scales_mean(self, gaussian5):
        scaled = rt.PerturbationSpec(k=-2.0).apply(gaussian5)
        assert np.allclose(scaled.mean, -2.0 * MU5)
        assert np.allclose(scaled.scale, SIGMA5)

    def test_scenario_shape_validation(self):
        with pytest.raises(ValueError):
            rt.ScenarioSet(R=np.ones((3, 2)), B=np.ones(4))
