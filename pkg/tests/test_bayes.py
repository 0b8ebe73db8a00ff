import numpy as np
import pytest

from src.config import GeometryConfig
from src.errors import EstimationError, NumericalError
from src.estimation.bayes import (
    DiagonalPrior,
    Measurement,
    NoiseModel,
    bayesian_crlb_diag,
    bayesian_fim,
    factor_innovation,
    matched_filter,
    mmse_estimate,
    posterior_covariance,
    posterior_covariance_diag,
    restricted_mmse,
    trace_over_bins,
)
from src.spectrum.grid import (
    FrequencyGrid,
    RangeGrid,
    SensingMatrix,
    SpectrumSupport,
    build_sensing_matrix,
)
from tests.helpers import random_sensing


def complex_normal(rng: np.random.Generator, shape, variance) -> np.ndarray:
    scale = np.sqrt(np.asarray(variance) / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


class TestPriorAndNoise:
    @pytest.mark.parametrize("variances", [[], [1.0, 0.0], [1.0, np.inf], [-1.0]])
    def test_invalid_prior(self, variances):
        with pytest.raises(EstimationError):
            DiagonalPrior(variances=np.asarray(variances, dtype=float))

    def test_prior_is_read_only(self):
        prior = DiagonalPrior.uniform(3, 2.0)
        with pytest.raises(ValueError):
            prior.variances[0] = 5.0

    def test_invalid_noise(self):
        with pytest.raises(EstimationError):
            NoiseModel(variance=0.0)


class TestMmse:
    def test_scalar(self):
        h = SensingMatrix.from_array(np.ones((1, 1)))
        posterior = mmse_estimate(
            h, DiagonalPrior.uniform(1, 1.0), NoiseModel(variance=1.0), Measurement(values=[2.0])
        )
        assert posterior.estimate[0] == pytest.approx(1.0)
        assert posterior.error_variance_diag[0] == pytest.approx(0.5)
        assert posterior.trace_over_m == pytest.approx(0.5)

    def test_zero_measurement(self, rng):
        h = random_sensing(rng, 5, 7)
        prior = DiagonalPrior(variances=rng.uniform(0.5, 2.0, size=7))
        noise = NoiseModel(variance=0.3)
        posterior = mmse_estimate(h, prior, noise, Measurement(values=np.zeros(5)))
        np.testing.assert_array_equal(posterior.estimate, np.zeros(7))
        np.testing.assert_allclose(
            posterior.error_variance_diag,
            bayesian_crlb_diag(h, prior, noise, method="information"),
            rtol=1e-10,
        )

    def test_orthonormal_columns(self, dft_matrix):
        diag = posterior_covariance_diag(
            dft_matrix, DiagonalPrior.uniform(8, 2.0), NoiseModel(variance=0.5)
        )
        np.testing.assert_allclose(diag, 0.4, rtol=1e-12)

    def test_single_bin(self):
        h = SensingMatrix.from_array(np.full((4, 1), 0.5))
        diag = posterior_covariance_diag(h, DiagonalPrior.uniform(1, 3.0), NoiseModel(variance=2.0))
        assert diag[0] == pytest.approx(1.2)

    def test_zero_matrix_returns_prior(self):
        prior = DiagonalPrior(variances=np.array([1.0, 2.0, 3.0, 4.0]))
        h = SensingMatrix.from_array(np.zeros((3, 4)))
        np.testing.assert_allclose(
            posterior_covariance_diag(h, prior, NoiseModel(variance=1.0)), prior.variances
        )

    def test_vague_prior_tends_to_least_squares(self, rng):
        raw = np.eye(6) + 0.3 * (rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6)))
        h = SensingMatrix.from_array(raw / np.linalg.norm(raw, axis=0))
        noise = NoiseModel(variance=1e4)
        diag = posterior_covariance_diag(h, DiagonalPrior.uniform(6, 1e12), noise)
        expected = noise.variance * np.real(np.diag(np.linalg.inv(h.gram())))
        np.testing.assert_allclose(diag, expected, rtol=1e-4)

    def test_linear_in_measurement(self, rng):
        h = random_sensing(rng, 6, 9)
        prior = DiagonalPrior.uniform(9, 4.0)
        noise = NoiseModel(variance=0.2)
        v1, v2 = complex_normal(rng, 6, 1.0), complex_normal(rng, 6, 1.0)
        combined = mmse_estimate(h, prior, noise, Measurement(values=v1 + 2.0 * v2)).estimate
        separate = (
            mmse_estimate(h, prior, noise, Measurement(values=v1)).estimate
            + 2.0 * mmse_estimate(h, prior, noise, Measurement(values=v2)).estimate
        )
        np.testing.assert_allclose(combined, separate, rtol=1e-10, atol=1e-12)

    def test_posterior_never_exceeds_prior(self, rng):
        h = random_sensing(rng, 10, 14)
        prior = DiagonalPrior(variances=rng.uniform(0.1, 10.0, size=14))
        diag = posterior_covariance_diag(h, prior, NoiseModel(variance=0.05))
        assert np.all(diag >= 0.0)
        assert np.all(diag <= prior.variances)


class TestRestrictedMmse:
    def test_matches_mmse_on_the_support_columns(self, rng):
        h = random_sensing(rng, 8, 12)
        prior = DiagonalPrior(variances=rng.uniform(0.5, 4.0, size=12))
        noise = NoiseModel(variance=0.1)
        v = Measurement(values=complex_normal(rng, 8, 1.0))
        indices = np.array([7, 2, 10])
        estimate = restricted_mmse(h, prior, noise, v, indices)

        sub = SensingMatrix.from_array(h.entries[:, indices])
        expected = mmse_estimate(sub, DiagonalPrior(variances=prior.variances[indices]), noise, v)
        np.testing.assert_allclose(estimate[indices], expected.estimate, rtol=1e-9)
        assert np.count_nonzero(np.delete(estimate, indices)) == 0

    def test_empty_support(self, dft_matrix):
        estimate = restricted_mmse(
            dft_matrix,
            DiagonalPrior.uniform(8, 1.0),
            NoiseModel(variance=1.0),
            Measurement(values=np.ones(8)),
            np.array([], dtype=np.int64),
        )
        np.testing.assert_array_equal(estimate, np.zeros(8))

    def test_noise_free_support_is_exact(self, dft_matrix):
        gamma = np.zeros(8, dtype=complex)
        gamma[[1, 6]] = [3.0, -2.0j]
        v = Measurement(values=dft_matrix.entries @ gamma)
        prior = DiagonalPrior.uniform(8, 10.0)
        noise = NoiseModel(variance=1e-12)
        estimate = restricted_mmse(dft_matrix, prior, noise, v, np.array([1, 6]))
        np.testing.assert_allclose(estimate, gamma, atol=1e-9)


class TestCovarianceForms:
    def test_gain_and_information_forms_agree(self, rng):
        for _ in range(100):
            k, m = (int(x) for x in rng.integers(1, 33, size=2))
            h = random_sensing(rng, k, m)
            prior = DiagonalPrior(variances=rng.uniform(0.5, 2.0, size=m))
            noise = NoiseModel(variance=0.5)
            gain = posterior_covariance(h, prior, noise, form="gain")
            information = posterior_covariance(h, prior, noise, form="information")
            scale = np.max(np.abs(information))
            np.testing.assert_allclose(gain, information, rtol=1e-10, atol=1e-10 * scale)

    def test_crlb_is_posterior_diagonal(self, rng):
        h = random_sensing(rng, 5, 9)
        prior = DiagonalPrior.uniform(9, 3.0)
        noise = NoiseModel(variance=0.7)
        np.testing.assert_allclose(
            bayesian_crlb_diag(h, prior, noise),
            posterior_covariance_diag(h, prior, noise),
            rtol=1e-10,
        )
        np.testing.assert_allclose(
            bayesian_crlb_diag(h, prior, noise, method="gain"),
            bayesian_crlb_diag(h, prior, noise, method="information"),
            rtol=1e-10,
        )

    def test_fim_is_hermitian(self, rng):
        h = random_sensing(rng, 4, 6)
        j = bayesian_fim(h, DiagonalPrior.uniform(6, 2.0), NoiseModel(variance=0.5))
        np.testing.assert_allclose(j, j.conj().T)
        np.testing.assert_allclose(np.real(np.diag(j)), 1.0 / 0.5 + 1.0 / 2.0)

    def test_reference_form_refuses_large_problems(self, rng):
        h = random_sensing(rng, 2, 300)
        with pytest.raises(EstimationError, match="limited"):
            posterior_covariance(
                h, DiagonalPrior.uniform(300, 1.0), NoiseModel(variance=1.0), form="information"
            )


class TestFailures:
    def test_condition_cap(self, rng):
        h = random_sensing(rng, 5, 9)
        with pytest.raises(NumericalError, match="ill-conditioned"):
            factor_innovation(
                h, DiagonalPrior.uniform(9, 1.0), NoiseModel(variance=1.0), condition_cap=1.5
            )

    def test_no_rows(self):
        h = SensingMatrix.from_array(np.zeros((0, 4)))
        with pytest.raises(EstimationError, match="K = 0"):
            posterior_covariance_diag(h, DiagonalPrior.uniform(4, 1.0), NoiseModel(variance=1.0))

    def test_prior_size_mismatch(self, dft_matrix):
        with pytest.raises(EstimationError, match="bins"):
            posterior_covariance_diag(
                dft_matrix, DiagonalPrior.uniform(5, 1.0), NoiseModel(variance=1.0)
            )

    def test_measurement_size_mismatch(self, dft_matrix):
        with pytest.raises(EstimationError, match="samples"):
            mmse_estimate(
                dft_matrix,
                DiagonalPrior.uniform(8, 1.0),
                NoiseModel(variance=1.0),
                Measurement(values=np.ones(3)),
            )
        with pytest.raises(EstimationError):
            matched_filter(dft_matrix, Measurement(values=np.ones(3)))


class TestMatchedFilter:
    def test_unitary_inverts(self, dft_matrix, rng):
        gamma = complex_normal(rng, 8, 1.0)
        v = Measurement(values=dft_matrix.entries @ gamma)
        np.testing.assert_allclose(matched_filter(dft_matrix, v), gamma, atol=1e-12)

    def test_aliased_bins_leak(self):
        grid = FrequencyGrid(line_count=16, line_spacing=1.0)
        ranges = RangeGrid(bin_count=16, timewidth=15 / 16)
        even = SpectrumSupport(n=16, preserved=tuple(range(0, 16, 2)))
        h = build_sensing_matrix(even, grid, ranges)
        gamma = np.zeros(16, dtype=complex)
        gamma[2], gamma[10] = 10.0, 1.0
        mf = matched_filter(h, Measurement(values=h.entries @ gamma))
        assert abs(mf[10]) == pytest.approx(abs(mf[2]))
        assert abs(mf[10]) > 10.0 * abs(gamma[10])


class TestBoundAttainment:
    def test_per_bin_mse_matches_crlb(self, rng):
        trials = 8000
        h = random_sensing(rng, 6, 8)
        prior = DiagonalPrior.uniform(8, 2.0)
        noise = NoiseModel(variance=0.5)
        gamma = complex_normal(rng, (8, trials), 2.0)
        v = h.entries @ gamma + complex_normal(rng, (6, trials), 0.5)
        factor = factor_innovation(h, prior, noise)
        estimate = prior.variances[:, np.newaxis] * (h.entries.conj().T @ factor.solve(v))
        empirical = np.mean(np.abs(gamma - estimate) ** 2, axis=1)
        np.testing.assert_allclose(empirical, bayesian_crlb_diag(h, prior, noise), rtol=0.05)

    def test_desk_trace_matches_crlb_trace(self, rng):
        trials = 500
        geometry = GeometryConfig()
        grid, ranges = geometry.frequency_grid(), geometry.range_grid()
        h = build_sensing_matrix(SpectrumSupport.full(grid.line_count), grid, ranges)
        m = ranges.bin_count
        prior = DiagonalPrior.uniform(m, 5e3)
        noise = NoiseModel(variance=1.0)
        gamma = complex_normal(rng, (m, trials), 5e3)
        v = h.entries @ gamma + complex_normal(rng, (h.row_count, trials), 1.0)
        factor = factor_innovation(h, prior, noise)
        estimate = prior.variances[:, np.newaxis] * (h.entries.conj().T @ factor.solve(v))
        empirical = float(np.mean(np.abs(gamma - estimate) ** 2))
        bound = trace_over_bins(bayesian_crlb_diag(h, prior, noise))
        assert empirical == pytest.approx(bound, rel=0.03)
