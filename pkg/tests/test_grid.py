import itertools

import numpy as np
import pytest

from src.config import GeometryConfig
from src.errors import SpectrumError
from src.spectrum.grid import (
    FrequencyGrid,
    RangeGrid,
    SensingMatrix,
    SpectrumSupport,
    build_sensing_matrix,
    compute_coarray,
    gram_offdiag_stats,
)


class TestGeometry:
    def test_desk_defaults(self):
        geometry = GeometryConfig()
        assert geometry.frequency_grid().line_count == 800
        assert geometry.range_grid().bin_count == 101

    def test_paper_scale(self):
        geometry = GeometryConfig(bandwidth=20e3, timewidth=10e-3, oversampling_factor=10)
        grid = geometry.frequency_grid()
        assert grid.line_count == 4000
        assert grid.nyquist_count == 400
        assert grid.line_spacing == pytest.approx(10.0)
        assert grid.bandwidth == pytest.approx(40e3)
        assert geometry.range_grid().bin_count == 401

    def test_delays_span_timewidth(self):
        ranges = RangeGrid.from_geometry(20e3, 2.5e-3)
        assert ranges.delays[0] == 0.0
        assert ranges.delays[-1] == pytest.approx(2.5e-3)
        assert ranges.bin_spacing == pytest.approx(1.0 / 40e3)

    def test_single_bin(self):
        assert RangeGrid(bin_count=1, timewidth=0.0).bin_spacing == 0.0

    def test_no_nyquist_samples(self):
        with pytest.raises(SpectrumError):
            FrequencyGrid.from_geometry(10.0, 1e-3, 4)


class TestSpectrumSupport:
    def test_mask_round_trip(self):
        support = SpectrumSupport.from_mask([1, 0, 1, 1, 0])
        assert support.preserved == (0, 2, 3)
        assert support.mask.tolist() == [1, 0, 1, 1, 0]

    def test_rejects_non_binary_mask(self):
        with pytest.raises(SpectrumError):
            SpectrumSupport.from_mask([1, 2, 0])

    @pytest.mark.parametrize("preserved", [(2, 1), (0, 0), (0, 5)])
    def test_rejects_bad_indices(self, preserved):
        with pytest.raises(ValueError):
            SpectrumSupport(n=5, preserved=preserved)

    def test_without(self):
        support = SpectrumSupport.full(6).without(range(2, 4))
        assert support.preserved == (0, 1, 4, 5)
        with pytest.raises(SpectrumError):
            support.without([2])

    def test_serialized_form(self):
        assert SpectrumSupport(n=4, preserved=(1, 3)).model_dump() == {
            "n": 4,
            "preserved": (1, 3),
        }


class TestSensingMatrix:
    def test_single_line_is_all_ones(self, dft_geometry):
        grid, ranges = dft_geometry
        h = build_sensing_matrix(SpectrumSupport(n=8, preserved=(0,)), grid, ranges)
        np.testing.assert_allclose(h.entries, np.ones((1, 8)))

    def test_full_dft_is_unitary(self, dft_matrix):
        np.testing.assert_allclose(dft_matrix.gram(), np.eye(8), atol=1e-12)

    def test_full_band_from_geometry_is_orthonormal(self):
        geometry = GeometryConfig()
        grid, ranges = geometry.frequency_grid(), geometry.range_grid()
        h = build_sensing_matrix(SpectrumSupport.full(grid.line_count), grid, ranges)
        np.testing.assert_allclose(h.gram(), np.eye(ranges.bin_count), atol=1e-10)
        assert np.linalg.matrix_rank(h.entries) == ranges.bin_count

    def test_unit_columns(self, rng):
        geometry = GeometryConfig()
        grid, ranges = geometry.frequency_grid(), geometry.range_grid()
        mask = (rng.random(grid.line_count) < 0.4).astype(int)
        h = build_sensing_matrix(SpectrumSupport.from_mask(mask), grid, ranges)
        assert h.normalized
        assert h.row_count == int(mask.sum())
        np.testing.assert_allclose(np.linalg.norm(h.entries, axis=0), 1.0, atol=1e-12)

    def test_empty_spectrum(self, dft_geometry):
        grid, ranges = dft_geometry
        with pytest.raises(SpectrumError, match="empty spectrum"):
            build_sensing_matrix(SpectrumSupport(n=8), grid, ranges)

    def test_grid_mismatch(self, dft_geometry):
        grid, ranges = dft_geometry
        with pytest.raises(SpectrumError):
            build_sensing_matrix(SpectrumSupport.full(9), grid, ranges)

    def test_memory_budget(self, dft_geometry):
        grid, ranges = dft_geometry
        with pytest.raises(SpectrumError, match="budget"):
            build_sensing_matrix(SpectrumSupport.full(8), grid, ranges, memory_budget=64)

    def test_from_array_detects_normalization(self):
        assert SensingMatrix.from_array(np.eye(3)).normalized
        assert not SensingMatrix.from_array(2.0 * np.eye(3)).normalized


def brute_force_coarray(preserved: tuple[int, ...], n: int) -> list[int]:
    counts = [0] * n
    for a, b in itertools.product(preserved, repeat=2):
        if b >= a:
            counts[b - a] += 1
    return counts


class TestCoarray:
    def test_full_support(self):
        assert compute_coarray(SpectrumSupport.full(5)).values.tolist() == [5, 4, 3, 2, 1]

    def test_single_line(self):
        coarray = compute_coarray(SpectrumSupport(n=4, preserved=(2,)))
        assert coarray.values.tolist() == [1, 0, 0, 0]
        assert coarray.span == 0
        assert coarray.holes_within_span == ()

    def test_sparse_example(self):
        coarray = compute_coarray(SpectrumSupport(n=8, preserved=(0, 1, 4)))
        assert coarray.values.tolist() == [3, 1, 0, 1, 1, 0, 0, 0]
        assert coarray.hole_lags == (2, 5, 6, 7)
        assert coarray.span == 4
        assert coarray.holes_within_span == (2,)
        assert coarray.redundancy.max() == 1
        np.testing.assert_allclose(coarray.normalized()[:2], [1.0, 1.0 / 3.0])

    def test_empty_support_normalizes_to_zero(self):
        assert not compute_coarray(SpectrumSupport(n=3)).normalized().any()

    def test_matches_pairwise_count(self, rng):
        masks = [m for n in range(1, 13) for m in itertools.product([0, 1], repeat=n)][::7]
        masks += [tuple(rng.integers(0, 2, size=20)) for _ in range(50)]
        for mask in masks:
            support = SpectrumSupport.from_mask(mask)
            expected = brute_force_coarray(support.preserved, support.n)
            assert compute_coarray(support).values.tolist() == expected


@pytest.fixture
def dft16() -> tuple[FrequencyGrid, RangeGrid]:
    grid = FrequencyGrid(line_count=16, line_spacing=1.0)
    return grid, RangeGrid(bin_count=16, timewidth=15 / 16)


class TestGramStats:
    def test_orthonormal(self, dft_matrix):
        stats = gram_offdiag_stats(dft_matrix)
        assert stats.max_offdiag == pytest.approx(0.0, abs=1e-12)
        assert stats.integrated_sidelobe == pytest.approx(0.0, abs=1e-24)

    def test_single_column(self):
        stats = gram_offdiag_stats(SensingMatrix.from_array(np.ones((3, 1))))
        assert stats.max_offdiag == 0.0
        assert stats.integrated_sidelobe == 0.0

    def test_even_lines_alias(self, dft16):
        even = SpectrumSupport(n=16, preserved=tuple(range(0, 16, 2)))
        h = build_sensing_matrix(even, *dft16)
        assert gram_offdiag_stats(h).max_offdiag == pytest.approx(1.0)

    def test_missing_residue_class(self, dft16):
        kept = tuple(n for n in range(16) if n % 4 != 3)
        h = build_sensing_matrix(SpectrumSupport(n=16, preserved=kept), *dft16)
        assert gram_offdiag_stats(h).max_offdiag == pytest.approx(1.0 / 3.0)
