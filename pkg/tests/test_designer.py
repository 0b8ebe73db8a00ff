import numpy as np
import pytest

from src.errors import DesignError
from src.estimation.bayes import DiagonalPrior, NoiseModel
from src.spectrum.designer import (
    TIE_TOLERANCE,
    BlockPartition,
    block_removal_cost,
    design_sensing_matrix,
    design_spectrum,
    mfi_of_removal,
    occupancy,
    support_trace,
)
from src.spectrum.grid import (
    FrequencyGrid,
    RangeGrid,
    SensingMatrix,
    SpectrumSupport,
    build_sensing_matrix,
    steering_rows,
)
from tests.helpers import information_trace

PRIOR = DiagonalPrior.uniform(8, 2.0)
NOISE = NoiseModel(variance=0.5)


def fixed_matrix(support: SpectrumSupport, grid: FrequencyGrid, ranges: RangeGrid) -> SensingMatrix:
    raw = steering_rows(grid.angular_frequencies(support.preserved), ranges.delays)
    return SensingMatrix.from_array(raw / np.sqrt(grid.line_count))


class TestBlockPartition:
    def test_short_last_block(self):
        partition = BlockPartition(line_count=10, block_size=3)
        assert partition.block_count == 4
        assert partition.block(3) == range(9, 10)
        covered = [i for block in partition.blocks for i in block]
        assert covered == list(range(10))

    @pytest.mark.parametrize("lines, size", [(800, 10), (4000, 50), (16, 1)])
    def test_default_size(self, lines, size):
        assert BlockPartition.default(lines).block_size == size

    def test_block_larger_than_grid(self):
        with pytest.raises(ValueError):
            BlockPartition(line_count=4, block_size=5)

    def test_unknown_block(self):
        with pytest.raises(DesignError):
            BlockPartition(line_count=4, block_size=2).block(2)


class TestOccupancy:
    def test_full(self):
        assert occupancy(SpectrumSupport.full(12)) == 1.0

    def test_half(self):
        assert occupancy(SpectrumSupport(n=10, preserved=(0, 2, 4, 6, 8))) == 0.5


class TestRemovalCost:
    def test_duplicate_line_is_free_under_renormalization(self):
        row = steering_rows(np.array([2.0 * np.pi * 3.0]), np.linspace(0.0, 0.5, 6))
        rows = np.vstack([row, row])
        prior = DiagonalPrior.uniform(6, 2.0)
        cost = block_removal_cost(rows, [1], prior, NOISE, normalization="renormalized")
        assert cost == pytest.approx(0.0, abs=1e-10)
        assert block_removal_cost(rows, [1], prior, NOISE) > 0.0

    def test_cannot_remove_everything(self):
        rows = steering_rows(np.array([0.0, 1.0]), np.linspace(0.0, 1.0, 3))
        with pytest.raises(DesignError):
            block_removal_cost(rows, [0, 1], DiagonalPrior.uniform(3, 1.0), NOISE)

    def test_full_orthogonal_support(self, small_geometry):
        grid, ranges = small_geometry
        trace = support_trace(SpectrumSupport.full(16), grid, ranges, PRIOR, NOISE)
        assert trace == pytest.approx(1.0 / (1.0 / 0.5 + 1.0 / 2.0))

    def test_fixed_columns_keep_line_energy(self, small_geometry):
        grid, ranges = small_geometry
        support = SpectrumSupport(n=16, preserved=(0, 3, 5, 6))
        h = design_sensing_matrix(support, grid, ranges)
        assert not h.normalized
        np.testing.assert_allclose(np.linalg.norm(h.entries, axis=0), np.sqrt(4 / 16))

    @pytest.mark.parametrize("block_id", [0, 1, 5, 7])
    def test_matches_information_form(self, small_geometry, block_id):
        grid, ranges = small_geometry
        partition = BlockPartition(line_count=16, block_size=2)
        full = SpectrumSupport.full(16)
        after = full.without(partition.block(block_id))
        expected = information_trace(
            fixed_matrix(after, grid, ranges), PRIOR, NOISE
        ) - information_trace(fixed_matrix(full, grid, ranges), PRIOR, NOISE)
        value = mfi_of_removal(full, partition.block(block_id), grid, ranges, PRIOR, NOISE)
        assert value == pytest.approx(expected, abs=1e-10)
        assert value >= 0.0

    def test_renormalized_matches_information_form(self, small_geometry):
        grid, ranges = small_geometry
        current = SpectrumSupport.full(16).without(range(4, 8))
        after = current.without(range(10, 12))
        expected = information_trace(
            build_sensing_matrix(after, grid, ranges), PRIOR, NOISE
        ) - information_trace(build_sensing_matrix(current, grid, ranges), PRIOR, NOISE)
        value = mfi_of_removal(
            current, range(10, 12), grid, ranges, PRIOR, NOISE, normalization="renormalized"
        )
        assert value == pytest.approx(max(expected, 0.0), abs=1e-10)

    def test_block_outside_support(self, small_geometry):
        grid, ranges = small_geometry
        current = SpectrumSupport.full(16).without(range(0, 2))
        with pytest.raises(DesignError, match="not contained"):
            mfi_of_removal(current, range(0, 2), grid, ranges, PRIOR, NOISE)

    def test_emptying_removal(self, small_geometry):
        grid, ranges = small_geometry
        current = SpectrumSupport(n=16, preserved=(4, 5))
        with pytest.raises(DesignError, match="empty"):
            mfi_of_removal(current, range(4, 6), grid, ranges, PRIOR, NOISE)


def exhaustive_greedy(
    grid: FrequencyGrid,
    ranges: RangeGrid,
    partition: BlockPartition,
    target: float,
) -> tuple[list[int], list[float]]:
    """Re-scan every remaining block at every step with the explicit M×M inverse"""
    support = SpectrumSupport.full(grid.line_count)
    trace = information_trace(fixed_matrix(support, grid, ranges), PRIOR, NOISE)
    removed: list[int] = []
    history = [trace]
    while occupancy(support) > target:
        costs = []
        for block_id in range(partition.block_count):
            if block_id in removed:
                continue
            after = support.without(partition.block(block_id))
            costs.append(
                (block_id, information_trace(fixed_matrix(after, grid, ranges), PRIOR, NOISE))
            )
        best = min(value for _, value in costs)
        threshold = best + TIE_TOLERANCE * max(1.0, abs(trace))
        chosen, trace = next(c for c in costs if c[1] <= threshold)
        removed.append(chosen)
        support = support.without(partition.block(chosen))
        history.append(trace)
    return removed, history


class TestDesignSpectrum:
    def test_full_target_is_a_no_op(self, small_geometry):
        grid, ranges = small_geometry
        support, report = design_spectrum(
            grid, ranges, BlockPartition(line_count=16, block_size=2), 1.0, PRIOR, NOISE
        )
        assert support == SpectrumSupport.full(16)
        assert report.removal_order == ()
        assert len(report.trace_history) == 1
        assert report.final_occupancy == 1.0

    def test_matches_exhaustive_scan(self, small_geometry):
        grid, ranges = small_geometry
        partition = BlockPartition(line_count=16, block_size=2)
        support, report = design_spectrum(grid, ranges, partition, 0.5, PRIOR, NOISE)
        removed, history = exhaustive_greedy(grid, ranges, partition, 0.5)
        assert list(report.removal_order) == removed
        np.testing.assert_allclose(report.trace_history, history, atol=1e-8)
        assert support.preserved_count == 8
        assert occupancy(support) == report.final_occupancy == 0.5

    @pytest.mark.parametrize("normalization", ["fixed", "renormalized"])
    def test_gram_path_agrees_with_recompute(self, normalization):
        grid = FrequencyGrid(line_count=40, line_spacing=1.0)
        ranges = RangeGrid(bin_count=9, timewidth=0.2)
        partition = BlockPartition(line_count=40, block_size=4)
        prior = DiagonalPrior.uniform(9, 5.0)
        runs = [
            design_spectrum(
                grid, ranges, partition, 0.5, prior, NOISE,
                method=method, normalization=normalization,
            )
            for method in ("gram", "recompute")
        ]
        (gram_support, gram_report), (recompute_support, recompute_report) = runs
        assert gram_report.removal_order == recompute_report.removal_order
        assert gram_support == recompute_support
        np.testing.assert_allclose(
            gram_report.trace_history, recompute_report.trace_history, atol=1e-8
        )
        assert gram_report.normalization == normalization

    def test_history_is_monotone_and_telescopes(self):
        grid = FrequencyGrid(line_count=40, line_spacing=1.0)
        ranges = RangeGrid(bin_count=9, timewidth=0.2)
        partition = BlockPartition(line_count=40, block_size=4)
        prior = DiagonalPrior.uniform(9, 5.0)
        support, report = design_spectrum(grid, ranges, partition, 0.3, prior, NOISE)

        history = np.asarray(report.trace_history)
        assert len(history) == len(report.removal_order) + 1
        assert np.all(np.diff(history) >= -1e-12)
        assert all(value >= 0.0 for value in report.mfi_values)
        assert sum(report.mfi_values) == pytest.approx(history[-1] - history[0], abs=1e-8)
        assert occupancy(support) <= 0.3

        current = SpectrumSupport.full(40)
        for block_id, value in zip(report.removal_order, report.mfi_values):
            block = partition.block(block_id)
            assert mfi_of_removal(current, block, grid, ranges, prior, NOISE) == pytest.approx(
                value, abs=1e-8
            )
            current = current.without(block)
        assert current == support

    def test_deterministic(self, small_geometry):
        grid, ranges = small_geometry
        partition = BlockPartition(line_count=16, block_size=2)
        first = design_spectrum(grid, ranges, partition, 0.25, PRIOR, NOISE)
        second = design_spectrum(grid, ranges, partition, 0.25, PRIOR, NOISE)
        assert first[0] == second[0]
        assert first[1] == second[1]

    @pytest.mark.parametrize("target", [0.0, -0.1, 1.5, 0.1])
    def test_invalid_targets(self, small_geometry, target):
        grid, ranges = small_geometry
        with pytest.raises(DesignError):
            design_spectrum(
                grid, ranges, BlockPartition(line_count=16, block_size=2), target, PRIOR, NOISE
            )

    def test_partition_mismatch(self, small_geometry):
        grid, ranges = small_geometry
        with pytest.raises(DesignError, match="partition"):
            design_spectrum(
                grid, ranges, BlockPartition(line_count=20, block_size=2), 0.5, PRIOR, NOISE
            )

    def test_prior_mismatch(self, small_geometry):
        grid, ranges = small_geometry
        with pytest.raises(DesignError, match="prior"):
            design_spectrum(
                grid,
                ranges,
                BlockPartition(line_count=16, block_size=2),
                0.5,
                DiagonalPrior.uniform(5, 1.0),
                NOISE,
            )
