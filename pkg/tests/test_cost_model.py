import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fla_bench.constants import KIND_ORDER, BlockKind, CostTerm
from fla_bench.models import CostConfig
from fla_bench.services.cost_model_service import (
    COST_CSV_HEADER,
    CostModelService,
    MemoryEvent,
    peak_liveness,
)
from fla_bench.settings import Settings

ANCHOR = dict(channels=512, height=96, width=96, reduction=8)


@pytest.fixture
def service():
    settings = Settings(threads=2, reduction=8)
    return CostModelService(get_settings=lambda: settings)


@pytest.fixture
def anchor(service):
    cfg = CostConfig(**ANCHOR)
    return {kind: service.estimate(kind, cfg) for kind in BlockKind}


class TestSmallConfigs:
    def test_single_scalar_channel_nl(self, service):
        """Test that a 1x1x1 Channel NL costs two MACs and one attention element."""
        cfg = CostConfig(channels=1, height=1, width=1, reduction=1)
        report = service.estimate(BlockKind.CHANNEL_NL, cfg)
        assert report.matmul_flops == 4
        assert report.attention_map_elements == 1

    def test_doubling_extent(self, service):
        """Test that doubling H and W scales spatial FLOPs by 16 and FLA FLOPs by 4."""
        small = CostConfig(channels=8, height=4, width=4, reduction=2)
        large = CostConfig(channels=8, height=8, width=8, reduction=2)
        spatial = [service.estimate(BlockKind.SPATIAL_NL, c).matmul_flops for c in (small, large)]
        fla = [service.estimate(BlockKind.FLA, c).matmul_flops for c in (small, large)]
        assert spatial[1] == 16 * spatial[0]
        assert fla[1] == 4 * fla[0]

    def test_flags_drop_terms(self, service):
        """Test that disabling projections and softmax leaves only matmul FLOPs."""
        cfg = CostConfig(
            channels=8,
            height=4,
            width=4,
            reduction=2,
            include_projections=False,
            include_softmax=False,
        )
        report = service.estimate(BlockKind.SPATIAL_NL, cfg)
        assert report.flops_by_term[CostTerm.PROJECTIONS] == 0
        assert report.flops_by_term[CostTerm.SOFTMAX] == 0
        assert report.flops_total == report.matmul_flops

    def test_reduction_must_divide(self):
        """Test that a reduction ratio not dividing C is rejected."""
        with pytest.raises(ValueError):
            CostConfig(channels=6, height=2, width=2, reduction=4)

    def test_non_square_fla(self, service):
        """Test FLA costs on a non-square input."""
        cfg = CostConfig(channels=4, height=3, width=5, reduction=1)
        report = service.estimate(BlockKind.FLA, cfg)
        assert report.attention_map_elements == 8 * 16
        assert report.config.merged_extent is None
        # H slices of width W plus W slices of height H
        assert report.flops_by_term[CostTerm.AFFINITY] == 2 * 16 * (3 * 5 + 5 * 3)


class TestAnchor:
    def test_channel_nl_gflops(self, anchor):
        """Test the Channel NL anchor of 9.66 GFLOPs."""
        channel = anchor[BlockKind.CHANNEL_NL]
        assert channel.matmul_flops == 2 * 2 * 512**2 * 9216
        assert f"{channel.gflops:.2f}" == "9.66"
        assert float(f"{channel.matmul_flops / 1e9:.4g}") == 9.664

    def test_fla_gflops_within_three_percent(self, anchor):
        """Test the FLA anchor against the published GFLOPs."""
        fla = anchor[BlockKind.FLA]
        assert fla.matmul_flops == 4 * 192 * 512**2 * 96
        assert abs(fla.gflops - 19.37) / 19.37 < 0.03

    def test_composites_are_additive(self, anchor):
        """Test that both composites cost exactly Channel NL plus Spatial NL."""
        channel, spatial = anchor[BlockKind.CHANNEL_NL], anchor[BlockKind.SPATIAL_NL]
        total = channel.flops_total + spatial.flops_total
        assert anchor[BlockKind.DUAL_NL].flops_total == total
        assert anchor[BlockKind.CS_NL].flops_total == total

    def test_fla_dual_flops_ratio(self, anchor):
        """Test that FLA needs at most 18% of the Dual NL FLOPs."""
        assert anchor[BlockKind.FLA].flops_total / anchor[BlockKind.DUAL_NL].flops_total <= 0.18

    def test_memory_ordering(self, anchor):
        """Test the activation memory ordering at the anchor shape."""
        peak = {k: r.activation_bytes_peak for k, r in anchor.items()}
        assert (
            peak[BlockKind.CHANNEL_NL]
            < peak[BlockKind.FLA]
            < peak[BlockKind.SPATIAL_NL]
            < peak[BlockKind.DUAL_NL]
        )

    def test_fla_dual_memory_band(self, anchor):
        """Test that FLA peak memory is 30-36% of Dual NL."""
        fla = anchor[BlockKind.FLA].activation_bytes_peak
        ratio = fla / anchor[BlockKind.DUAL_NL].activation_bytes_peak
        assert 0.30 <= ratio <= 0.36

    def test_peak_values(self, anchor):
        volume = 512 * 96 * 96
        assert anchor[BlockKind.CHANNEL_NL].activation_bytes_peak == 4 * 3 * volume
        assert anchor[BlockKind.FLA].activation_bytes_peak == 4 * 64_536_576
        assert anchor[BlockKind.SPATIAL_NL].activation_bytes_peak == 4 * 179_306_496
        assert anchor[BlockKind.DUAL_NL].activation_bytes_peak == 4 * 184_025_088

    def test_schedule_is_recorded(self, anchor):
        """Test that the liveness schedule travels on the report."""
        schedule = anchor[BlockKind.FLA].schedule
        assert schedule[0] == f"+pooled_w:{512 * 96}"
        assert schedule[-1] == "-context"


class TestAsymptotics:
    @pytest.mark.parametrize("channels", [64, 128, 256])
    def test_fla_is_twice_channel_on_square_inputs(self, service, channels):
        """Test that FLA matmul FLOPs are exactly twice Channel NL on square inputs."""
        for side in (16, 32, 64):
            cfg = CostConfig(channels=channels, height=side, width=side, reduction=8)
            fla = service.estimate(BlockKind.FLA, cfg).matmul_flops
            channel = service.estimate(BlockKind.CHANNEL_NL, cfg).matmul_flops
            assert fla == 2 * channel

    @pytest.mark.parametrize("channels", [64, 128, 256])
    def test_spatial_over_channel_grows_with_area(self, service, channels):
        """Test that Spatial NL over Channel NL grows with the square of the area."""
        sides = [16, 32, 64]
        ratios = []
        for side in sides:
            cfg = CostConfig(channels=channels, height=side, width=side, reduction=8)
            ratios.append(
                service.estimate(BlockKind.SPATIAL_NL, cfg).matmul_flops
                / service.estimate(BlockKind.CHANNEL_NL, cfg).matmul_flops
            )
        slope = np.polyfit(np.log(sides), np.log(ratios), 1)[0]
        assert abs(slope - 2.0) / 2.0 < 0.05

    @settings(max_examples=60, deadline=None)
    @given(
        kind=st.sampled_from(list(BlockKind)),
        reduction=st.sampled_from([1, 2, 4]),
        groups=st.integers(1, 6),
        height=st.integers(1, 8),
        width=st.integers(1, 8),
        field=st.sampled_from(["channels", "height", "width"]),
    )
    def test_every_cost_is_monotone_in_every_extent(
        self, kind, reduction, groups, height, width, field
    ):
        """Growing one extent never shrinks a cost and always adds FLOPs."""
        service = CostModelService(get_settings=lambda: Settings(threads=1))
        base = dict(channels=reduction * groups, height=height, width=width, reduction=reduction)
        step = reduction if field == "channels" else 1
        small = service.estimate(kind, CostConfig(**base))
        large = service.estimate(kind, CostConfig(**{**base, field: base[field] + step}))

        for term in CostTerm:
            assert large.flops_by_term.get(term, 0) >= small.flops_by_term.get(term, 0), term
        assert large.attention_map_elements >= small.attention_map_elements
        assert large.activation_bytes_peak >= small.activation_bytes_peak
        assert large.flops_total > small.flops_total


class TestLiveness:
    def test_peak_counts_resident_input(self):
        """Test that the resident input counts toward the peak."""
        events = [
            MemoryEvent("alloc", "a", 3),
            MemoryEvent("alloc", "b", 2),
            MemoryEvent("free", "a"),
            MemoryEvent("alloc", "c", 1),
        ]
        assert peak_liveness(events, resident=10) == 15

    def test_double_allocation(self):
        """Test that allocating a live name twice is rejected."""
        with pytest.raises(ValueError):
            peak_liveness([MemoryEvent("alloc", "a", 1), MemoryEvent("alloc", "a", 1)])

    def test_free_before_alloc(self):
        """Test that freeing an unknown name is rejected."""
        with pytest.raises(ValueError):
            peak_liveness([MemoryEvent("free", "a")])

    @pytest.mark.parametrize("kind", list(BlockKind))
    def test_every_allocation_is_freed_except_output(self, service, kind):
        """Test that every schedule ends with only the output live."""
        events = service.schedule(kind, CostConfig(channels=8, height=3, width=5, reduction=2))
        live = set()
        for event in events:
            if event.action == "alloc":
                live.add(event.name)
            else:
                live.remove(event.name)
        assert live == {"out"}


class TestSweep:
    def test_three_shapes_give_fifteen_rows(self, service):
        shapes = [(8, 4, 4), (16, 4, 4), (8, 6, 6)]
        reports = service.sweep(list(BlockKind), shapes)
        out = io.StringIO()
        service.write_csv(reports, out)
        lines = out.getvalue().split("\n")
        assert lines[0] == ",".join(COST_CSV_HEADER)
        assert len([line for line in lines[1:] if line]) == 15

    def test_rows_are_kind_major_in_table_order(self, service):
        """Test that sweep rows follow table order, then shape order."""
        reports = service.sweep(reversed(KIND_ORDER), [(8, 6, 6), (8, 4, 4)])
        assert [r.kind for r in reports[::2]] == list(KIND_ORDER)
        assert [r.config.height for r in reports[:2]] == [4, 6]

    def test_sweep_is_independent_of_thread_count(self, service):
        """Test that the CSV does not depend on the worker count."""
        shapes = [(8, 4, 4), (16, 8, 8)]
        one, many = io.StringIO(), io.StringIO()
        service.write_csv(service.sweep(BlockKind, shapes, threads=1), one)
        service.write_csv(service.sweep(BlockKind, shapes, threads=4), many)
        assert one.getvalue() == many.getvalue()

    def test_empty_filter(self, service):
        """Test that an empty kind filter gives no reports."""
        assert service.sweep([], [(8, 4, 4)]) == []

    def test_reduction_column_blank_without_projections(self, service):
        """Test that kinds without projections leave the reduction column empty."""
        out = io.StringIO()
        service.write_csv(service.sweep([BlockKind.FLA, BlockKind.SPATIAL_NL], [(16, 4, 4)]), out)
        rows = [line.split(",") for line in out.getvalue().splitlines()[1:]]
        assert rows[0][0] == "spatial_nl" and rows[0][4] == "8"
        assert rows[1][0] == "fla" and rows[1][4] == ""

    def test_config_for_lowers_reduction(self, service):
        """Test that the configured reduction is lowered until it divides C."""
        assert service.config_for((12, 2, 2)).reduction == 6
        assert service.config_for((7, 2, 2)).reduction == 7


def test_gflops_is_total_over_billion(anchor):
    report = anchor[BlockKind.SPATIAL_NL]
    assert math.isclose(report.gflops, report.flops_total / 1e9)
