import pytest

from fla_bench.constants import BlockKind
from fla_bench.core.tensor import Rng, Tensor
from fla_bench.dependencies import get_block
from fla_bench.exceptions import ConfigurationError, DimensionError
from fla_bench.services.blocks.mixing import mixing_structure
from fla_bench.services.blocks.params import random_params


def _report(kind, shape=(2, 3, 3), source=(0, 0, 0), seed=5):
    rng = Rng(seed)
    params = random_params(kind, shape[0], rng, reduction=1, gamma=1.0)
    f_in = rng.uniform(shape)
    block = get_block(kind)
    return mixing_structure(block, block.forward(params, f_in), params, f_in, source)


class TestFLAMixing:
    def test_reaches_row_and_column(self):
        """Test that FLA moves outputs in the perturbed row and column."""
        report = _report(BlockKind.FLA)
        assert report.reaches(0, 2)
        assert report.reaches(2, 0)

    def test_live_forward_reaches_every_position(self):
        """Test that the live FLA forward moves every position."""
        report = _report(BlockKind.FLA, shape=(3, 3, 4), source=(1, 1, 2))
        assert len(report.moved) == 12

    def test_frozen_attention_is_local(self):
        """Test that frozen maps only move the perturbed position."""
        report = _report(BlockKind.FLA, shape=(3, 3, 4), source=(1, 1, 2))
        assert report.moved_frozen_attention == [(1, 2)]

    def test_prior_pathway_reaches_beyond_the_cross(self):
        """Test that the pooled priors alone carry the change off the cross."""
        report = _report(BlockKind.FLA, shape=(2, 3, 3))
        assert (0, 2) in report.moved_prior_only
        assert (2, 2) in report.moved_prior_only


class TestChannelMixing:
    def test_frozen_attention_is_local(self):
        """Test that frozen maps only move the perturbed position."""
        report = _report(BlockKind.CHANNEL_NL)
        assert report.moved_frozen_attention == [(0, 0)]
        assert report.moved_prior_only == []

    def test_live_attention_moves_everything(self):
        """Test that live Channel NL attention moves every position."""
        report = _report(BlockKind.CHANNEL_NL)
        assert len(report.moved) == 9


class TestSpatialMixing:
    def test_frozen_attention_still_reaches_every_position(self):
        """Test that Spatial NL aggregation is global even with frozen maps."""
        report = _report(BlockKind.SPATIAL_NL)
        assert len(report.moved_frozen_attention) == 9


class TestSourceValidation:
    def test_source_outside_input(self):
        """Test that a source coordinate outside the input is rejected."""
        with pytest.raises(DimensionError):
            _report(BlockKind.FLA, source=(0, 3, 0))

    def test_trace_from_other_kind(self):
        """Test that a trace from another kind is rejected."""
        rng = Rng(1)
        params = random_params(BlockKind.FLA, 2, rng)
        f_in = rng.uniform((2, 2, 2))
        fla_trace = get_block(BlockKind.FLA).forward(params, f_in)
        with pytest.raises(ConfigurationError):
            mixing_structure(get_block(BlockKind.CHANNEL_NL), fla_trace, params, f_in)


@pytest.mark.parametrize("kind", [BlockKind.FLA, BlockKind.CHANNEL_NL])
def test_zero_input_only_moves_the_perturbed_position(kind):
    """Test that a zero input only moves the perturbed position."""
    params = random_params(kind, 2, Rng(9), gamma=1.0)
    f_in = Tensor.zeros((2, 3, 3))
    block = get_block(kind)
    report = mixing_structure(block, block.forward(params, f_in), params, f_in)
    assert report.moved == [(0, 0)]
