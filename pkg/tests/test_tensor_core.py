import math
import pickle

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fla_bench.core import ops
from fla_bench.core.tensor import Rng, Tensor
from fla_bench.exceptions import DimensionError, NonFiniteError


def _loop_matmul(a, b):
    batch, rows, inner = a.shape
    cols = b.shape[2]
    out = np.zeros((batch, rows, cols))
    for n in range(batch):
        for m in range(rows):
            for k in range(cols):
                out[n, m, k] = math.fsum(a[n, m, i] * b[n, i, k] for i in range(inner))
    return out


class TestTensor:
    def test_rejects_zero_extent(self):
        """Test that zero extents are rejected."""
        with pytest.raises(DimensionError):
            Tensor.zeros((2, 0, 3))

    def test_rejects_non_finite(self):
        """Test that NaN is rejected at construction."""
        with pytest.raises(NonFiniteError):
            Tensor([1.0, float("nan")])

    def test_scalar_has_rank_one(self):
        """Test that a scalar is stored as shape (1,)."""
        t = Tensor(3.5)
        assert t.shape == (1,)
        assert t.item() == 3.5

    def test_data_is_read_only(self):
        """Test that the backing array is immutable."""
        t = Tensor([[1.0, 2.0]])
        with pytest.raises(ValueError):
            t.array[0, 0] = 5.0

    def test_from_flat_is_row_major(self):
        """Test that flat values fill in row-major order."""
        t = Tensor.from_flat((2, 3), range(6))
        assert t.item(1, 0) == 3.0

    def test_with_value_copies(self):
        """Test that replacing a value leaves the original untouched."""
        t = Tensor.zeros((2, 2))
        u = t.with_value(3, 1.0)
        assert t.item(1, 1) == 0.0
        assert u.item(1, 1) == 1.0

    def test_identical_distinguishes_signed_zero(self):
        """Test that bitwise equality tells 0.0 from -0.0."""
        assert not Tensor([0.0]).identical(Tensor([-0.0]))
        assert Tensor([0.0]).identical(Tensor([0.0]))

    def test_pickles(self):
        t = Rng(1).uniform((2, 3))
        assert pickle.loads(pickle.dumps(t)).identical(t)


class TestRng:
    def test_same_seed_same_stream(self):
        """Test that one seed gives one stream."""
        assert Rng(42).uniform((3, 4)).identical(Rng(42).uniform((3, 4)))

    def test_different_seed_different_stream(self):
        assert not Rng(1).uniform((3, 4)).identical(Rng(2).uniform((3, 4)))

    def test_uniform_bounds(self):
        """Test that uniform draws stay in [low, high)."""
        t = Rng(3).uniform((1000,), -2.0, 2.0)
        assert t.array.min() >= -2.0
        assert t.array.max() < 2.0

    def test_integers_inclusive(self):
        """Test that integer draws include both bounds."""
        rng = Rng(0)
        draws = {rng.integers(1, 3) for _ in range(200)}
        assert draws == {1, 2, 3}


class TestMatmul:
    def test_identity_leaves_operand(self):
        b = Tensor([[[1.5, -2.0], [3.0, 4.0]]])
        out = ops.matmul_batched(Tensor([[[1.0, 0.0], [0.0, 1.0]]]), b)
        assert out.identical(b)

    def test_single_element(self):
        out = ops.matmul_batched(Tensor([[[2.0]]]), Tensor([[[3.0]]]))
        assert out.tolist() == [[[6.0]]]

    def test_against_loop_reference(self):
        """Test batched matmul against a triple loop."""
        rng = Rng(5)
        a = rng.uniform((2, 3, 4))
        b = rng.uniform((2, 4, 5))
        out = ops.matmul_batched(a, b)
        expected = _loop_matmul(a.array, b.array)
        assert np.max(np.abs(out.array - expected)) <= 1e-12

    def test_inner_mismatch_names_axes(self):
        """Test that an inner-extent mismatch names both axes."""
        with pytest.raises(DimensionError) as exc:
            ops.matmul_batched(Tensor.zeros((1, 2, 3)), Tensor.zeros((1, 4, 2)))
        assert exc.value.context["axes"] == ("a[2]", "b[1]")

    def test_batch_mismatch_names_axes(self):
        """Test that a batch mismatch names both axes."""
        with pytest.raises(DimensionError) as exc:
            ops.matmul_batched(Tensor.zeros((2, 2, 3)), Tensor.zeros((1, 3, 2)))
        assert exc.value.context["axes"] == ("a[0]", "b[0]")

    @settings(max_examples=40, deadline=None)
    @given(
        batch=st.integers(1, 6),
        rows=st.integers(1, 6),
        inner=st.integers(1, 6),
        cols=st.integers(1, 6),
        seed=st.integers(0, 2**16),
    )
    def test_matches_loop_reference_on_small_shapes(self, batch, rows, inner, cols, seed):
        """Test matmul against the loop on random small shapes."""
        rng = Rng(seed)
        a = rng.uniform((batch, rows, inner))
        b = rng.uniform((batch, inner, cols))
        expected = _loop_matmul(a.array, b.array)
        out = ops.matmul_batched(a, b).array
        scale = np.maximum(np.abs(expected), 1.0)
        assert np.max(np.abs(out - expected) / scale) <= 1e-12

    def test_batched_equals_per_batch(self):
        """Test that each batch entry equals its own matmul."""
        rng = Rng(9)
        a = rng.uniform((3, 4, 5))
        b = rng.uniform((3, 5, 2))
        whole = ops.matmul_batched(a, b)
        for n in range(3):
            part = ops.matmul(ops.take(a, n, n + 1, 0), ops.take(b, n, n + 1, 0))
            assert ops.take(whole, n, n + 1, 0).identical(part)


class TestSoftmax:
    def test_constant_slice_is_uniform(self):
        out = ops.softmax(Tensor.full((2, 5), 3.0), axis=-1)
        assert np.allclose(out.array, 0.2, atol=1e-15)

    def test_analytic_pair(self):
        """Test softmax of (0, ln 3) against (1/4, 3/4)."""
        out = ops.softmax(Tensor([0.0, math.log(3.0)]), axis=-1)
        assert abs(out.item(0) - 0.25) <= 1e-15
        assert abs(out.item(1) - 0.75) <= 1e-15

    def test_against_direct_formula(self):
        """Test softmax against exp(x) / sum(exp(x))."""
        x = Rng(2).uniform((4, 5), -3, 3)
        out = ops.softmax(x, axis=-1)
        for i in range(4):
            exps = [math.exp(v) for v in x.array[i]]
            total = math.fsum(exps)
            for j in range(5):
                assert abs(out.item(i, j) - exps[j] / total) <= 1e-12

    def test_shift_invariance(self):
        """Test that adding a constant leaves softmax unchanged."""
        x = Rng(3).uniform((3, 4))
        shifted = Tensor(x.array + 17.0)
        assert ops.softmax(x, 0).allclose(ops.softmax(shifted, 0), atol=1e-12)

    def test_rows_sum_to_one_on_first_axis(self):
        out = ops.softmax(Rng(4).uniform((6, 3)), axis=0)
        assert np.allclose(out.array.sum(axis=0), 1.0, atol=1e-12)

    def test_large_logits_stay_finite(self):
        """Test that max-subtraction keeps large logits finite."""
        out = ops.softmax(Tensor([1000.0, 0.0]), axis=-1)
        assert out.item(0) == 1.0

    def test_axis_out_of_range(self):
        """Test that an axis past the rank is rejected."""
        with pytest.raises(DimensionError):
            ops.softmax(Tensor.zeros((2, 2)), axis=2)


class TestPoolingAndSlicing:
    def test_constant_pools_to_constant(self):
        """Test that pooling a constant returns it exactly."""
        x = Tensor.full((2, 3, 4), 1.25)
        assert np.all(ops.avg_pool_rows(x).array == 1.25)
        assert np.all(ops.avg_pool_cols(x).array == 1.25)

    def test_row_pool_mean(self):
        x = Tensor([[[1.0], [3.0]]])
        out = ops.avg_pool_rows(x)
        assert out.shape == (1, 1, 1)
        assert out.item() == 2.0

    def test_pool_shapes(self):
        x = Rng(1).uniform((3, 4, 5))
        assert ops.avg_pool_rows(x).shape == (3, 1, 5)
        assert ops.avg_pool_cols(x).shape == (3, 4, 1)

    def test_pool_against_loop_mean(self):
        """Test row pooling against a loop mean."""
        x = Rng(1).uniform((3, 4, 5))
        rows = ops.avg_pool_rows(x)
        for c in range(3):
            for w in range(5):
                expected = sum(x.item(c, h, w) for h in range(4)) / 4
                assert rows.item(c, 0, w) == pytest.approx(expected, abs=1e-15)

    def test_pool_rejects_wrong_rank(self):
        with pytest.raises(DimensionError):
            ops.avg_pool_rows(Tensor.zeros((2, 2)))

    def test_slice_stack_index_identity(self):
        """Test the row and column slice index maps."""
        x = Rng(8).uniform((2, 3, 4))
        rows = ops.slice_stack_h(x)
        cols = ops.slice_stack_w(x)
        assert rows.shape == (3, 2, 4)
        assert cols.shape == (4, 2, 3)
        for c in range(2):
            for h in range(3):
                for w in range(4):
                    assert rows.item(h, c, w) == x.item(c, h, w)
                    assert cols.item(w, c, h) == x.item(c, h, w)

    def test_unstack_inverts_slice_stack(self):
        """Test that unstacking inverts slice stacking."""
        x = Rng(8).uniform((2, 3, 4))
        assert ops.unstack_h(ops.slice_stack_h(x)).identical(x)
        assert ops.unstack_w(ops.slice_stack_w(x)).identical(x)

    def test_single_scalar_slices(self):
        x = Tensor([[[7.0]]])
        assert ops.slice_stack_h(x).identical(x)
        assert ops.slice_stack_w(x).identical(x)


class TestConcatAndLinear:
    def test_concat_single_part(self):
        x = Rng(0).uniform((2, 3))
        assert ops.concat([x], 0).identical(x)

    def test_concat_order(self):
        """Test that concat keeps part order."""
        a = Tensor.zeros((2, 3))
        b = Tensor.ones((2, 3))
        out = ops.concat([a, b], 0)
        assert out.shape == (4, 3)
        assert out.array[:2].sum() == 0.0
        assert out.array[2:].sum() == 6.0

    def test_concat_then_split(self):
        rng = Rng(1)
        parts = [rng.uniform((2, 3)), rng.uniform((4, 3))]
        back = ops.split(ops.concat(parts, 0), [2, 4], 0)
        assert all(p.identical(q) for p, q in zip(parts, back))

    def test_concat_rejects_mismatch(self):
        """Test that concat rejects mismatched off-axis extents."""
        with pytest.raises(DimensionError):
            ops.concat([Tensor.zeros((2, 3)), Tensor.zeros((2, 4))], 0)

    def test_linear_identity(self):
        x = Rng(2).uniform((3, 2, 2))
        out = ops.linear_channels(x, Tensor.eye(3), Tensor.zeros((3,)))
        assert out.identical(x)

    def test_linear_swaps_channels(self):
        """Test a permutation weight swapping channels."""
        x = Rng(2).uniform((2, 2, 3))
        out = ops.linear_channels(x, Tensor([[0.0, 1.0], [1.0, 0.0]]), Tensor.zeros((2,)))
        assert np.array_equal(out.array[0], x.array[1])
        assert np.array_equal(out.array[1], x.array[0])

    def test_linear_against_loop(self):
        """Test the channel linear map against a loop."""
        rng = Rng(3)
        x = rng.uniform((3, 2, 2))
        w = rng.uniform((2, 3))
        b = rng.uniform((2,))
        out = ops.linear_channels(x, w, b)
        for o in range(2):
            for h in range(2):
                for v in range(2):
                    expected = math.fsum(
                        [w.item(o, k) * x.item(k, h, v) for k in range(3)] + [b.item(o)]
                    )
                    assert abs(out.item(o, h, v) - expected) <= 1e-12

    def test_linear_channel_mismatch(self):
        with pytest.raises(DimensionError):
            ops.linear_channels(Tensor.zeros((3, 1, 1)), Tensor.eye(2), Tensor.zeros((2,)))

    def test_elementwise_shape_check(self):
        with pytest.raises(DimensionError):
            ops.add(Tensor.zeros((2,)), Tensor.zeros((3,)))

    def test_overflow_is_reported(self):
        """Test that overflow to inf raises."""
        with pytest.raises(NonFiniteError):
            ops.mul(Tensor([1e200]), Tensor([1e200]))

    def test_primitives_are_deterministic(self):
        """Test that a chain of primitives is bit-reproducible."""
        x = Rng(6).uniform((3, 4, 4))

        def run():
            slices = ops.slice_stack_h(x)
            return ops.softmax(ops.matmul(slices, ops.transpose_last(slices)), -1)

        assert run().identical(run())
