import numpy as np
import pytest

from fla_bench.autograd import functional as F
from fla_bench.autograd.gradcheck import grad_check_function, relative_error
from fla_bench.autograd.tape import Tape, register_backward
from fla_bench.constants import Stencil
from fla_bench.core.tensor import Rng, Tensor
from fla_bench.exceptions import BackwardError


class TestTape:
    def test_sum_gradient_is_ones(self):
        """Test that the gradient of a sum is all ones."""
        tape = Tape()
        x = tape.leaf(Rng(1).uniform((2, 3)), "x")
        grads = tape.gradients_by_name(F.sum_all(x))
        assert np.array_equal(grads["x"].array, np.ones((2, 3)))

    def test_sum_of_softmax_has_zero_gradient(self):
        """Test that softmax rows summing to one have zero gradient."""
        tape = Tape()
        x = tape.leaf(Rng(2).uniform((3, 4)), "x")
        grads = tape.gradients_by_name(F.sum_all(F.softmax(x, -1)))
        assert np.max(np.abs(grads["x"].array)) <= 1e-12

    def test_backward_twice_is_identical(self):
        """Test that backward is repeatable."""
        tape = Tape()
        rng = Rng(3)
        a = tape.leaf(rng.uniform((2, 3, 4)), "a")
        b = tape.leaf(rng.uniform((2, 4, 3)), "b")
        loss = F.sum_squares(F.softmax(F.matmul(a, b), -1))

        first = tape.backward(loss)
        second = tape.backward(loss)

        assert all(first[k].identical(second[k]) for k in first)

    def test_unused_leaf_gets_zeros(self):
        """Test that an unused leaf gets a zero gradient."""
        tape = Tape()
        x = tape.leaf(Tensor.ones((2,)), "x")
        y = tape.leaf(Tensor.ones((3,)), "y")
        grads = tape.gradients_by_name(F.sum_all(x))
        assert grads["y"].identical(Tensor.zeros((3,)))

    def test_non_scalar_loss_rejected(self):
        tape = Tape()
        x = tape.leaf(Tensor.ones((2,)))
        with pytest.raises(BackwardError):
            tape.backward(x)

    def test_foreign_tape_rejected(self):
        """Test that mixing tapes is an error."""
        first, second = Tape(), Tape()
        a = first.leaf(Tensor.ones((2,)))
        b = second.leaf(Tensor.ones((2,)))
        with pytest.raises(BackwardError):
            F.add(a, b)

    def test_shared_leaf_accumulates(self):
        """Test that a leaf used twice accumulates."""
        tape = Tape()
        x = tape.leaf(Tensor([1.5, -2.0]), "x")
        loss = F.sum_all(F.add(x, x))
        grads = tape.gradients_by_name(loss)
        assert grads["x"].tolist() == [2.0, 2.0]

    def test_forward_values_are_retained(self):
        tape = Tape()
        x = tape.leaf(Tensor([1.0, 2.0]))
        y = F.scale(x, 3.0)
        F.sum_all(y)
        assert tape.nodes[y.id].value.tolist() == [3.0, 6.0]
        assert len(tape) == 3


class TestBackwardRules:
    """Each rule against five-point finite differences"""

    def setup_method(self):
        self.rng = Rng(17)

    def _check(self, loss_fn, inputs):
        report = grad_check_function(loss_fn, inputs, h=1e-5, stencil=Stencil.FIVE_POINT)
        assert report.max_rel_error < 1e-5, report.worst

    def test_matmul(self):
        """Test the matmul rule."""
        self._check(
            lambda tape, v: F.sum_squares(F.matmul(v["a"], v["b"])),
            {"a": self.rng.uniform((2, 3, 4)), "b": self.rng.uniform((2, 4, 2))},
        )

    def test_softmax_both_axes(self):
        """Test the softmax rule on both axes."""
        weights = self.rng.uniform((3, 4))
        for axis in (0, 1):
            self._check(
                lambda tape, v, axis=axis: F.sum_all(
                    F.mul(F.softmax(v["x"], axis), tape.leaf(weights))
                ),
                {"x": self.rng.uniform((3, 4))},
            )

    def test_pooling(self):
        self._check(
            lambda tape, v: F.add(
                F.sum_squares(F.avg_pool_rows(v["x"])),
                F.sum_squares(F.avg_pool_cols(v["x"])),
            ),
            {"x": self.rng.uniform((2, 3, 4))},
        )

    def test_slicing_permutations(self):
        weights = self.rng.uniform((2, 3, 4))

        def loss(tape, v):
            rows = F.unstack_h(F.slice_stack_h(v["x"]))
            cols = F.unstack_w(F.slice_stack_w(v["x"]))
            return F.sum_all(F.mul(F.add(rows, F.scale(cols, 2.0)), tape.leaf(weights)))

        self._check(loss, {"x": self.rng.uniform((2, 3, 4))})

    def test_concat_and_split(self):
        def loss(tape, v):
            joined = F.concat([v["a"], v["b"]], 0)
            top, bottom = F.split(joined, [1, 3], 0)
            return F.add(F.sum_squares(top), F.sum_squares(F.scale(bottom, 0.5)))

        self._check(loss, {"a": self.rng.uniform((2, 3)), "b": self.rng.uniform((2, 3))})

    def test_linear_channels(self):
        """Test the channel linear rule."""
        self._check(
            lambda tape, v: F.sum_squares(F.linear_channels(v["x"], v["w"], v["b"])),
            {
                "x": self.rng.uniform((3, 2, 2)),
                "w": self.rng.uniform((2, 3)),
                "b": self.rng.uniform((2,)),
            },
        )

    def test_scale_by_and_tile(self):
        def loss(tape, v):
            tiled = F.tile_batch(v["x"], 3)
            return F.sum_squares(F.scale_by(F.transpose_last(tiled), v["g"]))

        self._check(loss, {"x": self.rng.uniform((2, 3)), "g": Tensor.scalar(0.7)})

    def test_mse(self):
        target = self.rng.uniform((2, 2))
        self._check(
            lambda tape, v: F.mse(F.sub(v["x"], F.reshape(v["y"], (2, 2))), target),
            {"x": self.rng.uniform((2, 2)), "y": self.rng.uniform((4,))},
        )


class TestGradCheck:
    def test_relative_error_floor(self):
        """Test the denominator floor of the relative error."""
        assert relative_error(0.0, 0.0) == 0.0
        assert relative_error(1e-12, 0.0) == pytest.approx(1e-4)

    def test_reports_every_input(self):
        report = grad_check_function(
            lambda tape, v: F.sum_squares(v["a"]),
            {"a": Tensor([1.0, -2.0]), "b": Tensor([3.0])},
        )
        assert [e.name for e in report.entries] == ["a", "b"]
        assert report.entry("b").max_rel_error == 0.0
        assert report.passed(1e-5)

    def test_wrong_rule_is_caught(self):
        """Test that a rule missing a factor of 2 fails the check."""
        # backward drops the factor 2
        @register_backward("half_square")
        def _rule(node, inputs, grad):
            (x,) = inputs
            return (x * grad.reshape(-1)[0],)

        def loss(tape, v):
            value = Tensor(np.sum(v["x"].value.array ** 2))
            return tape.record("half_square", (v["x"],), value)

        report = grad_check_function(loss, {"x": Tensor([0.5, 1.0])})
        assert not report.passed(1e-5)
        assert report.worst.name == "x"

    def test_step_must_be_positive(self):
        with pytest.raises(ValueError):
            grad_check_function(lambda tape, v: F.sum_all(v["x"]), {"x": Tensor([1.0])}, h=0.0)

    def test_default_stencil_is_central(self):
        """Test that the default check is the two-point formula at h = 1e-4."""
        report = grad_check_function(lambda tape, v: F.sum_squares(v["x"]), {"x": Tensor([1.0])})
        assert report.stencil == Stencil.CENTRAL
        assert report.step == 1e-4

    def test_central_difference_is_exact_for_quadratics(self):
        """The two-point quotient has no truncation error on x^2."""
        report = grad_check_function(
            lambda tape, v: F.sum_squares(v["x"]), {"x": Tensor([1.0, -0.7])}, h=1e-2
        )
        assert report.max_rel_error < 1e-9

    def test_five_point_beats_central_on_quartic(self):
        """On x^4 with a coarse step only the five-point stencil stays exact."""

        def loss(tape, v):
            return F.sum_squares(F.mul(v["x"], v["x"]))

        inputs = {"x": Tensor([1.0, 0.7])}
        central = grad_check_function(loss, inputs, h=1e-2)
        five_point = grad_check_function(loss, inputs, h=1e-2, stencil=Stencil.FIVE_POINT)
        # central truncation is h^2 / x^2 relative to the true slope
        assert 5e-5 < central.max_rel_error < 5e-4
        assert five_point.max_rel_error < 1e-9
        assert five_point.stencil == Stencil.FIVE_POINT

    def test_stencil_accepts_plain_strings(self):
        report = grad_check_function(
            lambda tape, v: F.sum_squares(v["x"]), {"x": Tensor([2.0])}, stencil="five_point"
        )
        assert report.stencil == Stencil.FIVE_POINT
