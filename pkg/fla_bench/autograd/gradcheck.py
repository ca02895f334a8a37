"""Finite-difference check of tape gradients."""

from __future__ import annotations

from typing import Callable, Mapping

from ..constants import Stencil
from ..core.tensor import Tensor
from ..exceptions import NonFiniteError
from ..logging_utils import get_logger
from ..models import GradCheckReport, ParameterGradError
from .tape import Tape, Var

logger = get_logger(__name__)

# Builds a single-element loss from named leaves recorded on the given tape
LossFn = Callable[[Tape, Mapping[str, Var]], Var]

DENOMINATOR_FLOOR = 1e-8

# Per stencil: multiples of h sampled, their weights, and the divisor of h
STENCILS = {
    Stencil.CENTRAL: ((1.0, -1.0), (1.0, -1.0), 2.0),
    Stencil.FIVE_POINT: ((1.0, -1.0, 2.0, -2.0), (8.0, -8.0, -1.0, 1.0), 12.0),
}


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), DENOMINATOR_FLOOR)


def _evaluate(loss_fn: LossFn, inputs: Mapping[str, Tensor]) -> float:
    tape = Tape()
    leaves = {name: tape.leaf(value, name) for name, value in inputs.items()}
    return loss_fn(tape, leaves).value.item()


def grad_check_function(
    loss_fn: LossFn,
    inputs: Mapping[str, Tensor],
    h: float = 1e-4,
    stencil: Stencil = Stencil.CENTRAL,
) -> GradCheckReport:
    """Compare tape gradients against finite differences for every coordinate
    of every named input.

    ``central`` is (f(x+h) - f(x-h)) / 2h. ``five_point`` is
    (8 (f(x+h) - f(x-h)) - (f(x+2h) - f(x-2h))) / 12h, whose truncation error is
    O(h^4) instead of O(h^2).
    """
    offsets, weights, divisor = STENCILS[Stencil(stencil)]
    if h <= 0:
        raise ValueError(f"step must be positive, got {h}")

    tape = Tape()
    leaves = {name: tape.leaf(value, name) for name, value in inputs.items()}
    loss = loss_fn(tape, leaves)
    grads = tape.backward(loss)

    entries = []
    for name, value in inputs.items():
        analytic = grads[leaves[name].id].data
        flat = value.data
        worst_rel, worst_index, worst_pair = -1.0, 0, (0.0, 0.0)
        max_abs = 0.0
        for index in range(value.size):
            samples = []
            for offset in offsets:
                shifted = flat[index] + offset * h
                perturbed = dict(inputs)
                perturbed[name] = value.with_value(index, shifted)
                try:
                    samples.append(_evaluate(loss_fn, perturbed))
                except NonFiniteError as e:
                    raise NonFiniteError(
                        f"non-finite loss while perturbing {name}[{index}]",
                        {"name": name, "index": index, **e.context},
                    ) from e
            numeric = sum(w * p for w, p in zip(weights, samples)) / (divisor * h)
            exact = float(analytic[index])
            rel = relative_error(exact, numeric)
            max_abs = max(max_abs, abs(exact - numeric))
            if rel > worst_rel:
                worst_rel, worst_index, worst_pair = rel, index, (exact, numeric)
        entries.append(
            ParameterGradError(
                name=name,
                max_rel_error=worst_rel,
                max_abs_error=max_abs,
                worst_index=worst_index,
                worst_analytic=worst_pair[0],
                worst_numeric=worst_pair[1],
            )
        )

    report = GradCheckReport(step=h, stencil=stencil, entries=entries)
    logger.debug(f"Gradient check over {len(entries)} tensors: max rel {report.max_rel_error:.3e}")
    return report
