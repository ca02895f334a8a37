"""Append-only operation tape with reverse-mode accumulation."""

from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from ..core.tensor import Tensor
from ..exceptions import BackwardError
from ..logging_utils import get_logger

logger = get_logger(__name__)

LEAF = "leaf"

# op tag -> rule(node, input values, output gradient) -> one gradient (or None) per input
BackwardRule = Callable[
    ["Node", Sequence[np.ndarray], np.ndarray], Sequence[np.ndarray | None]
]
BACKWARD_RULES: dict[str, BackwardRule] = {}


def register_backward(op: str) -> Callable[[BackwardRule], BackwardRule]:
    def decorator(rule: BackwardRule) -> BackwardRule:
        BACKWARD_RULES[op] = rule
        return rule

    return decorator


@dataclass(frozen=True)
class Node:
    id: int
    op: str
    inputs: tuple[int, ...]
    value: Tensor
    ctx: Mapping[str, Any] = field(default_factory=dict)
    name: str | None = None


class Var:
    """Handle to a node on a tape."""

    __slots__ = ("tape", "id")

    def __init__(self, tape: Tape, node_id: int):
        self.tape = tape
        self.id = node_id

    @property
    def node(self) -> Node:
        return self.tape.nodes[self.id]

    @property
    def value(self) -> Tensor:
        return self.tape.nodes[self.id].value

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def __repr__(self) -> str:
        node = self.node
        return f"Var(id={self.id}, op={node.op}, shape={list(node.value.shape)})"


class Tape:
    def __init__(self):
        self._nodes: list[Node] = []

    @property
    def nodes(self) -> tuple[Node, ...]:
        return tuple(self._nodes)

    def __len__(self) -> int:
        return len(self._nodes)

    def leaf(self, value: Tensor, name: str | None = None) -> Var:
        return self._append(LEAF, (), value, {}, name)

    def record(
        self, op: str, inputs: Sequence[Var], value: Tensor, **ctx: Any
    ) -> Var:
        for var in inputs:
            if var.tape is not self:
                raise BackwardError(
                    f"{op}: input {var.id} was recorded on another tape"
                )
        return self._append(op, tuple(v.id for v in inputs), value, ctx, None)

    def _append(self, op, inputs, value, ctx, name) -> Var:
        node = Node(len(self._nodes), op, inputs, value, MappingProxyType(ctx), name)
        self._nodes.append(node)
        return Var(self, node.id)

    def leaves(self) -> list[Node]:
        return [n for n in self._nodes if n.op == LEAF]

    def backward(self, loss: Var) -> dict[int, Tensor]:
        """Gradient of a single-element loss with respect to every leaf.

        Leaves the loss does not depend on receive zeros of their own shape.
        """
        if loss.tape is not self:
            raise BackwardError("loss was recorded on another tape")
        root = self._nodes[loss.id]
        if root.value.size != 1:
            raise BackwardError(
                f"loss must be scalar, got shape {list(root.value.shape)}",
                {"shape": root.value.shape},
            )

        grads: dict[int, np.ndarray] = {root.id: np.ones(root.value.shape)}
        for node in reversed(self._nodes[: root.id + 1]):
            if node.op == LEAF or node.id not in grads:
                continue
            rule = BACKWARD_RULES.get(node.op)
            if rule is None:
                raise BackwardError(
                    f"no backward rule for op '{node.op}'", {"node": node.id}
                )
            grad = grads.pop(node.id)
            inputs = [self._nodes[i].value.array for i in node.inputs]
            for input_id, input_grad in zip(node.inputs, rule(node, inputs, grad)):
                if input_grad is None:
                    continue
                if input_id in grads:
                    grads[input_id] = grads[input_id] + input_grad
                else:
                    grads[input_id] = input_grad

        result = {}
        for leaf in self.leaves():
            grad = grads.get(leaf.id)
            if grad is None:
                result[leaf.id] = Tensor.zeros(leaf.value.shape)
            else:
                result[leaf.id] = Tensor._adopt(
                    np.array(grad, dtype=np.float64).reshape(leaf.value.shape),
                    op="backward",
                )
        logger.debug(f"Backward over {root.id + 1} nodes, {len(result)} leaves")
        return result

    def gradients_by_name(self, loss: Var) -> dict[str, Tensor]:
        grads = self.backward(loss)
        return {
            node.name: grads[node.id]
            for node in self.leaves()
            if node.name is not None
        }
