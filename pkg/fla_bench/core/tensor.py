"""Immutable dense tensor and the seeded generator used for initialization."""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from ..exceptions import DimensionError, NonFiniteError


class Tensor:
    """Row-major float64 array that cannot be modified after construction.

    Rank is at least 1; scalars are stored with shape ``(1,)``.
    """

    __slots__ = ("_array",)

    def __init__(self, data, shape: Sequence[int] | None = None):
        if isinstance(data, Tensor):
            data = data.array
        array = np.array(data, dtype=np.float64, copy=True)
        if shape is not None:
            shape = tuple(int(e) for e in shape)
            if int(np.prod(shape)) != array.size:
                raise DimensionError(
                    f"cannot lay out {array.size} scalars as {shape}",
                    {"shape": shape, "size": array.size},
                )
            array = array.reshape(shape)
        self._array = _freeze(array, op="construct")

    @classmethod
    def _adopt(cls, array: np.ndarray, op: str = "op") -> Tensor:
        """Wrap an array freshly produced by a primitive without copying it."""
        tensor = cls.__new__(cls)
        tensor._array = _freeze(
            np.ascontiguousarray(array, dtype=np.float64), op=op
        )
        return tensor

    @classmethod
    def zeros(cls, shape: Sequence[int]) -> Tensor:
        return cls._adopt(np.zeros(tuple(shape)), op="zeros")

    @classmethod
    def ones(cls, shape: Sequence[int]) -> Tensor:
        return cls._adopt(np.ones(tuple(shape)), op="ones")

    @classmethod
    def full(cls, shape: Sequence[int], value: float) -> Tensor:
        return cls._adopt(np.full(tuple(shape), float(value)), op="full")

    @classmethod
    def scalar(cls, value: float) -> Tensor:
        return cls._adopt(np.array([float(value)]), op="scalar")

    @classmethod
    def eye(cls, n: int) -> Tensor:
        return cls._adopt(np.eye(n), op="eye")

    @classmethod
    def from_flat(cls, shape: Sequence[int], data: Iterable[float]) -> Tensor:
        return cls(list(data), shape=shape)

    @property
    def shape(self) -> tuple[int, ...]:
        return self._array.shape

    @property
    def rank(self) -> int:
        return self._array.ndim

    @property
    def size(self) -> int:
        return self._array.size

    @property
    def array(self) -> np.ndarray:
        """Read-only view of the underlying array."""
        return self._array

    @property
    def data(self) -> np.ndarray:
        """Flat row-major read-only view."""
        return self._array.reshape(-1)

    def item(self, *index: int) -> float:
        if not index:
            if self.size != 1:
                raise DimensionError(
                    "item() without an index needs a single-element tensor",
                    {"shape": self.shape},
                )
            return float(self._array.reshape(-1)[0])
        return float(self._array[index])

    def tolist(self) -> list:
        return self._array.tolist()

    def identical(self, other: Tensor) -> bool:
        """Bitwise equality, including the sign of zeros."""
        return (
            self.shape == other.shape
            and self._array.tobytes() == other._array.tobytes()
        )

    def allclose(self, other: Tensor, atol: float = 0.0, rtol: float = 0.0) -> bool:
        return self.shape == other.shape and bool(
            np.allclose(self._array, other._array, atol=atol, rtol=rtol)
        )

    def max_abs_diff(self, other: Tensor) -> float:
        if self.shape != other.shape:
            raise DimensionError(
                "shape mismatch",
                {"left": self.shape, "right": other.shape},
            )
        return float(np.max(np.abs(self._array - other._array)))

    def with_value(self, flat_index: int, value: float) -> Tensor:
        """Copy with one coordinate replaced (used by mixing checks and finite differences)."""
        array = self._array.copy().reshape(-1)
        array[flat_index] = value
        return Tensor._adopt(array.reshape(self.shape), op="with_value")

    def __repr__(self) -> str:
        return f"Tensor(shape={list(self.shape)}, data={np.array2string(self._array.reshape(-1), threshold=8)})"

    def __reduce__(self):
        return (Tensor, (self._array,))


def _freeze(array: np.ndarray, op: str) -> np.ndarray:
    if array.ndim == 0:
        array = array.reshape(1)
    if any(extent < 1 for extent in array.shape):
        raise DimensionError(
            f"{op}: every extent must be positive, got {list(array.shape)}",
            {"op": op, "shape": array.shape},
        )
    if not np.isfinite(array).all():
        raise NonFiniteError(f"{op} produced a non-finite value", {"op": op})
    array.setflags(write=False)
    return array


class Rng:
    """Seeded PCG64 stream; identical seeds give identical samples on every platform."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._generator = np.random.Generator(np.random.PCG64(self.seed))

    def uniform(
        self, shape: Sequence[int], low: float = -1.0, high: float = 1.0
    ) -> Tensor:
        # Generator.random is the raw 53-bit stream, stable across numpy releases
        raw = self._generator.random(tuple(shape))
        return Tensor._adopt(low + (high - low) * raw, op="uniform")

    def normal(self, shape: Sequence[int], scale: float = 1.0) -> Tensor:
        return Tensor._adopt(
            scale * self._generator.standard_normal(tuple(shape)), op="normal"
        )

    def integers(self, low: int, high: int) -> int:
        """Integer in the closed range [low, high]."""
        return int(self._generator.integers(low, high + 1))

    def spawn(self, n: int) -> list[Rng]:
        seeds = np.random.SeedSequence(self.seed).spawn(n)
        return [Rng(int(s.generate_state(1, dtype=np.uint64)[0] >> 1)) for s in seeds]
