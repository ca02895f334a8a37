from .tensor import Rng, Tensor

__all__ = ["Rng", "Tensor"]
