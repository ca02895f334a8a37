from . import functional
from .gradcheck import grad_check_function, relative_error
from .tape import Node, Tape, Var

__all__ = [
    "functional",
    "grad_check_function",
    "relative_error",
    "Node",
    "Tape",
    "Var",
]
