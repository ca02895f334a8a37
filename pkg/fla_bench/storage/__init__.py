from .flt1 import decode, encode, read_tensor, write_tensor

__all__ = ["decode", "encode", "read_tensor", "write_tensor"]
