"""Finite-alphabet polar decoding: quantizer design and bit-accurate SC/SCL runtime."""

__version__ = "0.1.0"
