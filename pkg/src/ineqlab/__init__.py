"""Numerical laboratory for sharp Sobolev, Gagliardo-Nirenberg-Sobolev and
logarithmic Sobolev inequalities, their deficits and their stability."""

__version__ = "0.1.0"
