"""Exact-rational toolkit for the SLP -> synchronous circuit -> 2D-Brouwer ->
caterpillar polymatrix game reduction chain."""

__version__ = "0.1.0"
