"""Finite element toolkit for fourth-order diffusion with dynamic (Wentzell-type) boundary conditions."""

__version__ = "0.1.0"
