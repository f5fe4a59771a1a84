"""Lookahead diffusion samplers verified against analytic targets."""

__version__ = "0.1.0"
