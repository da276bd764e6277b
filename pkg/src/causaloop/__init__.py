"""Exact engine for cyclic, fine-tuned causal models over finite variables."""

__all__ = ["__version__"]

__version__ = "0.1.0"
