"""Hybrid additive models: algebraic prior + ML residual, trained four ways."""

__version__ = "0.1.0"
