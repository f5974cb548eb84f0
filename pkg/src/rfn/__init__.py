"""Checker, bounded verifier, and interpreter for a language with module refinement."""

__version__ = "0.1.0"
