"""Minimizers of a forced, sign-changing Allen-Cahn type energy on the line."""

__version__ = "0.1.0"
