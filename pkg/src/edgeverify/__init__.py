"""Sampling-based re-execution for outsourced edge computation."""
__version__ = "0.1.0"
