"""Tabular QV-learning and advantage-decomposition agents with exact DP oracles."""

__version__ = "0.1.0"
