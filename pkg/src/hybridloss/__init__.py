"""Hybrid log/hinge losses for multiclass and chain-structured prediction."""

__version__ = "0.1.0"
