"""Optimal-transport neural topic modeling with LLM-refined topic words."""

__version__ = "0.1.0"
