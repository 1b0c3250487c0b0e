"""Contextual word embedding extraction for masked language models."""

__version__ = "0.1.0"
