"""Shortcut removal with importance-weighted MMD regularization."""

__version__ = "0.1.0"
