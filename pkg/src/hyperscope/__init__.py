"""Explicit-state model checking for synchronous and asynchronous hyperproperties."""

__version__ = "0.1.0"
