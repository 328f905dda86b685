"""Self-adaptive moving mesh solvers for the short pulse equation."""

__version__ = "0.1.0"
