"""Path-aware graph attention on heterogeneous directed graphs."""

__version__ = "0.1.0"
