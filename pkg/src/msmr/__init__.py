"""Multi-path spiral-GCN hand mesh reconstruction toolkit."""

__version__ = "0.1.0"
