"""Topology-aware graph coarsening and continual learning on timestamped graph streams."""

__version__ = "0.1.0"
