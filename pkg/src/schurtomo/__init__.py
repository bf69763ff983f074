"""Classical simulator for streaming Schur-sampling tomography."""

__version__ = "0.1.0"
