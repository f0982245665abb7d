"""Multi-view exploration maximization at desk scale."""

__version__ = "0.1.0"
