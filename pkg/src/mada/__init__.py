"""Multi-agent design exploration at desk scale."""

__version__ = "0.1.0"
