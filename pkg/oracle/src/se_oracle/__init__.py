"""Independent torch reference for the streaming enhancement engine."""

__version__ = "0.1.0"
