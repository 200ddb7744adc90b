"""Version information for the cocarry package."""

__version__ = "0.1.0"
