"""Thompson-sampling near-field beam training."""

__version__ = "0.1.0"
